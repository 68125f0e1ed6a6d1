"""Command line interface: train, predict, recommend, evaluate, ensemble.

Every command is deterministic given its flags (seeds default to 42), and
identical invocations write byte-identical model files except for the
creation timestamp. Exit codes: 0 success, 2 argument or config problems,
3 data problems, 4 training divergence. Per-epoch trace lines go to
standard error; result summaries go to standard output.

A flat key=value config file (--config) can hold any flag value; explicit
command line flags override it. Unknown keys are rejected with a nearest
known key suggested.
"""

import argparse
import difflib
import sys
from dataclasses import dataclass

import numpy as np

from . import svdcf
from .data import CsvSchema, RatingDataset, negative_sample, parse_csv
from .ensemble import BlendModel, bag_train, stack_fit, vote_recommend
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    DivergenceError,
    LatentRecError,
    ValidationError,
)
from .factor import TrainConfig, funk_train, itemcf_similarity, svdpp_train
from .fm import EncoderSpec, encode, ffm_train, fm_train
from .metrics import MetricReport, mae, rmse, topn_metrics
from .persist import IndexedModel, ModelBundle, load_model, save_model

EXIT_OK = 0
EXIT_ARGS = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

ALGO_CHOICES = ("svd", "funk", "svdpp", "itemcf", "fm", "ffm")


def _parse_bool(text):
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_scale(text):
    parts = str(text).split(":")
    if len(parts) != 2:
        raise ValueError(f"expected LO:HI, got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _parse_int_list(text):
    return [int(part) for part in str(text).split(",") if part.strip()]


def _parse_float_list(text):
    return [float(part) for part in str(text).split(",") if part.strip()]


@dataclass(frozen=True)
class Opt:
    """One configurable flag: its name, parser, default, and metadata."""

    name: str
    parse: callable
    default: object = None
    flag: str = None
    choices: tuple = None
    help: str = ""
    required: bool = False
    is_switch: bool = False

    @property
    def key(self):
        """Config-file spelling: the flag without dashes."""
        return (self.flag or f"--{self.name}").lstrip("-").replace("-", "_")

    def add_to(self, parser):
        flag = self.flag or f"--{self.name}"
        if self.is_switch:
            parser.add_argument(flag, dest=self.name, action="store_true",
                                default=False, help=self.help)
        else:
            parser.add_argument(flag, dest=self.name, type=self.parse,
                                choices=self.choices, default=None,
                                help=self.help)


HYPER_OPTIONS = (
    Opt("factors", int, 2, help="latent dimension (funk, svdpp, fm, ffm)"),
    Opt("alpha", float, 0.01, help="learning rate"),
    Opt("lam", float, 0.02, flag="--lambda", help="regularization strength"),
    Opt("epochs", int, 100, help="training epochs"),
    Opt("seed", int, 42, help="random seed"),
    Opt("optimizer", str, "sgd", choices=("sgd", "momentum", "adaptive"),
        help="update rule for the gradient trainers"),
    Opt("impute", str, "user", choices=("global", "user", "item"),
        help="mean-fill strategy for svd"),
    Opt("rank_rule", str, "energy:0.95", flag="--rank-rule",
        help="svd rank selection: energy:T, ratio:C, or fixed:F"),
    Opt("similarity_mode", str, "paper-dot", flag="--similarity-mode",
        choices=("paper-dot", "cosine"), help="svd item similarity"),
    Opt("neighborhood", int, None, help="neighbor cut for svd and itemcf"),
    Opt("neg_ratio", float, None, flag="--neg-ratio",
        help="negatives per positive for implicit data"),
    Opt("kind", str, "explicit", choices=("explicit", "implicit"),
        help="rating kind of the input csv"),
    Opt("loss", str, "squared", choices=("squared", "logistic"),
        help="training loss for fm and ffm"),
    Opt("scale", _parse_scale, (1.0, 5.0), help="rating bounds as LO:HI"),
)

TRAIN_OPTIONS = (
    Opt("input", str, required=True, help="ratings csv"),
    Opt("output", str, required=True, help="model file to write"),
    Opt("algo", str, required=True, choices=ALGO_CHOICES,
        help="algorithm to train"),
) + HYPER_OPTIONS

RECOMMEND_OPTIONS = (
    Opt("k", int, 10, help="list length"),
)

EVALUATE_OPTIONS = (
    Opt("test", str, required=True, help="held-out ratings csv"),
    Opt("k", _parse_int_list, None,
        help="top-N cutoffs, comma separated (e.g. 5,10)"),
    Opt("kind", str, "explicit", choices=("explicit", "implicit"),
        help="rating kind of the test csv"),
    Opt("json", _parse_bool, False, is_switch=True,
        help="print the report as JSON instead of a table"),
)

BLEND_OPTIONS = (
    Opt("output", str, required=True, help="ensemble file to write"),
    Opt("weights", _parse_float_list, None,
        help="member weights, comma separated; default uniform"),
)

VOTE_OPTIONS = (
    Opt("user", str, required=True, help="user token to recommend for"),
    Opt("k", int, 10, help="list length"),
)

BAG_OPTIONS = (
    Opt("input", str, required=True, help="ratings csv"),
    Opt("output", str, required=True, help="ensemble file to write"),
    Opt("algo", str, required=True, choices=ALGO_CHOICES,
        help="member algorithm"),
    Opt("members", int, 5, help="number of bootstrap members"),
) + HYPER_OPTIONS

STACK_OPTIONS = (
    Opt("output", str, required=True, help="ensemble file to write"),
    Opt("holdout", str, required=True,
        help="held-out ratings csv for fitting the coefficients"),
)

ALL_CONFIG_KEYS = sorted(
    {
        opt.key
        for options in (TRAIN_OPTIONS, RECOMMEND_OPTIONS, EVALUATE_OPTIONS,
                        BLEND_OPTIONS, VOTE_OPTIONS, BAG_OPTIONS, STACK_OPTIONS)
        for opt in options
    }
)


def read_config(path):
    """Parse a key=value config file into a string dict.

    Blank lines and # comments are skipped. Keys are validated against
    the full flag namespace; an unknown key is rejected with the nearest
    known key suggested.
    """
    try:
        with open(path, encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    entries = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(
                f"{path}:{line_no}: expected key=value, got {line!r}"
            )
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in ALL_CONFIG_KEYS:
            close = difflib.get_close_matches(key, ALL_CONFIG_KEYS, n=1)
            hint = f"; did you mean {close[0]!r}?" if close else ""
            raise ConfigError(f"unknown config key {key!r}{hint}")
        entries[key] = value.strip()
    return entries


def resolve(args, options):
    """Final option values: command line, then config file, then default."""
    config = read_config(args.config) if getattr(args, "config", None) else {}
    values = {}
    for opt in options:
        given = getattr(args, opt.name)
        if opt.is_switch:
            fallback = False
            if opt.key in config:
                fallback = opt.parse(config[opt.key])
            values[opt.name] = bool(given) or fallback
            continue
        if given is not None:
            values[opt.name] = given
        elif opt.key in config:
            try:
                parsed = opt.parse(config[opt.key])
            except ValueError as exc:
                raise ConfigError(
                    f"bad value for config key {opt.key!r}: {exc}"
                ) from exc
            if opt.choices and parsed not in opt.choices:
                raise ConfigError(
                    f"config key {opt.key!r} must be one of {', '.join(opt.choices)}"
                )
            values[opt.name] = parsed
        else:
            values[opt.name] = opt.default
    for opt in options:
        if opt.required and values[opt.name] is None:
            raise ConfigError(f"missing required option --{opt.key.replace('_', '-')}")
    return values


def _read_ratings(path, schema):
    try:
        with open(path, encoding="utf-8") as handle:
            return parse_csv(handle, schema)
    except OSError as exc:
        raise DataError(f"cannot read ratings file {path}: {exc}") from exc


def _train_config(values):
    try:
        return TrainConfig(
            f=values["factors"],
            alpha=values["alpha"],
            lam=values["lam"],
            epochs=values["epochs"],
            seed=values["seed"],
            optimizer=values["optimizer"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _train_algorithm(algo, ds, values):
    """Train one model; returns (model, encoder, observed, trace)."""
    if algo == "svd":
        try:
            svdcf.parse_rank_rule(values["rank_rule"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        model = svdcf.fit(
            ds,
            impute_strategy=values["impute"],
            rank_rule=values["rank_rule"],
            similarity_mode=values["similarity_mode"],
            neighborhood=values["neighborhood"],
        )
        return model, None, None, []
    if algo == "itemcf":
        model = itemcf_similarity(ds, k=values["neighborhood"])
        return model, None, None, []
    config = _train_config(values)
    if algo == "funk":
        model = funk_train(ds, config)
        return model, None, None, model.trace
    if algo == "svdpp":
        model = svdpp_train(ds, config)
        return model, None, None, model.trace
    if algo in ("fm", "ffm"):
        spec = EncoderSpec([
            ("user", "categorical", sorted(ds.user_index)),
            ("item", "categorical", sorted(ds.item_index)),
        ])
        samples = [(encode((u, i), spec), r) for u, i, r in ds.triples]
        trainer = fm_train if algo == "fm" else ffm_train
        model = trainer(samples, loss=values["loss"], config=config)
        observed = [row.tolist() for row in ds.items_by_user()]
        return model, spec, observed, model.trace
    raise ConfigError(f"unknown algorithm {algo!r}")


def _print_trace(trace):
    for epoch, value in enumerate(trace, start=1):
        print(f"epoch {epoch} loss {value:.6f}", file=sys.stderr)


def _format_rounded(value):
    return str(int(value)) if float(value).is_integer() else f"{value:g}"


def cmd_train(args):
    values = resolve(args, TRAIN_OPTIONS)
    schema = CsvSchema(kind=values["kind"], scale=values["scale"])
    ds = _read_ratings(values["input"], schema)
    if values["neg_ratio"] is not None:
        if values["kind"] != "implicit":
            raise ConfigError("--neg-ratio requires --kind implicit")
        ds = negative_sample(ds, ratio=values["neg_ratio"], seed=values["seed"])
    algo = values["algo"]
    model, encoder, observed, trace = _train_algorithm(algo, ds, values)
    _print_trace(trace)
    bundle = ModelBundle(
        algorithm=algo,
        model=model,
        user_index=ds.user_index,
        item_index=ds.item_index,
        scale=ds.scale,
        encoder=encoder,
        observed=observed,
    )
    save_model(bundle, values["output"])
    print(f"trained {algo}: {ds.n_users} users x {ds.n_items} items, "
          f"{len(ds)} ratings")
    if trace:
        print(f"final loss {trace[-1]:.6f}")
    elif algo == "svd":
        print(f"retained rank {model.f}")
    elif algo == "itemcf":
        print(f"neighborhood size {model.K}")
    print(f"wrote {values['output']}")
    return EXIT_OK


def cmd_predict(args):
    bundle = load_model(args.model)
    value = bundle.predict(args.user, args.item)
    rounded = svdcf.round_to_scale(value, bundle.scale)
    print(f"{value:.2f} (rounded: {_format_rounded(rounded)})")
    return EXIT_OK


def cmd_recommend(args):
    values = resolve(args, RECOMMEND_OPTIONS)
    if values["k"] < 1:
        raise ConfigError(f"k must be >= 1, got {values['k']}")
    bundle = load_model(args.model)
    for token, score in bundle.recommend(args.user, values["k"]):
        print(f"{token}\t{score:.4f}")
    return EXIT_OK


def cmd_evaluate(args):
    values = resolve(args, EVALUATE_OPTIONS)
    bundle = load_model(args.model)
    schema = CsvSchema(kind=values["kind"], scale=bundle.scale)
    test = _read_ratings(values["test"], schema)
    preds = [bundle.predict(u, i) for u, i, _ in test.triples]
    truth = [r for _, _, r in test.triples]
    precision = {}
    recall = {}
    n_users = 0
    cutoffs = values["k"] or []
    if cutoffs:
        if min(cutoffs) < 1:
            raise ConfigError("top-N cutoffs must be >= 1")
        positives = {}
        for u, i, r in test.triples:
            if r > 0:
                positives.setdefault(u, set()).add(i)
        users = sorted({u for u, _, _ in test.triples})
        deepest = max(cutoffs)
        recs = {u: [t for t, _ in bundle.recommend(u, deepest)] for u in users}
        for k in cutoffs:
            precision[k], recall[k] = topn_metrics(recs, positives, k)
        n_users = len(positives)
    report = MetricReport(
        rmse=rmse(preds, truth),
        mae=mae(preds, truth),
        precision_at_k=precision,
        recall_at_k=recall,
        n_pairs=len(test),
        n_users=n_users,
    )
    print(report.to_json() if values["json"] else report.format_table())
    return EXIT_OK


def _load_members(paths):
    bundles = [load_model(path) for path in paths]
    first = bundles[0]
    for path, bundle in zip(paths[1:], bundles[1:]):
        if (bundle.user_index != first.user_index
                or bundle.item_index != first.item_index):
            raise ValidationError(
                f"member {path} has different index maps than {paths[0]}"
            )
        if bundle.scale != first.scale:
            raise ValidationError(
                f"member {path} has scale {bundle.scale}, "
                f"expected {first.scale}"
            )
    return bundles


def _save_ensemble(model, reference, output):
    bundle = ModelBundle(
        algorithm="ensemble",
        model=model,
        user_index=reference.user_index,
        item_index=reference.item_index,
        scale=reference.scale,
    )
    save_model(bundle, output)


def cmd_ensemble_blend(args):
    values = resolve(args, BLEND_OPTIONS)
    bundles = _load_members(args.members)
    weights = values["weights"]
    if weights is None:
        weights = [1.0 / len(bundles)] * len(bundles)
    if len(weights) != len(bundles):
        raise ConfigError(
            f"{len(bundles)} members but {len(weights)} weights"
        )
    try:
        model = BlendModel(members=[b.scorer for b in bundles],
                           weights=weights)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    _save_ensemble(model, bundles[0], values["output"])
    print(f"blended {len(bundles)} members")
    print(f"wrote {values['output']}")
    return EXIT_OK


def cmd_ensemble_vote(args):
    values = resolve(args, VOTE_OPTIONS)
    if values["k"] < 1:
        raise ConfigError(f"k must be >= 1, got {values['k']}")
    bundles = _load_members(args.members)
    first = bundles[0]
    user = values["user"]
    if user not in first.user_index:
        raise ValidationError(f"unknown user {user!r}")
    tokens = {at: token for token, at in first.item_index.items()}
    ranked = vote_recommend(
        [b.scorer for b in bundles], first.user_index[user], values["k"]
    )
    for item, votes in ranked:
        print(f"{tokens[item]}\t{votes}")
    return EXIT_OK


def cmd_ensemble_bag(args):
    values = resolve(args, BAG_OPTIONS)
    if values["members"] < 1:
        raise ConfigError(f"--members must be >= 1, got {values['members']}")
    schema = CsvSchema(kind=values["kind"], scale=values["scale"])
    ds = _read_ratings(values["input"], schema)
    algo = values["algo"]
    user_tokens = [t for t, _ in sorted(ds.user_index.items(), key=lambda kv: kv[1])]
    item_tokens = [t for t, _ in sorted(ds.item_index.items(), key=lambda kv: kv[1])]

    def trainer(resampled):
        model, encoder, observed, _ = _train_algorithm(algo, resampled, values)
        return IndexedModel(algo, model, encoder=encoder,
                            user_tokens=user_tokens, item_tokens=item_tokens,
                            observed=observed)

    bag = bag_train(trainer, ds, b=values["members"], seed=values["seed"])
    _save_ensemble(bag, ds, values["output"])
    print(f"bagged {values['members']} members")
    print(f"wrote {values['output']}")
    return EXIT_OK


def cmd_ensemble_stack(args):
    values = resolve(args, STACK_OPTIONS)
    bundles = _load_members(args.members)
    first = bundles[0]
    schema = CsvSchema(kind="explicit", scale=first.scale)
    raw = _read_ratings(values["holdout"], schema)
    holdout = RatingDataset(
        raw.triples,
        kind=raw.kind,
        scale=raw.scale,
        user_index=first.user_index,
        item_index=first.item_index,
    )
    model = stack_fit([b.scorer for b in bundles], holdout)
    _save_ensemble(model, first, values["output"])
    coefficients = ", ".join(f"{w:.6f}" for w in model.weights)
    print(f"stacked {len(bundles)} members: "
          f"coefficients [{coefficients}] intercept {model.intercept:.6f}")
    print(f"wrote {values['output']}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="latentrec",
        description="Train, apply, evaluate, and combine recommender models.",
    )
    commands = parser.add_subparsers(dest="command", metavar="command")

    def command(name, handler, options=(), positionals=(), help=""):
        sub = commands.add_parser(name, help=help)
        for spec in positionals:
            sub.add_argument(**spec)
        sub.add_argument("--config", default=None,
                         help="key=value file providing flag defaults")
        for opt in options:
            opt.add_to(sub)
        sub.set_defaults(handler=handler)
        return sub

    command("train", cmd_train, TRAIN_OPTIONS, help="train a model from a csv")
    command(
        "predict", cmd_predict,
        positionals=(
            {"dest": "model", "help": "model file"},
            {"dest": "user", "help": "user token"},
            {"dest": "item", "help": "item token"},
        ),
        help="print one prediction",
    )
    command(
        "recommend", cmd_recommend, RECOMMEND_OPTIONS,
        positionals=(
            {"dest": "model", "help": "model file"},
            {"dest": "user", "help": "user token"},
        ),
        help="print top-N unseen items",
    )
    command(
        "evaluate", cmd_evaluate, EVALUATE_OPTIONS,
        positionals=({"dest": "model", "help": "model file"},),
        help="score a model on held-out ratings",
    )

    ensemble = commands.add_parser("ensemble", help="combine trained models")
    subcommands = ensemble.add_subparsers(dest="subcommand", metavar="method")

    def ensemble_command(name, handler, options, with_members=True, help=""):
        sub = subcommands.add_parser(name, help=help)
        if with_members:
            sub.add_argument("members", nargs="+", help="member model files")
        sub.add_argument("--config", default=None,
                         help="key=value file providing flag defaults")
        for opt in options:
            opt.add_to(sub)
        sub.set_defaults(handler=handler)

    ensemble_command("blend", cmd_ensemble_blend, BLEND_OPTIONS,
                     help="weighted average of member predictions")
    ensemble_command("vote", cmd_ensemble_vote, VOTE_OPTIONS,
                     help="rank items by member top-k votes")
    ensemble_command("bag", cmd_ensemble_bag, BAG_OPTIONS, with_members=False,
                     help="train members on bootstrap resamples")
    ensemble_command("stack", cmd_ensemble_stack, STACK_OPTIONS,
                     help="fit least-squares blend coefficients on a holdout")
    return parser


def main(argv=None):
    """Entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_ARGS
    if not hasattr(args, "handler"):
        parser.print_usage(sys.stderr)
        return EXIT_ARGS
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (DivergenceError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except LatentRecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
