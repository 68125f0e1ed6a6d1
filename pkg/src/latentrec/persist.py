"""JSON model files: save and load every trained model type.

A model file is a single JSON document (format_version 1) holding the
algorithm tag, creation metadata, the rating scale, the token index maps,
the algorithm's parameter block, and, when present, the feature-encoder
spec and an ensemble description with nested member blocks. Keys are
sorted and numbers use Python's shortest round-trip decimals, so saving
the same model twice yields byte-identical files except for the
"created" timestamp, and loading reproduces predictions exactly.
"""

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import BlendModel
from .errors import PersistenceError, ValidationError
from .factor import FactorModel, ItemCfModel
from .fm import EncoderSpec, FfmModel, FmModel, encode
from .svdcf import SvdCfModel

FORMAT_VERSION = 1
ALGORITHMS = ("svd", "funk", "svdpp", "itemcf", "fm", "ffm", "ensemble")


class IndexedModel:
    """Uniform index-space view over one trained model.

    The factor and similarity models already speak predict(u, i) and
    recommend(u, k) in index space; the feature-based models need their
    inputs encoded first. This wrapper hides the difference so ensembles
    and the CLI can treat every member alike.
    """

    def __init__(self, algorithm, model, encoder=None, user_tokens=None,
                 item_tokens=None, observed=None):
        self.algorithm = algorithm
        self.model = model
        self.encoder = encoder
        self.user_tokens = user_tokens
        self.item_tokens = item_tokens
        self.observed = observed

    def predict(self, u, i):
        if self.algorithm in ("fm", "ffm"):
            x = encode((self.user_tokens[u], self.item_tokens[i]), self.encoder)
            return float(self.model.predict(x))
        return float(self.model.predict(u, i))

    def recommend(self, u, k):
        if self.algorithm in ("fm", "ffm"):
            if k < 1:
                raise ValueError(f"k must be >= 1, got {k}")
            rated = set() if self.observed is None else set(self.observed[u])
            scored = [
                (i, self.predict(u, i))
                for i in range(len(self.item_tokens))
                if i not in rated
            ]
            scored.sort(key=lambda pair: (-pair[1], pair[0]))
            return scored[:k]
        return self.model.recommend(u, k)


@dataclass
class ModelBundle:
    """A trained model plus everything needed to serve token queries.

    Attributes:
        algorithm: one of svd, funk, svdpp, itemcf, fm, ffm, ensemble.
        model: the trained model object for the algorithm.
        user_index / item_index: token -> index maps from training.
        scale: rating bounds used for rounding and recommendation.
        encoder: feature layout, required for fm and ffm.
        observed: per-user lists of rated item indices; lets the
            feature-based models exclude seen items when recommending.
        created: ISO timestamp; filled at save time when empty.
    """

    algorithm: str
    model: object
    user_index: dict
    item_index: dict
    scale: tuple = (1.0, 5.0)
    encoder: EncoderSpec = None
    observed: list = None
    created: str = ""

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm tag {self.algorithm!r}")
        if self.algorithm in ("fm", "ffm") and self.encoder is None:
            raise ValidationError(f"{self.algorithm} bundles need an encoder spec")
        self.scale = (float(self.scale[0]), float(self.scale[1]))
        self._user_tokens = _tokens_by_index(self.user_index)
        self._item_tokens = _tokens_by_index(self.item_index)

    @property
    def scorer(self):
        """Index-space predictor for this bundle."""
        if self.algorithm == "ensemble":
            return self.model
        return IndexedModel(
            self.algorithm,
            self.model,
            encoder=self.encoder,
            user_tokens=self._user_tokens,
            item_tokens=self._item_tokens,
            observed=self.observed,
        )

    def predict(self, user, item):
        """Raw prediction for a (user token, item token) pair."""
        u = self._lookup(self.user_index, user, "user")
        i = self._lookup(self.item_index, item, "item")
        return self.scorer.predict(u, i)

    def recommend(self, user, k):
        """Top-k unseen items for a user token as (item token, score)."""
        u = self._lookup(self.user_index, user, "user")
        ranked = self.scorer.recommend(u, k)
        return [(self._item_tokens[i], float(score)) for i, score in ranked]

    @staticmethod
    def _lookup(index, token, role):
        token = str(token)
        if token not in index:
            raise ValidationError(f"unknown {role} {token!r}")
        return index[token]


def _tokens_by_index(index):
    tokens = [None] * len(index)
    for token, at in index.items():
        tokens[at] = token
    return tokens


def _nested(a):
    return np.asarray(a, dtype=float).tolist()


def _int_rows(rows):
    return [[int(v) for v in row] for row in rows]


def _encoder_doc(spec):
    return {
        "columns": [
            {
                "name": c.name,
                "kind": c.kind,
                "categories": list(c.categories) if c.categories else None,
            }
            for c in spec.columns
        ]
    }


def _encoder_from(doc):
    return EncoderSpec(
        [(c["name"], c["kind"], c["categories"]) for c in doc["columns"]]
    )


def _parameters(algorithm, model, observed=None):
    if algorithm == "svd":
        return {
            "r_star": _nested(model.r_star),
            "mask": _nested(model.mask),
            "f": int(model.f),
            "similarity_mode": model.similarity_mode,
            "neighborhood": model.neighborhood,
        }
    if algorithm == "funk":
        return {
            "p": _nested(model.P),
            "q": _nested(model.Q),
            "f": int(model.f),
            "rated": None if model.N is None else _int_rows(model.N),
        }
    if algorithm == "svdpp":
        return {
            "p": _nested(model.P),
            "q": _nested(model.Q),
            "y": _nested(model.Y),
            "b_u": _nested(model.b_u),
            "b_i": _nested(model.b_i),
            "mu": float(model.mu),
            "f": int(model.f),
            "rated": _int_rows(model.N),
        }
    if algorithm == "itemcf":
        return {
            "w": _nested(model.W),
            "k": int(model.K),
            "ratings": [
                sorted([int(i), float(r)] for i, r in user.items())
                for user in model.ratings
            ],
        }
    if algorithm in ("fm", "ffm"):
        block = {
            "w0": float(model.w0),
            "w": _nested(model.w),
            "v": _nested(model.V),
            "k": int(model.k),
            "observed": None if observed is None else _int_rows(observed),
        }
        if algorithm == "ffm":
            block["n_fields"] = int(model.n_fields)
        return block
    raise PersistenceError(f"no parameter block for algorithm {algorithm!r}")


def _model_from(algorithm, block, scale):
    if algorithm == "svd":
        return SvdCfModel(
            r_star=np.array(block["r_star"], dtype=float),
            mask=np.array(block["mask"], dtype=float),
            f=int(block["f"]),
            similarity_mode=block["similarity_mode"],
            scale=scale,
            neighborhood=block["neighborhood"],
        )
    if algorithm in ("funk", "svdpp"):
        rated = block.get("rated")
        n_sets = None
        if rated is not None:
            n_sets = [np.array(row, dtype=np.int64) for row in rated]
        common = {
            "kind": algorithm,
            "P": np.array(block["p"], dtype=float),
            "Q": np.array(block["q"], dtype=float),
            "f": int(block["f"]),
            "N": n_sets,
        }
        if algorithm == "svdpp":
            common.update(
                mu=float(block["mu"]),
                b_u=np.array(block["b_u"], dtype=float),
                b_i=np.array(block["b_i"], dtype=float),
                Y=np.array(block["y"], dtype=float),
            )
        return FactorModel(**common)
    if algorithm == "itemcf":
        return ItemCfModel(
            W=np.array(block["w"], dtype=float),
            K=int(block["k"]),
            ratings=[
                {int(i): float(r) for i, r in user} for user in block["ratings"]
            ],
        )
    if algorithm == "fm":
        return FmModel(
            w0=float(block["w0"]),
            w=np.array(block["w"], dtype=float),
            V=np.array(block["v"], dtype=float),
            k=int(block["k"]),
        )
    if algorithm == "ffm":
        return FfmModel(
            w0=float(block["w0"]),
            w=np.array(block["w"], dtype=float),
            V=np.array(block["v"], dtype=float),
            k=int(block["k"]),
            n_fields=int(block["n_fields"]),
        )
    raise PersistenceError(f"cannot rebuild algorithm {algorithm!r}")


def _member_doc(member):
    if not isinstance(member, IndexedModel):
        raise PersistenceError(
            "only file-backed members can be persisted inside an ensemble"
        )
    doc = {
        "algorithm": member.algorithm,
        "parameters": _parameters(member.algorithm, member.model,
                                  observed=member.observed),
    }
    if member.encoder is not None:
        doc["encoder"] = _encoder_doc(member.encoder)
    return doc


def _member_from(doc, scale, user_tokens, item_tokens):
    algorithm = doc["algorithm"]
    block = doc["parameters"]
    model = _model_from(algorithm, block, scale)
    encoder = _encoder_from(doc["encoder"]) if "encoder" in doc else None
    observed = block.get("observed")
    return IndexedModel(
        algorithm,
        model,
        encoder=encoder,
        user_tokens=user_tokens,
        item_tokens=item_tokens,
        observed=observed,
    )


def document(bundle):
    """The bundle as a JSON-ready dict; fills a creation timestamp."""
    created = bundle.created or datetime.now(timezone.utc).isoformat(
        timespec="seconds"
    )
    doc = {
        "format_version": FORMAT_VERSION,
        "algorithm": bundle.algorithm,
        "created": created,
        "library": f"latentrec {__version__}",
        "scale": [bundle.scale[0], bundle.scale[1]],
        "user_index": {t: int(v) for t, v in bundle.user_index.items()},
        "item_index": {t: int(v) for t, v in bundle.item_index.items()},
    }
    if bundle.algorithm == "ensemble":
        model = bundle.model
        doc["ensemble"] = {
            "kind": model.kind,
            "weights": [float(w) for w in model.weights],
            "intercept": float(model.intercept),
            "members": [_member_doc(m) for m in model.members],
        }
    else:
        doc["parameters"] = _parameters(
            bundle.algorithm, bundle.model, observed=bundle.observed
        )
        if bundle.encoder is not None:
            doc["encoder"] = _encoder_doc(bundle.encoder)
    return doc


def save_model(bundle, path):
    """Write the bundle to path; returns the path."""
    text = json.dumps(document(bundle), sort_keys=True, indent=2) + "\n"
    Path(path).write_text(text, encoding="utf-8")
    return path


def load_model(path):
    """Read a model file back into a ModelBundle.

    Raises PersistenceError for unreadable JSON, an unsupported
    format_version, or an unknown algorithm tag.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise PersistenceError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise PersistenceError(f"model file {path} is not a JSON object")
    version = raw.get("format_version")
    if version != FORMAT_VERSION:
        raise PersistenceError(
            f"unsupported format_version {version!r}, expected {FORMAT_VERSION}"
        )
    algorithm = raw.get("algorithm")
    if algorithm not in ALGORITHMS:
        raise PersistenceError(f"unknown algorithm tag {algorithm!r}")
    try:
        scale = (float(raw["scale"][0]), float(raw["scale"][1]))
        user_index = {str(t): int(v) for t, v in raw["user_index"].items()}
        item_index = {str(t): int(v) for t, v in raw["item_index"].items()}
        user_tokens = _tokens_by_index(user_index)
        item_tokens = _tokens_by_index(item_index)
        if algorithm == "ensemble":
            spec = raw["ensemble"]
            members = [
                _member_from(m, scale, user_tokens, item_tokens)
                for m in spec["members"]
            ]
            model = BlendModel(
                members=members,
                weights=np.array(spec["weights"], dtype=float),
                intercept=float(spec["intercept"]),
                kind=spec["kind"],
            )
            encoder = None
            observed = None
        else:
            block = raw["parameters"]
            model = _model_from(algorithm, block, scale)
            encoder = _encoder_from(raw["encoder"]) if "encoder" in raw else None
            observed = block.get("observed")
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise PersistenceError(f"malformed model file {path}: {exc}") from exc
    return ModelBundle(
        algorithm=algorithm,
        model=model,
        user_index=user_index,
        item_index=item_index,
        scale=scale,
        encoder=encoder,
        observed=observed,
        created=str(raw.get("created", "")),
    )
