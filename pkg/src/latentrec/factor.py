"""Learned latent-factor models and the item-neighborhood baseline.

Three model families live here:

    funk_*    plain two-factor approximation R ~ P^T Q trained by
              per-triple gradient descent with L2 regularization
    svdpp_*   the biased extension with implicit item factors
              mu + b_u + b_i + q_i^T (p_u + |N(u)|^(-1/2) sum y_j)
    itemcf_*  statistical item-to-item overlap weights, no learning

User and item vectors are the COLUMNS of P (f x m) and Q (f x n). The
trainers keep row-major transposed working copies internally so that
per-row optimizer updates stay contiguous, and build the model at the end.

Update convention: every SGD step moves a tensor by

    theta += alpha * (err * d(pred)/d(theta) - lambda * theta)

which is -alpha/2 times the gradient of the squared-error-plus-L2 loss as
written (the conventional halved-gradient reading of the update rule). The
loss/gradient helpers below expose the full factor-2 gradients so finite
differences can check them coordinate by coordinate.

The regularizer is summed per training pair, not per parameter, so
frequently observed users and items are penalized more often. That is the
documented behavior, kept as written.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import optim
from .errors import DivergenceError, GradientError, ValidationError

log = logging.getLogger(__name__)

STRATEGIES = ("all", "sequential")


@dataclass
class TrainConfig:
    """Hyperparameters shared by the gradient-descent trainers.

    Args:
        f: latent dimension, at least 1.
        alpha: learning rate, positive.
        lam: L2 regularization weight, nonnegative.
        epochs: full passes over the training triples; 0 returns the
            freshly initialized model untouched.
        seed: RNG seed for factor initialization.
        optimizer: "sgd", "momentum", or "adaptive" (see optim module).
        beta1 / beta2 / eps: optimizer hyperparameters, passed through.
        simultaneous: when True the q-update reads the pre-update p
            instead of the already-updated one. Off by default; the
            default follows the pseudocode statement order where the
            q-update sees the new p.
        strategy: "all" trains every feature at each triple visit;
            "sequential" trains one feature at a time to completion,
            shifting its contribution onto a cached residual pile before
            moving to the next feature.
    """

    f: int = 2
    alpha: float = 0.01
    lam: float = 0.02
    epochs: int = 100
    seed: int = 42
    optimizer: str = "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    simultaneous: bool = False
    strategy: str = "all"

    def __post_init__(self):
        if self.f < 1:
            raise ValueError(f"latent dimension must be >= 1, got {self.f}")
        if self.alpha <= 0:
            raise ValueError(f"learning rate must be positive, got {self.alpha}")
        if self.lam < 0:
            raise ValueError(f"regularization must be >= 0, got {self.lam}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.optimizer not in optim.KINDS:
            raise ValueError(
                f"unknown optimizer {self.optimizer!r}; pick from {optim.KINDS}"
            )
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; pick from {STRATEGIES}"
            )


@dataclass
class FactorModel:
    """A trained factor model.

    Fields:
        kind: "funk" or "svdpp".
        P: f x m user factors (column u is user u's vector).
        Q: f x n item factors (column i is item i's vector).
        f: latent dimension.
        mu / b_u / b_i: global mean and bias vectors, svdpp only.
        Y: f x n implicit item factors, svdpp only.
        N: per-user arrays of rated item indices (ascending).
        trace: per-epoch training RMSE recorded by the trainer.
    """

    kind: str
    P: np.ndarray
    Q: np.ndarray
    f: int
    mu: float = 0.0
    b_u: np.ndarray = None
    b_i: np.ndarray = None
    Y: np.ndarray = None
    N: list = None
    trace: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("funk", "svdpp"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        self.P = np.asarray(self.P, dtype=float)
        self.Q = np.asarray(self.Q, dtype=float)
        if self.P.ndim != 2 or self.Q.ndim != 2:
            raise ValueError("P and Q must be 2-d arrays")
        if self.P.shape[0] != self.f or self.Q.shape[0] != self.f:
            raise ValueError(
                f"factor arrays must have {self.f} rows, got "
                f"{self.P.shape[0]} and {self.Q.shape[0]}"
            )
        has_bias = self.b_u is not None or self.b_i is not None or self.Y is not None
        if self.kind == "svdpp":
            if self.b_u is None or self.b_i is None or self.Y is None:
                raise ValueError("svdpp models need b_u, b_i and Y")
            self.b_u = np.asarray(self.b_u, dtype=float)
            self.b_i = np.asarray(self.b_i, dtype=float)
            self.Y = np.asarray(self.Y, dtype=float)
            if self.b_u.shape != (self.n_users,) or self.b_i.shape != (self.n_items,):
                raise ValueError("bias vectors must match the factor widths")
            if self.Y.shape != self.Q.shape:
                raise ValueError("Y must be shaped like Q")
            if not (
                np.isfinite(self.b_u).all()
                and np.isfinite(self.b_i).all()
                and np.isfinite(self.Y).all()
                and math.isfinite(self.mu)
            ):
                raise ValueError("model entries must all be finite")
        elif has_bias:
            raise ValueError("bias block and Y are svdpp-only fields")
        if not (np.isfinite(self.P).all() and np.isfinite(self.Q).all()):
            raise ValueError("model entries must all be finite")
        if self.N is not None:
            self.N = [np.asarray(s, dtype=np.int64) for s in self.N]
            if len(self.N) != self.n_users:
                raise ValueError("N must hold one item set per user")
            for s in self.N:
                if s.size and (s.min() < 0 or s.max() >= self.n_items):
                    raise ValueError("N entries must be valid item indices")

    @property
    def n_users(self):
        return self.P.shape[1]

    @property
    def n_items(self):
        return self.Q.shape[1]

    def predict(self, u, i):
        """Predicted rating, dispatching on the model kind."""
        if self.kind == "funk":
            return funk_predict(self, u, i)
        return svdpp_predict(self, u, i)

    def recommend(self, u, k):
        """Top-k unrated items for user u as (item, score) pairs.

        Highest score first, ties broken by ascending item index. Items in
        N(u) are excluded; with no N recorded every item is a candidate.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if not 0 <= u < self.n_users:
            raise IndexError(f"user index {u} out of range for {self.n_users}")
        rated = set() if self.N is None else set(self.N[u].tolist())
        scored = [
            (i, self.predict(u, i)) for i in range(self.n_items) if i not in rated
        ]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored[:k]


def _check_pair(model, u, i):
    if not 0 <= u < model.n_users:
        raise IndexError(f"user index {u} out of range for {model.n_users}")
    if not 0 <= i < model.n_items:
        raise IndexError(f"item index {i} out of range for {model.n_items}")


def funk_predict(model, u, i):
    """Inner product of user column u of P and item column i of Q."""
    _check_pair(model, u, i)
    return float(np.dot(model.P[:, u], model.Q[:, i]))


def funk_loss(model, triples, lam):
    """Squared error plus per-pair L2 penalty over the given triples.

    Each (u, i, r) contributes (r - p_u.q_i)^2 + lam*(|p_u|^2 + |q_i|^2);
    the regularizer is summed once per training pair, as written in the
    objective, so heavy users and items are shrunk more.
    """
    total = 0.0
    for u, i, r in triples:
        p = model.P[:, u]
        q = model.Q[:, i]
        err = r - float(np.dot(p, q))
        total += err * err + lam * (float(np.dot(p, p)) + float(np.dot(q, q)))
    return total


def funk_loss_gradient(model, triples, lam):
    """Full analytic gradient of funk_loss w.r.t. (P, Q).

    Returns (dP, dQ) shaped like the model arrays, carrying the factor-2
    gradients of the squared loss. Used to validate the SGD updates
    against finite differences.
    """
    dP = np.zeros_like(model.P)
    dQ = np.zeros_like(model.Q)
    for u, i, r in triples:
        p = model.P[:, u]
        q = model.Q[:, i]
        err = r - float(np.dot(p, q))
        dP[:, u] += -2.0 * err * q + 2.0 * lam * p
        dQ[:, i] += -2.0 * err * p + 2.0 * lam * q
    return dP, dQ


def _epoch_rmse(ratings, preds, epoch, alpha):
    err = ratings - preds
    value = float(np.sqrt(np.mean(err * err)))
    if not math.isfinite(value):
        raise DivergenceError(
            f"training diverged at epoch {epoch} (non-finite loss); "
            f"try a smaller learning rate than {alpha}",
            epoch=epoch,
        )
    return value


def _diverged(epoch, alpha, cause=None):
    exc = DivergenceError(
        f"training diverged at epoch {epoch} (non-finite values); "
        f"try a smaller learning rate than {alpha}",
        epoch=epoch,
    )
    if cause is not None:
        raise exc from cause
    raise exc


def funk_train(ds, config, init=None):
    """Train a plain factor model by per-triple gradient descent.

    P and Q start entrywise uniform(0, 1)/sqrt(f) from the seed, or from
    init=(P0, Q0) in model layout when given. Each epoch visits the
    triples in dataset order; for every (u, i, r) the error
    err = r - p_u.q_i is computed once, then both vectors move through
    the configured optimizer. In the default statement order the q-update
    reads the already-updated p; config.simultaneous makes both updates
    read pre-update values. The returned model carries a per-epoch
    training RMSE trace.

    Raises:
        DivergenceError: if the loss or any update turns non-finite,
            naming the epoch.
    """
    if ds.kind != "explicit":
        raise ValidationError("gradient factorization needs an explicit dataset")
    users, items, ratings = ds.indexed()
    m, n, f = ds.n_users, ds.n_items, config.f
    if init is not None:
        p0, q0 = init
        pt = np.array(p0, dtype=float).T.copy()
        qt = np.array(q0, dtype=float).T.copy()
        if pt.shape != (m, f) or qt.shape != (n, f):
            raise ValueError(
                f"init arrays must be shaped ({f}, {m}) and ({f}, {n})"
            )
    else:
        rng = np.random.default_rng(config.seed)
        root = math.sqrt(f)
        pt = rng.random((m, f)) / root
        qt = rng.random((n, f)) / root
    if config.strategy == "sequential":
        trace = _funk_train_sequential(config, users, items, ratings, pt, qt)
    else:
        trace = _funk_train_all(config, users, items, ratings, pt, qt)
    return FactorModel(
        kind="funk",
        P=pt.T.copy(),
        Q=qt.T.copy(),
        f=f,
        N=ds.items_by_user(),
        trace=trace,
    )


def _make_factor_states(config, shapes_names):
    return [
        optim.make_state(
            config.optimizer,
            shape,
            config.alpha,
            beta1=config.beta1,
            beta2=config.beta2,
            eps=config.eps,
            name=name,
        )
        for shape, name in shapes_names
    ]


def _funk_train_all(config, users, items, ratings, pt, qt):
    alpha, lam = config.alpha, config.lam
    st_p, st_q = _make_factor_states(
        config, [(pt.shape, "P"), (qt.shape, "Q")]
    )
    trace = []
    count = len(users)
    for epoch in range(config.epochs):
        # overflow on the way to divergence is expected; the isfinite
        # checks and the GradientError handler turn it into a clean error
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                for t in range(count):
                    u = users[t]
                    i = items[t]
                    p = pt[u]
                    q = qt[i]
                    err = ratings[t] - float(np.dot(p, q))
                    if not math.isfinite(err):
                        _diverged(epoch, alpha)
                    g_p = lam * p - err * q
                    if config.simultaneous:
                        g_q = lam * q - err * p
                        optim.step(st_p, pt, g_p, rows=u)
                    else:
                        optim.step(st_p, pt, g_p, rows=u)
                        g_q = lam * q - err * pt[u]
                    optim.step(st_q, qt, g_q, rows=i)
        except GradientError as exc:
            _diverged(epoch, alpha, cause=exc)
        preds = np.einsum("tf,tf->t", pt[users], qt[items])
        trace.append(_epoch_rmse(ratings, preds, epoch, alpha))
    return trace


def _funk_train_sequential(config, users, items, ratings, pt, qt):
    """One feature at a time against cached residuals.

    Feature k trains for the full epoch budget on the residual targets
    left over from features 0..k-1, then its contribution is shifted onto
    the pile. The trace logs the residual RMSE including the feature in
    training, so the final entry is the usual full-model training RMSE.
    Gradients outside the active feature are zero.
    """
    alpha, lam = config.alpha, config.lam
    f = config.f
    st_p, st_q = _make_factor_states(
        config, [(pt.shape, "P"), (qt.shape, "Q")]
    )
    trace = []
    count = len(users)
    res = ratings.astype(float).copy()
    for k in range(f):
        for epoch in range(config.epochs):
            overall = len(trace)
            try:
                for t in range(count):
                    u = users[t]
                    i = items[t]
                    pk = pt[u, k]
                    qk = qt[i, k]
                    err = res[t] - pk * qk
                    if not math.isfinite(err):
                        _diverged(overall, alpha)
                    g_p = np.zeros(f)
                    g_q = np.zeros(f)
                    g_p[k] = lam * pk - err * qk
                    optim.step(st_p, pt, g_p, rows=u)
                    g_q[k] = lam * qk - err * pt[u, k]
                    optim.step(st_q, qt, g_q, rows=i)
            except GradientError as exc:
                _diverged(overall, alpha, cause=exc)
            preds = pt[users, k] * qt[items, k]
            trace.append(_epoch_rmse(res, preds, overall, alpha))
        res = res - pt[users, k] * qt[items, k]
    return trace


@dataclass
class ItemCfModel:
    """Item-to-item overlap weights plus the ratings needed to apply them.

    Fields:
        W: n x n matrix with W[i, j] = |N(i) & N(j)| / |N(i)|, diagonal 0,
            where N(i) is the set of users who rated item i. Items nobody
            rated get an all-zero row (documented, not an error).
        K: neighborhood size used by predict.
        ratings: per-user dicts mapping item index to rating.
    """

    W: np.ndarray
    K: int
    ratings: list

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        n = self.W.shape[0]
        if self.W.shape != (n, n):
            raise ValueError("W must be square")
        if self.K < 1:
            raise ValueError(f"neighborhood size must be >= 1, got {self.K}")
        if np.any(np.diag(self.W) != 0.0):
            raise ValueError("W diagonal must be zero")
        if self.W.min() < 0.0 or self.W.max() > 1.0:
            raise ValueError("W entries must lie in [0, 1]")

    @property
    def n_items(self):
        return self.W.shape[0]

    @property
    def n_users(self):
        return len(self.ratings)

    def predict(self, u, j):
        return itemcf_predict(self, None, u, j)

    def recommend(self, u, k):
        """Top-k unrated items by the neighborhood score."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if not 0 <= u < self.n_users:
            raise IndexError(f"user index {u} out of range for {self.n_users}")
        rated = self.ratings[u]
        scored = [
            (j, self.predict(u, j)) for j in range(self.n_items) if j not in rated
        ]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored[:k]


class ItemCfPrediction(NamedTuple):
    """Neighborhood score with diagnostics.

    Fields:
        value: the unnormalized weighted sum.
        used: number of rated items inside the neighborhood.
        empty_neighborhood: True when the intersection was empty.
    """

    value: float
    used: int
    empty_neighborhood: bool


def itemcf_similarity(ds, k=None):
    """Overlap similarity W[i, j] = |N(i) & N(j)| / |N(i)| from a dataset.

    N(i) collects the users with a triple for item i (implicit zeros do
    not count as raters). The diagonal is forced to zero and items with no
    raters get all-zero rows. k sets the prediction neighborhood size and
    defaults to n - 1, meaning every other item.
    """
    users, items, ratings = ds.indexed()
    m, n = ds.n_users, ds.n_items
    b = np.zeros((m, n))
    positive = ratings != 0.0 if ds.kind == "implicit" else slice(None)
    b[users[positive], items[positive]] = 1.0
    counts = b.T @ b
    raters = np.diag(counts).copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        w = counts / raters[:, None]
    w[raters == 0.0, :] = 0.0
    np.fill_diagonal(w, 0.0)
    maps = [{} for _ in range(m)]
    for t in range(len(users)):
        if ds.kind == "implicit" and ratings[t] == 0.0:
            continue
        maps[users[t]][int(items[t])] = float(ratings[t])
    return ItemCfModel(W=w, K=k if k is not None else max(n - 1, 1), ratings=maps)


def itemcf_predict_with_info(model, ds, u, j):
    """Unnormalized neighborhood score for (u, j) with diagnostics.

    The score is sum over i in N(u) & S(j, K) of W[j, i] * r_ui, where
    S(j, K) holds the K items most similar to j (descending weight, ties
    by ascending index, j itself excluded). The ratings come from ds when
    given, else from the maps stored at fit time. An empty intersection
    scores 0 with the empty_neighborhood flag set.
    """
    n = model.n_items
    if not 0 <= j < n:
        raise IndexError(f"item index {j} out of range for {n}")
    if ds is None:
        if not 0 <= u < model.n_users:
            raise IndexError(f"user index {u} out of range for {model.n_users}")
        rated = model.ratings[u]
    else:
        users, items, ratings = ds.indexed()
        if not 0 <= u < ds.n_users:
            raise IndexError(f"user index {u} out of range for {ds.n_users}")
        mine = users == u
        rated = {
            int(i): float(r)
            for i, r in zip(items[mine], ratings[mine])
            if not (ds.kind == "implicit" and r == 0.0)
        }
    weights = model.W[j].copy()
    weights[j] = 0.0
    order = np.lexsort((np.arange(n), -weights))
    neighbors = set(order[: model.K].tolist())
    neighbors.discard(j)
    value = 0.0
    used = 0
    for i, r in rated.items():
        if i in neighbors:
            value += float(model.W[j, i]) * r
            used += 1
    return ItemCfPrediction(value, used, used == 0)


def itemcf_predict(model, ds, u, j):
    """Neighborhood score for (u, j); see itemcf_predict_with_info."""
    return itemcf_predict_with_info(model, ds, u, j).value


class SvdppPrediction(NamedTuple):
    """Biased-model prediction with cold-start flags."""

    value: float
    cold_user: bool
    cold_item: bool


def _implicit_sum(model, u):
    nu = model.N[u] if model.N is not None else np.empty(0, dtype=np.int64)
    if nu.size == 0:
        return np.zeros(model.f)
    return model.Y[:, nu].sum(axis=1) / math.sqrt(nu.size)


def svdpp_implicit_predict(model, u, i):
    """The implicit term |N(u)|^(-1/2) * q_i . sum of y_j over N(u).

    The item-side vector is the model's q_i (the x = q tying). An empty
    N(u) makes the whole term 0 by convention, the limit of no implicit
    evidence.
    """
    _check_pair(model, u, i)
    return float(np.dot(model.Q[:, i], _implicit_sum(model, u)))


def svdpp_predict_with_info(model, u, i):
    """Biased prediction mu + b_u + b_i + q_i.(p_u + implicit sum).

    Out-of-range indices take the cold-start path: the prediction keeps
    mu plus whichever bias is still known and the matching flag is set.
    """
    cold_user = not 0 <= u < model.n_users
    cold_item = not 0 <= i < model.n_items
    value = model.mu
    if not cold_user:
        value += float(model.b_u[u])
    if not cold_item:
        value += float(model.b_i[i])
    if not cold_user and not cold_item:
        z = model.P[:, u] + _implicit_sum(model, u)
        value += float(np.dot(model.Q[:, i], z))
    if cold_user or cold_item:
        log.debug("cold-start prediction for (%s, %s)", u, i)
    return SvdppPrediction(value, cold_user, cold_item)


def svdpp_predict(model, u, i):
    """Biased prediction value; see svdpp_predict_with_info."""
    return svdpp_predict_with_info(model, u, i).value


def svdpp_loss(model, triples, lam):
    """Squared error plus per-pair L2 on every learned tensor.

    Each (u, i, r) contributes the squared residual of the biased
    prediction plus lam times (b_u^2 + b_i^2 + |p_u|^2 + |q_i|^2 +
    sum over j in N(u) of |y_j|^2).
    """
    total = 0.0
    for u, i, r in triples:
        err = r - svdpp_predict(model, u, i)
        nu = model.N[u]
        reg = (
            float(model.b_u[u]) ** 2
            + float(model.b_i[i]) ** 2
            + float(np.dot(model.P[:, u], model.P[:, u]))
            + float(np.dot(model.Q[:, i], model.Q[:, i]))
            + float((model.Y[:, nu] ** 2).sum())
        )
        total += err * err + lam * reg
    return total


def svdpp_loss_gradient(model, triples, lam):
    """Full analytic gradient of svdpp_loss.

    Returns a dict with keys "b_u", "b_i", "P", "Q", "Y", each shaped like
    the corresponding model field, carrying the factor-2 gradients.
    """
    d_bu = np.zeros_like(model.b_u)
    d_bi = np.zeros_like(model.b_i)
    d_p = np.zeros_like(model.P)
    d_q = np.zeros_like(model.Q)
    d_y = np.zeros_like(model.Y)
    for u, i, r in triples:
        nu = model.N[u]
        s = 1.0 / math.sqrt(nu.size) if nu.size else 0.0
        z = model.P[:, u] + _implicit_sum(model, u)
        q = model.Q[:, i]
        err = r - (model.mu + model.b_u[u] + model.b_i[i] + float(np.dot(q, z)))
        d_bu[u] += -2.0 * err + 2.0 * lam * model.b_u[u]
        d_bi[i] += -2.0 * err + 2.0 * lam * model.b_i[i]
        d_p[:, u] += -2.0 * err * q + 2.0 * lam * model.P[:, u]
        d_q[:, i] += -2.0 * err * z + 2.0 * lam * q
        if nu.size:
            d_y[:, nu] += (-2.0 * err * s) * q[:, None] + 2.0 * lam * model.Y[:, nu]
    return {"b_u": d_bu, "b_i": d_bi, "P": d_p, "Q": d_q, "Y": d_y}


def svdpp_train(ds, config, freeze_y=False):
    """Train the biased implicit-factor model by per-triple SGD.

    mu is fixed to the training mean. P, Q and Y start entrywise
    uniform(0, 1)/sqrt(f) from the seed (drawn in that order); biases
    start at zero. Every tensor touched by a triple moves simultaneously,
    all gradients read the pre-update values. With freeze_y the Y draw is
    skipped and Y stays zero, which reduces the model to its biased
    two-factor core; useful for equivalence checks.

    Raises:
        DivergenceError: when training turns non-finite, naming the epoch.
    """
    if ds.kind != "explicit":
        raise ValidationError("gradient factorization needs an explicit dataset")
    users, items, ratings = ds.indexed()
    m, n, f = ds.n_users, ds.n_items, config.f
    alpha, lam = config.alpha, config.lam
    mu = float(ratings.mean())
    rng = np.random.default_rng(config.seed)
    root = math.sqrt(f)
    pt = rng.random((m, f)) / root
    qt = rng.random((n, f)) / root
    yt = np.zeros((n, f)) if freeze_y else rng.random((n, f)) / root
    b_u = np.zeros(m)
    b_i = np.zeros(n)
    sets = ds.items_by_user()
    ninv = np.array([1.0 / math.sqrt(s.size) if s.size else 0.0 for s in sets])
    st_bu, st_bi, st_p, st_q, st_y = _make_factor_states(
        config,
        [((m,), "b_u"), ((n,), "b_i"), (pt.shape, "P"), (qt.shape, "Q"),
         (yt.shape, "Y")],
    )
    flat_users = np.repeat(np.arange(m), [s.size for s in sets])
    flat_items = np.concatenate([s for s in sets if s.size]) if len(ds) else flat_users
    trace = []
    count = len(users)
    for epoch in range(config.epochs):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                for t in range(count):
                    u = users[t]
                    i = items[t]
                    nu = sets[u]
                    s = ninv[u]
                    p = pt[u]
                    q = qt[i]
                    z = p + s * yt[nu].sum(axis=0) if nu.size else p.copy()
                    err = ratings[t] - (mu + b_u[u] + b_i[i] + float(np.dot(q, z)))
                    if not math.isfinite(err):
                        _diverged(epoch, alpha)
                    g_bu = lam * b_u[u] - err
                    g_bi = lam * b_i[i] - err
                    g_p = lam * p - err * q
                    g_q = lam * q - err * z
                    if not freeze_y and nu.size:
                        g_y = lam * yt[nu] - (err * s) * q
                    else:
                        g_y = None
                    optim.step(st_bu, b_u, g_bu, rows=u)
                    optim.step(st_bi, b_i, g_bi, rows=i)
                    optim.step(st_p, pt, g_p, rows=u)
                    optim.step(st_q, qt, g_q, rows=i)
                    if g_y is not None:
                        optim.step(st_y, yt, g_y, rows=nu)
        except GradientError as exc:
            _diverged(epoch, alpha, cause=exc)
        impl = np.zeros((m, f))
        np.add.at(impl, flat_users, yt[flat_items])
        impl *= ninv[:, None]
        preds = (
            mu
            + b_u[users]
            + b_i[items]
            + np.einsum("tf,tf->t", pt[users] + impl[users], qt[items])
        )
        trace.append(_epoch_rmse(ratings, preds, epoch, alpha))
    return FactorModel(
        kind="svdpp",
        P=pt.T.copy(),
        Q=qt.T.copy(),
        f=f,
        mu=mu,
        b_u=b_u,
        b_i=b_i,
        Y=yt.T.copy(),
        N=sets,
        trace=trace,
    )
