"""Classical SVD recommender: impute, decompose, truncate, predict.

The pipeline fills the missing cells of the rating matrix, takes the thin
SVD, keeps the top f singular triplets, and predicts unseen cells from
item-to-item similarities computed on the masked columns of the rank-f
reconstruction.

Two similarity modes exist. "paper-dot" (the default) scores a pair of
items by the raw dot product of their masked reconstruction columns;
"cosine" normalizes that product by the column norms, drops negative
similarities, and treats fully-unobserved columns as similarity 0.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import linalg
from .data import impute, to_dense
from .errors import ValidationError, ZeroNormError

log = logging.getLogger(__name__)


def parse_rank_rule(rule):
    """Normalize a rank rule into a (name, value) pair.

    Accepts ("energy", 0.95) style pairs or the compact strings
    "energy:0.95", "ratio:10", "fixed:2"; bare "energy" and "ratio" take
    their default parameter (0.95 and 10).
    """
    if isinstance(rule, (tuple, list)) and len(rule) == 2:
        name, value = rule
    elif isinstance(rule, str):
        name, _, raw = rule.partition(":")
        if raw:
            value = raw
        elif name == "energy":
            value = 0.95
        elif name == "ratio":
            value = 10.0
        else:
            raise ValueError(f"rank rule {rule!r} needs a value, e.g. 'fixed:2'")
    else:
        raise ValueError(f"unrecognized rank rule {rule!r}")
    name = str(name).strip().lower()
    if name not in ("energy", "ratio", "fixed"):
        raise ValueError(f"unknown rank rule {name!r}; expected energy, ratio, or fixed")
    try:
        value = int(value) if name == "fixed" else float(value)
    except (TypeError, ValueError):
        raise ValueError(f"rank rule {name} has a non-numeric value {value!r}") from None
    return name, value


class PredictionInfo(NamedTuple):
    """A prediction plus how it was formed.

    Attributes:
        value: predicted rating.
        similarity_total: denominator of the weighted average (0 when the
            fallback fired).
        fallback: True when no usable neighbor existed and the user's mean
            reconstructed rating was returned instead.
    """

    value: float
    similarity_total: float
    fallback: bool


@dataclass
class SvdCfModel:
    """Rank-f reconstruction plus the observation mask.

    Attributes:
        r_star: (m, n) rank-f reconstruction of the imputed rating matrix.
        mask: (m, n) 0/1 observation indicator of the training data.
        f: retained rank.
        similarity_mode: "paper-dot" or "cosine".
        scale: rating scale carried from the training data.
        neighborhood: optional top-K cut on neighbors per prediction;
            None means all items participate.
    """

    r_star: np.ndarray
    mask: np.ndarray
    f: int
    similarity_mode: str = "paper-dot"
    scale: tuple = (1.0, 5.0)
    neighborhood: int | None = None

    def __post_init__(self):
        self.r_star = np.asarray(self.r_star, dtype=float)
        self.mask = np.asarray(self.mask, dtype=float)
        if self.r_star.shape != self.mask.shape:
            raise ValueError(
                f"reconstruction {self.r_star.shape} and mask {self.mask.shape} differ"
            )
        if self.f < 1:
            raise ValueError(f"retained rank must be >= 1, got {self.f}")
        if self.similarity_mode not in ("paper-dot", "cosine"):
            raise ValueError(f"unknown similarity mode {self.similarity_mode!r}")

    def predict(self, u, i):
        return predict(self, u, i)

    def predict_with_info(self, u, i):
        return predict_with_info(self, u, i)

    def recommend(self, u, k):
        return recommend(self, u, k)


def fit(ds, impute_strategy="user", rank_rule="energy:0.95",
        similarity_mode="paper-dot", neighborhood=None):
    """Train an SvdCfModel on an explicit dataset.

    Args:
        ds: explicit RatingDataset.
        impute_strategy: "global", "user", or "item" mean fill.
        rank_rule: how to pick the retained rank f; see parse_rank_rule.
        similarity_mode: "paper-dot" or "cosine".
        neighborhood: optional top-K neighbor cut, default off.

    Returns:
        SvdCfModel with r_star the rank-f reconstruction of the imputed
        matrix.
    """
    if ds.kind != "explicit":
        raise ValidationError("svd completion expects an explicit dataset")
    rule, value = parse_rank_rule(rank_rule)
    dense, mask = to_dense(ds)
    filled = impute(dense, mask, impute_strategy)
    res = linalg.svd(filled)
    if rule == "energy":
        f = linalg.rank_by_energy(res.s, value)
    elif rule == "ratio":
        f = linalg.rank_by_ratio(res.s, value)
    else:
        f = value
    u_f, s_f, v_f = linalg.truncate(res, f)
    r_star = u_f @ s_f @ v_f.T
    return SvdCfModel(
        r_star=r_star,
        mask=mask,
        f=f,
        similarity_mode=similarity_mode,
        scale=ds.scale,
        neighborhood=neighborhood,
    )


def masked_item_similarity(model, i, j):
    """Similarity of items i and j on their masked reconstruction columns.

    Raises:
        ValueError: if i == j (self-similarity is never used by the
            predictor and asking for it is a caller bug) or on a bad index.
    """
    n = model.r_star.shape[1]
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"item index out of range: ({i}, {j}) with {n} items")
    if i == j:
        raise ValueError("self-similarity is not defined for prediction")
    a = model.r_star[:, i] * model.mask[:, i]
    b = model.r_star[:, j] * model.mask[:, j]
    if model.similarity_mode == "paper-dot":
        return float(np.dot(a, b))
    try:
        return linalg.cosine(a, b)
    except ZeroNormError:
        log.debug("cosine similarity fell back to 0 for items (%d, %d)", i, j)
        return 0.0


def _similarity_row(model, i):
    """Similarities of item i against every item (entry i forced to 0)."""
    masked = model.r_star * model.mask
    sims = masked.T @ masked[:, i]
    if model.similarity_mode == "cosine":
        norms = np.linalg.norm(masked, axis=0)
        denom = norms * norms[i]
        with np.errstate(invalid="ignore", divide="ignore"):
            sims = np.where(denom > 0, sims / denom, 0.0)
        sims = np.clip(sims, -1.0, 1.0)
        sims = np.where(sims > 0, sims, 0.0)  # negative neighbors excluded
    sims[i] = 0.0
    return sims


def predict_with_info(model, u, i):
    """Weighted-average prediction for cell (u, i) with diagnostics.

    The prediction is sum_j sim(i, j) * r_star[u, j] / sum_j sim(i, j)
    over all items j != i (optionally the top-K most similar). When the
    similarity total is zero there is nothing to average, so the mean of
    the user's reconstructed row is returned with the fallback flag set.
    """
    m, n = model.r_star.shape
    if not (0 <= u < m and 0 <= i < n):
        raise ValueError(f"index ({u}, {i}) out of range for {m} users x {n} items")
    sims = _similarity_row(model, i)
    if model.neighborhood is not None and model.neighborhood < n - 1:
        order = np.lexsort((np.arange(n), -sims))
        keep = np.zeros(n, dtype=bool)
        keep[order[: model.neighborhood]] = True
        sims = np.where(keep, sims, 0.0)
    total = float(sims.sum())
    if total == 0.0:
        log.debug("prediction (%d, %d) fell back to the user mean", u, i)
        return PredictionInfo(float(model.r_star[u].mean()), 0.0, True)
    value = float(np.dot(sims, model.r_star[u])) / total
    return PredictionInfo(value, total, False)


def predict(model, u, i):
    """Predicted rating for cell (u, i); see predict_with_info."""
    return predict_with_info(model, u, i).value


def round_to_scale(value, scale=(1.0, 5.0)):
    """Round to the nearest integer rating, half away from zero, clamped.

    Examples: 1.4 -> 1; 2.5 -> 3; 5.7 on a 1-5 scale -> 5.
    """
    if not math.isfinite(value):
        raise ValueError(f"cannot round non-finite value {value}")
    rounded = math.floor(value + 0.5) if value >= 0 else math.ceil(value - 0.5)
    lo, hi = scale
    return int(min(max(rounded, math.ceil(lo)), math.floor(hi)))


def recommend(model, u, k):
    """Top-k unobserved items for user u.

    Returns a list of (item index, predicted score), highest score first,
    ties broken by ascending item index. Users with nothing unobserved get
    an empty list.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    m = model.r_star.shape[0]
    if not 0 <= u < m:
        raise ValueError(f"user index {u} out of range for {m} users")
    candidates = np.flatnonzero(model.mask[u] == 0.0)
    scored = [(int(i), predict(model, u, int(i))) for i in candidates]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]
