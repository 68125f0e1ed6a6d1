"""Shared fixtures: the 4x4 worked rating example and synthetic generators.

The 4x4 example threads through the whole suite: a rating matrix on a 1-5
scale with missing cells, its observation mask, the rank-2 reconstruction,
and the printed rank-2 factors.  Expected numbers quoted in the tests
(global mean 37/11, retained energy 99.42%, similarity total 13.94,
prediction 1.4 for cell (3, 2)) were derived from these matrices by hand
and cross-checked with an independent implementation.
"""

import numpy as np
import pytest

# Ratings with 0 standing for "not rated" (scale is 1-5, so 0 is free).
FOUR_BY_FOUR_RATINGS = np.array(
    [
        [1.0, 3.0, 0.0, 4.0],
        [5.0, 0.0, 5.0, 4.0],
        [4.0, 0.0, 1.0, 1.0],
        [0.0, 0.0, 4.0, 5.0],
    ]
)

FOUR_BY_FOUR_MASK = np.array(
    [
        [1.0, 1.0, 0.0, 1.0],
        [1.0, 0.0, 1.0, 1.0],
        [1.0, 0.0, 1.0, 1.0],
        [0.0, 0.0, 1.0, 1.0],
    ]
)

# Rank-2 reconstruction of the user-mean-imputed matrix, rounded to the
# printed precision used in the docs.
FOUR_BY_FOUR_RSTAR = np.array(
    [
        [0.98, 2.87, 2.96, 3.88],
        [5.14, 4.70, 4.32, 4.46],
        [3.94, 1.88, 1.45, 0.76],
        [4.39, 4.60, 4.33, 4.71],
    ]
)

# Singular values of the user-mean-imputed matrix, rounded to 2 decimals.
FOUR_BY_FOUR_SINGULAR = np.array([14.59, 3.22, 1.11, 0.23])

# The rank-2 factors as printed at 2-decimal precision.
FOUR_BY_FOUR_U2 = np.array(
    [
        [-0.37, 0.67],
        [-0.64, -0.15],
        [-0.28, -0.72],
        [-0.62, 0.08],
    ]
)
FOUR_BY_FOUR_S2 = np.diag([14.59, 3.22])
FOUR_BY_FOUR_V2T = np.array(
    [
        [-0.51, -0.51, -0.47, -0.51],
        [-0.81, 0.07, 0.20, 0.55],
    ]
)

# The same ratings as a CSV stream with 1-based user/item tokens.
FOUR_BY_FOUR_CSV = (
    "user,item,rating\n"
    "1,1,1\n"
    "1,2,3\n"
    "1,4,4\n"
    "2,1,5\n"
    "2,3,5\n"
    "2,4,4\n"
    "3,1,4\n"
    "3,3,1\n"
    "3,4,1\n"
    "4,3,4\n"
    "4,4,5\n"
)


@pytest.fixture
def four_by_four():
    """Dict with fresh copies of every piece of the 4x4 example."""
    return {
        "ratings": FOUR_BY_FOUR_RATINGS.copy(),
        "mask": FOUR_BY_FOUR_MASK.copy(),
        "r_star": FOUR_BY_FOUR_RSTAR.copy(),
        "singular": FOUR_BY_FOUR_SINGULAR.copy(),
        "u2": FOUR_BY_FOUR_U2.copy(),
        "s2": FOUR_BY_FOUR_S2.copy(),
        "v2t": FOUR_BY_FOUR_V2T.copy(),
        "csv": FOUR_BY_FOUR_CSV,
    }


def make_rank2_ratings(m=50, n=40, density=0.6, seed=42, noise=0.0, scale=(1.0, 5.0)):
    """Build an explicit dataset sampled from a known rank-2 model.

    The factors are drawn positive so their products already land inside
    the scale; an additive shift would sneak a rank-raising constant into
    the matrix. The generating matrix is returned for held-out checks.
    """
    from latentrec.data import RatingDataset

    rng = np.random.default_rng(seed)
    lo, hi = scale
    p = rng.uniform(0.8, 1.2, size=(m, 2))
    q = rng.uniform(0.7, 1.8, size=(n, 2))
    # products lie in [1.12, 4.32]; rescaling by hi/5 keeps them in scale
    full = (p @ q.T) * (hi / 5.0)
    if noise:
        full = full + rng.normal(scale=noise, size=full.shape)
        full = np.clip(full, lo, hi)
    assert lo <= full.min() and full.max() <= hi
    observed = rng.random((m, n)) < density
    # keep every user and item populated so index maps stay complete
    for u in range(m):
        if not observed[u].any():
            observed[u, rng.integers(n)] = True
    for i in range(n):
        if not observed[:, i].any():
            observed[rng.integers(m), i] = True
    triples = [
        (f"u{u:03d}", f"i{i:03d}", float(full[u, i]))
        for u in range(m)
        for i in range(n)
        if observed[u, i]
    ]
    ds = RatingDataset.from_triples(triples, kind="explicit", scale=scale)
    return ds, full


def make_svdpp_ratings(m=30, n=20, density=0.7, seed=3):
    """Dataset generated by a known biased implicit-factor model.

    Every observed value is the exact model output (bias terms plus
    q . (p + implicit sum) with N(u) taken from the observation mask), so
    a trainer of the same form can drive held-out error toward zero. The
    dense truth matrix is returned alongside the dataset.
    """
    import math

    from latentrec.data import RatingDataset

    rng = np.random.default_rng(seed)
    f = 2
    root = math.sqrt(f)
    mu = 3.0
    b_u = rng.normal(scale=0.3, size=m)
    b_i = rng.normal(scale=0.3, size=n)
    p = rng.random((f, m)) / root
    q = rng.random((f, n)) / root
    y = rng.random((f, n)) / root
    observed = rng.random((m, n)) < density
    for u in range(m):
        if not observed[u].any():
            observed[u, rng.integers(n)] = True
    for i in range(n):
        if not observed[:, i].any():
            observed[rng.integers(m), i] = True
    full = np.zeros((m, n))
    for u in range(m):
        rated = np.flatnonzero(observed[u])
        z = p[:, u] + y[:, rated].sum(axis=1) / math.sqrt(rated.size)
        full[u] = mu + b_u[u] + b_i + z @ q
    lo, hi = math.floor(full.min()) - 1.0, math.ceil(full.max()) + 1.0
    triples = [
        (f"u{u:03d}", f"i{i:03d}", float(full[u, i]))
        for u in range(m)
        for i in range(n)
        if observed[u, i]
    ]
    ds = RatingDataset.from_triples(triples, kind="explicit", scale=(lo, hi))
    return ds, full


def dataset_from_dense(ratings, scale=(1.0, 5.0)):
    """Explicit dataset from a dense matrix where 0 marks a missing cell."""
    from latentrec.data import RatingDataset

    m, n = ratings.shape
    triples = [
        (f"{u + 1}", f"{i + 1}", float(ratings[u, i]))
        for u in range(m)
        for i in range(n)
        if ratings[u, i] != 0
    ]
    return RatingDataset.from_triples(triples, kind="explicit", scale=scale)
