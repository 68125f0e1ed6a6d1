"""Dense matrix and vector primitives used by the recommenders.

Matrices are plain 2-D ``numpy.ndarray`` objects in row-major layout; no
wrapper class is introduced.  The singular value decomposition here is
self-contained (one-sided Jacobi rotations) so the package carries no
linear-algebra dependency beyond numpy array arithmetic, and its output is
deterministic for a fixed input, which the test suite and the model file
format rely on.
"""

import math
from typing import NamedTuple

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateSpectrumError,
    ShapeError,
    ZeroNormError,
)

# Convergence for the Jacobi sweep: a column pair (p, q) counts as orthogonal
# once |<w_p, w_q>| <= JACOBI_TOL * ||w_p|| * ||w_q||.
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class SvdResult(NamedTuple):
    """Thin singular value decomposition ``a = u @ diag(s) @ v.T``.

    Attributes
    ----------
    u : ndarray, shape (m, r)
        Left singular vectors, orthonormal columns, r = min(m, n).
    s : ndarray, shape (r,)
        Singular values, nonnegative, sorted descending.
    v : ndarray, shape (n, r)
        Right singular vectors, orthonormal columns.
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


def hadamard(a, b):
    """Element-wise product of two equally shaped matrices.

    Parameters
    ----------
    a, b : array_like, shape (m, n)

    Returns
    -------
    ndarray, shape (m, n)
        ``out[i, j] = a[i, j] * b[i, j]``.

    Raises
    ------
    ShapeError
        If the shapes differ.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"hadamard needs equal shapes, got {a.shape} and {b.shape}")
    return a * b


def dot(u, v):
    """Inner product of two equal-length vectors.

    Raises
    ------
    ShapeError
        If the lengths differ or an argument is not 1-D.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.ndim != 1 or v.ndim != 1:
        raise ShapeError("dot expects 1-D vectors")
    if u.shape != v.shape:
        raise ShapeError(f"dot needs equal lengths, got {u.shape[0]} and {v.shape[0]}")
    return float(np.dot(u, v))


def cosine(u, v):
    """Cosine similarity ``<u, v> / (||u|| ||v||)``, clipped to [-1, 1].

    Raises
    ------
    ZeroNormError
        If either vector has zero norm; the caller decides the fallback.
    ShapeError
        If the lengths differ.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.ndim != 1 or v.ndim != 1:
        raise ShapeError("cosine expects 1-D vectors")
    if u.shape != v.shape:
        raise ShapeError(f"cosine needs equal lengths, got {u.shape[0]} and {v.shape[0]}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroNormError("cosine similarity is undefined for a zero-norm vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def _jacobi_tall(a):
    """One-sided Jacobi SVD of ``a`` with at least as many rows as columns.

    Works on the transposed copy so every column of ``a`` is a contiguous
    row.  Returns (w, v, sweeps) where the rows of ``w`` are the rotated
    columns (pairwise orthogonal on success) and the rows of ``v`` are the
    accumulated right singular vectors.
    """
    m, n = a.shape
    # explicit copy: a.T can alias the caller's array and must not be mutated
    w = np.array(a.T, dtype=float, order="C", copy=True)
    v = np.eye(n)
    for sweep in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = float(np.dot(w[p], w[p]))
                beta = float(np.dot(w[q], w[q]))
                scale = math.sqrt(alpha * beta)
                if scale == 0.0:
                    continue
                gamma = float(np.dot(w[p], w[q]))
                if abs(gamma) <= JACOBI_TOL * scale:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                wp = w[p].copy()
                w[p] = c * wp - s * w[q]
                w[q] = s * wp + c * w[q]
                vp = v[p].copy()
                v[p] = c * vp - s * v[q]
                v[q] = s * vp + c * v[q]
        if not rotated:
            return w, v
    # Sweep cap reached with rotations still firing; report how far off the
    # worst remaining pair is.
    worst = 0.0
    for p in range(n - 1):
        for q in range(p + 1, n):
            scale = float(np.linalg.norm(w[p]) * np.linalg.norm(w[q]))
            if scale == 0.0:
                continue
            worst = max(worst, abs(float(np.dot(w[p], w[q]))) / scale)
    if worst <= JACOBI_TOL:
        return w, v
    raise ConvergenceError(
        f"jacobi svd did not converge in {JACOBI_MAX_SWEEPS} sweeps, "
        f"worst off-diagonal ratio {worst:.3e}",
        off_diagonal=worst,
    )


def _complete_basis(ut, filled, m):
    """Fill unfilled rows of ``ut`` with unit vectors orthogonal to the rest.

    Gram-Schmidt against the standard basis; used for singular values that
    are numerically zero, where the rotated column carries no direction.
    """
    have = [ut[j] for j in range(ut.shape[0]) if filled[j]]
    for j in range(ut.shape[0]):
        if filled[j]:
            continue
        for k in range(m):
            cand = np.zeros(m)
            cand[k] = 1.0
            for b in have:
                cand -= np.dot(cand, b) * b
            norm = float(np.linalg.norm(cand))
            if norm > 0.5:
                ut[j] = cand / norm
                have.append(ut[j])
                break
        else:  # pragma: no cover - m independent vectors always exist
            raise ConvergenceError("could not complete an orthonormal basis")
    return ut


def svd(a):
    """Thin singular value decomposition by one-sided Jacobi rotations.

    Parameters
    ----------
    a : array_like, shape (m, n)
        Real matrix with finite entries.

    Returns
    -------
    SvdResult
        ``u @ diag(s) @ v.T`` reconstructs ``a``; the columns of ``u`` and
        ``v`` are orthonormal; ``s`` is sorted descending.  The sign of each
        column pair is normalized so the largest-magnitude entry of every
        ``u`` column is nonnegative, making the result deterministic.

    Raises
    ------
    ValueError
        On non-2-D or non-finite input.
    ConvergenceError
        If the sweep cap is reached while column pairs remain coupled.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"svd expects a 2-D matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("svd input contains non-finite entries")

    m, n = a.shape
    transposed = m < n
    work = a.T if transposed else a
    rows, cols = work.shape  # rows >= cols

    w, vt = _jacobi_tall(work)
    norms = np.linalg.norm(w, axis=1)
    order = np.argsort(-norms, kind="stable")
    norms = norms[order]
    w = w[order]
    vt = vt[order]

    smax = float(norms[0]) if norms.size else 0.0
    cutoff = max(rows, cols) * np.finfo(float).eps * smax
    ut = np.zeros((cols, rows))
    filled = norms > cutoff
    for j in np.flatnonzero(filled):
        ut[j] = w[j] / norms[j]
    ut = _complete_basis(ut, filled, rows)

    u = ut.T
    v = vt.T
    s = norms.copy()
    if transposed:
        u, v = v, u

    # Deterministic sign: largest-|entry| of each left column made positive.
    for j in range(s.size):
        k = int(np.argmax(np.abs(u[:, j])))
        if u[k, j] < 0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]
    return SvdResult(u=u, s=s, v=v)


def _check_spectrum(singular_values):
    s = np.asarray(singular_values, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("expected a nonempty 1-D array of singular values")
    if np.any(s < 0):
        raise ValueError("singular values must be nonnegative")
    if np.any(np.diff(s) > 1e-12 * max(1.0, float(s[0]))):
        raise ValueError("singular values must be sorted descending")
    if not np.any(s > 0):
        raise DegenerateSpectrumError("all singular values are zero")
    return s


def rank_by_energy(singular_values, threshold=0.95):
    """Smallest rank whose squared singular values reach ``threshold``.

    Parameters
    ----------
    singular_values : array_like
        Nonnegative, sorted descending.
    threshold : float
        Fraction of total squared energy to retain, in (0, 1].  Default 0.95.

    Returns
    -------
    int
        Smallest f with ``sum(s[:f] ** 2) / sum(s ** 2) >= threshold``.

    Raises
    ------
    DegenerateSpectrumError
        If every singular value is zero.
    """
    s = _check_spectrum(singular_values)
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    energy = np.cumsum(s * s) / float(np.sum(s * s))
    return int(np.argmax(energy >= threshold)) + 1


def rank_by_ratio(singular_values, c=10.0):
    """Smallest rank whose retained sum dominates the tail ``c`` times over.

    Returns the smallest f with ``sum(s[:f]) >= c * sum(s[f:])``; falls back
    to the full rank when no proper prefix satisfies the ratio.

    Raises
    ------
    DegenerateSpectrumError
        If every singular value is zero.
    """
    s = _check_spectrum(singular_values)
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    total = float(np.sum(s))
    head = 0.0
    for f in range(1, s.size):
        head += float(s[f - 1])
        if head >= c * (total - head):
            return f
    return int(s.size)


def truncate(result, f):
    """Keep the first ``f`` singular triplets of a decomposition.

    Parameters
    ----------
    result : SvdResult
    f : int
        Retained rank, 1 <= f <= len(result.s).

    Returns
    -------
    (u_f, s_f, v_f)
        ``u_f`` is (m, f), ``s_f`` is the (f, f) diagonal matrix, ``v_f`` is
        (n, f), so ``u_f @ s_f @ v_f.T`` is the rank-f reconstruction.
    """
    r = result.s.size
    if not 1 <= f <= r:
        raise ValueError(f"rank f must be in [1, {r}], got {f}")
    return result.u[:, :f].copy(), np.diag(result.s[:f]), result.v[:, :f].copy()
