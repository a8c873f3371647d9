"""Vector primitives and affine-geometry predicates on R^d.

Points are plain 1-D float64 numpy arrays and point sets are ``(n, d)``
arrays. Everything here is a pure function.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .errors import DimensionError

MAX_DIM = 64
DEFAULT_RTOL = 1e-8
_EPS = np.finfo(np.float64).eps
_POLAR_RTOL = 1e-13


def as_point(x, d: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite float64 vector, optionally of dimension ``d``."""
    p = np.asarray(x, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise DimensionError(f"expected a non-empty 1-D point, got shape {p.shape}")
    if p.size > MAX_DIM:
        raise DimensionError(f"dimension {p.size} exceeds the supported maximum {MAX_DIM}")
    if d is not None and p.size != d:
        raise DimensionError(f"expected dimension {d}, got {p.size}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point has non-finite coordinates")
    return p


def as_points(points, d: int | None = None) -> np.ndarray:
    """Coerce to an ``(n, d)`` finite float64 array. ``n`` may be zero when ``d`` is given."""
    P = np.asarray(points, dtype=np.float64)
    if P.ndim == 1 and P.size == 0 and d is not None:
        return np.empty((0, d))
    if P.ndim != 2 or P.shape[1] == 0:
        raise DimensionError(f"expected an (n, d) point array, got shape {P.shape}")
    if P.shape[1] > MAX_DIM:
        raise DimensionError(f"dimension {P.shape[1]} exceeds the supported maximum {MAX_DIM}")
    if d is not None and P.shape[1] != d:
        raise DimensionError(f"expected dimension {d}, got {P.shape[1]}")
    if not np.all(np.isfinite(P)):
        raise ValueError("point set has non-finite coordinates")
    return P


def _pair(x, y):
    x = as_point(x)
    return x, as_point(y, x.size)


def inner_product(x, y) -> float:
    x, y = _pair(x, y)
    return float(np.dot(x, y))


def _polarization_exact(x: np.ndarray, y: np.ndarray) -> float:
    xs = [Fraction(v) for v in x.tolist()]
    ys = [Fraction(v) for v in y.tolist()]
    nx = sum(a * a for a in xs)
    ny = sum(b * b for b in ys)
    nd = sum((a - b) * (a - b) for a, b in zip(xs, ys))
    return float((nx + ny - nd) / 2)


def _polarization_error_bound(nx, ny, nd, d):
    # forward error of the float evaluation: each squared norm carries at
    # most (d + 2) roundings, the differences x - y one more
    return (d + 3) * _EPS * (nx + ny + nd)


def inner_by_polarization(x, y) -> float:
    """Inner product recovered from norms alone: (|x|^2 + |y|^2 - |x-y|^2) / 2.

    Evaluated in floating point when the rounding-error bound is small
    against ``max(1, |x||y|)``; otherwise the same identity is evaluated in
    exact rational arithmetic, since cancellation between the squared norms
    would swamp the result.
    """
    x, y = _pair(x, y)
    diff = x - y
    nx, ny, nd = float(np.dot(x, x)), float(np.dot(y, y)), float(np.dot(diff, diff))
    if _polarization_error_bound(nx, ny, nd, x.size) <= _POLAR_RTOL * max(1.0, math.sqrt(nx * ny)):
        return 0.5 * (nx + ny - nd)
    return _polarization_exact(x, y)


def polarization_rows(X, Y) -> np.ndarray:
    """Row-wise :func:`inner_by_polarization` for two ``(n, d)`` arrays."""
    X = as_points(X)
    Y = as_points(Y, X.shape[1])
    if X.shape != Y.shape:
        raise DimensionError(f"row counts differ: {X.shape[0]} and {Y.shape[0]}")
    D = X - Y
    nx, ny, nd = (np.einsum("ij,ij->i", A, A) for A in (X, Y, D))
    out = 0.5 * (nx + ny - nd)
    risky = _polarization_error_bound(nx, ny, nd, X.shape[1]) > _POLAR_RTOL * np.maximum(1.0, np.sqrt(nx * ny))
    for i in np.flatnonzero(risky):
        out[i] = _polarization_exact(X[i], Y[i])
    return out


def distance(x, y) -> float:
    x, y = _pair(x, y)
    # |x - y| and |y - x| differ only by sign of every entry, so this is exactly symmetric
    return float(np.linalg.norm(x - y))


def edge_matrix(points) -> np.ndarray:
    """Columns ``p_i - p_0`` for i = 1..k, shape ``(d, k)``."""
    P = as_points(points)
    return (P[1:] - P[0]).T


def _singular_values(M: np.ndarray) -> np.ndarray:
    if M.size == 0:
        return np.empty(0)
    return np.linalg.svd(M, compute_uv=False)


def affinely_independent(points, rtol: float = DEFAULT_RTOL) -> bool:
    """True iff the edge vectors from the first point are numerically independent.

    Independence is judged by ``sigma_min > rtol * sigma_max`` of the edge
    matrix, which is invariant to scaling of the configuration.
    """
    if not rtol > 0:
        raise ValueError(f"rtol must be positive, got {rtol}")
    P = as_points(points)
    n, d = P.shape
    if n < 1:
        raise ValueError("need at least one point")
    if n > d + 1:
        raise ValueError(f"{n} points cannot be affinely independent in R^{d}")
    if n == 1:
        return True
    s = _singular_values(edge_matrix(P))
    return bool(s[-1] > rtol * s[0])


def affine_dimension(points, rtol: float = DEFAULT_RTOL) -> int:
    """Dimension of the affine hull: numerical rank of the centred point matrix."""
    if not rtol > 0:
        raise ValueError(f"rtol must be positive, got {rtol}")
    P = as_points(points)
    if P.shape[0] < 1:
        raise ValueError("need at least one point")
    s = _singular_values(P - P.mean(axis=0))
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def gram_matrix(vectors) -> np.ndarray:
    """``V.T @ V`` for a ``(d, k)`` matrix of column vectors, symmetrised exactly."""
    V = np.asarray(vectors, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    if V.ndim != 2:
        raise DimensionError(f"expected a (d, k) matrix, got shape {V.shape}")
    G = V.T @ V
    return np.triu(G) + np.triu(G, 1).T
