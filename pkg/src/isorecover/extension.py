"""Extension of a distance-preserving labelling of a d-simplex to a global isometry.

A map defined on d+1 affinely independent points that preserves their
pairwise distances agrees with exactly one isometry of R^d. The linear
part is the unique matrix sending the source edge vectors to the image
edge vectors; equal Gram matrices of the two edge sets make it orthogonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSimplex, DimensionError, NotDistancePreserving, NumericalFailure
from .geometry import DEFAULT_RTOL, affinely_independent, as_points, edge_matrix, gram_matrix
from .isometry import EuclideanIsometry

DEFAULT_PAIR_TOL = 1e-9
MAX_REPAIR = 1e-6


@dataclass(frozen=True, eq=False)
class LabeledSimplex:
    """Source vertices ``a_0..a_d`` together with their images ``f(a_0)..f(a_d)``."""

    source: np.ndarray
    images: np.ndarray

    def __post_init__(self):
        src = as_points(self.source)
        n, d = src.shape
        if n != d + 1:
            raise DimensionError(f"a simplex in R^{d} has {d + 1} vertices, got {n}")
        img = as_points(self.images, d)
        if img.shape[0] != n:
            raise DimensionError(f"{n} source vertices but {img.shape[0]} images")
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "images", img)

    @property
    def d(self) -> int:
        return self.source.shape[1]


def _pairwise(P: np.ndarray) -> np.ndarray:
    return np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)


def check_distance_preserving(ls: LabeledSimplex, pair_tol: float = DEFAULT_PAIR_TOL) -> tuple[bool, dict]:
    """Test ``| |f(a_i)-f(a_j)| - |a_i-a_j| | <= pair_tol (1 + |a_i-a_j|)`` for every pair.

    The diagnostics name the worst pair (largest defect relative to its
    allowance), its absolute ``defect`` and the ``relative`` defect.
    """
    if not pair_tol > 0:
        raise ValueError(f"pair_tol must be positive, got {pair_tol}")
    ds = _pairwise(ls.source)
    di = _pairwise(ls.images)
    defect = np.abs(di - ds)
    relative = defect / (1.0 + ds)
    i, j = np.unravel_index(np.argmax(relative), relative.shape)
    i, j = (int(min(i, j)), int(max(i, j)))
    info = {"worst_pair": (i, j), "defect": float(defect[i, j]), "relative": float(relative[i, j])}
    return bool(relative[i, j] <= pair_tol), info


def verify_gram_equality(ls: LabeledSimplex, tol: float = DEFAULT_PAIR_TOL) -> bool:
    """``||V^T V - W^T W||_F <= tol (1 + ||V^T V||_F)`` for the two edge matrices."""
    Gv = gram_matrix(edge_matrix(ls.source))
    Gw = gram_matrix(edge_matrix(ls.images))
    return bool(np.linalg.norm(Gv - Gw, "fro") <= tol * (1.0 + np.linalg.norm(Gv, "fro")))


def extend_finite_isometry(
    ls: LabeledSimplex,
    rtol: float = DEFAULT_RTOL,
    pair_tol: float = DEFAULT_PAIR_TOL,
    full_output: bool = False,
):
    """The unique isometry agreeing with the labelling on the simplex.

    Parameters
    ----------
    ls : LabeledSimplex
    rtol : float
        Relative singular-value threshold for affine independence.
    pair_tol : float
        Allowed relative distortion of each pairwise distance; the Gram
        matrices of the edge vectors are checked at the same tolerance.
    full_output : bool
        Also return a dict with ``repair`` (Frobenius distance between the
        raw solve and its orthogonal projection) and ``raw_Q``.

    Raises
    ------
    DegenerateSimplex
        The source vertices are numerically affinely dependent.
    NotDistancePreserving
        The labelling distorts a distance or the edge Gram matrix.
    NumericalFailure
        The solve failed or produced a matrix too far from O(d) to repair.
    """
    if not affinely_independent(ls.source, rtol):
        raise DegenerateSimplex(f"source vertices are affinely dependent at rtol={rtol:g}")
    ok, info = check_distance_preserving(ls, pair_tol)
    if not ok:
        i, j = info["worst_pair"]
        raise NotDistancePreserving(
            f"pair ({i}, {j}) distorted by {info['defect']:.3g} (relative {info['relative']:.3g} > {pair_tol:g})"
        )
    if not verify_gram_equality(ls, pair_tol):
        raise NotDistancePreserving(f"edge Gram matrices differ beyond {pair_tol:g}")

    V = edge_matrix(ls.source)
    W = edge_matrix(ls.images)
    # Q V = W  <=>  V^T Q^T = W^T, solved without forming V^{-1}
    try:
        Q_raw = np.linalg.solve(V.T, W.T).T
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"edge system is singular: {exc}") from None
    if not np.all(np.isfinite(Q_raw)):
        raise NumericalFailure("edge system produced non-finite entries")

    U, _, Vt = np.linalg.svd(Q_raw)
    Q = U @ Vt
    repair = float(np.linalg.norm(Q_raw - Q, "fro"))
    if repair > MAX_REPAIR:
        raise NumericalFailure(f"orthogonality repair {repair:.3g} exceeds {MAX_REPAIR:g}")

    # averaging over all vertices spreads the residual of the repaired Q evenly
    b = np.mean(ls.images - ls.source @ Q.T, axis=0)
    H = EuclideanIsometry(Q, b)
    if full_output:
        return H, {"repair": repair, "raw_Q": Q_raw}
    return H
