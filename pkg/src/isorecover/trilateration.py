"""Locating a point from its distances to d+1 affinely independent anchors."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateAnchors, DimensionError, Infeasible
from .geometry import DEFAULT_RTOL, affinely_independent, as_point, as_points, edge_matrix

DEFAULT_RES_TOL = 1e-8


def anchor_distances(anchors, z) -> np.ndarray:
    A = as_points(anchors)
    return np.linalg.norm(A - as_point(z, A.shape[1]), axis=1)


def locate(anchors, distances, res_tol: float = DEFAULT_RES_TOL, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Return the unique point at the given distances from the anchors.

    Writing ``z = a_0 + u`` and subtracting the first sphere equation from
    the others leaves the square system ``2 V^T u = |v_i|^2 + r_0^2 - r_i^2``
    with ``V`` the anchor edge matrix. The linear solution is then checked
    against all d+1 sphere equations, since inconsistent distances still
    give the linear system a solution.
    """
    if not res_tol > 0:
        raise ValueError(f"res_tol must be positive, got {res_tol}")
    A = as_points(anchors)
    n, d = A.shape
    r = np.asarray(distances, dtype=np.float64)
    if n != d + 1 or r.shape != (n,):
        raise DimensionError(f"need {d + 1} anchors and {d + 1} distances in R^{d}, got {n} and {r.shape}")
    if not np.all(np.isfinite(r)) or np.any(r < 0):
        raise ValueError("distances must be finite and non-negative")
    if not affinely_independent(A, rtol):
        raise DegenerateAnchors(f"anchors are affinely dependent at rtol={rtol:g}")

    V = edge_matrix(A)
    rhs = np.sum(V * V, axis=0) + r[0] ** 2 - r[1:] ** 2
    u = np.linalg.solve(2.0 * V.T, rhs)
    z = A[0] + u

    # one Gauss-Newton step on the unsquared sphere equations removes most of
    # the cancellation error in the squared-distance right-hand side
    offsets = z - A
    norms = np.linalg.norm(offsets, axis=1)
    if np.all(norms > 0.0):
        res = norms - r
        step, *_ = np.linalg.lstsq(offsets / norms[:, None], res, rcond=None)
        z_new = z - step
        if np.max(np.abs(np.linalg.norm(z_new - A, axis=1) - r)) < np.max(np.abs(res)):
            z = z_new

    defect = np.abs(np.linalg.norm(z - A, axis=1) - r)
    allowance = res_tol * (1.0 + r)
    if np.any(defect > allowance):
        k = int(np.argmax(defect / allowance))
        raise Infeasible(f"no point matches the distances: anchor {k} misses by {defect[k]:.3g}")
    return z


def equidistance_collapse(p, q, anchors, tol: float, rtol: float = DEFAULT_RTOL) -> bool:
    """True iff ``p`` and ``q`` are equidistant, within ``tol``, from every anchor.

    With a full set of d+1 independent anchors this forces ``p == q``; with
    fewer anchors, mirror images across their affine hull also pass.
    """
    A = as_points(anchors)
    p = as_point(p, A.shape[1])
    q = as_point(q, A.shape[1])
    if not affinely_independent(A, rtol):
        raise DegenerateAnchors(f"anchors are affinely dependent at rtol={rtol:g}")
    gap = np.abs(np.linalg.norm(p - A, axis=1) - np.linalg.norm(q - A, axis=1))
    return bool(np.all(gap <= tol))
