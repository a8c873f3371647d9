"""End-to-end recovery and certification from correspondence data.

The pipeline selects a simplex of mutually consistent samples, extends the
map on it to a global isometry, and measures on how much of the data that
isometry agrees with the observed images. Pair consistency is judged from
the data with a relative tolerance ``tau``:

    | |y_i - y_j| - |x_i - x_j| | <= tau (1 + |x_i - x_j|)

RANSAC defaults
---------------
Each trial redraws random (d+1)-subsets, up to ``max_draws`` times, until it
finds one whose pairs are all consistent. A subset containing a displaced
point is almost never consistent, so a trial only fails when all of its
draws touch a corrupted point. With corruption fraction ``eps`` the chance
that one draw is clean is ``(1 - eps)^(d+1)``; for ``eps = 0.2, d = 8`` that
is ``0.8^9 = 0.134``, so a trial fails with probability
``0.866^100 = 5.7e-7`` and all 64 trials fail with probability far below
``1e-6``. Without redraws (one draw per trial) the same bound would only
give ``0.866^64 = 1e-4``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from statistics import NormalDist

import numpy as np

from . import jsonio
from .errors import (
    DegenerateAnchors,
    DegenerateSupport,
    DimensionError,
    InsufficientData,
    NoConsensus,
    RecoveryError,
)
from .extension import LabeledSimplex, extend_finite_isometry
from .geometry import affine_dimension, affinely_independent, as_points
from .isometry import EuclideanIsometry
from .measures import STREAM_RANSAC, CorrespondenceSet, substream


@dataclass(frozen=True)
class RecoveryConfig:
    rank_rtol: float = 1e-8
    pair_tol: float = 1e-9
    tau: float = 1e-6
    ransac_trials: int = 64
    consensus_quorum: float = 0.7
    seed: int = 0
    max_draws: int = 100
    workers: int = 1

    def __post_init__(self):
        for name in ("rank_rtol", "pair_tol", "tau"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.ransac_trials < 1 or self.max_draws < 1 or self.workers < 1:
            raise ValueError("ransac_trials, max_draws and workers must be at least 1")
        if not 0.5 < self.consensus_quorum <= 1.0:
            raise ValueError(f"consensus_quorum must lie in (0.5, 1], got {self.consensus_quorum}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def extension_tol(self) -> float:
        # a simplex accepted at tau must not be rejected again by the extension
        return max(self.pair_tol, self.tau)


def pair_validity(cs: CorrespondenceSet, tau: float):
    """Vectorised pair predicate ``valid(i, js) -> bool array`` for ``cs``."""
    X, Y = cs.X, cs.Y

    def valid(i, js):
        js = np.asarray(js)
        dx = np.linalg.norm(X[js] - X[i], axis=-1)
        dy = np.linalg.norm(Y[js] - Y[i], axis=-1)
        return np.abs(dy - dx) <= tau * (1.0 + dx)

    return valid


def residuals(H: EuclideanIsometry, cs: CorrespondenceSet) -> np.ndarray:
    return np.linalg.norm(H.apply(cs.X) - cs.Y, axis=1)


def consensus_mask(H: EuclideanIsometry, cs: CorrespondenceSet, tau: float) -> np.ndarray:
    """Points whose image is within ``tau (1 + |x|)`` of the prediction."""
    return residuals(H, cs) <= tau * (1.0 + np.linalg.norm(cs.X, axis=1))


def select_simplex(samples, pair_valid, cfg: RecoveryConfig = RecoveryConfig()) -> np.ndarray:
    """Greedy scan for d+1 mutually valid, affinely independent samples.

    ``a_0`` is the first sample that can be completed; each next vertex is
    the first sample in input order that is valid against every vertex
    chosen so far and raises the affine dimension. ``pair_valid(i, js)``
    must accept an index array ``js`` and return a boolean array.

    Returns the indices of the chosen vertices, in selection order.
    """
    X = as_points(samples)
    n, d = X.shape
    if n < d + 1:
        raise InsufficientData(f"{n} samples cannot contain a simplex in R^{d}")
    if affine_dimension(X, cfg.rank_rtol) < d:
        raise InsufficientData("samples do not span R^d; no full simplex exists")

    idx = np.arange(n)
    for a0 in range(n):
        compatible = np.asarray(pair_valid(a0, idx), dtype=bool)
        compatible[a0] = False
        if np.count_nonzero(compatible) < d:
            continue
        chosen = [a0]
        for j in idx[compatible]:
            if not compatible[j]:
                continue
            if not affinely_independent(X[chosen + [j]], cfg.rank_rtol):
                continue
            chosen.append(int(j))
            if len(chosen) == d + 1:
                return np.array(chosen)
            compatible &= np.asarray(pair_valid(int(j), idx), dtype=bool)
            compatible[j] = False
    raise InsufficientData(f"no {d + 1} mutually consistent, affinely independent samples found")


def _extend_on(cs: CorrespondenceSet, simplex, cfg: RecoveryConfig) -> EuclideanIsometry:
    ls = LabeledSimplex(cs.X[simplex], cs.Y[simplex])
    return extend_finite_isometry(ls, rtol=cfg.rank_rtol, pair_tol=cfg.extension_tol)


def recover_oracle(cs: CorrespondenceSet, cfg: RecoveryConfig = RecoveryConfig(), full_output: bool = False):
    """Deterministic recovery from the first consistent simplex in input order."""
    if cs.n < cs.d + 1:
        raise InsufficientData(f"{cs.n} correspondences cannot determine an isometry of R^{cs.d}")
    simplex = select_simplex(cs.X, pair_validity(cs, cfg.tau), cfg)
    H = _extend_on(cs, simplex, cfg)
    if full_output:
        return H, {"simplex": simplex}
    return H


_DENSE_PAIRS = 64


def _pair_matrix(cs: CorrespondenceSet, tau: float) -> np.ndarray:
    DX = np.linalg.norm(cs.X[:, None, :] - cs.X[None, :, :], axis=-1)
    DY = np.linalg.norm(cs.Y[:, None, :] - cs.Y[None, :, :], axis=-1)
    return np.abs(DY - DX) <= tau * (1.0 + DX)


def _draw_candidates(cs: CorrespondenceSet, cfg: RecoveryConfig) -> list:
    """One sorted index tuple (or None) per trial, drawn sequentially from the RANSAC stream."""
    rng = substream(cfg.seed, STREAM_RANSAC)
    n, d = cs.n, cs.d
    if n <= _DENSE_PAIRS:
        M = _pair_matrix(cs, cfg.tau)

        def consistent(idx):
            return M[np.ix_(idx, idx)].all()
    else:
        valid = pair_validity(cs, cfg.tau)

        def consistent(idx):
            return all(valid(idx[k], idx[k + 1:]).all() for k in range(d))

    out = []
    for _ in range(cfg.ransac_trials):
        found = None
        for _ in range(cfg.max_draws):
            idx = np.sort(rng.choice(n, size=d + 1, replace=False))
            if consistent(idx) and affinely_independent(cs.X[idx], cfg.rank_rtol):
                found = tuple(int(i) for i in idx)
                break
        out.append(found)
    return out


def recover_robust(cs: CorrespondenceSet, cfg: RecoveryConfig = RecoveryConfig(), full_output: bool = False):
    """RANSAC over consistent simplices; returns ``(H, inlier_mask)``.

    Candidates are drawn sequentially from the seeded stream, then scored
    (in parallel when ``cfg.workers > 1``). The best consensus wins, ties
    going to the lowest trial index, so the result does not depend on the
    number of workers. With ``full_output`` a third element carries the
    winning ``simplex``, its ``trial`` index and the ``consensus`` count.

    Raises
    ------
    InsufficientData
        Fewer than d+1 correspondences.
    NoConsensus
        The best candidate explains fewer than ``consensus_quorum * n`` points.
    """
    n, d = cs.n, cs.d
    if n < d + 1:
        raise InsufficientData(f"{n} correspondences cannot determine an isometry of R^{d}")
    candidates = _draw_candidates(cs, cfg)

    def score(simplex):
        if simplex is None:
            return None
        try:
            H = _extend_on(cs, list(simplex), cfg)
        except RecoveryError:
            return None
        return H, consensus_mask(H, cs, cfg.tau)

    # repeated simplices (common for small n) are scored once
    unique = list(dict.fromkeys(c for c in candidates if c is not None))
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = dict(zip(unique, pool.map(score, unique)))
    else:
        results = {c: score(c) for c in unique}
    scored = [None if c is None else results[c] for c in candidates]

    best, best_count = None, -1
    for trial, result in enumerate(scored):
        if result is not None and int(result[1].sum()) > best_count:
            best, best_count = trial, int(result[1].sum())

    if best is None:
        raise NoConsensus("no trial found a consistent simplex", best_consensus=0)
    if best_count < cfg.consensus_quorum * n:
        raise NoConsensus(
            f"best consensus {best_count}/{n} is below the quorum {cfg.consensus_quorum:g}",
            best_consensus=best_count,
        )
    H, mask = scored[best]
    if full_output:
        return H, mask, {"simplex": np.array(candidates[best]), "trial": best, "consensus": best_count}
    return H, mask


def verify_pointwise(H: EuclideanIsometry, cs: CorrespondenceSet, anchors, tol: float, rtol: float = 1e-8) -> np.ndarray:
    """Per point: are ``y_z`` and ``H(x_z)`` equidistant from every anchor?

    ``anchors`` should be the images under ``H`` of the recovery simplex.
    The tolerance for point ``z`` is ``tol (1 + |x_z|)``, matching
    :func:`consensus_mask`.
    """
    A = as_points(anchors, cs.d)
    if A.shape[0] != cs.d + 1:
        raise DimensionError(f"need {cs.d + 1} anchors in R^{cs.d}, got {A.shape[0]}")
    if not affinely_independent(A, rtol):
        raise DegenerateAnchors("anchors are affinely dependent")
    HX = H.apply(cs.X)
    gap = np.abs(
        np.linalg.norm(cs.Y[:, None, :] - A[None], axis=-1) - np.linalg.norm(HX[:, None, :] - A[None], axis=-1)
    )
    return np.all(gap <= (tol * (1.0 + np.linalg.norm(cs.X, axis=1)))[:, None], axis=1)


def procrustes_fit(cs: CorrespondenceSet, inliers=None, rtol: float = 1e-8) -> EuclideanIsometry:
    """Least-squares isometry over the inliers (orthogonal Procrustes).

    Reflections are allowed, so the optimal ``Q`` is the orthogonal polar
    factor of the centred cross-covariance, with no determinant correction.
    """
    mask = np.ones(cs.n, dtype=bool) if inliers is None else np.asarray(inliers, dtype=bool)
    if mask.shape != (cs.n,):
        raise DimensionError("inlier mask length does not match the correspondences")
    X, Y = cs.X[mask], cs.Y[mask]
    if X.shape[0] < cs.d + 1 or affine_dimension(X, rtol) < cs.d:
        raise DegenerateSupport("inlier sources do not span R^d")
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    C = (Y - my).T @ (X - mx)
    U, _, Vt = np.linalg.svd(C)
    Q = U @ Vt
    return EuclideanIsometry(Q, my - Q @ mx)


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion ``k / n``."""
    if n == 0:
        return 0.0, 1.0
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z / denom * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n))
    return max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half))


@dataclass
class CertificationReport:
    """Outcome of :func:`certify`. ``recovered`` is None when recovery failed,
    in which case ``violation_rate_hat`` is 1 by convention."""

    d: int
    n: int
    recovered: EuclideanIsometry | None
    violation_rate_hat: float
    confidence_interval: tuple[float, float]
    inlier_count: int
    outlier_count: int
    residual_stats: dict | None
    support_dimension: int
    pair_violation_rate_hat: float
    pair_confidence_interval: tuple[float, float]
    failure: str | None = None
    simplex: list | None = None
    pointwise_agreement: float | None = None
    config: dict = field(default_factory=dict)

    @property
    def succeeded(self) -> bool:
        return self.recovered is not None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["recovered"] = None if self.recovered is None else self.recovered.to_dict()
        out["confidence_interval"] = list(self.confidence_interval)
        out["pair_confidence_interval"] = list(self.pair_confidence_interval)
        return out

    def to_json(self, indent: int | None = 2) -> str:
        return jsonio.dumps(self.to_dict(), indent=indent)


def _pair_rate(p: float) -> float:
    # ordered pair (i, j) is bad when either endpoint is bad
    return 1.0 - (1.0 - p) ** 2


def certify(cs: CorrespondenceSet, cfg: RecoveryConfig = RecoveryConfig()) -> CertificationReport:
    """Recover an isometry robustly and estimate the mass on which the data disagrees.

    Never raises for well-formed input: failures are reported in-band with
    ``recovered = None``.
    """
    n, d = cs.n, cs.d
    support = affine_dimension(cs.X, cfg.rank_rtol) if n else 0

    def failed(reason):
        lo, hi = (0.0, 1.0) if n == 0 else wilson_interval(n, n)
        return CertificationReport(
            d=d, n=n, recovered=None, violation_rate_hat=1.0, confidence_interval=(lo, hi),
            inlier_count=0, outlier_count=n, residual_stats=None, support_dimension=support,
            pair_violation_rate_hat=1.0, pair_confidence_interval=(_pair_rate(lo), 1.0),
            failure=reason, config=asdict(cfg),
        )

    if support < d:
        return failed(f"support dimension {support} < {d}: samples lie in a proper affine subspace")
    try:
        H, mask, info = recover_robust(cs, cfg, full_output=True)
    except RecoveryError as exc:
        return failed(f"{type(exc).__name__}: {exc}")

    res = residuals(H, cs)
    violations = ~consensus_mask(H, cs, cfg.tau)
    k = int(violations.sum())
    rate = k / n
    lo, hi = wilson_interval(k, n)

    simplex = info["simplex"]
    step3 = verify_pointwise(H, cs, H.apply(cs.X[simplex]), cfg.tau, cfg.rank_rtol)
    return CertificationReport(
        d=d, n=n, recovered=H, violation_rate_hat=rate, confidence_interval=(lo, hi),
        inlier_count=n - k, outlier_count=k,
        residual_stats={"max": float(res.max()), "mean": float(res.mean()), "p95": float(np.percentile(res, 95))},
        support_dimension=support,
        pair_violation_rate_hat=_pair_rate(rate), pair_confidence_interval=(_pair_rate(lo), _pair_rate(hi)),
        simplex=[int(i) for i in simplex],
        pointwise_agreement=float(np.mean(step3 == ~violations)),
        config=asdict(cfg),
    )


def write_residual_csv(path, H: EuclideanIsometry, cs: CorrespondenceSet, tau: float) -> None:
    res = residuals(H, cs)
    inlier = consensus_mask(H, cs, tau)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "residual", "inlier"])
        for i, (r, ok) in enumerate(zip(res, inlier)):
            w.writerow([i, jsonio.fmt_float(r), int(ok)])
