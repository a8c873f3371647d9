"""Synthetic measures, corrupted maps and correspondence files.

Random streams
--------------
Every random quantity is drawn from a PCG64 generator seeded by
``SeedSequence(seed, spawn_key=(stream,))``, with one fixed ``stream`` id
per operation (see the ``STREAM_*`` constants). Changing how one operation
consumes randomness therefore never shifts another operation's draws.
Bit-exact output is promised only for this implementation.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import jsonio
from .errors import DimensionError, InsufficientData
from .geometry import DEFAULT_RTOL, MAX_DIM, affine_dimension, as_points
from .isometry import EuclideanIsometry

STREAM_SAMPLE = 0
STREAM_CORRUPT_SELECT = 1
STREAM_CORRUPT_DISPLACE = 2
STREAM_RANSAC = 3
STREAM_BASE_MAP = 4

MEASURE_KINDS = ("gaussian", "uniform-box", "gaussian-mixture", "hyperplane-supported")
CORRUPTION_KINDS = ("none", "point-fraction", "slab")


def substream(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for one operation under a master seed."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def _check_psd(cov: np.ndarray, what: str) -> None:
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise ValueError(f"{what} is not symmetric")
    lam = np.linalg.eigvalsh(cov)
    if lam[0] < -1e-12 * max(1.0, abs(lam[-1])):
        raise ValueError(f"{what} is not positive semidefinite")


def _sqrt_psd(cov: np.ndarray) -> np.ndarray:
    lam, U = np.linalg.eigh(cov)
    return U * np.sqrt(np.clip(lam, 0.0, None))


@dataclass(frozen=True, eq=False)
class MeasureModel:
    """A probability measure on R^d that can be sampled reproducibly.

    ``params`` by kind:

    * ``gaussian``: ``mean`` (d,), ``cov`` (d, d)
    * ``uniform-box``: ``low`` (d,), ``high`` (d,)
    * ``gaussian-mixture``: ``weights`` (k,), ``means`` (k, d), ``covs`` (k, d, d)
    * ``hyperplane-supported``: ``normal`` (d,), ``offset``, ``scale``; a
      Gaussian of std ``scale`` inside the hyperplane ``<normal, x> = offset``
    """

    kind: str
    d: int
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise ValueError(f"unknown measure kind {self.kind!r}; expected one of {MEASURE_KINDS}")
        if not 1 <= int(self.d) <= MAX_DIM:
            raise DimensionError(f"dimension must be in [1, {MAX_DIM}], got {self.d}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "seed", int(self.seed))
        substream(self.seed, 0)
        object.__setattr__(self, "params", self._normalised_params())

    def _normalised_params(self) -> dict:
        d, p = self.d, dict(self.params)
        arr = lambda v, shape: _shaped(v, shape, self.kind)  # noqa: E731
        if self.kind == "gaussian":
            mean = arr(p.get("mean", np.zeros(d)), (d,))
            cov = arr(p.get("cov", np.eye(d)), (d, d))
            _check_psd(cov, "covariance")
            return {"mean": mean, "cov": cov}
        if self.kind == "uniform-box":
            low = arr(p.get("low", np.zeros(d)), (d,))
            high = arr(p.get("high", np.ones(d)), (d,))
            if np.any(high <= low):
                raise ValueError("uniform box must satisfy low < high in every coordinate")
            return {"low": low, "high": high}
        if self.kind == "gaussian-mixture":
            weights = np.asarray(p["weights"], dtype=np.float64)
            k = weights.size
            if weights.ndim != 1 or k == 0 or np.any(weights < 0) or not math.isclose(weights.sum(), 1.0, abs_tol=1e-12):
                raise ValueError("mixture weights must be non-negative and sum to 1")
            means = arr(p["means"], (k, d))
            covs = arr(p.get("covs", np.broadcast_to(np.eye(d), (k, d, d))), (k, d, d))
            for c in covs:
                _check_psd(c, "component covariance")
            return {"weights": weights, "means": means, "covs": covs}
        normal = arr(p["normal"], (d,))
        if not np.any(normal):
            raise ValueError("hyperplane normal must be non-zero")
        scale = float(p.get("scale", 1.0))
        if not scale > 0:
            raise ValueError("hyperplane scale must be positive")
        return {"normal": normal, "offset": float(p.get("offset", 0.0)), "scale": scale}

    @classmethod
    def gaussian(cls, d, mean=None, cov=None, seed=0) -> MeasureModel:
        params = {k: v for k, v in (("mean", mean), ("cov", cov)) if v is not None}
        return cls("gaussian", d, params, seed)

    @classmethod
    def uniform_box(cls, low, high, seed=0) -> MeasureModel:
        low = np.atleast_1d(np.asarray(low, dtype=np.float64))
        return cls("uniform-box", low.size, {"low": low, "high": high}, seed)

    @classmethod
    def gaussian_mixture(cls, weights, means, covs=None, seed=0) -> MeasureModel:
        means = np.asarray(means, dtype=np.float64)
        params = {"weights": weights, "means": means}
        if covs is not None:
            params["covs"] = covs
        return cls("gaussian-mixture", means.shape[1], params, seed)

    @classmethod
    def hyperplane(cls, normal, offset=0.0, scale=1.0, seed=0) -> MeasureModel:
        normal = np.asarray(normal, dtype=np.float64)
        return cls("hyperplane-supported", normal.size, {"normal": normal, "offset": offset, "scale": scale}, seed)

    def to_dict(self) -> dict:
        params = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.params.items()}
        return {"kind": self.kind, "d": self.d, "params": params, "seed": self.seed}

    @classmethod
    def from_dict(cls, obj: dict) -> MeasureModel:
        return cls(obj["kind"], obj["d"], obj.get("params", {}), obj.get("seed", 0))


def _shaped(value, shape, kind) -> np.ndarray:
    a = np.asarray(value, dtype=np.float64)
    if a.shape != shape:
        raise DimensionError(f"{kind} parameter has shape {a.shape}, expected {shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{kind} parameter has non-finite entries")
    return a


def sample(m: MeasureModel, n: int) -> np.ndarray:
    """``n`` points from ``m``; identical model and seed give bit-identical output."""
    if n < 1:
        raise ValueError(f"sample size must be at least 1, got {n}")
    rng = substream(m.seed, STREAM_SAMPLE)
    d, p = m.d, m.params
    if m.kind == "gaussian":
        return p["mean"] + rng.standard_normal((n, d)) @ _sqrt_psd(p["cov"]).T
    if m.kind == "uniform-box":
        return rng.uniform(p["low"], p["high"], size=(n, d))
    if m.kind == "gaussian-mixture":
        comp = rng.choice(p["weights"].size, size=n, p=p["weights"])
        Z = rng.standard_normal((n, d))
        X = np.empty((n, d))
        for c in range(p["weights"].size):
            sel = comp == c
            X[sel] = p["means"][c] + Z[sel] @ _sqrt_psd(p["covs"][c]).T
        return X

    normal = p["normal"]
    unit = normal / np.linalg.norm(normal)
    # orthonormal basis of the hyperplane directions
    _, _, Vt = np.linalg.svd(unit[None, :])
    basis = Vt[1:]
    foot = p["offset"] * normal / np.dot(normal, normal)
    return foot + p["scale"] * rng.standard_normal((n, d - 1)) @ basis


def check_full_dimensional(samples, rtol: float = DEFAULT_RTOL) -> bool:
    """Whether the sample's affine hull is all of R^d."""
    X = as_points(samples)
    n, d = X.shape
    if n < d + 1:
        raise InsufficientData(f"{n} samples cannot span R^{d}; need at least {d + 1}")
    return affine_dimension(X, rtol) == d


@dataclass(frozen=True, eq=False)
class CorruptedMap:
    """An isometry that is deliberately wrong on a controlled set of points.

    ``point-fraction`` corrupts exactly ``floor(epsilon * n)`` of a batch of
    ``n`` points, chosen by a seeded permutation. ``slab`` corrupts every
    point with ``|<unit normal, x> - offset| <= thickness / 2``; zero
    thickness gives a hyperplane, a null set for any measure with a density.
    Corrupted images sit on the sphere of radius ``displacement_scale``
    around the true image.
    """

    base: EuclideanIsometry
    corruption: str = "none"
    epsilon: float = 0.0
    normal: np.ndarray | None = None
    offset: float = 0.0
    thickness: float = 0.0
    displacement_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.corruption not in CORRUPTION_KINDS:
            raise ValueError(f"unknown corruption {self.corruption!r}; expected one of {CORRUPTION_KINDS}")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.thickness < 0:
            raise ValueError(f"slab thickness must be non-negative, got {self.thickness}")
        if not self.displacement_scale > 0:
            raise ValueError("displacement scale must be positive")
        object.__setattr__(self, "seed", int(self.seed))
        substream(self.seed, 0)
        if self.corruption == "slab":
            if self.normal is None:
                raise ValueError("slab corruption needs a normal")
            normal = _shaped(self.normal, (self.base.d,), "slab")
            if not np.any(normal):
                raise ValueError("slab normal must be non-zero")
            object.__setattr__(self, "normal", normal / np.linalg.norm(normal))

    @property
    def d(self) -> int:
        return self.base.d

    def corrupted_count(self, n: int) -> int:
        # round() guards against products like 0.29 * 100 = 28.999999999999996
        return math.floor(round(self.epsilon * n, 9))

    def to_dict(self) -> dict:
        out = {"base": self.base.to_dict(), "corruption": self.corruption, "seed": int(self.seed),
               "displacement_scale": self.displacement_scale}
        if self.corruption == "point-fraction":
            out["epsilon"] = self.epsilon
        elif self.corruption == "slab":
            out.update(normal=self.normal.tolist(), offset=self.offset, thickness=self.thickness)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> CorruptedMap:
        return cls(
            base=EuclideanIsometry.from_dict(obj["base"]),
            corruption=obj.get("corruption", "none"),
            epsilon=float(obj.get("epsilon", 0.0)),
            normal=obj.get("normal"),
            offset=float(obj.get("offset", 0.0)),
            thickness=float(obj.get("thickness", 0.0)),
            displacement_scale=float(obj.get("displacement_scale", 1.0)),
            seed=int(obj.get("seed", 0)),
        )


def corruption_mask(cmap: CorruptedMap, X) -> np.ndarray:
    """Boolean mask of the points in the batch ``X`` that ``cmap`` corrupts."""
    X = as_points(np.atleast_2d(X), cmap.d)
    n = X.shape[0]
    mask = np.zeros(n, dtype=bool)
    if cmap.corruption == "point-fraction":
        k = cmap.corrupted_count(n)
        mask[substream(cmap.seed, STREAM_CORRUPT_SELECT).permutation(n)[:k]] = True
    elif cmap.corruption == "slab":
        mask = np.abs(X @ cmap.normal - cmap.offset) <= 0.5 * cmap.thickness
    return mask


def apply_corrupted(cmap: CorruptedMap, X, return_mask: bool = False):
    """Images of a point ``(d,)`` or a batch ``(n, d)`` under the corrupted map.

    Point-fraction selection is defined over the whole batch, so a single
    point is a batch of one and is never selected for ``epsilon < 1``.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    Xb = as_points(X[None, :] if single else X, cmap.d)
    Y = cmap.base.apply(Xb)
    mask = corruption_mask(cmap, Xb)
    if mask.any():
        U = substream(cmap.seed, STREAM_CORRUPT_DISPLACE).standard_normal(Y.shape)
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        Y[mask] += cmap.displacement_scale * U[mask]
    if single:
        Y, mask = Y[0], mask[0]
    return (Y, mask) if return_mask else Y


def quadratic_images(X) -> np.ndarray:
    """A smooth non-isometric map: ``x + 0.5 |x|^2 e_1``."""
    X = as_points(X)
    Y = X.copy()
    Y[:, 0] += 0.5 * np.sum(X * X, axis=1)
    return Y


def scaled_images(X, factor: float = 2.0) -> np.ndarray:
    return factor * as_points(X)


class CorrespondenceFormatError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    """Pairs ``(x_i, y_i)`` with ``y_i`` the observed image of ``x_i``."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        Y = np.asarray(self.Y, dtype=np.float64)
        if X.ndim != 2 or Y.shape != X.shape or X.shape[1] < 1:
            raise DimensionError(f"source and image arrays must share an (n, d) shape, got {X.shape} and {Y.shape}")
        if X.shape[1] > MAX_DIM:
            raise DimensionError(f"dimension {X.shape[1]} exceeds the supported maximum {MAX_DIM}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("correspondences contain non-finite coordinates")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(jsonio.dumps({"d": self.d, "n": self.n}) + "\n")
        for x, y in zip(self.X, self.Y):
            buf.write(jsonio.dumps({"x": x, "y": y}) + "\n")
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> CorrespondenceSet:
        """Parse the JSON-Lines format; errors carry the 1-based line number."""
        lines = text.splitlines()
        if not lines:
            raise CorrespondenceFormatError("empty file: missing header", line=1)
        header = _json_line(lines[0], 1)
        try:
            d, n = int(header["d"]), int(header["n"])
        except (KeyError, TypeError, ValueError):
            raise CorrespondenceFormatError('header must be {"d": int, "n": int}', line=1) from None
        if not 1 <= d <= MAX_DIM or n < 0:
            raise CorrespondenceFormatError(f"header has invalid d={d} or n={n}", line=1)
        X, Y = np.empty((n, d)), np.empty((n, d))
        body = [(no, ln) for no, ln in enumerate(lines[1:], start=2) if ln.strip()]
        if len(body) != n:
            raise CorrespondenceFormatError(f"header announces {n} pairs, found {len(body)}",
                                            line=body[-1][0] if body else 1)
        for i, (no, ln) in enumerate(body):
            rec = _json_line(ln, no)
            try:
                x = np.asarray(rec["x"], dtype=np.float64)
                y = np.asarray(rec["y"], dtype=np.float64)
            except (KeyError, TypeError, ValueError):
                raise CorrespondenceFormatError('expected {"x": [...], "y": [...]}', line=no) from None
            if x.shape != (d,) or y.shape != (d,):
                raise CorrespondenceFormatError(f"expected {d} coordinates per point", line=no)
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
                raise CorrespondenceFormatError("non-finite coordinate", line=no)
            X[i], Y[i] = x, y
        return cls(X, Y)

    @classmethod
    def load(cls, path) -> CorrespondenceSet:
        return cls.loads(Path(path).read_text())


def _json_line(line: str, no: int) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorrespondenceFormatError(f"invalid JSON ({exc.msg})", line=no) from None
    if not isinstance(rec, dict):
        raise CorrespondenceFormatError("expected a JSON object", line=no)
    return rec


def make_correspondences(m: MeasureModel, cmap: CorruptedMap, n: int, return_mask: bool = False):
    """Sample ``n`` points from ``m`` and pair each with its corrupted image."""
    if m.d != cmap.d:
        raise DimensionError(f"measure lives in R^{m.d} but the map in R^{cmap.d}")
    if n == 0:
        cs = CorrespondenceSet(np.empty((0, m.d)), np.empty((0, m.d)))
        return (cs, np.zeros(0, dtype=bool)) if return_mask else cs
    X = sample(m, n)
    Y, mask = apply_corrupted(cmap, X, return_mask=True)
    cs = CorrespondenceSet(X, Y)
    return (cs, mask) if return_mask else cs
