"""The value type ``H(x) = Qx + b`` with ``Q`` in the orthogonal group O(d)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import jsonio
from .errors import DimensionError
from .geometry import MAX_DIM, as_point, as_points

ORTHO_TOL = 1e-9
EQUAL_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EuclideanIsometry:
    """Orthogonal map followed by a translation.

    Reflections are allowed: only ``Q.T @ Q = I`` is required, not
    ``det Q = +1``. The constructor checks shapes and finiteness but not
    orthogonality; use :meth:`is_valid` for that, since near-orthogonal
    matrices are legitimately produced by floating-point pipelines.
    """

    Q: np.ndarray
    b: np.ndarray
    _d: int = field(init=False, repr=False)

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] == 0:
            raise DimensionError(f"Q must be square, got shape {Q.shape}")
        if Q.shape[0] > MAX_DIM:
            raise DimensionError(f"dimension {Q.shape[0]} exceeds the supported maximum {MAX_DIM}")
        if not np.all(np.isfinite(Q)):
            raise ValueError("Q has non-finite entries")
        b = as_point(self.b, Q.shape[0])
        object.__setattr__(self, "Q", _frozen(Q))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "_d", Q.shape[0])

    @property
    def d(self) -> int:
        return self._d

    @classmethod
    def identity(cls, d: int) -> EuclideanIsometry:
        return cls(np.eye(d), np.zeros(d))

    @classmethod
    def translation(cls, t) -> EuclideanIsometry:
        t = as_point(t)
        return cls(np.eye(t.size), t)

    @classmethod
    def from_anchored(cls, Q, a0, fa0) -> EuclideanIsometry:
        """Build from the anchored form ``x -> Q(x - a0) + f(a0)``."""
        Q = np.asarray(Q, dtype=np.float64)
        return cls(Q, as_point(fa0) - Q @ as_point(a0))

    def apply(self, x) -> np.ndarray:
        """Map a point ``(d,)`` or a batch of points ``(n, d)``."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return self.Q @ as_point(x, self.d) + self.b
        X = as_points(x, self.d)
        return X @ self.Q.T + self.b

    __call__ = apply

    def compose(self, inner: EuclideanIsometry) -> EuclideanIsometry:
        """``self ∘ inner``: first ``inner``, then ``self``."""
        if inner.d != self.d:
            raise DimensionError(f"cannot compose dimension {self.d} with {inner.d}")
        return EuclideanIsometry(self.Q @ inner.Q, self.Q @ inner.b + self.b)

    def inverse(self) -> EuclideanIsometry:
        Qt = self.Q.T
        return EuclideanIsometry(Qt, -(Qt @ self.b))

    def orthogonality_defect(self) -> float:
        return float(np.linalg.norm(self.Q.T @ self.Q - np.eye(self.d), "fro"))

    def is_valid(self, tol: float = ORTHO_TOL) -> tuple[bool, dict]:
        """Check ``||Q^T Q - I||_F <= tol``.

        Returns the verdict and a diagnostics dict with the Frobenius
        ``defect`` and ``det`` of ``Q``.
        """
        if not tol > 0:
            raise ValueError(f"tol must be positive, got {tol}")
        defect = self.orthogonality_defect()
        info = {"defect": defect, "det": float(np.linalg.det(self.Q))}
        return defect <= tol, info

    def isclose(self, other: EuclideanIsometry, tol: float = EQUAL_TOL) -> bool:
        if other.d != self.d:
            return False
        dq = np.linalg.norm(self.Q - other.Q, "fro")
        db = np.linalg.norm(self.b - other.b)
        return bool(dq <= tol and db <= tol * (1.0 + np.linalg.norm(self.b)))

    def to_dict(self) -> dict:
        return {"d": self.d, "Q": self.Q.ravel().tolist(), "b": self.b.tolist()}

    def to_json(self, indent: int | None = None) -> str:
        return jsonio.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, obj: dict) -> EuclideanIsometry:
        try:
            d = int(obj["d"])
            Q = np.asarray(obj["Q"], dtype=np.float64)
            b = np.asarray(obj["b"], dtype=np.float64)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed isometry object: {exc}") from None
        if d < 1 or Q.shape != (d * d,) or b.shape != (d,):
            raise ValueError(f"isometry object has inconsistent sizes for d={d}")
        return cls(Q.reshape(d, d), b)

    @classmethod
    def from_json(cls, text: str) -> EuclideanIsometry:
        return cls.from_dict(json.loads(text))


def apply(H: EuclideanIsometry, x) -> np.ndarray:
    return H.apply(x)


def compose(H2: EuclideanIsometry, H1: EuclideanIsometry) -> EuclideanIsometry:
    """Isometry with ``compose(H2, H1)(x) == H2(H1(x))``."""
    return H2.compose(H1)


def inverse(H: EuclideanIsometry) -> EuclideanIsometry:
    return H.inverse()


def is_valid(H: EuclideanIsometry, tol: float = ORTHO_TOL) -> tuple[bool, dict]:
    return H.is_valid(tol)


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed element of O(d) (QR of a Gaussian matrix, sign-fixed)."""
    A = rng.standard_normal((d, d))
    Q, R = np.linalg.qr(A)
    return Q * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))


def random_isometry(d: int, rng: np.random.Generator, translation_scale: float = 1.0) -> EuclideanIsometry:
    return EuclideanIsometry(random_orthogonal(d, rng), translation_scale * rng.standard_normal(d))
