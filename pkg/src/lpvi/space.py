"""Finite-dimensional l^p spaces: points, dual functionals, norms, the
pairing, and the normalized / gauge duality mappings.

For 1 < p < inf the space is smooth and uniformly convex, so the
normalized duality mapping is single valued with the closed form

    J(x)_i = ||x||_p^(2-p) * sign(x_i) * |x_i|^(p-1)

which lands in l^q, 1/p + 1/q = 1.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels

#: relative tolerance for identity checks (pairing, norms)
RTOL = 1e-9


class SpaceMismatch(ValueError):
    """Operands live in different spaces (dimension or exponent)."""


def conjugate_exponent(p: float) -> float:
    return p / (p - 1.0)


def _as_coords(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("coordinates must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SpacePoint:
    """A vector of l^p(R^n). Immutable; arithmetic returns new points."""

    coords: np.ndarray
    p: float

    def __post_init__(self):
        object.__setattr__(self, "coords", _as_coords(self.coords))
        p = float(self.p)
        if not (1.0 < p < np.inf):
            raise ValueError(f"exponent p must satisfy 1 < p < inf, got {self.p!r}")
        object.__setattr__(self, "p", p)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    @property
    def q(self) -> float:
        return conjugate_exponent(self.p)

    def like(self, coords) -> "SpacePoint":
        return SpacePoint(coords, self.p)

    def _check(self, other: "SpacePoint"):
        if not isinstance(other, SpacePoint):
            raise TypeError(f"expected SpacePoint, got {type(other).__name__}")
        if other.dim != self.dim or other.p != self.p:
            raise SpaceMismatch(
                f"l^{self.p} of dim {self.dim} vs l^{other.p} of dim {other.dim}"
            )

    def __add__(self, other):
        self._check(other)
        return self.like(self.coords + other.coords)

    def __sub__(self, other):
        self._check(other)
        return self.like(self.coords - other.coords)

    def __neg__(self):
        return self.like(-self.coords)

    def __mul__(self, scalar):
        return self.like(float(scalar) * self.coords)

    __rmul__ = __mul__

    def __eq__(self, other):
        return (
            isinstance(other, SpacePoint)
            and other.p == self.p
            and np.array_equal(other.coords, self.coords)
        )

    def __hash__(self):
        return hash((self.p, self.coords.tobytes()))

    def __repr__(self):
        return f"SpacePoint({self.coords.tolist()}, p={self.p:g})"


@dataclass(frozen=True, eq=False)
class DualFunctional:
    """A functional on l^p, stored by its coordinates in l^q."""

    coords: np.ndarray
    q: float

    def __post_init__(self):
        object.__setattr__(self, "coords", _as_coords(self.coords))
        q = float(self.q)
        if not (1.0 < q < np.inf):
            raise ValueError(f"dual exponent q must satisfy 1 < q < inf, got {self.q!r}")
        object.__setattr__(self, "q", q)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def __add__(self, other):
        if not isinstance(other, DualFunctional) or other.q != self.q or other.dim != self.dim:
            raise SpaceMismatch("dual functionals from different spaces")
        return DualFunctional(self.coords + other.coords, self.q)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, scalar):
        return DualFunctional(float(scalar) * self.coords, self.q)

    __rmul__ = __mul__

    def __repr__(self):
        return f"DualFunctional({self.coords.tolist()}, q={self.q:g})"


def lp_norm(coords, p: float) -> float:
    """Overflow-safe l^p norm of a raw coordinate array."""
    arr = np.asarray(coords, dtype=float).reshape(1, -1)
    return float(_kernels.norm_rows(arr, float(p))[0])


def p_norm(x: SpacePoint) -> float:
    return lp_norm(x.coords, x.p)


def dual_norm(f: DualFunctional) -> float:
    return lp_norm(f.coords, f.q)


def pairing(x: SpacePoint, f: DualFunctional) -> float:
    """Evaluate the functional ``f`` at ``x``: sum_i x_i f_i."""
    if x.dim != f.dim:
        raise SpaceMismatch(f"dimension {x.dim} vs {f.dim}")
    if not np.isclose(f.q, x.q, rtol=1e-12, atol=0.0):
        raise SpaceMismatch(f"functional in l^{f.q} is not dual to l^{x.p}")
    return float(np.dot(x.coords, f.coords))


def normalized_duality_map(x: SpacePoint) -> DualFunctional:
    """The unique f with <x, f> = ||x||^2 = ||f||_*^2 (smooth space)."""
    row = _kernels.duality_rows(np.ascontiguousarray(x.coords, dtype=float).reshape(1, -1), x.p)
    return DualFunctional(row[0], x.q)


@dataclass(frozen=True)
class GaugeFunction:
    """A gauge mu: [0, inf) -> [0, inf), continuous, strictly increasing,
    mu(0) = 0 and mu(t) -> inf.

    Build with :meth:`identity`, :meth:`power` or :meth:`from_callable`.
    """

    kind: str
    exponent: float = 1.0
    fn: Optional[Callable[[float], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("identity", "power", "oracle"):
            raise ValueError(f"unknown gauge kind {self.kind!r}")
        if self.kind == "power" and not self.exponent > 0:
            raise ValueError("power gauge needs a positive exponent")
        if self.kind == "oracle" and self.fn is None:
            raise ValueError("oracle gauge needs a callable")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def power(cls, a: float):
        return cls("power", float(a))

    @classmethod
    def from_callable(cls, fn, check: bool = True):
        g = cls("oracle", fn=fn)
        if check:
            ok, reason = g.sampled_validity()
            if not ok:
                raise ValueError(f"not a gauge function: {reason}")
        return g

    def __call__(self, t: float) -> float:
        if self.kind == "identity":
            return float(t)
        if self.kind == "power":
            return float(t) ** self.exponent
        return float(self.fn(float(t)))

    def sampled_validity(self, n: int = 64):
        """Sampling check of the gauge axioms on a log grid. Evidence only:
        monotonicity of a black box cannot be decided from finitely many
        values."""
        if self(0.0) != 0.0:
            return False, "mu(0) != 0"
        ts = np.logspace(-6, 6, n)
        vals = np.array([self(t) for t in ts])
        if not np.all(np.isfinite(vals)):
            return False, "non-finite value on the sample grid"
        if np.any(vals <= 0) or np.any(np.diff(vals) <= 0):
            return False, "not strictly increasing on the sample grid"
        if not vals[-1] > 10.0 * vals[n // 2]:
            return False, "no sign of divergence as t grows"
        return True, "ok"


def gauge_duality_map(x: SpacePoint, g: GaugeFunction) -> DualFunctional:
    """Duality mapping with gauge ``g``: (mu(||x||)/||x||) J(x), 0 at 0."""
    if g.kind == "identity":
        return normalized_duality_map(x)
    n = p_norm(x)
    if n == 0.0:
        return DualFunctional(np.zeros(x.dim), x.q)
    return (g(n) / n) * normalized_duality_map(x)


def duality_identity_defects(x: SpacePoint, g: Optional[GaugeFunction] = None):
    """Return the two defects of the duality-map defining identities,
    each already divided by its tolerance scale.

    For the normalized map these are |<x,Jx> - ||x||^2| / max(1, ||x||^2)
    and | ||Jx|| - ||x|| | / max(1, ||x||^2); for a gauge map the targets
    become ||x|| mu(||x||) and mu(||x||).
    """
    n = p_norm(x)
    if g is None or g.kind == "identity":
        f = normalized_duality_map(x)
        target_pair, target_norm = n * n, n
    else:
        f = gauge_duality_map(x, g)
        m = g(n)
        target_pair, target_norm = n * m, m
    scale = max(1.0, abs(target_pair))
    return (
        abs(pairing(x, f) - target_pair) / scale,
        abs(dual_norm(f) - target_norm) / scale,
    )


def duality_defects_rows(X, p: float, g: Optional[GaugeFunction] = None):
    """Row-wise version of :func:`duality_identity_defects` for an (n, d)
    array of coordinates, through the compiled kernels."""
    X = np.ascontiguousarray(X, dtype=float)
    q = conjugate_exponent(p)
    n = _kernels.norm_rows(X, p)
    J = _kernels.duality_rows(X, p)
    if g is None or g.kind == "identity":
        target_pair, target_norm = n * n, n
    else:
        m = np.array([g(t) for t in n])
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(n > 0, m / np.where(n > 0, n, 1.0), 0.0)
        J = ratio[:, None] * J
        target_pair, target_norm = n * m, m
    scale = np.maximum(1.0, np.abs(target_pair))
    pair = np.sum(X * J, axis=1)
    return (np.abs(pair - target_pair) / scale,
            np.abs(_kernels.norm_rows(np.ascontiguousarray(J), q) - target_norm) / scale)
