"""Catalog of closed convex sets with metric projections in l^p.

Supported (set, p) combinations for exact projection:

* ``Box``       -- any 1 < p < inf (the l^p distance is separable, so the
  coordinatewise clamp is the nearest point);
* ``Ball``, ``Halfspace``, ``Simplex`` -- p = 2 only.

Anything else raises :class:`UnsupportedCombination` instead of quietly
returning a Euclidean projection, because a wrong projection voids every
downstream contraction certificate.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .space import (
    GaugeFunction,
    SpaceMismatch,
    SpacePoint,
    gauge_duality_map,
    lp_norm,
    pairing,
)

MEMBERSHIP_TOL = 1e-10
CERTIFICATE_TOL = 1e-9
MAX_VERTICES = 2 ** 12


class UnsupportedCombination(ValueError):
    """No exact projection for this (set, p) pair; use a Box or p = 2."""


def _vec(values, name):
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


class ConvexSet:
    """Common interface of the catalog. Subclasses work on raw coordinate
    arrays; the module-level functions wrap them for :class:`SpacePoint`."""

    kind = "abstract"

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def supports(self, p: float) -> bool:
        return p == 2.0

    def contains_coords(self, x, p, tol=MEMBERSHIP_TOL) -> bool:
        raise NotImplementedError

    def project_coords(self, x, p):
        raise NotImplementedError

    def sample(self, rng, n, p=2.0):
        """``n`` members of the set as an (n, dim) array."""
        raise NotImplementedError

    def vertices(self):
        return None

    def linear_minimizer(self, f, p):
        """A minimizer of z -> <z, f> over the set, or None if unbounded
        or not available in closed form."""
        return None

    def _require(self, p):
        if not self.supports(p):
            raise UnsupportedCombination(
                f"no exact l^{p:g} projection onto {self.kind}; "
                "use a Box or switch to p = 2"
            )

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Box(ConvexSet):
    lo: np.ndarray
    hi: np.ndarray
    kind = "box"

    def __post_init__(self):
        lo, hi = _vec(self.lo, "lo"), _vec(self.hi, "hi")
        if lo.shape != hi.shape:
            raise ValueError("lo and hi must have the same length")
        if np.any(lo > hi):
            raise ValueError("Box needs lo <= hi coordinatewise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.shape[0]

    def supports(self, p):
        return 1.0 < p < np.inf

    def contains_coords(self, x, p, tol=MEMBERSHIP_TOL):
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def project_coords(self, x, p):
        self._require(p)
        return np.clip(x, self.lo, self.hi)

    def sample(self, rng, n, p=2.0):
        return self.lo + (self.hi - self.lo) * rng.random((n, self.dim))

    def vertices(self):
        if 2 ** self.dim > MAX_VERTICES:
            return None
        bits = (np.arange(2 ** self.dim)[:, None] >> np.arange(self.dim)) & 1
        return np.where(bits == 1, self.hi, self.lo)

    def linear_minimizer(self, f, p):
        return np.where(f > 0, self.lo, self.hi)

    def to_dict(self):
        return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True, eq=False)
class Ball(ConvexSet):
    """Closed ball of the ambient l^p norm."""

    center: np.ndarray
    radius: float
    kind = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center, "center"))
        r = float(self.radius)
        if not (r > 0 and np.isfinite(r)):
            raise ValueError("Ball radius must be positive and finite")
        object.__setattr__(self, "radius", r)

    @property
    def dim(self):
        return self.center.shape[0]

    def contains_coords(self, x, p, tol=MEMBERSHIP_TOL):
        return lp_norm(x - self.center, p) <= self.radius + tol

    def project_coords(self, x, p):
        self._require(p)
        d = x - self.center
        n = lp_norm(d, 2.0)
        if n <= self.radius:
            return np.array(x, dtype=float)
        return self.center + (self.radius / n) * d

    def sample(self, rng, n, p=2.0):
        # uniform in the l^p ball: generalized-Gaussian direction plus an
        # exponential slack variable
        g = rng.gamma(1.0 / p, 1.0, size=(n, self.dim)) ** (1.0 / p)
        g *= rng.choice([-1.0, 1.0], size=(n, self.dim))
        w = rng.exponential(1.0, size=n)
        denom = (np.sum(np.abs(g) ** p, axis=1) + w) ** (1.0 / p)
        return self.center + self.radius * g / denom[:, None]

    def linear_minimizer(self, f, p):
        q = p / (p - 1.0)
        nf = lp_norm(f, q)
        if nf == 0.0:
            return np.array(self.center, dtype=float)
        g = np.sign(f) * (np.abs(f) / nf) ** (q - 1.0)
        return self.center - self.radius * g

    def to_dict(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Halfspace(ConvexSet):
    """{x : <normal, x> <= offset}."""

    normal: np.ndarray
    offset: float
    kind = "halfspace"

    def __post_init__(self):
        a = _vec(self.normal, "normal")
        if not np.any(a != 0):
            raise ValueError("Halfspace normal must be nonzero")
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self):
        return self.normal.shape[0]

    def _violation(self, x):
        return (float(np.dot(self.normal, x)) - self.offset) / np.linalg.norm(self.normal)

    def contains_coords(self, x, p, tol=MEMBERSHIP_TOL):
        return self._violation(x) <= tol

    def project_coords(self, x, p):
        self._require(p)
        a = self.normal
        excess = float(np.dot(a, x)) - self.offset
        if excess <= 0:
            return np.array(x, dtype=float)
        return x - (excess / float(np.dot(a, a))) * a

    def sample(self, rng, n, p=2.0):
        a = self.normal
        foot = (self.offset / float(np.dot(a, a))) * a
        scale = max(1.0, float(np.linalg.norm(foot)))
        pts = foot + scale * rng.standard_normal((n, self.dim))
        excess = pts @ a - self.offset
        bad = excess > 0
        # reflect through the boundary hyperplane (norm free, stays affine)
        pts[bad] -= (2.0 * excess[bad] / float(np.dot(a, a)))[:, None] * a
        return pts

    def to_dict(self):
        return {"kind": "halfspace", "normal": self.normal.tolist(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Simplex(ConvexSet):
    """Probability simplex {x >= 0, sum x = 1} in R^dimension."""

    dimension: int
    kind = "simplex"

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError("Simplex dimension must be a positive integer")
        object.__setattr__(self, "dimension", int(self.dimension))

    @property
    def dim(self):
        return self.dimension

    def contains_coords(self, x, p, tol=MEMBERSHIP_TOL):
        return bool(np.all(x >= -tol) and abs(float(np.sum(x)) - 1.0) <= tol)

    def project_coords(self, x, p):
        self._require(p)
        return project_simplex(x)

    def sample(self, rng, n, p=2.0):
        return rng.dirichlet(np.ones(self.dim), size=n)

    def vertices(self):
        return np.eye(self.dim)

    def linear_minimizer(self, f, p):
        return np.eye(self.dim)[int(np.argmin(f))]

    def to_dict(self):
        return {"kind": "simplex", "dim": self.dimension}


def project_simplex(v, s=1.0):
    """Euclidean projection onto {w >= 0, sum w = s} by sorting.

    Sort decreasingly, find the last index where the running threshold
    keeps the entry positive, shift by that threshold and clip.
    O(n log n).
    """
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - s
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def set_from_dict(d: dict) -> ConvexSet:
    kind = d.get("kind")
    if kind == "box":
        return Box(d["lo"], d["hi"])
    if kind == "ball":
        return Ball(d["center"], d["radius"])
    if kind == "halfspace":
        return Halfspace(d["normal"], d["offset"])
    if kind == "simplex":
        return Simplex(d["dim"])
    raise ValueError(f"unknown set kind {kind!r}")


# ------------------------------------------------------------ public API

@dataclass(frozen=True)
class ProjectionResult:
    point: SpacePoint
    distance: float
    method: str = "closed-form"


def _check_dim(C, x):
    if C.dim != x.dim:
        raise SpaceMismatch(f"set of dim {C.dim} vs point of dim {x.dim}")


def contains(C: ConvexSet, x: SpacePoint, tol: float = MEMBERSHIP_TOL) -> bool:
    _check_dim(C, x)
    return C.contains_coords(x.coords, x.p, tol)


def metric_projection(x: SpacePoint, C: ConvexSet) -> ProjectionResult:
    """Nearest point of ``C`` to ``x`` in the l^p norm of ``x``'s space."""
    _check_dim(C, x)
    y = C.project_coords(x.coords, x.p)
    return ProjectionResult(x.like(y), lp_norm(x.coords - y, x.p))


def distance(x: SpacePoint, C: ConvexSet) -> float:
    return metric_projection(x, C).distance


def _candidate_members(C, p, n_samples, rng):
    parts = []
    verts = C.vertices()
    if verts is not None:
        parts.append(verts)
    if n_samples > 0:
        parts.append(C.sample(rng, n_samples, p))
    return np.vstack(parts)


@dataclass(frozen=True)
class CertificateReport:
    passed: bool
    min_margin: float
    witness: Optional[np.ndarray]
    n_evaluated: int


def best_approx_certificate(
    x: SpacePoint,
    y: SpacePoint,
    C: ConvexSet,
    g: Optional[GaugeFunction] = None,
    n_samples: int = 256,
    seed: int = 0,
    tol: float = CERTIFICATE_TOL,
) -> CertificateReport:
    """Sampled check of the variational characterization of best
    approximations in a smooth space:

        <y - z, J_mu(x - y)> >= 0  for all z in C.

    ``z`` ranges over the box/simplex vertices (when at most 2**12), the
    linear minimizer of the margin when the set has one in closed form,
    and ``n_samples`` uniform members. Passing is evidence, failing with a
    witness is proof that ``y`` is not the nearest point.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    _check_dim(C, x)
    x._check(y)
    if not contains(C, y):
        raise ValueError("y is not a member of C")
    g = g or GaugeFunction.identity()
    j = gauge_duality_map(x - y, g)
    rng = np.random.default_rng(seed)
    Z = _candidate_members(C, x.p, n_samples, rng)
    extra = C.linear_minimizer(-j.coords, x.p)
    if extra is not None:
        Z = np.vstack([Z, extra])
    margins = (y.coords[None, :] - Z) @ j.coords
    i = int(np.argmin(margins))
    m = float(margins[i])
    return CertificateReport(m >= -tol, m, Z[i] if m < -tol else None, Z.shape[0])


# -------------------------------------------------- numeric nearest point

def numeric_nearest(x, C: ConvexSet, p: float, start) -> np.ndarray:
    """Minimize y -> ||x - y||_p over ``C`` with a general-purpose solver.

    Used as an oracle, so it never calls the closed-form projection. For
    a Box, L-BFGS-B finds the active bounds and a projected Newton polish
    finishes the job: for p > 2 the objective is flat to third order along
    free coordinates, so any stopping rule based on function values stalls
    near 1e-5 while the gradient keeps full absolute precision.
    """
    x = np.asarray(x, dtype=float)

    def f(y):
        r = np.abs(x - y)
        return float(np.sum(r ** p))

    def grad(y):
        d = x - y
        return -p * np.sign(d) * np.abs(d) ** (p - 1.0)

    if isinstance(C, Box):
        res = optimize.minimize(
            f, start, jac=grad, method="L-BFGS-B",
            bounds=list(zip(C.lo, C.hi)),
            options={"gtol": 1e-15, "ftol": 0.0, "maxiter": 20000, "maxcor": 30},
        )
        return _projected_newton(res.x, grad, lambda y: p * (p - 1.0) * np.abs(x - y) ** (p - 2.0),
                                 C.lo, C.hi)
    if not C.supports(p):
        raise UnsupportedCombination(f"numeric probe for {C.kind} only at p = 2")
    cons, bounds = [], None
    if isinstance(C, Ball):
        c, r = C.center, C.radius
        cons.append({"type": "ineq", "fun": lambda y: r * r - np.sum((y - c) ** 2),
                     "jac": lambda y: -2.0 * (y - c)})
    elif isinstance(C, Halfspace):
        a, b = C.normal, C.offset
        cons.append({"type": "ineq", "fun": lambda y: b - np.dot(a, y),
                     "jac": lambda y: -a})
    elif isinstance(C, Simplex):
        cons.append({"type": "eq", "fun": lambda y: np.sum(y) - 1.0,
                     "jac": lambda y: np.ones_like(y)})
        bounds = [(0.0, None)] * C.dim
    res = optimize.minimize(f, start, jac=grad, method="SLSQP", bounds=bounds,
                            constraints=cons, options={"ftol": 1e-16, "maxiter": 1000})
    return res.x


def _projected_newton(y, grad, hess_diag, lo, hi, max_iter=500, xtol=1e-16):
    y = np.clip(np.array(y, dtype=float), lo, hi)
    for _ in range(max_iter):
        g = grad(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            h = hess_diag(y)
            step = np.where(np.isfinite(h) & (h > 0), g / h, 0.0)
        blocked = ((y <= lo) & (g > 0)) | ((y >= hi) & (g < 0))
        step[blocked] = 0.0
        y_new = np.clip(y - step, lo, hi)
        moved = np.max(np.abs(y_new - y)) if y.size else 0.0
        y = y_new
        if moved <= xtol:
            break
    return y


@dataclass(frozen=True)
class ChebyshevReport:
    max_spread: float
    trials: int
    restarts: int
    consistent: bool


def _external_point(C, p, rng, tries=100):
    for _ in range(tries):
        base = C.sample(rng, 1, p)[0]
        x = base + 2.0 * rng.standard_normal(C.dim)
        if not C.contains_coords(x, p):
            return x
    raise RuntimeError("could not draw a point outside the set")


def chebyshev_probe(C: ConvexSet, p: float, trials: int = 20, seed: int = 0,
                    restarts: int = 4, threshold: float = 1e-6) -> ChebyshevReport:
    """Sampling evidence that nearest points in ``C`` are unique.

    For each of ``trials`` random external points the numeric minimizer is
    restarted from ``restarts`` random members and the largest l^p distance
    between the minimizers found is recorded. This is evidence, not proof.
    """
    if not C.supports(p):
        raise UnsupportedCombination(f"{C.kind} at p = {p:g} is outside the catalog")
    rng = np.random.default_rng(seed)
    spread = 0.0
    for _ in range(trials):
        x = _external_point(C, p, rng)
        starts = C.sample(rng, restarts, p)
        sols = np.array([numeric_nearest(x, C, p, s) for s in starts])
        for i in range(len(sols)):
            for k in range(i + 1, len(sols)):
                spread = max(spread, lp_norm(sols[i] - sols[k], p))
    return ChebyshevReport(spread, trials, restarts, spread <= threshold)
