"""Mappings B: C -> E, sampled estimates of their constants, and the
feasibility analysis of a declared (u, v, mu) triple.

All estimators draw pairs (x, y) from the domain in fixed-size blocks,
each block seeded from ``(seed, block_index)``, so the first ``n`` pairs
never depend on the total requested. Three pair kinds rotate through the
stream: ``y = x + s (z - x)`` with ``z`` a uniform member and
``s in {1e-3, 1e-1, 1}``; convexity keeps ``y`` in the domain and the
small scales catch local spikes of the difference quotients.
"""
import importlib
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .sets import ConvexSet, Box
from .space import SpaceMismatch, SpacePoint

DEFAULT_SAMPLES = 4096
DEFAULT_TOL = 1e-9
PERTURBATION_SCALES = (1e-3, 1e-1, 1.0)
_BLOCK = 256


class Mapping:
    """Base class of the mapping catalog."""

    kind = "abstract"

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.apply_rows(np.asarray(x, dtype=float)[None, :])[0]

    def apply_rows(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def as_affine(self, dim: int):
        """``(A, b)`` with B(x) = A x + b, or None when B is not affine."""
        return None

    def check_dim(self, dim: int):
        pass

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Affine(Mapping):
    A: np.ndarray
    b: np.ndarray
    kind = "affine"

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("Affine matrix must be square")
        if A.shape[0] != b.shape[0]:
            raise ValueError("Affine matrix and offset disagree in dimension")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("Affine coefficients must be finite")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def constant(cls, value):
        value = np.asarray(value, dtype=float).reshape(-1)
        return cls(np.zeros((value.size, value.size)), value)

    def apply_rows(self, X):
        return X @ self.A.T + self.b

    def as_affine(self, dim):
        self.check_dim(dim)
        return self.A, self.b

    def check_dim(self, dim):
        if self.b.shape[0] != dim:
            raise SpaceMismatch(f"Affine mapping of dim {self.b.shape[0]} used in dim {dim}")

    def to_dict(self):
        return {"kind": "affine", "A": self.A.tolist(), "b": self.b.tolist()}


@dataclass(frozen=True)
class ScaledIdentity(Mapping):
    scale: float
    kind = "scaled_identity"

    def apply_rows(self, X):
        return self.scale * X

    def as_affine(self, dim):
        return self.scale * np.eye(dim), np.zeros(dim)

    def to_dict(self):
        return {"kind": "scaled_identity", "scale": self.scale}


@dataclass(frozen=True)
class ResidualOfContraction(Mapping):
    """B = I - T for an inner mapping T claimed to be an
    ``declared_alpha``-contraction."""

    inner: Mapping
    declared_alpha: float = 0.0
    kind = "residual"

    def __post_init__(self):
        if not 0.0 <= self.declared_alpha < 1.0:
            raise ValueError("declared_alpha must lie in [0, 1)")

    def apply_rows(self, X):
        return X - self.inner.apply_rows(X)

    def as_affine(self, dim):
        inner = self.inner.as_affine(dim)
        if inner is None:
            return None
        A, b = inner
        return np.eye(dim) - A, -b

    def check_dim(self, dim):
        self.inner.check_dim(dim)

    def to_dict(self):
        return {"kind": "residual", "inner": self.inner.to_dict(), "alpha": self.declared_alpha}


@dataclass(frozen=True)
class Oracle(Mapping):
    """Black-box mapping. ``target`` is an optional ``module:function``
    import path used for serialization."""

    fn: Callable[[np.ndarray], np.ndarray]
    target: Optional[str] = None
    kind = "oracle"

    @classmethod
    def from_target(cls, target: str):
        mod, _, name = target.partition(":")
        if not name:
            raise ValueError(f"oracle target must look like 'module:function', got {target!r}")
        fn = getattr(importlib.import_module(mod), name)
        return cls(fn, target)

    def apply_rows(self, X):
        out = np.array([np.asarray(self.fn(row.copy()), dtype=float).reshape(-1) for row in X])
        if out.shape != X.shape:
            raise ValueError("oracle returned a vector of the wrong shape")
        return out

    def to_dict(self):
        if self.target is None:
            raise ValueError("an oracle built from a bare callable cannot be serialized")
        return {"kind": "oracle", "target": self.target}


def mapping_from_dict(d: dict) -> Mapping:
    kind = d.get("kind")
    if kind == "affine":
        return Affine(d["A"], d["b"])
    if kind == "constant":
        return Affine.constant(d["value"])
    if kind == "scaled_identity":
        return ScaledIdentity(float(d["scale"]))
    if kind == "residual":
        return ResidualOfContraction(mapping_from_dict(d["inner"]), float(d.get("alpha", 0.0)))
    if kind == "oracle":
        return Oracle.from_target(d["target"])
    raise ValueError(f"unknown mapping kind {kind!r}")


def evaluate(B: Mapping, x: SpacePoint) -> SpacePoint:
    B.check_dim(x.dim)
    return x.like(B.apply(x.coords))


# ------------------------------------------------------------ pair stream

def sample_pairs(domain: ConvexSet, p: float, n: int, seed: int):
    """First ``n`` pairs of the seeded, prefix-stable pair stream."""
    if n < 2:
        raise ValueError("need at least 2 sample pairs")
    if isinstance(domain, Box) and np.all(domain.lo == domain.hi):
        raise ValueError("degenerate domain: the box is a single point")
    Xs, Ys = [], []
    for block in range(-(-n // _BLOCK)):
        rng = np.random.default_rng([seed, block])
        X = domain.sample(rng, _BLOCK, p)
        Z = domain.sample(rng, _BLOCK, p)
        idx = np.arange(block * _BLOCK, (block + 1) * _BLOCK)
        s = np.asarray(PERTURBATION_SCALES)[idx % len(PERTURBATION_SCALES)]
        Xs.append(X)
        Ys.append(X + s[:, None] * (Z - X))
    return np.vstack(Xs)[:n], np.vstack(Ys)[:n]


@dataclass
class _PairStats:
    X: np.ndarray
    Y: np.ndarray
    dx: np.ndarray        # ||x - y||
    dB: np.ndarray        # ||Bx - By||
    pair: np.ndarray      # <Bx - By, J(x - y)>


def _pair_stats(B: Mapping, domain: ConvexSet, p: float, n: int, seed: int) -> _PairStats:
    B.check_dim(domain.dim)
    X, Y = sample_pairs(domain, p, n, seed)
    D = X - Y
    E = B.apply_rows(X) - B.apply_rows(Y)
    dx = _kernels.norm_rows(np.ascontiguousarray(D), p)
    keep = dx > 0
    if not np.any(keep):
        raise ValueError("degenerate domain: every sampled pair coincides")
    D, E, X, Y, dx = D[keep], E[keep], X[keep], Y[keep], dx[keep]
    E = np.ascontiguousarray(E)
    dB = _kernels.norm_rows(E, p)
    JD = _kernels.duality_rows(np.ascontiguousarray(D), p)
    return _PairStats(X, Y, dx, dB, np.sum(E * JD, axis=1))


def estimate_lipschitz(B: Mapping, domain: ConvexSet, p: float,
                       n: int = DEFAULT_SAMPLES, seed: int = 0) -> float:
    """Largest sampled ||Bx - By|| / ||x - y||; a lower bound on the
    Lipschitz constant of B on the domain."""
    st = _pair_stats(B, domain, p, n, seed)
    return float(np.max(st.dB / st.dx))


def estimate_strong_monotonicity(B: Mapping, domain: ConvexSet, p: float,
                                 n: int = DEFAULT_SAMPLES, seed: int = 0) -> float:
    """Smallest sampled <Bx - By, J(x - y)> / ||x - y||^2.

    The true modulus is the infimum of this quotient, so the estimate is an
    upper bound on every admissible v.
    """
    st = _pair_stats(B, domain, p, n, seed)
    return float(np.min(st.pair / st.dx ** 2))


@dataclass(frozen=True)
class CocoerciveReport:
    passed: bool
    worst_margin: float
    witness: Optional[tuple]
    n_pairs: int


def certify_cocoercive(B: Mapping, u: float, v: float, domain: ConvexSet, p: float,
                       n: int = DEFAULT_SAMPLES, seed: int = 0,
                       tol: float = DEFAULT_TOL) -> CocoerciveReport:
    """Sampled check of relaxed (u, v)-cocoercivity

        <Bx - By, J(x - y)> >= -u ||Bx - By||^2 + v ||x - y||^2.

    The margin of a pair is (lhs - rhs) / ||x - y||^2. The worst margin
    is reported, and the offending pair when it is below ``-tol``.
    """
    if not (u > 0 and v > 0):
        raise ValueError("u and v must be positive")
    st = _pair_stats(B, domain, p, n, seed)
    margins = (st.pair + u * st.dB ** 2) / st.dx ** 2 - v
    i = int(np.argmin(margins))
    worst = float(margins[i])
    witness = (st.X[i].copy(), st.Y[i].copy()) if worst < -tol else None
    return CocoerciveReport(worst >= -tol, worst, witness, margins.size)


def max_certified_v(B: Mapping, u: float, domain: ConvexSet, p: float,
                    n: int = DEFAULT_SAMPLES, seed: int = 0,
                    tol: float = DEFAULT_TOL) -> float:
    """Largest v for which :func:`certify_cocoercive` passes on the same
    sample, given u."""
    st = _pair_stats(B, domain, p, n, seed)
    return float(np.min((st.pair + u * st.dB ** 2) / st.dx ** 2)) + tol


def operator_norm_2(A, iters: int = 1000, rtol: float = 1e-15, seed: int = 0) -> float:
    """Spectral norm of A by power iteration on A^T A."""
    A = np.asarray(A, dtype=float)
    if not np.any(A):
        return 0.0
    x = np.random.default_rng(seed).standard_normal(A.shape[1])
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(iters):
        y = A.T @ (A @ x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        new = np.sqrt(ny)
        if abs(new - sigma) <= rtol * new:
            sigma = new
            break
        sigma = new
    return float(np.linalg.norm(A @ x))


@dataclass(frozen=True)
class ConstantsEstimate:
    lipschitz_hat: float
    strong_monotone_hat: float
    cocoercive_margin: Optional[float]
    sample_count: int
    seed: int
    lipschitz_exact: Optional[float] = None


def estimate_constants(B: Mapping, domain: ConvexSet, p: float, n: int = DEFAULT_SAMPLES,
                       seed: int = 0, u: Optional[float] = None,
                       v: Optional[float] = None) -> ConstantsEstimate:
    st = _pair_stats(B, domain, p, n, seed)
    margin = None
    if u is not None and v is not None:
        margin = float(np.min((st.pair + u * st.dB ** 2) / st.dx ** 2 - v))
    exact = None
    if p == 2.0:
        aff = B.as_affine(domain.dim)
        if aff is not None:
            exact = operator_norm_2(aff[0])
    return ConstantsEstimate(
        lipschitz_hat=float(np.max(st.dB / st.dx)),
        strong_monotone_hat=float(np.min(st.pair / st.dx ** 2)),
        cocoercive_margin=margin,
        sample_count=int(st.dx.size),
        seed=seed,
        lipschitz_exact=exact,
    )


def project_rows(C: ConvexSet, X: np.ndarray, p: float) -> np.ndarray:
    if isinstance(C, Box):
        C._require(p)
        return np.clip(X, C.lo, C.hi)
    return np.array([C.project_coords(row, p) for row in X])


@dataclass(frozen=True)
class NonexpansiveReport:
    passed: bool
    worst_slack: float
    witness: Optional[tuple]
    n_pairs: int


def check_pc_nonexpansive(B: Mapping, C: ConvexSet, lam: float, p: float,
                          n: int = DEFAULT_SAMPLES, seed: int = 0,
                          tol: float = DEFAULT_TOL) -> NonexpansiveReport:
    """Sampled check that G = I - lam B satisfies
    ||P_C Gx - P_C Gy|| <= ||Gx - Gy|| on pairs from C.

    ``worst_slack`` is the largest ||P_C Gx - P_C Gy|| - ||Gx - Gy||;
    nonpositive means no violation was seen.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    B.check_dim(C.dim)
    X, Y = sample_pairs(C, p, n, seed)
    GX = X - lam * B.apply_rows(X)
    GY = Y - lam * B.apply_rows(Y)
    before = _kernels.norm_rows(np.ascontiguousarray(GX - GY), p)
    after = _kernels.norm_rows(
        np.ascontiguousarray(project_rows(C, GX, p) - project_rows(C, GY, p)), p)
    slack = after - before
    i = int(np.argmax(slack))
    worst = float(slack[i])
    ok = worst <= tol * max(1.0, float(before[i]))
    return NonexpansiveReport(ok, worst, None if ok else (X[i].copy(), Y[i].copy()), slack.size)


@dataclass(frozen=True)
class FeasibilityVerdict:
    """Necessary-condition analysis of a declared (u, v, mu).

    For any pair with t = ||Bx - By|| / ||x - y||, cocoercivity plus
    <Bx - By, J(x - y)> <= ||Bx - By|| ||x - y|| force u t^2 + t >= v, i.e.
    t >= t_min, while mu-Lipschitz forces t <= t_max = mu.
    """

    feasible: bool
    t_min: float
    t_max: float
    max_admissible_v: float
    u: float
    v: float
    mu: float
    hypothesis_holds: bool        # v > u mu^2 + 5 mu
    hypothesis_compatible: bool   # hypothesis and necessary condition together

    def summary(self) -> str:
        state = "feasible" if self.feasible else "infeasible"
        return (f"{state}, max admissible v = {self.max_admissible_v:.12g} "
                f"(t_min = {self.t_min:.12g}, t_max = {self.t_max:.12g})")


def feasibility_analysis(u: float, v: float, mu: float) -> FeasibilityVerdict:
    if not (u > 0 and v > 0 and mu > 0):
        raise ValueError("u, v and mu must all be positive")
    # (sqrt(1 + 4uv) - 1) / (2u) without the cancellation
    t_min = 2.0 * v / (np.sqrt(1.0 + 4.0 * u * v) + 1.0)
    max_v = mu + u * mu * mu
    feasible = v <= max_v
    hyp = v > u * mu * mu + 5.0 * mu
    return FeasibilityVerdict(
        feasible=bool(feasible),
        t_min=float(t_min),
        t_max=float(mu),
        max_admissible_v=float(max_v),
        u=u, v=v, mu=mu,
        hypothesis_holds=bool(hyp),
        hypothesis_compatible=bool(hyp and feasible),
    )
