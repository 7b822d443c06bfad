"""Projected fixed-point solver for VI(C, B) in l^p.

In a smooth space with a Chebyshev set C, u solves the variational
inequality  <J(Bu), z - u> >= 0 for all z in C  exactly when
u = P_C(u - lam B u) for some (any) lam > 0. For a relaxed
(u, v)-cocoercive, mu-Lipschitz B with v > u mu^2 + 5 mu, and lam inside

    0 < lam < c,   lam mu^2 (c - lam) < 1,   c = (v - u mu^2 - 5 mu) / mu^2,

the map P_C(I - lam B) contracts with factor q = sqrt(1 - lam mu^2 (c - lam)),
which gives both the stopping rule and an a-priori error bound.
"""
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import _kernels
from .mappings import FeasibilityVerdict, Mapping, feasibility_analysis
from .sets import MEMBERSHIP_TOL, Box, ConvexSet, contains, metric_projection
from .space import SpacePoint, lp_norm, normalized_duality_map, pairing

DEFAULT_SAFETY_EPS = 1e-6
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10 ** 6


class HypothesisViolated(ValueError):
    """Declared constants do not satisfy v > u mu^2 + 5 mu. Run in empirical
    mode instead; the feasibility verdict is attached."""

    def __init__(self, message, verdict: Optional[FeasibilityVerdict] = None):
        super().__init__(message)
        self.verdict = verdict


class NonFiniteIterate(ArithmeticError):
    pass


@dataclass(frozen=True)
class StepSizeWindow:
    c: float
    lambda_lo: float
    lambda_hi: float
    chosen_lambda: float
    certified_q: Optional[float]


def _excluded_interval(c, mu):
    """Roots of lam mu^2 (c - lam) = 1, or None when clause 2 never binds."""
    disc = c * c / 4.0 - 1.0 / (mu * mu)
    if disc <= 0:
        return None
    r = np.sqrt(disc)
    return c / 2.0 - r, c / 2.0 + r


def step_size_window(u: float, v: float, mu: float,
                     safety_eps: float = DEFAULT_SAFETY_EPS) -> StepSizeWindow:
    """Admissible step sizes and the auto-selected one.

    Picks lam = c/2, which maximizes lam (c - lam) and so minimizes q, when
    that keeps lam mu^2 (c - lam) <= 1 - safety_eps; otherwise the smaller
    root of lam mu^2 (c - lam) = 1 - safety_eps. ``lambda_lo``/``lambda_hi``
    bound the admissible interval containing the chosen value (the part of
    (0, c) below the excluded middle band when clause 2 binds).
    """
    if not (u > 0 and v > 0 and mu > 0):
        raise ValueError("u, v and mu must all be positive")
    if not v > u * mu * mu + 5.0 * mu:
        raise HypothesisViolated(
            f"v = {v:g} does not exceed u mu^2 + 5 mu = {u * mu * mu + 5 * mu:g}",
            feasibility_analysis(u, v, mu),
        )
    c = (v - u * mu * mu - 5.0 * mu) / (mu * mu)
    half = c / 2.0
    target = 1.0 - safety_eps
    if half * mu * mu * half <= target:
        lam = half
    else:
        lam = half - np.sqrt(half * half - target / (mu * mu))
    band = _excluded_interval(c, mu)
    hi = c if band is None else band[0]
    return StepSizeWindow(float(c), 0.0, float(hi), float(lam),
                          certified_contraction(u, v, mu, lam))


def contraction_factor(u: float, v: float, mu: float, lam: float) -> float:
    """sqrt(max(0, 1 - lam mu^2 (c - lam))). Only a certificate when the
    radicand lies in (0, 1); see :func:`certified_contraction`."""
    c = (v - u * mu * mu - 5.0 * mu) / (mu * mu)
    return float(np.sqrt(max(0.0, 1.0 - lam * mu * mu * (c - lam))))


def certified_contraction(u: float, v: float, mu: float, lam: float) -> Optional[float]:
    """q if (lam, u, v, mu) satisfy both step-size clauses, else None."""
    if not (u > 0 and v > 0 and mu > 0 and lam > 0):
        return None
    c = (v - u * mu * mu - 5.0 * mu) / (mu * mu)
    rad = 1.0 - lam * mu * mu * (c - lam)
    if not (lam < c and 0.0 < rad < 1.0):
        return None
    return float(np.sqrt(rad))


@dataclass
class SolverConfig:
    mode: str = "certified"                  # "certified" | "empirical"
    lam: Union[str, float] = "auto"
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    x0: Optional[np.ndarray] = None          # None -> P_C(0)
    u: Optional[float] = None
    v: Optional[float] = None
    mu: Optional[float] = None
    safety_eps: float = DEFAULT_SAFETY_EPS
    allow_empirical_fallback: bool = False
    record_iterates: bool = False

    def __post_init__(self):
        if self.mode not in ("certified", "empirical"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")
        if self.lam != "auto" and not float(self.lam) > 0:
            raise ValueError("lambda must be positive or 'auto'")


@dataclass
class SolveReport:
    solution: SpacePoint
    iterations: int
    step_norms: np.ndarray
    fixed_point_residual: float
    lam: float
    status: str               # converged | max_iter | hypothesis_infeasible_ran_empirical
    certified_q: Optional[float] = None
    a_posteriori_bound: Optional[float] = None
    residuals: Optional[np.ndarray] = None
    iterates: Optional[np.ndarray] = None
    verdict: Optional[FeasibilityVerdict] = None
    backend: str = field(default="numpy")

    @property
    def converged(self) -> bool:
        return self.status != "max_iter"

    def a_priori_bounds(self) -> Optional[np.ndarray]:
        """q^k / (1 - q) ||x_1 - x_0|| for k = 0..iterations."""
        if self.certified_q is None or self.step_norms.size == 0:
            return None
        q = self.certified_q
        k = np.arange(self.iterations + 1)
        return q ** k / (1.0 - q) * self.step_norms[0]


def fixed_point_map(B: Mapping, C: ConvexSet, p: float, lam: float):
    """The raw-array map x -> P_C(x - lam B x)."""
    return lambda x: C.project_coords(x - lam * B.apply(x), p)


def fixed_point_residual(x: SpacePoint, B: Mapping, C: ConvexSet, lam: float) -> float:
    T = fixed_point_map(B, C, x.p, lam)
    return lp_norm(x.coords - T(x.coords), x.p)


def _generic_iterate(T, x0, p, tol, max_iter, q, certified, store):
    x = np.array(x0, dtype=float)
    steps = np.empty(max_iter)
    iterates = [x.copy()] if store else None
    factor = q / (1.0 - q) if certified else 0.0
    k, status = 0, 0
    while k < max_iter:
        y = T(x)
        s = lp_norm(y - x, p)
        steps[k] = s
        k += 1
        if store:
            iterates.append(y.copy())
        if not np.isfinite(s):
            x, status = y, 2
            break
        if certified:
            if factor * s <= tol:
                x, status = y, 1
                break
        elif s <= tol:
            status = 1
            break
        x = y
    it = np.array(iterates) if store else None
    return x, k, steps[:k], it, status


def _resolve_lambda(cfg: SolverConfig):
    """Returns (lam, q, certified, verdict)."""
    if cfg.mode == "certified":
        if cfg.u is None or cfg.v is None or cfg.mu is None:
            raise ValueError("certified mode needs declared constants u, v, mu")
        try:
            win = step_size_window(cfg.u, cfg.v, cfg.mu, cfg.safety_eps)
        except HypothesisViolated as exc:
            if not cfg.allow_empirical_fallback:
                raise
            lam = 1.0 if cfg.lam == "auto" else float(cfg.lam)
            return lam, None, False, exc.verdict
        if cfg.lam == "auto":
            return win.chosen_lambda, win.certified_q, True, None
        lam = float(cfg.lam)
        q = certified_contraction(cfg.u, cfg.v, cfg.mu, lam)
        if q is None:
            raise HypothesisViolated(f"lambda = {lam:g} is outside the admissible window")
        return lam, q, True, None
    if cfg.lam != "auto":
        return float(cfg.lam), None, False, None
    if None not in (cfg.u, cfg.v, cfg.mu):
        try:
            return step_size_window(cfg.u, cfg.v, cfg.mu, cfg.safety_eps).chosen_lambda, None, False, None
        except HypothesisViolated:
            pass
    return 1.0, None, False, None


def solve_vi(B: Mapping, C: ConvexSet, p: float, cfg: Optional[SolverConfig] = None) -> SolveReport:
    """Iterate x <- P_C(x - lam B x) until the stopping rule fires.

    Certified mode stops once q/(1-q) ||x_{k+1} - x_k|| <= tol, which
    bounds the distance of x_{k+1} to the true solution by tol. Empirical
    mode stops once the fixed-point residual of the current iterate is at
    most tol and carries no error bound.

    Affine B on a Box runs in a compiled kernel; everything else loops in
    Python over the catalog's projection.
    """
    cfg = cfg or SolverConfig()
    B.check_dim(C.dim)
    lam, q, certified, verdict = _resolve_lambda(cfg)
    if cfg.x0 is None:
        x0 = metric_projection(SpacePoint(np.zeros(C.dim), p), C).point.coords
    else:
        x0 = np.asarray(cfg.x0, dtype=float).reshape(-1)
        if x0.shape[0] != C.dim:
            raise ValueError("x0 has the wrong dimension")
    C._require(p)
    max_iter = int(cfg.max_iter)
    aff = B.as_affine(C.dim) if isinstance(C, Box) else None
    qq = q if q is not None else 0.0
    if aff is not None:
        A, b = (np.ascontiguousarray(a, dtype=float) for a in aff)
        x, k, steps, it, status = _kernels.box_affine_iterate(
            A, b, np.array(C.lo), np.array(C.hi), np.array(x0, dtype=float),
            float(lam), float(p), float(cfg.tol), max_iter, float(qq), certified,
            bool(cfg.record_iterates))
        backend = "numba" if _kernels.box_affine_iterate is _kernels.NUMBA_KERNELS["box_affine_iterate"] else "numpy"
    else:
        T = fixed_point_map(B, C, p, lam)
        x, k, steps, it, status = _generic_iterate(
            T, x0, p, cfg.tol, max_iter, qq, certified, cfg.record_iterates)
        backend = "python"
    if status == 2:
        raise NonFiniteIterate(f"iterate became non-finite after {k} steps (lambda = {lam:g})")
    steps = np.array(steps)
    sol = SpacePoint(x, p)
    res = fixed_point_residual(sol, B, C, lam)
    # trace row k holds the residual of x_{k+1}, i.e. the next step norm; an
    # empirical run stops at x_k, so its x_{k+1} is rebuilt for the last row
    if status == 1 and not certified:
        T = fixed_point_map(B, C, p, lam)
        xn = T(x)
        last = lp_norm(T(xn) - xn, p)
    else:
        last = res
    residuals = np.append(steps[1:], last)
    if status == 1:
        label = "converged" if verdict is None else "hypothesis_infeasible_ran_empirical"
    else:
        label = "max_iter"
    bound = q / (1.0 - q) * float(steps[-1]) if q is not None and steps.size else None
    return SolveReport(
        solution=sol,
        iterations=int(k),
        step_norms=steps,
        fixed_point_residual=res,
        lam=float(lam),
        status=label,
        certified_q=q,
        a_posteriori_bound=bound,
        residuals=residuals,
        iterates=None if it is None or not cfg.record_iterates else np.array(it),
        verdict=verdict,
        backend=backend,
    )


@dataclass(frozen=True)
class VICertificate:
    passed: bool
    min_margin: float
    witness: Optional[np.ndarray]
    fixed_point_residual: float
    n_evaluated: int


def certify_vi_solution(u_cand: SpacePoint, B: Mapping, C: ConvexSet, n_samples: int = 256,
                        seed: int = 0, tol: float = 1e-9) -> VICertificate:
    """Sampled check of  <J(Bu), z - u> >= 0  over z in C.

    ``z`` runs over vertices (boxes up to 2**12 of them, simplices), the
    closed-form minimizer of the linear margin where the set has one, and
    ``n_samples`` uniform members. The fixed-point residual at lam = 1 is
    reported alongside as a scale-free cross-check.
    """
    if n_samples < 0:
        raise ValueError("n_samples must be nonnegative")
    if not contains(C, u_cand, max(tol, MEMBERSHIP_TOL)):
        raise ValueError("candidate is not a member of C")
    B.check_dim(C.dim)
    p = u_cand.p
    j = normalized_duality_map(u_cand.like(B.apply(u_cand.coords)))
    parts = []
    verts = C.vertices()
    if verts is not None:
        parts.append(verts)
    if n_samples:
        parts.append(C.sample(np.random.default_rng(seed), n_samples, p))
    lin = C.linear_minimizer(j.coords, p)
    if lin is not None:
        parts.append(lin[None, :])
    if not parts:
        raise ValueError("empty sample set")
    Z = np.vstack(parts)
    margins = (Z - u_cand.coords[None, :]) @ j.coords
    i = int(np.argmin(margins))
    m = float(margins[i])
    return VICertificate(
        passed=m >= -tol,
        min_margin=m,
        witness=Z[i].copy() if m < -tol else None,
        fixed_point_residual=fixed_point_residual(u_cand, B, C, 1.0),
        n_evaluated=Z.shape[0],
    )


@dataclass
class ProbeReport:
    diameter: float
    solutions: list
    failures: dict
    reports: list


def uniqueness_probe(B: Mapping, C: ConvexSet, p: float, cfg: Optional[SolverConfig] = None,
                     n_starts: int = 10, seed: int = 0) -> ProbeReport:
    """Solve from ``n_starts`` random members of C and return the l^p
    diameter of the solutions found. Failed starts are listed by index."""
    cfg = cfg or SolverConfig()
    if n_starts < 1:
        raise ValueError("n_starts must be positive")
    starts = C.sample(np.random.default_rng(seed), n_starts, p)
    sols, reports, failures = [], [], {}
    for i, x0 in enumerate(starts):
        try:
            rep = solve_vi(B, C, p, replace(cfg, x0=x0))
        except (ArithmeticError, ValueError) as exc:
            failures[i] = repr(exc)
            continue
        reports.append(rep)
        if rep.status == "max_iter":
            failures[i] = "max_iter"
            continue
        sols.append(rep.solution.coords)
    diam = 0.0
    if len(sols) > 1:
        S = np.array(sols)
        for i in range(len(S) - 1):
            diam = max(diam, float(np.max(_kernels.norm_rows(np.ascontiguousarray(S[i + 1:] - S[i]), p))))
    return ProbeReport(diam, sols, failures, reports)
