"""Command-line front end.

    lpvi solve    PROBLEM [--mode certified|empirical] [--lambda auto|X] [--tol]
                  [--max-iter] [--trace CSV] [--starts N] [--seed] [--empirical]
                  [--json]
    lpvi certify  PROBLEM (--candidate X1,X2,... | --candidate-file FILE|-) [--json]
    lpvi estimate PROBLEM [--samples N] [--u U] [--v V] [--mu MU] [--json]
    lpvi lab      [--p P ...] [--dims D] [--pairs N] [--seed] [--csv FILE]
                  [--flawed-factor R GAMMA MU S] [--json]

Exit codes: 0 ok, 1 input error, 2 quantitative failure, 3 hypothesis
violation. ``--json`` switches stdout to one JSON record per line.
"""
import argparse
import json
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import lab, mappings, sets, solver
from .space import SpacePoint

SCHEMA_VERSION = 1

EXIT_OK, EXIT_INPUT, EXIT_FAIL, EXIT_HYPOTHESIS = 0, 1, 2, 3


class ProblemError(ValueError):
    pass


@dataclass
class Problem:
    dim: int
    p: float
    set: sets.ConvexSet
    mapping: mappings.Mapping
    constants: Optional[dict]
    solver: dict
    seed: int


def _line_of(text: str, path) -> Optional[int]:
    """Best-effort line number of a dotted key path inside JSON text."""
    pos = 0
    for key in path:
        if isinstance(key, int):
            continue
        i = text.find(f'"{key}"', pos)
        if i < 0:
            return None
        pos = i
    return text.count("\n", 0, pos) + 1


def _fail(text, path, msg):
    line = _line_of(text, path) if text is not None else None
    where = ".".join(str(k) for k in path) or "<root>"
    prefix = f"line {line}: " if line else ""
    raise ProblemError(f"{prefix}{where}: {msg}")


def parse_problem(text: str) -> Problem:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"line {exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        _fail(text, [], "top level must be an object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        _fail(text, ["schema_version"], f"expected {SCHEMA_VERSION}, got {version!r}")
    for key in ("space", "set", "mapping"):
        if not isinstance(doc.get(key), dict):
            _fail(text, [key], "missing or not an object")
    space = doc["space"]
    try:
        dim, p = int(space["dim"]), float(space["p"])
    except (KeyError, TypeError, ValueError) as exc:
        _fail(text, ["space"], f"needs integer dim and real p ({exc})")
    if dim < 1:
        _fail(text, ["space", "dim"], "must be >= 1")
    if not 1.0 < p < np.inf:
        _fail(text, ["space", "p"], "must satisfy 1 < p < inf")

    def build(key, factory):
        try:
            obj = factory(doc[key])
        except (KeyError, TypeError, ValueError, ImportError, AttributeError) as exc:
            sub = [key]
            for field_ in ("lo", "hi", "center", "radius", "normal", "offset", "dim",
                           "A", "b", "scale", "inner", "alpha", "value", "target"):
                if field_ in str(exc):
                    sub.append(field_)
                    break
            _fail(text, sub, str(exc))
        return obj

    C = build("set", sets.set_from_dict)
    B = build("mapping", mappings.mapping_from_dict)
    if C.dim != dim:
        _fail(text, ["set"], f"dimension {C.dim} does not match space.dim = {dim}")
    try:
        B.check_dim(dim)
    except ValueError as exc:
        _fail(text, ["mapping"], str(exc))
    if not C.supports(p):
        _fail(text, ["set", "kind"], f"{C.kind} has no exact projection at p = {p:g}")

    consts = doc.get("constants")
    if consts is not None:
        try:
            consts = {k: float(consts[k]) for k in ("u", "v", "mu")}
        except (KeyError, TypeError, ValueError) as exc:
            _fail(text, ["constants"], f"needs positive u, v, mu ({exc})")
        for k, val in consts.items():
            if not val > 0:
                _fail(text, ["constants", k], "must be positive")
    solver_cfg = doc.get("solver") or {}
    if not isinstance(solver_cfg, dict):
        _fail(text, ["solver"], "must be an object")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        _fail(text, ["seed"], "must be an integer")
    return Problem(dim, p, C, B, consts, solver_cfg, seed)


def load_problem(path: str) -> Problem:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ProblemError(f"cannot read {path}: {exc.strerror}") from None
    return parse_problem(text)


# ---------------------------------------------------------------- output

def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if np.isfinite(x) else repr(x)


def _emit(record: dict, out):
    out.write(json.dumps(record, sort_keys=True) + "\n")


def _table(rows, out):
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        out.write(f"{k:<{width}}  {v}\n")


def _fmt_vec(v):
    return "(" + ", ".join(f"{x:.12g}" for x in v) + ")"


def write_trace(path, report: solver.SolveReport):
    with open(path, "w") as fh:
        fh.write("k,step_norm,residual\n")
        for k, (s, r) in enumerate(zip(report.step_norms, report.residuals)):
            fh.write(f"{k},{s:.17g},{r:.17g}\n")


def _verdict_record(v: mappings.FeasibilityVerdict) -> dict:
    return {
        "record": "feasibility",
        "feasible": v.feasible,
        "t_min": _num(v.t_min),
        "t_max": _num(v.t_max),
        "max_admissible_v": _num(v.max_admissible_v),
        "u": _num(v.u), "v": _num(v.v), "mu": _num(v.mu),
        "hypothesis_holds": v.hypothesis_holds,
        "hypothesis_compatible": v.hypothesis_compatible,
    }


# -------------------------------------------------------------- commands

def _solver_config(prob: Problem, args) -> solver.SolverConfig:
    s = dict(prob.solver)
    mode = args.mode or s.get("mode", "certified")
    lam = args.lam if args.lam is not None else s.get("lambda", "auto")
    if lam != "auto":
        lam = float(lam)
    c = prob.constants or {}
    x0 = s.get("x0")
    return solver.SolverConfig(
        mode=mode,
        lam=lam,
        tol=float(args.tol if args.tol is not None else s.get("tol", solver.DEFAULT_TOL)),
        max_iter=int(args.max_iter if args.max_iter is not None
                     else s.get("max_iter", solver.DEFAULT_MAX_ITER)),
        x0=None if x0 is None else np.asarray(x0, dtype=float),
        u=c.get("u"), v=c.get("v"), mu=c.get("mu"),
        allow_empirical_fallback=bool(args.empirical),
    )


def cmd_solve(args, out) -> int:
    prob = load_problem(args.problem)
    try:
        cfg = _solver_config(prob, args)
    except (TypeError, ValueError) as exc:
        raise ProblemError(f"solver settings: {exc}") from None
    try:
        rep = solver.solve_vi(prob.mapping, prob.set, prob.p, cfg)
    except solver.HypothesisViolated as exc:
        verdict = exc.verdict
        if args.json:
            _emit({"record": "error", "kind": "hypothesis_violated", "message": str(exc)}, out)
            if verdict is not None:
                _emit(_verdict_record(verdict), out)
        else:
            out.write(f"hypothesis violated: {exc}\n")
            if verdict is not None:
                out.write(f"feasibility: {verdict.summary()}\n")
            out.write("rerun with --empirical to iterate without a certificate\n")
        return EXIT_HYPOTHESIS
    except solver.NonFiniteIterate as exc:
        if args.json:
            _emit({"record": "error", "kind": "non_finite", "message": str(exc)}, out)
        else:
            out.write(f"diverged: {exc}\n")
        return EXIT_FAIL
    if args.trace:
        write_trace(args.trace, rep)
    probe = None
    if args.starts > 1:
        seed = args.seed if args.seed is not None else prob.seed
        probe = solver.uniqueness_probe(prob.mapping, prob.set, prob.p, cfg,
                                        n_starts=args.starts, seed=seed)
    if args.json:
        _emit({
            "record": "solve",
            "status": rep.status,
            "solution": [float(x) for x in rep.solution.coords],
            "p": rep.solution.p,
            "iterations": rep.iterations,
            "lambda": rep.lam,
            "fixed_point_residual": _num(rep.fixed_point_residual),
            "certified_q": _num(rep.certified_q),
            "a_posteriori_bound": _num(rep.a_posteriori_bound),
            "tol": cfg.tol,
        }, out)
        if rep.verdict is not None:
            _emit(_verdict_record(rep.verdict), out)
        if probe is not None:
            _emit({"record": "uniqueness", "starts": args.starts, "diameter": _num(probe.diameter),
                   "failed_starts": sorted(probe.failures)}, out)
    else:
        rows = [
            ("status", rep.status),
            ("solution", _fmt_vec(rep.solution.coords)),
            ("iterations", rep.iterations),
            ("lambda", f"{rep.lam:.12g}"),
            ("fixed-point residual", f"{rep.fixed_point_residual:.3e}"),
        ]
        if rep.certified_q is not None:
            rows += [("certified q", f"{rep.certified_q:.12g}"),
                     ("a-posteriori bound", f"{rep.a_posteriori_bound:.3e}")]
        if rep.verdict is not None:
            rows.append(("feasibility", rep.verdict.summary()))
        if probe is not None:
            rows.append((f"solution diameter ({args.starts} starts)", f"{probe.diameter:.3e}"))
            if probe.failures:
                rows.append(("failed starts", ", ".join(map(str, sorted(probe.failures)))))
        _table(rows, out)
    if probe is not None and probe.failures:
        return EXIT_FAIL
    return EXIT_OK if rep.converged else EXIT_FAIL


def _read_candidate(args, dim):
    if args.candidate is not None:
        try:
            vals = [float(t) for t in args.candidate.replace(" ", "").split(",") if t]
        except ValueError:
            raise ProblemError("--candidate must be comma-separated reals") from None
    else:
        fh = sys.stdin if args.candidate_file == "-" else open(args.candidate_file)
        with fh:
            text = fh.read()
        vals = None
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                continue
            if isinstance(rec, dict) and "solution" in rec:
                vals = rec["solution"]
        if vals is None:
            raise ProblemError("no record with a 'solution' field in candidate input")
    if len(vals) != dim:
        raise ProblemError(f"candidate has {len(vals)} coordinates, problem has {dim}")
    return np.asarray(vals, dtype=float)


def cmd_certify(args, out) -> int:
    prob = load_problem(args.problem)
    x = _read_candidate(args, prob.dim)
    tol = args.tol if args.tol is not None else float(prob.solver.get("tol", 1e-9))
    cand = SpacePoint(x, prob.p)
    if not sets.contains(prob.set, cand, max(tol, sets.MEMBERSHIP_TOL)):
        raise ProblemError("candidate lies outside C")
    cert = solver.certify_vi_solution(cand, prob.mapping, prob.set,
                                      n_samples=args.samples, seed=args.seed, tol=tol)
    if args.json:
        _emit({
            "record": "certify",
            "passed": cert.passed,
            "min_margin": _num(cert.min_margin),
            "witness": None if cert.witness is None else [float(t) for t in cert.witness],
            "fixed_point_residual": _num(cert.fixed_point_residual),
            "n_evaluated": cert.n_evaluated,
            "tol": tol,
        }, out)
    else:
        rows = [("verdict", "pass" if cert.passed else "FAIL"),
                ("min margin", f"{cert.min_margin:.6e}"),
                ("fixed-point residual (lambda=1)", f"{cert.fixed_point_residual:.3e}"),
                ("points evaluated", cert.n_evaluated)]
        if cert.witness is not None:
            rows.append(("witness", _fmt_vec(cert.witness)))
        _table(rows, out)
    return EXIT_OK if cert.passed else EXIT_FAIL


def cmd_estimate(args, out) -> int:
    prob = load_problem(args.problem)
    c = prob.constants or {}
    u = args.u if args.u is not None else c.get("u")
    v = args.v if args.v is not None else c.get("v")
    seed = args.seed if args.seed is not None else prob.seed
    try:
        est = mappings.estimate_constants(prob.mapping, prob.set, prob.p, n=args.samples,
                                          seed=seed, u=u, v=v)
    except ValueError as exc:
        raise ProblemError(str(exc)) from None
    mu = args.mu if args.mu is not None else est.lipschitz_hat
    verdict = None
    if u is not None and v is not None and mu > 0:
        verdict = mappings.feasibility_analysis(u, v, mu)
    if args.json:
        _emit({
            "record": "estimate",
            "lipschitz_hat": _num(est.lipschitz_hat),
            "lipschitz_exact": _num(est.lipschitz_exact),
            "strong_monotone_hat": _num(est.strong_monotone_hat),
            "cocoercive_margin": _num(est.cocoercive_margin),
            "sample_count": est.sample_count,
            "seed": est.seed,
        }, out)
        if verdict is not None:
            _emit(_verdict_record(verdict), out)
    else:
        rows = [("lipschitz (sampled)", f"{est.lipschitz_hat:.12g}")]
        if est.lipschitz_exact is not None:
            rows.append(("lipschitz (operator norm)", f"{est.lipschitz_exact:.12g}"))
        rows.append(("strong monotonicity (sampled)", f"{est.strong_monotone_hat:.12g}"))
        if est.cocoercive_margin is not None:
            rows.append((f"cocoercive margin (u={u:g}, v={v:g})", f"{est.cocoercive_margin:.6e}"))
        rows.append(("pairs", f"{est.sample_count} (seed {est.seed})"))
        if verdict is not None:
            rows.append((f"feasibility (mu={mu:g})", verdict.summary()))
        _table(rows, out)
    return EXIT_OK


def cmd_lab(args, out) -> int:
    if args.flawed_factor is not None:
        r, g, mu, s = args.flawed_factor
        if mu == 0:
            raise ProblemError("--flawed-factor: mu must be nonzero")
        val = lab.flawed_contraction_factor(r, g, mu, s)
        if args.json:
            _emit({"record": "flawed_factor", "r": r, "gamma": g, "mu": mu, "s": s, "factor": val}, out)
        else:
            out.write(f"{val:.12g}\n")
        return EXIT_OK
    if args.pairs < 1:
        raise ProblemError("--pairs must be positive (empty batch)")
    if args.dims < 1:
        raise ProblemError("--dims must be positive")
    dims = range(1, args.dims + 1)
    total_viol = 0
    rows = []
    for p in args.p:
        if not 1.0 < p < np.inf:
            raise ProblemError(f"--p {p:g}: need 1 < p < inf")
        b = lab.pairing_inequality_batch(p, n=args.pairs, dims=dims, seed=args.seed)
        total_viol += b.violations
        if args.json:
            _emit({"record": "pairing_inequality", "p": p, "pairs": b.n_pairs,
                   "violations": b.violations, "worst_ratio": _num(b.worst_ratio)}, out)
        rows.append((f"p = {p:g}", f"{b.violations} violations / {b.n_pairs} pairs "
                                   f"(worst (lhs-rhs)/max(1,|rhs|) = {b.worst_ratio:.3e})"))
    if args.csv:
        it = (row for p in args.p for row in lab.pairing_inequality_rows(p, args.pairs, dims, args.seed))
        lab.write_batch_csv(args.csv, it)
    if not args.json:
        _table(rows, out)
        out.write(f"flawed factor at r = gamma = s = 1, mu = 0.1: "
                  f"{lab.flawed_contraction_factor(1, 1, 0.1, 1):.12g}\n")
    return EXIT_OK if total_viol == 0 else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lpvi", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve VI(C, B) by projected fixed-point iteration")
    s.add_argument("problem")
    s.add_argument("--mode", choices=["certified", "empirical"])
    s.add_argument("--lambda", dest="lam", help="'auto' or a positive real")
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iter", type=int)
    s.add_argument("--trace", help="write a k,step_norm,residual CSV here")
    s.add_argument("--starts", type=int, default=1,
                   help="also solve from this many random members of C and report the spread")
    s.add_argument("--seed", type=int, help="seed for --starts (default: the problem's seed)")
    s.add_argument("--empirical", action="store_true",
                   help="fall back to an uncertified run if the constants fail the hypothesis")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("certify", help="check a candidate against the variational inequality")
    c.add_argument("problem")
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--candidate", help="comma-separated coordinates")
    g.add_argument("--candidate-file", help="JSON-lines file from 'solve --json', or - for stdin")
    c.add_argument("--tol", type=float)
    c.add_argument("--samples", type=int, default=256)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_certify)

    e = sub.add_parser("estimate", help="sample the constants of B and check feasibility")
    e.add_argument("problem")
    e.add_argument("--samples", type=int, default=mappings.DEFAULT_SAMPLES)
    e.add_argument("--seed", type=int)
    e.add_argument("--u", type=float)
    e.add_argument("--v", type=float)
    e.add_argument("--mu", type=float, help="Lipschitz constant for the verdict (default: sampled)")
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_estimate)

    lb = sub.add_parser("lab", help="batch checks of the pairing inequality")
    lb.add_argument("--p", type=float, nargs="+", default=[1.5, 2.0, 3.0])
    lb.add_argument("--dims", type=int, default=16, help="use dimensions 1..DIMS")
    lb.add_argument("--pairs", type=int, default=10_000, help="pairs per exponent")
    lb.add_argument("--seed", type=int, default=0)
    lb.add_argument("--csv", help="write per-pair results here")
    lb.add_argument("--flawed-factor", "--remark44", dest="flawed_factor", type=float, nargs=4,
                    metavar=("R", "GAMMA", "MU", "S"),
                    help="evaluate 1 - s mu^2 (2 (r - gamma mu^2) / mu^2 - s) and exit")
    lb.add_argument("--json", action="store_true")
    lb.set_defaults(func=cmd_lab)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except (ProblemError, ValueError, OSError) as exc:
        sys.stderr.write(f"lpvi: error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
