"""Time the numba and numpy flavours of every kernel on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]

Reports the best-of-N wall time per flavour, the speedup and the largest
elementwise difference between the two outputs. Compilation happens in a
warm-up call and is reported separately.
"""
import argparse
import time

import numpy as np

from lpvi import _accel, _kernels


def _best(fn, args, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _flatten(out):
    if isinstance(out, tuple):
        return np.concatenate([np.ravel(np.asarray(o, dtype=float)) for o in out
                               if np.ndim(o) > 0 or np.isscalar(o)])
    return np.ravel(np.asarray(out, dtype=float))


def cases(rng):
    X = rng.standard_normal((100_000, 16))
    Y = rng.standard_normal((100_000, 16))
    A = 0.1 * np.eye(8)
    b = -0.1 * rng.uniform(-1, 2, 8)
    lo, hi, x0 = np.zeros(8), np.ones(8), np.full(8, 0.5)
    return [
        ("norm_rows p=3", "norm_rows", (X, 3.0)),
        ("duality_rows p=1.5", "duality_rows", (X, 1.5)),
        ("pairing_inequality_rows p=3", "pairing_rows", (X, Y, 3.0)),
        ("box_affine_iterate d=8", "box_affine_iterate",
         (A, b, lo, hi, x0, 4.5, 3.0, 1e-14, 10_000, 0.893, True, False)),
        ("grid_box_nearest 3-d h=2e-3", "grid_box_nearest",
         (np.array([2.0, -1.0, 0.3]), np.zeros(3), np.full(3, 0.5), 2e-3, 3.0)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    header = f"{'kernel':<30} {'compile s':>10} {'numba s':>10} {'numpy s':>10} {'speedup':>8} {'max diff':>10}"
    print(header)
    print("-" * len(header))
    for label, name, fargs in cases(rng):
        nb, npf = _kernels.NUMBA_KERNELS[name], _kernels.NUMPY_KERNELS[name]
        t0 = time.perf_counter()
        nb(*fargs)
        compile_s = time.perf_counter() - t0
        t_nb, out_nb = _best(nb, fargs, args.repeat)
        t_np, out_np = _best(npf, fargs, args.repeat)
        diff = float(np.max(np.abs(_flatten(out_nb) - _flatten(out_np))))
        print(f"{label:<30} {compile_s:>10.3f} {t_nb:>10.4f} {t_np:>10.4f} "
              f"{t_np / t_nb:>7.1f}x {diff:>10.2e}")


if __name__ == "__main__":
    main()
