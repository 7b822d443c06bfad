"""Hot numeric kernels, each in a numba flavour (``_nb_*``) and a numpy
flavour (``_np_*``). The public names at the bottom are bound according to
:mod:`lpvi._accel`. Both flavours must agree to rounding; the benchmark in
``benchmarks/`` times them against each other.

All kernels work on plain float64 arrays; no validation happens here.
"""
import numpy as np

from ._accel import USE_NUMBA, njit


# ---------------------------------------------------------------- numba side

@njit
def _nb_norm(x, p):
    m = 0.0
    for i in range(x.shape[0]):
        a = abs(x[i])
        if a != a:
            return np.nan
        if a > m:
            m = a
    if m == 0.0 or m == np.inf:
        return m
    s = 0.0
    for i in range(x.shape[0]):
        s += (abs(x[i]) / m) ** p
    return m * s ** (1.0 / p)


@njit
def _nb_duality_vec(x, p, out):
    m = 0.0
    for i in range(x.shape[0]):
        a = abs(x[i])
        if a > m:
            m = a
    if m == 0.0:
        for i in range(x.shape[0]):
            out[i] = 0.0
        return
    s = 0.0
    for i in range(x.shape[0]):
        s += (abs(x[i]) / m) ** p
    scale = m * (s ** (1.0 / p)) ** (2.0 - p)
    for i in range(x.shape[0]):
        a = abs(x[i]) / m
        if a == 0.0:
            out[i] = 0.0
        elif x[i] > 0:
            out[i] = scale * a ** (p - 1.0)
        else:
            out[i] = -scale * a ** (p - 1.0)


@njit
def _nb_norm_rows(X, p):
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        out[r] = _nb_norm(X[r], p)
    return out


@njit
def _nb_duality_rows(X, p):
    out = np.empty_like(X)
    for r in range(X.shape[0]):
        _nb_duality_vec(X[r], p, out[r])
    return out


@njit
def _nb_pairing_rows(X, Y, p):
    n, d = X.shape
    lhs = np.empty(n)
    rhs = np.empty(n)
    jx = np.empty(d)
    jy = np.empty(d)
    diff = np.empty(d)
    for r in range(n):
        _nb_duality_vec(X[r], p, jx)
        _nb_duality_vec(Y[r], p, jy)
        pair = 0.0
        for i in range(d):
            diff[i] = X[r, i] - Y[r, i]
            pair += diff[i] * (jx[i] - jy[i])
        nd = _nb_norm(diff, p)
        lhs[r] = nd * nd
        rhs[r] = pair + 4.0 * _nb_norm(X[r], p) * _nb_norm(Y[r], p)
    return lhs, rhs


@njit
def _nb_box_affine_iterate(A, b, lo, hi, x0, lam, p, tol, max_iter, q, certified, store):
    d = x0.shape[0]
    x = x0.copy()
    y = np.empty(d)
    diff = np.empty(d)
    steps = np.empty(max_iter)
    if store:
        iterates = np.empty((max_iter + 1, d))
        iterates[0] = x0
    else:
        iterates = np.empty((0, d))
    factor = q / (1.0 - q) if certified else 0.0
    k = 0
    while k < max_iter:
        for i in range(d):
            bx = b[i]
            for j in range(d):
                bx += A[i, j] * x[j]
            t = x[i] - lam * bx
            if t < lo[i]:
                t = lo[i]
            elif t > hi[i]:
                t = hi[i]
            y[i] = t
            diff[i] = t - x[i]
        s = _nb_norm(diff, p)
        steps[k] = s
        k += 1
        if store:
            iterates[k] = y
        if not np.isfinite(s):
            return y, k, steps[:k], iterates[: k + 1], 2
        if certified:
            if factor * s <= tol:
                return y, k, steps[:k], iterates[: k + 1], 1
        elif s <= tol:
            # x already satisfies the residual test; y is one step further.
            return x, k, steps[:k], iterates[: k + 1], 1
        for i in range(d):
            x[i] = y[i]
    return x, k, steps[:k], iterates[: k + 1], 0


@njit
def _nb_grid_box_nearest(x, lo, hi, h, p):
    d = x.shape[0]
    counts = np.empty(d, dtype=np.int64)
    steps = np.empty(d)
    for i in range(d):
        side = hi[i] - lo[i]
        c = int(np.ceil(side / h)) + 1
        if c < 1:
            c = 1
        counts[i] = c
        steps[i] = side / (c - 1) if c > 1 else 0.0
    total = 1
    for i in range(d):
        total *= counts[i]
    best = np.inf
    best_pt = lo.copy()
    pt = np.empty(d)
    for flat in range(total):
        rem = flat
        acc = 0.0
        for i in range(d):
            idx = rem % counts[i]
            rem //= counts[i]
            pt[i] = lo[i] + idx * steps[i] if idx < counts[i] - 1 else hi[i]
            acc += abs(x[i] - pt[i]) ** p
        if acc < best:
            best = acc
            best_pt[:] = pt
    return best ** (1.0 / p), best_pt


# ---------------------------------------------------------------- numpy side

def _np_norm_rows(X, p):
    X = np.asarray(X, dtype=float)
    m = np.max(np.abs(X), axis=1) if X.shape[1] else np.zeros(X.shape[0])
    safe = np.where(m > 0, m, 1.0)
    with np.errstate(invalid="ignore"):
        s = np.sum((np.abs(X) / safe[:, None]) ** p, axis=1)
    out = np.where(m > 0, m * s ** (1.0 / p), 0.0)
    # inf/inf scaling reads nan, and nan > 0 is false: restore both by hand
    return np.where(np.isfinite(m), out, m)


def _np_duality_rows(X, p):
    X = np.asarray(X, dtype=float)
    m = np.max(np.abs(X), axis=1) if X.shape[1] else np.zeros(X.shape[0])
    safe = np.where(m > 0, m, 1.0)
    Xh = X / safe[:, None]
    s = np.sum(np.abs(Xh) ** p, axis=1)
    s = np.where(m > 0, s, 1.0)
    scale = np.where(m > 0, m * (s ** (1.0 / p)) ** (2.0 - p), 0.0)
    return scale[:, None] * np.sign(Xh) * np.abs(Xh) ** (p - 1.0)


def _np_pairing_rows(X, Y, p):
    jx = _np_duality_rows(X, p)
    jy = _np_duality_rows(Y, p)
    diff = X - Y
    nd = _np_norm_rows(diff, p)
    lhs = nd * nd
    rhs = np.sum(diff * (jx - jy), axis=1) + 4.0 * _np_norm_rows(X, p) * _np_norm_rows(Y, p)
    return lhs, rhs


def _np_box_affine_iterate(A, b, lo, hi, x0, lam, p, tol, max_iter, q, certified, store):
    x = np.array(x0, dtype=float)
    steps = np.empty(max_iter)
    iterates = [x.copy()] if store else None
    factor = q / (1.0 - q) if certified else 0.0
    k = 0
    status = 0
    while k < max_iter:
        y = np.clip(x - lam * (A @ x + b), lo, hi)
        s = _np_norm_rows((y - x)[None, :], p)[0]
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
    it = np.array(iterates) if store else np.empty((0, x.shape[0]))
    return x, k, steps[:k], it, status


def _np_grid_box_nearest(x, lo, hi, h, p, chunk=1 << 20):
    axes = []
    for a, b_ in zip(lo, hi):
        c = max(int(np.ceil((b_ - a) / h)) + 1, 1)
        ax = np.linspace(a, b_, c) if c > 1 else np.array([a])
        axes.append(ax)
    counts = [len(ax) for ax in axes]
    total = int(np.prod(counts))
    best, best_pt = np.inf, np.asarray(lo, dtype=float).copy()
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        idx = np.unravel_index(flat, counts[::-1])[::-1]
        pts = np.stack([axes[i][idx[i]] for i in range(len(axes))], axis=1)
        vals = np.sum(np.abs(pts - x) ** p, axis=1)
        i = int(np.argmin(vals))
        if vals[i] < best:
            best, best_pt = vals[i], pts[i]
    return best ** (1.0 / p), best_pt


NUMBA_KERNELS = {
    "norm_rows": _nb_norm_rows,
    "duality_rows": _nb_duality_rows,
    "pairing_rows": _nb_pairing_rows,
    "box_affine_iterate": _nb_box_affine_iterate,
    "grid_box_nearest": _nb_grid_box_nearest,
}
NUMPY_KERNELS = {
    "norm_rows": _np_norm_rows,
    "duality_rows": _np_duality_rows,
    "pairing_rows": _np_pairing_rows,
    "box_affine_iterate": _np_box_affine_iterate,
    "grid_box_nearest": _np_grid_box_nearest,
}

_active = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS
norm_rows = _active["norm_rows"]
duality_rows = _active["duality_rows"]
pairing_rows = _active["pairing_rows"]
box_affine_iterate = _active["box_affine_iterate"]
grid_box_nearest = _active["grid_box_nearest"]
