"""Hot loops: beam summation and nonuniform trigonometric interpolation.

Both kernels exist as numba ``@njit`` functions and as pure-numpy versions.
Setting the environment variable ``GBEAMS_NO_NUMBA=1`` (or running without
numba installed) selects the numpy path.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("GBEAMS_NO_NUMBA", "0") not in ("1", "true", "yes")


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# cutoff profile
# --------------------------------------------------------------------------
def _smooth_step_np(s):
    """1 for s <= 0, 0 for s >= 1, C-infinity in between."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    out = np.zeros_like(s)
    inner = (s > 0) & (s < 1)
    a = np.exp(-1.0 / np.where(inner, 1.0 - s, 1.0))
    b = np.exp(-1.0 / np.where(inner, s, 1.0))
    out[inner] = (a / (a + b))[inner]
    out[s <= 0] = 1.0
    return out


def cutoff_np(r, eta: float):
    if not math.isfinite(eta):
        return np.ones_like(np.asarray(r, dtype=float))
    return _smooth_step_np((np.asarray(r, dtype=float) - eta) / eta)


def _cutoff_scalar(r, eta):
    if eta == np.inf:
        return 1.0
    s = (r - eta) / eta
    if s <= 0.0:
        return 1.0
    if s >= 1.0:
        return 0.0
    a = math.exp(-1.0 / (1.0 - s))
    b = math.exp(-1.0 / s)
    return a / (a + b)


# --------------------------------------------------------------------------
# beam summation
# --------------------------------------------------------------------------
def _superpose_numpy(points, x, weights, phase, pexp, amp, aexp, eps, eta, rskip):
    P, n = points.shape
    out = np.zeros(P, np.complex128)
    for b in range(x.shape[0]):
        d = points - x[b]
        r = np.sqrt(np.sum(d * d, axis=1))
        sel = np.flatnonzero(r < rskip[b])
        if sel.size == 0:
            continue
        cut = cutoff_np(r[sel], eta)
        ds = d[sel]
        mp = np.prod(ds[:, None, :] ** pexp[None, :, :], axis=2)
        ma = np.prod(ds[:, None, :] ** aexp[None, :, :], axis=2)
        ph = mp @ phase[b]
        am = ma @ amp[b]
        out[sel] += weights[b] * cut * am * np.exp(1j * ph / eps)
    return out


BLOCK = 32  # beams per bounding-box block in the summation kernel


def _blocks(x, rskip):
    """Bounding boxes and largest skip radius of consecutive runs of BLOCK beams."""
    B, n = x.shape
    nb = (B + BLOCK - 1) // BLOCK
    pad = nb * BLOCK - B
    xs = np.concatenate([x, np.repeat(x[-1:], pad, axis=0)]) if pad and B else x
    rs = np.concatenate([rskip, np.repeat(rskip[-1:], pad)]) if pad and B else rskip
    xs = xs.reshape(nb, BLOCK, n)
    return (np.ascontiguousarray(xs.min(axis=1)), np.ascontiguousarray(xs.max(axis=1)),
            np.ascontiguousarray(rs.reshape(nb, BLOCK).max(axis=1)))


if numba is not None:
    _cutoff_nb = numba.njit(cache=True)(_cutoff_scalar)

    @numba.njit(cache=True, parallel=True)
    def _superpose_nb(points, x, weights, phase, pexp, amp, aexp, eps, eta, rskip, blo, bhi, brad):
        P, n = points.shape
        B = x.shape[0]
        nb = blo.shape[0]
        out = np.zeros(P, np.complex128)
        dmax = 0
        for m in range(pexp.shape[0]):
            for i in range(n):
                dmax = max(dmax, pexp[m, i])
        for m in range(aexp.shape[0]):
            for i in range(n):
                dmax = max(dmax, aexp[m, i])
        for ip in numba.prange(P):
            pw = np.empty((n, dmax + 1))
            acc = 0.0 + 0.0j
            for k in range(nb):
                # whole blocks out of reach are skipped; beam order is unchanged
                g2 = 0.0
                for i in range(n):
                    p = points[ip, i]
                    if p < blo[k, i]:
                        g2 += (blo[k, i] - p) ** 2
                    elif p > bhi[k, i]:
                        g2 += (p - bhi[k, i]) ** 2
                if g2 >= brad[k] * brad[k]:
                    continue
                for b in range(k * BLOCK, min(B, (k + 1) * BLOCK)):
                    r2 = 0.0
                    for i in range(n):
                        d = points[ip, i] - x[b, i]
                        r2 += d * d
                    if r2 >= rskip[b] * rskip[b]:
                        continue
                    cut = _cutoff_nb(math.sqrt(r2), eta)
                    if cut == 0.0:
                        continue
                    for i in range(n):
                        d = points[ip, i] - x[b, i]
                        pw[i, 0] = 1.0
                        for m in range(1, dmax + 1):
                            pw[i, m] = pw[i, m - 1] * d
                    ph = 0.0 + 0.0j
                    for m in range(pexp.shape[0]):
                        mono = 1.0
                        for i in range(n):
                            mono *= pw[i, pexp[m, i]]
                        ph += phase[b, m] * mono
                    am = 0.0 + 0.0j
                    for m in range(aexp.shape[0]):
                        mono = 1.0
                        for i in range(n):
                            mono *= pw[i, aexp[m, i]]
                        am += amp[b, m] * mono
                    acc += weights[b] * cut * am * np.exp(1j * ph / eps)
            out[ip] = acc
        return out


def superpose(points, x, weights, phase, pexp, amp, aexp, eps, eta, rskip, use_numba=None):
    """Sum of w_b A_b(y - x_b) exp(i Phi_b(y - x_b) / eps) cut(|y - x_b|) at each point.

    Beams with |y - x_b| >= rskip_b are skipped.  Summation over beams runs in
    index order for every point.
    """
    args = (
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.complex128),
        np.ascontiguousarray(phase, dtype=np.complex128),
        np.ascontiguousarray(pexp, dtype=np.int64),
        np.ascontiguousarray(amp, dtype=np.complex128),
        np.ascontiguousarray(aexp, dtype=np.int64),
        float(eps),
        float(eta),
        np.ascontiguousarray(rskip, dtype=np.float64),
    )
    use = USE_NUMBA if use_numba is None else (use_numba and numba is not None)
    if use:
        if args[1].shape[0] == 0:
            return np.zeros(args[0].shape[0], np.complex128)
        return _superpose_nb(*args, *_blocks(args[1], args[9]))
    return _superpose_numpy(*args)


# --------------------------------------------------------------------------
# trigonometric interpolation (1D)
# --------------------------------------------------------------------------
def _trig_numpy(coef, xi, origin, points):
    out = np.empty(points.shape[0], np.complex128)
    for start in range(0, points.shape[0], 256):
        y = points[start:start + 256] - origin
        out[start:start + 256] = np.exp(1j * np.outer(y, xi)) @ coef
    return out


if numba is not None:

    @numba.njit(cache=True, parallel=True)
    def _trig_nb(coef, xi, origin, points):
        P = points.shape[0]
        N = coef.shape[0]
        out = np.empty(P, np.complex128)
        for ip in numba.prange(P):
            y = points[ip] - origin
            acc = 0.0 + 0.0j
            for m in range(N):
                acc += coef[m] * np.exp(1j * xi[m] * y)
            out[ip] = acc
        return out


def trig_interp(coef, xi, origin, points, use_numba=None):
    """Evaluate sum_m coef_m exp(i xi_m (y - origin)) at 1D points."""
    args = (
        np.ascontiguousarray(coef, dtype=np.complex128),
        np.ascontiguousarray(xi, dtype=np.float64),
        float(origin),
        np.ascontiguousarray(points, dtype=np.float64),
    )
    use = USE_NUMBA if use_numba is None else (use_numba and numba is not None)
    if use:
        return _trig_nb(*args)
    return _trig_numpy(*args)


# --------------------------------------------------------------------------
# truncated jet product
# --------------------------------------------------------------------------
def _jet_product_numpy(a, b, left, right, starts):
    return np.add.reduceat(a[:, left] * b[:, right], starts, axis=-1)


if numba is not None:

    @numba.njit(cache=True)
    def _jet_product_nb(a, b, left, right, starts):
        B = a.shape[0]
        K = starts.shape[0]
        P = left.shape[0]
        out = np.zeros((B, K), np.complex128)
        for r in range(B):
            for k in range(K):
                stop = starts[k + 1] if k + 1 < K else P
                acc = 0.0 + 0.0j
                for q in range(starts[k], stop):
                    acc += a[r, left[q]] * b[r, right[q]]
                out[r, k] = acc
        return out


def jet_product(a, b, left, right, starts, use_numba=None):
    """Batched truncated product of coefficient arrays (..., m) using a pair table."""
    a, b = np.broadcast_arrays(a, b)
    shape = a.shape
    a2 = np.ascontiguousarray(a.reshape(-1, shape[-1]), dtype=np.complex128)
    b2 = np.ascontiguousarray(b.reshape(-1, shape[-1]), dtype=np.complex128)
    use = USE_NUMBA if use_numba is None else (use_numba and numba is not None)
    out = _jet_product_nb(a2, b2, left, right, starts) if use else _jet_product_numpy(a2, b2, left, right, starts)
    return out.reshape(shape[:-1] + (len(starts),))
