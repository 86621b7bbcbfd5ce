"""Numba-jitted twins of the kernels in ``_numpy``.

Same signatures, same results; compiled lazily and cached on disk so repeat
runs skip the JIT cost.  Importing this module requires numba.
"""

import numpy as np
from numba import njit

P = (1 << 61) - 1

_P = np.uint64(P)
_M31 = np.uint64((1 << 31) - 1)
_M30 = np.uint64((1 << 30) - 1)


@njit(cache=True)
def _mulmod(a, b):
    au = a >> np.uint64(31)
    ad = a & _M31
    bu = b >> np.uint64(31)
    bd = b & _M31
    mid = ad * bu + au * bd
    t = au * bu * np.uint64(2) + (mid >> np.uint64(30)) + ((mid & _M30) << np.uint64(31)) + ad * bd
    r = (t >> np.uint64(61)) + (t & _P)
    if r >= _P:
        r -= _P
    return r


@njit(cache=True)
def mod_add(a, b):
    out = np.empty_like(a)
    flat_a = a.ravel()
    flat_b = b.ravel()
    flat_o = out.ravel()
    for i in range(flat_a.shape[0]):
        s = flat_a[i] + flat_b[i]
        if s >= _P:
            s -= _P
        flat_o[i] = s
    return out


@njit(cache=True)
def mod_mul(a, b):
    out = np.empty_like(a)
    flat_a = a.ravel()
    flat_b = b.ravel()
    flat_o = out.ravel()
    for i in range(flat_a.shape[0]):
        flat_o[i] = _mulmod(flat_a[i], flat_b[i])
    return out


@njit(cache=True)
def horner_eval(coeffs, x):
    t, f = coeffs.shape
    xs = np.uint64(x)
    out = coeffs[t - 1].copy()
    for j in range(t - 2, -1, -1):
        for k in range(f):
            s = _mulmod(out[k], xs) + coeffs[j, k]
            if s >= _P:
                s -= _P
            out[k] = s
    return out


@njit(cache=True)
def weighted_sum_mod(weights, values):
    k, f = values.shape
    out = np.zeros(f, dtype=np.uint64)
    for i in range(k):
        w = weights[i]
        for j in range(f):
            s = out[j] + _mulmod(w, values[i, j])
            if s >= _P:
                s -= _P
            out[j] = s
    return out


@njit(cache=True)
def sq_dists(protos, x):
    m, d = protos.shape
    out = np.empty(m, dtype=np.float64)
    for i in range(m):
        acc = 0.0
        for j in range(d):
            t = protos[i, j] - x[j]
            acc += t * t
        out[i] = acc
    return out


@njit(cache=True)
def two_nearest(protos, x):
    m, d = protos.shape
    i1 = -1
    i2 = -1
    d1 = np.inf
    d2 = np.inf
    for i in range(m):
        acc = 0.0
        for j in range(d):
            t = protos[i, j] - x[j]
            acc += t * t
        if acc < d1:
            i2 = i1
            d2 = d1
            i1 = i
            d1 = acc
        elif acc < d2:
            i2 = i
            d2 = acc
    return i1, np.sqrt(d1), i2, np.sqrt(d2)


@njit(cache=True)
def threshold_dist(protos, labels, idx):
    m, d = protos.shape
    if m < 2:
        return np.inf
    best_other = np.inf
    best_same = np.inf
    for i in range(m):
        if i == idx:
            continue
        acc = 0.0
        for j in range(d):
            t = protos[i, j] - protos[idx, j]
            acc += t * t
        if labels[i] != labels[idx]:
            if acc < best_other:
                best_other = acc
        elif acc < best_same:
            best_same = acc
    if best_other < np.inf:
        return np.sqrt(best_other)
    if best_same < np.inf:
        return np.sqrt(best_same)
    return np.inf


@njit(cache=True)
def min_mse(samples, cands):
    n, dim = samples.shape
    m = cands.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        best = np.inf
        for k in range(m):
            acc = 0.0
            for j in range(dim):
                t = samples[i, j] - cands[k, j]
                acc += t * t
            if acc < best:
                best = acc
        out[i] = best / dim
    return out
