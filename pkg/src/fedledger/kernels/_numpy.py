"""Pure-numpy reference kernels.

Every function here has a numba twin in ``_numba`` with an identical
signature and matching results (exactly equal for the integer field kernels,
within float summation-order rounding for the distance kernels); this module
is the always-importable fallback and the equivalence oracle for the jitted
path.

Field arithmetic is over the Mersenne prime p = 2^61 - 1.  The 61x61-bit
product is computed with a 31/30-bit split so that every intermediate stays
below 2^64 and plain uint64 wraparound arithmetic is exact.
"""

import numpy as np

P = (1 << 61) - 1

_P = np.uint64(P)
_M31 = np.uint64((1 << 31) - 1)
_M30 = np.uint64((1 << 30) - 1)
_TWO = np.uint64(2)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_S61 = np.uint64(61)


def mod_add(a, b):
    """Elementwise (a + b) mod p for uint64 arrays with values < p."""
    s = a + b
    return np.where(s >= _P, s - _P, s)


def mod_mul(a, b):
    """Elementwise (a * b) mod p; all intermediates fit in uint64."""
    au = a >> _S31
    ad = a & _M31
    bu = b >> _S31
    bd = b & _M31
    mid = ad * bu + au * bd
    t = au * bu * _TWO + (mid >> _S30) + ((mid & _M30) << _S31) + ad * bd
    r = (t >> _S61) + (t & _P)
    return np.where(r >= _P, r - _P, r)


def horner_eval(coeffs, x):
    """Evaluate F polynomials (columns of a (t, F) uint64 array, row j holding
    the x^j coefficients) at the scalar point ``x``, mod p."""
    xs = np.uint64(x)
    out = coeffs[-1].copy()
    for j in range(coeffs.shape[0] - 2, -1, -1):
        out = mod_add(mod_mul(out, xs), coeffs[j])
    return out


def weighted_sum_mod(weights, values):
    """Sum_i weights[i] * values[i, :] mod p for uint64 inputs."""
    out = np.zeros(values.shape[1], dtype=np.uint64)
    for i in range(weights.shape[0]):
        out = mod_add(out, mod_mul(np.uint64(weights[i]), values[i]))
    return out


def sq_dists(protos, x):
    """Squared Euclidean distance from x to every row of protos."""
    diff = protos - x
    return np.einsum("ij,ij->i", diff, diff)


def two_nearest(protos, x):
    """Indices and Euclidean distances of the two nearest rows to x.

    Ties break toward the lower index.  Requires at least two rows.
    """
    d = sq_dists(protos, x)
    order = np.argsort(d, kind="stable")
    i1, i2 = int(order[0]), int(order[1])
    return i1, float(np.sqrt(d[i1])), i2, float(np.sqrt(d[i2]))


def threshold_dist(protos, labels, idx):
    """Acceptance radius for prototype ``idx``: Euclidean distance to the
    nearest prototype of a different class, falling back to the nearest
    same-class neighbour, and +inf when no other prototype exists."""
    m = protos.shape[0]
    if m < 2:
        return np.inf
    d = sq_dists(protos, protos[idx])
    d[idx] = np.inf
    other = labels != labels[idx]
    if other.any():
        return float(np.sqrt(d[other].min()))
    return float(np.sqrt(d.min()))


def min_mse(samples, cands):
    """Per-sample minimum mean-squared-error against any candidate row."""
    n, dim = samples.shape
    m = cands.shape[0]
    out = np.empty(n, dtype=np.float64)
    # chunk so the (chunk, m, dim) broadcast stays within ~64 MB
    chunk = max(1, int(64e6 / max(1, m * dim * 8)))
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        diff = samples[lo:hi, None, :] - cands[None, :, :]
        out[lo:hi] = np.einsum("ijk,ijk->ij", diff, diff).min(axis=1) / dim
    return out
