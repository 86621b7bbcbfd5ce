"""Secure sensor-to-node aggregation.

Sensor batches are quantized into the prime field GF(p), p = 2^61 - 1,
split into Shamir shares (one degree-(t-1) polynomial per feature, secret in
the constant term), optionally extended with redundant evaluations so any t
of the n+r points survive erasures, summed share-wise per party, and
reconstructed by Lagrange interpolation at zero.  No party ever holds a
single sensor's plaintext; the node only learns the per-slot mean.

Field elements are plain ints / uint64 arrays; the elementwise field math
lives in the kernel backends.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ArgumentError, InsufficientSharesError
from .ilvq import Sample

P = kernels.P


def inv_mod(a: int) -> int:
    """Multiplicative inverse in GF(p) (Fermat)."""
    if a % P == 0:
        raise ZeroDivisionError("zero has no inverse in GF(p)")
    return pow(a, P - 2, P)


@dataclass
class QuantizationConfig:
    """Real-to-field bridge: values clamped to [lo, hi] then rounded at
    ``scale``.  ``clamped`` counts silently clamped coordinates."""

    scale: int = 1 << 20
    lo: float = 0.0
    hi: float = 1.0
    clamped: int = 0


@dataclass
class ShareVector:
    """One party's evaluation point and its share per feature."""

    party_id: int
    shares: np.ndarray
    threshold: int


@dataclass
class AggregationSession:
    """Shape of one aggregation: s sensors share to n parties with
    reconstruction threshold t and r redundant MDS evaluations."""

    sensors: int
    parties: int
    threshold: int
    redundancy: int = 0

    def __post_init__(self):
        if self.sensors < 1:
            raise ArgumentError("need at least one sensor")
        if not (1 <= self.threshold <= self.parties):
            raise ArgumentError(
                f"threshold {self.threshold} must satisfy 1 <= t <= n={self.parties}"
            )
        if self.redundancy < 0:
            raise ArgumentError("redundancy must be >= 0")

    def check_headroom(self, cfg: QuantizationConfig) -> None:
        """Summing ``sensors`` quantized values must not wrap the field."""
        span = max(abs(cfg.lo), abs(cfg.hi))
        if cfg.scale * span * self.sensors >= P // 2:
            raise ArgumentError("quantization scale too large for sensor count")


def quantize(x, cfg: QuantizationConfig) -> np.ndarray:
    """round(value * scale) mod p, clamping out-of-range values first."""
    v = np.asarray(x, dtype=np.float64).ravel()
    clipped = np.clip(v, cfg.lo, cfg.hi)
    cfg.clamped += int(np.count_nonzero(clipped != v))
    q = np.rint(clipped * cfg.scale).astype(np.int64)
    return np.where(q < 0, q + P, q).astype(np.uint64)


def dequantize(vals: np.ndarray, cfg: QuantizationConfig) -> np.ndarray:
    """Centered lift back to reals: residues above p/2 are negatives."""
    ints = vals.astype(np.int64)
    lifted = np.where(vals > np.uint64(P // 2), ints - np.int64(P), ints)
    return lifted.astype(np.float64) / cfg.scale


def _as_secrets(secrets) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(secrets, dtype=np.uint64))
    if arr.ndim != 1:
        raise ArgumentError("secrets must be a flat vector of field elements")
    return arr


def shamir_share(secrets, t: int, n: int, rng: np.random.Generator) -> list[ShareVector]:
    """Split a secret vector into n shares with reconstruction threshold t.

    Shares are evaluations at points 1..n of per-feature polynomials with
    uniformly random coefficients above the constant term.
    """
    if not (1 <= t <= n):
        raise ArgumentError(f"need 1 <= t <= n, got t={t}, n={n}")
    if n >= P:
        raise ArgumentError("more parties than field elements")
    vec = _as_secrets(secrets)
    coeffs = np.empty((t, vec.shape[0]), dtype=np.uint64)
    coeffs[0] = vec
    if t > 1:
        coeffs[1:] = rng.integers(0, P, size=(t - 1, vec.shape[0]), dtype=np.uint64)
    return [
        ShareVector(party_id=i, shares=kernels.horner_eval(coeffs, i), threshold=t)
        for i in range(1, n + 1)
    ]


def _check_share_set(shares: Sequence[ShareVector]) -> tuple[int, int]:
    if not shares:
        raise ArgumentError("empty share set")
    t = shares[0].threshold
    length = shares[0].shares.shape[0]
    ids = set()
    for sv in shares:
        if sv.threshold != t or sv.shares.shape[0] != length:
            raise ArgumentError("shares disagree on threshold or feature length")
        if sv.party_id in ids:
            raise ArgumentError(f"duplicate party_id {sv.party_id}")
        ids.add(sv.party_id)
    return t, length


def _lagrange_eval(shares: Sequence[ShareVector], x0: int) -> np.ndarray:
    """Evaluate the interpolating polynomial of the given points at x0."""
    xs = [sv.party_id for sv in shares]
    weights = np.empty(len(xs), dtype=np.uint64)
    for i, xi in enumerate(xs):
        num, den = 1, 1
        for j, xj in enumerate(xs):
            if j == i:
                continue
            num = num * ((x0 - xj) % P) % P
            den = den * ((xi - xj) % P) % P
        weights[i] = num * inv_mod(den) % P
    values = np.stack([sv.shares for sv in shares])
    return kernels.weighted_sum_mod(weights, values)


def shamir_reconstruct(shares: Sequence[ShareVector]) -> np.ndarray:
    """Recover the secret vector (interpolation at zero) from >= t shares."""
    t, _ = _check_share_set(shares)
    if len(shares) < t:
        raise InsufficientSharesError(f"got {len(shares)} shares, need {t}")
    return _lagrange_eval(shares, 0)


def mds_expand(shares: Sequence[ShareVector], r: int) -> list[ShareVector]:
    """Append r redundant shares: further evaluations of the same
    per-feature polynomials at the next unused points."""
    t, _ = _check_share_set(shares)
    if r == 0:
        return list(shares)
    if len(shares) < t:
        raise InsufficientSharesError("cannot extend below-threshold share set")
    base = list(shares[:t])
    start = max(sv.party_id for sv in shares)
    out = list(shares)
    for k in range(1, r + 1):
        pid = start + k
        out.append(
            ShareVector(party_id=pid, shares=_lagrange_eval(base, pid), threshold=t)
        )
    return out


def mds_recover(
    surviving: Sequence[ShareVector], party_ids: Sequence[int]
) -> list[ShareVector]:
    """Rebuild the shares at ``party_ids`` from any >= t surviving points."""
    t, _ = _check_share_set(surviving)
    if len(surviving) < t:
        raise InsufficientSharesError(
            f"{len(surviving)} surviving shares, need {t}"
        )
    base = list(surviving[:t])
    have = {sv.party_id: sv for sv in surviving}
    out = []
    for pid in party_ids:
        if pid in have:
            out.append(ShareVector(pid, have[pid].shares.copy(), t))
        else:
            out.append(ShareVector(pid, _lagrange_eval(base, pid), t))
    return out


def aggregate_shares(per_sensor: Sequence[ShareVector]) -> ShareVector:
    """Element-wise field sum of one party's shares across sensors."""
    if not per_sensor:
        raise ArgumentError("nothing to aggregate")
    pid = per_sensor[0].party_id
    t, length = per_sensor[0].threshold, per_sensor[0].shares.shape[0]
    acc = per_sensor[0].shares.copy()
    for sv in per_sensor[1:]:
        if sv.party_id != pid or sv.threshold != t or sv.shares.shape[0] != length:
            raise ArgumentError("aggregation inputs must align on party, t, length")
        acc = kernels.mod_add(acc, sv.shares)
    return ShareVector(party_id=pid, shares=acc, threshold=t)


def majority_label(labels: Sequence[int]) -> int:
    """Most frequent label; ties resolve to the lowest label."""
    counts: dict[int, int] = {}
    for y in labels:
        counts[int(y)] = counts.get(int(y), 0) + 1
    best = max(counts.values())
    return min(y for y, c in counts.items() if c == best)


def swiftagg_batch(
    sensor_batches: Sequence[np.ndarray],
    session: AggregationSession,
    cfg: QuantizationConfig,
    rng: np.random.Generator,
    drop_parties: Sequence[int] = (),
) -> np.ndarray:
    """Full pipeline over one batch: per-slot mean of the sensors' vectors.

    Each sensor's (B, d) batch is flattened, quantized, shared t-of-n,
    MDS-extended by r, summed per party, optionally stripped of dropped
    parties, reconstructed, and dequantized.  Output is (B, d) and matches
    the plaintext mean within the quantization step.
    """
    if len(sensor_batches) != session.sensors:
        raise ArgumentError(
            f"expected {session.sensors} sensor batches, got {len(sensor_batches)}"
        )
    mats = [np.asarray(b, dtype=np.float64) for b in sensor_batches]
    shape = mats[0].shape
    if any(m.shape != shape for m in mats):
        raise ArgumentError("sensors must submit equal-shape batches")
    session.check_headroom(cfg)

    streams = rng.spawn(session.sensors)
    by_party: dict[int, list[ShareVector]] = {}
    for mat, sensor_rng in zip(mats, streams):
        shares = shamir_share(
            quantize(mat, cfg), session.threshold, session.parties, sensor_rng
        )
        for sv in mds_expand(shares, session.redundancy):
            by_party.setdefault(sv.party_id, []).append(sv)

    aggregated = [
        aggregate_shares(svs)
        for pid, svs in sorted(by_party.items())
        if pid not in set(drop_parties)
    ]
    total = shamir_reconstruct(aggregated)
    return dequantize(total, cfg).reshape(shape) / session.sensors


def aggregate_samples(
    sensor_samples: Sequence[Sequence[Sample]],
    session: AggregationSession,
    cfg: QuantizationConfig,
    rng: np.random.Generator,
) -> list[Sample]:
    """Aggregate aligned sensor sample batches into one labeled batch.

    Features follow the secure pipeline; labels are not shared and resolve
    per slot by majority vote across sensors (ties to the lowest label).
    """
    batch = [np.stack([s.x for s in row]) for row in sensor_samples]
    means = swiftagg_batch(batch, session, cfg, rng)
    out = []
    for j in range(means.shape[0]):
        y = majority_label([row[j].y for row in sensor_samples])
        out.append(Sample(x=means[j], y=y))
    return out


def interpolate_coeffs(xs: Sequence[int], ys: np.ndarray) -> np.ndarray:
    """Power-basis coefficients of the unique degree < k polynomial through
    the k points (xs[i], ys[i, :]), one polynomial per feature column.

    Constructive privacy check: interpolating t-1 shares plus (0, candidate)
    exhibits a consistent polynomial for any candidate secret.
    """
    k = len(xs)
    if len(set(xs)) != k:
        raise ArgumentError("interpolation points must be distinct")
    ys = np.atleast_2d(np.asarray(ys, dtype=np.uint64))
    if ys.shape[0] != k:
        raise ArgumentError("one value row per point required")
    coeffs = np.zeros((k, ys.shape[1]), dtype=np.uint64)
    for i, xi in enumerate(xs):
        # basis_i(X) = prod_{j != i} (X - x_j) / (x_i - x_j), by poly multiply
        basis = [1]
        den = 1
        for j, xj in enumerate(xs):
            if j == i:
                continue
            nxt = [0] * (len(basis) + 1)
            for deg, c in enumerate(basis):
                nxt[deg] = (nxt[deg] - c * xj) % P
                nxt[deg + 1] = (nxt[deg + 1] + c) % P
            basis = nxt
            den = den * ((xi - xj) % P) % P
        inv_den = inv_mod(den)
        for deg, c in enumerate(basis):
            w = np.uint64(c * inv_den % P)
            coeffs[deg] = kernels.mod_add(
                coeffs[deg], kernels.mod_mul(np.full_like(ys[i], w), ys[i])
            )
    return coeffs
