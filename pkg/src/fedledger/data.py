"""Dataset loading, normalization, and client partitioning.

CSV in, ``Sample`` streams out.  Loaders are schema-agnostic: declared
feature/instance counts are validated with a warning, never a failure,
since published dataset variants disagree on attribute counts.
"""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ArgumentError, ParseError
from .ilvq import Sample

log = logging.getLogger("fedledger.data")

IID = "iid"
NON_IID = "non_iid"


@dataclass
class DatasetSpec:
    """Where a dataset lives and what it is declared to contain."""

    name: str
    path: str
    features: int = 0
    classes: int = 0
    instances: int = 0
    label_column: int = -1
    header: bool = True
    normalize: bool = True


@dataclass
class Partition:
    """node id -> sample indices; disjoint and covering."""

    assignments: dict[int, list[int]]
    mode: str


def _dense_labels(raw: list[str]) -> dict[str, int]:
    uniq = sorted(set(raw))
    try:
        uniq.sort(key=float)
    except ValueError:
        pass  # non-numeric labels stay in lexicographic order
    return {tok: i for i, tok in enumerate(uniq)}


def load_csv(spec: DatasetSpec) -> list[Sample]:
    """Parse samples in file order, remapping labels densely to 0..k-1."""
    path = Path(spec.path)
    rows: list[tuple[int, list[str]]] = []
    with path.open(newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if row:
                rows.append((line_no, row))
    if spec.header and rows:
        rows = rows[1:]
    if not rows:
        raise ParseError("no data rows", line=1)

    width = len(rows[0][1])
    label_col = spec.label_column if spec.label_column >= 0 else width + spec.label_column
    if not (0 <= label_col < width):
        raise ArgumentError(f"label column {spec.label_column} outside row width {width}")

    raw_labels = []
    vectors = []
    for line, row in rows:
        if len(row) != width:
            raise ParseError(f"expected {width} columns, got {len(row)}", line=line)
        feats = []
        for j, cell in enumerate(row):
            if j == label_col:
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", line=line) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite cell {cell!r}", line=line)
            feats.append(v)
        vectors.append(np.array(feats, dtype=np.float64))
        raw_labels.append(row[label_col].strip())

    mapping = _dense_labels(raw_labels)
    samples = [Sample(x=v, y=mapping[tok]) for v, tok in zip(vectors, raw_labels)]

    dim = samples[0].x.shape[0]
    if spec.features and dim != spec.features:
        log.warning(
            "%s: declared %d features but file has %d", spec.name, spec.features, dim
        )
    if spec.instances and len(samples) != spec.instances:
        log.warning(
            "%s: declared %d instances but file has %d",
            spec.name,
            spec.instances,
            len(samples),
        )
    if spec.classes and len(mapping) != spec.classes:
        log.warning(
            "%s: declared %d classes but file has %d", spec.name, spec.classes, len(mapping)
        )
    return minmax_normalize(samples) if spec.normalize else samples


def minmax_normalize(samples: Sequence[Sample]) -> list[Sample]:
    """Affinely map each feature to [0, 1]; constant features go to 0."""
    if len(samples) < 2:
        raise ArgumentError("normalization needs at least two samples")
    mat = np.stack([s.x for s in samples])
    lo = mat.min(axis=0)
    span = mat.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    norm = np.where(span > 0, (mat - lo) / safe, 0.0)
    return [Sample(x=norm[i], y=s.y) for i, s in enumerate(samples)]


def _quotas(total: int, weights: Sequence[float], caps: Sequence[int] | None = None) -> list[int]:
    """Largest-remainder apportionment of ``total`` by ``weights``,
    optionally capped per slot (caps must admit a solution)."""
    w = np.asarray(weights, dtype=np.float64)
    target = w / w.sum() * total
    base = np.floor(target).astype(int)
    if caps is not None:
        base = np.minimum(base, caps)
    remainder = target - base
    short = total - int(base.sum())
    order = np.argsort(-remainder, kind="stable")
    i = 0
    while short > 0:
        j = int(order[i % len(order)])
        if caps is None or base[j] < caps[j]:
            base[j] += 1
            short -= 1
        i += 1
    return base.tolist()


def partition(
    samples: Sequence[Sample],
    n_nodes: int,
    mode: str,
    seed: int,
    alpha: float = 0.5,
) -> Partition:
    """Split sample indices across nodes.

    IID is a uniform shuffle split.  The non-IID mode keeps per-node sample
    counts equal (+-1) while drawing per-node class proportions from a
    Dirichlet centered on the global class mix; ``alpha`` scales the
    concentration, so small alpha means heavily skewed clients.
    """
    n = len(samples)
    if n_nodes < 1 or n_nodes > n:
        raise ArgumentError(f"cannot split {n} samples across {n_nodes} nodes")
    rng = np.random.default_rng(seed)

    if mode == IID:
        idx = rng.permutation(n)
        chunks = np.array_split(idx, n_nodes)
        return Partition(
            assignments={i: chunk.tolist() for i, chunk in enumerate(chunks)},
            mode=mode,
        )
    if mode != NON_IID:
        raise ArgumentError(f"unknown partition mode {mode!r}")

    labels = np.array([s.y for s in samples])
    classes = np.unique(labels)
    global_mix = np.array([(labels == c).sum() for c in classes], dtype=np.float64) / n
    pools = {int(c): rng.permutation(np.flatnonzero(labels == c)).tolist() for c in classes}

    node_quota = _quotas(n, [1.0] * n_nodes)
    proportions = rng.dirichlet(alpha * len(classes) * global_mix, size=n_nodes)

    assignments: dict[int, list[int]] = {i: [] for i in range(n_nodes)}
    for i in range(n_nodes):
        caps = [len(pools[int(c)]) for c in classes]
        want = _quotas(min(node_quota[i], sum(caps)), proportions[i], caps)
        for c, take in zip(classes, want):
            pool = pools[int(c)]
            assignments[i].extend(pool[:take])
            del pool[:take]
    # drain anything left by cap interactions, preserving equal counts
    leftovers = [j for c in sorted(pools) for j in pools[c]]
    for i in range(n_nodes):
        while len(assignments[i]) < node_quota[i] and leftovers:
            assignments[i].append(leftovers.pop())
    return Partition(assignments=assignments, mode=mode)


def split_train_val(
    samples: Sequence[Sample], ratio: float, seed: int
) -> tuple[list[Sample], list[Sample]]:
    """Seeded stratified split; validation gets ceil(ratio * n) samples with
    per-class counts within one of the class's proportional share."""
    if not (0.0 < ratio < 1.0):
        raise ArgumentError(f"split ratio must lie in (0,1), got {ratio}")
    n = len(samples)
    if n < 2:
        raise ArgumentError("need at least two samples to split")
    n_val = math.ceil(ratio * n)
    labels = np.array([s.y for s in samples])
    classes = np.unique(labels)
    counts = np.array([(labels == c).sum() for c in classes])
    quotas = _quotas(n_val, counts.astype(float), caps=counts.tolist())

    rng = np.random.default_rng(seed)
    val_idx: set[int] = set()
    for c, q in zip(classes, quotas):
        members = np.flatnonzero(labels == c)
        picked = rng.choice(members, size=q, replace=False)
        val_idx.update(int(i) for i in picked)

    train = [s for i, s in enumerate(samples) if i not in val_idx]
    val = [s for i, s in enumerate(samples) if i in val_idx]
    return train, val
