"""Canonical byte encoding for prototype payloads.

Little-endian, per prototype:

    u32  dim
    i64  x dim   feature values, fixed point at scale 2^32
    u32  label
    u32  wins
    i64  acceptance threshold, fixed point at scale 2^32
         (INT64_MAX encodes +inf, the radius of a never-rejecting prototype)

A payload is the concatenation of the buffer's prototypes in insertion
order.  Encoding is a pure function of the model state, so identical models
serialize to identical bytes.
"""

import math
import struct
from typing import Sequence

import numpy as np

from .errors import ArgumentError
from .ilvq import Prototype

SCALE = 1 << 32
INF_SENTINEL = (1 << 63) - 1

_HEAD = struct.Struct("<I")
_TAIL = struct.Struct("<IIq")


def _fix(value: float) -> int:
    q = int(round(value * SCALE))
    if not -(1 << 63) <= q < (1 << 63):
        raise ArgumentError(f"value {value} out of fixed-point range")
    return q


def prototype_size(dim: int) -> int:
    """Encoded byte length of one prototype of the given dimension."""
    return 4 + 8 * dim + 4 + 4 + 8


def encode_prototypes(protos: Sequence[Prototype]) -> bytes:
    out = bytearray()
    for p in protos:
        dim = p.vector.shape[0]
        out += _HEAD.pack(dim)
        out += struct.pack(f"<{dim}q", *(_fix(v) for v in p.vector))
        thr = INF_SENTINEL if math.isinf(p.threshold) else _fix(p.threshold)
        out += _TAIL.pack(p.label, p.wins, thr)
    return bytes(out)


def decode_prototypes(payload: bytes) -> list[Prototype]:
    protos = []
    pos = 0
    n = len(payload)
    while pos < n:
        if pos + 4 > n:
            raise ArgumentError("truncated payload header")
        (dim,) = _HEAD.unpack_from(payload, pos)
        pos += 4
        body = 8 * dim + _TAIL.size
        if dim < 1 or pos + body > n:
            raise ArgumentError(f"truncated payload at offset {pos}")
        raw = struct.unpack_from(f"<{dim}q", payload, pos)
        pos += 8 * dim
        label, wins, thr = _TAIL.unpack_from(payload, pos)
        pos += _TAIL.size
        protos.append(
            Prototype(
                vector=np.array(raw, dtype=np.float64) / SCALE,
                label=label,
                wins=wins,
                threshold=math.inf if thr == INF_SENTINEL else thr / SCALE,
            )
        )
    return protos


def encode_model(model) -> bytes:
    """Serialize a model's buffer — the ledger payload for prototype sharing."""
    return encode_prototypes(model.prototypes())
