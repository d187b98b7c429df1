"""Binary persistence for :class:`BlockVector`.

Layout (all little-endian)::

    0   4 bytes  magic b"FMV1"
    4   u64      space_extent
    12  u64      time_extent
    20  u64      layout code     0 = SOTI, 1 = TOSI
    28  u64      precision code  0 = f64,  1 = f32
    36  u64      domain code     0 = time, 1 = frequency
    44  ...      raw element data (complex values as interleaved re, im)
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .core import BlockVector, Domain, Layout, Precision

MAGIC = b"FMV1"
_HEADER = struct.Struct("<4s5Q")


class VectorFileError(ValueError):
    pass


def _element_dtype(precision_code: int, domain: Domain) -> np.dtype:
    base = {0: "f8", 1: "f4"}[precision_code]
    if domain is Domain.FREQUENCY:
        base = {"f8": "c16", "f4": "c8"}[base]
    return np.dtype("<" + base)


def save_vector(path, v: BlockVector) -> None:
    prec = 0 if v.precision is Precision.DOUBLE else 1
    dt = _element_dtype(prec, v.domain)
    header = _HEADER.pack(MAGIC, v.space_extent, v.time_extent, int(v.layout), prec, int(v.domain))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(v.data.astype(dt, copy=False).tobytes())


def load_vector(path) -> BlockVector:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise VectorFileError(f"{os.fspath(path)}: bad magic (not an FMV1 vector file)")
    if len(raw) < _HEADER.size:
        raise VectorFileError(f"{os.fspath(path)}: truncated header")
    _, space, time_, layout, prec, domain = _HEADER.unpack_from(raw)
    if layout not in (0, 1):
        raise VectorFileError(f"{os.fspath(path)}: layout code {layout} out of range")
    if prec not in (0, 1):
        raise VectorFileError(f"{os.fspath(path)}: precision code {prec} out of range")
    if domain not in (0, 1):
        raise VectorFileError(f"{os.fspath(path)}: domain code {domain} out of range")
    dom = Domain(domain)
    dt = _element_dtype(prec, dom)
    payload = raw[_HEADER.size:]
    expected = space * time_ * dt.itemsize
    if len(payload) != expected:
        raise VectorFileError(
            f"{os.fspath(path)}: truncated/oversized payload "
            f"({len(payload)} bytes, header implies {expected})"
        )
    data = np.frombuffer(payload, dtype=dt).astype(dt.newbyteorder("="))
    return BlockVector(data, space, time_, Layout(layout), dom)
