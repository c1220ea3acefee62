"""Versioned binary model container.

Layout (all integers little-endian):

    magic b"HTEN" | u32 version | u64 header length | header JSON (utf-8)
    standardizer block | one block per member | sha256 of everything above

Arrays are written as a dtype tag (0 = float64, 1 = int64), a u8 rank, u64
dimensions and raw C-order bytes, so the round trip is bit-exact.  The
header carries the effective train config, enough to reproduce the model
byte-for-byte from the same data.  Loading verifies magic, version and
checksum before touching any payload.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct

import numpy as np

from .data import Standardizer
from .ensemble import EnsembleModel, Member, TrainConfig
from .errors import DataError
from .local_models import ConstantModel, KernelCell, KernelCellModel
from .partition import AdaptiveTree, GridPartition
from .rng import NORMAL_METHOD, RNG_ALGORITHM
from .transform import HistogramTransform

MAGIC = b"HTEN"
FORMAT_VERSION = 1
_CHECKSUM_BYTES = 32

_TAG_F64 = 0
_TAG_I64 = 1

_PARTITION_GRID = 0
_PARTITION_TREE = 1
_MODEL_CONSTANT = 0
_MODEL_KERNEL = 1
_CELL_KERNEL = 0
_CELL_MEAN = 1


def _w_u8(buf: io.BytesIO, v: int) -> None:
    buf.write(struct.pack("<B", v))


def _w_u64(buf: io.BytesIO, v: int) -> None:
    buf.write(struct.pack("<Q", v))


def _w_f64(buf: io.BytesIO, v: float) -> None:
    buf.write(struct.pack("<d", v))


def _w_array(buf: io.BytesIO, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr)
    if arr.dtype == np.float64:
        tag = _TAG_F64
    elif arr.dtype == np.int64:
        tag = _TAG_I64
    else:
        raise DataError(f"unsupported array dtype {arr.dtype}")
    _w_u8(buf, tag)
    _w_u8(buf, arr.ndim)
    for dim in arr.shape:
        _w_u64(buf, dim)
    buf.write(arr.tobytes(order="C"))


class _Reader:
    def __init__(self, data: bytes, offset: int):
        self.data = data
        self.pos = offset

    def _take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise DataError("model file truncated")
        chunk = self.data[self.pos : self.pos + size]
        self.pos += size
        return chunk

    def u8(self) -> int:
        return struct.unpack("<B", self._take(1))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self._take(8))[0]

    def array(self) -> np.ndarray:
        tag = self.u8()
        ndim = self.u8()
        shape = tuple(self.u64() for _ in range(ndim))
        dtype = np.float64 if tag == _TAG_F64 else np.int64
        count = int(np.prod(shape)) if shape else 1
        raw = self._take(count * 8)
        return np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<")).astype(
            dtype
        ).reshape(shape)


def _write_standardizer(buf: io.BytesIO, stz: Standardizer) -> None:
    _w_array(buf, np.asarray(stz.mean, dtype=np.float64))
    _w_array(buf, np.asarray(stz.std, dtype=np.float64))
    _w_u8(buf, 1 if stz.scales_target else 0)
    if stz.scales_target:
        _w_f64(buf, stz.target_mean)
        _w_f64(buf, stz.target_std)


def _read_standardizer(r: _Reader) -> Standardizer:
    mean = r.array()
    std = r.array()
    if r.u8():
        return Standardizer(mean, std, r.f64(), r.f64())
    return Standardizer(mean, std)


def _write_partition(buf: io.BytesIO, part) -> None:
    if isinstance(part, GridPartition):
        _w_u8(buf, _PARTITION_GRID)
        t = part.transform
        _w_array(buf, t.rotation)
        _w_array(buf, t.scales)
        _w_array(buf, t.translation)
        _w_f64(buf, t.h_lower)
        _w_f64(buf, t.h_upper)
        keys = np.empty((part.n_cells, t.dim), dtype=np.int64)
        for key, cid in part.key_to_cell.items():
            keys[cid] = key
        _w_array(buf, keys)
    else:
        _w_u8(buf, _PARTITION_TREE)
        _w_array(buf, part.rotation)
        _w_u64(buf, part.min_leaf)
        _w_u64(buf, part.n_cells)
        _w_array(buf, part.split_dim)
        _w_array(buf, part.threshold)
        _w_array(buf, part.left)
        _w_array(buf, part.right)
        _w_array(buf, part.leaf_id)


def _read_partition(r: _Reader):
    kind = r.u8()
    if kind == _PARTITION_GRID:
        rotation = r.array()
        scales = r.array()
        translation = r.array()
        h_lower = r.f64()
        h_upper = r.f64()
        keys = r.array()
        transform = HistogramTransform(rotation, scales, translation, h_lower, h_upper)
        key_to_cell = {
            tuple(int(v) for v in keys[cid]): cid for cid in range(len(keys))
        }
        return GridPartition(transform, key_to_cell, len(keys))
    if kind != _PARTITION_TREE:
        raise DataError(f"unknown partition tag {kind}")
    return AdaptiveTree(
        rotation=r.array(),
        min_leaf=r.u64(),
        n_cells=r.u64(),
        split_dim=r.array(),
        threshold=r.array(),
        left=r.array(),
        right=r.array(),
        leaf_id=r.array(),
    )


def _write_model(buf: io.BytesIO, model) -> None:
    if isinstance(model, ConstantModel):
        _w_u8(buf, _MODEL_CONSTANT)
        _w_array(buf, model.values)
        _w_f64(buf, model.fallback)
        return
    _w_u8(buf, _MODEL_KERNEL)
    _w_f64(buf, model.lambda2)
    _w_f64(buf, model.clip_bound)
    _w_f64(buf, model.fallback)
    _w_u64(buf, model.n_train)
    _w_u64(buf, len(model.cells))
    for cell in model.cells:
        if cell.is_kernel:
            _w_u8(buf, _CELL_KERNEL)
            _w_f64(buf, cell.gamma)
            _w_array(buf, cell.support)
            _w_array(buf, cell.alpha)
        else:
            _w_u8(buf, _CELL_MEAN)
            _w_f64(buf, cell.gamma)
            _w_f64(buf, cell.mean)


def _read_model(r: _Reader):
    kind = r.u8()
    if kind == _MODEL_CONSTANT:
        return ConstantModel(values=r.array(), fallback=r.f64())
    if kind != _MODEL_KERNEL:
        raise DataError(f"unknown model tag {kind}")
    lambda2 = r.f64()
    clip_bound = r.f64()
    fallback = r.f64()
    n_train = r.u64()
    n_cells = r.u64()
    cells = []
    for _ in range(n_cells):
        cell_kind = r.u8()
        gamma = r.f64()
        if cell_kind == _CELL_KERNEL:
            cells.append(KernelCell(gamma=gamma, support=r.array(), alpha=r.array()))
        elif cell_kind == _CELL_MEAN:
            cells.append(KernelCell(gamma=gamma, mean=r.f64()))
        else:
            raise DataError(f"unknown cell tag {cell_kind}")
    return KernelCellModel(
        cells=cells,
        lambda2=lambda2,
        clip_bound=clip_bound,
        n_train=n_train,
        fallback=fallback,
    )


def serialize_model(model: EnsembleModel, data_info: dict | None = None) -> bytes:
    header = {
        "format_version": FORMAT_VERSION,
        "mode": model.config.mode,
        "partition": model.config.partition,
        "d": model.d,
        "n_transforms": model.n_transforms,
        "seed": model.config.master_seed,
        "rng": RNG_ALGORITHM,
        "normal_method": NORMAL_METHOD,
        "clip_bound": model.clip_bound,
        "total_cells": model.total_cells,
        "config": model.config.to_dict(),
        "data": data_info or {},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    _w_u64(buf, len(header_bytes))
    buf.write(header_bytes)
    _write_standardizer(buf, model.standardizer)
    for member in model.members:
        _write_partition(buf, member.partition)
        _write_model(buf, member.model)
    payload = buf.getvalue()
    return payload + hashlib.sha256(payload).digest()


def save_model(model: EnsembleModel, path, data_info: dict | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_model(model, data_info))


def _verify(data: bytes) -> dict:
    if len(data) < len(MAGIC) + 4 + 8 + _CHECKSUM_BYTES:
        raise DataError("not a model file (too short)")
    if data[: len(MAGIC)] != MAGIC:
        raise DataError("not a model file (bad magic)")
    version = struct.unpack_from("<I", data, len(MAGIC))[0]
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {version}")
    digest = hashlib.sha256(data[:-_CHECKSUM_BYTES]).digest()
    if digest != data[-_CHECKSUM_BYTES:]:
        raise DataError("model file corrupt: checksum mismatch")
    header_len = struct.unpack_from("<Q", data, len(MAGIC) + 4)[0]
    start = len(MAGIC) + 4 + 8
    header = json.loads(data[start : start + header_len].decode())
    header["_payload_offset"] = start + header_len
    return header


def read_metadata(path) -> dict:
    """Header of a model file (verified), without loading the members."""
    with open(path, "rb") as fh:
        data = fh.read()
    header = _verify(data)
    header.pop("_payload_offset")
    return header


def deserialize_model(data: bytes) -> EnsembleModel:
    header = _verify(data)
    reader = _Reader(data[:-_CHECKSUM_BYTES], header.pop("_payload_offset"))
    config = TrainConfig.from_dict(header["config"])
    standardizer = _read_standardizer(reader)
    members = []
    for _ in range(header["n_transforms"]):
        partition = _read_partition(reader)
        model = _read_model(reader)
        members.append(Member(partition, model))
    return EnsembleModel(members, standardizer, config, header["clip_bound"])


def load_model(path) -> EnsembleModel:
    with open(path, "rb") as fh:
        return deserialize_model(fh.read())
