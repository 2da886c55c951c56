"""Binary round-trip persistence for reference stores and embedding models.

Both formats share the same envelope: magic bytes, a little-endian uint32
format version, a dimension table, row-major little-endian float64 payload
arrays, and a trailing CRC32 of everything before it. Loading is
all-or-nothing: a bad magic/version, a short file, and a checksum mismatch
each raise their own error and never yield a partial object.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .kernels import KernelConfig
from .mlp import MLPParams
from .store import ReferenceStore

__all__ = ["PersistenceError", "VersionError", "TruncatedFileError",
           "ChecksumError", "save_store", "load_store", "save_model",
           "load_model"]

STORE_MAGIC = b"KBSTORE\x00"
MODEL_MAGIC = b"KBMODEL\x00"
FORMAT_VERSION = 1

_FLAG_TRUNCATION = 1
_FLAG_TIME_LABELS = 2


class PersistenceError(Exception):
    """Base class for checkpoint load/save failures."""


class VersionError(PersistenceError):
    """Unrecognized magic bytes or unsupported format version."""


class TruncatedFileError(PersistenceError):
    """File ended before the declared payload."""


class ChecksumError(PersistenceError):
    """Payload bytes do not match the stored CRC32."""


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.path = path
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedFileError(f"{self.path}: truncated file")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def array(self, count: int, dtype="<f8") -> np.ndarray:
        item = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(count * item), dtype=dtype).copy()


def _open_envelope(path, magic: bytes) -> _Reader:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(magic) + 8:
        raise TruncatedFileError(f"{path}: truncated file")
    body, stored_crc = blob[:-4], struct.unpack("<I", blob[-4:])[0]
    if body[: len(magic)] != magic:
        raise VersionError(f"{path}: bad magic bytes, not a recognized checkpoint")
    if zlib.crc32(body) != stored_crc:
        raise ChecksumError(f"{path}: checksum mismatch")
    reader = _Reader(body, path)
    reader.take(len(magic))
    version = reader.u32()
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: format version {version}, "
                           f"expected {FORMAT_VERSION}")
    return reader


def _finish(path, parts: list):
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def save_store(store: ReferenceStore, path):
    """Write embeddings, rewards, accumulators, and labels bit-exactly."""
    flags = 0
    if store.kernel_config.truncation_radius is not None:
        flags |= _FLAG_TRUNCATION
    if store.time_labels is not None:
        flags |= _FLAG_TIME_LABELS
    parts = [
        STORE_MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        struct.pack("<I", flags),
        struct.pack("<QQ", len(store), store.dim),
        struct.pack("<d", store.kernel_config.sigma),
    ]
    if flags & _FLAG_TRUNCATION:
        parts.append(struct.pack("<d", store.kernel_config.truncation_radius))
    parts.append(np.ascontiguousarray(store.embeddings, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(store.rewards, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(store.accumulators, dtype="<f8").tobytes())
    if flags & _FLAG_TIME_LABELS:
        parts.append(np.ascontiguousarray(store.time_labels, dtype="<i8").tobytes())
    _finish(path, parts)


def load_store(path, checkpoint_interval=None) -> ReferenceStore:
    reader = _open_envelope(path, STORE_MAGIC)
    flags = reader.u32()
    n, dim = reader.u64(), reader.u64()
    sigma = reader.f64()
    trunc = reader.f64() if flags & _FLAG_TRUNCATION else None
    config = KernelConfig(sigma=sigma, truncation_radius=trunc)
    emb = reader.array(n * dim).reshape(n, dim)
    rewards = reader.array(n)
    acc = reader.array(n)
    labels = reader.array(n, "<i8") if flags & _FLAG_TIME_LABELS else None
    store = ReferenceStore(dim, config,
                           checkpoint_interval=checkpoint_interval,
                           track_time_labels=labels is not None)
    store._reserve(n)
    store._emb[:n] = emb
    store._rewards[:n] = rewards
    store._acc[:n] = acc
    if labels is not None:
        store._labels[:n] = labels
    store._n = n
    return store


def save_model(params: MLPParams, path):
    """Write the layer-dimension table followed by each layer's weights and
    bias as row-major little-endian float64."""
    sizes = params.layer_sizes
    parts = [
        MODEL_MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        struct.pack("<I", len(sizes)),
    ]
    parts.extend(struct.pack("<Q", s) for s in sizes)
    for w, b in zip(params.weights, params.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    _finish(path, parts)


def load_model(path) -> MLPParams:
    reader = _open_envelope(path, MODEL_MAGIC)
    n_sizes = reader.u32()
    sizes = [reader.u64() for _ in range(n_sizes)]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(reader.array(fan_out * fan_in).reshape(fan_out, fan_in))
        biases.append(reader.array(fan_out))
    return MLPParams(weights, biases)
