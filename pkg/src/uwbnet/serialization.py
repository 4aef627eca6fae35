"""Binary model files.

Layout (all integers little-endian)::

    magic      4 bytes  b"UWBM"
    version    u16
    total_len  u64      length of the whole file
    header_len u32, header (UTF-8 JSON: spec, seed, metadata)
    n_records  u32
    records    n x (name_len u16, name, rows u32, cols u32, rows*cols float32)
    crc32      u32      over every preceding byte

Parameters, BN running statistics and any extra arrays (e.g. the data
standardisation) are stored as float32.
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .models import Model, ModelSpec, build_model

MAGIC = b"UWBM"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sHQ")


class ArtifactError(ValueError):
    pass


class VersionMismatchError(ArtifactError):
    pass


class TruncatedFileError(ArtifactError):
    pass


class ChecksumError(ArtifactError):
    pass


@dataclass
class ModelArtifact:
    spec: ModelSpec
    seed: int
    params: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION
    byte_size: int = 0

    @property
    def fingerprint(self) -> str | None:
        return self.meta.get("fingerprint")

    def to_model(self) -> Model:
        model = build_model(self.spec, self.seed)
        state = dict(model.state())
        missing = set(state) - set(self.params)
        if missing:
            raise ArtifactError(f"artifact lacks parameter(s): {', '.join(sorted(missing))}")
        for name, tensor in state.items():
            arr = self.params[name]
            if arr.shape != tensor.shape:
                raise ArtifactError(f"{name}: stored shape {arr.shape} != model shape {tensor.shape}")
            tensor.data = arr.astype(np.float64)
        return model


def encode(model: Model, meta: dict | None = None, extra: dict[str, np.ndarray] | None = None) -> bytes:
    header = json.dumps({"spec": model.spec.to_dict(), "seed": model.seed, "meta": meta or {}},
                        sort_keys=True, separators=(",", ":")).encode()
    records = [(name, t.data) for name, t in model.state()]
    records += [(name, np.atleast_2d(arr)) for name, arr in (extra or {}).items()]
    body = bytearray()
    body += struct.pack("<I", len(header)) + header
    body += struct.pack("<I", len(records))
    for name, arr in records:
        raw = name.encode()
        rows, cols = arr.shape
        body += struct.pack("<H", len(raw)) + raw + struct.pack("<II", rows, cols)
        body += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    total = _PREFIX.size + len(body) + 4
    blob = _PREFIX.pack(MAGIC, FORMAT_VERSION, total) + bytes(body)
    return blob + struct.pack("<I", zlib.crc32(blob))


def decode(blob: bytes) -> ModelArtifact:
    if len(blob) < _PREFIX.size + 4:
        raise TruncatedFileError(f"model file is only {len(blob)} bytes")
    magic, version, total = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise ArtifactError(f"not a model file (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"model file format version {version}, this build reads {FORMAT_VERSION}")
    if len(blob) < total:
        raise TruncatedFileError(f"model file truncated: {len(blob)} of {total} bytes")
    if len(blob) > total:
        raise ArtifactError(f"model file has {len(blob) - total} trailing bytes")
    (stored,) = struct.unpack_from("<I", blob, total - 4)
    if zlib.crc32(blob[: total - 4]) != stored:
        raise ChecksumError("model file checksum mismatch")

    pos = _PREFIX.size
    (hlen,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    header = json.loads(blob[pos:pos + hlen])
    pos += hlen
    (n,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    params = {}
    for _ in range(n):
        (nlen,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos:pos + nlen].decode()
        pos += nlen
        rows, cols = struct.unpack_from("<II", blob, pos)
        pos += 8
        size = rows * cols * 4
        params[name] = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=pos).reshape(rows, cols).copy()
        pos += size
    return ModelArtifact(
        spec=ModelSpec.from_dict(header["spec"]),
        seed=int(header["seed"]),
        params=params,
        meta=header["meta"],
        version=version,
        byte_size=len(blob),
    )


def save_model(model: Model, path, meta: dict | None = None,
               extra: dict[str, np.ndarray] | None = None) -> ModelArtifact:
    blob = encode(model, meta, extra)
    Path(path).write_bytes(blob)
    return decode(blob)


def load_artifact(path) -> ModelArtifact:
    return decode(Path(path).read_bytes())


def load_model(path) -> Model:
    return load_artifact(path).to_model()
