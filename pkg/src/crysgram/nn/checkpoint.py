"""Versioned checkpoint files: JSON header + flat little-endian float32 blob.

Header carries the config, a parameter manifest (names, shapes, offsets),
the global step, the RNG seed, and the SHA-256 of the blob. Saving a
loaded state reproduces the file byte for byte.
"""

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .encoder import EncoderConfig, EncoderState

MAGIC = b"CGCK0001"
FORMAT_VERSION = 1


def save_state(state, path, global_step=0, rng_seed=0, extra=None):
    """Write an EncoderState to `path`; returns the blob's SHA-256 hex."""
    chunks = []
    manifest = []
    offset = 0
    for name, param in state.named_parameters():
        raw = np.ascontiguousarray(param.data, dtype="<f4").tobytes()
        manifest.append({"name": name, "shape": list(param.data.shape),
                         "offset": offset, "size": param.data.size})
        chunks.append(raw)
        offset += len(raw)
    blob = b"".join(chunks)
    digest = hashlib.sha256(blob).hexdigest()
    header = {
        "format_version": FORMAT_VERSION,
        "config": state.config.to_dict(),
        "global_step": int(global_step),
        "rng_seed": int(rng_seed),
        "blob_sha256": digest,
        "parameters": manifest,
    }
    if extra:
        header["extra"] = extra
    header_bytes = json.dumps(header, sort_keys=True,
                              separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob)
    return digest


def read_header(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        return json.loads(fh.read(header_len).decode("utf-8"))


def load_state(path):
    """Read a checkpoint; returns (state, header dict)."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        blob = fh.read()
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported format version {header.get('format_version')}")
    digest = hashlib.sha256(blob).hexdigest()
    if digest != header["blob_sha256"]:
        raise CheckpointError(f"{path}: blob checksum mismatch")

    config = EncoderConfig.from_dict(header["config"])
    state = EncoderState.__new__(EncoderState)
    state.config = config
    state.seed = header.get("rng_seed", 0)
    state.params = {}
    from .tensor import Tensor

    for entry in header["parameters"]:
        name, shape = entry["name"], tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        raw = blob[start:start + 4 * count]
        if len(raw) != 4 * count:
            raise CheckpointError(f"{path}: truncated blob at {name}")
        data = np.frombuffer(raw, dtype="<f4").reshape(shape)
        state.params[name] = Tensor.parameter(
            data.astype(config.np_dtype), name)
    return state, header
