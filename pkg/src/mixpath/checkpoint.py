"""Binary model checkpoints.

Layout: magic "CSMO", u32 format version, u64 header length, UTF-8 JSON
header (vocabulary, backbone config, training provenance, parameter
manifest), then each parameter as little-endian float32 row-major bytes
in manifest order.  Training runs in float64; storage is float32, so a
load/save round trip is byte-identical apart from provenance timestamps.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .autodiff import Tensor
from .backbone import BackboneConfig, BackboneModel, _param_specs
from .text import Vocab

MAGIC = b"CSMO"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(
    model: BackboneModel,
    path: Union[str, Path],
    provenance: Optional[dict] = None,
) -> None:
    names = [name for name, _ in _param_specs(model.config)]
    header = {
        "format_version": FORMAT_VERSION,
        "vocab": model.config.vocab.to_dict(),
        "backbone": model.config.to_dict(),
        "provenance": provenance or {},
        "params": [
            {"name": name, "shape": list(model.params[name].shape)} for name in names
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", FORMAT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for name in names:
            fh.write(np.ascontiguousarray(model.params[name].values, dtype="<f4").tobytes())


def load_checkpoint(path: Union[str, Path]) -> tuple[BackboneModel, dict]:
    """Returns the model (float32 values promoted to float64) and provenance."""
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}")
    version, header_len = struct.unpack("<IQ", blob[4:16])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
    vocab = Vocab.from_dict(header["vocab"])
    config = BackboneConfig.from_dict(header["backbone"], vocab)
    offset = 16 + header_len
    params: dict[str, Tensor] = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        offset += 4 * count
        params[entry["name"]] = Tensor(
            arr.astype(np.float64).reshape(shape), is_param=True, name=entry["name"]
        )
    if offset != len(blob):
        raise CheckpointError(f"{path}: trailing bytes after parameter payload")
    expected = {name for name, _ in _param_specs(config)}
    if expected != set(params):
        raise CheckpointError(f"{path}: parameter manifest does not match config")
    return BackboneModel(config=config, params=params), header["provenance"]


def payload_fingerprint(path: Union[str, Path]) -> bytes:
    """Checkpoint bytes with provenance cleared, for equality checks."""
    blob = Path(path).read_bytes()
    version, header_len = struct.unpack("<IQ", blob[4:16])
    header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
    header["provenance"] = {}
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<IQ", version, len(header_bytes)) + header_bytes + blob[16 + header_len :]
