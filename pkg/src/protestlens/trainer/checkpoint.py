"""``.plck`` checkpoints.

Layout: u64 little-endian header length, UTF-8 JSON header, then the payload
of little-endian f32 tensors. The header carries ``magic``, ``format_version``,
``model_kind``, the model ``config``, a ``tensors`` table of
name -> {dtype, shape, offset, length} (offsets relative to the payload start)
and a ``metrics`` snapshot.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

from ..errors import IncompatibleCheckpointError, IntegrityError
from ..tensor import Tensor
from ..text.model import TextClassifier, TextModelConfig, init_text_params
from ..vision.model import VisionClassifier, VisionModelConfig, init_vision_params

MAGIC = "PLCK"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<Q")


def _header_for(model, metrics: dict | None) -> tuple[dict, list[tuple[str, np.ndarray]]]:
    tensors, blobs = {}, []
    offset = 0
    for name in sorted(model.params):
        arr = np.ascontiguousarray(model.params[name].data, dtype="<f4")
        tensors[name] = {"dtype": "f32", "shape": list(arr.shape), "offset": offset, "length": arr.nbytes}
        blobs.append((name, arr))
        offset += arr.nbytes
    header = {
        "magic": MAGIC,
        "format_version": FORMAT_VERSION,
        "model_kind": model.kind,
        "config": model.config.to_dict(),
        "tensors": tensors,
        "metrics": metrics or {},
    }
    return header, blobs


def save_checkpoint(model, path: str | Path, metrics: dict | None = None) -> None:
    header, blobs = _header_for(model, metrics)
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_PREFIX.pack(len(raw)))
        f.write(raw)
        for _, arr in blobs:
            f.write(arr.tobytes())


def _validate_table(table, payload_len: int) -> list[tuple[str, dict]]:
    if not isinstance(table, dict):
        raise IntegrityError("header 'tensors' must be an object")
    entries = []
    for name, e in table.items():
        if not isinstance(e, dict) or e.get("dtype") != "f32":
            raise IntegrityError(f"tensor {name!r}: only f32 entries are supported")
        shape, off, length = e.get("shape"), e.get("offset"), e.get("length")
        if not (isinstance(shape, list) and all(isinstance(d, int) and d > 0 for d in shape)):
            raise IntegrityError(f"tensor {name!r}: invalid shape {shape!r}")
        if not (isinstance(off, int) and isinstance(length, int) and off >= 0):
            raise IntegrityError(f"tensor {name!r}: invalid offset/length")
        if length != 4 * math.prod(shape):
            raise IntegrityError(f"tensor {name!r}: length {length} does not match shape {shape}")
        entries.append((name, e))
    entries.sort(key=lambda ne: ne[1]["offset"])
    cursor = 0
    for name, e in entries:
        if e["offset"] != cursor:
            raise IntegrityError(f"tensor {name!r}: offset {e['offset']} overlaps or leaves a gap (expected {cursor})")
        cursor += e["length"]
    if cursor != payload_len:
        raise IntegrityError(f"payload is {payload_len} bytes but the tensor table declares {cursor}")
    return entries


def read_header(path: str | Path) -> tuple[dict, int]:
    """Parse and validate the header; returns (header, payload start byte)."""
    path = Path(path)
    try:
        size = path.stat().st_size
        f = open(path, "rb")
    except OSError as exc:
        raise IntegrityError(f"cannot open checkpoint {path}: {exc.strerror}") from None
    with f:
        prefix = f.read(_PREFIX.size)
        if len(prefix) < _PREFIX.size:
            raise IntegrityError(f"{path}: file too short for the header-length prefix ({size} bytes)")
        (hlen,) = _PREFIX.unpack(prefix)
        if hlen > size - _PREFIX.size:
            raise IntegrityError(f"{path}: header length {hlen} exceeds file size {size}")
        raw = f.read(hlen)
    try:
        header = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise IntegrityError(f"{path}: header is not UTF-8 (byte {_PREFIX.size + exc.start})") from None
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"{path}: corrupt header JSON at byte {_PREFIX.size + exc.pos}: {exc.msg}") from None
    if not isinstance(header, dict) or header.get("magic") != MAGIC:
        raise IntegrityError(f"{path}: not a {MAGIC} checkpoint")
    if header.get("format_version") != FORMAT_VERSION:
        raise IncompatibleCheckpointError(
            f"{path}: format_version {header.get('format_version')!r} is not supported (expected {FORMAT_VERSION})")
    if header.get("model_kind") not in ("text", "vision"):
        raise IntegrityError(f"{path}: unknown model_kind {header.get('model_kind')!r}")
    if not isinstance(header.get("config"), dict):
        raise IntegrityError(f"{path}: header lacks a model config object")
    if not isinstance(header.get("metrics", {}), dict):
        raise IntegrityError(f"{path}: header metrics must be an object")
    start = _PREFIX.size + hlen
    _validate_table(header.get("tensors"), size - start)
    return header, start


def load_checkpoint(path: str | Path):
    """Rebuild the model stored at ``path``; validates layout before reading tensors."""
    header, start = read_header(path)
    kind = header["model_kind"]
    try:
        if kind == "text":
            config = TextModelConfig.from_dict(header["config"])
            expected = init_text_params(config, shapes_only=True)
        else:
            config = VisionModelConfig.from_dict(header["config"])
            expected = init_vision_params(config, shapes_only=True)
    except (TypeError, ValueError) as exc:
        raise IntegrityError(f"{path}: invalid model config ({exc})") from None
    table = header["tensors"]
    if set(table) != set(expected):
        missing, extra = sorted(set(expected) - set(table)), sorted(set(table) - set(expected))
        raise IntegrityError(f"{path}: tensor names do not match the model (missing {missing}, extra {extra})")
    for name, shape in expected.items():
        if tuple(table[name]["shape"]) != shape:
            raise IntegrityError(f"{path}: tensor {name!r} has shape {table[name]['shape']}, model expects {list(shape)}")
    with open(path, "rb") as f:
        f.seek(start)
        payload = f.read()
    params = {}
    for name in expected:
        e = table[name]
        arr = np.frombuffer(payload, dtype="<f4", count=e["length"] // 4, offset=e["offset"])
        if not np.all(np.isfinite(arr)):
            raise IntegrityError(f"{path}: tensor {name!r} holds non-finite values")
        params[name] = Tensor(arr.astype(np.float32).reshape(e["shape"]), requires_grad=True)
    model_cls = TextClassifier if kind == "text" else VisionClassifier
    model = model_cls(config, params=params)
    model.metrics = header.get("metrics", {})
    return model


def checkpoint_listing(path: str | Path) -> str:
    """Human-readable header summary, one tensor per line in payload order."""
    header, start = read_header(path)
    lines = [
        f"format_version\t{header['format_version']}",
        f"model_kind\t{header['model_kind']}",
        f"payload_start\t{start}",
        "name\tdtype\tshape\toffset\tlength",
    ]
    for name, e in sorted(header["tensors"].items(), key=lambda kv: kv[1]["offset"]):
        shape = "x".join(str(d) for d in e["shape"])
        lines.append(f"{name}\t{e['dtype']}\t{shape}\t{e['offset']}\t{e['length']}")
    return "\n".join(lines) + "\n"
