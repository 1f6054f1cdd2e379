"""Image decoding (PPM P6, raw PLIM tensors, PNG via Pillow when present),
bilinear resizing and the CSV label manifest."""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DecodeError
from .model import DEFAULT_ATTRIBUTES, ImageExample

PLIM_MAGIC = b"PLIM"
_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def write_plim(path: str | Path, pixels: np.ndarray) -> None:
    pixels = np.asarray(pixels, dtype="<f4")
    if pixels.ndim != 3:
        raise DecodeError(f"PLIM images are H x W x C, got {pixels.shape}")
    h, w, c = pixels.shape
    with open(path, "wb") as f:
        f.write(PLIM_MAGIC + struct.pack("<III", h, w, c))
        f.write(pixels.tobytes())


def decode_plim(raw: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(raw) < 16 or raw[:4] != PLIM_MAGIC:
        raise DecodeError(f"{source}: not a PLIM file")
    h, w, c = struct.unpack("<III", raw[4:16])
    need = 16 + 4 * h * w * c
    if len(raw) != need:
        raise DecodeError(f"{source}: PLIM header declares {need} bytes, file has {len(raw)}")
    arr = np.frombuffer(raw, dtype="<f4", offset=16).reshape(h, w, c).astype(np.float32)
    if not np.all(np.isfinite(arr)) or arr.min(initial=0) < 0 or arr.max(initial=0) > 1:
        raise DecodeError(f"{source}: PLIM values must be finite and within [0, 1]")
    return arr


def write_ppm(path: str | Path, pixels: np.ndarray) -> None:
    """8-bit binary PPM from [H, W, 3] floats in [0, 1]."""
    pixels = np.asarray(pixels)
    h, w, _ = pixels.shape
    data = np.clip(np.round(pixels * 255), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def decode_ppm(raw: bytes, source: str = "<bytes>") -> np.ndarray:
    if raw[:2] != b"P6":
        raise DecodeError(f"{source}: not a binary PPM (P6)")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and raw[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise DecodeError(f"{source}: malformed PPM header")
        fields.append(int(raw[start:pos]))
    pos += 1  # single whitespace byte before the raster
    w, h, maxval = fields
    if not 0 < maxval < 65536:
        raise DecodeError(f"{source}: PPM maxval {maxval} out of range")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    need = w * h * 3 * dtype.itemsize
    if len(raw) - pos < need:
        raise DecodeError(f"{source}: PPM raster truncated ({len(raw) - pos} of {need} bytes)")
    arr = np.frombuffer(raw, dtype=dtype, count=w * h * 3, offset=pos).reshape(h, w, 3)
    return arr.astype(np.float32) / maxval


def _decode_png(path: Path) -> np.ndarray:
    try:
        from PIL import Image
    except ImportError:  # pragma: no cover - Pillow is optional
        raise DecodeError(f"{path}: PNG decoding needs Pillow") from None
    with Image.open(path) as im:
        if im.mode not in ("RGB", "RGBA", "L"):
            im = im.convert("RGB")
        arr = np.asarray(im)
    if arr.ndim == 2:
        raise DecodeError(f"{path}: expected 3 channels, got 1")
    if arr.shape[-1] == 4:
        arr = arr[..., :3]
    return arr.astype(np.float32) / 255.0


def decode_image(path: str | Path) -> np.ndarray:
    """Decode to [H, W, 3] float32 RGB in [0, 1]."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DecodeError(f"cannot read image {path}: {exc.strerror}") from None
    if raw[:4] == PLIM_MAGIC:
        arr = decode_plim(raw, str(path))
    elif raw[:2] == b"P6":
        arr = decode_ppm(raw, str(path))
    elif raw[:8] == _PNG_SIG:
        arr = _decode_png(path)
    else:
        raise DecodeError(f"{path}: unrecognised image format")
    if arr.shape[-1] != 3:
        raise DecodeError(f"{path}: expected 3 channels, got {arr.shape[-1]}")
    return arr


def resize_bilinear(img: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize of [H, W, C] to [size, size, C] with half-pixel centres."""
    h, w = img.shape[:2]
    if (h, w) == (size, size):
        return img.astype(np.float32, copy=False)

    def axis(n_in):
        pos = (np.arange(size) + 0.5) * n_in / size - 0.5
        pos = np.clip(pos, 0, n_in - 1)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, (pos - lo).astype(np.float32)

    y0, y1, fy = axis(h)
    x0, x1, fx = axis(w)
    top = img[y0][:, x0] * (1 - fx)[None, :, None] + img[y0][:, x1] * fx[None, :, None]
    bot = img[y1][:, x0] * (1 - fx)[None, :, None] + img[y1][:, x1] * fx[None, :, None]
    out = top * (1 - fy)[:, None, None] + bot * fy[:, None, None]
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def load_image(path: str | Path, image_size: int) -> np.ndarray:
    return resize_bilinear(decode_image(path), image_size)


def _parse_label(cell: str, name: str, source: str):
    cell = cell.strip()
    if cell == "":
        return None
    try:
        val = float(cell)
    except ValueError:
        raise DecodeError(f"{source}: label {name}={cell!r} is not a number") from None
    if not 0.0 <= val <= 1.0:
        raise DecodeError(f"{source}: label {name}={val} outside [0, 1]")
    return val


def read_label_manifest(path: str | Path, attributes: Sequence[str] = DEFAULT_ATTRIBUTES) -> list[dict]:
    """Rows of ``path,protest,violence,sign,police``; blank cells are absent labels.

    Returns dicts with a resolved ``path`` and a ``labels`` mapping.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DecodeError(f"cannot read manifest {path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "path" not in reader.fieldnames:
            raise DecodeError(f"{path}: manifest header must start with 'path'")
        missing = [a for a in attributes if a not in reader.fieldnames]
        if missing:
            raise DecodeError(f"{path}: manifest lacks columns {missing}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            src = f"{path}:{lineno}"
            labels = {a: _parse_label(row[a] or "", a, src) for a in attributes}
            if labels.get("protest") is None:
                raise DecodeError(f"{src}: protest label is required")
            img_path = Path(row["path"])
            if not img_path.is_absolute():
                img_path = path.parent / img_path
            rows.append({"path": img_path, "labels": labels})
    return rows


def load_examples(manifest: str | Path, image_size: int,
                  attributes: Sequence[str] = DEFAULT_ATTRIBUTES) -> list[ImageExample]:
    return [ImageExample(load_image(r["path"], image_size), r["labels"])
            for r in read_label_manifest(manifest, attributes)]


def write_label_manifest(path: str | Path, rows: Sequence[tuple[str, dict]],
                         attributes: Sequence[str] = DEFAULT_ATTRIBUTES) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path", *attributes])
        for img_path, labels in rows:
            cells = ["" if labels.get(a) is None else format(labels[a], "g") for a in attributes]
            writer.writerow([img_path, *cells])
