"""Field files, images and run manifests.

Raw format: the 8-byte magic ``b"WTFBF\\x00\\x01\\x00"`` followed by the
``(M+1)**2`` field values as row-major little-endian float64 (row index k1).
Images are 16-bit grayscale after affine min-max normalization; the
normalization constants go to the manifest, never into the image.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

RAW_MAGIC = b"WTFBF\x00\x01\x00"
MANIFEST_SCHEMA = "wtfbf-manifest/1"


def atomic_write(path, data: bytes) -> None:
    """Write ``data`` to a temporary file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def raw_bytes(values: np.ndarray) -> bytes:
    v = np.ascontiguousarray(values, dtype="<f8")
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError(f"expected a square 2-D field, got shape {v.shape}")
    return RAW_MAGIC + v.tobytes(order="C")


def write_raw(path, values: np.ndarray) -> None:
    atomic_write(path, raw_bytes(values))


def read_raw(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:8] != RAW_MAGIC:
        raise ValueError(f"{path}: not a raw field file (bad magic)")
    count = (len(data) - 8) // 8
    side = int(round(count ** 0.5))
    if side * side != count or len(data) != 8 + 8 * count:
        raise ValueError(f"{path}: payload of {len(data) - 8} bytes is not a square float64 grid")
    return np.frombuffer(data, dtype="<f8", offset=8).reshape(side, side).copy()


def normalize16(values: np.ndarray):
    """Map ``values`` affinely onto ``0..65535``; returns ``(image, lo, hi)``."""
    lo, hi = float(np.min(values)), float(np.max(values))
    span = hi - lo
    if span == 0.0:
        img = np.zeros(values.shape, dtype=np.uint16)
    else:
        img = np.rint((values - lo) * (65535.0 / span)).astype(np.uint16)
    return img, lo, hi


def pgm_bytes(image: np.ndarray) -> bytes:
    h, w = image.shape
    header = f"P5\n{w} {h}\n65535\n".encode("ascii")
    return header + image.astype(">u2").tobytes()


def png_bytes(image: np.ndarray) -> bytes:
    from io import BytesIO

    from PIL import Image

    buf = BytesIO()
    Image.fromarray(image.astype(np.uint16)).save(buf, format="PNG")
    return buf.getvalue()


def write_field(path, values: np.ndarray, fmt: str) -> dict:
    """Write one field in ``fmt`` (raw, pgm or png); returns file metadata."""
    meta = {"path": Path(path).name, "format": fmt}
    if fmt == "raw":
        data = raw_bytes(values)
    elif fmt in ("pgm", "png"):
        img, lo, hi = normalize16(values)
        meta["normalization"] = {"min": lo, "max": hi, "levels": 65535}
        data = pgm_bytes(img) if fmt == "pgm" else png_bytes(img)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    atomic_write(path, data)
    meta["sha256"] = hashlib.sha256(data).hexdigest()
    return meta


def write_json(path, obj) -> None:
    atomic_write(path, (json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n").encode())


def read_json(path):
    return json.loads(Path(path).read_text())


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
