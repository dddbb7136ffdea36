"""File formats: rasters, Middlebury ``.flo`` flow and plain-text kernels."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .imgcore import as_kernel

FLO_MAGIC = 202021.25


class FormatError(ValueError):
    """Raised when a file does not match its expected layout."""


def read_image(path) -> np.ndarray:
    """Load an 8-bit PGM/PPM/PNG image as float64 in [0, 1].

    Grayscale files give ``(H, W)`` arrays, colour files ``(H, W, 3)``.
    """
    try:
        with PILImage.open(path) as im:
            if im.mode in ("L", "P", "1"):
                arr = np.asarray(im.convert("L"))
            elif im.mode == "LA":
                arr = np.asarray(im.convert("L"))
            else:
                arr = np.asarray(im.convert("RGB"))
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"cannot read image {path}: {exc}") from exc
    return arr.astype(np.float64) / 255.0


def write_image(path, img: np.ndarray) -> None:
    arr = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    PILImage.fromarray(arr).save(path)


def write_flo(path, flow: np.ndarray) -> None:
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must have shape (H, W, 2), got {flow.shape}")
    if not np.all(np.isfinite(flow)):
        raise ValueError("flow contains non-finite values")
    h, w = flow.shape[:2]
    with open(path, "wb") as f:
        f.write(struct.pack("<fii", FLO_MAGIC, w, h))
        f.write(flow.astype("<f4").tobytes())


def read_flo(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise FormatError(f"{path}: truncated header")
    magic, w, h = struct.unpack("<fii", data[:12])
    if magic != FLO_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if w < 1 or h < 1:
        raise FormatError(f"{path}: invalid dimensions {w}x{h}")
    expected = 12 + 8 * w * h
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    flow = np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w, 2)
    return flow.astype(np.float32)


def write_kernel(path, k: np.ndarray) -> None:
    k = as_kernel(k)
    lines = [str(k.shape[0])]
    lines += [" ".join(f"{v:.10g}" for v in row) for row in k]
    Path(path).write_text("\n".join(lines) + "\n")


def read_kernel(path) -> np.ndarray:
    """Read a kernel text file and renormalise it."""
    from .deconv import normalize_kernel

    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows:
        raise FormatError(f"{path}: empty kernel file")
    try:
        size = int(rows[0][0])
        values = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if size < 1 or size % 2 == 0 or values.shape != (size, size):
        raise FormatError(f"{path}: expected {size}x{size} odd-sized grid")
    return normalize_kernel(values)
