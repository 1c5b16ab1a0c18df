"""Image and grid exports: 8-bit PNG, raw float32 depth, CSV grids.

Everything in the simulator is float; 8-bit quantization happens only here.
Depth images keep full precision in a small header+payload binary because
PNG would truncate them.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import SimError

DEPTH_MAGIC = b"FDEPTHv1"  # followed by uint32 LE height, width, then float32 LE row-major


def to_uint8(image) -> np.ndarray:
    arr = np.asarray(image, dtype=np.float64)
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


def png_bytes(image, compress_level: int = 6) -> bytes:
    """Encode a [0, 1] float image ((H, W) gray or (H, W, 3) RGB) as PNG.

    PNG is lossless at every compress_level; lower levels only trade file
    size for encode speed, so interactive paths can pass 1 while recorded
    datasets keep the default.
    """
    arr = to_uint8(image)
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG",
                                         compress_level=compress_level)
    return buf.getvalue()


def save_png(image, path):
    Path(path).write_bytes(png_bytes(image))


def png_to_array(blob: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(blob)) as im:
        arr = np.asarray(im.convert("RGB") if im.mode not in ("L", "RGB") else im)
    return arr.astype(np.float32) / 255.0


def load_png(path) -> np.ndarray:
    return png_to_array(Path(path).read_bytes())


def depth_bytes(depth) -> bytes:
    arr = np.ascontiguousarray(depth, dtype="<f4")
    if arr.ndim != 2:
        raise SimError(f"depth image must be 2-D, got shape {arr.shape}")
    return DEPTH_MAGIC + struct.pack("<II", arr.shape[0], arr.shape[1]) + arr.tobytes()


def depth_from_bytes(blob: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(blob) < 16 or blob[:8] != DEPTH_MAGIC:
        raise SimError(f"{source} is not a depth image")
    h, w = struct.unpack_from("<II", blob, 8)
    expect = 16 + 4 * h * w
    if len(blob) != expect:
        raise SimError(f"{source}: expected {expect} bytes for {h}x{w}, got {len(blob)}")
    return np.frombuffer(blob, dtype="<f4", offset=16).reshape(h, w).copy()


def save_depth(depth, path):
    Path(path).write_bytes(depth_bytes(depth))


def load_depth(path) -> np.ndarray:
    return depth_from_bytes(Path(path).read_bytes(), source=str(path))


def save_grid_csv(grid, path):
    """One CSV row per range bin; full float precision via repr."""
    arr = np.asarray(grid, dtype=np.float64)
    lines = [",".join(repr(float(v)) for v in row) for row in arr]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_grid_csv(path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8")
    rows = [[float(v) for v in line.split(",")]
            for line in text.splitlines() if line]
    return np.asarray(rows, dtype=np.float64)
