"""Quick-look rendering: one B-scan as a grayscale image with overlaid
boundary polylines, written as binary PPM."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .surfaces import Surface
from .volume import Volume

BOUNDARY_COLORS = {
    "ilm": (255, 64, 64),
    "isos": (64, 220, 64),
    "rpe": (80, 128, 255),
}
_FALLBACK_COLORS = [(255, 255, 0), (255, 0, 255), (0, 255, 255)]


def render_bscan(
    volume: Volume, surfaces: dict[str, Surface], slice_index: int
) -> np.ndarray:
    """Rasterize B-scan y=slice_index as (nz, nx, 3) uint8 with overlays.

    Rows are depth (shallow at the top), columns are x.  Each surface is
    drawn as a connected polyline: consecutive columns whose rounded depths
    differ by more than one pixel get a vertical joining segment.
    """
    nx, ny, nz = volume.dims
    if not 0 <= slice_index < ny:
        raise ValueError(f"slice index {slice_index} outside [0, {ny})")
    gray = np.clip(np.rint(volume.data[:, slice_index, :] * 255.0), 0, 255)
    img = np.repeat(gray.T.astype(np.uint8)[:, :, None], 3, axis=2)
    fallback = 0
    for name, surf in surfaces.items():
        color = BOUNDARY_COLORS.get(name.lower())
        if color is None:
            color = _FALLBACK_COLORS[fallback % len(_FALLBACK_COLORS)]
            fallback += 1
        col = np.array(color, dtype=np.uint8)
        prev_r = None
        for x in range(nx):
            if not surf.valid[x, slice_index]:
                prev_r = None
                continue
            r = int(np.clip(np.rint(surf.z[x, slice_index]), 0, nz - 1))
            img[r, x] = col
            if prev_r is not None and abs(r - prev_r) > 1:
                lo, hi = sorted((r, prev_r))
                img[lo + 1 : hi, x] = col
            prev_r = r
    return img


def write_ppm(image: np.ndarray, path) -> None:
    """Binary PPM (P6) writer for (rows, cols, 3) uint8 images."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValueError(f"expected (rows, cols, 3) uint8, got {image.shape} {image.dtype}")
    rows, cols = image.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{cols} {rows}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(image).tobytes())


def read_ppm(path) -> np.ndarray:
    """Read back a binary PPM written by write_ppm."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P6":
        raise ValueError(f"{path}: not a binary PPM")
    cols, rows = (int(t) for t in parts[1].split())
    maxval = int(parts[2])
    if maxval != 255:
        raise ValueError(f"{path}: unsupported max value {maxval}")
    pixels = np.frombuffer(parts[3], dtype=np.uint8, count=rows * cols * 3)
    return pixels.reshape(rows, cols, 3).copy()
