"""Boundary surfaces over the (x, y) grid and the operators that clean them.

A surface stores one depth value per A-scan column plus a validity flag;
invalid cells carry NaN.  Extraction is a per-column argmax of the enhanced
volume restricted to a per-column depth window (SearchMask).  Cleanup is a
median-deviation outlier test, diffusion inpainting of the holes, and a
small lateral box smoothing.  File formats: CSV with an x,y,z,valid header,
or a raw little-endian float32 grid with NaN marking invalid cells.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .volume import Volume


@dataclass(eq=False)
class Surface:
    """Depth z(x, y) in voxels (float, NaN where invalid) plus validity."""

    z: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64)
        if z.ndim != 2 or min(z.shape) < 1:
            raise ValueError(f"surface z must be 2D and non-empty, got shape {z.shape}")
        valid = np.asarray(self.valid, dtype=bool)
        if valid.shape != z.shape:
            raise ValueError(f"valid shape {valid.shape} != z shape {z.shape}")
        z = z.copy()
        z[~valid] = np.nan
        self.z = z
        self.valid = valid

    @classmethod
    def full(cls, z: np.ndarray) -> "Surface":
        z = np.asarray(z, dtype=np.float64)
        return cls(z=z, valid=np.ones(z.shape, dtype=bool))

    @property
    def nx(self) -> int:
        return self.z.shape[0]

    @property
    def ny(self) -> int:
        return self.z.shape[1]

    def copy(self) -> "Surface":
        return Surface(z=self.z.copy(), valid=self.valid.copy())


@dataclass(eq=False)
class SearchMask:
    """Per-column half-open depth window [k_lo, k_hi) within nz planes.

    Columns with k_lo >= k_hi are excluded from extraction entirely.
    """

    k_lo: np.ndarray
    k_hi: np.ndarray
    nz: int

    def __post_init__(self):
        k_lo = np.asarray(self.k_lo, dtype=np.int32)
        k_hi = np.asarray(self.k_hi, dtype=np.int32)
        if k_lo.ndim != 2 or k_lo.shape != k_hi.shape:
            raise ValueError("k_lo and k_hi must be matching 2D arrays")
        if self.nz < 1:
            raise ValueError(f"nz must be >= 1, got {self.nz}")
        if k_lo.min() < 0 or k_hi.max() > self.nz:
            raise ValueError(f"window bounds must lie within [0, {self.nz}]")
        self.k_lo = k_lo
        self.k_hi = k_hi

    @classmethod
    def full(cls, nx: int, ny: int, nz: int) -> "SearchMask":
        return cls(
            k_lo=np.zeros((nx, ny), dtype=np.int32),
            k_hi=np.full((nx, ny), nz, dtype=np.int32),
            nz=nz,
        )

    @property
    def is_full(self) -> bool:
        return bool((self.k_lo == 0).all() and (self.k_hi == self.nz).all())

    def column_valid(self) -> np.ndarray:
        return self.k_lo < self.k_hi

    def as_bool(self) -> np.ndarray:
        """Materialize the mask as a boolean (nx, ny, nz) array."""
        k = np.arange(self.nz, dtype=np.int32)[None, None, :]
        return (k >= self.k_lo[:, :, None]) & (k < self.k_hi[:, :, None])


def argmax_per_ascan(intensity: Volume, mask: SearchMask | None = None) -> Surface:
    """First index of the maximum along depth, per column, within the mask.

    Ties resolve to the shallowest tied index.  Columns whose window is
    empty come back invalid.
    """
    nx, ny, nz = intensity.dims
    if mask is None:
        mask = SearchMask.full(nx, ny, nz)
    if mask.nz != nz or mask.k_lo.shape != (nx, ny):
        raise ValueError(
            f"mask geometry {mask.k_lo.shape}x{mask.nz} does not match volume {intensity.dims}"
        )
    scores = np.where(mask.as_bool(), intensity.data, -np.inf)
    idx = scores.argmax(axis=2)
    valid = mask.column_valid()
    z = idx.astype(np.float64)
    z[~valid] = np.nan
    return Surface(z=z, valid=valid)


def reject_outliers(surface: Surface, tau: float, window: int = 5) -> Surface:
    """Invalidate cells deviating from their local median by more than tau.

    The median is taken over an odd window x window neighborhood (the cell
    itself included; cells outside the grid or already invalid are ignored).
    Surviving cells keep their exact z; nothing is re-estimated here.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    window = int(window)
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    h = window // 2
    z = np.where(surface.valid, surface.z, np.nan)
    padded = np.pad(z, h, mode="constant", constant_values=np.nan)
    tiles = sliding_window_view(padded, (window, window))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN tiles
        med = np.nanmedian(tiles, axis=(-2, -1))
    deviation = np.abs(z - med)
    keep = surface.valid & ~(deviation > tau)
    return Surface(z=np.where(keep, surface.z, np.nan), valid=keep)


def fill_from_neighbors(z: np.ndarray) -> np.ndarray:
    """Fill NaN cells by repeated averaging of finite 4-neighbors.

    Each sweep fills every hole that touches at least one finite cell with
    the mean of its finite neighbors, then repeats on the updated grid until
    nothing is left.  Sweeps update simultaneously, so the result does not
    depend on traversal order.
    """
    z = z.copy()
    while True:
        hole = np.isnan(z)
        if not hole.any():
            return z
        acc = np.zeros_like(z)
        cnt = np.zeros_like(z)
        for src, dst in (
            (np.s_[1:, :], np.s_[:-1, :]),
            (np.s_[:-1, :], np.s_[1:, :]),
            (np.s_[:, 1:], np.s_[:, :-1]),
            (np.s_[:, :-1], np.s_[:, 1:]),
        ):
            nb = z[src]
            ok = ~np.isnan(nb)
            a = acc[dst]
            c = cnt[dst]
            a[ok] += nb[ok]
            c[ok] += 1.0
        fill = hole & (cnt > 0)
        if not fill.any():  # no finite cell anywhere
            raise ValueError("cannot inpaint: surface has no valid cells")
        z[fill] = acc[fill] / cnt[fill]


def inpaint_and_smooth(
    surface: Surface, smooth_radius: int = 2, max_z: float | None = None
) -> Surface:
    """Produce a total surface: diffusion-fill holes, then box smooth.

    Smoothing is a separable (2r+1)^2 lateral box average with replicated
    edges; radius 0 skips it.  When ``max_z`` is given the result is clamped
    into [0, max_z].  Requires at least one valid cell.
    """
    if not surface.valid.any():
        raise ValueError("cannot inpaint: surface has no valid cells")
    if smooth_radius < 0:
        raise ValueError(f"smooth_radius must be >= 0, got {smooth_radius}")
    z = fill_from_neighbors(np.where(surface.valid, surface.z, np.nan))
    if smooth_radius > 0:
        n = 2 * smooth_radius + 1
        box = np.full(n, 1.0 / n, dtype=np.float64)
        z = ndimage.correlate1d(z, box, axis=0, mode="nearest")
        z = ndimage.correlate1d(z, box, axis=1, mode="nearest")
    if max_z is not None:
        z = np.clip(z, 0.0, max_z)
    return Surface(z=z, valid=np.ones_like(surface.valid))


def truncate_above_surface(
    mask: SearchMask, surface: Surface, margin: int, side: str = "keep_above"
) -> SearchMask:
    """Narrow a search mask using an already-extracted reference surface.

    "keep_above" caps each column at round(z) - margin (exclusive), removing
    the reference boundary and everything below it; "keep_below" raises the
    floor to round(z) + margin.  The window only ever narrows.  The
    reference surface must be total (all cells valid).
    """
    if not surface.valid.all():
        raise ValueError("reference surface must be fully valid")
    if surface.z.shape != mask.k_lo.shape:
        raise ValueError(
            f"surface shape {surface.z.shape} != mask shape {mask.k_lo.shape}"
        )
    margin = int(margin)
    if margin < 0:
        raise ValueError(f"margin must be >= 0, got {margin}")
    zr = np.rint(surface.z).astype(np.int64)
    if side == "keep_above":
        cap = np.clip(zr - margin, 0, mask.nz).astype(np.int32)
        return SearchMask(
            k_lo=mask.k_lo.copy(), k_hi=np.minimum(mask.k_hi, cap), nz=mask.nz
        )
    if side == "keep_below":
        floor = np.clip(zr + margin, 0, mask.nz).astype(np.int32)
        return SearchMask(
            k_lo=np.maximum(mask.k_lo, floor), k_hi=mask.k_hi.copy(), nz=mask.nz
        )
    raise ValueError(f"side must be 'keep_above' or 'keep_below', got {side!r}")


# ---------------------------------------------------------------------------
# surface file formats


def save_surface(surface: Surface, path, fmt: str = "csv") -> None:
    """Write a surface as CSV (x,y,z,valid) or a raw float32 grid.

    CSV rows are ordered y-major (all x for y=0, then y=1, ...); z is
    rendered with repr so values round-trip exactly, and invalid cells get
    z "nan" and valid 0.  The f32 grid holds nx*ny little-endian floats in
    the same y-major order with NaN at invalid cells; the grid shape is not
    self-describing and must be supplied again at load time.
    """
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write("x,y,z,valid\n")
            for y in range(surface.ny):
                for x in range(surface.nx):
                    zv = float(surface.z[x, y])
                    f.write(f"{x},{y},{zv!r},{int(surface.valid[x, y])}\n")
    elif fmt == "f32":
        grid = np.where(surface.valid, surface.z, np.nan).astype("<f4")
        np.ascontiguousarray(grid.T).tofile(path)
    else:
        raise ValueError(f"fmt must be 'csv' or 'f32', got {fmt!r}")


def load_surface(path, fmt: str = "csv", dims: tuple[int, int] | None = None) -> Surface:
    """Read a surface written by save_surface.

    The f32 grid format needs ``dims`` = (nx, ny); CSV is self-describing.
    """
    path = Path(path)
    if fmt == "csv":
        xs, ys, zs, vs = [], [], [], []
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["x", "y", "z", "valid"]:
                raise ValueError(f"{path}: expected header 'x,y,z,valid', got {header}")
            for row in reader:
                if not row:
                    continue
                if len(row) != 4:
                    raise ValueError(f"{path}: malformed row {row}")
                xs.append(int(row[0]))
                ys.append(int(row[1]))
                zs.append(float(row[2]))
                vs.append(int(row[3]) != 0)
        if not xs:
            raise ValueError(f"{path}: surface file has no data rows")
        nx = max(xs) + 1
        ny = max(ys) + 1
        if len(xs) != nx * ny:
            raise ValueError(f"{path}: expected {nx * ny} rows, got {len(xs)}")
        z = np.full((nx, ny), np.nan)
        valid = np.zeros((nx, ny), dtype=bool)
        z[xs, ys] = zs
        valid[xs, ys] = vs
        return Surface(z=z, valid=valid)
    if fmt == "f32":
        if dims is None:
            raise ValueError("f32 grid loading requires dims=(nx, ny)")
        nx, ny = dims
        flat = np.fromfile(path, dtype="<f4")
        if flat.size != nx * ny:
            raise ValueError(
                f"{path}: expected {nx * ny} float32 values, found {flat.size}"
            )
        z = flat.reshape(ny, nx).T.astype(np.float64)
        return Surface(z=z, valid=np.isfinite(z))
    raise ValueError(f"fmt must be 'csv' or 'f32', got {fmt!r}")
