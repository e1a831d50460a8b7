"""Separable 3D filtering plus the kernels used for boundary detection.

All filters run in correlation orientation (no kernel flip) and replicate
edge samples at the borders, so a flat region produces no spurious response
near the volume faces.  ``convolve_separable`` is the fast path used by the
pipeline; ``convolve_direct`` applies a dense kernel by explicit summation
over taps and exists as an independent reference for cross-checking the
separable implementation.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .volume import Volume


def _check_taps(taps: np.ndarray, label: str) -> np.ndarray:
    taps = np.asarray(taps, dtype=np.float64)
    if taps.ndim != 1 or taps.size < 1 or taps.size % 2 == 0:
        raise ValueError(f"{label} taps must be a 1D odd-length array, got shape {taps.shape}")
    return taps


@dataclass(frozen=True, eq=False)
class SeparableKernel:
    """Outer-product 3D kernel given as one tap vector per axis.

    Each vector has odd length and is centered on its middle element.
    """

    kx: np.ndarray
    ky: np.ndarray
    kz: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kx", _check_taps(self.kx, "kx"))
        object.__setattr__(self, "ky", _check_taps(self.ky, "ky"))
        object.__setattr__(self, "kz", _check_taps(self.kz, "kz"))

    def to_dense(self) -> "Kernel3D":
        coeffs = (
            self.kx[:, None, None] * self.ky[None, :, None] * self.kz[None, None, :]
        )
        return Kernel3D(coeffs)


@dataclass(frozen=True, eq=False)
class Kernel3D:
    """Dense 3D kernel with odd extent along every axis."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.ndim != 3 or any(s % 2 == 0 for s in c.shape):
            raise ValueError(f"dense kernel must be 3D with odd extents, got {c.shape}")
        object.__setattr__(self, "coeffs", c)


def make_derivative_kernel(
    half_width: int, polarity: str = "bright_above", lateral: int = 3
) -> SeparableKernel:
    """Depth edge detector: difference of means above and below each voxel.

    The depth taps put +1/m on the m samples above (shallower than) the
    center, 0 at the center, and -1/m on the m samples below, so the
    response is positive where intensity drops with depth ("bright_above").
    "bright_below" negates the taps.  Laterally the response is averaged
    over an odd ``lateral`` x ``lateral`` window.
    """
    m = int(half_width)
    if m < 1:
        raise ValueError(f"half_width must be >= 1, got {half_width}")
    lateral = int(lateral)
    if lateral < 1 or lateral % 2 == 0:
        raise ValueError(f"lateral extent must be odd and >= 1, got {lateral}")
    kz = np.zeros(2 * m + 1, dtype=np.float64)
    kz[:m] = 1.0 / m
    kz[m + 1 :] = -1.0 / m
    if polarity == "bright_below":
        kz = -kz
    elif polarity != "bright_above":
        raise ValueError(f"polarity must be 'bright_above' or 'bright_below', got {polarity!r}")
    lat = np.full(lateral, 1.0 / lateral, dtype=np.float64)
    return SeparableKernel(kx=lat, ky=lat, kz=kz)


def make_smoothing_kernel(radius: int) -> SeparableKernel:
    """Normalized box average over a (2r+1)^3 neighborhood."""
    r = int(radius)
    if r < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    n = 2 * r + 1
    box = np.full(n, 1.0 / n, dtype=np.float64)
    return SeparableKernel(kx=box, ky=box, kz=box)


def _check_extents(kernel_shape, dims) -> None:
    for length, dim, ax in zip(kernel_shape, dims, "xyz"):
        if length > dim:
            raise ValueError(
                f"kernel extent {length} exceeds volume size {dim} along {ax}"
            )


def _chunk_bounds(n: int, parts: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _correlate_axis(arr: np.ndarray, taps: np.ndarray, axis: int, threads: int) -> np.ndarray:
    """One replicate-border correlation pass, optionally split into x slabs.

    Slabs along axis 0 are extended by the kernel half-width when the pass
    itself runs along axis 0, so every output element sees exactly the same
    neighborhood (and the same arithmetic) as the unsplit call.  Results are
    therefore bitwise identical for any thread count.
    """
    if taps.size == 1:
        return arr * arr.dtype.type(taps[0])
    hw = taps.size // 2
    parts = 1
    if threads > 1:
        parts = min(threads, arr.shape[0] // (hw + 1))
    if parts <= 1:
        return ndimage.correlate1d(arr, taps, axis=axis, mode="nearest")
    out = np.empty_like(arr)

    def run(lo: int, hi: int) -> None:
        if axis == 0:
            a = max(0, lo - hw)
            b = min(arr.shape[0], hi + hw)
            res = ndimage.correlate1d(arr[a:b], taps, axis=0, mode="nearest")
            out[lo:hi] = res[lo - a : lo - a + (hi - lo)]
        else:
            out[lo:hi] = ndimage.correlate1d(arr[lo:hi], taps, axis=axis, mode="nearest")

    with ThreadPoolExecutor(max_workers=parts) as pool:
        list(pool.map(lambda span: run(*span), _chunk_bounds(arr.shape[0], parts)))
    return out


def convolve_separable(
    volume: Volume, kernel: SeparableKernel, border: str = "replicate", threads: int = 1
) -> Volume:
    """Filter a volume with an outer-product kernel, one axis at a time.

    Output dtype follows the input dtype.  A kernel longer than the volume
    along any axis is rejected.
    """
    if border != "replicate":
        raise ValueError(f"unsupported border mode {border!r}")
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    _check_extents(
        (kernel.kx.size, kernel.ky.size, kernel.kz.size), volume.dims
    )
    out = volume.data
    for axis, taps in ((2, kernel.kz), (0, kernel.kx), (1, kernel.ky)):
        out = _correlate_axis(out, taps, axis, threads)
    return Volume(out, volume.spacing)


def convolve_direct(volume: Volume, kernel: Kernel3D, border: str = "replicate") -> Volume:
    """Reference dense correlation: pad with edge replication, sum over taps.

    Accumulates in float64 regardless of input dtype, then casts back.
    Intended for small volumes; cost grows with kernel volume.
    """
    if border != "replicate":
        raise ValueError(f"unsupported border mode {border!r}")
    c = kernel.coeffs
    _check_extents(c.shape, volume.dims)
    hx, hy, hz = (s // 2 for s in c.shape)
    nx, ny, nz = volume.dims
    pad = np.pad(
        volume.data.astype(np.float64),
        ((hx, hx), (hy, hy), (hz, hz)),
        mode="edge",
    )
    acc = np.zeros((nx, ny, nz), dtype=np.float64)
    for a in range(c.shape[0]):
        for b in range(c.shape[1]):
            for d in range(c.shape[2]):
                acc += c[a, b, d] * pad[a : a + nx, b : b + ny, d : d + nz]
    return Volume(acc.astype(volume.data.dtype), volume.spacing)
