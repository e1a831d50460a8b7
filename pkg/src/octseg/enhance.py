"""Depth-weighted combination of edge response and smoothed intensity.

Boundary contrast alone does not separate retinal interfaces that share
similar gradient strength, so the detector combines the (rectified,
rescaled) depth derivative with the rescaled smoothed intensity and then
multiplies by a depth weight.  Weights grow with depth to prefer the deeper
of two otherwise similar candidates (outer boundaries) or shrink with depth
to prefer the shallower one (inner boundaries).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .volume import Volume


class DegenerateNormalizationWarning(RuntimeWarning):
    """Raised when a min-max rescale sees a flat field (max == min)."""


@dataclass(frozen=True)
class DepthWeight:
    """Per-depth multiplier, linear in the depth index.

    "favor_deep" uses w(k) = k + 1 and "favor_shallow" uses w(k) = nz - k;
    both stay strictly positive so no depth plane is erased outright.
    """

    direction: str
    nz: int

    def __post_init__(self):
        if self.direction not in ("favor_deep", "favor_shallow"):
            raise ValueError(
                f"direction must be 'favor_deep' or 'favor_shallow', got {self.direction!r}"
            )
        if self.nz < 1:
            raise ValueError(f"nz must be >= 1, got {self.nz}")

    def weights(self) -> np.ndarray:
        k = np.arange(self.nz, dtype=np.float32)
        if self.direction == "favor_deep":
            return k + np.float32(1.0)
        return np.float32(self.nz) - k


def depth_weight(k: int, weight: DepthWeight) -> float:
    """Weight value at one depth index (bounds-checked)."""
    if not 0 <= k < weight.nz:
        raise ValueError(f"depth index {k} outside [0, {weight.nz})")
    if weight.direction == "favor_deep":
        return float(k + 1)
    return float(weight.nz - k)


def unit_scale(
    values: np.ndarray, select: np.ndarray | None = None
) -> tuple[np.ndarray, bool]:
    """Min-max rescale an array using extrema over ``select`` (or all voxels).

    Returns (scaled, degenerate).  A flat field has no contrast to rescale;
    it comes back as all zeros with the degenerate flag set.
    """
    ref = values if select is None else values[select]
    lo = ref.min()
    hi = ref.max()
    if not hi > lo:
        return np.zeros_like(values), True
    return (values - lo) / (hi - lo), False


def enhance(
    diff: Volume,
    smooth: Volume,
    weight: DepthWeight,
    clamp_negative: bool = True,
    select: np.ndarray | None = None,
    normalize_output: bool = True,
) -> Volume:
    """Fuse a derivative volume and a smoothed volume into a boundary score.

    Each input is min-max rescaled (the derivative after optional clamping
    of negative responses), summed, multiplied by the depth weight along z,
    and by default rescaled once more so scores live in [0, 1].  When a
    boolean ``select`` mask is given, all rescale extrema are taken over the
    selected voxels only, so excluded regions cannot distort the scaling.

    A flat field at any rescale step triggers DegenerateNormalizationWarning;
    if both inputs are flat the result is identically zero.
    """
    if diff.dims != smooth.dims:
        raise ValueError(f"dims mismatch: {diff.dims} vs {smooth.dims}")
    if weight.nz != diff.nz:
        raise ValueError(f"depth weight built for nz={weight.nz}, volume has nz={diff.nz}")
    if select is not None and select.shape != diff.dims:
        raise ValueError(f"select mask shape {select.shape} != volume dims {diff.dims}")

    d = np.maximum(diff.data, 0) if clamp_negative else diff.data
    d_scaled, d_flat = unit_scale(d, select)
    s_scaled, s_flat = unit_scale(smooth.data, select)
    for flat, label in ((d_flat, "derivative"), (s_flat, "smoothed")):
        if flat:
            warnings.warn(
                f"{label} volume is flat over the search region; its contribution is zero",
                DegenerateNormalizationWarning,
                stacklevel=2,
            )
    combined = weight.weights()[None, None, :] * (d_scaled + s_scaled)
    if normalize_output:
        combined, out_flat = unit_scale(combined, select)
        if out_flat:
            warnings.warn(
                "enhanced volume is flat over the search region",
                DegenerateNormalizationWarning,
                stacklevel=2,
            )
    return Volume(combined, diff.spacing)
