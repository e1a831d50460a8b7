"""Single-pass boundary segmentation and the three-boundary cascade.

One boundary is found in one sweep: depth-derivative filtering, box
smoothing, depth-weighted fusion, then a per-column argmax inside the
current search window.  There is no iterative refinement of candidates;
each enhanced volume is built once and read once.  The cascade runs RPE
first on the whole volume, then removes the RPE and everything below it
from the search window (with a safety margin) before finding IS/OS, and
repeats that truncation above IS/OS before finding ILM.  A final
projection step restores the anatomical depth ordering in any column
where the three estimates disagree.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .enhance import DepthWeight, enhance
from .filters import convolve_separable, make_derivative_kernel, make_smoothing_kernel
from .surfaces import (
    SearchMask,
    Surface,
    fill_from_neighbors,
    argmax_per_ascan,
    inpaint_and_smooth,
    reject_outliers,
    truncate_above_surface,
)
from .volume import Volume


class PipelineError(RuntimeError):
    """A segmentation stage failed; the message names boundary and stage."""


@dataclass(frozen=True)
class BoundaryProfile:
    """Everything needed to segment one boundary.

    polarity describes the intensity step at the boundary ("bright_above"
    means brighter tissue on the shallow side); weight_direction picks which
    of two similar candidates wins (deeper or shallower).  truncation_margin
    is how many voxels of clearance this boundary's search window keeps from
    the previously found surface.
    """

    name: str
    polarity: str
    weight_direction: str
    derivative_half_width: int = 5
    lateral_width: int = 3
    smoothing_radius: int = 3
    clamp_negative: bool = True
    outlier_tau: float = 15.0
    median_window: int = 5
    surface_smooth_radius: int = 2
    truncation_margin: int = 10

    def __post_init__(self):
        if self.polarity not in ("bright_above", "bright_below"):
            raise ValueError(f"bad polarity {self.polarity!r}")
        if self.weight_direction not in ("favor_deep", "favor_shallow"):
            raise ValueError(f"bad weight_direction {self.weight_direction!r}")
        if self.derivative_half_width < 1:
            raise ValueError("derivative_half_width must be >= 1")
        if self.lateral_width < 1 or self.lateral_width % 2 == 0:
            raise ValueError("lateral_width must be odd and >= 1")
        if self.smoothing_radius < 0:
            raise ValueError("smoothing_radius must be >= 0")
        if self.outlier_tau <= 0:
            raise ValueError("outlier_tau must be positive")
        if self.median_window < 3 or self.median_window % 2 == 0:
            raise ValueError("median_window must be odd and >= 3")
        if self.surface_smooth_radius < 0:
            raise ValueError("surface_smooth_radius must be >= 0")
        if self.truncation_margin < 0:
            raise ValueError("truncation_margin must be >= 0")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_DEFAULT_PROFILES = {
    "rpe": BoundaryProfile(
        name="RPE", polarity="bright_above", weight_direction="favor_deep"
    ),
    # the IS/OS step is the weakest of the three; a wider lateral average
    # keeps its derivative peak above the speckle noise floor
    "isos": BoundaryProfile(
        name="IS/OS", polarity="bright_below", weight_direction="favor_deep",
        lateral_width=9,
    ),
    "ilm": BoundaryProfile(
        name="ILM", polarity="bright_below", weight_direction="favor_shallow"
    ),
}


@dataclass(frozen=True)
class PipelineConfig:
    """Profiles for the three boundaries, keyed by their cascade role."""

    rpe: BoundaryProfile = _DEFAULT_PROFILES["rpe"]
    isos: BoundaryProfile = _DEFAULT_PROFILES["isos"]
    ilm: BoundaryProfile = _DEFAULT_PROFILES["ilm"]

    @classmethod
    def default(cls) -> "PipelineConfig":
        return cls()

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        """Build from nested dict; each boundary key holds partial overrides."""
        extra = set(d) - {"rpe", "isos", "ilm"}
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        profiles = {}
        for key in ("rpe", "isos", "ilm"):
            overrides = d.get(key, {})
            if not isinstance(overrides, dict):
                raise ValueError(f"config entry {key!r} must be an object")
            try:
                profiles[key] = dataclasses.replace(_DEFAULT_PROFILES[key], **overrides)
            except TypeError as e:
                raise ValueError(f"bad config entry for {key!r}: {e}") from e
        return cls(**profiles)

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as f:
            d = json.load(f)
        if not isinstance(d, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "rpe": self.rpe.to_dict(),
            "isos": self.isos.to_dict(),
            "ilm": self.ilm.to_dict(),
        }


@dataclass
class BoundaryReport:
    """Counters and timings for one boundary's segmentation pass."""

    name: str
    wall_s: float = 0.0
    stage_s: dict = field(default_factory=dict)
    rejected_points: int = 0
    enhance_passes: int = 0
    argmax_passes: int = 0
    degenerate: bool = False
    columns_total: int = 0
    columns_searched: int = 0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "wall_s": self.wall_s,
            "stage_s": dict(self.stage_s),
            "rejected_points": self.rejected_points,
            "enhance_passes": self.enhance_passes,
            "argmax_passes": self.argmax_passes,
            "degenerate": self.degenerate,
            "columns_total": self.columns_total,
            "columns_searched": self.columns_searched,
        }


@dataclass
class BoundaryResult:
    surface: Surface
    report: BoundaryReport


@dataclass
class SegmentationResult:
    surfaces: dict
    reports: list
    total_wall_s: float
    ordering_fixed_columns: int
    threads: int
    config: PipelineConfig

    @property
    def degenerate(self) -> bool:
        return any(r.degenerate for r in self.reports)

    def report_dict(self, dims=None) -> dict:
        d = {
            "threads": self.threads,
            "total_wall_s": self.total_wall_s,
            "ordering_fixed_columns": self.ordering_fixed_columns,
            "degenerate": self.degenerate,
            "config": self.config.to_dict(),
            "boundaries": [r.to_dict() for r in self.reports],
        }
        if dims is not None:
            d["dims"] = list(dims)
        return d


def segment_boundary(
    volume: Volume,
    profile: BoundaryProfile,
    mask: SearchMask | None = None,
    threads: int = 1,
) -> BoundaryResult:
    """Locate one boundary surface in a single enhance-and-extract pass.

    Returns a total surface (every column carries a depth) plus a report
    with per-stage wall times and counters.  A flat enhanced volume (e.g.
    from constant input) is flagged degenerate rather than raised; any
    stage failure raises PipelineError naming the boundary and stage.
    """
    t0 = time.perf_counter()
    nx, ny, nz = volume.dims
    if mask is None:
        mask = SearchMask.full(nx, ny, nz)
    report = BoundaryReport(name=profile.name)
    report.columns_total = nx * ny
    report.columns_searched = int(mask.column_valid().sum())

    def run(stage, fn):
        t = time.perf_counter()
        try:
            out = fn()
        except PipelineError:
            raise
        except Exception as e:
            raise PipelineError(f"{profile.name}: stage {stage!r}: {e}") from e
        report.stage_s[stage] = time.perf_counter() - t
        return out

    deriv_kernel = make_derivative_kernel(
        profile.derivative_half_width, profile.polarity, profile.lateral_width
    )
    smooth_kernel = make_smoothing_kernel(profile.smoothing_radius)
    weight = DepthWeight(profile.weight_direction, nz)
    select = None if mask.is_full else mask.as_bool()

    deriv = run("derivative", lambda: convolve_separable(volume, deriv_kernel, threads=threads))
    smooth = run("smoothing", lambda: convolve_separable(volume, smooth_kernel, threads=threads))
    enhanced = run(
        "enhance",
        lambda: enhance(
            deriv, smooth, weight, clamp_negative=profile.clamp_negative, select=select
        ),
    )
    report.enhance_passes += 1
    report.degenerate = not bool(enhanced.data.any())

    raw = run("extract", lambda: argmax_per_ascan(enhanced, mask))
    report.argmax_passes += 1
    kept = run(
        "outlier_reject",
        lambda: reject_outliers(raw, profile.outlier_tau, profile.median_window),
    )
    report.rejected_points = int(raw.valid.sum() - kept.valid.sum())
    final = run(
        "regularize",
        lambda: inpaint_and_smooth(
            kept, profile.surface_smooth_radius, max_z=float(nz - 1)
        ),
    )
    report.wall_s = time.perf_counter() - t0
    return BoundaryResult(surface=final, report=report)


def enforce_ordering(
    ilm: Surface, isos: Surface, rpe: Surface
) -> tuple[Surface, Surface, Surface, int]:
    """Project three total surfaces onto the constraint ILM <= IS/OS <= RPE.

    Columns violating the ordering are invalidated in all three surfaces and
    refilled by the same diffusion inpainting; because the refill applies an
    identical nonnegative averaging to each surface, it preserves the
    ordering that holds at the surviving cells.  If violations somehow
    persist, the per-column sorted triple is taken as a last resort.
    Returns the fixed surfaces and the count of initially violating columns.
    """
    surfs = [ilm.copy(), isos.copy(), rpe.copy()]
    for s in surfs:
        if not s.valid.all():
            raise ValueError("ordering projection expects total surfaces")
    first_bad = None
    for _ in range(4):
        ordered = (surfs[0].z <= surfs[1].z) & (surfs[1].z <= surfs[2].z)
        bad = ~ordered
        if first_bad is None:
            first_bad = bad.copy()
        if not bad.any():
            break
        if bad.all():
            stacked = np.sort(np.stack([s.z for s in surfs]), axis=0)
            for i, s in enumerate(surfs):
                s.z[:] = stacked[i]
            break
        for s in surfs:
            s.z[bad] = np.nan
            s.z[:] = fill_from_neighbors(s.z)
    else:
        stacked = np.sort(np.stack([s.z for s in surfs]), axis=0)
        for i, s in enumerate(surfs):
            s.z[:] = stacked[i]
    for s in surfs:
        s.valid[:] = True
    return surfs[0], surfs[1], surfs[2], int(first_bad.sum())


def segment_retina(
    volume: Volume, config: PipelineConfig | None = None, threads: int = 1
) -> SegmentationResult:
    """Run the full cascade: RPE, then IS/OS above it, then ILM above that.

    Each later boundary searches only the part of the volume strictly above
    the previously found surface minus its truncation margin, which removes
    the strong already-found step from the candidate set.  Truncation is
    skipped after a degenerate (flat) result since the surface carries no
    information.  Returns surfaces keyed "ilm", "isos", "rpe" (depth order
    restored in every column) and per-boundary reports in execution order.
    """
    t0 = time.perf_counter()
    if config is None:
        config = PipelineConfig.default()
    nx, ny, nz = volume.dims
    full = SearchMask.full(nx, ny, nz)

    rpe_res = segment_boundary(volume, config.rpe, full, threads)
    if rpe_res.report.degenerate:
        isos_mask = full
    else:
        isos_mask = truncate_above_surface(
            full, rpe_res.surface, config.isos.truncation_margin, "keep_above"
        )
    isos_res = segment_boundary(volume, config.isos, isos_mask, threads)
    if isos_res.report.degenerate:
        ilm_mask = isos_mask
    else:
        ilm_mask = truncate_above_surface(
            full, isos_res.surface, config.ilm.truncation_margin, "keep_above"
        )
    ilm_res = segment_boundary(volume, config.ilm, ilm_mask, threads)

    ilm_s, isos_s, rpe_s, n_fixed = enforce_ordering(
        ilm_res.surface, isos_res.surface, rpe_res.surface
    )
    return SegmentationResult(
        surfaces={"ilm": ilm_s, "isos": isos_s, "rpe": rpe_s},
        reports=[rpe_res.report, isos_res.report, ilm_res.report],
        total_wall_s=time.perf_counter() - t0,
        ordering_fixed_columns=n_fixed,
        threads=threads,
        config=config,
    )
