"""Volume container, intensity normalization, and raw-file I/O.

A volume is a dense 3D scalar field with fixed axis semantics: axis 0 is x
(lateral position within a B-scan), axis 1 is y (B-scan index), axis 2 is z
(depth along an A-scan, larger z = deeper).  The canonical memory layout
keeps depth innermost, so ``data[x, y, :]`` is one contiguous A-scan.

Raw files on disk may store the axes in any order; a JSON sidecar declares
the file's dims, element type, endianness, and axis order, and the loader
permutes into the canonical layout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_AXES = "xyz"
_NUMPY_DTYPES = {
    ("u8", "le"): np.dtype("u1"),
    ("u8", "be"): np.dtype("u1"),
    ("f32", "le"): np.dtype("<f4"),
    ("f32", "be"): np.dtype(">f4"),
}


class SizeMismatchError(ValueError):
    """Raw file size disagrees with the dims declared in the sidecar."""

    def __init__(self, path, expected: int, actual: int):
        super().__init__(
            f"{path}: declared dims need {expected} bytes, file has {actual}"
        )
        self.expected = expected
        self.actual = actual


@dataclass(frozen=True)
class VolumeMeta:
    """Sidecar metadata describing a raw volume file.

    ``dims`` and ``spacing_um`` are given in *file* axis order; ``order``
    maps file axes to semantic axes (e.g. ``"zxy"`` means the slowest file
    axis is depth).
    """

    dims: tuple[int, int, int]
    dtype: str = "u8"
    endian: str = "le"
    order: str = "zxy"
    spacing_um: tuple[float, float, float] | None = None

    def __post_init__(self):
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise ValueError(f"dims must be three positive ints, got {self.dims!r}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.dtype not in ("u8", "f32"):
            raise ValueError(f"dtype must be 'u8' or 'f32', got {self.dtype!r}")
        if self.endian not in ("le", "be"):
            raise ValueError(f"endian must be 'le' or 'be', got {self.endian!r}")
        if sorted(self.order) != sorted(_AXES):
            raise ValueError(
                f"order must be a permutation of 'xyz', got {self.order!r}"
            )
        if self.spacing_um is not None:
            if len(self.spacing_um) != 3 or any(s <= 0 for s in self.spacing_um):
                raise ValueError(
                    f"spacing_um must be three positive floats, got {self.spacing_um!r}"
                )
            object.__setattr__(
                self, "spacing_um", tuple(float(s) for s in self.spacing_um)
            )

    @property
    def itemsize(self) -> int:
        return 1 if self.dtype == "u8" else 4

    @property
    def nbytes(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n * self.itemsize

    @classmethod
    def from_dict(cls, d: dict) -> "VolumeMeta":
        known = {"dims", "dtype", "endian", "order", "spacing_um"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown sidecar keys: {sorted(extra)}")
        if "dims" not in d:
            raise ValueError("sidecar is missing required key 'dims'")
        kwargs = dict(d)
        kwargs["dims"] = tuple(kwargs["dims"])
        if kwargs.get("spacing_um") is not None:
            kwargs["spacing_um"] = tuple(kwargs["spacing_um"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "VolumeMeta":
        with open(path, "r", encoding="utf-8") as f:
            d = json.load(f)
        if not isinstance(d, dict):
            raise ValueError(f"{path}: sidecar must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = {
            "dims": list(self.dims),
            "dtype": self.dtype,
            "endian": self.endian,
            "order": self.order,
        }
        if self.spacing_um is not None:
            d["spacing_um"] = list(self.spacing_um)
        return d

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")


@dataclass(frozen=True, eq=False)
class Volume:
    """In-memory volume: float data shaped (nx, ny, nz), depth contiguous.

    ``spacing`` is the canonical-order voxel pitch (dx, dy, dz) in microns,
    or None when unknown.
    """

    data: np.ndarray
    spacing: tuple[float, float, float] | None = None

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ValueError(f"volume data must be 3D, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"volume dims must all be positive, got {arr.shape}")
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        object.__setattr__(self, "data", np.ascontiguousarray(arr))
        if self.spacing is not None:
            object.__setattr__(
                self, "spacing", tuple(float(s) for s in self.spacing)
            )

    @property
    def nx(self) -> int:
        return self.data.shape[0]

    @property
    def ny(self) -> int:
        return self.data.shape[1]

    @property
    def nz(self) -> int:
        return self.data.shape[2]

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape


def normalize_intensities(arr: np.ndarray) -> np.ndarray:
    """Map a float array into [0, 1].

    Values already inside [0, 1] pass through untouched, which makes the
    mapping idempotent and lets float volumes round-trip bit-exactly through
    save/load.  Anything else is min-max scaled; a constant out-of-range
    array collapses to zeros (no contrast to preserve).
    """
    arr = np.asarray(arr, dtype=np.float32)
    lo = float(arr.min())
    hi = float(arr.max())
    if 0.0 <= lo and hi <= 1.0:
        return arr
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / np.float32(hi - lo)


def load_volume(path, meta: VolumeMeta) -> Volume:
    """Read a raw volume file into the canonical (nx, ny, nz) float layout.

    u8 samples are scaled by 1/255; float samples are normalized into [0, 1]
    only if they fall outside that range.  The file's byte length must match
    the sidecar dims exactly.
    """
    path = Path(path)
    actual = path.stat().st_size
    if actual != meta.nbytes:
        raise SizeMismatchError(path, meta.nbytes, actual)
    raw = np.fromfile(path, dtype=_NUMPY_DTYPES[(meta.dtype, meta.endian)])
    raw = raw.reshape(meta.dims)
    # canonical axis i comes from file axis perm[i]
    perm = tuple(meta.order.index(ax) for ax in _AXES)
    arr = raw.transpose(perm)
    if meta.dtype == "u8":
        data = arr.astype(np.float32) / np.float32(255.0)
    else:
        data = normalize_intensities(arr.astype(np.float32))
    spacing = None
    if meta.spacing_um is not None:
        spacing = tuple(meta.spacing_um[perm[i]] for i in range(3))
    return Volume(np.ascontiguousarray(data), spacing)


def save_volume(volume: Volume, path, dtype: str = "f32", meta_path=None) -> VolumeMeta:
    """Write a volume as a canonical-order raw file plus JSON sidecar.

    u8 output quantizes with round-half-even after clipping to [0, 1].
    Returns the sidecar metadata; the sidecar lands at ``meta_path`` or
    ``<path>.json`` by default.
    """
    if dtype not in ("u8", "f32"):
        raise ValueError(f"dtype must be 'u8' or 'f32', got {dtype!r}")
    path = Path(path)
    data = volume.data
    if dtype == "u8":
        out = np.clip(np.rint(data * 255.0), 0, 255).astype(np.uint8)
    else:
        out = np.ascontiguousarray(data, dtype="<f4")
    out.tofile(path)
    meta = VolumeMeta(
        dims=volume.dims,
        dtype=dtype,
        endian="le",
        order="xyz",
        spacing_um=volume.spacing,
    )
    meta.save(meta_path if meta_path is not None else Path(f"{path}.json"))
    return meta
