"""N-dimensional scalar lattice fields and their reductions.

A :class:`ScalarField` is a 1- to 4-axis lattice of scalars with a validity
mask.  Values are stored flat with axis 0 fastest-varying (x fastest, t
slowest), so the flat index of multi-index ``(i0, i1, ...)`` is
``i0 + dims[0]*(i1 + dims[1]*(i2 + ...))``.  That makes a t-slice of a 4D
field the contiguous-block case, which is the dominant access pattern for
time-sliced lattice data.

All operations are pure: fields are never mutated after construction, every
reduction returns a new field.  Filtering is masking, not overwriting, so
filters compose and the underlying data stays inspectable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_AXIS_NAMES = ("x", "y", "z", "t")

REDUCERS = ("sum", "mean", "max", "min")


@dataclass(eq=False)
class ScalarField:
    """Scalar lattice with per-voxel validity mask.

    dims/spacing/origin/axis_names all have one entry per axis; ``values``
    and ``mask`` are flat arrays of length ``prod(dims)`` in axis-0-fastest
    order.
    """

    dims: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...]
    values: np.ndarray
    mask: np.ndarray
    axis_names: tuple[str, ...]

    def __post_init__(self) -> None:
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        self.origin = tuple(float(o) for o in self.origin)
        self.axis_names = tuple(str(a) for a in self.axis_names)
        if not 1 <= len(self.dims) <= 4:
            raise ValueError(f"field must have 1-4 axes, got {len(self.dims)}")
        if any(d < 1 for d in self.dims):
            raise ValueError(f"every extent must be >= 1, got dims={self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise ValueError(f"every spacing must be > 0, got spacing={self.spacing}")
        n_axes = len(self.dims)
        if not len(self.spacing) == len(self.origin) == len(self.axis_names) == n_axes:
            raise ValueError("dims, spacing, origin and axis_names must agree in length")
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        self.mask = np.asarray(self.mask, dtype=bool).reshape(-1)
        n = int(np.prod(self.dims))
        if self.values.size != n:
            raise ValueError(f"values length {self.values.size} != product(dims) {n}")
        if self.mask.size != n:
            raise ValueError(f"mask length {self.mask.size} != product(dims) {n}")

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def voxel_count(self) -> int:
        return self.values.size

    def grid(self) -> np.ndarray:
        """Values as an ndarray indexed ``[i0, i1, ...]`` (a view, F-order)."""
        return self.values.reshape(self.dims, order="F")

    def mask_grid(self) -> np.ndarray:
        return self.mask.reshape(self.dims, order="F")

    def axis_index(self, axis: int | str) -> int:
        """Resolve an axis given as index or label against this field."""
        if isinstance(axis, str):
            try:
                return self.axis_names.index(axis)
            except ValueError:
                raise IndexError(
                    f"axis {axis!r} not in axes {list(self.axis_names)}"
                ) from None
        axis = int(axis)
        if not 0 <= axis < self.ndim:
            raise IndexError(f"axis {axis} out of range for {self.ndim} axes")
        return axis

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScalarField):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and self.origin == other.origin
            and self.axis_names == other.axis_names
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.mask, other.mask)
        )


def make_field(
    dims,
    values,
    mask=None,
    spacing=None,
    origin=None,
    axis_names=None,
) -> ScalarField:
    """Convenience constructor filling in unit spacing, zero origin, xyzt names."""
    dims = tuple(int(d) for d in dims)
    n_axes = len(dims)
    if spacing is None:
        spacing = (1.0,) * n_axes
    if origin is None:
        origin = (0.0,) * n_axes
    if axis_names is None:
        axis_names = DEFAULT_AXIS_NAMES[:n_axes]
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if mask is None:
        mask = np.ones(values.size, dtype=bool)
    return ScalarField(dims, spacing, origin, values, mask, axis_names)


def constant_field(dims, value: float, **kwargs) -> ScalarField:
    n = int(np.prod([int(d) for d in dims]))
    return make_field(dims, np.full(n, float(value)), **kwargs)


@dataclass(eq=False)
class Histogram:
    bin_edges: np.ndarray  # ascending, length bins+1
    counts: np.ndarray  # non-negative ints, length bins
    total_counted: int

    def __post_init__(self) -> None:
        self.bin_edges = np.asarray(self.bin_edges, dtype=np.float64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.total_counted = int(self.total_counted)
        if self.bin_edges.ndim != 1 or self.counts.ndim != 1:
            raise ValueError("bin_edges and counts must be 1-D")
        if self.bin_edges.size != self.counts.size + 1:
            raise ValueError("need len(bin_edges) == len(counts) + 1")
        if not np.all(np.diff(self.bin_edges) > 0):
            raise ValueError("bin_edges must be strictly ascending")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        if int(self.counts.sum()) != self.total_counted:
            raise ValueError("sum(counts) must equal total_counted")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return (
            self.total_counted == other.total_counted
            and np.array_equal(self.bin_edges, other.bin_edges)
            and np.array_equal(self.counts, other.counts)
        )


@dataclass(frozen=True)
class FieldStats:
    """min/max/mean over valid voxels; None markers when nothing is valid."""

    min: float | None
    max: float | None
    mean: float | None
    valid_count: int


def _drop_axis(seq: tuple, axis: int) -> tuple:
    return seq[:axis] + seq[axis + 1 :]


def slice_field(field: ScalarField, axis: int | str, index: int) -> ScalarField:
    """Pin one axis to a lattice index, removing it (dimension N-1)."""
    if field.ndim < 2:
        raise ValueError("cannot slice a 1-D field")
    ax = field.axis_index(axis)
    index = int(index)
    if not 0 <= index < field.dims[ax]:
        raise IndexError(
            f"index {index} out of range for axis {field.axis_names[ax]!r} "
            f"of extent {field.dims[ax]}"
        )
    values = np.take(field.grid(), index, axis=ax).flatten(order="F")
    mask = np.take(field.mask_grid(), index, axis=ax).flatten(order="F")
    return ScalarField(
        _drop_axis(field.dims, ax),
        _drop_axis(field.spacing, ax),
        _drop_axis(field.origin, ax),
        values,
        mask,
        _drop_axis(field.axis_names, ax),
    )


def project(field: ScalarField, axis: int | str, reducer: str) -> ScalarField:
    """Collapse one axis by sum/mean/max/min over the valid voxels along it.

    An output voxel is masked invalid iff every input voxel along its line is
    masked; its value is then 0.  ``mean`` divides by the count of valid
    voxels only, ``sum`` treats masked voxels as absent.
    """
    if field.ndim < 2:
        raise ValueError("cannot project a 1-D field")
    if reducer not in REDUCERS:
        raise ValueError(f"unknown reducer {reducer!r}; expected one of {REDUCERS}")
    ax = field.axis_index(axis)
    grid = field.grid()
    mgrid = field.mask_grid()
    count = mgrid.sum(axis=ax)
    out_mask = count > 0
    safe_count = np.maximum(count, 1)
    if reducer == "sum":
        out = np.where(mgrid, grid, 0.0).sum(axis=ax)
    elif reducer == "mean":
        out = np.where(mgrid, grid, 0.0).sum(axis=ax) / safe_count
    elif reducer == "max":
        out = np.where(mgrid, grid, -np.inf).max(axis=ax)
    else:
        out = np.where(mgrid, grid, np.inf).min(axis=ax)
    out = np.where(out_mask, out, 0.0)
    return ScalarField(
        _drop_axis(field.dims, ax),
        _drop_axis(field.spacing, ax),
        _drop_axis(field.origin, ax),
        out.flatten(order="F"),
        out_mask.flatten(order="F"),
        _drop_axis(field.axis_names, ax),
    )


def filter_range(
    field: ScalarField, lo: float | None = None, hi: float | None = None
) -> ScalarField:
    """Mask voxels with value < lo or > hi.  Values are never changed.

    At least one bound must be given.  Applying the same filter twice is
    idempotent, and successive filters compose by AND-ing masks.
    """
    if lo is None and hi is None:
        raise ValueError("filter_range needs at least one of lo/hi")
    if lo is not None and hi is not None and lo > hi:
        raise ValueError(f"filter_range lo {lo} > hi {hi}")
    keep = field.mask.copy()
    if lo is not None:
        keep &= field.values >= lo
    if hi is not None:
        keep &= field.values <= hi
    return ScalarField(
        field.dims, field.spacing, field.origin, field.values, keep, field.axis_names
    )


def histogram(
    field: ScalarField, bins: int, value_range: tuple[float, float] | None = None
) -> Histogram:
    """Histogram of valid voxels with lo <= v <= hi.

    Bin k covers [edge_k, edge_{k+1}), except the last bin which is closed
    above.  With no explicit range, [min, max] over valid voxels is used (a
    degenerate min==max range is widened by 0.5 each way).
    """
    bins = int(bins)
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    valid = field.values[field.mask]
    if value_range is None:
        if valid.size == 0:
            raise ValueError("histogram of a field with no valid voxels needs an explicit range")
        lo, hi = float(valid.min()), float(valid.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
    else:
        lo, hi = float(value_range[0]), float(value_range[1])
        if not lo < hi:
            raise ValueError(f"histogram range must satisfy lo < hi, got [{lo}, {hi}]")
    edges = np.linspace(lo, hi, bins + 1)
    in_range = valid[(valid >= lo) & (valid <= hi)]
    idx = np.searchsorted(edges, in_range, side="right") - 1
    idx = np.minimum(idx, bins - 1)  # v == hi falls in the closed last bin
    counts = np.bincount(idx, minlength=bins)
    return Histogram(edges, counts, int(in_range.size))


def stats(field: ScalarField) -> FieldStats:
    valid = field.values[field.mask]
    if valid.size == 0:
        return FieldStats(None, None, None, 0)
    return FieldStats(
        float(valid.min()), float(valid.max()), float(valid.mean()), int(valid.size)
    )
