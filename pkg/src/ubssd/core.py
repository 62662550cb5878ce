"""Domain types and polynomial-matrix filtering.

Signals are stored channel-major: a ``TimeSeries`` of dimension D and
length T holds a ``(D, T)`` float64 array. Convolution is causal with
zero padding before the first sample; the samples affected by that
padding are tracked in ``TimeSeries.transient`` so downstream statistics
can skip them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .arfit import ArModel


class DimensionError(ValueError):
    """Raised when array shapes do not chain."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A D-channel signal sampled at T time steps.

    ``transient`` counts the leading samples produced from zero-padded
    history; they are kept in ``values`` but excluded by ``steady``.
    """

    values: np.ndarray
    transient: int = 0

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim == 1:
            vals = _frozen(vals[None, :])
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise DimensionError(f"TimeSeries needs a non-empty (D, T) array, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("TimeSeries values must be finite")
        if not 0 <= self.transient <= vals.shape[1]:
            raise ValueError(f"transient={self.transient} outside [0, {vals.shape[1]}]")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def len(self) -> int:
        return self.values.shape[1]

    @property
    def steady(self) -> np.ndarray:
        """Samples after the transient."""
        return self.values[:, self.transient:]

    def trimmed(self) -> "TimeSeries":
        return TimeSeries(self.steady)

    def centered(self) -> "TimeSeries":
        """Subtract the per-channel mean of the steady part."""
        mean = self.steady.mean(axis=1, keepdims=True)
        return TimeSeries(self.values - mean, self.transient)

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (self.transient == other.transient
                and self.values.shape == other.values.shape
                and bool(np.array_equal(self.values, other.values)))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FirFilter:
    """Polynomial matrix ``H[z] = sum_l taps[l] z^-l``."""

    taps: tuple

    def __post_init__(self):
        taps = tuple(_frozen(t) for t in self.taps)
        if not taps:
            raise ValueError("FirFilter needs at least one tap")
        shape = taps[0].shape
        if len(shape) != 2:
            raise DimensionError("filter taps must be matrices")
        for t in taps:
            if t.shape != shape:
                raise DimensionError(f"tap shapes differ: {t.shape} vs {shape}")
        object.__setattr__(self, "taps", taps)

    @classmethod
    def from_array(cls, arr) -> "FirFilter":
        """Build from an array of shape (L+1, rows, cols)."""
        return cls(tuple(np.asarray(arr)))

    @property
    def degree(self) -> int:
        return len(self.taps) - 1

    @property
    def rows(self) -> int:
        return self.taps[0].shape[0]

    @property
    def cols(self) -> int:
        return self.taps[0].shape[1]

    def stacked(self) -> np.ndarray:
        return np.stack(self.taps)


@dataclass(frozen=True, eq=False)
class LinearMap:
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2:
            raise DimensionError("LinearMap needs a 2-d matrix")
        if not np.all(np.isfinite(m)):
            raise ValueError("LinearMap entries must be finite")
        object.__setattr__(self, "matrix", m)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    def __matmul__(self, other: "LinearMap") -> "LinearMap":
        if self.cols != other.rows:
            raise DimensionError(f"cannot chain {self.matrix.shape} @ {other.matrix.shape}")
        return LinearMap(self.matrix @ other.matrix)


@dataclass(frozen=True)
class Partition:
    """Assignment of ``num_groups * group_dim`` channels into equal groups."""

    num_groups: int
    group_dim: int
    assignment: tuple

    def __post_init__(self):
        assignment = tuple(int(a) for a in self.assignment)
        object.__setattr__(self, "assignment", assignment)
        if len(assignment) != self.num_groups * self.group_dim:
            raise ValueError("assignment length must equal num_groups * group_dim")
        counts = np.bincount(assignment, minlength=self.num_groups) if assignment else np.zeros(0)
        if len(counts) != self.num_groups or np.any(counts != self.group_dim):
            raise ValueError(f"every group needs exactly {self.group_dim} members: {assignment}")

    @classmethod
    def contiguous(cls, num_groups: int, group_dim: int) -> "Partition":
        return cls(num_groups, group_dim, tuple(np.repeat(np.arange(num_groups), group_dim)))

    @classmethod
    def from_groups(cls, groups: Sequence[Sequence[int]]) -> "Partition":
        groups = [sorted(g) for g in groups]
        d = len(groups[0])
        assignment = [0] * sum(len(g) for g in groups)
        for k, g in enumerate(sorted(groups)):
            for ch in g:
                assignment[ch] = k
        return cls(len(groups), d, tuple(assignment))

    @property
    def groups(self) -> list[list[int]]:
        out = [[] for _ in range(self.num_groups)]
        for ch, g in enumerate(self.assignment):
            out[g].append(ch)
        return out

    @property
    def dim(self) -> int:
        return len(self.assignment)


@dataclass(frozen=True)
class ModelDims:
    d: int
    M: int
    D_x: int
    L: int
    T: int

    def __post_init__(self):
        if min(self.d, self.M, self.D_x, self.T) < 1 or self.L < 0:
            raise ValueError(f"invalid dimensions: {self}")
        if self.D_x <= self.D_s:
            raise ValueError(f"undercomplete model needs D_x > D_s, got D_x={self.D_x}, D_s={self.D_s}")

    @property
    def D_s(self) -> int:
        return self.d * self.M

    @property
    def min_samples(self) -> int:
        """Recommended minimum T for estimation."""
        return (self.L + 1) * self.D_x + 1


def apply_fir(filt: FirFilter, series: TimeSeries) -> TimeSeries:
    """Causal convolution ``y(t) = sum_l H_l u(t-l)`` with ``u(t) = 0`` before the start."""
    if filt.cols != series.dim:
        raise DimensionError(f"filter has {filt.cols} input channels, series has {series.dim}")
    u = series.values
    T = u.shape[1]
    out = np.zeros((filt.rows, T))
    for lag, tap in enumerate(filt.taps):
        if lag >= T:
            break
        out[:, lag:] += tap @ u[:, :T - lag]
    return TimeSeries(out, min(T, series.transient + filt.degree))


def apply_linear(lmap: LinearMap, series: TimeSeries) -> TimeSeries:
    if lmap.cols != series.dim:
        raise DimensionError(f"map has {lmap.cols} columns, series has {series.dim} channels")
    return TimeSeries(lmap.matrix @ series.values, series.transient)


def compose_demixer(w_isa: LinearMap, w_pca: LinearMap, w_ar: "ArModel") -> FirFilter:
    """Chain ``W_isa W_pca W_ar[z]`` where ``W_ar[z] = I - sum_q A_q z^-q``."""
    front = w_isa @ w_pca
    D = front.cols
    coeffs = [np.asarray(a) for a in w_ar.coeffs]
    if np.shape(w_ar.noise_cov) != (D, D):
        raise DimensionError(f"AR model dimension {np.shape(w_ar.noise_cov)} does not match {D}")
    for a in coeffs:
        if a.shape != (D, D):
            raise DimensionError(f"AR coefficient shape {a.shape} does not match ({D}, {D})")
    taps = [front.matrix.copy()]
    taps += [-front.matrix @ a for a in coeffs]
    return FirFilter(tuple(taps))
