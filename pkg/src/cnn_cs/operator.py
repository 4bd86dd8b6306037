"""CNN structured measurement operators.

A filter bank of K filters over M channels, slid over an input of length D
with stride t, defines the Kn × MD matrix W whose row ``i * n + j`` is filter
``i`` shifted by ``j * t`` and concatenated over channels. 2-d banks use
ℓ×ℓ filters over D×D inputs and row ``i * n² + j_row * n + j_col``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import itertools
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import exceptions
from .constants import LOGGER, NORMALIZED_TOLERANCE
from .models import CoherenceReport


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Bank of K filters over M channels (weights indexed filter, channel, spatial)."""

    weights: np.ndarray

    def __post_init__(self):
        """Validate and freeze weights."""
        weights = np.array(self.weights, dtype=np.float64)
        if weights.ndim not in (3, 4):
            raise ValueError("Weights must be indexed (filter, channel, spatial...)")
        if weights.ndim == 4 and weights.shape[2] != weights.shape[3]:
            raise ValueError("2-d filters must be square")
        if 0 in weights.shape:
            raise ValueError("All filter bank sizes must be positive")
        if not np.all(np.isfinite(weights)):
            raise ValueError("Filter weights must be finite")

        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @property
    def num_filters(self) -> int:
        """Number of filters K."""
        return self.weights.shape[0]

    @property
    def num_channels(self) -> int:
        """Number of input channels M."""
        return self.weights.shape[1]

    @property
    def filter_len(self) -> int:
        """Filter side length ℓ."""
        return self.weights.shape[2]

    @property
    def dims(self) -> int:
        """Spatial dimensions of the filters."""
        return self.weights.ndim - 2

    def as_matrix(self) -> np.ndarray:
        """Filters as rows over (channel, spatial) in row-major order."""
        return self.weights.reshape(self.num_filters, -1)

    def group_norms(self) -> np.ndarray:
        """Norm of each filter concatenated over channels (the norm of its rows in W)."""
        return np.linalg.norm(self.as_matrix(), axis=1)

    def is_normalized(self, tol: float = NORMALIZED_TOLERANCE) -> bool:
        """All induced rows have unit norm within ``tol``."""
        return bool(np.all(np.abs(self.group_norms() - 1.0) <= tol))


def new_random_filterbank(
    num_filters: int,
    num_channels: int,
    filter_len: int,
    dims: int = 1,
    seed: int = 0,
) -> FilterBank:
    """Draw i.i.d. N(0, 1) weights scaled by 1/√(Mℓ^dims).

    Gaussian draws come from numpy's ziggurat sampler on a PCG64 generator
    seeded with ``seed``.
    """
    if min(num_filters, num_channels, filter_len) < 1:
        raise ValueError("Filter bank sizes must be positive")
    if dims not in (1, 2):
        raise ValueError("Filter banks are 1-d or 2-d")

    rng = np.random.default_rng(seed)
    shape = (num_filters, num_channels) + (filter_len,) * dims
    scale = 1.0 / math.sqrt(num_channels * filter_len**dims)
    return FilterBank(rng.standard_normal(shape) * scale)


def normalize_rows(bank: FilterBank) -> FilterBank:
    """Rescale each filter group so every row of the induced W has unit norm."""
    norms = bank.group_norms()
    if zero := np.flatnonzero(norms == 0.0).tolist():
        raise exceptions.ZeroFilter(f"Filters with zero norm: {zero}")

    scale = norms.reshape((-1,) + (1,) * (bank.weights.ndim - 1))
    return FilterBank(bank.weights / scale)


def pair_filterbank(bank: FilterBank) -> FilterBank:
    """Stack positive and negative copies of every filter (operator [W; -W])."""
    return FilterBank(np.concatenate([bank.weights, -bank.weights]))


@dataclass(frozen=True)
class InputGeometry:
    """Input side length D (per spatial dimension) and stride t."""

    length: int
    stride: int = 1
    dims: int = 1

    def __post_init__(self):
        """Validate geometry."""
        if self.length < 1 or self.stride < 1:
            raise ValueError("Input length and stride must be positive")
        if self.dims not in (1, 2):
            raise ValueError("Inputs are 1-d or 2-d")

    def shifts(self, filter_len: int) -> int:
        """Number of filter placements n = (D - ℓ)/t + 1 per spatial dimension."""
        span = self.length - filter_len
        if span < 0 or span % self.stride:
            raise exceptions.GeometryMismatch(
                f"(D - ℓ) = {span} is not a non-negative multiple of stride {self.stride}"
            )
        return span // self.stride + 1


@dataclass(frozen=True, eq=False)
class StructuredOperator:
    """The matrix W induced by a filter bank and input geometry.

    W is never materialized at production sizes; forward and adjoint are
    computed by strided correlation and its transpose.
    """

    bank: FilterBank
    geom: InputGeometry
    shifts: int = field(init=False)

    def __post_init__(self):
        """Derive the number of shifts."""
        if self.bank.dims != self.geom.dims:
            raise exceptions.GeometryMismatch(
                f"{self.bank.dims}-d filter bank used with {self.geom.dims}-d input"
            )
        object.__setattr__(self, "shifts", self.geom.shifts(self.bank.filter_len))

    @property
    def dims(self) -> int:
        """Spatial dimensions of the input."""
        return self.geom.dims

    @property
    def num_blocks(self) -> int:
        """Number of filter blocks K."""
        return self.bank.num_filters

    @property
    def block_size(self) -> int:
        """Entries per filter block (n or n²)."""
        return self.shifts**self.dims

    @property
    def row_count(self) -> int:
        """Rows of W (Kn or Kn²)."""
        return self.num_blocks * self.block_size

    @property
    def col_count(self) -> int:
        """Columns of W (MD or MD²)."""
        return self.bank.num_channels * self.geom.length**self.dims

    @property
    def shape(self) -> tuple[int, int]:
        """Shape of W."""
        return self.row_count, self.col_count

    def _check(self, vector, expected: int, name: str) -> np.ndarray:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.ndim != 1 or vector.shape[0] != expected:
            raise exceptions.DimensionMismatch(
                f"Expected {name} of length {expected}, got shape {vector.shape}"
            )
        return vector

    def _patches(self, x: np.ndarray) -> np.ndarray:
        """Input patches as columns, (M·ℓ^dims) × n^dims."""
        channels, length = self.bank.num_channels, self.geom.length
        width, stride = self.bank.filter_len, self.geom.stride

        if self.dims == 1:
            signal = x.reshape(channels, length)
            windows = sliding_window_view(signal, width, axis=1)[:, ::stride]
            return windows.transpose(0, 2, 1).reshape(channels * width, -1)

        signal = x.reshape(channels, length, length)
        windows = sliding_window_view(signal, (width, width), axis=(1, 2))
        windows = windows[:, ::stride, ::stride]
        return windows.transpose(0, 3, 4, 1, 2).reshape(channels * width * width, -1)

    def _fold(self, columns: np.ndarray) -> np.ndarray:
        """Scatter-add patch columns back onto the input grid (transpose of ``_patches``)."""
        channels, length = self.bank.num_channels, self.geom.length
        width, stride, n = self.bank.filter_len, self.geom.stride, self.shifts
        stop = stride * (n - 1) + 1

        if self.dims == 1:
            out = np.zeros((channels, length))
            columns = columns.reshape(channels, width, n)
            for u in range(width):
                out[:, u : u + stop : stride] += columns[:, u]
            return out.reshape(-1)

        out = np.zeros((channels, length, length))
        columns = columns.reshape(channels, width, width, n, n)
        for u, v in itertools.product(range(width), repeat=2):
            out[:, u : u + stop : stride, v : v + stop : stride] += columns[:, u, v]
        return out.reshape(-1)

    def apply_forward(self, x) -> np.ndarray:
        """Analysis h = Wx."""
        x = self._check(x, self.col_count, "input")
        return (self.bank.as_matrix() @ self._patches(x)).reshape(-1)

    def apply_adjoint(self, z) -> np.ndarray:
        """Synthesis x = Wᵀz (transposed convolution)."""
        z = self._check(z, self.row_count, "coefficients")
        columns = self.bank.as_matrix().T @ z.reshape(self.num_blocks, -1)
        return self._fold(columns)

    def materialize_dense(self) -> np.ndarray:
        """Explicit Kn × MD matrix; only sensible at small sizes."""
        LOGGER.debug("Materializing dense operator of shape %s", self.shape)
        dense = np.empty(self.shape)
        basis = np.zeros(self.row_count)
        for row in range(self.row_count):
            basis[row] = 1.0
            dense[row] = self.apply_adjoint(basis)
            basis[row] = 0.0
        return dense


def build_operator(bank: FilterBank, geom: InputGeometry) -> StructuredOperator:
    """Build the structured operator for ``bank`` slid over ``geom``."""
    return StructuredOperator(bank, geom)


def crelu_split(h) -> tuple[np.ndarray, np.ndarray]:
    """Split h into nonnegative parts with h = h_plus - h_minus."""
    h = np.asarray(h, dtype=np.float64)
    return np.maximum(h, 0.0), np.maximum(-h, 0.0)


def crelu_reconstruct(op: StructuredOperator, x) -> np.ndarray:
    """Wᵀ(ReLU(Wx) - ReLU(-Wx)) computed with the positive/negative filter pair.

    The adjoint of [W; -W] applied to ReLU([W; -W]x) reassembles WᵀWx.
    """
    paired = build_operator(pair_filterbank(op.bank), op.geom)
    activation = np.maximum(paired.apply_forward(x), 0.0)
    return paired.apply_adjoint(activation)


def _overlap(delta: int, width: int) -> tuple[slice, slice]:
    """Filter-local slices of two placements offset by ``delta`` samples."""
    if delta >= 0:
        return slice(delta, width), slice(0, width - delta)
    return slice(0, width + delta), slice(-delta, width)


def _lags(op: StructuredOperator):
    """Shift offsets (in placements) between rows whose supports overlap.

    Only one of each ±lag pair is produced; the other gives the transposed Gram.
    """
    reach = min(op.shifts - 1, (op.bank.filter_len - 1) // op.geom.stride)
    if op.dims == 1:
        yield from ((s,) for s in range(reach + 1))
        return

    for row in range(reach + 1):
        for col in range(-reach, reach + 1):
            if row or col >= 0:
                yield row, col


def coherence(op: StructuredOperator) -> CoherenceReport:
    """Maximum absolute inner product between distinct rows of a row-normalized W.

    Rows whose supports do not overlap are orthogonal, so only overlapping
    placements are compared, one Gram matrix per lag.
    """
    bank = op.bank
    if not bank.is_normalized():
        raise exceptions.NotNormalized("Coherence requires unit-norm rows")

    width, stride, n = bank.filter_len, op.geom.stride, op.shifts
    best, rows = 0.0, None
    for lag in _lags(op):
        left, right = zip(*(_overlap(s * stride, width) for s in lag))
        lhs = bank.weights[(slice(None), slice(None)) + left]
        rhs = bank.weights[(slice(None), slice(None)) + right]
        gram = np.abs(
            lhs.reshape(bank.num_filters, -1) @ rhs.reshape(bank.num_filters, -1).T
        )
        if not any(lag):
            np.fill_diagonal(gram, 0.0)

        flat = int(np.argmax(gram))
        if gram.flat[flat] > best:
            first, second = divmod(flat, bank.num_filters)
            start = [max(0, -s) for s in lag]
            best = float(gram.flat[flat])
            rows = (
                first * op.block_size + _position(start, n),
                second * op.block_size + _position([p + s for p, s in zip(start, lag)], n),
            )

    LOGGER.debug("Coherence %.6f attained by rows %s", best, rows)
    return CoherenceReport(mu=best, rows=rows)


def _position(placement: list[int], n: int) -> int:
    """Row-major index of a placement within its filter block."""
    index = 0
    for p in placement:
        index = index * n + p
    return index
