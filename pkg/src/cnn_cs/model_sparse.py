"""Model-k-sparse signals and the structured sparse approximation 𝕄(h, k).

Coefficient vectors are split into K blocks (one per filter) of n (or n²)
shift positions. Each block is further tiled into pooling regions; a
model-sparse vector has at most one nonzero per region. Full-block pooling
uses a single region per block, which is the sparsity model M_k.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np

from . import exceptions
from .constants import PoolingMode, Upsampling
from .models import PoolingConfig


@dataclass(frozen=True)
class PoolingGeometry:
    """Partition of each filter block's shift positions into pooling regions."""

    num_blocks: int
    shifts: int
    mode: PoolingMode = PoolingMode.FullBlock
    region: Optional[int] = None
    dims: int = 1

    def __post_init__(self):
        """Validate tiling."""
        if self.num_blocks < 1 or self.shifts < 1:
            raise ValueError("Blocks and shifts must be positive")
        if self.dims not in (1, 2):
            raise ValueError("Pooling is 1-d or 2-d")
        if self.mode == PoolingMode.Regions:
            if not self.region or self.region < 1 or self.shifts % self.region:
                raise exceptions.GeometryMismatch(
                    f"Region {self.region} does not tile {self.shifts} shifts"
                )

    @classmethod
    def full_block(cls, num_blocks: int, shifts: int, dims: int = 1) -> PoolingGeometry:
        """One region per filter block (pooling over all shifts)."""
        return cls(num_blocks, shifts, PoolingMode.FullBlock, None, dims)

    @classmethod
    def regions(
        cls, num_blocks: int, shifts: int, region: int, dims: int = 1
    ) -> PoolingGeometry:
        """Non-overlapping p (or p×p) regions within each filter block."""
        return cls(num_blocks, shifts, PoolingMode.Regions, region, dims)

    @classmethod
    def for_operator(cls, op, config: Optional[PoolingConfig] = None) -> PoolingGeometry:
        """Geometry matching the coefficient layout of a structured operator."""
        config = config or PoolingConfig()
        if config.mode == PoolingMode.Regions:
            return cls.regions(op.num_blocks, op.shifts, config.region, op.dims)
        return cls.full_block(op.num_blocks, op.shifts, op.dims)

    @property
    def block_size(self) -> int:
        """Entries per filter block."""
        return self.shifts**self.dims

    @property
    def length(self) -> int:
        """Length of a coefficient vector."""
        return self.num_blocks * self.block_size

    @property
    def regions_per_block(self) -> int:
        """Pooling regions in each filter block."""
        if self.mode == PoolingMode.FullBlock:
            return 1
        return (self.shifts // self.region) ** self.dims

    @property
    def region_size(self) -> int:
        """Positions in each pooling region."""
        return self.block_size // self.regions_per_block

    @property
    def region_count(self) -> int:
        """Pooling regions over all blocks."""
        return self.num_blocks * self.regions_per_block

    @cached_property
    def index(self) -> np.ndarray:
        """Flat coefficient index of every (block, region, position-in-region).

        Positions within a 2-d tile are row-major, so lower positions are
        lower flat indices.
        """
        flat = np.arange(self.length)
        if self.mode == PoolingMode.FullBlock:
            return flat.reshape(self.num_blocks, 1, self.block_size)

        tiles, p = self.shifts // self.region, self.region
        if self.dims == 1:
            return flat.reshape(self.num_blocks, tiles, p)
        return (
            flat.reshape(self.num_blocks, tiles, p, tiles, p)
            .transpose(0, 1, 3, 2, 4)
            .reshape(self.num_blocks, tiles * tiles, p * p)
        )

    def check(self, values) -> np.ndarray:
        """Coerce to a coefficient vector of this geometry."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.length,):
            raise exceptions.DimensionMismatch(
                f"Expected coefficients of length {self.length}, got shape {values.shape}"
            )
        return values

    def to_regions(self, values) -> np.ndarray:
        """View a coefficient vector as (block, region, position)."""
        return self.check(values)[self.index]

    def from_regions(self, cells: np.ndarray) -> np.ndarray:
        """Inverse of ``to_regions``."""
        out = np.zeros(self.length)
        out[self.index] = cells
        return out


@dataclass(frozen=True, eq=False)
class Switches:
    """Within-region position of the retained value, per (block, region).

    All-zero regions record position 0.
    """

    indices: np.ndarray

    def __post_init__(self):
        """Freeze indices."""
        indices = np.array(self.indices, dtype=np.int64)
        indices.setflags(write=False)
        object.__setattr__(self, "indices", indices)

    def flat_indices(self, geom: PoolingGeometry) -> np.ndarray:
        """Coefficient index selected in every region."""
        return np.take_along_axis(geom.index, self.indices[..., None], axis=2).reshape(-1)


@dataclass(frozen=True, eq=False)
class ModelSparseSignal:
    """Coefficient vector with explicit (block, position-in-block) support."""

    coeffs: np.ndarray
    support: tuple[tuple[int, int], ...]
    sparsity: int
    block_size: int

    @classmethod
    def from_coeffs(
        cls, coeffs, block_size: int, sparsity: Optional[int] = None
    ) -> ModelSparseSignal:
        """Derive the support from the nonzero entries."""
        coeffs = np.asarray(coeffs, dtype=np.float64)
        support = tuple(
            (int(i // block_size), int(i % block_size)) for i in np.flatnonzero(coeffs)
        )
        return cls(
            coeffs, support, len(support) if sparsity is None else sparsity, block_size
        )

    @property
    def nnz(self) -> int:
        """Number of nonzero coefficients."""
        return len(self.support)

    @property
    def flat_support(self) -> list[int]:
        """Support as flat coefficient indices."""
        return [block * self.block_size + pos for block, pos in self.support]


def _draw_values(rng: np.random.Generator, size, min_magnitude: float) -> np.ndarray:
    """Uniform[-1, 1], or magnitude Uniform[min_magnitude, 1] with a random sign."""
    if not min_magnitude:
        return rng.uniform(-1.0, 1.0, size)
    return rng.uniform(min_magnitude, 1.0, size) * rng.choice([-1.0, 1.0], size)


def sample_model_sparse(
    num_blocks: int,
    shifts: int,
    k: int,
    rng: np.random.Generator,
    *,
    dims: int = 1,
    min_magnitude: float = 0.0,
) -> ModelSparseSignal:
    """Draw z ∈ M_k: k distinct blocks, one uniform position in each, uniform values."""
    if k < 0:
        raise ValueError("Sparsity must be non-negative")
    if k > num_blocks:
        raise exceptions.SparsityTooLarge(f"k={k} exceeds {num_blocks} blocks")

    block_size = shifts**dims
    blocks = np.sort(rng.choice(num_blocks, size=k, replace=False))
    positions = rng.integers(0, block_size, size=k)
    values = _draw_values(rng, k, min_magnitude)

    coeffs = np.zeros(num_blocks * block_size)
    coeffs[blocks * block_size + positions] = values
    support = tuple((int(b), int(p)) for b, p in zip(blocks, positions))
    return ModelSparseSignal(coeffs, support, k, block_size)


def sample_region_sparse(
    geom: PoolingGeometry,
    fraction: float,
    rng: np.random.Generator,
    *,
    min_magnitude: float = 0.0,
) -> ModelSparseSignal:
    """Each (block, region) cell is nonzero with probability ``fraction``."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("Fraction must lie in (0, 1]")

    shape = (geom.num_blocks, geom.regions_per_block)
    active = rng.random(shape) < fraction
    positions = rng.integers(0, geom.region_size, size=shape)
    values = _draw_values(rng, shape, min_magnitude) * active

    cells = np.zeros(shape + (geom.region_size,))
    np.put_along_axis(cells, positions[..., None], values[..., None], axis=2)
    return ModelSparseSignal.from_coeffs(
        geom.from_regions(cells), geom.block_size, int(active.sum())
    )


def max_pool(h, geom: PoolingGeometry) -> tuple[np.ndarray, Switches]:
    """Signed maximum-absolute value of every region and its position.

    Ties go to the lowest index.
    """
    cells = geom.to_regions(h)
    indices = np.argmax(np.abs(cells), axis=2)
    pooled = np.take_along_axis(cells, indices[..., None], axis=2)
    return pooled.reshape(-1), Switches(indices)


def upsample(
    pooled, switches: Union[Switches, Upsampling], geom: PoolingGeometry
) -> np.ndarray:
    """Place pooled values at their switch positions (or region starts for naive)."""
    pooled = np.asarray(pooled, dtype=np.float64)
    shape = (geom.num_blocks, geom.regions_per_block)
    if pooled.shape != (geom.region_count,):
        raise exceptions.DimensionMismatch(
            f"Expected {geom.region_count} pooled values, got shape {pooled.shape}"
        )

    if isinstance(switches, Switches):
        indices = switches.indices
        if indices.shape != shape:
            raise exceptions.DimensionMismatch(
                f"Expected switches of shape {shape}, got {indices.shape}"
            )
        if np.any((indices < 0) | (indices >= geom.region_size)):
            raise exceptions.SwitchOutOfRange(
                f"Switch positions must lie in [0, {geom.region_size})"
            )
    elif switches == Upsampling.Naive:
        indices = np.zeros(shape, dtype=np.int64)
    else:
        raise ValueError("Switch upsampling needs recorded switches")

    cells = np.zeros(shape + (geom.region_size,))
    np.put_along_axis(
        cells, indices[..., None], pooled.reshape(shape)[..., None], axis=2
    )
    return geom.from_regions(cells)


def _keep_largest(
    pooled: np.ndarray, switches: Switches, k: Optional[int], geom: PoolingGeometry
) -> np.ndarray:
    """Zero all but the k largest-magnitude pooled values (ties to lowest index)."""
    if k is None or k >= pooled.size:
        return pooled

    order = np.lexsort((switches.flat_indices(geom), -np.abs(pooled)))
    kept = np.zeros_like(pooled)
    kept[order[:k]] = pooled[order[:k]]
    return kept


def structured_approximation(
    h,
    k: Optional[int],
    geom: PoolingGeometry,
    upsampling: Upsampling = Upsampling.Switches,
) -> tuple[ModelSparseSignal, Switches]:
    """𝕄(h, k) = upsample(max-pool(h), s), keeping at most k pooled values.

    Full-block pooling needs ``k``; with regions ``k=None`` keeps every region.
    """
    if k is None and geom.mode == PoolingMode.FullBlock:
        raise ValueError("Full-block pooling requires a sparsity k")
    if k is not None and k < 0:
        raise ValueError("Sparsity must be non-negative")

    pooled, switches = max_pool(h, geom)
    pooled = _keep_largest(pooled, switches, k, geom)
    placement = switches if upsampling == Upsampling.Switches else Upsampling.Naive
    coeffs = upsample(pooled, placement, geom)

    sparsity = geom.region_count if k is None else min(k, geom.region_count)
    return ModelSparseSignal.from_coeffs(coeffs, geom.block_size, sparsity), switches


def project_model_sparse(
    h, k: Optional[int], geom: PoolingGeometry
) -> tuple[ModelSparseSignal, Switches]:
    """ℓ2-closest model-sparse vector to h (true switches)."""
    return structured_approximation(h, k, geom, Upsampling.Switches)


def is_model_sparse(z, geom: PoolingGeometry, k: Optional[int] = None) -> bool:
    """At most one nonzero per region and, when given, at most k overall."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (geom.length,):
        return False

    counts = np.count_nonzero(geom.to_regions(z), axis=2)
    if np.any(counts > 1):
        return False
    return k is None or int(counts.sum()) <= k
