"""Configuration and report schema."""

from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import (
    BaseModel,
    Extra,
    Field,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    confloat,
    conint,
    root_validator,
    validator,
)

from .constants import MAX_SEED, Command, PoolingMode, Upsampling


class _Strict(BaseModel):
    class Config:
        extra = Extra.forbid
        allow_population_by_field_name = True


class OperatorConfig(_Strict):
    """Shape of the filter bank and input."""

    dims: Literal[1, 2] = 1
    num_filters: PositiveInt = 96
    num_channels: PositiveInt = 32
    filter_len: PositiveInt = 5
    length: PositiveInt = 32
    stride: PositiveInt = 1
    normalize: bool = True

    # MRIPFB1 file replacing the random draw
    filters: Optional[Path] = None

    @root_validator(skip_on_failure=True)
    def _check_shifts(cls, values):
        span = values["length"] - values["filter_len"]
        if span < 0 or span % values["stride"]:
            raise ValueError(
                "(length - filter_len) must be a non-negative multiple of stride"
            )
        return values

    @property
    def shifts(self) -> int:
        """Filter placements per spatial dimension."""
        return (self.length - self.filter_len) // self.stride + 1


class PoolingConfig(_Strict):
    """Pooling over all shifts of a filter or over non-overlapping regions."""

    mode: PoolingMode = PoolingMode.FullBlock
    region: Optional[PositiveInt] = None

    @root_validator(skip_on_failure=True)
    def _check_region(cls, values):
        if values["mode"] == PoolingMode.Regions and values["region"] is None:
            raise ValueError("Regions pooling requires a region size")
        return values


class IhtConfig(_Strict):
    """Loop controls for model-based IHT."""

    sparsity: Optional[NonNegativeInt] = None
    max_iters: PositiveInt = 10
    residual_tol: confloat(ge=0) = 0.0
    pooling: PoolingConfig = Field(default_factory=PoolingConfig)
    upsampling: Upsampling = Upsampling.Switches


class LassoConfig(_Strict):
    """Settings for the l1-regularized least squares solver.

    When ``lam`` is unset it defaults to ``lambda_scale * ‖Wx‖_∞``.
    """

    lam: Optional[PositiveFloat] = Field(None, alias="lambda")
    lambda_scale: PositiveFloat = 0.1
    max_iters: PositiveInt = 500
    objective_tol: confloat(ge=0) = 1e-12
    power_iters: PositiveInt = 50
    safety: confloat(ge=1) = 1.01
    accelerated: bool = False


class HistogramConfig(_Strict):
    """Uniform histogram binning."""

    bins: PositiveInt = 40
    low: float = 0.0
    high: float = 2.0

    @root_validator(skip_on_failure=True)
    def _check_range(cls, values):
        if values["low"] >= values["high"]:
            raise ValueError("Histogram low must be below high")
        return values


class ExperimentConfig(_Strict):
    """Fully resolved configuration of one experiment run."""

    command: Command
    operator: OperatorConfig = Field(default_factory=OperatorConfig)
    sparsity: Optional[NonNegativeInt] = 10
    region_fraction: Optional[confloat(gt=0, le=1)] = None
    min_magnitude: confloat(ge=0, lt=1) = 0.0
    pooling: PoolingConfig = Field(default_factory=PoolingConfig)
    upsampling: Upsampling = Upsampling.Switches
    trials: PositiveInt = 1000
    seed: Optional[conint(ge=0, le=MAX_SEED)] = None
    iht: IhtConfig = Field(default_factory=IhtConfig)
    lasso: LassoConfig = Field(default_factory=LassoConfig)
    histogram: HistogramConfig = Field(default_factory=HistogramConfig)
    input: Optional[Path] = None
    output: Path = Path("runs")
    workers: PositiveInt = 1

    @validator("seed", always=True)
    def _seed_required(cls, value, values):
        command = values.get("command")
        if value is None and command not in (None, Command.Coherence):
            raise ValueError(f"A seed is required for {command.value}")
        return value

    @root_validator(skip_on_failure=True)
    def _check_experiment(cls, values):
        command, operator, pooling = (
            values["command"],
            values["operator"],
            values["pooling"],
        )
        if pooling.mode == PoolingMode.Regions and operator.shifts % pooling.region:
            raise ValueError(
                f"Pooling region {pooling.region} does not tile {operator.shifts} shifts"
            )
        if command == Command.Rip2d:
            if operator.dims != 2 or pooling.mode != PoolingMode.Regions:
                raise ValueError("rip-2d requires a 2-d operator with region pooling")
            if values["region_fraction"] is None:
                raise ValueError("rip-2d requires region_fraction")
        sparsity = values["sparsity"]
        if command in (Command.Rip1d, Command.Iht) and not sparsity:
            raise ValueError(f"{command.value} requires sparsity >= 1")
        if (
            pooling.mode == PoolingMode.FullBlock
            and command != Command.Coherence
            and (sparsity is None or sparsity > operator.num_filters)
        ):
            raise ValueError("Full-block pooling requires sparsity <= num_filters")
        return values


class CoherenceReport(BaseModel):
    """Coherence of a row-normalized operator."""

    mu: float
    rows: Optional[tuple[int, int]] = None
    params: dict[str, Any] = Field(default_factory=dict)


class Histogram(BaseModel):
    """Uniform, left-closed right-open histogram."""

    edges: list[float]
    counts: list[int]
    underflow: int = 0
    overflow: int = 0

    @property
    def sample_count(self) -> int:
        """Number of values binned, including out-of-range ones."""
        return sum(self.counts) + self.underflow + self.overflow

    def rows(self) -> list[tuple[float, float, int]]:
        """Histogram as (bin_lo, bin_hi, count) rows."""
        return list(zip(self.edges[:-1], self.edges[1:], self.counts))


class RipReport(BaseModel):
    """Empirical model-RIP ratios ‖Wᵀz‖/‖z‖.

    ``delta_hat`` is a lower bound on the true δ_k: it only covers the
    sampled signals.
    """

    ratios: list[float]
    mean: float
    stddev: float
    minimum: float = Field(alias="min")
    maximum: float = Field(alias="max")
    delta_hat: float
    params: dict[str, Any] = Field(default_factory=dict)

    class Config:
        """Accept field names as well as the min/max aliases."""

        allow_population_by_field_name = True


class BoundReport(BaseModel):
    """Reconstruction errors checked against the exact-δ reconstruction bound."""

    delta_k: float
    delta_2k: float
    bound: float
    errors: list[float]
    violations: int
    params: dict[str, Any] = Field(default_factory=dict)


class RecoveryTrial(BaseModel):
    """Recovered support of one planted activation."""

    trial: int
    support: list[tuple[int, int]]
    ratio: Optional[float] = None
    precision: Optional[float] = None
    recall: Optional[float] = None


class RecoveryReport(BaseModel):
    """Activation recovery summary across trials."""

    trials: list[RecoveryTrial]
    mean_precision: Optional[float] = None
    mean_recall: Optional[float] = None
    params: dict[str, Any] = Field(default_factory=dict)


class IhtReport(BaseModel):
    """Relative residuals of model-based IHT across trials."""

    median_residuals: list[float]
    iterations: list[int]
    improved_fraction: float
    params: dict[str, Any] = Field(default_factory=dict)
