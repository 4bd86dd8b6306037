"""Model-RIP, coherence-style bounds and reconstruction statistics.

Empirical estimates sample signals from M_k; exact values enumerate every
model support, which is only feasible for tiny operators.
"""

from __future__ import annotations

from collections import defaultdict
import itertools
import math
from typing import Iterator, NamedTuple, Optional

import numpy as np

from . import exceptions
from .constants import ENUMERATION_CAP, LOGGER, Upsampling
from .helpers import TrialStreams, run_trials, trial_rng
from .model_sparse import (
    PoolingGeometry,
    project_model_sparse,
    sample_model_sparse,
    sample_region_sparse,
)
from .models import BoundReport, Histogram, HistogramConfig, RipReport
from .operator import StructuredOperator
from .recovery import feedforward_reconstruct
from .utils import relative_error

# Relative slack when comparing errors against the reconstruction bound
BOUND_SLACK = 1e-9


class Theorem1Check(NamedTuple):
    """Outcome of the sample-complexity predicate with both sides of the inequality."""

    holds: bool
    lhs: float
    rhs: float


class IdentificationCheck(NamedTuple):
    """Energy left outside the projected support against its bound."""

    energy_outside: float
    bound: float
    holds: bool


class ContaminationCheck(NamedTuple):
    """Off-support energy leaking onto a model support against its bound."""

    leakage: float
    bound: float
    holds: bool


class EstimationCheck(NamedTuple):
    """Error of the pooled estimate of z against its bound."""

    error: float
    bound: float
    holds: bool


class ReconstructionResult(NamedTuple):
    """Per-trial errors with their histogram and Gram ratios."""

    errors: list[float]
    histogram: Histogram
    gram_ratios: list[float]


def summarize(values) -> tuple[float, float, float, float]:
    """Mean, sample standard deviation, min and max."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("Nothing to summarize")
    stddev = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return float(values.mean()), stddev, float(values.min()), float(values.max())


def histogram(values, bins: int, range: tuple[float, float]) -> Histogram:
    """Uniform histogram with left-closed, right-open bins."""
    low, high = range
    if bins < 1 or not low < high:
        raise exceptions.BadRange(f"Need bins >= 1 and low < high, got {bins}, {range}")

    values = np.asarray(values, dtype=np.float64).reshape(-1)
    edges = np.linspace(low, high, bins + 1)
    inside = (values >= low) & (values < high)
    index = np.clip(np.searchsorted(edges, values[inside], side="right") - 1, 0, bins - 1)
    counts = np.bincount(index, minlength=bins)
    return Histogram(
        edges=edges.tolist(),
        counts=counts.tolist(),
        underflow=int(np.count_nonzero(values < low)),
        overflow=int(np.count_nonzero(~(values < high))),
    )


def _rip_report(ratios: list[float], params: dict) -> RipReport:
    ratios_arr = np.asarray(ratios)
    mean, stddev, minimum, maximum = summarize(ratios_arr)
    return RipReport(
        ratios=list(ratios),
        mean=mean,
        stddev=stddev,
        minimum=minimum,
        maximum=maximum,
        delta_hat=float(np.max(np.abs(ratios_arr**2 - 1.0))),
        params=params,
    )


def _ratio(vector: np.ndarray, coeffs: np.ndarray) -> float:
    return float(np.linalg.norm(vector) / np.linalg.norm(coeffs))


def empirical_rip(
    op: StructuredOperator, k: int, trials: int, seed: int, workers: int = 1
) -> RipReport:
    """Distribution of ‖Wᵀz‖/‖z‖ over random z ∈ M_k.

    ``delta_hat`` only covers the sampled signals, so it never exceeds the
    exact δ_k.
    """
    if trials < 1:
        raise ValueError("At least one trial is required")
    if k < 1:
        raise ValueError("RIP ratios need k >= 1")
    if k > op.num_blocks:
        raise exceptions.SparsityTooLarge(f"k={k} exceeds {op.num_blocks} blocks")

    def trial(_: int, rng: np.random.Generator) -> float:
        z = sample_model_sparse(op.num_blocks, op.shifts, k, rng, dims=op.dims).coeffs
        return _ratio(op.apply_adjoint(z), z)

    ratios = run_trials(trial, TrialStreams(seed, trials), workers)
    return _rip_report(
        ratios,
        {
            "num_blocks": op.num_blocks,
            "shifts": op.shifts,
            "k": k,
            "dims": op.dims,
            "geometry": "full-block",
            "trials": trials,
            "seed": seed,
        },
    )


def _maximal_supports(num_blocks: int, block_size: int, k: int) -> Iterator[tuple]:
    """Every support of M_k with exactly k nonzeros."""
    for blocks in itertools.combinations(range(num_blocks), k):
        for positions in itertools.product(range(block_size), repeat=k):
            yield tuple(b * block_size + p for b, p in zip(blocks, positions))


def support_count(op: StructuredOperator, k: int, order: int = 1) -> int:
    """Supports enumerated by ``exact_model_rip_delta``."""
    single = math.comb(op.num_blocks, k) * op.block_size**k
    return single if order == 1 else single * (single + 1) // 2


def exact_model_rip_delta(
    op: StructuredOperator, k: int, order: int = 1, cap: int = ENUMERATION_CAP
) -> float:
    """Exact δ over M_k (order 1) or sums of two M_k signals (order 2).

    Eigenvalues of a principal submatrix interlace those of the full one, so
    only supports of maximal size are enumerated.
    """
    if order not in (1, 2):
        raise ValueError("Order must be 1 or 2")
    if not 1 <= k <= op.num_blocks:
        raise exceptions.SparsityTooLarge(f"k={k} outside [1, {op.num_blocks}]")
    if (count := support_count(op, k, order)) > cap:
        raise exceptions.EnumerationTooLarge(
            f"{count} supports to enumerate exceeds cap {cap}"
        )

    dense = op.materialize_dense()
    gram = dense @ dense.T

    supports = list(_maximal_supports(op.num_blocks, op.block_size, k))
    if order == 2:
        supports = {
            tuple(sorted(set(first) | set(second)))
            for first, second in itertools.combinations_with_replacement(supports, 2)
        }

    by_size = defaultdict(list)
    for support in supports:
        by_size[len(support)].append(support)

    delta = 0.0
    for group in by_size.values():
        index = np.array(group)
        eigenvalues = np.linalg.eigvalsh(gram[index[:, :, None], index[:, None, :]])
        delta = max(
            delta,
            float(np.max(eigenvalues[:, -1] - 1.0)),
            float(np.max(1.0 - eigenvalues[:, 0])),
        )

    LOGGER.debug(
        "Exact delta (k=%d, order=%d) = %.12g over %d supports",
        k,
        order,
        delta,
        len(supports),
    )
    return delta


def theorem1_predicate(
    num_channels: int,
    filter_len: int,
    length: int,
    k: int,
    num_filters: int,
    shifts: int,
    delta: float,
    eps: float,
    C: float = 1.0,
) -> Theorem1Check:
    """Sample-complexity condition Mℓ²/D ≥ C/δ² (k(ln K + ln n) - ln ε)."""
    if min(num_channels, filter_len, length, k, num_filters, shifts, C) <= 0:
        raise ValueError("Shape parameters and C must be positive")
    if not (0.0 < delta < 1.0 and 0.0 < eps < 1.0):
        raise ValueError("delta and eps must lie in (0, 1)")

    lhs = num_channels * filter_len**2 / length
    rhs = C / delta**2 * (k * (math.log(num_filters) + math.log(shifts)) - math.log(eps))
    return Theorem1Check(lhs >= rhs, lhs, rhs)


def theorem2_bound(delta_k: float, delta_2k: float) -> float:
    """Relative error bound 5δ_2k/(1-δ_k) · √((1+δ_2k)/(1-δ_2k))."""
    if not 0.0 <= delta_k <= delta_2k < 1.0:
        raise exceptions.DeltaOutOfRange(
            f"Need 0 <= delta_k <= delta_2k < 1, got {delta_k}, {delta_2k}"
        )
    return 5.0 * delta_2k / (1.0 - delta_k) * math.sqrt((1.0 + delta_2k) / (1.0 - delta_2k))


def theorem2_compliance(
    op: StructuredOperator,
    k: int,
    draws: int = 50,
    seed: int = 0,
    upsampling: Upsampling = Upsampling.Switches,
    cap: int = ENUMERATION_CAP,
) -> BoundReport:
    """Check feedforward reconstruction errors against the exact-δ bound.

    Every maximal support of M_k gets ``draws`` random value vectors.
    """
    delta_k = exact_model_rip_delta(op, k, 1, cap)
    delta_2k = exact_model_rip_delta(op, k, 2, cap)
    bound = theorem2_bound(delta_k, delta_2k)
    geom = PoolingGeometry.for_operator(op)

    errors = []
    for index, support in enumerate(_maximal_supports(op.num_blocks, op.block_size, k)):
        rng = trial_rng(seed, index)
        for _ in range(draws):
            z = np.zeros(op.row_count)
            z[list(support)] = rng.uniform(-1.0, 1.0, k)
            x = op.apply_adjoint(z)
            x_hat, _ = feedforward_reconstruct(op, x, k, geom, upsampling)
            errors.append(relative_error(x_hat, x))

    violations = sum(error > bound * (1.0 + BOUND_SLACK) for error in errors)
    if violations:
        LOGGER.warning(
            "%d of %d reconstructions exceed bound %.6g", violations, len(errors), bound
        )
    return BoundReport(
        delta_k=delta_k,
        delta_2k=delta_2k,
        bound=bound,
        errors=errors,
        violations=violations,
        params={"k": k, "draws": draws, "seed": seed, "upsampling": upsampling.value},
    )


def identification_check(
    op: StructuredOperator, z, k: int, delta_k: float, delta_2k: float
) -> IdentificationCheck:
    """Energy of z outside the support chosen by projecting WWᵀz onto M_k."""
    geom = PoolingGeometry.for_operator(op)
    z = geom.check(z)
    chosen, _ = project_model_sparse(op.apply_forward(op.apply_adjoint(z)), k, geom)

    outside = z.copy()
    outside[chosen.flat_support] = 0.0
    energy = float(np.linalg.norm(outside))
    bound = 2.0 * delta_2k / (1.0 - delta_k) * float(np.linalg.norm(z))
    return IdentificationCheck(energy, bound, energy <= bound * (1.0 + BOUND_SLACK))


def contamination_check(
    op: StructuredOperator, z, support, delta_2k: float
) -> ContaminationCheck:
    """Leakage ‖(WWᵀ z|_{Ωᶜ})_Ω‖ of z's off-support part onto the support Ω.

    Ω must be an M_k support and z an M_k signal; the bound is then
    δ_2k‖z|_{Ωᶜ}‖.
    """
    geom = PoolingGeometry.for_operator(op)
    z = geom.check(z)
    support = np.asarray(support, dtype=np.int64).reshape(-1)
    if np.any((support < 0) | (support >= op.row_count)):
        raise exceptions.DimensionMismatch(
            f"Support indices must lie in [0, {op.row_count})"
        )
    if delta_2k < 0.0:
        raise exceptions.DeltaOutOfRange(f"delta_2k must be >= 0, got {delta_2k}")

    outside = z.copy()
    outside[support] = 0.0
    leakage = float(np.linalg.norm(op.apply_forward(op.apply_adjoint(outside))[support]))
    bound = delta_2k * float(np.linalg.norm(outside))
    return ContaminationCheck(leakage, bound, leakage <= bound * (1.0 + BOUND_SLACK))


def estimation_check(
    op: StructuredOperator, z, k: int, delta_k: float, delta_2k: float
) -> EstimationCheck:
    """Error of ẑ = (WWᵀz)|_Ω against 5δ_2k/(1-δ_k)‖z‖, Ω chosen by projection."""
    if not 0.0 <= delta_k <= delta_2k < 1.0:
        raise exceptions.DeltaOutOfRange(
            f"Need 0 <= delta_k <= delta_2k < 1, got {delta_k}, {delta_2k}"
        )
    geom = PoolingGeometry.for_operator(op)
    z = geom.check(z)
    estimate, _ = project_model_sparse(op.apply_forward(op.apply_adjoint(z)), k, geom)

    error = float(np.linalg.norm(z - estimate.coeffs))
    bound = 5.0 * delta_2k / (1.0 - delta_k) * float(np.linalg.norm(z))
    return EstimationCheck(error, bound, error <= bound * (1.0 + BOUND_SLACK))


def reconstruction_experiment(
    op: StructuredOperator,
    k: int,
    geom: PoolingGeometry,
    upsampling: Upsampling,
    trials: int,
    seed: int,
    histogram_config: Optional[HistogramConfig] = None,
    workers: int = 1,
) -> ReconstructionResult:
    """Feedforward reconstruction errors and ‖WWᵀz‖/‖z‖ over random z ∈ M_k."""
    if trials < 1:
        raise ValueError("At least one trial is required")
    histogram_config = histogram_config or HistogramConfig()

    def trial(_: int, rng: np.random.Generator) -> tuple[float, float]:
        z = sample_model_sparse(op.num_blocks, op.shifts, k, rng, dims=op.dims).coeffs
        x = op.apply_adjoint(z)
        x_hat, _ = feedforward_reconstruct(op, x, k, geom, upsampling)
        return relative_error(x_hat, x), _ratio(op.apply_forward(x), z)

    results = run_trials(trial, TrialStreams(seed, trials), workers)
    errors = [error for error, _ in results]
    return ReconstructionResult(
        errors,
        histogram(
            errors,
            histogram_config.bins,
            (histogram_config.low, histogram_config.high),
        ),
        [ratio for _, ratio in results],
    )


def rip_2d_experiment(
    op: StructuredOperator,
    geom: PoolingGeometry,
    fraction: float,
    trials: int,
    seed: int,
    max_resamples: int = 1000,
    workers: int = 1,
) -> RipReport:
    """Ratio distribution for region-sparse 2-d activations.

    All-zero draws are resampled from the same trial stream.
    """
    if op.dims != 2 or geom.dims != 2:
        raise exceptions.GeometryMismatch("rip-2d needs a 2-d operator and geometry")
    if geom.length != op.row_count:
        raise exceptions.GeometryMismatch("Pooling geometry does not match the operator")
    if trials < 1:
        raise ValueError("At least one trial is required")

    def trial(index: int, rng: np.random.Generator) -> tuple[float, int]:
        for attempt in range(max_resamples + 1):
            z = sample_region_sparse(geom, fraction, rng).coeffs
            if np.any(z):
                return _ratio(op.apply_adjoint(z), z), attempt
        raise exceptions.DegenerateSample(
            f"Trial {index} drew {max_resamples + 1} all-zero activations"
        )

    results = run_trials(trial, TrialStreams(seed, trials), workers)
    if resampled := sum(attempts for _, attempts in results):
        LOGGER.info("Resampled %d all-zero activations", resampled)

    return _rip_report(
        [ratio for ratio, _ in results],
        {
            "num_blocks": op.num_blocks,
            "shifts": op.shifts,
            "region": geom.region,
            "fraction": fraction,
            "dims": 2,
            "geometry": geom.mode.value,
            "trials": trials,
            "seed": seed,
            "resampled": resampled,
        },
    )


def frame_rank(op: StructuredOperator) -> int:
    """Rank of W; rows span the input space when it equals MD."""
    return int(np.linalg.matrix_rank(op.materialize_dense()))


def rip_ratio(op: StructuredOperator, z) -> Optional[float]:
    """‖Wᵀz‖/‖z‖, or None for z = 0."""
    z = np.asarray(z, dtype=np.float64)
    if not np.any(z):
        return None
    return _ratio(op.apply_adjoint(z), z)
