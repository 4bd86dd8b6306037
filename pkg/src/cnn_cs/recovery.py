"""Reconstruction and activation recovery."""

from __future__ import annotations

import math
from typing import NamedTuple, Optional

import numpy as np

from . import exceptions
from .constants import LOGGER, Upsampling
from .model_sparse import (
    ModelSparseSignal,
    PoolingGeometry,
    max_pool,
    structured_approximation,
    upsample,
)
from .models import IhtConfig, LassoConfig
from .operator import StructuredOperator
from .utils import soft_threshold

# Objective increases smaller than this (relative) are rounding noise
ROUNDING_SLACK = 1e-12


class IhtResult(NamedTuple):
    """Final estimate, iteration count and relative residual per iteration."""

    z_hat: ModelSparseSignal
    iterations: int
    residual_history: list[float]


class LassoResult(NamedTuple):
    """Solution with the objective value after each accepted step."""

    z: np.ndarray
    objectives: list[float]
    iterations: int


def feedforward_reconstruct(
    op: StructuredOperator,
    x,
    k: Optional[int],
    geom: PoolingGeometry,
    upsampling: Upsampling = Upsampling.Switches,
) -> tuple[np.ndarray, ModelSparseSignal]:
    """One encoder/decoder pass: x̂ = Wᵀ 𝕄(Wx, k)."""
    h = op.apply_forward(x)
    z_hat, _ = structured_approximation(h, k, geom, upsampling)
    return op.apply_adjoint(z_hat.coeffs), z_hat


def model_iht(
    op: StructuredOperator,
    x,
    config: IhtConfig,
    geom: Optional[PoolingGeometry] = None,
) -> IhtResult:
    """Model-based iterative hard thresholding.

    Starts from ẑ = 0 and repeats ẑ ← 𝕄(ẑ + W(x - Wᵀẑ), k). A single
    iteration is exactly the feedforward reconstruction.
    """
    geom = geom or PoolingGeometry.for_operator(op, config.pooling)
    x = op._check(x, op.col_count, "input")
    scale = float(np.linalg.norm(x))

    z = np.zeros(op.row_count)
    residual = x
    history: list[float] = []
    signal = ModelSparseSignal.from_coeffs(z, op.block_size)
    iteration = 0
    for iteration in range(1, config.max_iters + 1):
        signal, _ = structured_approximation(
            z + op.apply_forward(residual), config.sparsity, geom, config.upsampling
        )
        z = signal.coeffs
        residual = x - op.apply_adjoint(z)
        relative = float(np.linalg.norm(residual)) / scale if scale else 0.0
        history.append(relative)
        if relative <= config.residual_tol:
            LOGGER.debug(
                "IHT reached residual %.3g after %d iterations", relative, iteration
            )
            break
    else:
        LOGGER.debug(
            "IHT stopped after max_iters=%d with residual %.3g",
            config.max_iters,
            history[-1],
        )

    return IhtResult(signal, iteration, history)


def lipschitz_bound(op: StructuredOperator, iterations: int = 50) -> float:
    """Power-iteration estimate of ‖WWᵀ‖₂ from a fixed start vector."""
    rng = np.random.default_rng(0)
    vector = rng.standard_normal(op.row_count)
    vector /= np.linalg.norm(vector)

    estimate = 0.0
    for _ in range(iterations):
        image = op.apply_forward(op.apply_adjoint(vector))
        estimate = float(np.linalg.norm(image))
        if estimate == 0.0:
            raise ValueError("Operator is zero")
        vector = image / estimate
    return estimate


def ista_l1(
    op: StructuredOperator,
    x,
    config: LassoConfig,
    support_mask=None,
    z0=None,
) -> LassoResult:
    """Minimize ‖x - Wᵀz‖² + λ‖z‖₁ by proximal gradient steps.

    Entries outside ``support_mask`` are held at zero. The objective is
    non-increasing: a step that raises it doubles the Lipschitz estimate and
    is retried (or, when accelerated, restarts the momentum first).
    """
    h = op.apply_forward(x)
    x = np.asarray(x, dtype=np.float64)

    mask = None
    if support_mask is not None:
        mask = np.asarray(support_mask, dtype=bool)
        if mask.shape != (op.row_count,):
            raise exceptions.DimensionMismatch(
                f"Support mask must have length {op.row_count}, got shape {mask.shape}"
            )

    lam = config.lam
    if lam is None:
        lam = config.lambda_scale * float(np.max(np.abs(h), initial=0.0))
    if lam == 0.0:
        return LassoResult(np.zeros(op.row_count), [float(x @ x)], 0)

    def objective(z: np.ndarray) -> float:
        residual = x - op.apply_adjoint(z)
        return float(residual @ residual + lam * np.abs(z).sum())

    def step(point: np.ndarray) -> np.ndarray:
        gradient = op.apply_forward(op.apply_adjoint(point) - x)
        candidate = soft_threshold(point - gradient / lipschitz, lam / (2 * lipschitz))
        if mask is not None:
            candidate[~mask] = 0.0
        return candidate

    lipschitz = config.safety * lipschitz_bound(op, config.power_iters)
    z = np.zeros(op.row_count) if z0 is None else np.array(z0, dtype=np.float64)
    if mask is not None:
        z[~mask] = 0.0

    current = objective(z)
    history = [current]
    point, momentum = z, 1.0
    iteration = 0
    for iteration in range(1, config.max_iters + 1):
        candidate = step(point)
        value = objective(candidate)
        if not math.isfinite(value):
            raise exceptions.NonFiniteObjective(
                f"Objective became {value} at iteration {iteration}"
            )

        if value > current:
            if value - current <= ROUNDING_SLACK * max(current, 1.0):
                break
            if config.accelerated and momentum > 1.0:
                point, momentum = z, 1.0
                continue
            lipschitz *= 2.0
            LOGGER.warning(
                "Objective increased; raising Lipschitz estimate to %.6g", lipschitz
            )
            continue

        decrease = current - value
        if config.accelerated:
            following = (1.0 + math.sqrt(1.0 + 4.0 * momentum**2)) / 2.0
            point = candidate + ((momentum - 1.0) / following) * (candidate - z)
            momentum = following
        else:
            point = candidate

        z, current = candidate, value
        history.append(value)
        if decrease <= config.objective_tol * max(history[-2], np.finfo(float).tiny):
            break

    LOGGER.debug("ISTA finished after %d iterations, objective %.6g", iteration, current)
    return LassoResult(z, history, iteration)


def recover_activation(
    op: StructuredOperator,
    x,
    config: LassoConfig,
    geom: PoolingGeometry,
) -> ModelSparseSignal:
    """Recover a model-sparse activation from x.

    An l1 solve gives an initial estimate, pooling and unpooling it fixes a
    model-sparse support, and a second solve restricted to that support
    refines the values. Regions with no energy stay empty.
    """
    initial = ista_l1(op, x, config)
    pooled, switches = max_pool(initial.z, geom)
    support = upsample(pooled, switches, geom) != 0.0
    refined = ista_l1(op, x, config, support_mask=support, z0=initial.z)
    return ModelSparseSignal.from_coeffs(refined.z, geom.block_size)
