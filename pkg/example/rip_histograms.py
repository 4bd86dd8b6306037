"""Example that reproduces the random-filter model-RIP histograms in text form."""

import logging

import numpy as np

from cnn_cs.constants import Upsampling
from cnn_cs.diagnostics import empirical_rip, histogram, reconstruction_experiment
from cnn_cs.model_sparse import PoolingGeometry
from cnn_cs.operator import (
    InputGeometry,
    build_operator,
    coherence,
    new_random_filterbank,
    normalize_rows,
)


def show(title: str, values) -> None:
    """Print a coarse text histogram."""
    hist = histogram(values, 20, (0.0, 2.0))
    peak = max(hist.counts) or 1
    print(title)
    for lo, hi, count in hist.rows():
        print(f"  [{lo:4.2f}, {hi:4.2f}) {'#' * (50 * count // peak)}")


def main():
    """Build a 5×1×32×96 operator and summarize 1000 random model-sparse signals."""

    logging.basicConfig(level=logging.INFO)

    bank = normalize_rows(new_random_filterbank(96, 32, 5, seed=0))
    op = build_operator(bank, InputGeometry(32))
    print("Operator shape:", op.shape, "coherence:", round(coherence(op).mu, 3))

    report = empirical_rip(op, 10, 1000, seed=0)
    print(f"‖Wᵀz‖/‖z‖ mean={report.mean:.3f} sd={report.stddev:.3f}")
    show("Model-RIP ratios", report.ratios)

    recon = reconstruction_experiment(
        op, 10, PoolingGeometry.for_operator(op), Upsampling.Switches, 1000, seed=0
    )
    show("‖WWᵀz‖/‖z‖", recon.gram_ratios)
    print(f"Reconstruction error median={np.median(recon.errors):.3f} max={max(recon.errors):.3f}")


if __name__ == "__main__":
    main()
