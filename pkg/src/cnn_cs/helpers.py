"""Helpers for running seeded trials."""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator, TypeVar

import numpy as np

T = TypeVar("T")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent PCG64 stream for one trial, derived from (seed, trial)."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial,)))
    )


class TrialStreams:
    """Iterator over (trial index, generator) pairs for a seeded experiment."""

    __slots__ = ("seed", "trials")

    def __init__(self, seed: int, trials: int):
        """Initialise streams."""
        if trials < 0:
            raise ValueError("Trial count must be non-negative")
        self.seed = seed
        self.trials = trials

    def stream(self, trial: int) -> np.random.Generator:
        """Generator owned by ``trial``."""
        return trial_rng(self.seed, trial)

    def __len__(self) -> int:
        """Number of trials."""
        return self.trials

    def __iter__(self) -> Iterator[tuple[int, np.random.Generator]]:
        """Iterator implementation."""
        for trial in range(self.trials):
            yield trial, self.stream(trial)


def run_trials(
    trial: Callable[[int, np.random.Generator], T],
    streams: TrialStreams,
    workers: int = 1,
) -> list[T]:
    """Run every trial and return results in trial order.

    Each trial owns its generator, so results do not depend on ``workers``.
    """
    if workers <= 1:
        return [trial(index, rng) for index, rng in streams]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda args: trial(*args), streams))
