"""Monte Carlo estimate of the mean fidelity.

Each trial draws an unknown state uniformly on the sphere, draws an outcome
by the Born rule, guesses the outcome's direction and scores the overlap
(1 + n.n_r)/2 between guess and truth.

Trials are split into fixed-size partitions, each with its own generator
seeded by ``(seed, partition)``, so the result does not depend on how many
workers process them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Direction, random_unit_vectors
from .parallel import ordered_map
from .povm import Povm
from .verification import overlap_kernel

PARTITION_SIZE = 1 << 16


class NormalizationError(ValueError):
    """Outcome probabilities do not sum to one: the POVM is not complete."""


def outcome_distribution(povm: Povm, probe: Direction, atol: float = 1e-12) -> np.ndarray:
    """p_r = c_r^2 ((1 + n.n_r)/2)^N for a probe state along ``probe``."""
    p = povm.weights * overlap_kernel(povm.copies, povm.vectors @ np.asarray(probe.cartesian))
    total = math.fsum(p)
    if abs(total - 1.0) > atol:
        raise NormalizationError(f"outcome probabilities sum to {total!r}, not 1")
    return p


@dataclass(frozen=True)
class SimulationConfig:
    povm: Povm
    trials: int
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True)
class SimulationResult:
    mean_fidelity: float
    standard_error: float
    frequencies: np.ndarray
    trials: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "mean_fidelity": self.mean_fidelity,
            "standard_error": self.standard_error,
            "trials": self.trials,
            "seed": self.seed,
            "frequencies": [float(f) for f in self.frequencies],
        }


def _partition(povm: Povm, seed: int, index: int, size: int):
    rng = np.random.default_rng([seed, index])
    probes = random_unit_vectors(rng, size)
    dots = probes @ povm.vectors.T
    probs = povm.weights * overlap_kernel(povm.copies, dots)
    cdf = np.cumsum(probs, axis=1)
    # renormalise per probe so round-off never leaves a gap past the last outcome
    u = rng.random(size) * cdf[:, -1]
    picks = np.minimum((cdf < u[:, None]).sum(axis=1), povm.size - 1)
    fid = 0.5 * (1.0 + dots[np.arange(size), picks])
    counts = np.bincount(picks, minlength=povm.size)
    return math.fsum(fid), math.fsum(fid * fid), counts


def run(config: SimulationConfig, workers: int | None = None) -> SimulationResult:
    """Estimate the mean fidelity; deterministic for a given seed."""
    povm, trials = config.povm, config.trials
    sizes = [PARTITION_SIZE] * (trials // PARTITION_SIZE)
    if trials % PARTITION_SIZE:
        sizes.append(trials % PARTITION_SIZE)
    parts = ordered_map(lambda k: _partition(povm, config.seed, k, sizes[k]), range(len(sizes)), workers)
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    counts = np.sum([p[2] for p in parts], axis=0)
    mean = s1 / trials
    if trials > 1:
        var = max(0.0, (s2 - trials * mean * mean) / (trials - 1))
        se = math.sqrt(var / trials)
    else:
        se = 0.0
    return SimulationResult(mean, se, counts / trials, trials, config.seed)
