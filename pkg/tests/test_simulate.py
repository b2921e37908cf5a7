import math

import numpy as np
import pytest

from povm_forge.catalog import catalog_get
from povm_forge.geometry import Direction, random_directions
from povm_forge.povm import Povm
from povm_forge.simulate import (PARTITION_SIZE, NormalizationError, SimulationConfig,
                                 outcome_distribution, run)
from povm_forge.verification import optimal_fidelity


class TestDistribution:
    def test_tetrahedron_at_outcome_one(self, tetrahedron):
        p = outcome_distribution(tetrahedron, tetrahedron.directions[0])
        np.testing.assert_allclose(p, [3 / 4, 1 / 12, 1 / 12, 1 / 12], atol=1e-15)

    def test_octahedron_at_north_pole(self, octahedron):
        p = outcome_distribution(octahedron, Direction.from_angles(0, 0))
        np.testing.assert_allclose(p, [2 / 3, 0, 1 / 12, 1 / 12, 1 / 12, 1 / 12], atol=1e-15)

    def test_normalised_everywhere(self, entry, rng):
        for d in random_directions(rng, 50):
            assert abs(math.fsum(outcome_distribution(entry.povm, d)) - 1) < 1e-12

    def test_non_optimal_rejected(self, tetrahedron):
        w = tetrahedron.weights.copy()
        w[0] = 0.5
        with pytest.raises(NormalizationError):
            outcome_distribution(Povm.from_arrays(2, w, tetrahedron.vectors), Direction.from_angles(0.3, 0.2))


class TestRun:
    def test_tetrahedron_million(self, tetrahedron):
        res = run(SimulationConfig(tetrahedron, 1_000_000, seed=11))
        assert abs(res.mean_fidelity - 0.75) < 0.002
        assert abs(res.mean_fidelity - 0.75) < 5 * res.standard_error
        assert res.trials == 1_000_000

    def test_n5_million(self):
        res = run(SimulationConfig(catalog_get(5).povm, 1_000_000, seed=5))
        assert abs(res.mean_fidelity - 6 / 7) < 0.002

    def test_single_trial(self, octahedron):
        res = run(SimulationConfig(octahedron, 1, seed=3))
        assert res.standard_error == 0.0
        k = int(np.argmax(res.frequencies))
        assert res.frequencies[k] == 1.0
        # the score of one trial lies between the worst and best overlaps
        assert 0.0 <= res.mean_fidelity <= 1.0

    def test_single_trial_value(self, tetrahedron):
        # replay the first draw by hand from the same stream
        rng = np.random.default_rng([9, 0])
        z = rng.uniform(-1.0, 1.0, 1)
        psi = rng.uniform(0.0, 2 * math.pi, 1)
        s = math.sqrt(1 - z[0] ** 2)
        probe = np.array([s * math.cos(psi[0]), s * math.sin(psi[0]), z[0]])
        dots = tetrahedron.vectors @ probe
        p = tetrahedron.weights * (0.5 * (1 + dots)) ** 2
        u = rng.random(1)[0] * np.cumsum(p)[-1]
        r = int(np.searchsorted(np.cumsum(p), u, side="left"))
        res = run(SimulationConfig(tetrahedron, 1, seed=9))
        assert res.mean_fidelity == pytest.approx(0.5 * (1 + dots[r]), abs=1e-15)

    def test_frequencies(self, entry):
        trials = 1_000_000
        res = run(SimulationConfig(entry.povm, trials, seed=2))
        counts = np.rint(res.frequencies * trials)
        assert counts.sum() == trials
        assert abs(math.fsum(res.frequencies) - 1) < 1e-14
        expected = entry.povm.weights / (entry.copies + 1)
        se = np.sqrt(expected * (1 - expected) / trials)
        assert np.all(np.abs(res.frequencies - expected) < 5 * se)

    def test_deterministic_and_worker_independent(self, octahedron):
        trials = 3 * PARTITION_SIZE + 17
        a = run(SimulationConfig(octahedron, trials, seed=4), workers=1)
        b = run(SimulationConfig(octahedron, trials, seed=4), workers=4)
        c = run(SimulationConfig(octahedron, trials, seed=4), workers=1)
        assert a.mean_fidelity == b.mean_fidelity == c.mean_fidelity
        assert a.standard_error == b.standard_error
        np.testing.assert_array_equal(a.frequencies, b.frequencies)

    def test_seed_changes_result(self, octahedron):
        a = run(SimulationConfig(octahedron, 10_000, seed=1))
        b = run(SimulationConfig(octahedron, 10_000, seed=2))
        assert a.mean_fidelity != b.mean_fidelity

    def test_error_shrinks_with_trials(self, tetrahedron):
        small, large = [], []
        for seed in range(20):
            small.append(run(SimulationConfig(tetrahedron, 10_000, seed)).mean_fidelity - 0.75)
            large.append(run(SimulationConfig(tetrahedron, 160_000, seed + 1000)).mean_fidelity - 0.75)
        ratio = math.sqrt(np.mean(np.square(small)) / np.mean(np.square(large)))
        # expected ratio is sqrt(16) = 4
        assert 2.0 < ratio < 8.0

    def test_standard_error_scale(self, tetrahedron):
        res = run(SimulationConfig(tetrahedron, 200_000, seed=8))
        # per-trial variance of the score is bounded by 1/4
        assert 0 < res.standard_error < 0.5 / math.sqrt(200_000)

    def test_config_rejects_zero_trials(self, tetrahedron):
        with pytest.raises(ValueError):
            SimulationConfig(tetrahedron, 0)

    def test_document(self, tetrahedron):
        doc = run(SimulationConfig(tetrahedron, 100, seed=1)).to_dict()
        assert set(doc) == {"mean_fidelity", "standard_error", "trials", "seed", "frequencies"}
        assert len(doc["frequencies"]) == 4


def test_expected_matches_closed_form(entry):
    res = run(SimulationConfig(entry.povm, 400_000, seed=entry.copies))
    assert abs(res.mean_fidelity - optimal_fidelity(entry.copies)) < 5 * res.standard_error
