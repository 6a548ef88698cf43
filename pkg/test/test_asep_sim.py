import math

import numpy as np
import pytest

from kpzlab.asep_sim import (
    AsepParams,
    ExclusionState,
    build_ring_generator,
    heisenberg_generator,
    minimum_window,
    ring_configurations,
    ring_transition_probabilities,
    run_step_farm,
    simulate_ring,
    simulate_step_ic,
    spectral_check,
    weak_asymmetry_preset,
)
from kpzlab.errors import ArgumentError, ResourceError
from kpzlab.kpz_exact import standardized_tw_gue_cdf
from kpzlab.stats import SampleSet, compare, fit_power_law, skewness

TASEP = AsepParams(0.0, 1.0)


def test_params_validation():
    with pytest.raises(ArgumentError):
        AsepParams(0.6, 0.6)
    with pytest.raises(ArgumentError):
        AsepParams(-0.1, 1.1)
    assert AsepParams.from_right_rate(0.25) == AsepParams(0.25, 0.75)
    assert AsepParams(0.5, 0.5).is_symmetric


def test_weak_asymmetry_preset():
    params, time_scale = weak_asymmetry_preset(0.01)
    assert params.q - params.p == pytest.approx(0.1)
    assert params.p + params.q == pytest.approx(1.0, abs=1e-15)
    assert time_scale == pytest.approx(1e4)
    with pytest.raises(ArgumentError):
        weak_asymmetry_preset(0.0)


def test_ring_configurations():
    configurations = ring_configurations(4, 2)
    assert len(configurations) == 6
    assert configurations[0] == (1, 1, 0, 0)
    assert all(sum(c) == 2 for c in configurations)


def test_ring_generator_tasep_cycle():
    g = build_ring_generator(3, 1, AsepParams(1.0, 0.0))
    assert len(g) == 3
    for a in range(3):
        row = g.matrix[a]
        assert row[a] == -1.0
        assert np.count_nonzero(row) == 2
        assert np.sum(row) == 0.0
    # (1, 0, 0) -> (0, 1, 0)
    assert g.matrix[g.index((1, 0, 0)), g.index((0, 1, 0))] == 1.0


def test_ring_generator_frozen_sector():
    g = build_ring_generator(3, 3, AsepParams(0.5, 0.5))
    assert len(g) == 1
    assert g.matrix.shape == (1, 1)
    assert g.matrix[0, 0] == 0.0
    assert spectral_check(g) == (0.0, 1)


def test_ring_generator_symmetric_case():
    g = build_ring_generator(6, 3, AsepParams(0.5, 0.5))
    assert np.array_equal(g.matrix, g.matrix.T)


def test_ring_generator_is_read_only():
    g = build_ring_generator(4, 2, TASEP)
    with pytest.raises(ValueError):
        g.matrix[0, 0] = 1


@pytest.mark.parametrize('L, k, p', [(6, 3, 0.6), (8, 4, 0.7), (8, 2, 1.0)])
def test_uniform_measure_is_invariant(L, k, p):
    g = build_ring_generator(L, k, AsepParams.from_right_rate(p))
    assert np.all(np.abs(g.matrix.sum(axis=1)) <= 1e-13)
    uniform = np.full(len(g), 1 / len(g))
    assert np.max(np.abs(uniform @ g.matrix)) < 1e-12

    summary = spectral_check(g)
    assert abs(summary.max_real_part) < 1e-10
    assert summary.zero_multiplicity == 1


def test_ring_generator_limits():
    with pytest.raises(ArgumentError):
        build_ring_generator(13, 2, TASEP)
    with pytest.raises(ArgumentError):
        build_ring_generator(4, 5, TASEP)
    with pytest.raises(ArgumentError):
        build_ring_generator(4, 2, TASEP).index((1, 1, 1, 0))


def test_spectral_check_size_limit():
    with pytest.raises(ResourceError):
        spectral_check(_Large())


class _Large:
    L = 14
    k = 7
    matrix = np.zeros((1, 1))

    def __len__(self):
        return 3432


@pytest.mark.parametrize('L, k', [(4, 2), (5, 2), (6, 3)])
def test_heisenberg_form_matches_symmetric_generator(L, k):
    spin_chain = heisenberg_generator(L, k)
    direct = build_ring_generator(L, k, AsepParams(0.5, 0.5))
    assert spin_chain.configurations == direct.configurations
    assert np.max(np.abs(spin_chain.matrix - direct.matrix)) < 1e-12


def test_heisenberg_form_size_limit():
    with pytest.raises(ArgumentError):
        heisenberg_generator(11, 5)


def test_ring_transition_probabilities():
    g = build_ring_generator(5, 2, AsepParams(0.3, 0.7))
    initial = (1, 1, 0, 0, 0)
    assert ring_transition_probabilities(g, 0.0, initial)[g.index(initial)] \
        == pytest.approx(1.0)
    row = ring_transition_probabilities(g, 2.0, initial)
    assert np.sum(row) == pytest.approx(1.0, abs=1e-12)
    late = ring_transition_probabilities(g, 200.0, initial)
    assert np.max(np.abs(late - 1 / len(g))) < 1e-10


@pytest.mark.parametrize('t', [0.5, 50.0])
def test_ring_simulation_matches_generator(t):
    L, k = 6, 3
    params = AsepParams(0.7, 0.3)
    g = build_ring_generator(L, k, params)
    initial = (1, 1, 1, 0, 0, 0)
    expected = ring_transition_probabilities(g, t, initial)

    trials = 20000
    counts = np.zeros(len(g))
    for i in range(trials):
        state = simulate_ring(L, k, params, t, seed=11, initial=initial,
                              trajectory_index=i)
        counts[g.index(state.occupation)] += 1

    observed = counts / trials
    # Configurations that are almost never reached still allow a few hits
    floor = np.maximum(expected, 1 / trials)
    sigma = np.sqrt(floor * (1 - expected) / trials)
    assert np.all(np.abs(observed - expected) <= 4 * sigma + 1e-12)


def test_ring_simulation_conserves_particles():
    state = simulate_ring(8, 3, TASEP, 25.0, seed=5, check=True)
    assert state.particle_count == 3
    assert int(state.occupation.sum()) == 3
    assert state.periodic
    assert state.time == 25.0


def test_ring_simulation_rejects_initial_state():
    with pytest.raises(ArgumentError):
        simulate_ring(4, 2, TASEP, 1.0, seed=0, initial=(1, 1, 1, 0))


def test_minimum_window():
    assert minimum_window(100) == 100 + 100 + 1
    assert minimum_window(0) == 1


def test_step_ic_at_time_zero():
    trajectory = simulate_step_ic(TASEP, 5, 0.0, seed=1, tags=(1, 3))
    state = trajectory.state
    assert trajectory.current == 0
    assert trajectory.events == 0
    assert state.window == (-5, 5)
    assert list(state.occupation) == [0] * 6 + [1] * 5
    assert list(state.positions) == [1, 2, 3, 4, 5]
    assert trajectory.tagged == {1: 1, 3: 3}
    assert list(state.height_profile()) == [-abs(j) for j in range(-5, 6)]


def test_step_ic_validation():
    with pytest.raises(ArgumentError):
        simulate_step_ic(TASEP, 50, -1.0, seed=1)
    with pytest.raises(ArgumentError):
        simulate_step_ic(TASEP, 100, 100.0, seed=1)
    with pytest.raises(ArgumentError):
        simulate_step_ic(TASEP, 20, 1.0, seed=1, tags=(0,))
    with pytest.raises(ArgumentError):
        simulate_step_ic(TASEP, 20, 1.0, seed=1, sample_times=[0.5, 0.2])


def test_step_ic_current_counts_particles_left_of_origin():
    params = AsepParams(0.3, 0.7)
    W = minimum_window(40)
    for i in range(5):
        trajectory = simulate_step_ic(params, W, 40.0, seed=3,
                                      trajectory_index=i, check=True)
        state = trajectory.state
        left = state.occupation[state.sites <= 0].sum()
        assert trajectory.current == left
        assert trajectory.height == 2 * left
        assert state.height_profile()[W] == trajectory.height


def test_step_ic_is_reproducible():
    W = minimum_window(30)
    first = simulate_step_ic(TASEP, W, 30.0, seed=9, tags=(1, 2),
                             sample_times=[10.0, 20.0, 30.0])
    second = simulate_step_ic(TASEP, W, 30.0, seed=9, tags=(1, 2),
                              sample_times=[10.0, 20.0, 30.0])
    assert np.array_equal(first.current_samples, second.current_samples)
    assert np.array_equal(first.tagged_samples, second.tagged_samples)
    assert np.array_equal(first.state.occupation, second.state.occupation)
    assert first.current_samples[-1] == first.current


def test_step_ic_tagged_particles():
    W = minimum_window(30)
    trajectory = simulate_step_ic(TASEP, W, 30.0, seed=2, tags=(1, 2, 10),
                                  sample_times=[10.0, 20.0, 30.0])
    x = trajectory.tagged_samples
    # Particles only move left and keep their order
    assert np.all(np.diff(x, axis=0) <= 0)
    assert np.all(np.diff(x, axis=1) > 0)
    assert x[-1, 0] == trajectory.tagged[1]
    assert x[0, 0] <= 1


def test_step_farm_symmetric_mean_current():
    result = run_step_farm(AsepParams(0.5, 0.5), [50.0], 2000, seed=4)
    current = result.current[:, 0]
    stderr = np.std(current) / math.sqrt(len(current))
    assert abs(np.mean(current)) < 4 * stderr


def test_step_farm_tasep_current():
    result = run_step_farm(TASEP, [50.0, 100.0, 200.0], 500, seed=8)
    ratios = np.mean(result.current, axis=0) / result.sample_times
    # E N(t) = t/4 + O(t^(1/3)) from above
    assert 0.25 < ratios[2] < ratios[1] < ratios[0]
    assert ratios[1] < 0.30


def test_step_farm_validation():
    with pytest.raises(ArgumentError):
        run_step_farm(TASEP, [10.0], 0, seed=1)
    with pytest.raises(ArgumentError):
        run_step_farm(TASEP, [], 10, seed=1)


def test_step_farm_does_not_depend_on_workers():
    serial = run_step_farm(TASEP, [5.0, 10.0], 8, seed=6, tags=(1,))
    parallel = run_step_farm(TASEP, [5.0, 10.0], 8, seed=6, tags=(1,),
                             workers=2)
    assert np.array_equal(serial.current, parallel.current)
    assert np.array_equal(serial.tagged, parallel.tagged)
    assert serial.tagged.shape == (8, 2, 1)


def test_tasep_fluctuations_are_kpz_like():
    times = [50.0, 100.0, 200.0, 400.0]
    result = run_step_farm(TASEP, times, 1500, seed=20240101)
    variances = np.var(result.current, axis=0)
    fit = fit_power_law(times, variances)
    assert abs(fit.exponent - 2 / 3) < 0.1

    final = SampleSet(result.current[:, -1], label='N(400)')
    assert skewness(final) < 0

    # Spread the integer current uniformly over unit cells before comparing
    # with a continuous distribution
    jitter = np.random.default_rng(0).uniform(-0.5, 0.5, len(final))
    report = compare(final.derive(-final.values + jitter),
                     standardized_tw_gue_cdf(), standardized=True,
                     ks_threshold=0.1, B=200)
    assert report.ks_distance < 0.1


def test_exclusion_state_helpers():
    state = ExclusionState((-2, 2), np.array([0, 0, 0, 1, 1], dtype=np.int8),
                           np.array([1, 2]))
    assert state.is_occupied(5)
    assert not state.is_occupied(-5)
    assert state.is_occupied(1)
    assert not state.is_occupied(0)
    copy = state.copy()
    copy.occupation[0] = 1
    assert state.occupation[0] == 0
