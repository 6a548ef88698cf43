import numpy as np
import pytest
import scipy.stats

from kpzlab.errors import ArgumentError
from kpzlab.stats import (
    ConfidenceInterval,
    SampleSet,
    bootstrap_ci,
    compare,
    ecdf,
    fit_power_law,
    jackknife_stderr,
    ks_distance,
    ks_two_sample,
    skewness,
    standardize,
)


def _normal(n, seed=0, label='normal'):
    return SampleSet(np.random.default_rng(seed).normal(size=n), label=label,
                     provenance={'seed': seed})


def test_sample_set_is_immutable():
    s = SampleSet([3, 1, 2])
    assert s.values.dtype == np.float64
    with pytest.raises(ValueError):
        s.values[0] = 0


def test_sample_set_rejects_non_finite_values():
    with pytest.raises(ArgumentError):
        SampleSet([1.0, np.nan])


def test_derive_keeps_provenance():
    s = _normal(10)
    derived = s.derive(s.values * 2, label='scaled', factor=2)
    assert derived.label == 'scaled'
    assert derived.provenance == {'seed': 0, 'factor': 2}
    assert s.provenance == {'seed': 0}


def test_ecdf():
    s = SampleSet([1, 2, 2, 3])
    assert ecdf(s, 0) == 0.0
    assert ecdf(s, 2) == 0.75
    assert ecdf(s, 3) == 1.0
    assert list(ecdf(s, np.array([1.5, 10]))) == [0.25, 1.0]


def test_empty_set():
    with pytest.raises(ArgumentError):
        ecdf(SampleSet([]), 0.0)


def test_ks_distance_of_a_single_point():
    s = SampleSet([0.0])
    assert ks_distance(s, scipy.stats.norm.cdf) == pytest.approx(0.5)


def test_ks_distance_of_a_constant_function():
    s = SampleSet([0.0, 1.0])
    assert ks_distance(s, lambda x: 0.5) >= 0.5


def test_ks_distance_normal_sample():
    s = _normal(4000)
    assert ks_distance(s, scipy.stats.norm.cdf) < 0.03
    shifted = s.derive(s.values + 1)
    assert ks_distance(shifted, scipy.stats.norm.cdf) > 0.3


def test_ks_two_sample():
    a = _normal(500)
    assert ks_two_sample(a, a) == 0.0
    b = _normal(500, seed=1)
    assert 0 < ks_two_sample(a, b) < 0.15


def test_standardize():
    s = SampleSet([1.0, 2.0, 3.0, 4.0])
    z = standardize(s)
    assert np.mean(z.values) == pytest.approx(0.0, abs=1e-15)
    assert np.std(z.values) == pytest.approx(1.0)
    assert z.provenance['standardized']
    with pytest.raises(ArgumentError):
        standardize(SampleSet([2.0, 2.0, 2.0]))


def test_bootstrap_ci_covers_mean():
    s = _normal(1000, seed=3)
    interval = bootstrap_ci(s, np.mean, 500, 0.05, seed=1)
    assert interval.lo < np.mean(s.values) < interval.hi
    assert 0.0 in interval
    assert interval.width < 0.2
    assert bootstrap_ci(s, np.mean, 500, 0.05, seed=1) == interval


def test_bootstrap_ci_coverage():
    rng = np.random.default_rng(21)
    repetitions = 200
    covered = 0
    for i in range(repetitions):
        s = SampleSet(rng.normal(size=500))
        covered += 0.0 in bootstrap_ci(s, np.mean, 200, 0.05, seed=i)
    assert covered >= 0.9 * repetitions


def test_bootstrap_ci_is_stable_in_resamples():
    s = _normal(500, seed=4)
    coarse = bootstrap_ci(s, np.mean, 1000, 0.05, seed=7)
    fine = bootstrap_ci(s, np.mean, 2000, 0.05, seed=7)
    assert abs(coarse.lo - fine.lo) < coarse.width / 10
    assert abs(coarse.hi - fine.hi) < coarse.width / 10


def test_bootstrap_ci_constant_sample():
    s = SampleSet([1.5] * 10)
    assert bootstrap_ci(s, np.mean, 200, 0.05, seed=0) == \
        ConfidenceInterval(1.5, 1.5)


def test_bootstrap_ci_validation():
    s = _normal(10)
    with pytest.raises(ArgumentError):
        bootstrap_ci(s, np.mean, 100, 0.05, seed=0)
    with pytest.raises(ArgumentError):
        bootstrap_ci(s, np.mean, 200, 1.0, seed=0)


def test_skewness():
    assert skewness(SampleSet([1.0, 2.0, 3.0])) == pytest.approx(0.0)
    right_tailed = SampleSet(np.random.default_rng(0).exponential(size=4000))
    assert skewness(right_tailed) > 1.5


def test_jackknife_stderr_of_mean():
    values = np.random.default_rng(5).normal(size=400)
    expected = np.std(values, ddof=1) / np.sqrt(len(values))
    assert jackknife_stderr(values) == pytest.approx(expected)
    assert jackknife_stderr(values, np.mean) == pytest.approx(expected)
    with pytest.raises(ArgumentError):
        jackknife_stderr([1.0])


def test_fit_power_law():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    fit = fit_power_law(x, 3 * x ** (2 / 3))
    assert fit.exponent == pytest.approx(2 / 3)
    assert fit.prefactor == pytest.approx(3)
    with pytest.raises(ArgumentError):
        fit_power_law([1.0], [1.0])
    with pytest.raises(ArgumentError):
        fit_power_law([1.0, 2.0], [1.0, -1.0])


def test_compare_with_distribution():
    s = _normal(2000, seed=9)
    report = compare(s, scipy.stats.norm.cdf, reference_mean=0.0,
                     reference_label='normal', B=200, seed=2)
    assert report.passed
    assert report.count == 2000
    data = report.to_dict()
    assert data['reference'] == 'normal'
    assert data['flags'] == {'ks_within_threshold': True,
                             'reference_mean_in_ci': True}


def test_compare_standardized():
    s = SampleSet(np.random.default_rng(1).normal(5, 3, size=2000))
    report = compare(s, scipy.stats.norm.cdf, standardized=True, B=200)
    assert report.standardized
    assert report.reference_mean == 0.0
    assert report.ks_distance < 0.05


def test_compare_detects_shift():
    s = _normal(2000)
    report = compare(s, scipy.stats.norm.cdf, reference_mean=1.0, B=200)
    assert not report.flags['reference_mean_in_ci']
    assert not report.passed


def test_compare_requires_reference_mean():
    with pytest.raises(ArgumentError):
        compare(_normal(10), scipy.stats.norm.cdf, B=200)


def test_compare_with_itself():
    s = _normal(300)
    report = compare(s, s, B=200)
    assert report.ks_distance == 0.0
    assert report.reference == 'normal'
    assert report.passed
