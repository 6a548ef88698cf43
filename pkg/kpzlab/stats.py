"""Compare Monte Carlo samples with exact distributions and with each other.
"""
from dataclasses import dataclass, field
import logging
from typing import Any, Callable, Dict, Final, NamedTuple, Optional, \
    Sequence, Tuple, Union

import numpy as np
import scipy.stats

from . import rng
from .errors import ArgumentError

MIN_RESAMPLES: Final = 200
STANDARDIZE_TOL: Final = 1e-12

__log = logging.getLogger(__name__)

Cdf = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SampleSet:
    """An immutable set of i.i.d. scalar observables.

    ``provenance`` records how the values were produced (seed, parameters,
    tool version) and travels with every derived set."""
    values: np.ndarray
    label: str = ''
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(values)):
            raise ArgumentError(f'Sample set "{self.label}" contains '
                                'non-finite values', label=self.label)
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return len(self.values)

    def derive(self, values: np.ndarray, label: Optional[str] = None,
               **provenance) -> 'SampleSet':
        """Create a set from ``values`` which inherits this set's
        provenance."""
        return SampleSet(values, self.label if label is None else label,
                         {**self.provenance, **provenance})


def _require_values(s: SampleSet) -> np.ndarray:
    if len(s) == 0:
        raise ArgumentError(f'Sample set "{s.label}" is empty',
                            label=s.label)
    return s.values


def ecdf(s: SampleSet, x):
    """Fraction of values ``<= x``. Accepts scalar or array ``x``."""
    ordered = np.sort(_require_values(s))
    result = np.searchsorted(ordered, x, side='right') / len(ordered)
    if np.ndim(x) == 0:
        return float(result)
    return result


def ks_distance(s: SampleSet, F: Cdf) -> float:
    """Kolmogorov–Smirnov distance ``sup |ECDF - F|`` between the sample
    and the distribution function ``F``.

    Scalar results of ``F`` are broadcast over the sample; both one-sided
    deviations at each jump of the empirical function are taken into
    account."""
    values = _require_values(s)
    result = scipy.stats.kstest(
        values, lambda v: np.broadcast_to(F(v), np.shape(v)), method='asymp')
    return float(np.clip(result.statistic, 0.0, 1.0))


def ks_two_sample(a: SampleSet, b: SampleSet) -> float:
    """Kolmogorov–Smirnov distance between two empirical distributions."""
    result = scipy.stats.ks_2samp(_require_values(a), _require_values(b),
                                  method='asymp')
    return float(result.statistic)


def standardize(s: SampleSet) -> SampleSet:
    """Subtract the sample mean and divide by the (population) standard
    deviation.

    :raises ArgumentError: If all values are equal."""
    values = _require_values(s)
    mean = np.mean(values)
    std = np.std(values)
    if not std > STANDARDIZE_TOL * max(1.0, abs(mean)):
        raise ArgumentError(f'Sample set "{s.label}" has zero variance',
                            label=s.label)
    return s.derive((values - mean) / std, standardized=True)


class ConfidenceInterval(NamedTuple):
    lo: float
    hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, value) -> bool:
        return self.lo <= value <= self.hi


def bootstrap_ci(s: SampleSet, statistic: Callable[[np.ndarray], float],
                 B: int, alpha: float, seed: int) -> ConfidenceInterval:
    """Percentile bootstrap interval for ``statistic`` at level
    ``1 - alpha``, with ``B`` resamples drawn from substream 0 of
    ``seed``."""
    values = _require_values(s)
    if B < MIN_RESAMPLES:
        raise ArgumentError(f'At least {MIN_RESAMPLES} resamples are '
                            f'required, got {B}', B=B)
    if not (0 < alpha < 1):
        raise ArgumentError(f'alpha must lie in (0, 1), got {alpha}',
                            alpha=alpha)

    if np.all(values == values[0]):
        value = float(statistic(values))
        return ConfidenceInterval(value, value)

    result = scipy.stats.bootstrap(
        (values,), statistic, n_resamples=B, confidence_level=1 - alpha,
        method='percentile', vectorized=False,
        random_state=rng.substream(seed, 0))
    interval = result.confidence_interval
    return ConfidenceInterval(float(interval.low), float(interval.high))


def skewness(s: SampleSet) -> float:
    """Sample skewness (the biased moment estimator)."""
    return float(scipy.stats.skew(_require_values(s)))


def jackknife_stderr(values: Union[Sequence[float], np.ndarray],
                     statistic: Optional[Callable[[np.ndarray], float]]
                     = None) -> float:
    """Jackknife standard error of ``statistic`` (the mean by default) from
    the leave-one-out estimates."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if n < 2:
        raise ArgumentError(f'The jackknife needs two or more values, got {n}',
                            count=n)
    if statistic is None:
        estimates = (np.sum(values) - values) / (n - 1)
    else:
        keep = np.ones(n, dtype=bool)
        estimates = np.empty(n)
        for i in range(n):
            keep[i] = False
            estimates[i] = statistic(values[keep])
            keep[i] = True
    spread = estimates - np.mean(estimates)
    return float(np.sqrt((n - 1) / n * np.dot(spread, spread)))


class PowerLawFit(NamedTuple):
    exponent: float
    prefactor: float


def fit_power_law(x: Sequence[float], y: Sequence[float]) -> PowerLawFit:
    """Least squares fit of ``y = prefactor * x^exponent`` in log-log
    coordinates."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y) or len(x) < 2:
        raise ArgumentError('A power law fit needs at least two points of '
                            'matching length')
    if np.any(x <= 0) or np.any(y <= 0):
        raise ArgumentError('A power law fit needs positive data')
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return PowerLawFit(float(slope), float(np.exp(intercept)))


@dataclass(frozen=True)
class ComparisonReport:
    """The outcome of :py:func:`compare`."""
    sample: str
    reference: str
    count: int
    ks_distance: float
    ks_threshold: float
    mean_ci: ConfidenceInterval
    reference_mean: float
    skewness: float
    standardized: bool

    @property
    def flags(self) -> Dict[str, bool]:
        return {
            'ks_within_threshold': self.ks_distance < self.ks_threshold,
            'reference_mean_in_ci': self.reference_mean in self.mean_ci,
        }

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            'sample': self.sample,
            'reference': self.reference,
            'count': self.count,
            'ks_distance': self.ks_distance,
            'ks_threshold': self.ks_threshold,
            'mean_ci': list(self.mean_ci),
            'reference_mean': self.reference_mean,
            'skewness': self.skewness,
            'standardized': self.standardized,
            'flags': self.flags,
            'passed': self.passed,
        }


def compare(s: SampleSet, reference: Union[SampleSet, Cdf], *,
            reference_mean: Optional[float] = None,
            reference_label: str = 'cdf',
            standardized: bool = False,
            ks_threshold: float = 0.1,
            B: int = 1000, alpha: float = 0.05,
            seed: int = 0) -> ComparisonReport:
    """Compare a sample with a reference sample or distribution function.

    With ``standardized`` both sides are standardized first; a distribution
    function reference is then assumed to be standardized already, with mean
    0 unless ``reference_mean`` says otherwise.
    """
    if standardized:
        s = standardize(s)

    if isinstance(reference, SampleSet):
        if standardized:
            reference = standardize(reference)
        distance = ks_two_sample(s, reference)
        if reference_mean is None:
            reference_mean = float(np.mean(reference.values))
        reference_label = reference.label
    else:
        distance = ks_distance(s, reference)
        if reference_mean is None:
            if not standardized:
                raise ArgumentError('A reference mean is required to compare '
                                    'against an unstandardized distribution')
            reference_mean = 0.0

    interval = bootstrap_ci(s, np.mean, B, alpha, seed)
    __log.debug('KS distance of "%s" to "%s": %g', s.label, reference_label,
                distance)
    return ComparisonReport(s.label, reference_label, len(s), distance,
                            ks_threshold, interval, float(reference_mean),
                            skewness(s), standardized)
