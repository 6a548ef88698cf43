"""Exact formulas for the KPZ height with sharp wedge initial data.

The generating function of ``h(t)`` at the origin equals the Fredholm
determinant ``det(1 - P_0 K_{s,t} P_0)`` on ``L^2([0, inf))`` with the
crossover kernel

    K_{s,t}(x, y) = ∫ (1 + exp(-(t/2)^(1/3) λ + s))^(-1) Ai(x+λ) Ai(y+λ) dλ.

For ``t -> inf`` with ``s = σ (t/2)^(1/3)`` the Fermi factor tends to the
indicator of ``λ > σ`` and the determinant to the Tracy–Widom GUE
distribution ``F_GUE(σ) = det(1 - K_Ai)`` on ``L^2([σ, inf))``.
"""
from dataclasses import dataclass, replace
import logging
import math
from typing import Final, Optional, Tuple

import numpy as np
from scipy import special

from .cache import Cache, MemoryCache
from .errors import ArgumentError, NumericError
from .fredholm import (
    DEFAULT_NODES,
    DEFAULT_TAIL_TOL,
    MAX_NODES,
    DeterminantResult,
    KernelDecay,
    KernelFunction,
    fredholm_det,
    truncate_domain,
)
from .special_fn import AIRY_RANGE, airy_ai, airy_ai_and_prime, \
    composite_gauss_legendre, gauss_legendre
from .util import get_hash_key_for_array

PANEL_NODES: Final = 32
PANEL_WIDTH: Final = 2.0
ENVELOPE_CUT: Final = 1e-18
"""Both λ-tails are cut where their envelope drops below this value."""

AIRY_CUT: Final = 16.0
"""Ai(z) < 1e-18 for z >= AIRY_CUT."""

AIRY_ABS_MAX: Final = 0.5357
"""Bound on |Ai(z)| over the real line."""

TRANSITION_HALF_WIDTH: Final = 42.0
"""Half width of the Fermi-factor transition window, in units of
``(t/2)^(-1/3)``; the factor is within 1e-18 of 0 or 1 outside."""

KERNEL_GAP_TOL: Final = 1e-8
QUANTILE_GAP_TOL: Final = 1e-8
MIN_NODES: Final = 20

_LOG_CUT = math.log(ENVELOPE_CUT)

__kernel_cache: Cache = MemoryCache()


def set_kernel_cache(cache: Cache) -> None:
    """Replace the cache used for kernel matrices."""
    global __kernel_cache
    __kernel_cache = cache


def get_kernel_cache() -> Cache:
    return __kernel_cache


@dataclass(frozen=True)
class CrossoverParams:
    s: float
    """Argument of the generating function."""

    t: float
    """KPZ time, must be positive."""

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise ArgumentError(f's must be finite, got {self.s}', s=self.s)
        if not (math.isfinite(self.t) and self.t > 0):
            raise ArgumentError(f't must be positive, got {self.t}', t=self.t)

    @property
    def scale(self) -> float:
        """``(t/2)^(1/3)``."""
        return (self.t / 2) ** (1 / 3)


@dataclass(frozen=True)
class FermiFactor:
    """The map ``λ -> (1 + exp(-(t/2)^(1/3) λ + s))^(-1)``."""
    params: CrossoverParams

    @property
    def midpoint(self) -> float:
        """The λ at which the factor equals 1/2."""
        return self.params.s / self.params.scale

    def __call__(self, lam):
        value = special.expit(self.params.scale * np.asarray(lam)
                              - self.params.s)
        if np.ndim(value) == 0:
            return float(value)
        return value


def kpz_height_scale(t: float) -> Tuple[float, float]:
    """Return the large-t centering and scale of the height,
    ``h(t) ≈ -t/24 + (t/2)^(1/3) ξ``."""
    if not t > 0:
        raise ArgumentError(f't must be positive, got {t}', t=t)
    return -t / 24, (t / 2) ** (1 / 3)


def _segment_breaks(a: float, b: float, width: float) -> np.ndarray:
    n = max(1, math.ceil((b - a) / width - 1e-9))
    return np.linspace(a, b, n + 1)


def _lambda_breaks(lo: float, hi: float,
                   window: Optional[Tuple[float, float, float]],
                   refine: int) -> np.ndarray:
    """Panel break points on ``[lo, hi]``. Inside ``window = (a, b, width)``
    the panels are narrower."""
    if window is None:
        return _segment_breaks(lo, hi, PANEL_WIDTH / refine)

    w_lo = min(max(window[0], lo), hi)
    w_hi = min(max(window[1], lo), hi)
    parts = []
    for a, b, width in ((lo, w_lo, PANEL_WIDTH),
                        (w_lo, w_hi, window[2]),
                        (w_hi, hi, PANEL_WIDTH)):
        if b > a:
            segment = _segment_breaks(a, b, width / refine)
            parts.append(segment if not parts else segment[1:])
    return np.concatenate(parts)


@dataclass(frozen=True)
class _LambdaRule:
    nodes: np.ndarray
    weights: np.ndarray
    """Quadrature weights times the Fermi factor (or the indicator)."""

    @property
    def empty(self):
        return self.nodes.size == 0


def _empty_rule() -> _LambdaRule:
    return _LambdaRule(np.empty(0), np.empty(0))


def _crossover_rule(params: CrossoverParams, x_min: float,
                    refine: int) -> _LambdaRule:
    c = params.scale
    lo = (params.s + _LOG_CUT) / c
    # x + λ must stay inside the supported Airy range for all x >= x_min
    floor = -AIRY_RANGE - x_min
    if lo < floor:
        # On λ < floor the integrand is below AIRY_ABS_MAX² exp(cλ - s)
        log_dropped = 2 * math.log(AIRY_ABS_MAX) + c * floor - params.s \
            - math.log(c)
        if log_dropped > math.log(KERNEL_GAP_TOL):
            dropped = math.exp(min(log_dropped, 700.0))
            raise NumericError(
                f'The λ-integral for s={params.s:g}, t={params.t:g} reaches '
                f'beyond the Airy range (dropped mass up to {dropped:.3g})',
                s=params.s, t=params.t, lambda_cut=floor,
                dropped_bound=dropped)
        lo = floor
    hi = AIRY_CUT - x_min
    if lo >= hi:
        return _empty_rule()

    mid = params.s / c
    window = (mid - TRANSITION_HALF_WIDTH / c,
              mid + TRANSITION_HALF_WIDTH / c,
              min(PANEL_WIDTH, 4.0 / c))
    rule = composite_gauss_legendre(_lambda_breaks(lo, hi, window, refine),
                                    PANEL_NODES)
    fermi = FermiFactor(params)
    return _LambdaRule(rule.nodes, rule.weights * fermi(rule.nodes))


def _airy_rule(x_min: float, refine: int) -> _LambdaRule:
    hi = AIRY_CUT - x_min
    if hi <= 0:
        return _empty_rule()
    rule = composite_gauss_legendre(_lambda_breaks(0.0, hi, None, refine),
                                    PANEL_NODES)
    return _LambdaRule(rule.nodes, rule.weights)


def _airy_clipped(z: np.ndarray) -> np.ndarray:
    # Ai is zero in double precision long before AIRY_RANGE
    return airy_ai(np.minimum(z, AIRY_RANGE))


def _pairwise_integral(x: np.ndarray, y: np.ndarray,
                       rule: _LambdaRule) -> np.ndarray:
    if rule.empty:
        return np.zeros(x.shape)
    ax = _airy_clipped(x[:, None] + rule.nodes[None, :])
    ay = _airy_clipped(y[:, None] + rule.nodes[None, :])
    return (ax * ay) @ rule.weights


def _gram_integral(nodes: np.ndarray, rule: _LambdaRule) -> np.ndarray:
    if rule.empty:
        return np.zeros((nodes.size, nodes.size))
    a = _airy_clipped(nodes[:, None] + rule.nodes[None, :])
    k = (a * rule.weights[None, :]) @ a.T
    return (k + k.T) / 2


class _LambdaIntegralKernel(KernelFunction):
    """Kernels of the form ``∫ w(λ) Ai(x+λ) Ai(y+λ) dλ``, evaluated twice
    with the panels halved the second time."""

    __log = logging.getLogger(f'{__name__}.{__qualname__}')

    def _rule(self, x_min: float, refine: int) -> _LambdaRule:
        raise NotImplementedError

    def _cache_tag(self) -> Tuple[float, ...]:
        raise NotImplementedError

    def _check(self, coarse: np.ndarray, fine: np.ndarray) -> None:
        gap = float(np.max(np.abs(coarse - fine), initial=0.0))
        if gap > KERNEL_GAP_TOL:
            raise NumericError(
                f'λ-quadrature for "{self.label}" did not converge '
                f'(gap {gap:.3g})', gap=gap, kernel=self.label)

    def evaluate(self, x, y):
        x, y = np.broadcast_arrays(x, y)
        shape = x.shape
        x = x.ravel()
        y = y.ravel()
        if x.size == 0:
            return np.zeros(shape)
        self._check_domain(x, y)
        x_min = float(min(x.min(), y.min()))
        coarse = _pairwise_integral(x, y, self._rule(x_min, 1))
        fine = _pairwise_integral(x, y, self._rule(x_min, 2))
        self._check(coarse, fine)
        return fine.reshape(shape)

    def matrix(self, nodes):
        nodes = np.asarray(nodes, dtype=np.float64)
        cache = get_kernel_cache()
        key = get_hash_key_for_array(nodes, extra=self._cache_tag())
        if (cached := cache.get(key)) is not None:
            self.__log.debug('Kernel matrix cache hit for %s (%d nodes)',
                             self.label, nodes.size)
            return cached

        self._check_domain(nodes, nodes)
        x_min = float(nodes.min())
        coarse = _gram_integral(nodes, self._rule(x_min, 1))
        fine = _gram_integral(nodes, self._rule(x_min, 2))
        self._check(coarse, fine)
        fine.setflags(write=False)
        cache.put(key, fine)
        return fine

    def diagonal(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        return self.evaluate(x, x)

    def _check_domain(self, x, y) -> None:
        pass


class CrossoverKernel(_LambdaIntegralKernel):
    """The kernel ``K_{s,t}`` restricted to ``[0, inf)^2``."""

    def __init__(self, params: CrossoverParams):
        self.params = params
        self.label = f'K(s={params.s:g}, t={params.t:g})'
        self.domain = (0.0, np.inf)
        self.decay = KernelDecay(self.diagonal)

    def _rule(self, x_min, refine):
        return _crossover_rule(self.params, x_min, refine)

    def _cache_tag(self):
        return (1.0, self.params.s, self.params.t)

    def _check_domain(self, x, y):
        if np.any(x < 0) or np.any(y < 0):
            raise ArgumentError('The crossover kernel is evaluated on '
                                '[0, inf) only', kernel=self.label)


class AiryKernel(_LambdaIntegralKernel):
    """The Airy kernel ``∫_0^inf Ai(x+λ) Ai(y+λ) dλ``."""

    def __init__(self):
        self.label = 'Airy'
        self.decay = KernelDecay(airy_kernel_diagonal)

    def _rule(self, x_min, refine):
        return _airy_rule(x_min, refine)

    def _cache_tag(self):
        return (0.0,)


def airy_kernel_diagonal(x):
    """Closed form ``K_Ai(x, x) = Ai'(x)^2 - x Ai(x)^2``."""
    ai, aip = airy_ai_and_prime(x)
    return aip * aip - np.asarray(x) * ai * ai


def crossover_kernel(x: float, y: float, p: CrossoverParams) -> float:
    """Evaluate ``K_{s,t}(x, y)`` for ``x, y >= 0``.

    :raises NumericError: If the two λ-resolutions disagree by more than
                          :py:data:`KERNEL_GAP_TOL`.
    """
    return CrossoverKernel(p)(x, y)


def airy_kernel(x: float, y: float) -> float:
    """Evaluate the Airy kernel at ``(x, y)``."""
    return AiryKernel()(x, y)


def _check_nodes(m: int) -> None:
    if int(m) != m or m < MIN_NODES:
        raise ArgumentError(f'At least {MIN_NODES} nodes are required, '
                            f'got {m}', m=m)


def _clip_probability(result: DeterminantResult) -> DeterminantResult:
    # Roundoff can push the determinant of a positive kernel above one
    return replace(result, value=float(np.clip(result.value, 0.0, 1.0)))


def kpz_genfun(p: CrossoverParams, m: int = DEFAULT_NODES,
               tail_tol: float = DEFAULT_TAIL_TOL,
               max_nodes: int = MAX_NODES) -> DeterminantResult:
    """Evaluate ``E exp(-e^(-s) e^(h(t) + t/24)) = det(1 - P_0 K_{s,t} P_0)``.
    """
    _check_nodes(m)
    kernel = CrossoverKernel(p)
    interval = truncate_domain(kernel, 0.0, tail_tol)
    return _clip_probability(fredholm_det(kernel, interval, m, max_nodes))


def tw_gue_determinant(sigma: float, m: int = DEFAULT_NODES,
                       tail_tol: float = DEFAULT_TAIL_TOL,
                       max_nodes: int = MAX_NODES) -> DeterminantResult:
    """``det(1 - K_Ai)`` on ``[σ, inf)``, including the doubling gap."""
    _check_nodes(m)
    if not math.isfinite(sigma):
        raise ArgumentError(f'σ must be finite, got {sigma}', sigma=sigma)
    kernel = AiryKernel()
    interval = truncate_domain(kernel, float(sigma), tail_tol)
    return _clip_probability(fredholm_det(kernel, interval, m, max_nodes))


def tw_gue_cdf(sigma: float, m: int = DEFAULT_NODES,
               tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    """The Tracy–Widom GUE distribution function ``F_GUE(σ)``."""
    return tw_gue_determinant(sigma, m, tail_tol).value


def tw_gue_quantile(probability: float, m: int = DEFAULT_NODES,
                    tol: float = 1e-10) -> float:
    """Locate ``σ`` with ``F_GUE(σ) = probability`` by bisection.

    The determinant at the final point must agree between the ``m`` and
    ``2m`` resolutions to :py:data:`QUANTILE_GAP_TOL`.
    """
    if not 0 < probability < 1:
        raise ArgumentError(f'Probability must be in (0, 1), got '
                            f'{probability}', probability=probability)
    lo, hi = -10.0, 6.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if tw_gue_cdf(mid, m) < probability:
            lo = mid
        else:
            hi = mid

    sigma = (lo + hi) / 2
    result = tw_gue_determinant(sigma, m)
    if result.doubling_gap > QUANTILE_GAP_TOL:
        raise NumericError(
            f'Resolutions {m} and {2 * m} disagree at σ={sigma:g}',
            sigma=sigma, doubling_gap=result.doubling_gap)
    return sigma


@dataclass(frozen=True)
class DistributionMoments:
    mean: float
    variance: float
    skewness: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


def tw_gue_moments(m: int = DEFAULT_NODES,
                   quadrature_nodes: int = 48) -> DistributionMoments:
    """Mean, variance and skewness of the Tracy–Widom GUE distribution,
    integrating ``E X^k = ∫_0 k x^(k-1) (1 - F) - ∫^0 k x^(k-1) F`` over
    ``[-10, 0]`` and ``[0, 8]``."""
    left = gauss_legendre(quadrature_nodes, -10.0, 0.0)
    right = gauss_legendre(quadrature_nodes, 0.0, 8.0)
    f_left = np.array([tw_gue_cdf(x, m) for x in left.nodes])
    f_right = np.array([tw_gue_cdf(x, m) for x in right.nodes])

    def raw_moment(k):
        weight_left = k * left.nodes ** (k - 1)
        weight_right = k * right.nodes ** (k - 1)
        return (np.dot(right.weights, weight_right * (1 - f_right))
                - np.dot(left.weights, weight_left * f_left))

    m1, m2, m3 = raw_moment(1), raw_moment(2), raw_moment(3)
    variance = m2 - m1 * m1
    third = m3 - 3 * m1 * m2 + 2 * m1 ** 3
    return DistributionMoments(float(m1), float(variance),
                               float(third / variance ** 1.5))


def tw_gue_table(grid, m: int = DEFAULT_NODES) -> np.ndarray:
    """Evaluate ``F_GUE`` on an increasing grid of σ values."""
    return np.array([tw_gue_cdf(float(sigma), m) for sigma in grid])


def standardized_tw_gue_cdf(moments: Optional[DistributionMoments] = None,
                            m: int = DEFAULT_NODES, step: float = 0.05):
    """Return ``z -> F_GUE(mean + std z)``, the distribution function of the
    standardized Tracy–Widom GUE variable.

    ``F_GUE`` is tabulated on ``[-8, 6]`` and interpolated with a monotone
    cubic, which keeps comparisons against thousands of samples cheap."""
    from scipy.interpolate import PchipInterpolator

    if moments is None:
        moments = tw_gue_moments(m)
    grid = np.arange(-8.0, 6.0 + step / 2, step)
    interpolant = PchipInterpolator(grid, tw_gue_table(grid, m),
                                    extrapolate=False)
    mean, std = moments.mean, moments.std

    def cdf(z):
        sigma = mean + std * np.asarray(z, dtype=np.float64)
        values = np.where(sigma < grid[0], 0.0,
                          np.where(sigma > grid[-1], 1.0,
                                   interpolant(np.clip(sigma, grid[0],
                                                       grid[-1]))))
        values = np.clip(values, 0.0, 1.0)
        return float(values) if values.ndim == 0 else values

    return cdf
