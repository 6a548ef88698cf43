"""Airy functions and Gauss–Legendre quadrature.

These two building blocks carry every deterministic integral in the package:
the λ-integral of the crossover kernel, the Airy kernel and the Nyström
discretization of Fredholm determinants.
"""
from dataclasses import dataclass
from itertools import pairwise
import logging
import math
from typing import Callable, Final, Sequence, Tuple, Union

import numpy as np
from scipy import special

from .cache import MemoryCache
from .errors import ArgumentError, DomainError

AIRY_RANGE: Final = 200.0
"""Arguments must satisfy ``|x| <= AIRY_RANGE``."""

SERIES_CUTOFF: Final = 1.0
"""Below this magnitude the Maclaurin series is summed directly. Beyond it
the series loses digits to cancellation (its terms grow like Bi), which
shows in finite difference derivatives."""

AIRY_ABS_TOL: Final = 1e-10
"""Absolute accuracy on ``[-30, 30]``."""

AIRY_REL_TOL: Final = 1e-8
"""Relative accuracy outside ``[-30, 30]`` (until the value underflows)."""

NEWTON_TOL: Final = 1e-15
"""Convergence tolerance of the Newton iteration for Legendre nodes."""

WEIGHT_SUM_TOL: Final = 1e-13
EXACTNESS_TOL: Final = 1e-12

AI0: Final = 0.35502805388781723926
"""Ai(0) = 3^(-2/3) / Γ(2/3)."""

AIP0: Final = -0.25881940379280679840
"""Ai'(0) = -3^(-1/3) / Γ(1/3)."""

_SERIES_EPS = 1e-18
_SERIES_MAX_TERMS = 200

__log = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]


def _check_airy_argument(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) > AIRY_RANGE):
        bad = x[~(np.isfinite(x) & (np.abs(x) <= AIRY_RANGE))]
        raise DomainError(
            f'Airy functions are supported on [-{AIRY_RANGE:g}, '
            f'{AIRY_RANGE:g}], got {bad.flat[0]!r}',
            supported_interval=[-AIRY_RANGE, AIRY_RANGE],
            value=float(bad.flat[0]))


def _sum_series(x: np.ndarray, first: np.ndarray,
                ratio: Callable[[int], float]) -> np.ndarray:
    """Sum ``first * prod(x^3 / ratio(k))`` over k until the terms vanish."""
    x3 = x ** 3
    term = first.copy()
    total = first.copy()
    for k in range(_SERIES_MAX_TERMS):
        term = term * x3 / ratio(k)
        total += term
        if np.all(np.abs(term) <= _SERIES_EPS * np.maximum(np.abs(total), 1)):
            break
    return total


def _airy_series(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Maclaurin series of Ai and Ai' as ``c1 f - c2 g``."""
    c1 = AI0
    c2 = -AIP0
    one = np.ones_like(x)

    f = _sum_series(x, one, lambda k: (3 * k + 2) * (3 * k + 3))
    g = _sum_series(x, x.copy(), lambda k: (3 * k + 3) * (3 * k + 4))
    # f' starts at x^2/2 (k = 1), g' starts at 1
    df = _sum_series(x, x * x / 2, lambda k: 3 * (k + 1) * (3 * k + 5))
    dg = _sum_series(x, one, lambda k: (3 * k + 1) * (3 * k + 3))

    return c1 * f - c2 * g, c1 * df - c2 * dg


def _airy_outer(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Bessel representations, accurate for any ``x != 0``."""
    ai = np.empty_like(x)
    aip = np.empty_like(x)
    a = np.abs(x)
    zeta = 2.0 / 3.0 * a ** 1.5

    right = x > 0
    if np.any(right):
        z, xr = zeta[right], a[right]
        ai[right] = np.sqrt(xr / 3) / np.pi * special.kv(1 / 3, z)
        aip[right] = -xr / (np.pi * math.sqrt(3)) * special.kv(2 / 3, z)

    left = ~right
    if np.any(left):
        z, xl = zeta[left], a[left]
        ai[left] = np.sqrt(xl) / 3 * (special.jv(1 / 3, z)
                                      + special.jv(-1 / 3, z))
        aip[left] = xl / 3 * (special.jv(2 / 3, z) - special.jv(-2 / 3, z))

    return ai, aip


def airy_ai_and_prime(x: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Evaluate Ai and Ai' together on an array of arguments."""
    x = np.asarray(x, dtype=np.float64)
    _check_airy_argument(x)
    flat = x.ravel()
    ai = np.empty_like(flat)
    aip = np.empty_like(flat)

    inner = np.abs(flat) <= SERIES_CUTOFF
    if np.any(inner):
        ai[inner], aip[inner] = _airy_series(flat[inner])
    if not np.all(inner):
        ai[~inner], aip[~inner] = _airy_outer(flat[~inner])

    return ai.reshape(x.shape), aip.reshape(x.shape)


def _as_input_type(x, value: np.ndarray):
    if np.ndim(x) == 0:
        return float(value)
    return value


def airy_ai(x: ArrayLike):
    """Evaluate the Airy function Ai.

    :param x: A real number or an array of real numbers with
              ``|x| <= 200``.
    :return: ``float`` for scalar input, otherwise an array of the same shape.
    :raises DomainError: If any argument is outside the supported interval.
    """
    ai, _ = airy_ai_and_prime(x)
    return _as_input_type(x, ai)


def airy_ai_prime(x: ArrayLike):
    """Evaluate the derivative Ai' of the Airy function. Accepts the same
    arguments as :py:func:`airy_ai`."""
    _, aip = airy_ai_and_prime(x)
    return _as_input_type(x, aip)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a quadrature rule on ``interval``.

    Arrays are read-only, rules may be shared freely."""
    interval: Tuple[float, float]
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.nodes)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """Apply the rule to a vectorized function."""
        return float(np.dot(self.weights, f(self.nodes)))


__rule_cache = MemoryCache()


def _legendre_reference(m: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [-1, 1] by Newton iteration on P_m."""
    key = m.to_bytes(8, 'little')
    if (cached := __rule_cache.get(key)) is not None:
        return cached  # type: ignore

    i = np.arange(1, m + 1)
    x = np.cos(np.pi * (i - 0.25) / (m + 0.5))
    dp = np.ones_like(x)
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for n in range(2, m + 1):
            p0, p1 = p1, ((2 * n - 1) * x * p1 - (n - 1) * p0) / n
        dp = m * (x * p1 - p0) / (x * x - 1)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < NEWTON_TOL:
            break
    else:
        __log.warning('Legendre node iteration for m=%d did not reach %g',
                      m, NEWTON_TOL)

    w = 2.0 / ((1 - x * x) * dp * dp)
    # Ascending order, exactly symmetric
    x = x[::-1]
    w = w[::-1]
    x = (x - x[::-1]) / 2
    w = (w + w[::-1]) / 2
    x.setflags(write=False)
    w.setflags(write=False)
    __rule_cache.put(key, (x, w))
    return x, w


def gauss_legendre(m: int, a: float, b: float) -> QuadratureRule:
    """Return the ``m``-point Gauss–Legendre rule mapped to ``[a, b]``.

    The result is bit-identical for identical inputs. A rule with ``m`` nodes
    integrates polynomials up to degree ``2m - 1`` exactly.

    :raises ArgumentError: If ``m < 1`` or ``a >= b``.
    """
    if int(m) != m or m < 1:
        raise ArgumentError(f'Node count must be a positive integer, got {m}',
                            m=m)
    if not (np.isfinite(a) and np.isfinite(b)) or a >= b:
        raise ArgumentError(f'Invalid interval [{a}, {b}]', a=a, b=b)

    x, w = _legendre_reference(int(m))
    half = (b - a) / 2
    mid = (a + b) / 2
    nodes = half * x + mid
    weights = half * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule((float(a), float(b)), nodes, weights)


def composite_gauss_legendre(breaks: Sequence[float],
                             m: int) -> QuadratureRule:
    """Concatenate ``m``-point rules over the panels given by the increasing
    break points ``breaks``."""
    if len(breaks) < 2:
        raise ArgumentError('At least two break points are required',
                            breaks=list(breaks))
    rules = [gauss_legendre(m, a, b) for a, b in pairwise(breaks)]
    nodes = np.concatenate([r.nodes for r in rules])
    weights = np.concatenate([r.weights for r in rules])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule((float(breaks[0]), float(breaks[-1])),
                          nodes, weights)
