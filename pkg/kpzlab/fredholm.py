"""Fredholm determinants ``det(1 - K)`` by Nyström discretization.

The integral operator is sampled on a Gauss–Legendre rule and the weights are
split symmetrically, ``A = W^(1/2) K W^(1/2)``, so a symmetric kernel yields a
symmetric matrix. The determinant of ``I - A`` comes from an LU factorization
with the logarithm of the pivots accumulated to avoid under- and overflow.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
import logging
from typing import Callable, Final, Optional, Tuple

import numpy as np

from . import signals
from .errors import ArgumentError, ConfigurationError, NumericError, \
    ResourceError
from .special_fn import gauss_legendre

DEFAULT_NODES: Final = 40
DEFAULT_TAIL_TOL: Final = 1e-16
MAX_NODES: Final = 4000
"""Largest node count for a single determinant (the doubling run included)."""

_SCAN_STEP = 0.25
_SCAN_EXTENT = 1000.0


@dataclass(frozen=True)
class KernelDecay:
    """Decay metadata of a kernel, used to pick a truncation point.

    ``envelope`` bounds ``|k(x, x)|`` and must be vectorized. If
    ``translation_covariant`` is set, the envelope is a function of the
    distance to the lower end of the domain rather than of ``x`` itself.
    ``envelope = None`` declares a kernel which does not decay.
    """
    envelope: Optional[Callable[[np.ndarray], np.ndarray]]
    translation_covariant: bool = False


class KernelFunction(ABC):
    """A real kernel ``k(x, y)`` which can be evaluated pointwise without side
    effects."""
    label: str = 'kernel'
    domain: Tuple[float, float] = (-np.inf, np.inf)
    decay: Optional[KernelDecay] = None
    symmetric: bool = True

    @abstractmethod
    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Evaluate the kernel on broadcastable arrays ``x`` and ``y``."""
        ...

    def __call__(self, x, y):
        value = self.evaluate(np.asarray(x, dtype=np.float64),
                              np.asarray(y, dtype=np.float64))
        if np.ndim(value) == 0:
            return float(value)
        return value

    def matrix(self, nodes: np.ndarray) -> np.ndarray:
        """Return ``k(x_i, x_j)`` for all node pairs. Subclasses may override
        this with something faster; the result must not depend on the
        evaluation order."""
        return self.evaluate(nodes[:, None], nodes[None, :])

    def __repr__(self):
        return f'{self.__class__.__name__}({self.label})'


class CallableKernel(KernelFunction):
    """Wrap a vectorized function ``f(x, y)`` as a kernel."""
    def __init__(self, f: Callable[[np.ndarray, np.ndarray], np.ndarray], *,
                 label: str = 'callable',
                 decay: Optional[KernelDecay] = None,
                 symmetric: bool = True):
        self.__f = f
        self.label = label
        self.decay = decay
        self.symmetric = symmetric

    def evaluate(self, x, y):
        return np.broadcast_to(self.__f(x, y), np.broadcast(x, y).shape)


@dataclass(frozen=True)
class DeterminantResult:
    value: float
    """``det(1 - K)`` on the ``nodes_used``-point rule."""

    nodes_used: int

    truncation: float
    """Upper end of the integration interval."""

    doubling_gap: float
    """``|det_m - det_2m|``, the self-convergence error estimate."""

    lower: float = 0.0


def _nystrom_det(kernel: KernelFunction, a: float, b: float, m: int) -> float:
    rule = gauss_legendre(m, a, b)
    x = rule.nodes
    sw = np.sqrt(rule.weights)
    k = kernel.matrix(x)

    if not np.all(np.isfinite(k)):
        i, j = np.argwhere(~np.isfinite(k))[0]
        raise NumericError(f'Kernel "{kernel.label}" is not finite at '
                           f'({x[i]!r}, {x[j]!r})',
                           x=float(x[i]), y=float(x[j]))

    a_matrix = np.eye(m) - sw[:, None] * k * sw[None, :]
    # slogdet factors with partial pivoting (LAPACK getrf) and sums the
    # logarithms of the pivots
    sign, logdet = np.linalg.slogdet(a_matrix)
    value = float(sign * np.exp(logdet))
    if not np.isfinite(value):
        raise NumericError(f'Determinant of "{kernel.label}" is not finite',
                           nodes=m, interval=[a, b])
    return value


def fredholm_det(k: KernelFunction, interval: Tuple[float, float],
                 m: int = DEFAULT_NODES,
                 max_nodes: int = MAX_NODES) -> DeterminantResult:
    """Compute ``det(1 - K)`` for the kernel ``k`` restricted to ``interval``
    using an ``m``-point Gauss–Legendre rule. A second run with ``2m`` nodes
    provides the doubling gap.

    :raises ArgumentError: If ``m < 2`` or the interval is empty or infinite.
    :raises ResourceError: If ``2m`` exceeds ``max_nodes``.
    :raises NumericError: If the kernel is not finite on a node pair.
    """
    log = logging.getLogger(__name__)
    a, b = interval
    if int(m) != m or m < 2:
        raise ArgumentError(f'At least two nodes are required, got {m}', m=m)
    if not (np.isfinite(a) and np.isfinite(b)) or a >= b:
        raise ArgumentError(f'Invalid interval [{a}, {b}]', a=a, b=b)
    if 2 * m > max_nodes:
        raise ResourceError(f'{2 * m} nodes exceed the budget of {max_nodes}',
                            nodes=2 * m, budget=max_nodes)

    value = _nystrom_det(k, a, b, int(m))
    refined = _nystrom_det(k, a, b, 2 * int(m))
    result = DeterminantResult(value=value, nodes_used=int(m),
                               truncation=float(b),
                               doubling_gap=abs(value - refined),
                               lower=float(a))
    log.debug('det(1 - %s) on [%g, %g] with %d nodes: %.17g (gap %.3g)',
              k.label, a, b, m, value, result.doubling_gap)
    signals.determinant_computed.send(k, result=result, label=k.label)
    return result


def truncate_domain(k: KernelFunction, lower: float,
                    tail_tol: float = DEFAULT_TAIL_TOL) -> Tuple[float, float]:
    """Pick a finite interval ``[lower, b]`` for a kernel on
    ``[lower, inf)``, such that the decay envelope is below ``tail_tol`` at
    ``b``. ``b`` is at least ``lower + 1``.

    :raises ConfigurationError: If the kernel carries no usable decay
                                metadata.
    """
    if not (0 < tail_tol <= 1e-6):
        raise ArgumentError(f'Tail tolerance must be in (0, 1e-6], got '
                            f'{tail_tol}', tail_tol=tail_tol)
    decay = k.decay
    if decay is None or decay.envelope is None:
        raise ConfigurationError(
            f'Kernel "{k.label}" declares no decay, cannot truncate',
            kernel=k.label)

    offset = lower if decay.translation_covariant else 0.0
    chunk = 64
    start = lower + 1.0
    while start < lower + _SCAN_EXTENT:
        grid = start + _SCAN_STEP * np.arange(chunk)
        values = np.abs(np.asarray(decay.envelope(grid - offset),
                                   dtype=np.float64))
        below = np.flatnonzero(values < tail_tol)
        if below.size:
            return float(lower), float(grid[below[0]])
        start = grid[-1] + _SCAN_STEP

    raise ConfigurationError(
        f'Kernel "{k.label}" does not decay below {tail_tol:g} within '
        f'{_SCAN_EXTENT:g} of {lower:g}', kernel=k.label, tail_tol=tail_tol)
