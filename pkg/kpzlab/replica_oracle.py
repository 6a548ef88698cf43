"""Replica moments by imaginary time propagation.

The ``n``-point function ``E[Z(x_1, t) ... Z(x_n, t)]`` of the stochastic
heat equation with delta initial data solves the imaginary time Schrödinger
equation of ``n`` bosons with attractive delta interaction,

    H_n = -1/2 sum_j ∂²/∂x_j² - 1/2 sum_{i != j} δ(x_i - x_j),

started from all particles at the origin. This module propagates that
equation on a grid for ``n <= 3`` and reads off the value at the origin, an
oracle for :py:func:`kpzlab.she_sim.moment_estimator` that shares none of its
randomness.

On the grid each coordinate delta carries mass ``1/dx`` and the interaction
acts on coinciding grid points, with depth ``1/dx`` per unordered pair.
"""
from dataclasses import dataclass
import itertools
import logging
import math
from typing import Final, List, NamedTuple, Optional, Tuple

import numpy as np

from .errors import ArgumentError, ContainmentError, NumericError, \
    ResourceError

MAX_PARTICLES: Final = 3
BOUNDARY_TOL: Final = 1e-10
SYMMETRY_TOL: Final = 1e-10
MAX_GRID_POINTS: Final = 20_000_000
DEFAULT_DX: Final = 0.05
PROBE_DX: Final = 0.1
PROBE_MAX_TIME: Final = 1.0

__log = logging.getLogger(__name__)


def minimum_half_width(t: float) -> float:
    return 4 * math.sqrt(t) + 2


def default_half_width(t: float) -> float:
    """Half width at which the free kernel has dropped below ``e^-50`` of
    its peak."""
    return max(minimum_half_width(t), math.sqrt(100 * t))


def _along(ndim: int, axis: int, s: slice) -> Tuple[slice, ...]:
    index = [slice(None)] * ndim
    index[axis] = s
    return tuple(index)


@dataclass
class GridWaveFunction:
    """Values of an ``n``-particle function on ``[-L, L]^n``, sampled at
    ``i * dx`` for ``|i| <= ceil(L / dx)``."""
    n: int
    L: float
    dx: float
    values: np.ndarray

    @classmethod
    def delta(cls, n: int, L: float, dx: float) -> 'GridWaveFunction':
        """All particles at the origin; mass ``1/dx`` per coordinate."""
        half = math.ceil(L / dx - 1e-9)
        size = 2 * half + 1
        if size ** n > MAX_GRID_POINTS:
            raise ResourceError(f'Grid of {size}^{n} points exceeds '
                                f'{MAX_GRID_POINTS}', n=n, size=size)
        values = np.zeros((size,) * n)
        values[(half,) * n] = dx ** -n
        return cls(n, L, dx, values)

    @property
    def half(self) -> int:
        return (self.values.shape[0] - 1) // 2

    def at_origin(self) -> float:
        return float(self.values[(self.half,) * self.n])

    def mass(self) -> float:
        return float(np.sum(self.values)) * self.dx ** self.n

    def boundary_fraction(self) -> float:
        """Mass on the outermost grid layer relative to the total mass."""
        inner = self.values[(slice(1, -1),) * self.n]
        total = np.sum(np.abs(self.values))
        if total == 0:
            return 0.0
        return float((total - np.sum(np.abs(inner))) / total)

    def symmetry_defect(self) -> float:
        """Largest relative change under an exchange of two coordinates."""
        scale = np.max(np.abs(self.values))
        if self.n == 1 or scale == 0:
            return 0.0
        defect = 0.0
        # Adjacent transpositions generate all permutations
        for i in range(self.n - 1):
            axes = list(range(self.n))
            axes[i], axes[i + 1] = axes[i + 1], axes[i]
            swapped = np.transpose(self.values, axes)
            defect = max(defect, float(np.max(np.abs(self.values - swapped))))
        return defect / scale


def _pair_count(n: int, size: int) -> np.ndarray:
    """Number of coinciding coordinate pairs at every grid point."""
    counts = np.zeros((size,) * n, dtype=np.int8)
    index = np.arange(size)
    for i, j in itertools.combinations(range(n), 2):
        shape_i = [1] * n
        shape_j = [1] * n
        shape_i[i] = size
        shape_j[j] = size
        counts += index.reshape(shape_i) == index.reshape(shape_j)
    return counts


def _kinetic_step(values: np.ndarray, r: float) -> None:
    """One explicit step of ``1/2 Δ`` per axis, with zero values beyond the
    grid."""
    for axis in range(values.ndim):
        laplacian = -2 * values
        laplacian[_along(values.ndim, axis, slice(1, None))] += \
            values[_along(values.ndim, axis, slice(None, -1))]
        laplacian[_along(values.ndim, axis, slice(None, -1))] += \
            values[_along(values.ndim, axis, slice(1, None))]
        values += r * laplacian


def propagate_state(n: int, t: float, dx: float = DEFAULT_DX,
                    dtau: Optional[float] = None,
                    L: Optional[float] = None) -> GridWaveFunction:
    """Propagate the delta state to time ``t`` and return it.

    Every step applies the interaction for ``dtau/2``, the kinetic part for
    ``dtau`` and the interaction for another ``dtau/2``. Starting from the
    delta state the value at the origin equals the one of the heat step
    followed by the full interaction, the order of the lattice heat
    equation; other entries differ by the half-step factors.

    :param dtau: Step size, ``dx²/8`` by default and at most ``dx²/4``.
    :param L: Half width, by default ``max(4 sqrt(t) + 2, 10 sqrt(t))``;
              at least ``4 sqrt(t) + 2``.
    :raises ArgumentError: On invalid arguments.
    :raises ContainmentError: If more than ``1e-10`` of the mass reaches the
                              edge of the grid.
    :raises NumericError: If exchange symmetry or finiteness is lost.
    """
    if n not in range(1, MAX_PARTICLES + 1):
        raise ArgumentError(f'Particle number must be 1, 2 or 3, got {n}', n=n)
    if not (t >= 0 and math.isfinite(t)):
        raise ArgumentError(f'Time must be finite and non-negative, got {t}',
                            t=t)
    if not dx > 0:
        raise ArgumentError(f'dx must be positive, got {dx}', dx=dx)
    if dtau is None:
        dtau = dx * dx / 8
    if not (0 < dtau <= dx * dx / 4):
        raise ArgumentError(f'dtau={dtau} violates dtau <= dx²/4 = '
                            f'{dx * dx / 4}', dtau=dtau, dx=dx)
    if L is None:
        L = default_half_width(t)
    if L < minimum_half_width(t):
        raise ArgumentError(f'Half width {L} is below 4 sqrt(t) + 2 = '
                            f'{minimum_half_width(t)}', L=L, t=t)

    state = GridWaveFunction.delta(n, L, dx)
    steps = math.ceil(t / dtau - 1e-12) if t > 0 else 0
    if steps == 0:
        return state
    h = t / steps
    r = h / (2 * dx * dx)
    pairs = _pair_count(n, state.values.shape[0])
    half_interaction = np.exp(h / (2 * dx) * pairs)

    __log.debug('Propagating n=%d to t=%g with %d steps on %d^%d points',
                n, t, steps, state.values.shape[0], n)

    values = state.values
    for step in range(steps):
        values *= half_interaction
        _kinetic_step(values, r)
        values *= half_interaction
        if (defect := state.symmetry_defect()) > SYMMETRY_TOL:
            raise NumericError(f'Exchange symmetry lost at step {step} '
                               f'(defect {defect:.3g})', n=n, step=step)

    if not np.all(np.isfinite(values)):
        raise NumericError('Propagation produced non-finite values', n=n, t=t)
    if (fraction := state.boundary_fraction()) > BOUNDARY_TOL:
        raise ContainmentError(f'{fraction:.3g} of the mass reached the edge '
                               f'of [-{L}, {L}]^{n}', n=n, t=t, L=L,
                               boundary_fraction=fraction)
    return state


def propagate(n: int, t: float, dx: float = DEFAULT_DX,
              dtau: Optional[float] = None,
              L: Optional[float] = None) -> float:
    """Return the replica moment ``E[Z(0, t)^n]`` on a grid of spacing
    ``dx``. See :py:func:`propagate_state` for the arguments."""
    return propagate_state(n, t, dx, dtau, L).at_origin()


class RichardsonResult(NamedTuple):
    """``value`` on the finer grid, the extrapolated value and the difference
    between the two grids as error estimate."""
    value: float
    extrapolated: float
    error: float
    dx: float


def propagate_with_error(n: int, t: float, dx: float = DEFAULT_DX, *,
                         order: int = 2,
                         L: Optional[float] = None) -> RichardsonResult:
    """Run :py:func:`propagate` with ``dx`` and ``dx/2`` (each with the
    default step size) and extrapolate assuming an error of order
    ``dx^order``."""
    coarse = propagate(n, t, dx, L=L)
    fine = propagate(n, t, dx / 2, L=L)
    factor = 2 ** order
    extrapolated = (factor * fine - coarse) / (factor - 1)
    return RichardsonResult(fine, extrapolated, abs(fine - coarse), dx / 2)


def moment_growth_probe(t: float, dx: float = PROBE_DX) -> List[
        Tuple[int, float]]:
    """Return ``[(n, E[Z(0, t)^n]) for n in 1, 2, 3]``.

    :raises ArgumentError: If ``t > 1``.
    """
    if not (0 < t <= PROBE_MAX_TIME):
        raise ArgumentError(f'Probe time must lie in (0, {PROBE_MAX_TIME}], '
                            f'got {t}', t=t)
    result = [(n, propagate(n, t, dx)) for n in range(1, MAX_PARTICLES + 1)]
    for n, value in result:
        __log.info('E[Z(0, %g)^%d] = %.10g', t, n, value)
    return result
