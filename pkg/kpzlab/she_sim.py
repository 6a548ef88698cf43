"""Monte Carlo solvers for stochastic heat equations.

Two models are covered, both read as Itô equations with delta initial data:

* the semi-discrete directed polymer ``dZ_j = (Z_{j-1} - Z_j) dt + Z_j db_j``
  on ``j >= 0`` with ``Z_j(0) = δ_{j0}``, and
* an explicit lattice scheme for ``∂Z/∂t = ½ ∂²Z/∂x² + W Z`` with
  ``Z(x, 0) = δ(x)``.

Trajectories are computed in batches so that each time step is a handful of
array operations. Every trajectory draws its noise from its own substream in
fixed chunks of time steps, so the field of trajectory ``i`` does not depend
on which other trajectories share its batch.
"""
from dataclasses import dataclass
import logging
import math
from typing import Final, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import poisson

from . import rng
from .errors import ArgumentError, ContainmentError, DomainError
from .farm import run_farm
from .stats import jackknife_stderr

DEFAULT_SEMIDISCRETE_DT: Final = 1e-3
MAX_SEMIDISCRETE_DT: Final = 1e-2
POISSON_TAIL_TOL: Final = 1e-17
LEAK_TOL: Final = 1e-12
"""Largest mass fraction that may leave the semi-discrete window."""

DEFAULT_LATTICE_DX: Final = 0.05
DEFAULT_LATTICE_HALF_WIDTH: Final = 6.0
MIN_TRIALS: Final = 1000
BATCH_SIZE: Final = 256
NOISE_CHUNK: Final = 64
"""Number of time steps of noise drawn at once from a substream."""

SOLVERS: Final = ('semidiscrete', 'lattice')

__log = logging.getLogger(__name__)


def heat_kernel(x, t: float):
    """The Gaussian ``exp(-x²/2t) / sqrt(2πt)``."""
    if not t > 0:
        raise ArgumentError(f'Time must be positive, got {t}', t=t)
    x = np.asarray(x, dtype=np.float64)
    value = np.exp(-x * x / (2 * t)) / math.sqrt(2 * math.pi * t)
    return float(value) if value.ndim == 0 else value


def poisson_kernel(j, t: float):
    """``e^{-t} t^j / j!``, the noiseless semi-discrete solution (zero for
    ``j < 0``)."""
    if not t >= 0:
        raise ArgumentError(f'Time must be non-negative, got {t}', t=t)
    value = poisson.pmf(j, t)
    return float(value) if np.ndim(value) == 0 else np.asarray(value)


@dataclass
class PolymerState:
    """A nonnegative field on the sites ``window[0] .. window[1]``.

    Site ``j`` sits at ``x = j * dx``; the semi-discrete model uses
    ``dx = 1``. Outside the window the field is zero.
    """
    window: Tuple[int, int]
    Z: np.ndarray
    time: float = 0.0
    dx: float = 1.0

    def value(self, site: int) -> float:
        j_min, j_max = self.window
        if not (j_min <= site <= j_max):
            return 0.0
        return float(self.Z[site - j_min])

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.window[0], self.window[1] + 1)

    @property
    def positions(self) -> np.ndarray:
        return self.sites * self.dx

    @property
    def mass(self) -> float:
        return float(np.sum(self.Z) * self.dx)


def cole_hopf_height(state: PolymerState, site: int) -> float:
    """The height ``h = log Z`` at ``site``.

    :raises DomainError: If ``Z`` vanishes at ``site``.
    """
    z = state.value(site)
    if not z > 0:
        raise DomainError(f'Height is undefined where Z = {z} '
                          f'(site {site})', site=site, value=z)
    return math.log(z)


def _batches(indices: Sequence[int]) -> List[Sequence[int]]:
    return [indices[i:i + BATCH_SIZE]
            for i in range(0, len(indices), BATCH_SIZE)]


class _NoiseSource:
    """Standard normal increments for a batch of trajectories, drawn chunk
    by chunk from each trajectory's own substream."""

    def __init__(self, seed: int, indices: Sequence[int], sites: int,
                 enabled: bool):
        self.__generators = [rng.substream(seed, i) for i in indices]
        self.__sites = sites
        self.__enabled = enabled
        self.__chunk = np.empty((0, len(indices), sites))
        self.__position = 0

    def next(self) -> Optional[np.ndarray]:
        if not self.__enabled:
            return None
        if self.__position == len(self.__chunk):
            self.__chunk = np.stack(
                [g.standard_normal((NOISE_CHUNK, self.__sites))
                 for g in self.__generators], axis=1)
            self.__position = 0
        xi = self.__chunk[self.__position]
        self.__position += 1
        return xi


def _time_steps(t_end: float, dt: float) -> Tuple[int, float]:
    steps = math.ceil(t_end / dt - 1e-12) if t_end > 0 else 0
    return steps, (t_end / steps if steps else 0.0)


def _poisson_weights(h: float) -> Tuple[np.ndarray, np.ndarray]:
    """Weights of the exact coupling flow over time ``h`` and
    ``tail[r] = P(k > r)``."""
    cut = 0
    while poisson.sf(cut, h) >= POISSON_TAIL_TOL:
        cut += 1
    k = np.arange(cut + 1)
    return poisson.pmf(k, h), poisson.sf(k, h)


def _couple(Z: np.ndarray, weights: np.ndarray,
            tail: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Apply ``Z_j <- sum_k w_k Z_{j-k}`` along the last axis; return the
    new field and the mass pushed beyond the window."""
    sites = Z.shape[-1]
    out = weights[0] * Z
    for k in range(1, min(len(weights), sites)):
        out[..., k:] += weights[k] * Z[..., :sites - k]
    r = min(len(tail), sites)
    leak = Z[..., ::-1][..., :r] @ tail[:r]
    return out, leak


def _validate_semidiscrete(t_end: float, window_size: int, dt: float) -> None:
    if not (t_end >= 0 and math.isfinite(t_end)):
        raise ArgumentError(f'Final time must be finite and non-negative, '
                            f'got {t_end}', t_end=t_end)
    if not (0 < dt <= MAX_SEMIDISCRETE_DT):
        raise ArgumentError(f'Time step must lie in (0, {MAX_SEMIDISCRETE_DT}]'
                            f', got {dt}', dt=dt)
    if window_size <= t_end + 10 * math.sqrt(t_end):
        raise ArgumentError(
            f'Window of {window_size} sites cannot contain the mass up to '
            f't={t_end}', window_size=window_size,
            minimum=minimum_semidiscrete_window(t_end))


def minimum_semidiscrete_window(t_end: float) -> int:
    """Smallest window beyond which the noiseless mass is below
    ``POISSON_TAIL_TOL``; never less than ``t + 10 sqrt(t)`` sites."""
    size = math.floor(t_end + 10 * math.sqrt(t_end)) + 1
    while t_end > 0 and poisson.sf(size - 1, t_end) >= POISSON_TAIL_TOL:
        size += 1
    return size


def simulate_semidiscrete_batch(t_end: float, window_size: int, dt: float,
                                seed: int, indices: Sequence[int], *,
                                noise: bool = True) -> np.ndarray:
    """Return ``Z_j(t_end)`` for ``j = 0 .. window_size - 1`` for every
    trajectory index in ``indices``, one row per trajectory.

    Each step applies half of the coupling flow exactly, the multiplicative
    factor ``exp(Δb - dt/2)`` and the other half of the coupling.

    :raises ContainmentError: If more than a ``1e-12`` fraction of the mass
                              of any trajectory leaves the window.
    """
    _validate_semidiscrete(t_end, window_size, dt)
    steps, h = _time_steps(t_end, dt)
    Z = np.zeros((len(indices), window_size))
    Z[:, 0] = 1.0
    if steps == 0:
        return Z

    weights, tail = _poisson_weights(h / 2)
    source = _NoiseSource(seed, indices, window_size, noise)
    leaked = np.zeros(len(indices))
    scale = math.sqrt(h)

    for _ in range(steps):
        Z, leak = _couple(Z, weights, tail)
        leaked += leak
        if (xi := source.next()) is not None:
            Z *= np.exp(scale * xi - h / 2)
        Z, leak = _couple(Z, weights, tail)
        leaked += leak

    mass = np.sum(Z, axis=1)
    if np.any(leaked > LEAK_TOL * (mass + leaked)):
        worst = int(np.argmax(leaked / (mass + leaked)))
        raise ContainmentError(
            'Polymer mass reached the edge of the window',
            trajectory_index=int(indices[worst]),
            leaked_fraction=float(leaked[worst] / (mass[worst]
                                                   + leaked[worst])))
    return Z


def simulate_semidiscrete(t_end: float, window_size: int,
                          dt: float = DEFAULT_SEMIDISCRETE_DT,
                          seed: int = 0, *,
                          trajectory_index: int = 0,
                          noise: bool = True) -> PolymerState:
    """Simulate a single semi-discrete polymer; see
    :py:func:`simulate_semidiscrete_batch`."""
    Z = simulate_semidiscrete_batch(t_end, window_size, dt, seed,
                                    [trajectory_index], noise=noise)
    return PolymerState((0, window_size - 1), Z[0], float(t_end))


@dataclass(frozen=True)
class LatticeSheParams:
    """Discretization of the continuum equation on ``[-half_width,
    half_width]`` with Dirichlet edges."""
    dx: float = DEFAULT_LATTICE_DX
    dt: Optional[float] = None
    half_width: float = DEFAULT_LATTICE_HALF_WIDTH
    convention: str = 'ito'

    def __post_init__(self):
        if not (self.dx > 0 and math.isfinite(self.dx)):
            raise ArgumentError(f'dx must be positive, got {self.dx}',
                                dx=self.dx)
        if self.dt is None:
            object.__setattr__(self, 'dt', self.dx ** 2 / 4)
        if not (0 < self.dt <= self.dx ** 2 / 2):
            raise ArgumentError(
                f'Time step {self.dt} violates dt <= dx²/2 = '
                f'{self.dx ** 2 / 2}', dt=self.dt, dx=self.dx)
        if not self.half_width >= 2 * self.dx:
            raise ArgumentError(f'Half width {self.half_width} is too small',
                                half_width=self.half_width)
        if self.convention != 'ito':
            raise ArgumentError(f'Unsupported noise convention '
                                f'"{self.convention}"',
                                convention=self.convention)

    @property
    def sites(self) -> int:
        """Number of sites on each side of the origin."""
        return math.ceil(self.half_width / self.dx - 1e-9)


def simulate_lattice_she_batch(params: LatticeSheParams, t_end: float,
                               seed: int, indices: Sequence[int], *,
                               noise: bool = True) -> np.ndarray:
    """Return the lattice field at ``t_end`` for each trajectory index, one
    row per trajectory, over the sites ``-params.sites .. params.sites``.

    A step is the explicit heat step ``Z += dt/(2dx²) Δ Z`` followed by the
    factor ``exp(ξ sqrt(dt/dx) - dt/(2dx))``.
    """
    if not (t_end >= 0 and math.isfinite(t_end)):
        raise ArgumentError(f'Final time must be finite and non-negative, '
                            f'got {t_end}', t_end=t_end)
    I = params.sites
    Z = np.zeros((len(indices), 2 * I + 1))
    Z[:, I] = 1.0 / params.dx
    steps, h = _time_steps(t_end, params.dt)
    if steps == 0:
        return Z

    r = h / (2 * params.dx ** 2)
    source = _NoiseSource(seed, indices, 2 * I + 1, noise)
    scale = math.sqrt(h / params.dx)
    drift = h / (2 * params.dx)

    for _ in range(steps):
        laplacian = -2 * Z
        laplacian[:, 1:] += Z[:, :-1]
        laplacian[:, :-1] += Z[:, 1:]
        Z += r * laplacian
        if (xi := source.next()) is not None:
            Z *= np.exp(scale * xi - drift)

    edge = np.max(Z[:, [0, -1]])
    if edge > 1e-10 * np.max(Z):
        __log.warning('Lattice field at the window edge is %.3g of its '
                      'maximum, consider a larger half width',
                      edge / np.max(Z))
    return Z


def simulate_lattice_she(params: LatticeSheParams, t_end: float,
                         seed: int = 0, *,
                         trajectory_index: int = 0,
                         noise: bool = True) -> PolymerState:
    """Simulate a single lattice field; see
    :py:func:`simulate_lattice_she_batch`."""
    Z = simulate_lattice_she_batch(params, t_end, seed, [trajectory_index],
                                   noise=noise)
    I = params.sites
    return PolymerState((-I, I), Z[0], float(t_end), params.dx)


class MomentEstimate(NamedTuple):
    mean: float
    stderr: float
    overflow: bool = False


def _sample_task(argument):
    batch, solver, t, seed, options = argument
    if solver == 'semidiscrete':
        Z = simulate_semidiscrete_batch(t, options['window_size'],
                                        options['dt'], seed, batch)
        values = Z[:, options['site']]
    else:
        params = options['params']
        Z = simulate_lattice_she_batch(params, t, seed, batch)
        values = Z[:, params.sites]
    return batch[0], values


def sample_point_values(t: float, trials: int, solver: str, seed: int, *,
                        site: int = 0,
                        dt: Optional[float] = None,
                        window_size: Optional[int] = None,
                        params: Optional[LatticeSheParams] = None,
                        workers: int = 1) -> np.ndarray:
    """Sample ``Z(0, t)`` (or ``Z_site(t)`` for the semi-discrete model) for
    trajectories ``0 .. trials - 1``."""
    if solver not in SOLVERS:
        raise ArgumentError(f'Unknown solver "{solver}", expected one of '
                            f'{", ".join(SOLVERS)}', solver=solver)
    if trials < 1:
        raise ArgumentError(f'At least one trial is required, got {trials}',
                            trials=trials)

    if solver == 'semidiscrete':
        if window_size is None:
            window_size = max(minimum_semidiscrete_window(t), site + 1)
        if not (0 <= site < window_size):
            raise ArgumentError(f'Site {site} is outside the window',
                                site=site)
        options = {'window_size': window_size, 'site': site,
                   'dt': DEFAULT_SEMIDISCRETE_DT if dt is None else dt}
    else:
        if params is None:
            params = LatticeSheParams()
        options = {'params': params}

    arguments = [(batch, solver, t, seed, options)
                 for batch in _batches(list(range(trials)))]
    return np.concatenate(run_farm(_sample_task, arguments, workers,
                                   kind='she'))


def estimate_moment(values: np.ndarray, n: int) -> MomentEstimate:
    """Mean of ``values^n`` with its jackknife standard error, flagged if
    any power overflows."""
    with np.errstate(over='ignore', invalid='ignore'):
        powers = np.asarray(values, dtype=np.float64) ** n
    if not np.all(np.isfinite(powers)):
        __log.warning('Moment %d overflowed the floating point range', n)
        return MomentEstimate(math.inf, math.nan, True)
    return MomentEstimate(float(np.mean(powers)), jackknife_stderr(powers))


def moment_estimator(n: int, t: float, trials: int, solver: str,
                     seed: int, **options) -> MomentEstimate:
    """Monte Carlo estimate of ``E[Z(0, t)^n]`` with its jackknife standard
    error.

    If any ``Z^n`` leaves the floating point range, the estimate is
    returned with ``overflow`` set and an infinite mean.

    :param solver: ``semidiscrete`` or ``lattice``
    :param options: passed on to :py:func:`sample_point_values`
    :raises ArgumentError: If ``n`` is not 1, 2 or 3 or ``trials < 1000``.
    """
    if n not in (1, 2, 3):
        raise ArgumentError(f'Moment order must be 1, 2 or 3, got {n}', n=n)
    if trials < MIN_TRIALS:
        raise ArgumentError(f'At least {MIN_TRIALS} trials are required, got '
                            f'{trials}', trials=trials)

    values = sample_point_values(t, trials, solver, seed, **options)
    return estimate_moment(values, n)
