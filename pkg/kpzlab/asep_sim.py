"""The asymmetric simple exclusion process.

Particles on ``Z`` jump to the right neighbour with rate ``p`` and to the left
neighbour with rate ``q = 1 - p``; a jump onto an occupied site is suppressed.
This module provides two views of the same dynamics:

* the generator of the process on a small ring, as a dense rate matrix over
  the configurations of a fixed particle number, and
* a continuous-time kinetic Monte Carlo simulation (Gillespie) on a finite
  window, for the step initial condition and for rings.

The simulation keeps per-bond rates in a binary indexed tree, so each event
costs ``O(log W)`` regardless of the window size.
"""
from dataclasses import dataclass, field
import itertools
import logging
import math
from typing import Dict, Final, NamedTuple, Optional, Sequence, Tuple

import numba
import numpy as np
import scipy.linalg
from scipy import sparse

from . import rng
from .errors import ArgumentError, ContainmentError, NumericError, \
    ResourceError
from .farm import run_farm

PROBABILITY_SUM_TOL: Final = 1e-15
ROW_SUM_TOL: Final = 1e-13
ZERO_EIGENVALUE_TOL: Final = 1e-10
MAX_RING_SIZE: Final = 12
MAX_HEISENBERG_RING_SIZE: Final = 10
MAX_SECTOR_SIZE: Final = 1_000_000
MAX_SPECTRAL_DIMENSION: Final = 2000

_STATUS_ESCAPED = 1

__log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AsepParams:
    """Jump rates; ``p`` to the right, ``q`` to the left."""
    p: float
    q: float

    def __post_init__(self):
        if not (0 <= self.p <= 1 and 0 <= self.q <= 1):
            raise ArgumentError(
                f'Rates must lie in [0, 1], got p={self.p}, q={self.q}',
                p=self.p, q=self.q)
        if abs(self.p + self.q - 1) > PROBABILITY_SUM_TOL:
            raise ArgumentError(
                f'Rates must satisfy p + q = 1, got p={self.p}, q={self.q}',
                p=self.p, q=self.q)

    @classmethod
    def from_right_rate(cls, p: float) -> 'AsepParams':
        return cls(p, 1.0 - p)

    @property
    def is_symmetric(self) -> bool:
        return self.p == self.q


def weak_asymmetry_preset(epsilon: float) -> Tuple[AsepParams, float]:
    """Rates with asymmetry ``q - p = sqrt(epsilon)`` and the matching time
    scale ``epsilon^-2`` under which the height converges to KPZ."""
    if not (0 < epsilon <= 0.25):
        raise ArgumentError(f'epsilon must lie in (0, 1/4], got {epsilon}',
                            epsilon=epsilon)
    root = math.sqrt(epsilon)
    return AsepParams((1 - root) / 2, (1 + root) / 2), epsilon ** -2


@dataclass
class ExclusionState:
    """A configuration on the sites ``window[0] .. window[1]``.

    ``positions[r]`` is the site of the particle of rank ``r`` (particles
    keep their order, so the rank is an identity). ``bond_counter`` is the
    net number of jumps from site 1 to site 0.
    """
    window: Tuple[int, int]
    occupation: np.ndarray
    positions: np.ndarray
    time: float = 0.0
    bond_counter: int = 0
    periodic: bool = False

    @property
    def particle_count(self) -> int:
        return len(self.positions)

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.window[0], self.window[1] + 1)

    def is_occupied(self, site: int) -> bool:
        j_min, j_max = self.window
        if site < j_min:
            return False
        if site > j_max:
            return True
        return bool(self.occupation[site - j_min])

    def height_profile(self) -> np.ndarray:
        """Return ``h(j)`` for every site of the window, anchored at
        ``h(0) = 2 N`` with increments ``h(j+1) - h(j) = 1 - 2 occ(j+1)``."""
        j_min, j_max = self.window
        if not (j_min <= 0 < j_max):
            raise ArgumentError('The height is anchored at site 0, which is '
                                'not inside the window', window=self.window)
        increments = 1 - 2 * self.occupation.astype(np.int64)
        height = np.empty(j_max - j_min + 1, dtype=np.int64)
        origin = -j_min
        height[origin] = 2 * self.bond_counter
        height[origin + 1:] = height[origin] + np.cumsum(
            increments[origin + 1:])
        # h(j) = h(j+1) - (1 - 2 occ(j+1))
        height[:origin] = height[origin] - np.cumsum(
            increments[origin:0:-1])[::-1]
        return height

    def copy(self) -> 'ExclusionState':
        return ExclusionState(self.window, self.occupation.copy(),
                              self.positions.copy(), self.time,
                              self.bond_counter, self.periodic)


@dataclass(frozen=True)
class RingGenerator:
    """The generator restricted to ``k`` particles on a ring of ``L`` sites.

    ``matrix[a, b]`` is the rate of the transition from
    ``configurations[a]`` to ``configurations[b]``, so probability row
    vectors evolve as ``u(t) = u(0) exp(t G)``."""
    L: int
    k: int
    matrix: np.ndarray
    configurations: Tuple[Tuple[int, ...], ...]
    _index: Dict[Tuple[int, ...], int] = field(repr=False, compare=False,
                                               default_factory=dict)

    def __post_init__(self):
        if not self._index:
            self._index.update({c: i for i, c in
                                enumerate(self.configurations)})

    def __len__(self):
        return len(self.configurations)

    def index(self, occupation: Sequence[int]) -> int:
        key = tuple(int(o) for o in occupation)
        try:
            return self._index[key]
        except KeyError:
            raise ArgumentError(f'{key} is not a configuration with '
                                f'{self.k} particles on {self.L} sites',
                                configuration=list(key))


class SpectralSummary(NamedTuple):
    max_real_part: float
    zero_multiplicity: int


def _check_ring(L: int, k: int, max_size: int) -> None:
    if not (2 <= L <= max_size):
        raise ArgumentError(f'Ring size must lie in [2, {max_size}], got {L}',
                            L=L)
    # k = 0 and k = L are the frozen sectors
    if not (0 <= k <= L):
        raise ArgumentError(f'Particle number must lie in [0, {L}], got {k}',
                            k=k)
    if math.comb(L, k) > MAX_SECTOR_SIZE:
        raise ResourceError(f'Sector with {math.comb(L, k)} configurations '
                            f'exceeds {MAX_SECTOR_SIZE}', L=L, k=k)


def ring_configurations(L: int, k: int) -> Tuple[Tuple[int, ...], ...]:
    """All occupations of ``L`` sites with ``k`` particles, in
    lexicographic order of the occupied sites."""
    result = []
    for occupied in itertools.combinations(range(L), k):
        occupation = [0] * L
        for j in occupied:
            occupation[j] = 1
        result.append(tuple(occupation))
    return tuple(result)


def build_ring_generator(L: int, k: int,
                         params: AsepParams) -> RingGenerator:
    """Build the rate matrix of the exclusion process with ``k`` particles on
    a ring of ``L`` sites.

    :raises ArgumentError: If ``L`` is outside ``[2, 12]`` or ``k`` outside
                           ``[0, L]``.
    :raises ResourceError: If the sector has more than a million
                           configurations.
    """
    _check_ring(L, k, MAX_RING_SIZE)
    configurations = ring_configurations(L, k)
    index = {c: i for i, c in enumerate(configurations)}
    matrix = np.zeros((len(configurations), len(configurations)))

    for a, c in enumerate(configurations):
        for j in range(L):
            if not c[j]:
                continue
            for target, rate in (((j + 1) % L, params.p),
                                 ((j - 1) % L, params.q)):
                if c[target] or rate == 0:
                    continue
                moved = list(c)
                moved[j] = 0
                moved[target] = 1
                matrix[a, index[tuple(moved)]] += rate

    np.fill_diagonal(matrix, -matrix.sum(axis=1))
    assert np.all(np.abs(matrix.sum(axis=1)) <= ROW_SUM_TOL)
    matrix.setflags(write=False)
    return RingGenerator(L, k, matrix, configurations, index)


def heisenberg_generator(L: int, k: int) -> RingGenerator:
    """The symmetric generator in its spin chain form
    ``1/4 sum_j (sigma_j . sigma_{j+1} - 1)``, restricted to ``k`` particles.

    An occupied site is spin up. The result agrees with
    ``build_ring_generator(L, k, AsepParams(0.5, 0.5))``.
    """
    _check_ring(L, k, MAX_HEISENBERG_RING_SIZE)
    pauli = (
        sparse.csr_matrix(np.array([[0, 1], [1, 0]], dtype=np.complex128)),
        sparse.csr_matrix(np.array([[0, -1j], [1j, 0]])),
        sparse.csr_matrix(np.array([[1, 0], [0, -1]], dtype=np.complex128)),
    )

    def on_site(op, j):
        return sparse.kron(sparse.kron(sparse.identity(2 ** j), op),
                           sparse.identity(2 ** (L - j - 1)), format='csr')

    dimension = 2 ** L
    hamiltonian = sparse.csr_matrix((dimension, dimension),
                                    dtype=np.complex128)
    identity = sparse.identity(dimension, format='csr')
    for j in range(L):
        right = (j + 1) % L
        exchange = sum(on_site(s, j) @ on_site(s, right) for s in pauli)
        hamiltonian = hamiltonian + (exchange - identity) / 4

    configurations = ring_configurations(L, k)
    # Spin up is the first basis vector of each factor
    basis = [sum((1 - o) << (L - 1 - j) for j, o in enumerate(c))
             for c in configurations]
    block = hamiltonian[basis, :][:, basis].toarray()
    if np.max(np.abs(block.imag), initial=0.0) > ROW_SUM_TOL:
        raise NumericError('Spin chain generator has an imaginary part')

    matrix = np.ascontiguousarray(block.real)
    matrix.setflags(write=False)
    return RingGenerator(L, k, matrix, configurations)


def spectral_check(g: RingGenerator) -> SpectralSummary:
    """Return the largest real part of the spectrum of ``g`` and the
    multiplicity of the eigenvalue 0.

    :raises ResourceError: If the sector has more than 2000 configurations.
    :raises NumericError: If the eigenvalue solver fails.
    """
    if len(g) > MAX_SPECTRAL_DIMENSION:
        raise ResourceError(f'Sector dimension {len(g)} exceeds '
                            f'{MAX_SPECTRAL_DIMENSION}', dimension=len(g))
    try:
        if np.array_equal(g.matrix, g.matrix.T):
            eigenvalues = scipy.linalg.eigvalsh(g.matrix).astype(np.complex128)
        else:
            eigenvalues = scipy.linalg.eigvals(g.matrix)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericError(f'Eigenvalue computation failed: {e}',
                           L=g.L, k=g.k) from e

    if not np.all(np.isfinite(eigenvalues)):
        raise NumericError('Eigenvalue computation produced non-finite values',
                           L=g.L, k=g.k)

    scale = max(1.0, float(np.max(np.abs(np.diag(g.matrix)))))
    zero = np.abs(eigenvalues) <= ZERO_EIGENVALUE_TOL * scale
    return SpectralSummary(float(np.max(eigenvalues.real)),
                           int(np.count_nonzero(zero)))


def ring_transition_probabilities(g: RingGenerator, t: float,
                                  initial: Sequence[int]) -> np.ndarray:
    """Return the distribution over ``g.configurations`` at time ``t`` when
    starting from the configuration ``initial``."""
    if not (t >= 0 and math.isfinite(t)):
        raise ArgumentError(f'Time must be finite and non-negative, got {t}',
                            t=t)
    start = g.index(initial)
    row = scipy.linalg.expm(t * g.matrix)[start]
    if not np.all(np.isfinite(row)):
        raise NumericError('Matrix exponential produced non-finite values',
                           t=t)
    return np.clip(row, 0, None)


@numba.njit(cache=True)
def _bond_rate(occupation, b, n, p, q):
    left = occupation[b]
    right = occupation[(b + 1) % n]
    if left == 1 and right == 0:
        return p
    if left == 0 and right == 1:
        return q
    return 0.0


@numba.njit(cache=True)
def _tree_build(rates):
    n = rates.size
    tree = np.zeros(n + 1)
    for i in range(1, n + 1):
        tree[i] += rates[i - 1]
        j = i + (i & -i)
        if j <= n:
            tree[j] += tree[i]
    return tree


@numba.njit(cache=True)
def _tree_add(tree, i, delta):
    n = tree.size - 1
    i += 1
    while i <= n:
        tree[i] += delta
        i += i & -i


@numba.njit(cache=True)
def _tree_total(tree):
    i = tree.size - 1
    total = 0.0
    while i > 0:
        total += tree[i]
        i -= i & -i
    return total


@numba.njit(cache=True)
def _tree_find(tree, target, top_bit):
    """Index of the first element whose prefix sum exceeds ``target``."""
    n = tree.size - 1
    position = 0
    step = top_bit
    while step > 0:
        following = position + step
        if following <= n and tree[following] <= target:
            position = following
            target -= tree[following]
        step >>= 1
    return position


@numba.njit(cache=True)
def _update_bond(tree, rates, occupation, b, n, p, q):
    rate = _bond_rate(occupation, b, n, p, q)
    if rate != rates[b]:
        _tree_add(tree, b, rate - rates[b])
        rates[b] = rate


@numba.njit(cache=True)
def _check_state(occupation, label, positions, periodic):
    count = 0
    for i in range(occupation.size):
        assert occupation[i] == 0 or occupation[i] == 1
        count += occupation[i]
        if occupation[i] == 1:
            assert positions[label[i]] == i
        else:
            assert label[i] == -1
    assert count == positions.size
    if not periodic:
        for r in range(1, positions.size):
            assert positions[r - 1] < positions[r]


@numba.njit(cache=True)
def _run_events(occupation, label, positions, p, q, periodic, t_end,
                counter_bond, sample_times, tags, current_out, tags_out,
                generator, check):
    n = occupation.size
    bonds = n if periodic else n - 1
    rates = np.zeros(bonds)
    for b in range(bonds):
        rates[b] = _bond_rate(occupation, b, n, p, q)
    tree = _tree_build(rates)
    top_bit = 1
    while top_bit * 2 <= bonds:
        top_bit *= 2

    t = 0.0
    counter = 0
    events = 0
    status = 0
    sample = 0

    while True:
        total = _tree_total(tree)
        if total > 0.0:
            t_next = t - np.log(1.0 - generator.random()) / total
        else:
            t_next = np.inf

        # The state is constant on [t, t_next)
        while sample < sample_times.size and sample_times[sample] < t_next:
            current_out[sample] = counter
            for k in range(tags.size):
                tags_out[sample, k] = positions[tags[k]]
            sample += 1

        if t_next >= t_end:
            t = t_end
            break
        if check:
            assert t_next > t
        t = t_next

        b = _tree_find(tree, generator.random() * total, top_bit)
        while b >= bonds or rates[b] <= 0.0:
            # Rounding in the running sums; rebuild and redraw
            tree = _tree_build(rates)
            total = _tree_total(tree)
            b = _tree_find(tree, generator.random() * total, top_bit)

        right = (b + 1) % n
        if occupation[b] == 1:
            source = b
            target = right
        else:
            source = right
            target = b
        occupation[source] = 0
        occupation[target] = 1
        rank = label[source]
        label[source] = -1
        label[target] = rank
        positions[rank] = target
        if b == counter_bond:
            # 1 -> 0 counts +1, 0 -> 1 counts -1
            counter += 1 if target == b else -1
        events += 1

        for c in (b - 1, b, b + 1):
            if periodic:
                _update_bond(tree, rates, occupation, c % bonds, n, p, q)
            elif 0 <= c < bonds:
                _update_bond(tree, rates, occupation, c, n, p, q)

        if check:
            _check_state(occupation, label, positions, periodic)
        if not periodic and (occupation[0] == 1 or occupation[n - 1] == 0):
            status = 1
            break

    return t, counter, events, status


def minimum_window(t_end: float) -> int:
    """Smallest half width for which a step initial condition stays contained
    up to ``t_end``."""
    return math.ceil(t_end) + math.ceil(10 * math.sqrt(t_end)) + 1


@dataclass
class StepTrajectory:
    """Observables of a single step initial condition run."""
    state: ExclusionState
    sample_times: np.ndarray
    current_samples: np.ndarray
    tagged_samples: np.ndarray
    tags: Tuple[int, ...]
    events: int

    @property
    def current(self) -> int:
        """Net number of jumps from site 1 to site 0 up to the final time."""
        return self.state.bond_counter

    @property
    def height(self) -> int:
        return 2 * self.state.bond_counter

    @property
    def tagged(self) -> Dict[int, int]:
        """Final position of each tagged particle."""
        return {tag: int(self.state.positions[tag - 1]) for tag in self.tags}


def _step_state(window_halfwidth: int) -> Tuple[np.ndarray, np.ndarray,
                                                np.ndarray]:
    W = window_halfwidth
    occupation = np.zeros(2 * W + 1, dtype=np.int8)
    occupation[W + 1:] = 1
    positions = np.arange(W + 1, 2 * W + 1, dtype=np.int64)
    label = np.full(2 * W + 1, -1, dtype=np.int64)
    label[W + 1:] = np.arange(W, dtype=np.int64)
    return occupation, label, positions


def _validate_sample_times(sample_times: Optional[Sequence[float]],
                           t_end: float) -> np.ndarray:
    if sample_times is None:
        return np.array([t_end], dtype=np.float64)
    times = np.asarray(sample_times, dtype=np.float64)
    if times.ndim != 1 or len(times) == 0:
        raise ArgumentError('Sample times must be a non-empty list')
    if np.any(np.diff(times) <= 0) or times[0] < 0 or times[-1] > t_end:
        raise ArgumentError(f'Sample times must increase within [0, {t_end}]',
                            sample_times=times.tolist())
    return times


def simulate_step_ic(params: AsepParams, window_halfwidth: int,
                     t_end: float, seed: int, *,
                     tags: Sequence[int] = (),
                     sample_times: Optional[Sequence[float]] = None,
                     trajectory_index: int = 0,
                     check: bool = False) -> StepTrajectory:
    """Simulate the step initial condition (sites ``j >= 1`` occupied) on the
    window ``[-window_halfwidth, window_halfwidth]``.

    Outside the window the configuration is frozen to the step, empty to the
    left and full to the right. A particle reaching the leftmost site or a
    hole reaching the rightmost site invalidates the run.

    :param tags: Particle labels ``j >= 1``; particle ``j`` starts at site
                 ``j``.
    :param sample_times: Increasing times in ``[0, t_end]`` at which the
                         current and the tagged positions are recorded.
                         Defaults to ``[t_end]``.
    :param trajectory_index: Selects the random substream of ``seed``.
    :param check: Verify exclusion and ordering after every event.
    :raises ArgumentError: If ``t_end < 0``, the window is too small for
                           ``t_end`` or a tag is out of range.
    :raises ContainmentError: If the front reaches the window boundary.
    """
    if not (t_end >= 0 and math.isfinite(t_end)):
        raise ArgumentError(f'Final time must be finite and non-negative, '
                            f'got {t_end}', t_end=t_end)
    W = int(window_halfwidth)
    if W != window_halfwidth or W <= math.ceil(t_end) + 10 * math.sqrt(t_end):
        raise ArgumentError(
            f'Window half width {window_halfwidth} cannot contain the front '
            f'up to t={t_end}; use at least {minimum_window(t_end)}',
            window_halfwidth=window_halfwidth,
            minimum=minimum_window(t_end))
    for tag in tags:
        if not (1 <= tag <= W):
            raise ArgumentError(f'Tag {tag} is not a particle label in '
                                f'[1, {W}]', tag=tag)
    times = _validate_sample_times(sample_times, t_end)

    occupation, label, positions = _step_state(W)
    tag_ranks = np.array([tag - 1 for tag in tags], dtype=np.int64)
    current_out = np.zeros(len(times), dtype=np.int64)
    tags_out = np.zeros((len(times), len(tag_ranks)), dtype=np.int64)

    generator = rng.substream(seed, trajectory_index)
    t, counter, events, status = _run_events(
        occupation, label, positions, params.p, params.q, False,
        float(t_end), W, times, tag_ranks, current_out, tags_out,
        generator, check)

    if status == _STATUS_ESCAPED:
        raise ContainmentError(
            f'Front reached the window boundary at t={t:.6g}',
            time=t, window_halfwidth=W, seed=seed,
            trajectory_index=trajectory_index)

    state = ExclusionState((-W, W), occupation, positions - W, t, counter)
    return StepTrajectory(state, times, current_out, tags_out - W,
                          tuple(tags), events)


def simulate_ring(L: int, k: int, params: AsepParams, t_end: float,
                  seed: int, *,
                  initial: Optional[Sequence[int]] = None,
                  trajectory_index: int = 0,
                  check: bool = False) -> ExclusionState:
    """Simulate ``k`` particles on a ring of ``L`` sites up to ``t_end``.

    :param initial: Initial occupation; defaults to the first ``k`` sites.
    """
    if L < 2:
        raise ArgumentError(f'Ring size must be at least 2, got {L}', L=L)
    if not (t_end >= 0 and math.isfinite(t_end)):
        raise ArgumentError(f'Final time must be finite and non-negative, '
                            f'got {t_end}', t_end=t_end)
    if initial is None:
        occupation = np.zeros(L, dtype=np.int8)
        occupation[:k] = 1
    else:
        occupation = np.array(initial, dtype=np.int8)
        if occupation.shape != (L,) or int(occupation.sum()) != k \
                or np.any((occupation != 0) & (occupation != 1)):
            raise ArgumentError(f'Initial occupation must hold {k} particles '
                                f'on {L} sites', initial=list(initial))

    positions = np.flatnonzero(occupation).astype(np.int64)
    label = np.full(L, -1, dtype=np.int64)
    label[positions] = np.arange(len(positions), dtype=np.int64)
    times = np.empty(0, dtype=np.float64)

    generator = rng.substream(seed, trajectory_index)
    t, counter, _, _ = _run_events(
        occupation, label, positions, params.p, params.q, True,
        float(t_end), 0, times, np.empty(0, dtype=np.int64),
        np.empty(0, dtype=np.int64), np.empty((0, 0), dtype=np.int64),
        generator, check)

    return ExclusionState((0, L - 1), occupation, positions, t, counter,
                          periodic=True)


@dataclass(frozen=True)
class StepFarmResult:
    """Observables of many step initial condition trajectories.

    ``current[i, s]`` is ``N`` of trajectory ``i`` at ``sample_times[s]``,
    ``tagged[i, s, k]`` the position of particle ``tags[k]``."""
    params: AsepParams
    seed: int
    window_halfwidth: int
    sample_times: np.ndarray
    tags: Tuple[int, ...]
    current: np.ndarray
    tagged: np.ndarray

    @property
    def trajectories(self) -> int:
        return self.current.shape[0]


def _step_farm_task(argument):
    params, W, t_end, seed, tags, times, index = argument
    trajectory = simulate_step_ic(params, W, t_end, seed, tags=tags,
                                  sample_times=times, trajectory_index=index)
    return index, (trajectory.current_samples, trajectory.tagged_samples)


def run_step_farm(params: AsepParams, sample_times: Sequence[float],
                  trajectories: int, seed: int, *,
                  window_halfwidth: Optional[int] = None,
                  tags: Sequence[int] = (),
                  workers: int = 1) -> StepFarmResult:
    """Run ``trajectories`` independent step initial condition simulations,
    trajectory ``i`` using substream ``i`` of ``seed``.

    All observables are recorded in one pass up to the last sample time.
    """
    if trajectories < 1:
        raise ArgumentError(f'At least one trajectory is required, got '
                            f'{trajectories}', trajectories=trajectories)
    if sample_times is None or len(sample_times) == 0:
        raise ArgumentError('Sample times must be a non-empty list')
    t_end = float(sample_times[-1])
    times = _validate_sample_times(sample_times, t_end)
    if window_halfwidth is None:
        window_halfwidth = minimum_window(t_end)

    __log.debug('Running %d step trajectories up to t=%g on a window of '
                'half width %d', trajectories, t_end, window_halfwidth)
    arguments = [(params, window_halfwidth, t_end, seed, tuple(tags), times, i)
                 for i in range(trajectories)]
    results = run_farm(_step_farm_task, arguments, workers, kind='asep')

    current = np.stack([r[0] for r in results])
    tagged = np.stack([r[1] for r in results])
    return StepFarmResult(params, seed, window_halfwidth, times, tuple(tags),
                          current, tagged)
