import collections
import logging
import math
import pathlib
import time
from typing import (
    IO,
    Any,
    Dict,
    Optional,
    Union,
)

import numpy as np

from . import config, rng
from .cache import Cache, create_cache
from .errors import ArgumentError
from .publish import Column, Publisher, Table, create_publisher
from .util import flatten_dictionary

__version__ = '0.1.0'


def _grid(lo: float, hi: float, step: float, name: str) -> np.ndarray:
    """The points ``lo, lo + step, ...`` up to ``hi`` inclusive."""
    if not (step > 0 and math.isfinite(lo) and math.isfinite(hi)):
        raise ArgumentError(f'Invalid {name} grid step {step}', step=step)
    if hi < lo:
        raise ArgumentError(f'Empty {name} grid [{lo}, {hi}]', lo=lo, hi=hi)
    count = math.floor((hi - lo) / step + 1e-9) + 1
    return lo + step * np.arange(count)


class _Timer:
    def __init__(self, log: logging.Logger, what: str):
        self.__log = log
        self.__what = what

    def __enter__(self):
        self.__log.info('%s started', self.__what)
        self.__start = time.time()
        return self

    def __exit__(self, *args):
        import humanfriendly
        self.__log.info('%s finished in %s', self.__what,
                        humanfriendly.format_timespan(
                            time.time() - self.__start))


class KpzLab:
    """Main entry point for kpzlab. This class resolves the configuration,
    owns the cache and runs the experiments behind the command line."""
    __log = logging.getLogger('kpzlab')
    __cache: Cache

    def __init__(self,
                 configuration: Optional[Union[str, pathlib.Path, IO]] = None,
                 *,
                 configuration_overrides: Optional[Dict] = None):
        if configuration_overrides is None:
            configuration_overrides = {}

        default_configuration = flatten_dictionary(
            config.create_default_configuration())
        project_configuration = flatten_dictionary(
            config.load_configuration(configuration))

        config.validate_configuration(project_configuration,
                                      default_configuration)
        config.validate_configuration(configuration_overrides,
                                      default_configuration)

        self.__configuration = collections.ChainMap(
            # Must be flattened already
            configuration_overrides,
            project_configuration,
            default_configuration)

        self.__setup_cache()

    def __setup_cache(self) -> None:
        from . import kpz_exact
        import hashlib

        cache_type = self.__configuration['cache.type']
        self.__log.debug('Using %s cache', cache_type)
        self.__cache = create_cache(
            cache_type, self.__configuration.get('cache.fs.directory'))
        self.__cache.set_key_prefix(
            hashlib.shake_128(__version__.encode('utf-8')).digest(16))
        kpz_exact.set_kernel_cache(self.__cache)

    @property
    def configuration(self) -> collections.ChainMap:
        return self.__configuration

    def _get_cache(self) -> Cache:
        return self.__cache

    def __getitem__(self, key: str) -> Any:
        return self.__configuration[key]

    def provenance(self) -> Dict[str, Any]:
        """Everything needed to reproduce a run. Contains no timestamps, so
        identical runs produce identical files."""
        resolved = {key: self.__configuration[key]
                    for key in sorted(self.__configuration.keys())}
        return {
            'version': __version__,
            'rng': rng.describe(),
            'configuration': resolved,
        }

    def create_publisher(self) -> Publisher:
        return create_publisher(self['output.format'],
                                pathlib.Path(self['output.directory']),
                                self.provenance())

    def run_exact(self) -> Table:
        """Tabulate the generating function on the configured ``s`` grid."""
        from .kpz_exact import CrossoverParams, kpz_genfun

        t = self['exact.t']
        grid = _grid(self['exact.s_min'], self['exact.s_max'],
                     self['exact.s_step'], 's')
        table = Table('exact', [
            Column('s', 'float'),
            Column('t', 'float'),
            Column('det', 'float', 'det(1 - P_0 K_{s,t} P_0)'),
            Column('doubling_gap', 'float', '|det_m - det_2m|'),
        ])
        with _Timer(self.__log, f'Generating function for t={t:g}'):
            for s in grid:
                result = kpz_genfun(CrossoverParams(float(s), t),
                                    self['fredholm.nodes'],
                                    self['fredholm.tail_tol'],
                                    self['fredholm.max_nodes'])
                table.append(float(s), t, result.value, result.doubling_gap)
        return table

    def run_tw(self) -> Table:
        """Tabulate the Tracy–Widom GUE distribution function."""
        from .kpz_exact import tw_gue_determinant

        grid = _grid(self['tw.sigma_min'], self['tw.sigma_max'],
                     self['tw.sigma_step'], 'σ')
        table = Table('tw', [
            Column('sigma', 'float'),
            Column('cdf', 'float', 'F_GUE(sigma)'),
            Column('doubling_gap', 'float', '|det_m - det_2m|'),
        ])
        with _Timer(self.__log, 'Tracy–Widom GUE table'):
            for sigma in grid:
                result = tw_gue_determinant(float(sigma),
                                            self['fredholm.nodes'],
                                            self['fredholm.tail_tol'],
                                            self['fredholm.max_nodes'])
                table.append(float(sigma), result.value, result.doubling_gap)
        return table

    def run_asep(self) -> Table:
        """Farm out step initial condition trajectories; one row per
        trajectory and sample time."""
        from .asep_sim import AsepParams, run_step_farm

        times = [float(t) for t in self['asep.times']]
        tags = [int(t) for t in self['asep.tags']]
        params = AsepParams.from_right_rate(self['asep.p'])
        with _Timer(self.__log, f'{self["trajectories"]} ASEP trajectories'):
            result = run_step_farm(
                params, times, self['trajectories'], self['seed'],
                window_halfwidth=self['asep.window_halfwidth'],
                tags=tags, workers=self['workers'])

        table = Table('asep', [
            Column('trajectory', 'int'),
            Column('time', 'float'),
            Column('current', 'int',
                   'jumps from site 1 to 0 minus jumps from 0 to 1'),
            Column('height', 'int', 'h(0, t) = 2 current'),
        ] + [Column(f'x_{tag}', 'int', f'position of particle {tag}')
             for tag in tags])
        for i in range(result.trajectories):
            for s, t in enumerate(result.sample_times):
                current = int(result.current[i, s])
                table.append(i, float(t), current, 2 * current,
                             *(int(x) for x in result.tagged[i, s]))
        return table

    def run_she(self) -> Table:
        """Sample ``Z(0, t)`` of the configured solver; one row per
        trajectory."""
        from .she_sim import LatticeSheParams, sample_point_values

        solver = self['she.solver']
        t = self['she.t']
        if solver == 'lattice':
            options = {'params': LatticeSheParams(
                self['she.dx'], self['she.dt'], self['she.half_width'])}
        else:
            options = {'site': self['she.site'],
                       'window_size': self['she.window_size']}
            if self['she.dt'] is not None:
                options['dt'] = self['she.dt']

        with _Timer(self.__log, f'{self["trajectories"]} {solver} '
                                'SHE trajectories'):
            values = sample_point_values(t, self['trajectories'], solver,
                                         self['seed'],
                                         workers=self['workers'], **options)

        table = Table('she', [
            Column('trajectory', 'int'),
            Column('z', 'float', 'Z at the origin (or the chosen site)'),
            Column('height', 'float', 'log z'),
        ])
        with np.errstate(divide='ignore'):
            heights = np.log(values)
        for i, (z, h) in enumerate(zip(values, heights)):
            table.append(i, float(z), float(h))
        return table

    def she_moments(self, table: Table) -> Dict[str, Any]:
        """Moments ``E[Z^n]``, ``n = 1, 2, 3``, of a table produced by
        :py:meth:`run_she`."""
        from .she_sim import estimate_moment

        values = np.array(table.column('z'))
        moments = {}
        for n in (1, 2, 3):
            estimate = estimate_moment(values, n)
            moments[str(n)] = estimate._asdict()
        return {'solver': self['she.solver'], 't': self['she.t'],
                'trials': len(values), 'moments': moments}

    def run_replica(self) -> Dict[str, Any]:
        """Propagate the replica state; optionally with a Richardson
        error estimate."""
        from .replica_oracle import propagate, propagate_with_error

        n, t, dx = self['replica.n'], self['replica.t'], self['replica.dx']
        with _Timer(self.__log, f'Replica propagation n={n}, t={t:g}'):
            if self['replica.richardson']:
                result = propagate_with_error(n, t, dx,
                                              L=self['replica.half_width'])
                return {'n': n, 't': t, 'dx': result.dx,
                        'value': result.value,
                        'extrapolated': result.extrapolated,
                        'error': result.error}
            value = propagate(n, t, dx, self['replica.dtau'],
                              self['replica.half_width'])
            return {'n': n, 't': t, 'dx': dx, 'value': value}

    def run_compare(self, sample: pathlib.Path,
                    select: Optional[Dict[str, float]] = None,
                    reference_select: Optional[Dict[str, float]] = None) \
            -> Dict[str, Any]:
        """Compare one column of a result file with the Tracy–Widom GUE
        distribution or with the same column of another result file."""
        from . import stats
        from .kpz_exact import DistributionMoments, standardized_tw_gue_cdf
        from .publish import load_samples

        column = self['compare.column']
        samples = load_samples(sample, column, select)
        if self['compare.negate']:
            samples = samples.derive(-samples.values, negated=True)

        reference_name = self['compare.reference']
        standardize = self['compare.standardize']
        if reference_name == 'tw-gue':
            moments = None if standardize else DistributionMoments(0, 1, 0)
            reference = standardized_tw_gue_cdf(
                moments, self['fredholm.nodes'])
            reference_mean = None
            if not standardize:
                from .kpz_exact import tw_gue_moments
                reference_mean = tw_gue_moments(self['fredholm.nodes']).mean
            report = stats.compare(
                samples, reference, reference_mean=reference_mean,
                reference_label='tw-gue', standardized=standardize,
                ks_threshold=self['compare.ks_threshold'],
                B=self['compare.resamples'], alpha=self['compare.alpha'],
                seed=self['seed'])
        else:
            other = load_samples(pathlib.Path(reference_name), column,
                                 reference_select or select)
            if self['compare.negate']:
                other = other.derive(-other.values, negated=True)
            report = stats.compare(
                samples, other, standardized=standardize,
                ks_threshold=self['compare.ks_threshold'],
                B=self['compare.resamples'], alpha=self['compare.alpha'],
                seed=self['seed'])
        return report.to_dict()
