import functools
import json
import logging
import os
import sys
from typing import Any, Dict, Optional

import click

from . import KpzLab, __version__, signals
from .config import create_default_configuration, dump_configuration
from .errors import ArgumentError, KpzLabError


class Environment:
    """The command line environment.

    This collects the configuration overrides given on the command line and
    provides a kpzlab instance created from them."""
    __kpzlab: KpzLab | None

    def __init__(self):
        self.verbose = False
        self.debug = False
        self.config = None
        self.overrides: Dict[str, Any] = {}
        self.__kpzlab = None
        self.log = logging.getLogger('kpzlab.cmdline')

    def override(self, **options) -> None:
        """Add ``key=value`` overrides; ``None`` values (flags which were not
        given) are skipped. Dots in keys are written as ``__``."""
        for key, value in options.items():
            if value is None:
                continue
            self.overrides[key.replace('__', '.')] = value

    @property
    def kpzlab(self) -> KpzLab:
        if not self.__kpzlab:
            self.__kpzlab = _create_kpzlab(self.config, self.overrides)
        assert self.__kpzlab is not None
        return self.__kpzlab


pass_environment = click.make_pass_decorator(Environment, ensure=True)


def _setup_logging(*, debug: bool, verbose: bool):
    if debug:
        logging.basicConfig(
            level=logging.DEBUG,
            format='%(asctime)s %(levelname)-7s %(name)s %(message)s')
        # numba logs every compilation pass at debug level
        logging.getLogger('numba').setLevel(logging.INFO)
    elif verbose:
        logging.basicConfig(
            level=logging.INFO,
            format='%(asctime)s %(levelname)-7s %(message)s')
    else:
        logging.basicConfig(
            level=logging.WARN,
            format='%(asctime)s %(levelname)-7s %(message)s')


def _create_kpzlab(config, overrides):
    if config and os.path.exists(config):
        return KpzLab(config, configuration_overrides=overrides)
    else:
        return KpzLab(configuration_overrides=overrides)


def _report_errors(f):
    """Turn a :py:class:`KpzLabError` into its exit code, with the error
    payload written to ``stderr`` as one line of JSON."""
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except KpzLabError as e:
            logging.getLogger('kpzlab.cmdline').debug('Run failed',
                                                      exc_info=True)
            click.echo(json.dumps(e.payload(), sort_keys=True, default=str),
                       err=True)
            sys.exit(e.exit_code)
    return wrapper


class _Progress:
    """Logs farm progress every ``step`` collected trajectories."""
    def __init__(self, step: int = 1000):
        self.__step = step
        self.__count = 0
        self.__log = logging.getLogger('kpzlab.cmdline')

    def __call__(self, sender, index: int, kind: str):
        self.__count += 1
        if self.__count % self.__step == 0:
            self.__log.info('%d %s trajectories done', self.__count, kind)


@click.group(name='Built-in commands')
@click.option('--debug/--no-debug', default=False, help='Enable debug output.')
@click.option('--verbose', is_flag=True, help='Enable verbose output.')
@click.option('--config', default='kpzlab.yaml', type=click.Path(),
              help='Set the path to the configuration file.')
@click.option('--output-directory', '-o', default=None, type=click.Path(),
              help='Override the output directory.')
@click.option('--format', 'output_format', default=None,
              type=click.Choice(['csv', 'json']),
              help='Override the output format.')
@click.option('--seed', default=None, type=int, help='Override the seed.')
@click.option('--workers', default=None, type=int,
              help='Number of worker processes, 0 uses all CPUs.')
@click.version_option(version=__version__)
@pass_environment
def cli(env, debug: bool, verbose: bool, config, output_directory,
        output_format, seed, workers):
    _setup_logging(debug=debug, verbose=verbose)

    env.config = config
    env.override(output__directory=output_directory,
                 output__format=output_format,
                 seed=seed, workers=workers)

    progress = _Progress()
    signals.trajectory_completed.connect(progress, weak=False)
    click.get_current_context().call_on_close(
        lambda: signals.trajectory_completed.disconnect(progress))


def main():
    from .signals import commandline_prepared

    commandline_prepared.send(cli=cli)
    cli()


def _finish(env, subcommand: str, path) -> None:
    env.kpzlab._get_cache().persist()
    signals.run_finished.send(subcommand=subcommand, path=path)
    click.echo(str(path))


@cli.command()
@click.option('--t', 't', type=float, default=None, help='KPZ time.')
@click.option('--s-min', type=float, default=None)
@click.option('--s-max', type=float, default=None)
@click.option('--s-step', type=float, default=None)
@click.option('--nodes', '-m', type=int, default=None,
              help='Quadrature nodes of the determinant.')
@pass_environment
@_report_errors
def exact(env, t, s_min, s_max, s_step, nodes):
    """Tabulate the exact generating function.

    Writes det(1 - P_0 K_{s,t} P_0) for every s on the grid, together with
    the gap between the m and 2m node evaluations."""
    env.override(exact__t=t, exact__s_min=s_min, exact__s_max=s_max,
                 exact__s_step=s_step, fredholm__nodes=nodes)
    table = env.kpzlab.run_exact()
    path = env.kpzlab.create_publisher().publish_table(table)
    _finish(env, 'exact', path)


@cli.command()
@click.option('--sigma-min', type=float, default=None)
@click.option('--sigma-max', type=float, default=None)
@click.option('--sigma-step', type=float, default=None)
@click.option('--nodes', '-m', type=int, default=None,
              help='Quadrature nodes of the determinant.')
@pass_environment
@_report_errors
def tw(env, sigma_min, sigma_max, sigma_step, nodes):
    """Tabulate the Tracy–Widom GUE distribution function."""
    env.override(tw__sigma_min=sigma_min, tw__sigma_max=sigma_max,
                 tw__sigma_step=sigma_step, fredholm__nodes=nodes)
    table = env.kpzlab.run_tw()
    path = env.kpzlab.create_publisher().publish_table(table)
    _finish(env, 'tw', path)


@cli.command()
@click.option('--p', 'p', type=float, default=None,
              help='Rate of right jumps; left jumps have rate 1 - p.')
@click.option('--time', '-t', 'times', type=float, multiple=True,
              help='Sample time, may be repeated.')
@click.option('--window-halfwidth', type=int, default=None)
@click.option('--tag', 'tags', type=int, multiple=True,
              help='Record the position of this particle, may be repeated.')
@click.option('--trajectories', '-n', type=int, default=None)
@pass_environment
@_report_errors
def asep(env, p, times, window_halfwidth, tags, trajectories):
    """Simulate the exclusion process from the step initial condition.

    Writes one row per trajectory and sample time with the current through
    the origin and the tagged particle positions."""
    env.override(asep__p=p,
                 asep__times=list(times) if times else None,
                 asep__window_halfwidth=window_halfwidth,
                 asep__tags=list(tags) if tags else None,
                 trajectories=trajectories)
    table = env.kpzlab.run_asep()
    path = env.kpzlab.create_publisher().publish_table(table)
    _finish(env, 'asep', path)


@cli.command()
@click.option('--solver', type=click.Choice(['lattice', 'semidiscrete']),
              default=None)
@click.option('--t', 't', type=float, default=None)
@click.option('--dt', type=float, default=None)
@click.option('--dx', type=float, default=None)
@click.option('--half-width', type=float, default=None)
@click.option('--window-size', type=int, default=None)
@click.option('--site', type=int, default=None)
@click.option('--trajectories', '-n', type=int, default=None)
@pass_environment
@_report_errors
def she(env, solver, t, dt, dx, half_width, window_size, site,
        trajectories):
    """Sample the stochastic heat equation at the origin.

    With enough trajectories the first three moments are written to
    ``she_moments.json`` as well."""
    from .she_sim import MIN_TRIALS

    env.override(she__solver=solver, she__t=t, she__dt=dt, she__dx=dx,
                 she__half_width=half_width, she__window_size=window_size,
                 she__site=site, trajectories=trajectories)
    kpzlab = env.kpzlab
    table = kpzlab.run_she()
    publisher = kpzlab.create_publisher()
    path = publisher.publish_table(table)
    if len(table.rows) >= MIN_TRIALS:
        publisher.publish_record('she_moments', kpzlab.she_moments(table))
    _finish(env, 'she', path)


@cli.command()
@click.option('--n', 'n', type=int, default=None, help='Particle count.')
@click.option('--t', 't', type=float, default=None)
@click.option('--dx', type=float, default=None)
@click.option('--dtau', type=float, default=None)
@click.option('--half-width', type=float, default=None)
@click.option('--richardson/--no-richardson', default=None,
              help='Also run at dx/2 and extrapolate.')
@pass_environment
@_report_errors
def replica(env, n, t, dx, dtau, half_width, richardson):
    """Propagate n delta-interacting particles from the origin and report
    the value at the origin, which equals the n-th moment of Z(0, t)."""
    env.override(replica__n=n, replica__t=t, replica__dx=dx,
                 replica__dtau=dtau, replica__half_width=half_width,
                 replica__richardson=richardson)
    result = env.kpzlab.run_replica()
    path = env.kpzlab.create_publisher().publish_record('replica', result)
    _finish(env, 'replica', path)


def _parse_selection(values) -> Optional[Dict[str, float]]:
    if not values:
        return None
    selection = {}
    for value in values:
        key, sep, number = value.partition('=')
        try:
            if not sep:
                raise ValueError(value)
            selection[key.strip()] = float(number)
        except ValueError:
            raise ArgumentError(f'Selection "{value}" must have the form '
                                'column=value', selection=value)
    return selection


@cli.command()
@click.argument('sample', type=click.Path())
@click.option('--reference', '-r', default=None,
              help='"tw-gue" or a result file with the same column.')
@click.option('--column', '-c', default=None)
@click.option('--select', 'select', multiple=True,
              help='Only use rows with column=value, may be repeated.')
@click.option('--reference-select', multiple=True,
              help='Row selection for the reference file.')
@click.option('--standardize/--no-standardize', default=None)
@click.option('--negate/--no-negate', default=None,
              help='Compare the negated sample.')
@click.option('--ks-threshold', type=float, default=None)
@click.option('--resamples', type=int, default=None)
@click.option('--alpha', type=float, default=None)
@pass_environment
@_report_errors
def compare(env, sample, reference, column, select, reference_select,
            standardize, negate, ks_threshold, resamples, alpha):
    """Compare a column of a result file with the Tracy–Widom GUE
    distribution or another result file.

    Writes ``compare.json`` with the Kolmogorov–Smirnov distance, a bootstrap
    interval of the mean and the pass/fail flags."""
    import pathlib

    env.override(compare__reference=reference, compare__column=column,
                 compare__standardize=standardize, compare__negate=negate,
                 compare__ks_threshold=ks_threshold,
                 compare__resamples=resamples, compare__alpha=alpha)
    report = env.kpzlab.run_compare(pathlib.Path(sample),
                                    _parse_selection(select),
                                    _parse_selection(reference_select))
    if not report['passed']:
        env.log.warning('Comparison failed: %s',
                        ', '.join(k for k, v in report['flags'].items()
                                  if not v))
    path = env.kpzlab.create_publisher().publish_record('compare', report)
    _finish(env, 'compare', path)


@cli.command()
@click.option('--output', '-o', type=click.File(mode='w'))
def create_config(output):
    """Create a default configuration."""
    text = dump_configuration(create_default_configuration(), output)
    if output is None:
        click.echo(text, nl=False)


@cli.command()
@click.argument('action', type=click.Choice(['clear', 'inspect']))
@pass_environment
@_report_errors
def cache(env, action):
    """Modify or inspect the cache."""
    import humanfriendly

    if action == 'clear':
        env.kpzlab._get_cache().clear()
    elif action == 'inspect':
        info = env.kpzlab._get_cache().inspect()
        size = humanfriendly.format_size(info.size, binary=True)
        print(f'Cache type:   {info.name}')
        print(f'Size:         {size}')
        print(f'Object count: {info.entry_count}')


if __name__ == '__main__':
    main()
