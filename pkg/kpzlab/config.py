import logging
import os
import pathlib
from typing import (
    IO,
    Any,
    Dict,
    List,
    Mapping,
    Optional,
    Union,
)

from .errors import ConfigurationError

OUTPUT_DIRECTORY_VARIABLE = 'KPZLAB_OUTPUT_DIR'


def create_default_configuration() -> Dict[str, Any]:
    """Creates a dictionary with the default configuration."""
    # When changing this, make sure to update the docs as well
    return {
        'seed': 20240101,
        'trajectories': 1000,
        'workers': 0,
        'output': {
            'directory': os.environ.get(OUTPUT_DIRECTORY_VARIABLE, 'output'),
            'format': 'csv',
        },
        'rng': {
            'algorithm': 'PCG64',
            'version': 1,
        },
        'cache': {
            'type': 'memory',
            'fs.directory': 'cache',
        },
        'fredholm': {
            'nodes': 40,
            'tail_tol': 1e-16,
            'max_nodes': 4000,
        },
        'exact': {
            't': 1000.0,
            's_min': -10.0,
            's_max': 10.0,
            's_step': 0.5,
        },
        'tw': {
            'sigma_min': -6.0,
            'sigma_max': 4.0,
            'sigma_step': 0.1,
        },
        'asep': {
            'p': 0.0,
            'times': [250.0, 500.0, 1000.0],
            'window_halfwidth': None,
            'tags': [],
        },
        'she': {
            'solver': 'lattice',
            't': 1.0,
            'dt': None,
            'dx': 0.05,
            'half_width': 6.0,
            'window_size': None,
            'site': 0,
        },
        'replica': {
            'n': 1,
            't': 1.0,
            'dx': 0.05,
            'dtau': None,
            'half_width': None,
            'richardson': False,
        },
        'compare': {
            'reference': 'tw-gue',
            'column': 'current',
            'standardize': True,
            'negate': False,
            'ks_threshold': 0.1,
            'resamples': 1000,
            'alpha': 0.05,
        },
    }


def _type_matches(default: Any, value: Any) -> bool:
    if default is None or value is None:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, type(default))


def validate_configuration(configuration: Mapping[str, Any],
                           defaults: Mapping[str, Any]) -> List[str]:
    """Check a flattened configuration against the flattened defaults.

    Returns the unknown keys, which are ignored.

    :raises ConfigurationError: If a known key has a value of the wrong type
                                or the random generator is not the pinned
                                one.
    """
    log = logging.getLogger(__name__)
    unknown = []
    for key, value in configuration.items():
        if key not in defaults:
            log.warning('Unknown configuration key "%s", ignored', key)
            unknown.append(key)
            continue
        if not _type_matches(defaults[key], value):
            raise ConfigurationError(
                f'Configuration key "{key}" expects a value of type '
                f'{type(defaults[key]).__name__}, got {value!r}',
                key=key, value=repr(value))

    for key in ('rng.algorithm', 'rng.version'):
        if key in configuration and configuration[key] != defaults[key]:
            raise ConfigurationError(
                f'"{key}" is pinned to {defaults[key]!r}, got '
                f'{configuration[key]!r}', key=key)
    return unknown


def load_configuration(source: Union[str, pathlib.Path, IO, None]) \
        -> Dict[str, Any]:
    """Load a YAML configuration from a file name or stream.

    This uses the fast ``CSafeLoader`` if available. An empty document yields
    an empty dictionary.

    :raises ConfigurationError: If the document is not valid YAML or not a
                                mapping.
    """
    import yaml
    try:
        from yaml import CSafeLoader as Loader
    except ImportError:
        from yaml import SafeLoader as Loader  # type: ignore

    if source is None:
        return {}
    try:
        if isinstance(source, (str, pathlib.Path)):
            with open(source, 'rb') as f:
                document = yaml.load(f, Loader=Loader)
        else:
            document = yaml.load(source, Loader=Loader)
    except yaml.YAMLError as e:
        raise ConfigurationError(f'Invalid configuration file: {e}')

    # It's None if the YAML file is empty
    if document is None:
        return {}
    if not isinstance(document, dict):
        raise ConfigurationError('The configuration must be a mapping')
    return document


def dump_configuration(data: Mapping[str, Any],
                       stream: Optional[IO] = None):
    """Dump a configuration as YAML, with sorted keys."""
    import yaml
    try:
        from yaml import CSafeDumper as Dumper
    except ImportError:
        from yaml import SafeDumper as Dumper  # type: ignore

    return yaml.dump(dict(data), stream, Dumper=Dumper, sort_keys=True)
