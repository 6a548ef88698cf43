"""Write run results to disk.

A run produces either a :py:class:`Table` (one row per grid point or
trajectory) or a single record. Publishers write tables as CSV or JSON and
records as JSON. Next to every table they write a schema file describing its
columns, and every output carries the provenance of the run: tool version,
random generator and the fully resolved configuration. Floats are written
with 17 significant digits so they read back bit-identically.
"""
from abc import ABC, abstractmethod
import csv
from dataclasses import dataclass, field
import json
import logging
import pathlib
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ArgumentError, ConfigurationError
from .stats import SampleSet
from .util import format_float


@dataclass(frozen=True)
class Column:
    name: str
    type: str
    """``float``, ``int`` or ``str``"""
    description: str = ''


@dataclass
class Table:
    name: str
    columns: Sequence[Column]
    rows: List[Tuple[Any, ...]] = field(default_factory=list)

    def append(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ArgumentError(f'Row has {len(values)} values, table '
                                f'"{self.name}" has {len(self.columns)} '
                                'columns')
        self.rows.append(tuple(values))

    def column(self, name: str) -> List[Any]:
        index = [c.name for c in self.columns].index(name)
        return [row[index] for row in self.rows]


def _to_json_value(value: Any) -> Any:
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_to_json_value(v) for v in value.tolist()]
    if isinstance(value, Mapping):
        return {str(k): _to_json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_json_value(v) for v in value]
    if isinstance(value, pathlib.PurePath):
        return str(value)
    return value


def _dumps(document: Any) -> str:
    return json.dumps(_to_json_value(document), indent=2, sort_keys=True,
                      allow_nan=True) + '\n'


def _format_cell(column: Column, value: Any) -> str:
    match column.type:
        case 'float':
            return format_float(float(value))
        case 'int':
            return str(int(value))
        case _:
            return str(value)


class Publisher(ABC):
    """Writes tables and records into ``output_directory``."""
    __log = logging.getLogger(f'{__name__}.{__qualname__}')

    def __init__(self, output_directory: pathlib.Path,
                 provenance: Mapping[str, Any]):
        self._output_directory = pathlib.Path(output_directory)
        self._provenance = dict(provenance)

    @property
    def output_directory(self) -> pathlib.Path:
        return self._output_directory

    def _prepare(self) -> None:
        self._output_directory.mkdir(parents=True, exist_ok=True)

    def publish_schema(self, table: Table) -> pathlib.Path:
        path = self._output_directory / f'{table.name}.schema.json'
        path.write_text(_dumps({
            'table': table.name,
            'columns': [
                {'name': c.name, 'type': c.type,
                 'description': c.description}
                for c in table.columns
            ],
            'float_format': '17 significant digits',
        }), encoding='utf-8')
        return path

    def publish_record(self, name: str,
                       record: Mapping[str, Any]) -> pathlib.Path:
        """Write a single JSON record including the provenance."""
        self._prepare()
        path = self._output_directory / f'{name}.json'
        path.write_text(_dumps({
            'provenance': self._provenance,
            'result': record,
        }), encoding='utf-8')
        self.__log.info('Wrote "%s"', path)
        return path

    def publish_table(self, table: Table) -> pathlib.Path:
        """Write ``table`` together with its schema and return the path of
        the table file."""
        self._prepare()
        self.publish_schema(table)
        path = self._write_table(table)
        self.__log.info('Wrote %d rows to "%s"', len(table.rows), path)
        return path

    @abstractmethod
    def _write_table(self, table: Table) -> pathlib.Path:
        ...


class CsvPublisher(Publisher):
    """Writes tables as CSV with a header row; the provenance goes into a
    ``<name>.provenance.json`` file next to it."""

    def _write_table(self, table: Table) -> pathlib.Path:
        path = self._output_directory / f'{table.name}.csv'
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow([c.name for c in table.columns])
            for row in table.rows:
                writer.writerow([_format_cell(c, v)
                                 for c, v in zip(table.columns, row)])
        provenance = self._output_directory / f'{table.name}.provenance.json'
        provenance.write_text(_dumps(self._provenance), encoding='utf-8')
        return path


class JsonPublisher(Publisher):
    """Writes tables as a single JSON document with the provenance
    embedded."""

    def _write_table(self, table: Table) -> pathlib.Path:
        path = self._output_directory / f'{table.name}.json'
        path.write_text(_dumps({
            'provenance': self._provenance,
            'columns': [c.name for c in table.columns],
            'rows': [list(row) for row in table.rows],
        }), encoding='utf-8')
        return path


def create_publisher(output_format: str, output_directory: pathlib.Path,
                     provenance: Mapping[str, Any]) -> Publisher:
    match output_format:
        case 'csv':
            return CsvPublisher(output_directory, provenance)
        case 'json':
            return JsonPublisher(output_directory, provenance)
        case _:
            raise ConfigurationError(
                f'Unknown output format: "{output_format}"',
                key='output.format')


def read_table(path: pathlib.Path) -> Tuple[List[str], List[List[str]]]:
    """Read a table written by a publisher; values are returned as written
    (strings for CSV)."""
    path = pathlib.Path(path)
    if not path.exists():
        raise ArgumentError(f'File "{path}" does not exist', path=str(path))

    if path.suffix == '.json':
        document = json.loads(path.read_text(encoding='utf-8'))
        if 'columns' not in document or 'rows' not in document:
            raise ArgumentError(f'"{path}" does not contain a table',
                                path=str(path))
        return document['columns'], document['rows']

    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ArgumentError(f'"{path}" is empty', path=str(path))
        return header, [row for row in reader]


def load_samples(path: pathlib.Path, column: str,
                 select: Optional[Mapping[str, float]] = None) -> SampleSet:
    """Load one column of a table as a sample set.

    :param select: Keep only rows whose columns equal the given values, for
                   example ``{'time': 1000}``.
    """
    columns, rows = read_table(path)
    wanted = [column] + list((select or {}).keys())
    for name in wanted:
        if name not in columns:
            raise ArgumentError(f'Column "{name}" not in "{path}", available: '
                                f'{", ".join(columns)}', column=name,
                                path=str(path))

    index = columns.index(column)
    conditions = [(columns.index(k), float(v))
                  for k, v in (select or {}).items()]
    values = [float(row[index]) for row in rows
              if all(float(row[i]) == v for i, v in conditions)]
    if not values:
        raise ArgumentError(f'No rows of "{path}" match the selection',
                            path=str(path))
    return SampleSet(np.array(values), label=f'{pathlib.Path(path).stem}:'
                                             f'{column}',
                     provenance={'source': str(path)})
