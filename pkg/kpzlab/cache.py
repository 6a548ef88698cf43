from dataclasses import dataclass
from typing import Dict, Optional
import abc
import hashlib
import logging
import os
import pathlib
import pickle
import shutil
import sys
import threading

import numpy as np


@dataclass
class CacheInfo:
    """Entry count and stored bytes of a cache, for ``kpzlab cache
    inspect``. Sizes are estimates."""

    size: int = 0
    entry_count: int = 0
    name: str = ""


class Cache(abc.ABC):
    """Key-value store for quadrature rules and kernel matrices.

    Stored values are shared, never copied. Arrays handed out by a cache are
    read-only.
    """

    @abc.abstractmethod
    def set_key_prefix(self, prefix: bytes):
        """Prepend ``prefix`` to every key, so that entries written by other
        kpzlab versions are never returned."""

    @abc.abstractmethod
    def put(self, key: bytes, value: object) -> bool:
        """Store ``value`` unless ``key`` is present already.

        :return: ``False`` if the key was present and nothing was stored.
        """

    @abc.abstractmethod
    def get(self, key: bytes) -> Optional[object]:
        """Return the value stored for ``key`` or ``None``."""

    def persist(self) -> None:
        """Write whatever is needed to reopen the cache in a later run."""

    @abc.abstractmethod
    def clear(self) -> None:
        ...

    @abc.abstractmethod
    def inspect(self) -> CacheInfo:
        ...


class _PrefixedCache(Cache):
    __log = logging.getLogger(f'{__name__}.{__qualname__}')

    def __init__(self):
        self.__prefix = b''

    def set_key_prefix(self, prefix: bytes):
        self.__log.debug('Cache key prefix: %s', prefix.hex())
        self.__prefix = prefix

    def put(self, key: bytes, value: object) -> bool:
        return self._put(self.__prefix + key, value)

    def get(self, key: bytes) -> Optional[object]:
        return self._get(self.__prefix + key)

    @abc.abstractmethod
    def _put(self, key: bytes, value: object) -> bool:
        ...

    @abc.abstractmethod
    def _get(self, key: bytes) -> Optional[object]:
        ...


class FilesystemCache(_PrefixedCache):
    """Keeps kernel matrices between command line runs.

    Arrays go to ``.npy`` files, anything else is pickled. The key index is
    only written by :py:meth:`persist`; entries added after the last call
    are lost when the process ends.
    """
    __entries: Dict[bytes, str]

    __log = logging.getLogger(f'{__name__}.{__qualname__}')

    def __init__(self, path: pathlib.Path):
        super().__init__()
        self.__directory = pathlib.Path(path)
        self.__lock = threading.Lock()
        os.makedirs(self.__directory, exist_ok=True)
        self.__index_file = self.__directory / 'cache.index'
        self.__entries = self.__read_index()

    def __read_index(self) -> Dict[bytes, str]:
        if not self.__index_file.exists():
            return {}
        try:
            with self.__index_file.open('rb') as f:
                entries = pickle.load(f)
        except Exception as e:
            self.__log.warning('Starting with an empty cache, the index in '
                               '"%s" is unreadable (%s)', self.__directory, e)
            return {}
        if not isinstance(entries, dict):
            return {}
        return entries

    def _put(self, key: bytes, value: object) -> bool:
        with self.__lock:
            if key in self.__entries:
                return False
            stem = hashlib.blake2b(key, digest_size=20).hexdigest()
            if isinstance(value, np.ndarray):
                name = f'{stem}.npy'
                np.save(self.__directory / name, value, allow_pickle=False)
            else:
                name = f'{stem}.pickle'
                with (self.__directory / name).open('wb') as f:
                    pickle.dump(value, f)
            self.__entries[key] = name
            return True

    def _get(self, key: bytes) -> Optional[object]:
        with self.__lock:
            name = self.__entries.get(key)
        if name is None:
            return None
        path = self.__directory / name
        if path.suffix == '.npy':
            value = np.load(path, allow_pickle=False)
            value.setflags(write=False)
            return value
        with path.open('rb') as f:
            return pickle.load(f)

    def persist(self):
        with self.__lock, self.__index_file.open('wb') as f:
            pickle.dump(self.__entries, f)

    def clear(self) -> None:
        self.__log.debug('Removing %d cached entries from "%s"',
                         len(self.__entries), self.__directory)
        with self.__lock:
            self.__entries = {}
            shutil.rmtree(self.__directory, ignore_errors=True)
            os.makedirs(self.__directory, exist_ok=True)

    def inspect(self) -> CacheInfo:
        with self.__lock:
            names = list(self.__entries.values())
        size = sum((self.__directory / name).stat().st_size
                   for name in names)
        return CacheInfo(size, len(names), 'Filesystem')


def _nbytes(value: object) -> int:
    if isinstance(value, np.ndarray):
        return value.nbytes
    if isinstance(value, tuple):
        return sum(_nbytes(v) for v in value)
    return sys.getsizeof(value)


class MemoryCache(_PrefixedCache):
    """Process-local cache, safe to share between threads."""
    __entries: Dict[bytes, object]

    def __init__(self):
        super().__init__()
        self.__entries = {}
        self.__lock = threading.Lock()

    def _put(self, key: bytes, value: object) -> bool:
        with self.__lock:
            if key in self.__entries:
                return False
            self.__entries[key] = value
            return True

    def _get(self, key: bytes) -> Optional[object]:
        with self.__lock:
            return self.__entries.get(key)

    def clear(self) -> None:
        with self.__lock:
            self.__entries = {}

    def inspect(self) -> CacheInfo:
        with self.__lock:
            size = sys.getsizeof(self.__entries) + sum(
                sys.getsizeof(k) + _nbytes(v)
                for k, v in self.__entries.items())
            return CacheInfo(size, len(self.__entries), 'In-Memory')


class NullCache(_PrefixedCache):
    """Stores nothing; ``cache.type: none``."""

    def _put(self, key: bytes, value: object) -> bool:
        return True

    def _get(self, key: bytes) -> Optional[object]:
        return None

    def clear(self) -> None:
        pass

    def inspect(self) -> CacheInfo:
        return CacheInfo(0, 0, 'Null')


def create_cache(cache_type: str, directory=None) -> Cache:
    """Create a cache from its configuration name (``memory``, ``fs`` or
    ``none``)."""
    from .errors import ConfigurationError
    match cache_type:
        case 'memory':
            return MemoryCache()
        case 'fs':
            if directory is None:
                raise ConfigurationError(
                    'The filesystem cache requires a directory',
                    key='cache.fs.directory')
            return FilesystemCache(pathlib.Path(directory))
        case 'none':
            return NullCache()
        case _:
            raise ConfigurationError(f'Unknown cache type: "{cache_type}"',
                                     key='cache.type')
