import numpy as np
import pytest

from kpzlab.cache import FilesystemCache, MemoryCache, NullCache, \
    create_cache
from kpzlab.errors import ConfigurationError


def test_put_retrieve_memory_cache():
    c = MemoryCache()
    key = bytes(1)
    assert c.put(key, 23)
    assert c.get(key) == 23
    assert not c.put(key, 42)
    assert c.get(key) == 23


def test_memory_cache_inspect():
    import sys

    c = MemoryCache()
    key = bytes(1)
    value = bytes([1, 2, 3, 4])

    c.put(key, value)
    ci = c.inspect()
    assert ci.entry_count == 1
    assert ci.size >= sys.getsizeof(value)


def test_memory_cache_inspect_counts_array_bytes():
    c = MemoryCache()
    c.put(b'k', np.zeros((100, 100)))
    assert c.inspect().size >= 80000


def test_key_prefix_separates_entries():
    c = MemoryCache()
    c.set_key_prefix(b'v1')
    c.put(b'key', 1)
    c.set_key_prefix(b'v2')
    assert c.get(b'key') is None


def test_filesystem_cache_persists(tmp_path):
    c = FilesystemCache(tmp_path)
    c.put(b'matrix', np.eye(3))
    c.persist()

    reopened = FilesystemCache(tmp_path)
    assert np.array_equal(reopened.get(b'matrix'), np.eye(3))
    info = reopened.inspect()
    assert info.entry_count == 1
    assert info.size > 0

    reopened.clear()
    assert reopened.get(b'matrix') is None
    assert reopened.inspect().entry_count == 0


def test_filesystem_cache_stores_arrays_and_objects(tmp_path):
    c = FilesystemCache(tmp_path)
    assert c.put(b'rule', (np.array([0.5]), np.array([2.0])))
    assert c.put(b'matrix', np.ones((2, 2)))
    assert not c.put(b'matrix', np.zeros((2, 2)))

    matrix = c.get(b'matrix')
    assert np.array_equal(matrix, np.ones((2, 2)))
    with pytest.raises(ValueError):
        matrix[0, 0] = 0
    nodes, weights = c.get(b'rule')
    assert nodes[0] == 0.5 and weights[0] == 2.0
    suffixes = sorted(p.suffix for p in tmp_path.iterdir())
    assert suffixes == ['.npy', '.pickle']


def test_filesystem_cache_ignores_broken_index(tmp_path):
    (tmp_path / 'cache.index').write_bytes(b'not a pickle')
    c = FilesystemCache(tmp_path)
    assert c.inspect().entry_count == 0


def test_null_cache():
    c = NullCache()
    assert c.put(b'key', 1)
    assert c.get(b'key') is None
    assert c.inspect().entry_count == 0


def test_create_cache(tmp_path):
    assert isinstance(create_cache('memory'), MemoryCache)
    assert isinstance(create_cache('none'), NullCache)
    assert isinstance(create_cache('fs', tmp_path / 'cache'),
                      FilesystemCache)
    with pytest.raises(ConfigurationError):
        create_cache('fs')
    with pytest.raises(ConfigurationError):
        create_cache('redis')
