import math

import numpy as np

from kpzlab.util import flatten_dictionary, format_float, \
    get_hash_key_for_array


def test_flatten_dictionary():
    d = {'a': 1, 'b': {'c': 2}}
    x = flatten_dictionary(d)
    assert x == {'a': 1, 'b.c': 2}


def test_flatten_dictionary_with_ignores():
    d = {'no_flatten': {'a': 1}, 'flatten': {'a': 1}}
    x = flatten_dictionary(d, ignore_keys={'no_flatten'})
    assert x['no_flatten']['a'] == 1
    assert 'flatten.a' in x


def test_flatten_dictionary_with_ignores_nested():
    d = {'no': {'no_flatten': {'a': 1}}, 'flatten': {'a': 1}}
    x = flatten_dictionary(d, ignore_keys={'no.no_flatten'})
    assert x['no.no_flatten']['a'] == 1
    assert 'flatten.a' in x


def test_hash_key_for_array():
    nodes = np.linspace(0, 1, 5)
    key = get_hash_key_for_array(nodes, extra=(1.0, 2))
    assert key == get_hash_key_for_array(nodes.copy(), extra=(1, 2.0))
    assert key != get_hash_key_for_array(nodes, extra=(1.0, 3))
    assert key != get_hash_key_for_array(nodes[:4], extra=(1.0, 2))


def test_hash_key_depends_on_shape():
    values = np.arange(6.0)
    assert get_hash_key_for_array(values) != \
        get_hash_key_for_array(values.reshape(2, 3))


def test_format_float_reads_back_exactly():
    for value in (0.1, 1 / 3, math.pi * 1e-300, -2.5e17):
        assert float(format_float(value)) == value
    assert format_float(0.5) == '0.5'
