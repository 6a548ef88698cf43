import math

import numpy as np
import pytest

from kpzlab import signals
from kpzlab.errors import ArgumentError, ConfigurationError, NumericError, \
    ResourceError
from kpzlab.fredholm import (
    CallableKernel,
    KernelDecay,
    fredholm_det,
    truncate_domain,
)
from kpzlab.kpz_exact import AiryKernel


def _rank_one(alpha):
    return CallableKernel(lambda x, y: np.exp(-alpha * (x + y)),
                          label=f'rank-one({alpha})')


def test_zero_kernel():
    k = CallableKernel(lambda x, y: 0 * x * y)
    result = fredholm_det(k, (0, 1), 10)
    assert result.value == 1.0
    assert result.doubling_gap == 0.0
    assert result.nodes_used == 10
    assert result.truncation == 1.0


def test_rank_one_identity():
    result = fredholm_det(_rank_one(1.0), (0, 8), 40)
    assert abs(result.value - (1 + math.exp(-16)) / 2) < 1e-10


def test_rank_one_identity_random_exponents():
    generator = np.random.default_rng(7)
    for alpha in generator.uniform(0.5, 3, size=5):
        expected = 1 - (1 - math.exp(-16 * alpha)) / (2 * alpha)
        result = fredholm_det(_rank_one(alpha), (0, 8), 40)
        assert abs(result.value - expected) < 1e-10


def test_airy_kernel_doubling_gap():
    result = fredholm_det(AiryKernel(), (0, 10), 60)
    assert result.doubling_gap < 1e-8
    assert 0 < result.value <= 1


def test_doubling_gap_decreases_with_refinement():
    k = AiryKernel()
    coarse = fredholm_det(k, (-2, 8), 8)
    fine = fredholm_det(k, (-2, 8), 16)
    assert fine.doubling_gap <= coarse.doubling_gap


def test_truncation_growth_does_not_change_determinant():
    k = AiryKernel()
    a, b = truncate_domain(k, 0.0, 1e-16)
    base = fredholm_det(k, (a, b), 60)
    grown = fredholm_det(k, (a, b + 4), 60)
    assert abs(base.value - grown.value) < 1e-10


def test_symmetric_kernel_gives_probability():
    # exp(-(x - y)^2) is positive definite, its norm on [0, 1] is below one
    k = CallableKernel(lambda x, y: 0.5 * np.exp(-(x - y) ** 2))
    result = fredholm_det(k, (0, 1), 20)
    assert 0 < result.value <= 1


def test_truncate_airy_kernel():
    a, b = truncate_domain(AiryKernel(), 0.0, 1e-16)
    assert a == 0.0
    assert 8 <= b <= 16


def test_truncate_without_decay():
    k = CallableKernel(lambda x, y: x * y)
    with pytest.raises(ConfigurationError):
        truncate_domain(k, 0.0, 1e-16)

    k = CallableKernel(lambda x, y: x * y, decay=KernelDecay(None))
    with pytest.raises(ConfigurationError):
        truncate_domain(k, 0.0, 1e-16)


def test_truncate_is_translation_covariant():
    k = CallableKernel(lambda x, y: np.exp(-x - y),
                       decay=KernelDecay(lambda d: np.exp(-d),
                                         translation_covariant=True))
    _, b0 = truncate_domain(k, 0.0, 1e-16)
    lower, b1 = truncate_domain(k, -4.0, 1e-16)
    assert lower == -4.0
    assert b1 == pytest.approx(b0 - 4)
    assert b0 >= 1


def test_truncate_at_least_one_unit():
    k = CallableKernel(lambda x, y: 0 * x,
                       decay=KernelDecay(lambda x: 0 * x))
    assert truncate_domain(k, 2.0, 1e-16) == (2.0, 3.0)


def test_truncate_rejects_tolerance():
    with pytest.raises(ArgumentError):
        truncate_domain(AiryKernel(), 0.0, 1e-3)
    with pytest.raises(ArgumentError):
        truncate_domain(AiryKernel(), 0.0, 0)


def test_invalid_node_counts():
    k = _rank_one(1.0)
    with pytest.raises(ArgumentError):
        fredholm_det(k, (0, 1), 1)
    with pytest.raises(ResourceError):
        fredholm_det(k, (0, 1), 2001)
    with pytest.raises(ResourceError) as e:
        fredholm_det(k, (0, 1), 20, max_nodes=30)
    assert e.value.payload()['budget'] == 30
    assert fredholm_det(k, (0, 1), 15, max_nodes=30).nodes_used == 15


def test_invalid_interval():
    with pytest.raises(ArgumentError):
        fredholm_det(_rank_one(1.0), (1, 0), 10)
    with pytest.raises(ArgumentError):
        fredholm_det(_rank_one(1.0), (0, np.inf), 10)


def test_non_finite_kernel():
    k = CallableKernel(lambda x, y: np.where(x + 0 * y > 0.9, np.inf, 0.0))
    with pytest.raises(NumericError) as e:
        fredholm_det(k, (0, 1), 10)
    payload = e.value.payload()
    assert payload['x'] > 0.9
    assert 'y' in payload


def test_determinant_signal():
    seen = []

    def receiver(sender, result, label):
        seen.append((label, result.value))

    signals.determinant_computed.connect(receiver)
    try:
        fredholm_det(_rank_one(2.0), (0, 4), 12)
    finally:
        signals.determinant_computed.disconnect(receiver)
    assert seen and seen[0][0] == 'rank-one(2.0)'
