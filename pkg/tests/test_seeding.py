import math

import numpy as np
import pytest

from apps.regvqe.core.ansatz import AnsatzSpec
from apps.regvqe.harness.seeding import InitDistribution, initial_theta


def test_same_keys_give_same_theta():
    spec = AnsatzSpec.two_local(4, 4)
    a = initial_theta(spec, 7, seed_base=2025)
    b = initial_theta(spec, 7, seed_base=2025)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (40,)


def test_keys_are_independent_streams():
    spec = AnsatzSpec.two_local(4, 4)
    base = initial_theta(spec, 0, seed_base=1)
    assert not np.array_equal(base, initial_theta(spec, 1, seed_base=1))
    assert not np.array_equal(base, initial_theta(spec, 0, seed_base=2))
    assert not np.array_equal(base, initial_theta(spec, 0, seed_base=1, lambda_key=1))


def test_symmetric_range_and_mean():
    spec = AnsatzSpec.two_local(10, 4)
    draws = np.concatenate([initial_theta(spec, j, seed_base=99) for j in range(1000)])
    assert draws.size == 100_000
    assert draws.min() >= -math.pi
    assert draws.max() < math.pi
    assert abs(draws.mean()) < 0.02


def test_zero_to_two_pi():
    spec = AnsatzSpec.ry_layer(8)
    draws = np.concatenate(
        [initial_theta(spec, j, InitDistribution.UNIFORM_0_TO_2PI, seed_base=3) for j in range(200)]
    )
    assert draws.min() >= 0.0
    assert draws.max() < 2 * math.pi
    assert abs(draws.mean() - math.pi) < 0.1


def test_accepts_distribution_by_name():
    spec = AnsatzSpec.ry_layer(3)
    np.testing.assert_array_equal(
        initial_theta(spec, 4, "Uniform0To2Pi"),
        initial_theta(spec, 4, InitDistribution.UNIFORM_0_TO_2PI),
    )


def test_negative_keys_are_rejected():
    with pytest.raises(ValueError):
        initial_theta(AnsatzSpec.ry_layer(2), -1)
