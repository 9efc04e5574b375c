import math

import numpy as np
import pytest
from scipy import stats

from jscc.channel import transmit
from jscc.rng import RngStream, float_key


def test_zero_noise_is_identity():
    x = np.array([[0.1, -2.0], [3.0, 4.5]])
    out = transmit(x, 0.0, RngStream(1), keep_noise=True)
    np.testing.assert_array_equal(out.y, x)
    assert np.all(out.z == 0)
    out.y[0, 0] = 99.0
    assert x[0, 0] == 0.1


def test_negative_variance_rejected():
    with pytest.raises(ValueError):
        transmit(np.zeros(3), -1e-3, RngStream(0))


@pytest.fixture(scope="module")
def noise_draws():
    var = 0.37
    out = transmit(np.zeros((1_000_000, 2)), var, RngStream(3), keep_noise=True)
    return var, out


def test_output_is_input_plus_noise(noise_draws):
    _, out = noise_draws
    np.testing.assert_array_equal(out.y, out.z)
    x = np.arange(6.0).reshape(3, 2)
    o = transmit(x, 0.2, RngStream(9), keep_noise=True)
    np.testing.assert_array_equal(o.y, x + o.z)


def test_variance_within_one_percent(noise_draws):
    var, out = noise_draws
    for i in range(2):
        assert np.var(out.y[:, i], ddof=1) == pytest.approx(var, rel=0.01)


def test_cross_covariance_within_three_se(noise_draws):
    var, out = noise_draws
    prod = out.z[:, 0] * out.z[:, 1]
    se = prod.std(ddof=1) / math.sqrt(prod.size)
    assert abs(prod.mean()) <= 3 * se


def test_fourth_moment_within_three_se(noise_draws):
    var, out = noise_draws
    for i in range(2):
        m4 = out.z[:, i] ** 4
        se = m4.std(ddof=1) / math.sqrt(m4.size)
        assert abs(m4.mean() - 3 * var**2) <= 3 * se


def test_noise_independent_of_input():
    x = np.random.default_rng(0).uniform(-5, 5, size=(100_000, 3))
    out = transmit(x, 0.5, RngStream(4), keep_noise=True)
    for i in range(3):
        r, _ = stats.pearsonr(x[:, i], out.z[:, i])
        assert abs(r) < 4 / math.sqrt(x.shape[0])


def test_normality():
    out = transmit(np.zeros(50_000), 2.0, RngStream(5), keep_noise=True)
    assert stats.kstest(out.z / math.sqrt(2.0), "norm").pvalue > 1e-4


def test_stream_reproducibility():
    a = transmit(np.zeros(100), 1.0, RngStream(7, 2)).y
    b = transmit(np.zeros(100), 1.0, RngStream(7, 2)).y
    c = transmit(np.zeros(100), 1.0, RngStream(7, 3)).y
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_live_generator_advances():
    gen = np.random.default_rng(0)
    a = transmit(np.zeros(10), 1.0, gen).y
    b = transmit(np.zeros(10), 1.0, gen).y
    assert not np.array_equal(a, b)


def test_child_streams_differ():
    s = RngStream(1, 2)
    assert s.child(0) != s.child(1)
    assert not np.array_equal(s.child(0).generator().random(5), s.child(1).generator().random(5))


def test_float_key_distinguishes_neighbours():
    x = 0.1
    assert float_key(x) != float_key(np.nextafter(x, 1))
    assert float_key(2.0) == float_key(2)
