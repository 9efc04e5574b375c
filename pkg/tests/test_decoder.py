import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jscc.channel import transmit
from jscc.codec import encode, modulate, with_sigma_e
from jscc.config import ConfigError, SchemeConfig, gaussian_source
from jscc.decoder import (ErrorAccumulator, decode, decompose_error, empirical_lmmse_coefficient,
                          lmmse_coefficient, lmmse_decode_e, ml_decode_levels, ml_decode_q)
from jscc.rng import RngStream


@pytest.fixture
def cfg():
    return SchemeConfig(n=3, beta=20.0, power=1.0, noise_var=1e-6, sigma_e2=1 / 12)


def _pipeline(cfg, s, seed=0, keep=False):
    cw = modulate(encode(s, cfg), cfg)
    out = transmit(cw.x, cfg.noise_var, RngStream(seed), keep_noise=keep)
    return cw, out


def test_noiseless_hand_value():
    cfg = SchemeConfig(n=2, beta=10.0, noise_var=0.0, sigma_e2=1 / 12)
    cw = modulate(encode(0.26, cfg), cfg)
    # Q_1 = 0.3, E_1 = -0.4 ; with no noise the LMMSE coefficient is 1/sqrt(P/sigma_E^2)
    dec = decode(cw.x, cfg)
    assert dec.levels_hat.tolist() == [3]
    assert dec.e_hat == pytest.approx(-0.4, rel=1e-12)
    assert dec.s_hat == pytest.approx(0.26, abs=1e-15)


def test_lmmse_coefficient_value():
    cfg = SchemeConfig(n=2, beta=4.0, power=1.0, noise_var=1.0, sigma_e2=1 / 12)
    assert lmmse_coefficient(cfg) == pytest.approx(math.sqrt(1 / 12) / 2, rel=1e-15)


def test_lmmse_needs_sigma_e():
    with pytest.raises(ConfigError):
        lmmse_coefficient(SchemeConfig(n=2, beta=4.0))


def test_lmmse_matches_empirical_regression(gauss):
    cfg = with_sigma_e(SchemeConfig(n=2, beta=30.0, noise_var=0.3), gauss, seed=1)
    s = gauss.sample(np.random.default_rng(2), 400_000)
    cw, out = _pipeline(cfg, s, seed=3)
    emp = empirical_lmmse_coefficient(cw.e_final, out.y[:, -1])
    assert emp == pytest.approx(lmmse_coefficient(cfg), rel=0.01)


def test_ml_decode_closed_form(cfg):
    y = np.linspace(-3, 3, 1001)
    gamma = cfg.q_gain
    fl = np.floor(cfg.beta * y / gamma)
    expected = fl + ((cfg.beta * y / gamma - fl) >= 0.5)
    np.testing.assert_array_equal(ml_decode_levels(y, cfg), expected.astype(int))
    np.testing.assert_allclose(ml_decode_q(y, cfg), expected / cfg.beta)


def test_ml_decode_is_nearest_point(cfg):
    y = np.random.default_rng(0).uniform(-2, 2, 2000)
    j = ml_decode_levels(y, cfg)
    grid = np.arange(-100, 101)
    dist = np.abs(y[:, None] - cfg.q_gain * grid[None, :] / cfg.beta)
    best = grid[np.argmin(dist, axis=1)]
    np.testing.assert_array_equal(j, best)


def test_ml_scalar():
    cfg = SchemeConfig(n=2, beta=10.0, sigma_e2=1 / 12)
    assert ml_decode_levels(0.3 * cfg.q_gain, cfg) == 3


def test_decode_shape_check(cfg):
    with pytest.raises(ValueError):
        decode(np.zeros((5, 2)), cfg)


def test_decode_accepts_channel_output(cfg, gauss):
    s = gauss.sample(np.random.default_rng(0), 100)
    _, out = _pipeline(cfg, s)
    np.testing.assert_array_equal(decode(out, cfg).s_hat, decode(out.y, cfg).s_hat)


def test_per_use_decodability(cfg, gauss):
    # each level is decoded from its own channel output only
    s = gauss.sample(np.random.default_rng(1), 1000)
    _, out = _pipeline(cfg, s)
    y = out.y.copy()
    base = decode(y, cfg)
    y[:, 1] += 10.0
    pert = decode(y, cfg)
    np.testing.assert_array_equal(pert.levels_hat[:, 0], base.levels_hat[:, 0])
    np.testing.assert_array_equal(pert.e_hat, base.e_hat)


def test_permutation_equivariance(cfg, gauss):
    s = gauss.sample(np.random.default_rng(2), 500)
    _, out = _pipeline(cfg, s)
    perm = np.random.default_rng(3).permutation(s.size)
    a = decode(out.y, cfg).s_hat[perm]
    b = decode(out.y[perm], cfg).s_hat
    np.testing.assert_array_equal(a, b)


def test_clamp_restricts_residual(cfg):
    y = np.array([[0.0, 0.0, 1e3]])
    assert abs(decode(y, cfg, clamp=True).e_hat[0]) <= 0.5
    assert abs(decode(y, cfg).e_hat[0]) > 0.5


def test_lmmse_decode_scalar(cfg):
    assert lmmse_decode_e(2.0, cfg, coef=0.25) == 0.5


def test_decomposition_identity(gauss):
    cfg = with_sigma_e(SchemeConfig(n=3, beta=6.0, noise_var=2e-3), gauss, seed=0)
    s = gauss.sample(np.random.default_rng(1), 200_000)
    cw, out = _pipeline(cfg, s, seed=2)
    rep = decompose_error(s, cw, decode(out, cfg), cfg)
    assert rep.samples == s.size
    assert rep.err_q.shape == (2,)
    assert np.all(rep.err_q > 0)
    assert abs(rep.mse_components - rep.mse_direct) <= 4 * rep.diff_stderr + 1e-15
    assert rep.ci_halfwidth > 0


def test_decomposition_scalar_input():
    cfg = SchemeConfig(n=2, beta=10.0, noise_var=0.0, sigma_e2=1 / 12)
    cw = modulate(encode(0.26, cfg), cfg)
    rep = decompose_error(0.26, cw, decode(cw.x, cfg), cfg)
    assert rep.samples == 1
    assert rep.mse_direct == pytest.approx(0.0, abs=1e-30)


def test_decomposition_empty():
    cfg = SchemeConfig(n=2, beta=10.0, sigma_e2=1 / 12)
    cw = encode(np.zeros(0), cfg)
    with pytest.raises(ValueError):
        decompose_error(np.zeros(0), cw, decode(np.zeros((0, 2)), cfg), cfg)


@settings(max_examples=25, deadline=None)
@given(cut=st.integers(1, 1999), seed=st.integers(0, 2**32))
def test_partition_independence(cut, seed):
    gauss = gaussian_source()
    cfg = SchemeConfig(n=3, beta=5.0, noise_var=1e-3, sigma_e2=0.08)
    s = gauss.sample(np.random.default_rng(seed), 2000)
    cw, out = _pipeline(cfg, s, seed=seed)
    dec = decode(out, cfg)
    whole = ErrorAccumulator(3, cfg.beta).add(s, cw, dec).report()

    def part(sl):
        from jscc.codec import Codeword
        from jscc.decoder import DecodeResult
        c = Codeword(levels=cw.levels[sl], e_final=cw.e_final[sl], beta=cw.beta)
        d = DecodeResult(levels_hat=dec.levels_hat[sl], e_hat=dec.e_hat[sl],
                         s_hat=dec.s_hat[sl], beta=dec.beta)
        return ErrorAccumulator(3, cfg.beta).add(s[sl], c, d)

    merged = part(slice(0, cut)).merge(part(slice(cut, None))).report()
    assert merged.samples == whole.samples
    for a, b in [(merged.mse_direct, whole.mse_direct), (merged.err_e, whole.err_e),
                 (merged.mse_components, whole.mse_components)]:
        assert abs(a - b) <= 1e-12 * max(abs(b), 1e-300)
    np.testing.assert_allclose(merged.err_q, whole.err_q, rtol=1e-12, atol=0)


def test_on_lattice_and_midpoint():
    cfg = SchemeConfig(n=2, beta=9.0, sigma_e2=1 / 12)
    g = cfg.q_gain
    assert ml_decode_q(g * 7 / cfg.beta, cfg) == pytest.approx(7 / cfg.beta)
    assert ml_decode_q(g * 7.5 / cfg.beta, cfg) == pytest.approx(8 / cfg.beta)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_noiseless_chain(n, gauss):
    cfg = SchemeConfig(n=n, beta=11.0, noise_var=0.0, sigma_e2=0.08)
    s = gauss.sample(np.random.default_rng(n), 10_000)
    cw = modulate(encode(s, cfg), cfg)
    for i in range(n - 1):
        np.testing.assert_array_equal(ml_decode_levels(cw.x[:, i], cfg), cw.levels[:, i])
    dec = decode(cw.x, cfg)
    assert np.max(np.abs(dec.s_hat - s)) <= 1e-9
    # the zero-noise coefficient inverts the residual scaling
    np.testing.assert_allclose(dec.e_hat, cw.e_final, rtol=0, atol=1e-14)
    rep = decompose_error(s, cw, dec, cfg)
    assert np.all(rep.err_q == 0)
    assert rep.err_e <= 1e-28 and rep.mse_direct <= 1e-18


def test_zero_in_zero_out(cfg):
    assert lmmse_decode_e(0.0, cfg) == 0.0
    assert decode(np.zeros(3), cfg).s_hat == 0.0


def test_decoded_lattice_and_recombination(cfg, gauss):
    s = gauss.sample(np.random.default_rng(5), 1000)
    _, out = _pipeline(cfg, s)
    dec = decode(out, cfg)
    np.testing.assert_allclose(dec.q_hat * cfg.beta, np.round(dec.q_hat * cfg.beta), atol=1e-9)
    w = cfg.beta ** -np.arange(cfg.n - 1.0)
    manual = dec.q_hat @ w + cfg.beta ** -(cfg.n - 1.0) * dec.e_hat
    np.testing.assert_allclose(dec.s_hat, manual, rtol=1e-14, atol=1e-16)


def test_decomposition_at_40db(gauss):
    snr = 1e4
    cfg = SchemeConfig.from_epsilon(2, snr, 0.3)
    cfg = with_sigma_e(cfg, gauss, seed=4)
    s = gauss.sample(np.random.default_rng(6), 1_000_000)
    cw, out = _pipeline(cfg, s, seed=7)
    rep = decompose_error(s, cw, decode(out, cfg), cfg)
    assert abs(rep.mse_components - rep.mse_direct) <= 4 * rep.diff_stderr


def test_single_sample_report():
    cfg = SchemeConfig(n=2, beta=10.0, noise_var=0.01, sigma_e2=1 / 12)
    cw = modulate(encode(np.array([0.26]), cfg), cfg)
    out = transmit(cw.x, cfg.noise_var, RngStream(1))
    dec = decode(out, cfg)
    rep = decompose_error(np.array([0.26]), cw, dec, cfg)
    assert rep.mse_direct == (0.26 - dec.s_hat[0]) ** 2
