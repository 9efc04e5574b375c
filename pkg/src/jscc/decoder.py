"""Suboptimal receiver: per-use minimum-distance decoding of the quantizer
levels, LMMSE estimation of the final residual, linear recombination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import ChannelOutput
from .codec import Codeword, _combine
from .config import ConfigError, SchemeConfig


@dataclass
class DecodeResult:
    levels_hat: np.ndarray
    e_hat: np.ndarray
    s_hat: np.ndarray
    beta: float

    @property
    def q_hat(self) -> np.ndarray:
        return self.levels_hat / self.beta


def ml_decode_levels(y, cfg: SchemeConfig):
    """Nearest lattice index j for ``y = q_gain * j / beta + noise``.

    Ties at cell midpoints go to the upper point, like the encoder's Int.
    """
    x = cfg.beta * np.asarray(y, dtype=float) / cfg.q_gain
    fl = np.floor(x)
    j = fl + ((x - fl) >= 0.5)
    return j.astype(np.int64) if j.ndim else int(j)


def ml_decode_q(y, cfg: SchemeConfig):
    """Minimum-distance estimate of ``Q_i`` from one channel output."""
    return ml_decode_levels(y, cfg) / cfg.beta


def lmmse_coefficient(cfg: SchemeConfig) -> float:
    """E[E Y_n] / E[Y_n^2] under the zero-mean model: sqrt(P sigma_E^2) / (P + sigma_Z^2)."""
    if cfg.sigma_e2 is None or cfg.sigma_e2 <= 0:
        raise ConfigError("sigma_e2 must be set and positive")
    return math.sqrt(cfg.power * cfg.sigma_e2) / (cfg.power + cfg.noise_var)


def empirical_lmmse_coefficient(e, y_n) -> float:
    """Same ratio of moments, estimated from paired training samples."""
    e = np.asarray(e, dtype=float)
    y_n = np.asarray(y_n, dtype=float)
    return float(np.dot(e, y_n) / np.dot(y_n, y_n))


def lmmse_decode_e(y_n, cfg: SchemeConfig, coef: Optional[float] = None):
    if coef is None:
        coef = lmmse_coefficient(cfg)
    out = coef * np.asarray(y_n, dtype=float)
    return float(out) if out.ndim == 0 else out


def decode(y, cfg: SchemeConfig, coef: Optional[float] = None,
           clamp: bool = False) -> DecodeResult:
    """Decode channel outputs (last axis of length ``n``) into source estimates.

    ``coef`` overrides the model LMMSE coefficient. ``clamp`` restricts the
    residual estimate to [-1/2, 1/2]; it is off by default because the
    analysed estimator is linear.
    """
    if isinstance(y, ChannelOutput):
        y = y.y
    y = np.asarray(y, dtype=float)
    if y.shape[-1:] != (cfg.n,):
        raise ValueError(f"expected {cfg.n} channel outputs per letter, got shape {y.shape}")
    levels = ml_decode_levels(y[..., :-1], cfg)
    levels = np.asarray(levels, dtype=np.int64)
    e_hat = np.asarray(lmmse_decode_e(y[..., -1], cfg, coef))
    if clamp:
        e_hat = np.clip(e_hat, -0.5, 0.5)
    return DecodeResult(levels_hat=levels, e_hat=e_hat,
                        s_hat=np.asarray(_combine(levels, e_hat, cfg.beta)), beta=cfg.beta)


@dataclass
class ErrorReport:
    """Sample averages of the per-component errors and the total MSE.

    ``diff_stderr`` is the standard error of the per-sample difference
    between the componentwise and direct squared errors (the cross terms).
    """

    err_q: np.ndarray
    err_e: float
    mse_components: float
    mse_direct: float
    ci_halfwidth: float
    samples: int
    diff_stderr: float = 0.0


class ErrorAccumulator:
    """Streaming sums for :class:`ErrorReport`.

    Partial sums are kept exactly (``math.fsum`` partials are re-summed on
    merge), so splitting a batch across workers changes the result by at
    most an ulp or two.
    """

    Z95 = 1.959963984540054

    def __init__(self, n: int, beta: float):
        self.n = n
        self.beta = beta
        self.count = 0
        self._sq = [[] for _ in range(n - 1)]
        self._e = []
        self._d = []
        self._d2 = []
        self._diff = []
        self._diff2 = []

    def add(self, s, cw: Codeword, dec: DecodeResult) -> "ErrorAccumulator":
        s = np.asarray(s, dtype=float)
        dq = (cw.levels - dec.levels_hat) / self.beta
        de = cw.e_final - dec.e_hat
        sq_direct = (s - dec.s_hat) ** 2
        weights = self.beta ** (-2.0 * np.arange(self.n - 1))
        comp = (dq**2) @ weights + self.beta ** (-2.0 * (self.n - 1)) * de**2
        diff = comp - sq_direct
        for i in range(self.n - 1):
            self._sq[i].append(math.fsum(dq[:, i] ** 2))
        self._e.append(math.fsum(de**2))
        self._d.append(math.fsum(sq_direct))
        self._d2.append(math.fsum(sq_direct**2))
        self._diff.append(math.fsum(diff))
        self._diff2.append(math.fsum(diff**2))
        self.count += s.size
        return self

    def merge(self, other: "ErrorAccumulator") -> "ErrorAccumulator":
        for i in range(self.n - 1):
            self._sq[i] += other._sq[i]
        for name in ("_e", "_d", "_d2", "_diff", "_diff2"):
            getattr(self, name).extend(getattr(other, name))
        self.count += other.count
        return self

    def report(self) -> ErrorReport:
        if self.count == 0:
            raise ValueError("cannot report on an empty batch")
        N = self.count
        err_q = np.array([math.fsum(v) / N for v in self._sq])
        err_e = math.fsum(self._e) / N
        weights = self.beta ** (-2.0 * np.arange(self.n - 1))
        comp = math.fsum(list(err_q * weights) + [self.beta ** (-2.0 * (self.n - 1)) * err_e])
        mse = math.fsum(self._d) / N
        ci = self.Z95 * _stderr(math.fsum(self._d2) / N, mse, N)
        dmean = math.fsum(self._diff) / N
        dse = _stderr(math.fsum(self._diff2) / N, dmean, N)
        return ErrorReport(err_q=err_q, err_e=err_e, mse_components=comp,
                           mse_direct=mse, ci_halfwidth=ci, samples=N, diff_stderr=dse)


def _stderr(mean_sq: float, mean: float, N: int) -> float:
    if N < 2:
        return 0.0
    var = max(mean_sq - mean * mean, 0.0) * N / (N - 1)
    return math.sqrt(var / N)


def decompose_error(s, cw: Codeword, dec: DecodeResult, cfg: SchemeConfig) -> ErrorReport:
    """Componentwise error decomposition of one batch (all items share ``cfg``)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.size == 0:
        raise ValueError("empty batch")
    if np.ndim(cw.e_final) == 0:
        cw = Codeword(levels=cw.levels[None, :], e_final=np.atleast_1d(cw.e_final), beta=cw.beta)
        dec = DecodeResult(levels_hat=np.atleast_2d(dec.levels_hat),
                           e_hat=np.atleast_1d(dec.e_hat), s_hat=np.atleast_1d(dec.s_hat),
                           beta=dec.beta)
    return ErrorAccumulator(cfg.n, cfg.beta).add(s, cw, dec).report()
