"""Recursive quantization encoder, its exact inverse and the channel-input mapping.

A source letter ``s`` is split into ``n - 1`` coarse values ``Q_i`` and a
final residual ``E_{n-1}`` in ``[-1/2, 1/2)``::

    E_0 = s
    Q_i = Int(beta * E_{i-1}) / beta
    E_i = beta * (E_{i-1} - Q_i)

Everything here is vectorized over the leading axis; scalars work too.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .config import ConfigError, SchemeConfig, SourceSpec
from .rng import RngStream


def int_round(x):
    """Return the unique integer ``i`` with ``x`` in ``[i - 1/2, i + 1/2)``.

    The fractional part ``x - floor(x)`` is exact in binary floating point,
    so the half-open cell rule is applied without rounding the sum ``x + 1/2``.

    >>> int_round(2.5), int_round(-3.5), int_round(0.49)
    (3, -3, 0)
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("int_round requires finite input")
    fl = np.floor(arr)
    out = fl + ((arr - fl) >= 0.5)
    if out.ndim == 0:
        return int(out)
    return out.astype(np.int64)


@dataclass
class Codeword:
    """Quantization chain and channel inputs for a batch of source letters.

    ``levels[..., i]`` holds the integer ``beta * Q_{i+1}``; ``q`` is the
    real-valued view. ``x`` stays ``None`` until :func:`modulate`.
    """

    levels: np.ndarray
    e_final: np.ndarray
    beta: float
    x: Optional[np.ndarray] = None

    @property
    def q(self) -> np.ndarray:
        return self.levels / self.beta

    def __len__(self):
        return len(self.e_final) if np.ndim(self.e_final) else 1


def encode(s, cfg: SchemeConfig) -> Codeword:
    """Run the quantization recursion on ``s`` (scalar or 1-d array)."""
    e = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(e)):
        raise ValueError("source samples must be finite")
    levels = np.empty(e.shape + (cfg.n - 1,), dtype=np.int64)
    beta = cfg.beta
    for i in range(cfg.n - 1):
        scaled = beta * e
        fl = np.floor(scaled)
        j = fl + ((scaled - fl) >= 0.5)
        levels[..., i] = j
        e = scaled - j
    return Codeword(levels=levels, e_final=e, beta=beta)


def reconstruct_exact(cw: Codeword, cfg: SchemeConfig):
    """Invert :func:`encode`: sum of beta^-(i-1) Q_i plus beta^-(n-1) E_{n-1}."""
    return _combine(cw.levels, cw.e_final, cfg.beta)


def _combine(levels, e_final, beta):
    # Horner from the finest level keeps the roundoff at a few ulp of |s|
    n1 = levels.shape[-1]
    # Q_{n-1} and E_{n-1} carry the same weight beta^-(n-1)
    acc = levels[..., n1 - 1] + np.asarray(e_final, dtype=float)
    for i in range(n1 - 2, -1, -1):
        acc = levels[..., i] + acc / beta
    out = acc / beta
    return float(out) if np.ndim(out) == 0 else out


def modulate(cw: Codeword, cfg: SchemeConfig) -> Codeword:
    """Fill the channel inputs ``x`` (last axis has length ``n``)."""
    if cfg.sigma_e2 is None or cfg.sigma_e2 <= 0:
        raise ConfigError("sigma_e2 must be set and positive before modulation")
    x = np.empty(np.shape(cw.e_final) + (cfg.n,), dtype=float)
    x[..., :-1] = cfg.q_gain * cw.q
    x[..., -1] = cfg.e_gain * cw.e_final
    return replace(cw, x=x)


def encoder_map(cfg: SchemeConfig):
    """Return the composite map ``s -> X(s)`` as a vectorized callable."""

    def X(s):
        return modulate(encode(s, cfg), cfg).x

    return X


def residual_variance(s, cfg: SchemeConfig, check_mean: bool = True) -> float:
    """Unbiased sample variance of ``E_{n-1}`` over the given source samples.

    A ``RuntimeWarning`` flags a sample mean further than three standard
    errors from zero, since the decoder treats the residual as zero-mean.
    """
    e = encode(s, cfg).e_final
    var = float(np.var(e, ddof=1))
    if check_mean and var > 0:
        se = math.sqrt(var / e.size)
        mean = float(np.mean(e))
        if abs(mean) > 3 * se:
            warnings.warn(
                f"residual mean {mean:.3g} exceeds 3 standard errors ({se:.3g}); "
                "zero-mean LMMSE model is off",
                RuntimeWarning,
                stacklevel=2,
            )
    return var


def estimate_sigma_e(cfg: SchemeConfig, src: SourceSpec, n_pilot: int = 100_000,
                     seed: int = 0, stream_id: int = 0) -> float:
    """Pilot Monte Carlo estimate of Var(E_{n-1}) for this source and ``beta``."""
    if n_pilot < 10_000:
        raise ValueError("n_pilot must be at least 10^4")
    rng = RngStream(seed, stream_id).generator()
    return residual_variance(src.sample(rng, n_pilot), cfg)


def with_sigma_e(cfg: SchemeConfig, src: SourceSpec, n_pilot: int = 100_000,
                 seed: int = 0, stream_id: int = 0) -> SchemeConfig:
    return cfg.with_(sigma_e2=estimate_sigma_e(cfg, src, n_pilot, seed, stream_id))


def cell_boundaries(cfg: SchemeConfig, lo: float, hi: float) -> np.ndarray:
    """Sorted points in ``(lo, hi)`` where some ``Q_i(s)`` jumps.

    Between consecutive boundaries every ``Q_i`` is constant and
    ``E_{n-1}`` is affine in ``s`` with slope ``beta**(n-1)``.
    """
    beta = cfg.beta
    # live cells [a, b) on which Q_1..Q_{i-1} are constant and
    # beta * E_{i-1}(s) = beta**i * (s - c)
    a = np.array([float(lo)])
    b = np.array([float(hi)])
    c = np.array([0.0])
    scale = 1.0
    found = []
    for _ in range(cfg.n - 1):
        scale *= beta
        x_a = scale * (a - c)
        x_b = scale * (b - c)

        # jumps of Q_i where the level input crosses m + 1/2
        first = np.ceil(x_a - 0.5)
        last = np.floor(x_b - 0.5)
        idx, m = _expand(first, np.maximum(last - first + 1, 0))
        bnd = c[idx] + (m + 0.5) / scale
        found.append(bnd[(bnd > a[idx]) & (bnd < b[idx])])

        # refine: one child cell per quantizer level j
        j_first = np.floor(x_a + 0.5)
        j_last = np.floor(x_b + 0.5)
        idx, j = _expand(j_first, j_last - j_first + 1)
        centers = c[idx] + j / scale
        ca = np.maximum(a[idx], centers - 0.5 / scale)
        cb = np.minimum(b[idx], centers + 0.5 / scale)
        live = cb > ca
        a, b, c = ca[live], cb[live], centers[live]
    return np.unique(np.concatenate(found))


def _expand(start, counts):
    """Parent index and consecutive integers ``start[p] + 0..counts[p]-1``."""
    counts = counts.astype(np.int64)
    idx = np.repeat(np.arange(start.size), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    return idx, start[idx] + offs
