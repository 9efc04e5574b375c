"""Memoryless AWGN channel, ``Y_i = X_i + Z_i`` with iid ``Z_i ~ N(0, sigma_Z^2)``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .rng import RngStream


@dataclass
class ChannelOutput:
    y: np.ndarray
    z: Optional[np.ndarray] = None


def transmit(x, noise_var: float, rng: Union[RngStream, np.random.Generator],
             keep_noise: bool = False) -> ChannelOutput:
    """Add white Gaussian noise of variance ``noise_var`` to every entry of ``x``.

    ``rng`` may be an :class:`RngStream` (a fresh generator is created from
    it) or a live ``numpy.random.Generator`` that is advanced in place.
    """
    if not noise_var >= 0:
        raise ValueError("noise variance must be non-negative")
    x = np.asarray(x, dtype=float)
    if noise_var == 0:
        z = np.zeros_like(x)
        return ChannelOutput(y=x.copy(), z=z if keep_noise else None)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    z = math.sqrt(noise_var) * gen.standard_normal(x.shape)
    return ChannelOutput(y=x + z, z=z if keep_noise else None)
