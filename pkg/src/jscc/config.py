"""Source models and scheme parameters shared by the encoder, decoder and bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np


class ConfigError(ValueError):
    """Raised when scheme parameters violate their invariants."""


@dataclass(frozen=True)
class SourceSpec:
    """Continuous memoryless source.

    ``ziv_interval`` and ``p_min`` certify that the density stays above
    ``p_min`` on ``[A, B]``; the Ziv-type bounds need that certificate.
    """

    kind: str
    variance: float
    diff_entropy: float
    ziv_interval: tuple[float, float]
    p_min: float

    def __post_init__(self):
        a, b = self.ziv_interval
        if not b > a:
            raise ConfigError("ziv interval must satisfy B > A")
        if self.variance <= 0:
            raise ConfigError("source variance must be positive")
        if self.p_min <= 0:
            raise ConfigError("p_min must be positive")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def pdf(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "gaussian":
            return np.exp(-0.5 * s**2 / self.variance) / math.sqrt(2 * math.pi * self.variance)
        half = math.sqrt(3 * self.variance)
        return np.where(np.abs(s) <= half, 1.0 / (2 * half), 0.0)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            return self.std * rng.standard_normal(size)
        half = math.sqrt(3 * self.variance)
        return rng.uniform(-half, half, size)


def gaussian_source(variance: float = 1.0) -> SourceSpec:
    """Zero-mean Gaussian source certified on ``[-sigma, sigma]``."""
    sigma = math.sqrt(variance)
    return SourceSpec(
        kind="gaussian",
        variance=variance,
        diff_entropy=0.5 * math.log(2 * math.pi * math.e * variance),
        ziv_interval=(-sigma, sigma),
        p_min=math.exp(-0.5) / math.sqrt(2 * math.pi * variance),
    )


def uniform_source(variance: float = 1.0) -> SourceSpec:
    """Zero-mean uniform source; the certificate is the whole support."""
    half = math.sqrt(3 * variance)
    return SourceSpec(
        kind="uniform",
        variance=variance,
        diff_entropy=math.log(2 * half),
        ziv_interval=(-half, half),
        p_min=1.0 / (2 * half),
    )


SOURCES = {"gaussian": gaussian_source, "uniform": uniform_source}


def make_source(kind: str, variance: float = 1.0) -> SourceSpec:
    try:
        return SOURCES[kind](variance)
    except KeyError:
        raise ConfigError(f"unknown source kind {kind!r}") from None


def default_k(sigma_s2: float, delta: float) -> float:
    """Decay constant of the lattice-decoding error, exp(-k snr / beta^2)."""
    return 1.0 / (8.0 * (sigma_s2 + delta))


def beta_from_epsilon(snr: float, epsilon: float) -> float:
    return snr ** ((1.0 - epsilon) / 2.0)


@dataclass(frozen=True)
class SchemeConfig:
    """All parameters of the recursive-quantization scheme.

    ``beta`` is stored; ``snr`` and ``epsilon`` are derived so that
    ``beta**2 == snr**(1 - epsilon)`` holds by construction. Use
    :meth:`from_epsilon` to build a configuration from an exponent gap.

    ``sigma_e2`` is the variance of the final residual. It is left unset
    until estimated (see :func:`jscc.codec.estimate_sigma_e`).
    """

    n: int
    beta: float
    power: float = 1.0
    noise_var: float = 1e-4
    sigma_s2: float = 1.0
    delta: Optional[float] = None
    k: Optional[float] = None
    sigma_e2: Optional[float] = None

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise ConfigError("n must be ≥ 2")
        if not (self.beta > 1 and math.isfinite(self.beta)):
            raise ConfigError(f"beta must be a finite number > 1, got {self.beta!r}")
        if self.power <= 0:
            raise ConfigError("power must be positive")
        if self.noise_var < 0:
            raise ConfigError("noise variance must be non-negative")
        if self.sigma_s2 <= 0:
            raise ConfigError("source variance must be positive")
        # frozen dataclass: fill derived defaults in place
        if self.delta is None:
            object.__setattr__(self, "delta", 0.1 * self.sigma_s2)
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if self.k is None:
            object.__setattr__(self, "k", default_k(self.sigma_s2, self.delta))
        if self.k <= 0:
            raise ConfigError("k must be positive")
        if self.sigma_e2 is not None and not 0 < self.sigma_e2 <= 0.25:
            raise ConfigError("sigma_e2 must lie in (0, 1/4]")

    @classmethod
    def from_epsilon(cls, n: int, snr: float, epsilon: float, **kw) -> "SchemeConfig":
        """Configuration with ``beta**2 = snr**(1 - epsilon)`` and ``noise_var = power / snr``."""
        if snr <= 0:
            raise ConfigError("snr must be positive")
        if epsilon < 0:
            raise ConfigError("epsilon must be non-negative")
        power = kw.pop("power", 1.0)
        return cls(n=n, beta=beta_from_epsilon(snr, epsilon), power=power,
                   noise_var=power / snr, **kw)

    @property
    def snr(self) -> float:
        if self.noise_var == 0:
            return math.inf
        return self.power / self.noise_var

    @property
    def epsilon(self) -> float:
        """Exponent gap implied by ``beta`` at this snr; NaN when noiseless or snr <= 1."""
        snr = self.snr
        if not math.isfinite(snr) or snr <= 1:
            return math.nan
        return 1.0 - 2.0 * math.log(self.beta) / math.log(snr)

    @property
    def q_gain(self) -> float:
        """Amplitude scaling of the quantizer outputs, sqrt(P / (sigma_S^2 + delta))."""
        return math.sqrt(self.power / (self.sigma_s2 + self.delta))

    @property
    def e_gain(self) -> float:
        """Amplitude scaling of the final residual, sqrt(P / sigma_E^2)."""
        if self.sigma_e2 is None or self.sigma_e2 <= 0:
            raise ConfigError("sigma_e2 is not set; estimate it first")
        return math.sqrt(self.power / self.sigma_e2)

    def with_(self, **changes) -> "SchemeConfig":
        return replace(self, **changes)
