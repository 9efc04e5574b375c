"""Distortion lower bounds and the resolution schedules.

Conventions: all logarithms are natural. ``k`` in :func:`achievability_eps`
is the decay constant of the lattice-decoding error, ``exp(-k snr^eps)``;
``k`` in :func:`solve_eps_star` and :func:`lemma5_asymptotic` is the
constant of the tail form ``exp(-snr^eps / k)``. For the scheme's
minimum-distance decoder the two are reciprocal (see :func:`tail_k`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import erfc, log_ndtr

from .config import SchemeConfig, SourceSpec
from .codec import cell_boundaries, encoder_map


def gaussian_q(x):
    """Upper tail of the standard normal, Q(x) = P[N(0,1) > x].

    Beyond x ~ 37.5 the value is subnormal, so the relative accuracy is
    limited by the float format itself; ``log_ndtr`` supplies the nearest
    representable value where ``erfc`` underflows to zero.
    """
    x = np.asarray(x, dtype=float)
    out = 0.5 * erfc(x / math.sqrt(2.0))
    tiny = (out == 0) & np.isfinite(x)
    if np.any(tiny):
        out = np.where(tiny, np.exp(log_ndtr(-np.where(tiny, x, 0.0))), out)
    return float(out) if np.ndim(out) == 0 else out


def lambert_w(x, tol: float = 1e-15, max_iter: int = 50):
    """Principal branch of the Lambert W function for ``x > 0``.

    Halley iteration on ``w e^w - x`` started from ``log(1 + x)``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)) or not np.all(np.isfinite(xa)):
        raise ValueError("lambert_w is only defined here for finite x > 0")
    w = np.log1p(xa)
    for _ in range(max_iter):
        ew = np.exp(w)
        f = w * ew - xa
        wp1 = w + 1.0
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w = w - step
        if np.all(np.abs(step) <= tol * np.maximum(np.abs(w), 1e-300)):
            break
    return float(w) if w.ndim == 0 else w


def opta_bound(snr, n: int, src: SourceSpec):
    """Distortion implied by R(D) <= n C(P) with the entropy-power bound on R(D)."""
    c = math.exp(2.0 * src.diff_entropy) / (2.0 * math.pi * math.e)
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ValueError("snr must be non-negative")
    out = c * (1.0 + snr) ** (-float(n))
    return float(out) if out.ndim == 0 else out


def theorem_curve(snr, n: int):
    """Reference scaling snr^-n (ln snr)^(n-1), unit constant."""
    snr = np.asarray(snr, dtype=float)
    if np.any(snr <= 1):
        raise ValueError("snr must exceed 1")
    out = snr ** (-float(n)) * np.log(snr) ** (n - 1)
    return float(out) if out.ndim == 0 else out


def tail_k(sigma_s2: float, delta: float) -> float:
    """Constant of exp(-snr^eps / k) for lattice spacing sqrt(P/(sigma_S^2+delta))/beta."""
    return 8.0 * (sigma_s2 + delta)


def achievability_eps(snr: float, n: int, k: float) -> float:
    """Resolution schedule eps = ln((n/k) ln snr) / ln snr; gives snr^eps = (n/k) ln snr."""
    if not snr > math.e:
        raise ValueError("snr must exceed e")
    if k <= 0:
        raise ValueError("k must be positive")
    ls = math.log(snr)
    return math.log((n / k) * ls) / ls


@dataclass
class EpsSolution:
    """Balance point of the two lower-bound exponents at one snr."""

    snr: float
    n: int
    k: float
    eps_star: float
    a: float
    b: float
    xi: float
    l1: float
    l2: float
    w_arg: float
    snr_eps: float
    residual: float = field(init=False)

    def __post_init__(self):
        self.residual = abs(self.l1 - self.l2) / max(self.l1, self.l2)


def solve_eps_star(snr: float, n: int, k: float) -> EpsSolution:
    """Solve l1(eps) = l2(eps) in closed form through the Lambert W function.

    ``l1 = snr^(-n + (n-1) eps)`` and ``l2 = snr^(-1 + eps/2) exp(-snr^eps / k)``.
    """
    if not snr > 1:
        raise ValueError("snr must exceed 1")
    if n < 2:
        raise ValueError("n must be ≥ 2")
    if k <= 0:
        raise ValueError("k must be positive")
    a = -(n - 1.0)
    b = n - 1.5
    ls = math.log(snr)
    w_arg = math.exp((-a / b) * ls - math.log(b * k))
    snr_eps = b * k * lambert_w(w_arg)
    eps = math.log(snr_eps) / ls
    # evaluate at eps itself, so the residual measures the balance
    log_l1 = (-n + (n - 1) * eps) * ls
    log_l2 = (-1 + eps / 2) * ls - math.exp(eps * ls) / k
    return EpsSolution(
        snr=snr, n=n, k=k, eps_star=eps, a=a, b=b,
        xi=math.log(k / 2) / ls,
        l1=math.exp(log_l1), l2=math.exp(log_l2),
        w_arg=w_arg, snr_eps=snr_eps,
    )


def lemma4_delta(snr: float, n: int, beta: float) -> float:
    """Source distance at which the residual channel use has unit-SNR separation."""
    return 1.0 / (math.sqrt(snr) * beta ** (n - 1))


def lemma4_bound(snr: float, n: int, eps: float, src: SourceSpec,
                 sigma_e2: float, measure: Optional[float] = None) -> Optional[float]:
    """Explicit residual-resolution lower bound; ``None`` while not yet valid.

    (p_min/4) snr^(-n+(n-1)eps) Q(1/(2 sigma_E)) (B-A-Delta)(1 - beta^(n-1) Delta)
    with Delta = 1/(sqrt(snr) beta^(n-1)) and beta^2 = snr^(1-eps).

    The last two factors count whole cells and ignore the partial cells at
    the ends of [A, B]; at small beta that can overstate the restricted set
    by a fraction of a percent. Pass ``measure=restricted_measure(...)`` for
    the exact length, which makes the inequality rigorous at finite snr.
    """
    A, B = src.ziv_interval
    if not (math.isfinite(snr) and snr > 0):
        return None
    beta = snr ** ((1.0 - eps) / 2.0)
    delta = lemma4_delta(snr, n, beta)
    if measure is None:
        measure = (B - A - delta) * (1.0 - beta ** (n - 1) * delta)
    if not (B - A - delta > 0 and measure > 0):
        return None
    return (src.p_min / 4.0 * snr ** (-n + (n - 1) * eps)
            * gaussian_q(1.0 / (2.0 * math.sqrt(sigma_e2))) * measure)


def restricted_measure(cfg: SchemeConfig, src: SourceSpec, delta: float) -> float:
    """Length of {s in [A, B - delta): s and s + delta share every Q_i}."""
    A, B = src.ziv_interval
    hi = B - delta
    bp = cell_boundaries(cfg, A, B)
    # s is excluded when a jump lies in (s, s + delta]
    lo_ex = np.clip(bp - delta, A, hi)
    hi_ex = np.clip(bp, A, hi)
    covered = 0.0
    end = A
    for a, b in zip(lo_ex, hi_ex):
        if b <= end:
            continue
        covered += b - max(a, end)
        end = b
    return (hi - A) - covered


def lemma5_bound(snr: float, n: int, eps: float, src: SourceSpec, delta: float,
                 sigma_s2: float) -> Optional[float]:
    """Explicit coarse-lattice lower bound; ``None`` unless 1/beta < B - A.

    (p_min/4) beta^-2 Q(sqrt(snr/(sigma_S^2+delta)) / (2 beta)) (B - A - 1/beta).
    ``n`` does not enter: only the first channel use separates s and s + 1/beta.
    """
    A, B = src.ziv_interval
    if not (math.isfinite(snr) and snr > 0):
        return None
    beta = snr ** ((1.0 - eps) / 2.0)
    if not 1.0 / beta < B - A:
        return None
    arg = math.sqrt(snr / (sigma_s2 + delta)) / (2.0 * beta)
    return src.p_min / 4.0 / beta**2 * gaussian_q(arg) * (B - A - 1.0 / beta)


def lemma5_asymptotic(snr: float, eps: float, src: SourceSpec, delta: float,
                      sigma_s2: float) -> float:
    """Tail-equivalent form c snr^(-1+eps/2) exp(-snr^eps / k5), k5 = 8 (sigma_S^2 + delta)."""
    A, B = src.ziv_interval
    c = src.p_min / 2.0 * math.sqrt((sigma_s2 + delta) / (2.0 * math.pi)) * (B - A)
    k5 = tail_k(sigma_s2, delta)
    return c * snr ** (-1.0 + eps / 2.0) * math.exp(-snr**eps / k5)


# Gauss-Legendre nodes on [0, 1]
_GL_ORDER = 4
_gl_x, _gl_w = np.polynomial.legendre.leggauss(_GL_ORDER)
_GL_NODES = 0.5 * (_gl_x + 1.0)
_GL_WEIGHTS = 0.5 * _gl_w


def _composite_gl(f, edges: np.ndarray, chunk: int = 1 << 18) -> float:
    """Sum of Gauss-Legendre rules over consecutive panels given by ``edges``."""
    total = []
    for start in range(0, edges.size - 1, chunk):
        lo = edges[start:start + chunk]
        hi = edges[start + 1:start + chunk + 1]
        lo = lo[: hi.size]
        width = hi - lo
        s = lo[:, None] + width[:, None] * _GL_NODES[None, :]
        vals = f(s.ravel()).reshape(s.shape)
        total.append(math.fsum((vals @ _GL_WEIGHTS) * width))
    return math.fsum(total)


def _refine(edges: np.ndarray) -> np.ndarray:
    mids = 0.5 * (edges[:-1] + edges[1:])
    out = np.empty(edges.size + mids.size)
    out[0::2] = edges
    out[1::2] = mids
    return out


def ziv_bound_numeric(src: SourceSpec, encoder: Callable, delta: float, sigma_z: float,
                      quad_points: int = 256, breakpoints: Optional[Sequence[float]] = None,
                      rtol: float = 1e-8, max_refine: int = 12) -> float:
    """Ziv lower bound p_min (Delta/2)^2 int_A^{B-Delta} Q(d(s,Delta) / (2 sigma_Z)) ds.

    ``encoder`` maps a 1-d array of source values to an array of shape
    ``(len(s), n)``. ``breakpoints`` are the encoder's discontinuities;
    panels are split at them and at their shifts by ``-delta`` so that the
    integrand is smooth on every panel. Panels are halved until two
    successive estimates agree to ``rtol``.
    """
    A, B = src.ziv_interval
    if not 0 <= delta < B - A:
        raise ValueError(f"delta must lie in [0, B - A), got {delta!r}")
    if sigma_z < 0:
        raise ValueError("sigma_z must be non-negative")
    if delta == 0:
        return 0.0
    hi = B - delta

    def integrand(s):
        d = np.linalg.norm(encoder(s) - encoder(s + delta), axis=-1)
        if sigma_z == 0:
            return np.where(d == 0, 0.5, 0.0)
        return gaussian_q(d / (2.0 * sigma_z))

    edges = np.linspace(A, hi, quad_points + 1)
    if breakpoints is not None:
        bp = np.asarray(breakpoints, dtype=float)
        bp = np.concatenate([bp, bp - delta])
        bp = bp[(bp > A) & (bp < hi)]
        edges = np.unique(np.concatenate([edges, bp]))

    prev = _composite_gl(integrand, edges)
    for _ in range(max_refine):
        edges = _refine(edges)
        cur = _composite_gl(integrand, edges)
        if abs(cur - prev) <= rtol * abs(cur) or cur == prev:
            prev = cur
            break
        prev = cur
    return src.p_min * (delta / 2.0) ** 2 * prev


def scheme_ziv_bound(cfg: SchemeConfig, src: SourceSpec, delta: float,
                     quad_points: int = 256, rtol: float = 1e-8) -> float:
    """:func:`ziv_bound_numeric` for the scheme's own encoder, with cell-aligned panels."""
    A, B = src.ziv_interval
    bp = cell_boundaries(cfg, A, B)
    return ziv_bound_numeric(src, encoder_map(cfg), delta, math.sqrt(cfg.noise_var),
                             quad_points=quad_points, breakpoints=bp, rtol=rtol)


def ziv_deltas(cfg: SchemeConfig) -> dict:
    """The two source separations used by the explicit bounds."""
    return {"lemma4": lemma4_delta(cfg.snr, cfg.n, cfg.beta), "lemma5": 1.0 / cfg.beta}


def best_ziv_bound(cfg: SchemeConfig, src: SourceSpec, quad_points: int = 256) -> Optional[float]:
    """Largest scheme Ziv bound over the two analysed separations; ``None`` if neither applies."""
    A, B = src.ziv_interval
    if not math.isfinite(cfg.snr):
        return None
    vals = [scheme_ziv_bound(cfg, src, d, quad_points)
            for d in ziv_deltas(cfg).values() if 0 < d < B - A]
    return max(vals) if vals else None


def ziv_delta_search(cfg: SchemeConfig, src: SourceSpec, deltas: Sequence[float],
                     quad_points: int = 256) -> tuple[float, float]:
    """Grid search over Delta; returns (best Delta, bound). No optimality claim."""
    best = (math.nan, -math.inf)
    for d in deltas:
        v = scheme_ziv_bound(cfg, src, d, quad_points)
        if v > best[1]:
            best = (d, v)
    return best


@dataclass
class BoundCurve:
    name: str
    points: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        snrs = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(snrs, snrs[1:])):
            raise ValueError("snr values must be strictly increasing")
        if any(not v > 0 for _, v in self.points if v is not None):
            raise ValueError("bound values must be positive")
