"""Monte Carlo harness: SNR sweeps, scaling fits and bound comparisons."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import rng as streams
from .bounds import (achievability_eps, best_ziv_bound, gaussian_q, lemma4_bound,
                     lemma5_bound, opta_bound, solve_eps_star, theorem_curve)
from .channel import transmit
from .codec import encode, encoder_map, modulate, residual_variance
from .config import SchemeConfig, SourceSpec, gaussian_source
from .decoder import ErrorAccumulator, decode
from .rng import RngStream, float_key

BATCH = 1 << 17
POLICIES = ("fixed", "achievability", "optimal")


@dataclass
class SweepRow:
    snr_db: float
    snr: float
    n: int
    eps: float
    beta: float
    samples: int
    mse: float
    ci_halfwidth: float
    err_q: list
    err_e: float
    opta: Optional[float]
    lemma4: Optional[float]
    lemma5: Optional[float]
    ziv: Optional[float]
    theorem_ref: Optional[float]
    sigma_e2: float = math.nan
    mse_components: float = math.nan
    diff_stderr: float = 0.0

    def bounds(self) -> dict:
        return {"opta": self.opta, "lemma4": self.lemma4, "lemma5": self.lemma5, "ziv": self.ziv}

    def violations(self, sigmas: float = 4.0) -> list:
        """Names of lower bounds exceeding ``mse + sigmas * ci`` (``sigmas`` in CI half-widths)."""
        ceiling = self.mse + sigmas * self.ci_halfwidth
        return [k for k, v in self.bounds().items() if v is not None and v > ceiling]


@dataclass
class ScalingFit:
    slope: float
    intercept: float
    r2: float
    window: tuple
    mode: str
    points: int = 0


def _point_key(cfg: SchemeConfig) -> tuple:
    # streams depend on the point itself, not its position in a grid
    return (cfg.n, float_key(cfg.noise_var), float_key(cfg.beta), float_key(cfg.power))


def _stream(seed: int, purpose: int, cfg: SchemeConfig, *extra: int) -> RngStream:
    return RngStream(seed, purpose, _point_key(cfg) + tuple(extra))


def _run_batch(cfg: SchemeConfig, src: SourceSpec, size: int, seed: int, b: int):
    gen_s = _stream(seed, streams.SOURCE, cfg, b).generator()
    gen_z = _stream(seed, streams.NOISE, cfg, b).generator()
    s = src.sample(gen_s, size)
    cw = modulate(encode(s, cfg), cfg)
    out = transmit(cw.x, cfg.noise_var, gen_z)
    dec = decode(out.y, cfg)
    return ErrorAccumulator(cfg.n, cfg.beta).add(s, cw, dec)


def _resolve_workers(workers: Optional[int]) -> int:
    return max(1, workers if workers is not None else (os.cpu_count() or 1))


def pilot_sigma_e(cfg: SchemeConfig, src: SourceSpec, seed: int, n_pilot: int = 100_000) -> SchemeConfig:
    """Attach a pilot estimate of Var(E_{n-1}) drawn from the point's own stream."""
    if n_pilot < 10_000:
        raise ValueError("n_pilot must be at least 10^4")
    gen = _stream(seed, streams.PILOT, cfg).generator()
    return cfg.with_(sigma_e2=residual_variance(src.sample(gen, n_pilot), cfg))


def run_point(cfg: SchemeConfig, src: Optional[SourceSpec] = None, samples: int = 1_000_000,
              seed: int = 0, workers: Optional[int] = 1, n_pilot: int = 100_000,
              with_ziv: bool = True, batch: int = BATCH) -> SweepRow:
    """Simulate one operating point end to end and attach every bound column.

    Batches of ``batch`` letters use their own streams, so the result does
    not depend on ``workers``.
    """
    if samples < 1000:
        raise ValueError("samples must be at least 10^3")
    src = src or gaussian_source(cfg.sigma_s2)
    if cfg.sigma_e2 is None:
        cfg = pilot_sigma_e(cfg, src, seed, n_pilot)

    sizes = [min(batch, samples - i) for i in range(0, samples, batch)]
    nw = min(_resolve_workers(workers), len(sizes))
    if nw == 1:
        accs = [_run_batch(cfg, src, sz, seed, b) for b, sz in enumerate(sizes)]
    else:
        with ProcessPoolExecutor(nw) as pool:
            accs = list(pool.map(_run_batch, [cfg] * len(sizes), [src] * len(sizes),
                                 sizes, [seed] * len(sizes), range(len(sizes))))
    acc = accs[0]
    for other in accs[1:]:
        acc.merge(other)
    rep = acc.report()

    snr, eps = cfg.snr, cfg.epsilon
    finite = math.isfinite(snr)
    return SweepRow(
        snr_db=10 * math.log10(snr) if finite else math.inf,
        snr=snr, n=cfg.n, eps=eps, beta=cfg.beta, samples=rep.samples,
        mse=rep.mse_direct, ci_halfwidth=rep.ci_halfwidth,
        err_q=[float(v) for v in rep.err_q], err_e=rep.err_e,
        opta=opta_bound(snr, cfg.n, src) if finite else None,
        lemma4=lemma4_bound(snr, cfg.n, eps, src, cfg.sigma_e2) if finite else None,
        lemma5=lemma5_bound(snr, cfg.n, eps, src, cfg.delta, cfg.sigma_s2) if finite else None,
        ziv=best_ziv_bound(cfg, src) if (with_ziv and finite) else None,
        theorem_ref=theorem_curve(snr, cfg.n) if finite and snr > 1 else None,
        sigma_e2=cfg.sigma_e2, mse_components=rep.mse_components, diff_stderr=rep.diff_stderr,
    )


def policy_eps(policy: str, snr: float, n: int, cfg: SchemeConfig,
               eps: Optional[float] = None) -> float:
    """Exponent gap chosen by ``policy`` at one snr.

    ``achievability`` uses the decay constant ``cfg.k``; ``optimal`` balances
    the two lower bounds with the tail constant 1/k of the same decoder and
    is clipped at zero.
    """
    if policy == "fixed":
        if eps is None:
            raise ValueError("fixed policy needs eps")
        return float(eps)
    if policy == "achievability":
        return achievability_eps(snr, n, cfg.k)
    if policy == "optimal":
        return max(0.0, solve_eps_star(snr, n, 1.0 / cfg.k).eps_star)
    raise ValueError(f"unknown eps policy {policy!r}; choose from {POLICIES}")


def point_config(base: SchemeConfig, snr: float, eps: float) -> SchemeConfig:
    return SchemeConfig.from_epsilon(base.n, snr, eps, power=base.power,
                                     sigma_s2=base.sigma_s2, delta=base.delta, k=base.k)


def _sweep_point(args):
    base, db, policy, eps, src, samples, seed, n_pilot, with_ziv = args
    snr = 10.0 ** (db / 10.0)
    cfg = point_config(base, snr, policy_eps(policy, snr, base.n, base, eps))
    row = run_point(cfg, src, samples, seed, workers=1, n_pilot=n_pilot, with_ziv=with_ziv)
    row.snr_db = float(db)
    return row


def sweep(base: SchemeConfig, snr_db: Sequence[float], policy: str = "achievability",
          samples: int = 1_000_000, seed: int = 0, eps: Optional[float] = None,
          src: Optional[SourceSpec] = None, workers: Optional[int] = 1,
          n_pilot: int = 100_000, with_ziv: bool = True) -> list:
    """One :func:`run_point` per grid entry, ``eps`` chosen by ``policy``.

    ``base`` supplies n, power, source variance, delta and k; its beta and
    noise level are ignored. sigma_E^2 is re-estimated at every point.
    """
    grid = [float(v) for v in snr_db]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("snr grid must be strictly increasing")
    if policy not in POLICIES:
        raise ValueError(f"unknown eps policy {policy!r}; choose from {POLICIES}")
    src = src or gaussian_source(base.sigma_s2)
    jobs = [(base, db, policy, eps, src, samples, seed, n_pilot, with_ziv) for db in grid]
    nw = min(_resolve_workers(workers), max(len(jobs), 1))
    if nw <= 1:
        return [_sweep_point(j) for j in jobs]
    with ProcessPoolExecutor(nw) as pool:
        return list(pool.map(_sweep_point, jobs))


def db_grid(lo: float, hi: float, step: float) -> list:
    """Inclusive grid lo, lo+step, ..., hi (endpoint kept when it lands within 1e-9)."""
    if step <= 0:
        raise ValueError("step must be positive")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(max(count, 0))]


def fit_scaling(rows: Sequence[SweepRow], window: Optional[tuple] = None,
                mode: str = "raw-loglog") -> ScalingFit:
    """Least-squares slope of ln(mse) against ln(snr) or ln(theorem curve).

    ``vs-theorem-curve`` regresses on ln(snr^-n (ln snr)^(n-1)); a slope of
    one means the measured MSE follows that law.
    """
    if window is None:
        window = (min(r.snr_db for r in rows), max(r.snr_db for r in rows)) if rows else (0, 0)
    lo, hi = window
    sel = [r for r in rows if lo - 1e-9 <= r.snr_db <= hi + 1e-9]
    if len(sel) < 4:
        raise ValueError(f"need at least 4 rows in window {window}, got {len(sel)}")
    y = np.log([r.mse for r in sel])
    if mode == "raw-loglog":
        x = np.log([r.snr for r in sel])
    elif mode == "vs-theorem-curve":
        x = np.log([theorem_curve(r.snr, r.n) for r in sel])
    else:
        raise ValueError(f"unknown fit mode {mode!r}")
    res = stats.linregress(x, y)
    return ScalingFit(slope=float(res.slope), intercept=float(res.intercept),
                      r2=float(min(1.0, res.rvalue**2)), window=(lo, hi), mode=mode,
                      points=len(sel))


def fit_lattice_decay(rows: Sequence[SweepRow], level: int = 1) -> ScalingFit:
    """Regress ln(Err_Q,level) on snr^eps; the negated slope estimates k."""
    sel = [r for r in rows if r.err_q[level - 1] > 0]
    if len(sel) < 4:
        raise ValueError("need at least 4 rows with nonzero lattice error")
    x = np.array([r.snr ** r.eps for r in sel])
    y = np.log([r.err_q[level - 1] for r in sel])
    res = stats.linregress(x, y)
    return ScalingFit(slope=float(res.slope), intercept=float(res.intercept),
                      r2=float(res.rvalue**2), window=(sel[0].snr_db, sel[-1].snr_db),
                      mode="lattice-decay", points=len(sel))


@dataclass
class BinaryCheck:
    empirical: float
    predicted: float
    trials: int
    distance: float

    @property
    def stderr(self) -> float:
        p = self.predicted
        return math.sqrt(max(p * (1 - p), 0.0) / self.trials)

    def within(self, sigmas: float = 3.0) -> bool:
        return abs(self.empirical - self.predicted) <= sigmas * self.stderr


def binary_signaling_check(s: float, delta: float, cfg: SchemeConfig, trials: int = 100_000,
                           seed: int = 0, src: Optional[SourceSpec] = None) -> BinaryCheck:
    """Send X(s) or X(s + delta) with equal probability; detect by minimum distance.

    The predicted error rate of that detector is Q(d / (2 sigma_Z)) with
    d = |X(s) - X(s + delta)|. Exact ties go to the first hypothesis.
    """
    if trials < 10_000:
        raise ValueError("trials must be at least 10^4")
    src = src or gaussian_source(cfg.sigma_s2)
    if src.kind == "uniform":
        half = math.sqrt(3 * src.variance)
        if not (-half <= s and s + delta <= half):
            raise ValueError("s and s + delta must lie in the source support")
    if cfg.sigma_e2 is None:
        cfg = pilot_sigma_e(cfg, src, seed)
    X = encoder_map(cfg)
    x0, x1 = X(np.array([s, s + delta]))
    d = float(np.linalg.norm(x0 - x1))
    gen = RngStream(seed, streams.BINARY, _point_key(cfg)).generator()
    bits = gen.integers(0, 2, trials)
    sent = np.where(bits[:, None] == 1, x1, x0)
    y = transmit(sent, cfg.noise_var, gen).y
    d0 = np.sum((y - x0) ** 2, axis=1)
    d1 = np.sum((y - x1) ** 2, axis=1)
    decided = (d1 < d0).astype(int)
    if cfg.noise_var == 0:
        predicted = 0.5 if d == 0 else 0.0
    else:
        predicted = gaussian_q(d / (2 * math.sqrt(cfg.noise_var)))
    return BinaryCheck(empirical=float(np.mean(decided != bits)), predicted=predicted,
                       trials=trials, distance=d)


def row_dict(row: SweepRow) -> dict:
    return asdict(row)
