"""Seeded path generation and statistical verification of the maximum laws.

Determinism contract: path ``i`` under ``base_seed`` draws from the
counter-based stream keyed by ``(base_seed, i)``; increments are drawn in
fixed-size chunks so that early-stopped simulations consume a prefix of the
same stream.  Reports are therefore bit-identical across runs and across
worker counts, and a path regenerated in full matches the per-path
statistics kernels exactly.

Censoring policy: an infinite-horizon maximum is approximated by the
horizon maximum; the probability that the post-horizon tail still moves the
maximum equals, conditionally, ``min(N_T / Nbar_T, 1)`` for a non-negative
martingale.  Its empirical mean is the reported ``censored_fraction`` and
horizons are doubled until it drops below the budget.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError
from .measures import AtomicMeasure
from .paths import Path

CHUNK = 4096

GEN_KINDS = ("brownian", "exp_martingale", "bm_stopped_at_zero", "exit_interval")


@dataclass(frozen=True)
class GenSpec:
    """Parameters of a seeded path generator."""

    kind: str
    dt: float
    horizon: float
    volatility: float = 1.0
    start: float = 1.0
    base_seed: int = 0
    barrier: float | None = None

    def __post_init__(self):
        if self.kind not in GEN_KINDS:
            raise ValidationError(f"unknown generator kind {self.kind!r}")
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if self.horizon < self.dt:
            raise ValidationError("horizon must cover at least one step")
        if not self.volatility > 0:
            raise ValidationError("volatility must be positive")
        if self.kind in ("exp_martingale", "bm_stopped_at_zero") and not self.start > 0:
            raise ValidationError(f"{self.kind} needs a positive start")
        if self.kind == "exit_interval":
            if self.barrier is None or not 0 < self.start < self.barrier:
                raise ValidationError("exit_interval needs 0 < start < barrier")

    def n_steps(self, horizon: float | None = None) -> int:
        h = self.horizon if horizon is None else horizon
        return max(1, int(round(h / self.dt)))

    def with_horizon(self, horizon: float) -> "GenSpec":
        return GenSpec(self.kind, self.dt, horizon, self.volatility,
                       self.start, self.base_seed, self.barrier)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "dt": self.dt, "horizon": self.horizon,
             "volatility": self.volatility, "start": self.start,
             "base_seed": self.base_seed}
        if self.barrier is not None:
            d["barrier"] = self.barrier
        return d


def path_rng(base_seed: int, i: int) -> np.random.Generator:
    """The stream for path i: a Philox generator keyed by (base_seed, i)."""
    key = np.array([base_seed & (2**64 - 1), i & (2**64 - 1)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _draw(rng: np.random.Generator, m: int) -> np.ndarray:
    """Draw m standard normals in the fixed chunk pattern."""
    if m <= CHUNK:
        return rng.standard_normal(m)
    parts = [rng.standard_normal(min(CHUNK, m - k)) for k in range(0, m, CHUNK)]
    return np.concatenate(parts)


def generate(spec: GenSpec, i: int, horizon: float | None = None) -> Path:
    """Materialize path i in full. Bit-reproducible for fixed (seed, i)."""
    n = spec.n_steps(horizon)
    rng = path_rng(spec.base_seed, i)
    scale = spec.volatility * math.sqrt(spec.dt)
    dz = _draw(rng, n) * scale
    times = np.arange(n + 1) * spec.dt
    stop = None
    if spec.kind == "exp_martingale":
        expo = np.cumsum(dz) - 0.5 * spec.volatility**2 * times[1:]
        vals = np.concatenate(([spec.start], spec.start * np.exp(expo)))
    else:
        vals = np.concatenate(([spec.start], spec.start + np.cumsum(dz)))
        if spec.kind == "bm_stopped_at_zero":
            hits = np.flatnonzero(vals <= 0.0)
            if hits.size:
                stop = int(hits[0])
                vals[stop:] = 0.0
        elif spec.kind == "exit_interval":
            hits = np.flatnonzero((vals <= 0.0) | (vals >= spec.barrier))
            if hits.size:
                stop = int(hits[0])
                vals[stop:] = vals[stop]
    return Path(times, vals, stop)


# -- per-path statistics kernels (stream-compatible with generate) -------------

def _exp_kernel(spec: GenSpec, i: int, n_steps: int, track_level_log: float | None = None):
    """(max, terminal, last index at/above the level) for the exp martingale."""
    rng = path_rng(spec.base_seed, i)
    scale = spec.volatility * math.sqrt(spec.dt)
    drift = -0.5 * spec.volatility**2 * spec.dt
    cum = 0.0
    mx = 0.0
    last_at = 0 if track_level_log is not None and track_level_log <= 0.0 else -1
    k = 0
    while k < n_steps:
        m = min(CHUNK, n_steps - k)
        e = cum + np.cumsum(rng.standard_normal(m) * scale + drift)
        mx = max(mx, float(e.max()))
        if track_level_log is not None:
            above = np.flatnonzero(e >= track_level_log)
            if above.size:
                last_at = k + 1 + int(above[-1])
        cum = float(e[-1])
        k += m
    return spec.start * math.exp(mx), spec.start * math.exp(cum), last_at


def _stopped_bm_kernel(spec: GenSpec, i: int, n_steps: int):
    """(max, terminal, stop index or -1) for the absorbed Brownian kinds.

    The zero-absorbed kind clamps the terminal value to 0; the exit kind
    keeps the raw overshoot value, mirroring :func:`generate`.
    """
    rng = path_rng(spec.base_seed, i)
    scale = spec.volatility * math.sqrt(spec.dt)
    upper = spec.barrier if spec.kind == "exit_interval" else None
    x = spec.start
    mx = spec.start
    k = 0
    while k < n_steps:
        m = min(CHUNK, n_steps - k)
        vals = x + scale * np.cumsum(rng.standard_normal(m))
        out = vals <= 0.0
        if upper is not None:
            out |= vals >= upper
        hits = np.flatnonzero(out)
        if hits.size:
            j = int(hits[0])
            mx = max(mx, float(vals[:j + 1].max()))
            raw = float(vals[j])
            term = raw if upper is not None else 0.0
            return mx, term, k + 1 + j
        mx = max(mx, float(vals.max()))
        x = float(vals[-1])
        k += m
    return mx, x, -1


def run_paths(n: int, per_path, width: int, threads: int = 1) -> np.ndarray:
    """Fill an (n, width) array with per-path statistics, optionally threaded.

    Paths own disjoint rows, so the result does not depend on the worker
    count or the execution order.
    """
    out = np.empty((n, width), dtype=float)

    def work(bounds):
        lo, hi = bounds
        for i in range(lo, hi):
            out[i] = per_path(i)

    if threads and threads > 1:
        edges = np.linspace(0, n, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(work, zip(edges[:-1], edges[1:])))
    else:
        work((0, n))
    return out


# -- statistics toolkit ---------------------------------------------------------

def ecdf(samples):
    """Right-continuous empirical CDF; the sorted samples ride on ``.samples``."""
    s = np.sort(np.asarray(samples, dtype=float))
    if s.size == 0:
        raise ValidationError("empirical CDF needs at least one sample")

    def F(y):
        out = np.searchsorted(s, np.asarray(y, dtype=float), side="right") / s.size
        return out if out.ndim else float(out)

    F.samples = s
    return F


def ks_distance(samples_or_ecdf, cdf, breakpoints=()) -> float:
    """sup |F_hat - F| over the union of sample points and target breakpoints.

    Both one-sided limits are checked at every evaluation point, so atoms of
    either distribution are handled exactly (``cdf`` must be the
    right-continuous distribution function).
    """
    s = samples_or_ecdf.samples if callable(samples_or_ecdf) else \
        np.sort(np.asarray(samples_or_ecdf, dtype=float))
    n = s.size
    pts = np.union1d(s, np.asarray(breakpoints, dtype=float))
    fr = np.searchsorted(s, pts, side="right") / n
    fl = np.searchsorted(s, pts, side="left") / n
    tr = np.asarray(cdf(pts), dtype=float)
    tl = np.asarray(cdf(np.nextafter(pts, -np.inf)), dtype=float)
    return float(max(np.max(np.abs(fr - tr)), np.max(np.abs(fl - tl))))


def tv_atomic(samples, mu: AtomicMeasure, window: float = np.inf) -> float:
    """Total variation against an atomic target via nearest-atom binning.

    Samples farther than ``window`` from every atom count as unmatched mass.
    """
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise ValidationError("total variation needs at least one sample")
    xs = mu.xs
    j = np.clip(np.searchsorted(xs, s), 0, xs.size - 1)
    jm = np.clip(j - 1, 0, xs.size - 1)
    nearest = np.where(np.abs(xs[jm] - s) <= np.abs(xs[j] - s), jm, j)
    dist = np.abs(xs[nearest] - s)
    matched = dist <= window
    counts = np.bincount(nearest[matched], minlength=xs.size)
    emp = counts / s.size
    unmatched = 1.0 - matched.mean()
    return float(0.5 * (np.sum(np.abs(emp - mu.ps)) + unmatched))


# -- reports ---------------------------------------------------------------------

@dataclass(frozen=True)
class McReport:
    """Outcome of a Monte Carlo verification run."""

    suite: str
    n_paths: int
    ks_stat: float | None
    tv_stat: float | None
    censored_fraction: float
    inconclusive: bool
    seed: int
    grid: dict
    quantiles: tuple = ()
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("ks_stat", "tv_stat"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if not 0.0 <= self.censored_fraction <= 1.0:
            raise ValidationError("censored_fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "n_paths": self.n_paths,
            "ks_stat": self.ks_stat,
            "tv_stat": self.tv_stat,
            "censored_fraction": self.censored_fraction,
            "inconclusive": self.inconclusive,
            "seed": self.seed,
            "grid": dict(self.grid),
            "quantiles": [list(q) for q in self.quantiles],
            "extra": dict(self.extra),
        }


_DECILES = np.arange(0.1, 0.95, 0.1)


def _quantile_table(samples, target_quantile):
    qs = np.quantile(samples, _DECILES)
    return tuple((float(q), float(e), float(target_quantile(q)))
                 for q, e in zip(_DECILES, qs))


def uniform_law_report(spec: GenSpec, n: int, censor_budget: float = 0.002,
                       max_horizon: float | None = None, threads: int = 1) -> McReport:
    """Verify the universal law of the maximum of a vanishing martingale.

    For the exp-martingale and zero-absorbed kinds: start/max is compared to
    the uniform law on [0, 1].  For the exit kind the stopped maximum,
    clamped at the barrier, is compared to min(start/xi, barrier).  Horizons
    auto-extend (doubling, capped by ``max_horizon``) until the censoring
    estimate clears the budget; a run that cannot clear it is flagged
    inconclusive.
    """
    if spec.kind == "brownian":
        raise DomainError("the uniform maximum law needs a non-negative vanishing martingale")
    horizon = float(spec.horizon)
    cap = max_horizon if max_horizon is not None else 64.0 * horizon
    while True:
        n_steps = spec.n_steps(horizon)
        if spec.kind == "exp_martingale":
            stats = run_paths(n, lambda i: _exp_kernel(spec, i, n_steps)[:2], 2, threads)
        else:
            stats = run_paths(n, lambda i: _stopped_bm_kernel(spec, i, n_steps)[:3], 3, threads)
        maxs, terms = stats[:, 0], stats[:, 1]
        with np.errstate(invalid="ignore"):
            ratios = np.clip(np.maximum(terms, 0.0) / maxs, 0.0, 1.0)
        if spec.kind == "bm_stopped_at_zero":
            ratios[terms <= 0.0] = 0.0
        elif spec.kind == "exit_interval":
            stopped = stats[:, 2] >= 0
            ratios[stopped] = 0.0
        censored = float(ratios.mean())
        if censored < censor_budget or horizon * 2 > cap:
            break
        horizon *= 2.0

    if spec.kind == "exit_interval":
        b, n0 = spec.barrier, spec.start
        samples = np.minimum(maxs, b)

        def cdf(y):
            y = np.asarray(y, dtype=float)
            out = np.where(y < n0, 0.0, np.where(y >= b, 1.0, 1.0 - n0 / np.maximum(y, n0)))
            return out

        def target_q(q):
            val = n0 / (1.0 - q)
            return min(val, b)

        breaks = (n0, b)
        extra = {"barrier_mass": float(np.mean(maxs >= b)),
                 "barrier_mass_target": n0 / b}
    else:
        samples = spec.start / maxs

        def cdf(y):
            return np.clip(np.asarray(y, dtype=float), 0.0, 1.0)

        def target_q(q):
            return q

        breaks = (0.0, 1.0)
        extra = {}

    ks = ks_distance(samples, cdf, breakpoints=breaks)
    return McReport(
        suite="uniform-law", n_paths=n, ks_stat=ks, tv_stat=None,
        censored_fraction=censored, inconclusive=bool(censored >= censor_budget),
        seed=spec.base_seed,
        grid={"dt": spec.dt, "horizon": horizon, "n_steps": n_steps, "kind": spec.kind},
        quantiles=_quantile_table(samples, target_q), extra=extra,
    )


def _norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def last_passage_report(spec: GenSpec, n: int, t_list, censor_budget: float = 0.002,
                        max_horizon: float | None = None, threads: int = 1) -> McReport:
    """Empirical law of the last passage over the start level of a unit GBM.

    Targets Phi(sqrt(t)/2) - Phi(-sqrt(t)/2) per requested t; needs the
    exp-martingale generator with unit start and unit volatility.  Last
    passages are read off the grid backwards, so they are resolved to the
    mesh, which is reported alongside.
    """
    if spec.kind != "exp_martingale" or spec.start != 1.0 or spec.volatility != 1.0:
        raise DomainError("the last-passage law is pinned to the unit exp martingale")
    t_list = [float(t) for t in t_list]
    if not t_list or min(t_list) <= 0:
        raise DomainError("last-passage times must be positive")
    horizon = float(max(spec.horizon, max(t_list)))
    cap = max_horizon if max_horizon is not None else 64.0 * horizon
    while True:
        n_steps = spec.n_steps(horizon)
        stats = run_paths(
            n, lambda i: _exp_kernel(spec, i, n_steps, track_level_log=0.0), 3, threads)
        terms = stats[:, 1]
        censored = float(np.minimum(terms, 1.0).mean())
        if censored < censor_budget or horizon * 2 > cap:
            break
        horizon *= 2.0
    g1 = stats[:, 2] * spec.dt
    rows = []
    worst = 0.0
    for t in t_list:
        emp = float(np.mean(g1 < t))
        target = _norm_cdf(math.sqrt(t) / 2.0) - _norm_cdf(-math.sqrt(t) / 2.0)
        rows.append({"t": t, "empirical": emp, "target": target, "abs_gap": abs(emp - target)})
        worst = max(worst, abs(emp - target))
    return McReport(
        suite="last-passage", n_paths=n, ks_stat=worst, tv_stat=None,
        censored_fraction=censored, inconclusive=bool(censored >= censor_budget),
        seed=spec.base_seed,
        grid={"dt": spec.dt, "horizon": horizon, "n_steps": n_steps, "kind": spec.kind},
        extra={"levels": rows},
    )
