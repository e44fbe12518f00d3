"""Skorokhod embedding by the barycentre rule and its optimality verifiers.

The stopping rule for a centered atomic target fires at the first grid index
where the conditional-mean function of the target drops to the running
maximum; equivalently, where the path falls to the drawdown function of its
maximum.  Both readings are evaluated on every path and any disagreement is
surfaced as a diagnostics counter (none is expected: the drawdown function
is the right-continuous inverse of the barycentre).

Continuous drivers are required here: the embedding identity needs the
driver to cross levels continuously, so the Brownian generator is mandatory
for the reports.

Grid conventions for the stopped-maximum law: when the stop is caused by the
maximum reaching the top conditional-mean level, the continuous maximum sits
exactly on that level and the sample is clamped there; drawdown-caused stops
keep the grid maximum, which carries the usual O(sqrt(dt)) deficit.  Report
tolerances budget for it explicitly.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, ValidationError
from .measures import AtomicMeasure
from .montecarlo import (CHUNK, GenSpec, McReport, ks_distance, path_rng,
                         run_paths, tv_atomic)
from .paths import Path, StopEvent
from .transforms import TransformProfile, hl_transform

CENTER_TOL = 1e-9


def _check_embeddable(mu: AtomicMeasure) -> None:
    if abs(mu.mean()) > CENTER_TOL:
        raise DomainError("embedding needs a centered target measure")


def _rule_tables(mu: AtomicMeasure):
    """Barycentre levels per atom; the stop rule reads the drawdown level of
    the running maximum as the largest atom whose level is passed."""
    psis = np.asarray(mu.barycentre(mu.xs), dtype=float)
    return psis, mu.xs


def _w_levels(psis, atoms, bars):
    j = np.searchsorted(psis, bars, side="right") - 1
    lv = np.where(j < 0, -np.inf, atoms[np.clip(j, 0, atoms.size - 1)])
    # beyond the top of support the drawdown function is the identity
    return np.where(bars >= atoms[-1], bars, lv)


def ay_stopping_index(p: Path, mu: AtomicMeasure) -> StopEvent:
    """First grid index where the embedding rule fires on an explicit path.

    Evaluates both the barycentre form and the drawdown form; they coincide
    by construction, and :func:`embed_report` keeps a mismatch counter as a
    diagnostic.
    """
    _check_embeddable(mu)
    if p.values[0] != 0.0:
        raise DomainError("embedding paths must start at 0")
    psis, atoms = _rule_tables(mu)
    xbar = np.maximum.accumulate(p.values)
    levels = _w_levels(psis, atoms, xbar)
    hits = np.flatnonzero(p.values <= levels)
    if hits.size:
        i = int(hits[0])
        return StopEvent("breach", i, float(levels[i]))
    return StopEvent("horizon_censored", len(p) - 1, float(p.values[-1]))


def _psi_rule_index(p: Path, mu: AtomicMeasure) -> int:
    psi_vals = np.asarray(mu.barycentre(p.values), dtype=float)
    xbar = np.maximum.accumulate(p.values)
    hits = np.flatnonzero(psi_vals <= xbar)
    return int(hits[0]) if hits.size else -1


def _embed_kernel(spec: GenSpec, i: int, n_steps: int, psis, atoms, top_level):
    """(stopped, index, terminal, max_sample, rule_mismatch) for one path."""
    rng = path_rng(spec.base_seed, i)
    scale = spec.volatility * math.sqrt(spec.dt)
    r = atoms[-1]
    # index-0 check covers the point-mass-at-zero target
    lvl0 = _w_levels(psis, atoms, np.asarray([0.0]))[0]
    if 0.0 <= lvl0:
        return 1.0, 0.0, 0.0, 0.0, 0.0
    x = 0.0
    xbar = 0.0
    psi_fired = -1
    k = 0
    while k < n_steps:
        m = min(CHUNK, n_steps - k)
        vals = x + scale * np.cumsum(rng.standard_normal(m))
        bars = np.maximum(np.maximum.accumulate(vals), xbar)
        levels = _w_levels(psis, atoms, bars)
        hits = np.flatnonzero(vals <= levels)
        if psi_fired < 0:
            jpsi = np.asarray(mu_barycentre_fast(psis, atoms, vals), dtype=float)
            ph = np.flatnonzero(jpsi <= bars)
            if ph.size:
                psi_fired = k + 1 + int(ph[0])
        if hits.size:
            j = int(hits[0])
            idx = k + 1 + j
            value = float(vals[j])
            bar = float(bars[j])
            # a record that fires can only be the top-level crossing: the
            # continuous maximum sits exactly on that level
            max_sample = top_level if (vals[j] == bars[j] and vals[j] >= r) else bar
            mismatch = 0.0 if psi_fired == idx else 1.0
            return 1.0, float(idx), value, max_sample, mismatch
        x = float(vals[-1])
        xbar = float(bars[-1])
        k += m
    return 0.0, float(n_steps), x, xbar, 0.0


def mu_barycentre_fast(psis, atoms, vals):
    """Barycentre levels of raw values through the precomputed atom tables."""
    j = np.searchsorted(atoms, vals, side="left")
    return np.where(j >= atoms.size, vals, psis[np.clip(j, 0, psis.size - 1)])


def embed_report(mu: AtomicMeasure, spec: GenSpec, n: int,
                 window_mult: float = 3.0, threads: int = 1) -> McReport:
    """Embed the target with n Brownian paths and verify both laws.

    Reports the total-variation distance of the stopped values to the target
    (nearest-atom window ``window_mult * volatility * sqrt(dt)``) and the KS
    distance of the stopped maxima to the maximal-law transform of the
    target.  Censored paths are excluded from both statistics and reported
    as a fraction.
    """
    _check_embeddable(mu)
    if spec.kind != "brownian" or spec.start != 0.0:
        raise DomainError("embedding requires the Brownian generator started at 0")
    psis, atoms = _rule_tables(mu)
    top_level = float(psis[-1])
    n_steps = spec.n_steps()
    stats = run_paths(
        n, lambda i: _embed_kernel(spec, i, n_steps, psis, atoms, top_level), 5, threads)
    stopped = stats[:, 0] > 0.5
    censored = 1.0 - float(stopped.mean())
    terminals = stats[stopped, 2]
    maxima = stats[stopped, 3]
    mismatches = int(stats[:, 4].sum())
    window = window_mult * spec.volatility * math.sqrt(spec.dt)
    if terminals.size == 0:
        raise DomainError("no path stopped before the horizon; extend it")
    tv = tv_atomic(terminals, mu, window=window)
    hl = hl_transform(mu)
    ks = ks_distance(maxima, hl.cdf, breakpoints=hl.value_breakpoints())
    return McReport(
        suite="embed", n_paths=n, ks_stat=ks, tv_stat=tv,
        censored_fraction=censored, inconclusive=bool(censored > 0.01),
        seed=spec.base_seed,
        grid={"dt": spec.dt, "horizon": spec.horizon, "n_steps": n_steps,
              "kind": spec.kind, "window": window},
        extra={
            "rule_mismatches": mismatches,
            "terminal_mean": float(terminals.mean()),
            "terminal_mean_note": "weak uniform-integrability proxy only",
            "mean_stop_time": float(stats[stopped, 1].mean() * spec.dt),
        },
    )


# -- alternative stopping rules for the domination report ----------------------

def exit_rule(lo: float, hi: float):
    """Stop at the first exit of the open interval (lo, hi)."""

    def rule(vals, bars):
        hits = np.flatnonzero((vals <= lo) | (vals >= hi))
        return int(hits[0]) if hits.size else -1

    return rule


class FixedTimeRule:
    """Stop at a fixed grid time; embeds nothing, used as a negative control."""

    def __init__(self, t_stop: float, dt: float):
        self.k_stop = max(1, int(round(t_stop / dt)))


def fixed_time_rule(t_stop: float, dt: float) -> FixedTimeRule:
    return FixedTimeRule(t_stop, dt)


def _alt_kernel(spec: GenSpec, i: int, n_steps: int, rule):
    """(stopped, index, terminal, max) under a chunk rule or fixed-time rule."""
    rng = path_rng(spec.base_seed, i)
    scale = spec.volatility * math.sqrt(spec.dt)
    k_stop = getattr(rule, "k_stop", None)
    x = 0.0
    xbar = 0.0
    k = 0
    while k < n_steps:
        m = min(CHUNK, n_steps - k)
        vals = x + scale * np.cumsum(rng.standard_normal(m))
        bars = np.maximum(np.maximum.accumulate(vals), xbar)
        if k_stop is not None:
            if k + m >= k_stop:
                j = k_stop - k - 1
                return 1.0, float(k_stop), float(vals[j]), float(bars[j])
        else:
            j = rule(vals, bars)
            if j >= 0:
                return 1.0, float(k + 1 + j), float(vals[j]), float(bars[j])
        x = float(vals[-1])
        xbar = float(bars[-1])
        k += m
    return 0.0, float(n_steps), x, xbar


def dominance_report(mu: AtomicMeasure, spec: GenSpec, n: int, alt_rule=None,
                     levels=None, tv_budget: float = 0.05,
                     threads: int = 1) -> McReport:
    """Check that no embedding of the target beats the maximal law.

    Runs the barycentre-rule embedding and an alternative stopping rule on
    the same driver streams.  At every level the alternative's maximum tail
    must stay below the maximal-law tail plus twice its binomial standard
    error, while the barycentre rule must match that tail within the same
    band plus a documented grid-deficit budget of
    ``0.5826 * sqrt(dt) * density``.  An alternative that fails to embed the
    target (total variation above ``tv_budget``) flags the run inconclusive.
    """
    _check_embeddable(mu)
    if spec.kind != "brownian" or spec.start != 0.0:
        raise DomainError("domination checks require the Brownian generator started at 0")
    if alt_rule is None:
        alt_rule = exit_rule(mu.lo, mu.hi)
    psis, atoms = _rule_tables(mu)
    top_level = float(psis[-1])
    n_steps = spec.n_steps()
    ay = run_paths(n, lambda i: _embed_kernel(spec, i, n_steps, psis, atoms, top_level),
                   5, threads)
    alt = run_paths(n, lambda i: _alt_kernel(spec, i, n_steps, alt_rule), 4, threads)
    ay_ok = ay[:, 0] > 0.5
    alt_ok = alt[:, 0] > 0.5
    censored = 1.0 - float((ay_ok & alt_ok).mean())
    hl = hl_transform(mu)
    window = 3.0 * spec.volatility * math.sqrt(spec.dt)
    alt_tv = tv_atomic(alt[alt_ok, 2], mu, window=window)
    embeds = alt_tv <= tv_budget
    if levels is None:
        m, r = mu.mean(), mu.hi
        levels = m + (r - m) * np.linspace(0.05, 0.95, 19)
    ay_max = ay[ay_ok, 3]
    alt_max = alt[alt_ok, 3]
    bias_const = 0.5826 * spec.volatility * math.sqrt(spec.dt)
    rows = []
    dominated = True
    attained = True
    for y in np.asarray(levels, dtype=float):
        target = float(hl.tail(y))
        ci = math.sqrt(max(target * (1.0 - target), 1e-12) / n)
        # the maximal-law tail density at y budgets the grid max deficit
        eps = 1e-6 * (1.0 + abs(y))
        dens = abs(float(hl.tail(y + eps)) - float(hl.tail(y - eps))) / (2 * eps)
        bias = bias_const * dens
        a_tail = float(np.mean(alt_max >= y))
        m_tail = float(np.mean(ay_max >= y))
        row_alt_ok = a_tail <= target + 2 * ci
        row_ay_ok = (m_tail <= target + 2 * ci) and (m_tail >= target - 2 * ci - bias)
        dominated &= row_alt_ok
        attained &= row_ay_ok
        rows.append({"level": float(y), "alt_tail": a_tail, "ay_tail": m_tail,
                     "target": target, "ci": ci, "bias_budget": bias,
                     "alt_within": row_alt_ok, "ay_within": row_ay_ok})
    return McReport(
        suite="dominate", n_paths=n, ks_stat=None, tv_stat=alt_tv,
        censored_fraction=censored,
        inconclusive=bool(not embeds or censored > 0.01),
        seed=spec.base_seed,
        grid={"dt": spec.dt, "horizon": spec.horizon, "n_steps": n_steps,
              "kind": spec.kind, "window": window},
        extra={"levels": rows, "alt_embeds_target": bool(embeds),
               "dominated_everywhere": bool(dominated),
               "ay_attains_everywhere": bool(attained)},
    )


# -- floor domination -----------------------------------------------------------

def _floor_kernel(spec: GenSpec, i: int, n_steps: int, prof: TransformProfile, g):
    """(violations, M_T, N_T, max_M) along one driver path."""
    rng = path_rng(spec.base_seed, i)
    scale = spec.volatility * math.sqrt(spec.dt)
    drift = -0.5 * spec.volatility**2 * spec.dt
    cum = 0.0
    mx = 0.0
    violations = 0
    k = 0
    m_last = None
    while k < n_steps:
        m = min(CHUNK, n_steps - k)
        e = cum + np.cumsum(rng.standard_normal(m) * scale + drift)
        vals = spec.start * np.exp(e)
        bars = spec.start * np.exp(np.maximum(np.maximum.accumulate(e), mx))
        uvals = np.asarray(prof.u(bars), dtype=float)
        mpath = np.asarray(prof.U(bars), dtype=float) - uvals * (bars - vals)
        floor_vals = np.asarray(g(vals), dtype=float)
        violations += int(np.sum(mpath < floor_vals - 1e-12 * (1.0 + np.abs(floor_vals))))
        mx = max(mx, float(e.max()))
        cum = float(e[-1])
        m_last = float(mpath[-1])
        k += m
    n_term = spec.start * math.exp(cum)
    m_max = float(np.asarray(prof.U(spec.start * math.exp(mx)), dtype=float))
    return float(violations), m_last, n_term, m_max


def floor_report(g, spec: GenSpec, n: int, caps=(0.5, 1.0, 2.0, 4.0),
                 profile: TransformProfile | None = None, alt=None,
                 max_law_cdf=None, threads: int = 1) -> McReport:
    """Verify that the transform of the concave envelope dominates the floor.

    Counts pathwise violations of M_t >= g(N_t) (exactly zero when the
    profile's U is a true concave majorant of g) and compares expected
    capped-linear utilities of the terminal values against an alternative
    (default: the driver itself, whose terminal value vanishes), with paired
    confidence intervals.
    """
    if spec.kind != "exp_martingale":
        raise DomainError("the floor check runs on the exp-martingale driver")
    if profile is None:
        profile = envelope_profile(g, spec.start)
    _check_envelope(profile, g, spec.start)
    n_steps = spec.n_steps()
    stats = run_paths(n, lambda i: _floor_kernel(spec, i, n_steps, profile, g), 4, threads)
    violations = int(stats[:, 0].sum())
    m_term = stats[:, 1]
    n_term = stats[:, 2]
    m_max = stats[:, 3]
    alt_term = n_term if alt is None else np.asarray([alt(i) for i in range(n)], dtype=float)
    rows = []
    all_ok = True
    for c in caps:
        d = np.minimum(m_term, c) - np.minimum(alt_term, c)
        se = float(d.std(ddof=1) / math.sqrt(n))
        ok = float(d.mean()) >= -1.96 * se
        all_ok &= ok
        rows.append({"cap": float(c), "mean_gain": float(d.mean()),
                     "ci": 1.96 * se, "holds": bool(ok)})
    censored = float(np.minimum(n_term, 1.0).mean())
    ks = None
    if max_law_cdf is not None:
        ks = ks_distance(m_max, max_law_cdf)
    return McReport(
        suite="floor", n_paths=n, ks_stat=ks, tv_stat=None,
        censored_fraction=min(censored, 1.0), inconclusive=False,
        seed=spec.base_seed,
        grid={"dt": spec.dt, "horizon": spec.horizon, "n_steps": n_steps,
              "kind": spec.kind},
        extra={"pathwise_violations": violations, "caps": rows,
               "utility_order_holds": bool(all_ok)},
    )


def envelope_profile(g, start: float, grid_lo: float = 1e-6, grid_hi: float = 1e7,
                     n_grid: int = 4000) -> TransformProfile:
    """Piecewise-linear increasing concave envelope of g on a log grid.

    Raises when the envelope fails to flatten (then U(x)/x does not vanish
    and no dominating transform with these terminal laws exists).
    """
    from .transforms import _upper_concave_hull

    xs = np.geomspace(grid_lo * start, grid_hi * start, n_grid)
    ys = np.asarray(g(xs), dtype=float)
    if not np.all(np.isfinite(ys)):
        raise DomainError("floor function must be finite on the probe grid")
    hull = _upper_concave_hull(np.column_stack((xs, ys)))
    hx, hy = hull[:, 0], hull[:, 1]
    end_slope = (hy[-1] - hy[-2]) / (hx[-1] - hx[-2])
    if end_slope > 1e-4 * max(1.0, abs(hy[-1]) / hx[-1]):
        raise DomainError("concave envelope of the floor does not flatten: U(x)/x must vanish")
    slopes = np.diff(hy) / np.diff(hx)

    def U(x):
        out = np.interp(np.asarray(x, dtype=float), hx, hy)
        return out if out.ndim else float(out)

    def u(x):
        x = np.asarray(x, dtype=float)
        j = np.clip(np.searchsorted(hx, x, side="right") - 1, 0, slopes.size - 1)
        out = np.where(x >= hx[-1], 0.0, slopes[j])
        return out if out.ndim else float(out)

    def V(y):
        out = np.interp(np.asarray(y, dtype=float), hy, hx)
        return out if out.ndim else float(out)

    def v(y):
        y = np.asarray(y, dtype=float)
        j = np.clip(np.searchsorted(hy, y, side="right") - 1, 0, slopes.size - 1)
        with np.errstate(divide="ignore"):
            out = 1.0 / slopes[j]
        return out if out.ndim else float(out)

    def w(y):
        y = np.asarray(y, dtype=float)
        out = y - np.asarray(V(y), dtype=float) / np.asarray(v(y), dtype=float)
        return out if out.ndim else float(out)

    return TransformProfile(U=U, u=u, V=V, v=v, w=w, a=float(start),
                            a_star=float(U(start)), b=None, r_w=None, tag="envelope")


def _check_envelope(profile: TransformProfile, g, start: float) -> None:
    xs = np.geomspace(1e-4 * start, 1e6 * start, 200)
    uv = np.asarray(profile.U(xs), dtype=float)
    gv = np.asarray(g(xs), dtype=float)
    if np.any(uv < gv - 1e-9 * (1.0 + np.abs(gv))):
        raise DomainError("profile does not dominate the floor function")
    ratios = uv[-3:] / xs[-3:]
    if not (np.all(np.diff(ratios) <= 1e-15) and ratios[-1] < 0.05):
        raise DomainError("U(x)/x must decrease to 0 for the floor construction")
