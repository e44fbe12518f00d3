"""Exact calculus of integrable one-dimensional probability measures.

Two carriers are used throughout:

* :class:`AtomicMeasure` -- a finite list of weighted atoms.  All tail /
  quantile / call / AVaR / barycentre operations on it are exact (closed
  form, no quadrature).
* :class:`QuantileProfile` -- a measure represented through the integrated
  tail quantile ``Q(lam) = int_0^lam qbar(u) du``.  Segments carry the
  closed form ``qbar(lam) = c + a/lam`` on ``(lam_j, lam_{j+1}]`` which is
  exactly the family produced by averaging atomic quantiles, so the
  transforms downstream stay exact.

Conventions, fixed globally and tested:

* the tail is taken over the closed half line, ``tail(x) = mu([x, oo))``,
  so it is left-continuous in ``x`` and atoms at ``x`` are included;
* tail quantiles ``qbar(lam) = inf{x : tail(x) < lam}`` are left-continuous
  and non-increasing on ``(0, 1]``.

All objects are immutable after construction and every operation is a pure
function, so values can be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError

MIN_WEIGHT = 1e-12
WEIGHT_SUM_TOL = 1e-12


def _as_float_array(a, name):
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class AtomicMeasure:
    """A probability measure with finitely many atoms.

    ``xs`` are strictly increasing locations, ``ps`` the matching weights.
    Weights below ``1e-12`` are rejected to avoid degenerate quantile
    breakpoints.
    """

    xs: np.ndarray
    ps: np.ndarray
    # suffix tails T_j = mu([x_j, oo)) and suffix first moments, derived
    _tails: np.ndarray = field(init=False, repr=False, compare=False)
    _suffix_mean: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xs = _as_float_array(self.xs, "atom locations")
        ps = _as_float_array(self.ps, "atom weights")
        if xs.size == 0 or xs.size != ps.size:
            raise ValidationError("need equally many locations and weights, at least one atom")
        if xs.size > 1 and np.min(np.diff(xs)) <= 0:
            raise ValidationError("atom locations must be strictly increasing")
        if np.min(ps) < MIN_WEIGHT:
            raise ValidationError(f"atom weights must be >= {MIN_WEIGHT}")
        if abs(ps.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError("atom weights must sum to 1 within 1e-12")
        # tails via 1 - prefix sums so that tail(l) == 1 exactly
        cum = np.cumsum(ps)
        tails = np.concatenate(([1.0], 1.0 - cum[:-1]))
        sfx = np.concatenate((np.cumsum((xs * ps)[::-1])[::-1], [0.0]))
        for name, val in (("xs", xs), ("ps", ps), ("_tails", tails), ("_suffix_mean", sfx)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    # -- support ----------------------------------------------------------
    @property
    def lo(self) -> float:
        return float(self.xs[0])

    @property
    def hi(self) -> float:
        return float(self.xs[-1])

    @property
    def top_mass(self) -> float:
        """Mass of the top atom, mu({r})."""
        return float(self._tails[-1])

    @property
    def barrier(self) -> float:
        """b = 1 / mu([r, oo)); finite for every atomic measure."""
        return 1.0 / self.top_mass

    def mean(self) -> float:
        return float(self._suffix_mean[0])

    # -- tails and quantiles ----------------------------------------------
    def tail(self, x):
        """mu([x, oo)) with the closed left endpoint; left-continuous in x."""
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.xs, x, side="left")
        t = np.concatenate((self._tails, [0.0]))[k]
        return t if t.ndim else float(t)

    def tail_open(self, x):
        """mu((x, oo)); differs from :meth:`tail` by the atom at x."""
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.xs, x, side="right")
        t = np.concatenate((self._tails, [0.0]))[k]
        return t if t.ndim else float(t)

    def cdf(self, x):
        return 1.0 - self.tail_open(x)

    def tail_quantile(self, lam):
        """qbar(lam) = inf{x : tail(x) < lam}, left-continuous on (0, 1]."""
        lam = np.asarray(lam, dtype=float)
        if np.any(lam <= 0.0) or np.any(lam > 1.0):
            raise DomainError("tail quantile level must lie in (0, 1]")
        # j = number of tails >= lam, minus one; tails are decreasing
        j = np.searchsorted(-self._tails, -lam, side="right") - 1
        q = self.xs[np.clip(j, 0, self.xs.size - 1)]
        return q if q.ndim else float(q)

    def integrated_quantile(self, lam):
        """Q(lam) = int_0^lam qbar; piecewise affine, Q(0) = 0, Q(1) = mean."""
        lam = np.asarray(lam, dtype=float)
        if np.any(lam < 0.0) or np.any(lam > 1.0):
            raise DomainError("integration level must lie in [0, 1]")
        tails = self._tails
        j = np.clip(np.searchsorted(-tails, -lam, side="right") - 1, 0, self.xs.size - 1)
        t_next = np.concatenate((tails[1:], [0.0]))
        q = self._suffix_mean[j + 1] - self.xs[j] * t_next[j] + self.xs[j] * lam
        q = np.where(lam == 0.0, 0.0, q)
        return q if q.ndim else float(q)

    # -- call / AVaR / barycentre ------------------------------------------
    def call_fn(self, strike):
        """C(K) = sum p_i (x_i - K)^+; convex, non-increasing, slope in [-1, 0]."""
        strike = np.asarray(strike, dtype=float)
        gains = np.maximum(self.xs - strike[..., None], 0.0)
        c = gains @ self.ps
        return c if c.ndim else float(c)

    def avar(self, lam):
        """Average value at risk Q(lam)/lam on (0, 1]; avar(1) is the mean."""
        lam = np.asarray(lam, dtype=float)
        if np.any(lam <= 0.0) or np.any(lam > 1.0):
            raise DomainError("AVaR level must lie in (0, 1]")
        out = self.integrated_quantile(lam) / lam
        return out if out.ndim else float(out)

    def avar_via_calls(self, lam):
        """AVaR through its dual form (1/lam) inf_K (C(K) + lam K).

        The infimum of the convex piecewise-linear objective is attained at a
        kink, i.e. an atom location, so scanning atoms is exact.
        """
        lam = float(lam)
        if not 0.0 < lam < 1.0:
            raise DomainError("dual AVaR level must lie in (0, 1)")
        vals = self.call_fn(self.xs) + lam * self.xs
        return float(np.min(vals)) / lam

    def barycentre(self, x):
        """psi(x) = E[X | X >= x] for x < r; psi(x) = x beyond the support."""
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.xs, x, side="left")
        inside = x < self.hi
        k = np.clip(k, 0, self.xs.size - 1)
        psi = np.where(inside, self._suffix_mean[k] / self._tails[k], x)
        return psi if psi.ndim else float(psi)

    def barycentre_inverse(self, y):
        """Right-continuous inverse of the barycentre, sup{x : psi(x) <= y}."""
        y = np.asarray(y, dtype=float)
        psis = self.barycentre(self.xs)
        j = np.searchsorted(psis, y, side="right") - 1
        out = np.where(j < 0, -np.inf, self.xs[np.clip(j, 0, self.xs.size - 1)])
        out = np.where(y >= self.hi, y, out)
        return out if out.ndim else float(out)

    # -- sampling and serialization ----------------------------------------
    def sample(self, rng, n):
        """Draw n points as qbar(xi) with xi uniform on (0, 1]."""
        xi = 1.0 - rng.random(n)
        return np.asarray(self.tail_quantile(xi))

    def to_spec(self) -> dict:
        return {
            "type": "atoms",
            "atoms": [{"x": float(x), "p": float(p)} for x, p in zip(self.xs, self.ps)],
        }


@dataclass(frozen=True)
class QuantileProfile:
    """A measure carried by its integrated tail quantile.

    On each segment ``(bkpts[j], bkpts[j+1]]`` the tail quantile is
    ``qbar(lam) = consts[j] + hypers[j] / lam`` with ``hypers[j] >= 0``.
    ``Q`` is therefore continuous and concave with
    ``Q(lam) = Q(bk_j) + c (lam - bk_j) + a log(lam / bk_j)`` on the segment.

    Profiles whose first segment has ``hypers[0] > 0`` carry infinite mass in
    the integrated sense (the 1/xi family); they are representable but have
    ``mean = inf`` and are rejected by operators that need integrability.
    """

    bkpts: np.ndarray   # ascending, bkpts[0] == 0, bkpts[-1] == 1
    consts: np.ndarray  # c_j, one per segment
    hypers: np.ndarray  # a_j >= 0, one per segment
    _qcum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        bk = _as_float_array(self.bkpts, "breakpoints")
        cs = _as_float_array(self.consts, "segment constants")
        hs = _as_float_array(self.hypers, "segment hyperbolic weights")
        if bk.size < 2 or bk[0] != 0.0 or bk[-1] != 1.0:
            raise ValidationError("breakpoints must run from 0 to 1")
        if np.min(np.diff(bk)) <= 0:
            raise ValidationError("breakpoints must be strictly increasing")
        if cs.size != bk.size - 1 or hs.size != cs.size:
            raise ValidationError("need one (const, hyper) pair per segment")
        if np.min(hs) < 0:
            raise ValidationError("hyperbolic weights must be nonnegative")
        # non-increasing left-continuous quantile across segment joints
        left_end = cs[:-1] + np.divide(hs[:-1], bk[1:-1])
        right_sup = cs[1:] + np.divide(hs[1:], bk[1:-1])
        if np.any(right_sup > left_end + 1e-9 * (1.0 + np.abs(left_end))):
            raise ValidationError("tail quantile must be non-increasing across segments")
        # cumulative Q at breakpoints; infinite when the top segment is 1/lam-heavy
        dq = cs * np.diff(bk)
        pos = np.flatnonzero(hs > 0)
        for j in pos:
            dq[j] += np.inf if bk[j] == 0.0 else hs[j] * math.log(bk[j + 1] / bk[j])
        qcum = np.concatenate(([0.0], np.cumsum(dq)))
        for name, val in (("bkpts", bk), ("consts", cs), ("hypers", hs), ("_qcum", qcum)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def from_atomic(cls, mu: AtomicMeasure) -> "QuantileProfile":
        bk = np.concatenate(([0.0], mu._tails[::-1]))
        # merge duplicate breakpoints cannot occur: tails strictly decrease
        return cls(bkpts=bk, consts=mu.xs[::-1].copy(), hypers=np.zeros(mu.xs.size))

    # -- support ----------------------------------------------------------
    @property
    def bounded_top(self) -> bool:
        return self.hypers[0] == 0.0

    @property
    def hi(self) -> float:
        """r = qbar(0+); inf when the top is unbounded."""
        return float(self.consts[0]) if self.bounded_top else math.inf

    @property
    def lo(self) -> float:
        return float(self.consts[-1] + self.hypers[-1])

    def mean(self) -> float:
        return float(self._qcum[-1])

    # -- evaluation --------------------------------------------------------
    def _segment(self, lam):
        return np.clip(np.searchsorted(self.bkpts, lam, side="left") - 1, 0, self.consts.size - 1)

    def tail_quantile(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam <= 0.0) or np.any(lam > 1.0):
            raise DomainError("tail quantile level must lie in (0, 1]")
        j = self._segment(lam)
        q = self.consts[j] + self.hypers[j] / lam
        return q if q.ndim else float(q)

    def integrated_quantile(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam < 0.0) or np.any(lam > 1.0):
            raise DomainError("integration level must lie in [0, 1]")
        j = self._segment(np.where(lam == 0.0, self.bkpts[1], lam))
        base = self.bkpts[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            logpart = np.where(self.hypers[j] > 0, self.hypers[j] * np.log(lam / base), 0.0)
        q = self._qcum[j] + self.consts[j] * (lam - base) + logpart
        q = np.where(lam == 0.0, 0.0, q)
        return q if q.ndim else float(q)

    def avar(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam <= 0.0) or np.any(lam > 1.0):
            raise DomainError("AVaR level must lie in (0, 1]")
        out = self.integrated_quantile(lam) / lam
        return out if out.ndim else float(out)

    def _tail_scalar(self, y, strict):
        """sup{lam : qbar(lam) >= y}; with ``strict`` the measure of {qbar > y}.

        The two differ exactly by the atoms of the carried measure, i.e. by
        the constant stretches of qbar.
        """
        lam = 0.0
        for j in range(self.consts.size):
            lo_b, hi_b = self.bkpts[j], self.bkpts[j + 1]
            c, a = self.consts[j], self.hypers[j]
            seg_low = c + (a / hi_b if a > 0 else 0.0)   # value attained at hi_b
            if (seg_low > y) if strict else (seg_low >= y):
                lam = hi_b
                continue
            if a > 0 and y > c:
                cross = a / (y - c)   # hyperbolic pieces carry no atom
                if cross > lo_b:
                    lam = min(cross, hi_b)
            return lam
        return lam

    def tail(self, y):
        """mu([y, oo)) of the carried measure; left-continuous in y."""
        y = np.asarray(y, dtype=float)
        out = np.vectorize(lambda t: self._tail_scalar(t, strict=False))(y)
        return out if out.ndim else float(out)

    def tail_open(self, y):
        y = np.asarray(y, dtype=float)
        out = np.vectorize(lambda t: self._tail_scalar(t, strict=True))(y)
        return out if out.ndim else float(out)

    def cdf(self, y):
        out = 1.0 - np.asarray(self.tail_open(y))
        return out if out.ndim else float(out)

    def value_breakpoints(self) -> np.ndarray:
        """Segment endpoint values of qbar, useful as evaluation grids."""
        vals = [self.lo]
        if np.isfinite(self.hi):
            vals.append(self.hi)
        for j in range(self.consts.size):
            c, a = self.consts[j], self.hypers[j]
            if a > 0:
                vals.append(c + a / self.bkpts[j + 1])
                if self.bkpts[j] > 0:
                    vals.append(c + a / self.bkpts[j])
            else:
                vals.append(c)
        return np.unique(np.asarray(vals, dtype=float))

    def to_dict(self) -> dict:
        return {
            "type": "quantile_profile",
            "breakpoints": list(map(float, self.bkpts)),
            "consts": list(map(float, self.consts)),
            "hypers": list(map(float, self.hypers)),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuantileProfile":
        return cls(
            bkpts=np.asarray(d["breakpoints"], dtype=float),
            consts=np.asarray(d["consts"], dtype=float),
            hypers=np.asarray(d["hypers"], dtype=float),
        )


@dataclass(frozen=True)
class OrderVerdict:
    """Outcome of a stochastic / increasing-convex order comparison."""

    holds: bool
    worst_gap: float
    witness: float
    tol: float = 1e-12


# -- parametric measure specs ----------------------------------------------

def _pareto_cell_means(shape: float, location: float, n: int) -> np.ndarray:
    # conditional mean of qbar(lam) = m lam^(-1/shape) over each uniform cell
    if shape <= 1.0:
        raise ValidationError("pareto shape must exceed 1 for integrability")
    lam = np.linspace(0.0, 1.0, n + 1)
    e = 1.0 - 1.0 / shape
    prim = location * lam**e / e
    return np.diff(prim) * n


def measure_from_spec(spec: dict, n_atoms: int = 1000) -> AtomicMeasure:
    """Materialize a measure-spec dict as an :class:`AtomicMeasure`.

    Parametric families are discretized on ``n_atoms`` uniform quantile cells
    with per-cell conditional means, which preserves the overall mean exactly
    and keeps Q piecewise affine through the true Q at the cell boundaries.
    """
    if not isinstance(spec, dict) or "type" not in spec:
        raise ValidationError("measure spec must be a dict with a 'type' key")
    kind = spec["type"]
    if kind == "atoms":
        try:
            atoms = spec["atoms"]
            xs = np.asarray([a["x"] for a in atoms], dtype=float)
            ps = np.asarray([a["p"] for a in atoms], dtype=float)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed atoms spec: {exc}") from exc
        order = np.argsort(xs)
        return AtomicMeasure(xs[order], ps[order])
    if kind == "pareto":
        try:
            shape, location = float(spec["shape"]), float(spec["location"])
        except KeyError as exc:
            raise ValidationError(f"pareto spec needs {exc}") from exc
        xs = _pareto_cell_means(shape, location, n_atoms)[::-1]
        return AtomicMeasure(xs, np.full(n_atoms, 1.0 / n_atoms))
    if kind == "uniform":
        try:
            a, b = float(spec["a"]), float(spec["b"])
        except KeyError as exc:
            raise ValidationError(f"uniform spec needs {exc}") from exc
        if not b > a:
            raise ValidationError("uniform spec needs b > a")
        mids = a + (b - a) * (np.arange(n_atoms) + 0.5) / n_atoms
        return AtomicMeasure(mids, np.full(n_atoms, 1.0 / n_atoms))
    raise ValidationError(f"unknown measure spec type {kind!r}")


def pareto_cdf(shape: float, location: float):
    """CDF of the (exact, continuous) Pareto law, for verification targets."""

    def cdf(y):
        y = np.asarray(y, dtype=float)
        out = np.where(y < location, 0.0, 1.0 - (location / np.maximum(y, location)) ** shape)
        return out if out.ndim else float(out)

    return cdf
