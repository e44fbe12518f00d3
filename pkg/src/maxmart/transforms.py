"""Measure-to-function and measure-to-measure transforms.

The pivot object is a :class:`TransformProfile`: a strictly increasing
function ``U`` with right-continuous derivative ``u``, its inverse ``V``
with ``v(y) = 1/u(V(y))``, and the associated drawdown function
``w(y) = y - V(y)/v(y)``.  Profiles come from three places:

* closed-form families (identity / affine / power / log / exp) and their
  compositions -- exact to machine precision;
* an :class:`~maxmart.measures.AtomicMeasure` -- piecewise affine and exact;
* user coefficients (``phi`` of the max-driven SDE, or a drawdown ``w``)
  through adaptive quadrature plus monotone root finding.

The measure-to-measure layer holds the integrated-quantile transform
(AVaR as a quantile), its dual tail representation, the concave-envelope
inverse operator and the two order comparators.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

from .errors import DomainError, IntegrabilityError, NoSolutionError, ValidationError
from .measures import AtomicMeasure, OrderVerdict, QuantileProfile

QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-12, limit=400)


def _vec(f: Callable[[float], float]) -> Callable:
    vf = np.vectorize(f, otypes=[float])

    def g(x):
        out = vf(x)
        return out if np.ndim(x) else float(out)

    return g


@dataclass(frozen=True)
class TransformProfile:
    """The bundle (U, u, V, v, w) driving every max-based path transform.

    ``U`` is non-decreasing on ``[a, b]`` with ``U(a) = a_star``; ``u`` is its
    right-continuous derivative, positive on ``[a, b)``.  ``b is None`` means
    no barrier (the domain is all of ``[a, oo)``), likewise ``r_w is None``
    means the drawdown function satisfies ``w(y) < y`` everywhere.  All five
    callables accept scalars or numpy arrays.
    """

    U: Callable
    u: Callable
    V: Callable
    v: Callable
    w: Callable
    a: float
    a_star: float
    b: float | None = None
    r_w: float | None = None
    tag: str = ""

    def inverse(self) -> "TransformProfile":
        """The profile generating the inverse transform (V becomes U)."""
        U, u, V, v = self.U, self.u, self.V, self.v

        def w_inv(x):
            x = np.asarray(x, dtype=float)
            out = x - np.asarray(U(x), dtype=float) / np.maximum(np.asarray(u(x), dtype=float), 1e-300)
            return out if out.ndim else float(out)

        return TransformProfile(
            U=V, u=v, V=U, v=u, w=w_inv,
            a=self.a_star, a_star=self.a, b=self.r_w, r_w=self.b,
            tag=f"inverse({self.tag})" if self.tag else "inverse",
        )


def validate_profile(prof: TransformProfile, xs, tol=1e-10) -> None:
    """Check the defining identities of a profile on a grid of x values."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(prof.U(xs), dtype=float)
    back = np.asarray(prof.V(ys), dtype=float)
    if np.max(np.abs(back - xs)) > tol * (1.0 + np.max(np.abs(xs))):
        raise ValidationError("V is not the inverse of U on the test grid")
    wd = np.asarray(prof.w(ys), dtype=float)
    rhs = ys - np.asarray(prof.V(ys), dtype=float) / np.asarray(prof.v(ys), dtype=float)
    if np.max(np.abs(wd - rhs)) > tol * (1.0 + np.max(np.abs(ys))):
        raise ValidationError("w does not satisfy w(y) = y - V(y)/v(y) on the test grid")


# -- closed-form families ----------------------------------------------------

def identity_profile(a: float = 0.0) -> TransformProfile:
    ident = _vec(float)
    return TransformProfile(
        U=ident, u=_vec(lambda x: 1.0), V=ident, v=_vec(lambda y: 1.0),
        w=_vec(lambda y: 0.0), a=a, a_star=a, tag="identity",
    )


def affine_profile(slope: float, intercept: float, a: float = 0.0) -> TransformProfile:
    if slope <= 0:
        raise ValidationError("affine profile needs a positive slope")
    return TransformProfile(
        U=lambda x: intercept + slope * np.asarray(x, dtype=float),
        u=_vec(lambda x: slope),
        V=lambda y: (np.asarray(y, dtype=float) - intercept) / slope,
        v=_vec(lambda y: 1.0 / slope),
        w=_vec(lambda y: intercept),
        a=a, a_star=intercept + slope * a, tag="affine",
    )


def power_profile(gamma: float, a: float = 1.0) -> TransformProfile:
    """U(x) = x^(1-gamma)/(1-gamma) on x > 0; drawdown w(y) = gamma*y."""
    if not 0.0 < gamma < 1.0:
        raise ValidationError("power profile needs gamma in (0, 1)")
    if a <= 0:
        raise ValidationError("power profile needs a positive starting point")
    g1 = 1.0 - gamma
    return TransformProfile(
        U=lambda x: np.asarray(x, dtype=float) ** g1 / g1,
        u=lambda x: np.asarray(x, dtype=float) ** (-gamma),
        V=lambda y: (g1 * np.asarray(y, dtype=float)) ** (1.0 / g1),
        v=lambda y: (g1 * np.asarray(y, dtype=float)) ** (gamma / g1),
        w=lambda y: gamma * np.asarray(y, dtype=float),
        a=a, a_star=a**g1 / g1, tag=f"power({gamma})",
    )


def log_profile(a: float = 1.0) -> TransformProfile:
    if a <= 0:
        raise ValidationError("log profile needs a positive starting point")
    return TransformProfile(
        U=lambda x: np.log(np.asarray(x, dtype=float)),
        u=lambda x: 1.0 / np.asarray(x, dtype=float),
        V=lambda y: np.exp(np.asarray(y, dtype=float)),
        v=lambda y: np.exp(np.asarray(y, dtype=float)),
        w=lambda y: np.asarray(y, dtype=float) - 1.0,
        a=a, a_star=math.log(a), tag="log",
    )


def exp_profile(a: float = 0.0) -> TransformProfile:
    return TransformProfile(
        U=lambda x: np.exp(np.asarray(x, dtype=float)),
        u=lambda x: np.exp(np.asarray(x, dtype=float)),
        V=lambda y: np.log(np.asarray(y, dtype=float)),
        v=lambda y: 1.0 / np.asarray(y, dtype=float),
        w=lambda y: np.asarray(y, dtype=float) * (1.0 - np.log(np.asarray(y, dtype=float))),
        a=a, a_star=math.exp(a), tag="exp",
    )


def compose_profiles(outer: TransformProfile, inner: TransformProfile) -> TransformProfile:
    """Profile of the composed map U_out o U_in.

    ``outer`` must be defined from ``inner.a_star`` on; the composed process
    transform then satisfies the group law exactly on grids.
    """
    if abs(outer.a - inner.a_star) > 1e-9 * (1.0 + abs(outer.a)):
        raise ValidationError("outer profile must start where the inner one lands")

    def U(x):
        return outer.U(inner.U(x))

    def u(x):
        return np.asarray(outer.u(inner.U(x)), dtype=float) * np.asarray(inner.u(x), dtype=float)

    def V(y):
        return inner.V(outer.V(y))

    def v(y):
        yo = outer.V(y)
        return np.asarray(inner.v(yo), dtype=float) * np.asarray(outer.v(y), dtype=float)

    def w(y):
        y = np.asarray(y, dtype=float)
        out = y - np.asarray(V(y), dtype=float) / np.asarray(v(y), dtype=float)
        return out if out.ndim else float(out)

    candidates = []
    if inner.b is not None:
        candidates.append(float(inner.b))
    if outer.b is not None:
        candidates.append(float(inner.V(outer.b)))
    b = min(candidates) if candidates else None
    r_w = float(U(b)) if b is not None else None
    return TransformProfile(
        U=U, u=u, V=V, v=v, w=w, a=inner.a, a_star=float(outer.U(inner.a_star)),
        b=b, r_w=r_w, tag=f"{outer.tag}o{inner.tag}",
    )


# -- profiles from measures ---------------------------------------------------

def profile_from_measure(mu: AtomicMeasure) -> TransformProfile:
    """Exact piecewise-affine profile with U(x) = avar(mu, 1/x) on x >= 1.

    The barrier is b = 1/tail(r); beyond it U is constant at r and u = 0.
    The drawdown function steps through the atom locations and is the
    right-continuous inverse of the barycentre.
    """
    tails = mu._tails
    bx = 1.0 / tails                      # ascending, bx[0] = 1
    by = mu._suffix_mean[:-1] / tails     # U(bx[j]) = barycentre at atom j
    xs = mu.xs
    k = xs.size
    slopes = np.diff(by) / np.diff(bx) if k > 1 else np.zeros(0)
    r = float(by[-1])
    b = float(bx[-1])

    def U(x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, bx, by)
        return out if out.ndim else float(out)

    def u(x):
        x = np.asarray(x, dtype=float)
        j = np.clip(np.searchsorted(bx, x, side="right") - 1, 0, max(k - 2, 0))
        out = np.where(x >= b, 0.0, slopes[j] if k > 1 else 0.0)
        return out if out.ndim else float(out)

    def V(y):
        y = np.asarray(y, dtype=float)
        out = np.interp(y, by, bx)
        return out if out.ndim else float(out)

    def v(y):
        y = np.asarray(y, dtype=float)
        j = np.clip(np.searchsorted(by, y, side="right") - 1, 0, max(k - 2, 0))
        with np.errstate(divide="ignore"):
            out = np.where(y >= r, np.inf, 1.0 / slopes[j] if k > 1 else np.inf)
        return out if out.ndim else float(out)

    def w(y):
        y = np.asarray(y, dtype=float)
        j = np.clip(np.searchsorted(by, y, side="right") - 1, 0, k - 1)
        out = np.where(y >= r, y, xs[j])
        return out if out.ndim else float(out)

    return TransformProfile(
        U=U, u=u, V=V, v=v, w=w,
        a=1.0, a_star=float(by[0]), b=b, r_w=r, tag="measure",
    )


def hl_transform(mu: AtomicMeasure) -> QuantileProfile:
    """The measure whose tail quantile is lam -> avar(mu, lam), exactly.

    On each tail segment avar is const + intercept/lam where the intercept is
    the affine intercept of the integrated quantile, so the result lives in
    the closed-form profile family.  Its support is [mean, r] and the top
    atom survives with its original mass.
    """
    tails = mu._tails
    t_next = np.concatenate((tails[1:], [0.0]))
    intercepts = np.maximum(mu._suffix_mean[1:] - mu.xs * t_next, 0.0)
    bk = np.concatenate(([0.0], tails[::-1]))
    return QuantileProfile(bkpts=bk, consts=mu.xs[::-1].copy(), hypers=intercepts[::-1].copy())


def hl_tail_dual(mu: AtomicMeasure, y: float) -> float:
    """Tail of the maximal-law transform as inf_{z>0} C(y - z)/z.

    The objective has constant sign of derivative between call-function kinks,
    so scanning strikes at the atoms below y is exact.
    """
    y = float(y)
    if not mu.mean() < y < mu.hi:
        raise DomainError("dual tail is defined strictly between the mean and the top of support")
    ks = mu.xs[mu.xs < y]
    vals = mu.call_fn(ks) / (y - ks)
    return float(np.min(vals))


# -- ODE solution from a terminal payoff --------------------------------------

def u_from_h(h: Callable, constant_from: float | None = None,
             check_integrability: bool = True) -> Callable:
    """Solve U - x U' = h with U(x)/x -> 0, via U(x) = int_0^1 h(x/s) ds.

    ``h`` must be locally bounded with h(s)/s^2 integrable at infinity; when
    ``constant_from = b`` is given, h is read as constant on [b, oo) and the
    returned U is exactly h(b) there.  For non-decreasing h the result is
    concave and non-decreasing.
    """

    def U_scalar(x: float) -> float:
        if x <= 0:
            raise DomainError("U from a terminal payoff is defined for x > 0")
        if constant_from is not None and x >= constant_from:
            return float(h(constant_from))
        with warnings.catch_warnings():
            warnings.simplefilter("error", IntegrationWarning)
            try:
                if constant_from is not None:
                    t0 = x / constant_from
                    val, err = quad(lambda t: h(x / t), t0, 1.0, **QUAD_OPTS)
                    val += t0 * float(h(constant_from))
                else:
                    val, err = quad(lambda t: h(x / t), 0.0, 1.0, **QUAD_OPTS)
            except (IntegrationWarning, OverflowError) as exc:
                raise IntegrabilityError(f"tail integral of h does not converge: {exc}") from exc
        if check_integrability and (not math.isfinite(val) or err > 1e-7 * (1.0 + abs(val))):
            raise IntegrabilityError("tail integral of h does not converge")
        return float(val)

    return _vec(U_scalar)


# -- profiles from SDE coefficients -------------------------------------------

class _CumulativeIntegral:
    """Cached antiderivative F(y) = int_origin^y f, refined incrementally.

    Evaluations are anchored at previously computed points so that sorted
    sweeps cost one short quadrature per new point.
    """

    def __init__(self, fn, origin, points=(), validate=None):
        self.fn = fn
        self.origin = float(origin)
        self.points = sorted(float(p) for p in points)
        self.validate = validate
        self._ys = [self.origin]
        self._vals = [0.0]

    def __call__(self, y: float) -> float:
        y = float(y)
        i = bisect.bisect_right(self._ys, y) - 1
        if i >= 0 and self._ys[i] == y:
            return self._vals[i]
        # nearest anchor (below if any, else the first one above)
        y0, v0 = (self._ys[i], self._vals[i]) if i >= 0 else (self._ys[0], self._vals[0])
        lo, hi = min(y0, y), max(y0, y)
        if self.validate is not None:
            self.validate(lo, hi)
        inner = [p for p in self.points if lo < p < hi]
        val, _ = quad(self.fn, lo, hi, points=inner or None, **QUAD_OPTS)
        out = v0 + (val if y >= y0 else -val)
        j = bisect.bisect_left(self._ys, y)
        self._ys.insert(j, y)
        self._vals.insert(j, out)
        return out


def _monotone_inverse(V, a_star, name, hi_hint=None):
    """Scalar inverse of an increasing V by bracket expansion plus brentq."""

    def inv(x: float) -> float:
        x = float(x)
        lo = a_star
        v_lo = V(lo)
        if x < v_lo - 1e-12 * (1.0 + abs(v_lo)):
            raise DomainError(f"{name}: value {x} below the transform range")
        if x <= v_lo:
            return lo
        step = max(1.0, abs(a_star)) if hi_hint is None else max(hi_hint - a_star, 1e-6)
        hi = lo + step
        for _ in range(200):
            if hi_hint is not None:
                hi = min(hi, hi_hint)
            if V(hi) >= x:
                break
            if hi_hint is not None and hi >= hi_hint:
                raise DomainError(f"{name}: value {x} beyond the transform range")
            lo, hi = hi, lo + 2 * (hi - lo)
        else:
            raise IntegrabilityError(f"{name}: could not bracket the inverse at {x}")
        return float(brentq(lambda t: V(t) - x, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200))

    return inv


def v_from_w(w: Callable, a: float, a_star: float, r_w: float | None = None,
             breakpoints=()) -> Callable:
    """Scale function of a drawdown constraint: V(y) = a exp(int du/(u - w(u))).

    Requires w(u) < u on the domain; raises otherwise.  Beyond ``r_w`` the
    function is +inf by convention.
    """
    if a <= 0:
        raise ValidationError("drawdown scale function needs a > 0")

    def integrand(s):
        gap = s - w(s)
        if gap <= 0:
            raise ValidationError(f"invalid drawdown function: w({s}) >= {s}")
        return 1.0 / gap

    cum = _CumulativeIntegral(integrand, a_star, points=breakpoints)

    def V_scalar(y: float) -> float:
        y = float(y)
        if r_w is not None and y >= r_w:
            return math.inf
        return a * math.exp(cum(y))

    return _vec(V_scalar)


def profile_from_w(w: Callable, a: float, a_star: float, r_w: float | None = None,
                   breakpoints=(), barrier_x: float | None = None) -> TransformProfile:
    """Full transform profile built from a drawdown function by quadrature."""
    V = v_from_w(w, a, a_star, r_w=r_w, breakpoints=breakpoints)

    def v_scalar(y: float) -> float:
        return float(V(y)) / (y - float(np.asarray(w(y), dtype=float)))

    if barrier_x is None and r_w is not None and math.isfinite(r_w):
        lim = V(np.nextafter(r_w, a_star))
        barrier_x = float(lim) if math.isfinite(lim) else None

    U_scalar = _monotone_inverse(lambda y: float(V(y)), a_star, "drawdown profile",
                                 hi_hint=r_w)

    def u_scalar(x: float) -> float:
        y = U_scalar(x)
        return (y - float(np.asarray(w(y), dtype=float))) / x

    return TransformProfile(
        U=_vec(U_scalar), u=_vec(u_scalar), V=V, v=_vec(v_scalar), w=_vec(w),
        a=float(a), a_star=float(a_star), b=barrier_x, r_w=r_w, tag="drawdown",
    )


def profile_from_phi(phi: Callable, a: float, a_star: float) -> TransformProfile:
    """Transform profile of the max-driven coefficient phi: V(y) = a + int dy/phi.

    When 1/phi is integrable at infinity the range of V is bounded and its
    supremum is the explosion barrier ``b``.
    """

    def inv_phi(s):
        p = float(np.asarray(phi(s), dtype=float))
        if p <= 0:
            raise ValidationError(f"invalid coefficient: phi({s}) <= 0")
        return 1.0 / p

    cum = _CumulativeIntegral(inv_phi, a_star)

    def V_scalar(y: float) -> float:
        return a + cum(float(y))

    b = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            total, err = quad(inv_phi, a_star, np.inf, **QUAD_OPTS)
            if math.isfinite(total) and err < 1e-6 * (1.0 + abs(total)):
                b = a + total
        except Exception:
            b = None

    U_scalar = _monotone_inverse(V_scalar, a_star, "bachelier profile")

    def u_scalar(x: float) -> float:
        return float(np.asarray(phi(U_scalar(x)), dtype=float))

    def w_scalar(y: float) -> float:
        return y - V_scalar(y) * float(np.asarray(phi(y), dtype=float))

    return TransformProfile(
        U=_vec(U_scalar), u=_vec(u_scalar), V=_vec(V_scalar),
        v=_vec(lambda y: inv_phi(y)), w=_vec(w_scalar),
        a=float(a), a_star=float(a_star), b=b, r_w=None, tag="bachelier",
    )


# -- concave envelope and the inverse transform operator ----------------------

@dataclass(frozen=True)
class PiecewiseLinearConcave:
    """A concave piecewise-linear function through (lams, vals), vals[0] = 0."""

    lams: np.ndarray
    vals: np.ndarray
    _slopes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lams = np.asarray(self.lams, dtype=float)
        vals = np.asarray(self.vals, dtype=float)
        if lams.size != vals.size or lams.size < 2:
            raise ValidationError("need matching breakpoint arrays with >= 2 points")
        if np.min(np.diff(lams)) <= 0:
            raise ValidationError("breakpoints must be strictly increasing")
        if vals[0] != 0.0 or lams[0] != 0.0:
            raise ValidationError("the envelope must pass through the origin")
        slopes = np.diff(vals) / np.diff(lams)
        if np.any(np.diff(slopes) >= 0):
            raise ValidationError("slopes must be strictly decreasing")
        for name, val in (("lams", lams), ("vals", vals), ("_slopes", slopes)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def slopes(self) -> np.ndarray:
        return self._slopes

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = np.interp(lam, self.lams, self.vals)
        return out if out.ndim else float(out)


def _upper_concave_hull(pts: np.ndarray) -> np.ndarray:
    """Monotone-chain upper hull of points sorted by first coordinate."""
    hull: list[np.ndarray] = []
    for p in pts:
        while len(hull) >= 2:
            o, q = hull[-2], hull[-1]
            cross = (q[0] - o[0]) * (p[1] - o[1]) - (q[1] - o[1]) * (p[0] - o[0])
            if cross >= 0:      # middle point on or below the chord: drop it
                hull.pop()
            else:
                break
        hull.append(p)
    return np.asarray(hull)


def concave_envelope(nu: AtomicMeasure | QuantileProfile,
                     samples_per_segment: int = 64) -> PiecewiseLinearConcave:
    """Smallest concave majorant of lam -> lam * qbar_nu(lam) on [0, 1].

    For an atomic measure the graph is a union of chords through the origin,
    so hulling the tail breakpoints is exact.  Profile segments make the map
    affine as well; they are still sampled at ``samples_per_segment`` points
    so that future curved segment families stay covered (collinear samples
    are merged away by the hull).
    """
    if isinstance(nu, AtomicMeasure):
        tails = nu._tails
        pts = np.column_stack((tails, tails * nu.xs))[::-1]
        pts = np.vstack(([0.0, 0.0], pts))
    else:
        if not nu.bounded_top:
            raise NoSolutionError(
                "no measure has a maximal-law transform dominating this target: "
                "lam * qbar(lam) does not vanish at 0")
        rows = [(0.0, 0.0)]
        for j in range(nu.consts.size):
            lo, hi = nu.bkpts[j], nu.bkpts[j + 1]
            lams = np.linspace(lo, hi, samples_per_segment + 1)[1:]
            rows.extend(zip(lams, nu.consts[j] * lams + nu.hypers[j]))
        pts = np.asarray(rows)
    hull = _upper_concave_hull(pts)
    lams, vals = hull[:, 0], hull[:, 1]
    # merge numerically collinear hull segments
    keep = [0]
    for i in range(1, lams.size - 1):
        s_prev = (vals[i] - vals[keep[-1]]) / (lams[i] - lams[keep[-1]])
        s_next = (vals[i + 1] - vals[i]) / (lams[i + 1] - lams[i])
        if s_next < s_prev - 1e-12 * (1.0 + abs(s_prev)):
            keep.append(i)
    keep.append(lams.size - 1)
    return PiecewiseLinearConcave(lams[keep], vals[keep])


def delta_operator(nu: AtomicMeasure | QuantileProfile,
                   samples_per_segment: int = 64) -> AtomicMeasure:
    """The increasing-convex-order minimal measure whose maximal-law transform
    dominates ``nu`` stochastically.

    Reads the concave envelope of lam * qbar_nu(lam) as an integrated tail
    quantile: hull slopes are the atom locations, breakpoint gaps the weights.
    Inverts the maximal-law transform exactly: applied to such a transform it
    returns the original atoms.
    """
    env = concave_envelope(nu, samples_per_segment=samples_per_segment)
    widths = np.diff(env.lams)[::-1]
    locs = env.slopes[::-1]
    keep = widths >= 1e-12
    widths, locs = widths[keep], locs[keep]
    widths = widths / widths.sum()
    return AtomicMeasure(locs, widths)


# -- order comparators ---------------------------------------------------------

def _as_profile(m) -> QuantileProfile:
    return QuantileProfile.from_atomic(m) if isinstance(m, AtomicMeasure) else m


def stochastic_dominates(rho, nu, tol: float = 1e-9) -> OrderVerdict:
    """Does rho dominate nu in the stochastic order (rho tail >= nu tail)?

    Atomic pairs are compared through tails on the merged atom grid (gap in
    probability units).  As soon as a profile is involved the comparison runs
    on merged quantile breakpoints, where segment differences are monotone,
    making the check exact; the gap is then in value units.
    """
    if isinstance(rho, AtomicMeasure) and isinstance(nu, AtomicMeasure):
        grid = np.union1d(rho.xs, nu.xs)
        gaps = np.asarray(rho.tail(grid)) - np.asarray(nu.tail(grid))
        i = int(np.argmin(gaps))
        return OrderVerdict(bool(gaps[i] >= -tol), float(gaps[i]), float(grid[i]), tol)
    pr, pn = _as_profile(rho), _as_profile(nu)
    lams = np.union1d(pr.bkpts, pn.bkpts)
    evals = []
    for lo, hi in zip(lams[:-1], lams[1:]):
        # the quantile difference is monotone on each merged segment, so the
        # attained right end plus the open left-end limit bound it exactly
        evals.append((hi, float(pr.tail_quantile(hi)) - float(pn.tail_quantile(hi))))
        if lo > 0.0:
            jr = min(np.searchsorted(pr.bkpts, lo, side="right") - 1, pr.consts.size - 1)
            jn = min(np.searchsorted(pn.bkpts, lo, side="right") - 1, pn.consts.size - 1)
            qr = pr.consts[jr] + pr.hypers[jr] / lo
            qn = pn.consts[jn] + pn.hypers[jn] / lo
            evals.append((lo, float(qr - qn)))
    lam_w, gap_w = min(evals, key=lambda t: t[1])
    return OrderVerdict(bool(gap_w >= -tol), float(gap_w), float(lam_w), tol)


def icx_dominates(rho: AtomicMeasure, nu: AtomicMeasure, tol: float = 1e-9) -> OrderVerdict:
    """Does rho dominate nu in the increasing convex order (call functions)?

    Exact for atomic measures: the call-function difference is piecewise
    linear with kinks only at the merged atoms.
    """
    if not (isinstance(rho, AtomicMeasure) and isinstance(nu, AtomicMeasure)):
        raise ValidationError("increasing convex order comparison needs atomic carriers")
    grid = np.union1d(rho.xs, nu.xs)
    gaps = np.asarray(rho.call_fn(grid)) - np.asarray(nu.call_fn(grid))
    i = int(np.argmin(gaps))
    return OrderVerdict(bool(gaps[i] >= -tol), float(gaps[i]), float(grid[i]), tol)
