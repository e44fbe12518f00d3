"""Solvers for the two max-driven SDE families.

Each equation is solved twice, by independent routes:

* ``solve_*_closed`` -- the authoritative solution, a path transform built
  from the coefficient (scale function + inversion); pathwise exact on the
  grid.
* ``solve_*_euler`` -- a left-point explicit recursion, kept purely as a
  cross-validation oracle.  The two converge to each other under mesh
  refinement.

``dY = phi(Ybar) dX`` (coefficient in the solution's own max) and
``dY = (Y - w(Ybar)) dX / X`` (relative drawdown form, positive driver) are
equivalent under the scale-function link, which the tests pin down.
"""

from __future__ import annotations

import numpy as np

from .errors import ConstraintError, DomainError
from .paths import Path, StopEvent, ay_closed_form
from .transforms import TransformProfile, profile_from_phi, profile_from_w


def solve_bachelier_closed(x: Path, phi=None, a_star: float | None = None,
                           profile: TransformProfile | None = None) -> Path:
    """Strong solution of dY = phi(Ybar) dX, Y_0 = a_star, via the transform.

    Builds V(y) = a + int_{a_star}^y ds/phi(s), inverts it, and applies the
    closed-form transform.  If 1/phi is integrable at infinity the range of V
    is bounded and the solution explodes when X reaches V(inf); the returned
    path is absorbed there (stop index set).
    """
    if profile is None:
        if phi is None or a_star is None:
            raise DomainError("need either a coefficient and start value or a profile")
        profile = profile_from_phi(phi, a=float(x.values[0]), a_star=float(a_star))
    return ay_closed_form(x, profile)


def solve_bachelier_euler(x: Path, phi, a_star: float, x_cap: float | None = None) -> Path:
    """Left-point Euler oracle Y_{i+1} = Y_i + phi(Ybar_i) (X_{i+1} - X_i).

    ``x_cap`` optionally absorbs the recursion once the driver reaches the
    explosion level of the closed-form solution.
    """
    vals = x.values
    y = np.empty_like(vals)
    y[0] = a_star
    ybar = a_star
    stop = None
    for i in range(vals.size - 1):
        if x_cap is not None and vals[i] >= x_cap:
            y[i + 1:] = y[i]
            stop = i
            break
        y[i + 1] = y[i] + float(np.asarray(phi(ybar), dtype=float)) * (vals[i + 1] - vals[i])
        ybar = max(ybar, y[i + 1])
    return x.replace_values(y, stop if stop is not None else x.stop_index)


def solve_drawdown_closed(x: Path, w=None, a_star: float | None = None,
                          profile: TransformProfile | None = None,
                          r_w: float | None = None,
                          w_breakpoints=()) -> tuple[Path, StopEvent]:
    """Solution of dY = (Y - w(Ybar)) dX / X from a positive driver.

    Stops at the first grid index where the driver leaves (0, V(r_w-)); the
    event labels which side fired.  At a clean exit (driver exactly 0 or at
    the barrier) the solution lands exactly on its drawdown level; a driver
    overshooting below 0 is reported as the same event with the realized
    level, matching the converse-direction convention.
    """
    a = float(x.values[0])
    if a <= 0:
        raise DomainError("drawdown equation needs a positive driver start")
    if profile is None:
        if w is None or a_star is None:
            raise DomainError("need either a drawdown function and start value or a profile")
        profile = profile_from_w(w, a=a, a_star=float(a_star), r_w=r_w,
                                 breakpoints=w_breakpoints)
    y = ay_closed_form(x, profile)
    zero_hits = np.flatnonzero(x.values <= 0.0)
    hit0 = int(zero_hits[0]) if zero_hits.size else None
    hitb = y.stop_index  # set by the transform when the driver reaches the barrier
    if hit0 is not None and (hitb is None or hit0 <= hitb):
        vals = y.values.copy()
        vals[hit0:] = vals[hit0]
        y = y.replace_values(vals, hit0)
        event = StopEvent("hit_zero", hit0, float(y.values[hit0]))
    elif hitb is not None:
        event = StopEvent("hit_barrier", hitb, float(y.values[hitb]))
    else:
        event = StopEvent("horizon_censored", len(y) - 1, float(y.values[-1]))
    return y, event


def solve_drawdown_euler(x: Path, w, a_star: float) -> Path:
    """Left-point Euler oracle of the relative drawdown recursion.

    Freezes once the driver becomes nonpositive (the relative increment is
    no longer defined).
    """
    vals = x.values
    if vals[0] <= 0:
        raise DomainError("drawdown equation needs a positive driver start")
    y = np.empty_like(vals)
    y[0] = a_star
    ybar = a_star
    stop = None
    for i in range(vals.size - 1):
        if vals[i] <= 0.0:
            y[i + 1:] = y[i]
            stop = i
            break
        lvl = float(np.asarray(w(ybar), dtype=float))
        y[i + 1] = y[i] + (y[i] - lvl) * (vals[i + 1] - vals[i]) / vals[i]
        ybar = max(ybar, y[i + 1])
    return x.replace_values(y, stop if stop is not None else x.stop_index)


def recover_driver(y: Path, w=None, a: float | None = None,
                   profile: TransformProfile | None = None,
                   r_w: float | None = None,
                   w_breakpoints=()) -> Path:
    """Invert the drawdown solution: X = v(Ybar) (Y - w(Ybar)), pathwise.

    The input must satisfy the drawdown constraint strictly before its final
    (or declared stop) index; an earlier violation raises with the offending
    index.  At a terminal breach the recovered driver hits 0 exactly.
    """
    if profile is None:
        if w is None or a is None:
            raise DomainError("need either a drawdown function and driver start or a profile")
        profile = profile_from_w(w, a=float(a), a_star=float(y.values[0]), r_w=r_w,
                                 breakpoints=w_breakpoints)
    ybar = np.maximum.accumulate(y.values)
    levels = np.asarray(profile.w(ybar), dtype=float)
    breaches = np.flatnonzero(y.values <= levels)
    last = len(y) - 1 if y.stop_index is None else y.stop_index
    if breaches.size and breaches[0] < last:
        raise ConstraintError(
            f"drawdown constraint violated at index {int(breaches[0])} before the declared stop",
            index=int(breaches[0]))
    inv = profile.inverse()
    return ay_closed_form(y, inv)
