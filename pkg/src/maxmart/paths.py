"""Discrete max-continuous paths and the exact path-transform algebra.

Grid semantics: the running supremum of a path is attained at grid points,
which is the discrete counterpart of a continuous running maximum.  Under
this convention the closed-form transform, its group law, its max law and
its inverse hold exactly (to float rounding), which is why the closed form
is the reference implementation and the left-point stochastic integral is
kept only as a discretization oracle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .transforms import TransformProfile

STOP_KINDS = ("hit_barrier", "hit_zero", "breach", "horizon_censored")


@dataclass(frozen=True)
class Path:
    """A path sampled on a strictly increasing time grid starting at 0.

    ``stop_index`` marks absorption: values are constant from it onwards.
    """

    times: np.ndarray
    values: np.ndarray
    stop_index: int | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or x.ndim != 1 or t.size != x.size or t.size == 0:
            raise ValidationError("times and values must be 1-d arrays of equal positive length")
        if t[0] != 0.0:
            raise ValidationError("the time grid must start at 0")
        if t.size > 1 and np.min(np.diff(t)) <= 0:
            raise ValidationError("the time grid must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x))):
            raise ValidationError("path entries must be finite")
        if self.stop_index is not None:
            i = int(self.stop_index)
            if not 0 <= i < t.size:
                raise ValidationError("stop index outside the grid")
            if np.any(x[i:] != x[i]):
                raise ValidationError("values must be constant after the stop index")
            object.__setattr__(self, "stop_index", i)
        t.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", x)

    def __len__(self) -> int:
        return int(self.times.size)

    def replace_values(self, values, stop_index=None) -> "Path":
        return Path(self.times.copy(), values, stop_index)


@dataclass(frozen=True)
class StopEvent:
    kind: str
    index: int
    level: float

    def __post_init__(self):
        if self.kind not in STOP_KINDS:
            raise ValidationError(f"unknown stop kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "index": int(self.index), "level": float(self.level)}


def running_sup(p: Path) -> Path:
    return p.replace_values(np.maximum.accumulate(p.values), p.stop_index)


def _barrier_hit(values: np.ndarray, b: float | None) -> int | None:
    if b is None:
        return None
    hits = np.flatnonzero(values >= b)
    return int(hits[0]) if hits.size else None


def ay_closed_form(p: Path, prof: TransformProfile) -> Path:
    """M_t = U(Xbar_t) - u(Xbar_t) (Xbar_t - X_t) along the grid.

    The path must start at the profile's base point.  When the profile has a
    finite barrier the transform is absorbed at its image from the first grid
    index with X >= b (grid overshoot lands exactly on U(b), the convention
    u(b) = 0).
    """
    x = p.values
    if abs(x[0] - prof.a) > 1e-9 * (1.0 + abs(prof.a)):
        raise DomainError(f"path must start at {prof.a}, got {x[0]} at index 0")
    xbar = np.maximum.accumulate(x)
    hit = _barrier_hit(x, prof.b)
    if hit is not None:
        x = x.copy()
        xbar = xbar.copy()
        x[hit:] = prof.b
        xbar[hit:] = prof.b
    uniq, inv = np.unique(xbar, return_inverse=True)
    m = np.asarray(prof.U(uniq), dtype=float)[inv] - \
        np.asarray(prof.u(uniq), dtype=float)[inv] * (xbar - x)
    stop = hit if hit is not None else p.stop_index
    if hit is not None:
        m[hit:] = m[hit]
    return p.replace_values(m, stop)


def ay_integral_form(p: Path, prof: TransformProfile) -> Path:
    """Left-point sum a* + sum u(Xbar_{t_i}) (X_{t_{i+1}} - X_{t_i}).

    A discretization oracle for :func:`ay_closed_form`; the two coincide in
    the refinement limit but not on a fixed grid.
    """
    x = p.values
    if abs(x[0] - prof.a) > 1e-9 * (1.0 + abs(prof.a)):
        raise DomainError(f"path must start at {prof.a}, got {x[0]} at index 0")
    xbar = np.maximum.accumulate(x)
    hit = _barrier_hit(x, prof.b)
    uniq, inv = np.unique(xbar, return_inverse=True)
    uvals = np.asarray(prof.u(uniq), dtype=float)[inv]
    m = np.empty_like(x)
    m[0] = prof.a_star
    m[1:] = prof.a_star + np.cumsum(uvals[:-1] * np.diff(x))
    stop = p.stop_index
    if hit is not None:
        m[hit:] = m[hit]
        stop = hit
    return p.replace_values(m, stop)


def ay_inverse(m: Path, prof: TransformProfile) -> Path:
    """Undo :func:`ay_closed_form`: X_t = V(Mbar_t) - v(Mbar_t) (Mbar_t - M_t).

    Exact up to the barrier hit because Mbar = U(Xbar) pins the inverse pair.
    """
    vals = m.values
    mbar = np.maximum.accumulate(vals)
    if prof.r_w is not None:
        over = np.flatnonzero(mbar > prof.r_w * (1.0 + 1e-12) + 1e-12)
        if over.size and (m.stop_index is None or over[0] < m.stop_index):
            raise DomainError(f"transformed path exits the range at index {over[0]}")
        mbar = np.minimum(mbar, prof.r_w)
    uniq, inv = np.unique(mbar, return_inverse=True)
    x = np.asarray(prof.V(uniq), dtype=float)[inv]
    vv = np.asarray(prof.v(uniq), dtype=float)[inv]
    gap = mbar - vals
    with np.errstate(invalid="ignore"):
        # v is +inf exactly at the absorbed barrier where the gap is 0
        x = x - np.where(gap == 0.0, 0.0, vv * gap)
    if m.stop_index is not None:
        x[m.stop_index:] = x[m.stop_index]
    return m.replace_values(x, m.stop_index)


def detect_stop(p: Path, kind: str, b: float | None = None, w=None) -> StopEvent:
    """First grid index where the respective condition fires.

    ``hit_barrier``: X >= b; ``hit_zero``: X <= 0; ``breach``: X <= w(Xbar).
    Returns a horizon_censored event at the last index when nothing fires.
    The first-index convention carries the usual O(sqrt(mesh)) overshoot of
    grid hitting times; refine the mesh rather than correct for it.
    """
    x = p.values
    if kind == "hit_barrier":
        if b is None:
            raise ValidationError("hit_barrier detection needs a level")
        idx = np.flatnonzero(x >= b)
        if idx.size:
            return StopEvent("hit_barrier", int(idx[0]), float(b))
    elif kind == "hit_zero":
        idx = np.flatnonzero(x <= 0.0)
        if idx.size:
            return StopEvent("hit_zero", int(idx[0]), 0.0)
    elif kind == "breach":
        if w is None:
            raise ValidationError("breach detection needs a drawdown function")
        xbar = np.maximum.accumulate(x)
        levels = np.asarray(w(xbar), dtype=float)
        idx = np.flatnonzero(x <= levels)
        if idx.size:
            return StopEvent("breach", int(idx[0]), float(levels[idx[0]]))
    else:
        raise ValidationError(f"unknown stop kind {kind!r}")
    return StopEvent("horizon_censored", len(p) - 1, float(x[-1]))


def write_path_csv(p: Path, fp) -> None:
    writer = csv.writer(fp)
    writer.writerow(["t", "x"])
    for t, x in zip(p.times, p.values):
        writer.writerow([format(t, ".17g"), format(x, ".17g")])


def read_path_csv(fp) -> Path:
    reader = csv.reader(fp)
    header = next(reader, None)
    if header is None or [h.strip() for h in header[:2]] != ["t", "x"]:
        raise ValidationError("path CSV must start with a 't,x' header")
    ts, xs = [], []
    for row in reader:
        if not row:
            continue
        try:
            ts.append(float(row[0]))
            xs.append(float(row[1]))
        except (IndexError, ValueError) as exc:
            raise ValidationError(f"malformed path CSV row {row!r}") from exc
    return Path(np.asarray(ts), np.asarray(xs))
