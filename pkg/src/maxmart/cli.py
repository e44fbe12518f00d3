"""Command-line entry point.

Subcommands: measure, transform, solve, simulate, verify, embed, dominate,
floor.  Reports are written as canonical JSON: keys sorted, every float
printed with a fixed 17-significant-digit format, so the same argv and seed
produce byte-identical files.  Exit codes: 0 success, 1 I/O failure,
2 validation or domain error, 3 verification out of tolerance or
inconclusive.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys

import numpy as np

from . import __version__
from .errors import MaxmartError
from .measures import AtomicMeasure, measure_from_spec
from .montecarlo import (GenSpec, ecdf, generate, last_passage_report,
                         uniform_law_report)
from .paths import read_path_csv, write_path_csv
from .sde import solve_bachelier_closed, solve_drawdown_closed
from .transforms import (delta_operator, hl_tail_dual, hl_transform,
                         power_profile, profile_from_measure)
from .embedding import dominance_report, embed_report, floor_report

GEN_ALIASES = {"brownian": "brownian", "exp": "exp_martingale",
               "bm0": "bm_stopped_at_zero", "exit": "exit_interval"}


# -- canonical JSON -------------------------------------------------------------

def _canon(obj) -> str:
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: kv[0])
        return "{" + ",".join(f"{json.dumps(str(k))}:{_canon(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_canon(v) for v in obj) + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return format(x, ".17g")
    return json.dumps(obj)


def write_report(report_dict: dict, out_path: str | None, provenance: dict) -> None:
    payload = dict(report_dict)
    payload["provenance"] = provenance
    text = _canon(payload) + "\n"
    if out_path:
        with open(out_path, "w") as fp:
            fp.write(text)
    else:
        sys.stdout.write(text)


def _provenance(spec_obj, seed, grid) -> dict:
    blob = _canon(spec_obj).encode()
    return {
        "spec_hash": hashlib.sha256(blob).hexdigest(),
        "seed": seed,
        "grid": grid,
        "version": __version__,
    }


def _load_json(path: str) -> dict:
    with open(path) as fp:
        return json.load(fp)


# -- shared argument groups -------------------------------------------------------

def _add_mc_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--paths", type=int, default=10000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--horizon", type=float, default=40.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None, help="report JSON path (default: stdout)")
    p.add_argument("--emit-plot-data", default=None, metavar="CSV",
                   help="write ECDF-vs-target curves for external plotting")


def _emit_plot(path: str | None, samples, cdf) -> None:
    if not path:
        return
    F = ecdf(samples)
    ys = np.quantile(F.samples, np.linspace(0.001, 0.999, 500))
    with open(path, "w") as fp:
        fp.write("y,ecdf,target\n")
        for y in ys:
            fp.write(f"{y:.17g},{float(F(y)):.17g},{float(cdf(y)):.17g}\n")


# -- subcommand handlers ----------------------------------------------------------

def _cmd_measure(args) -> int:
    spec = _load_json(args.spec)
    mu = measure_from_spec(spec, n_atoms=args.n_atoms)
    op = args.op
    if op == "tail":
        val = mu.tail(_req(args.x, "--x"))
    elif op == "quantile":
        val = mu.tail_quantile(_req(args.lam, "--lambda"))
    elif op == "call":
        val = mu.call_fn(_req(args.k, "--k"))
    elif op == "avar":
        val = mu.avar(_req(args.lam, "--lambda"))
    elif op == "avar-dual":
        val = mu.avar_via_calls(_req(args.lam, "--lambda"))
    elif op == "barycentre":
        val = mu.barycentre(_req(args.x, "--x"))
    elif op == "hl-tail":
        val = hl_tail_dual(mu, _req(args.x, "--x"))
    else:  # mean
        val = mu.mean()
    print(repr(float(val)))
    return 0


def _req(v, name):
    if v is None:
        raise MaxmartError(f"this operation needs {name}")
    return v


def _cmd_transform(args) -> int:
    spec = _load_json(args.spec)
    mu = measure_from_spec(spec, n_atoms=args.n_atoms)
    if args.op == "hl":
        out = hl_transform(mu).to_dict()
    elif args.op == "delta":
        nu = hl_transform(mu) if args.of_hl else mu
        out = delta_operator(nu).to_spec()
    else:  # profile
        prof = profile_from_measure(mu)
        xs = np.linspace(prof.a, prof.b if prof.b is not None else prof.a + 10.0, args.table_points)
        ys = np.asarray(prof.U(xs), dtype=float)
        out = {
            "type": "transform_profile", "tag": prof.tag,
            "a": prof.a, "a_star": prof.a_star,
            "b": prof.b, "r_w": prof.r_w,
            "x": list(map(float, xs)), "U": list(map(float, ys)),
            "u": list(map(float, np.asarray(prof.u(xs), dtype=float))),
            "w": list(map(float, np.asarray(prof.w(ys), dtype=float))),
        }
    write_report(out, args.out, _provenance(spec, None, {}))
    return 0


def _coeff_profile(coeff: dict, a: float, a_star: float):
    kind = coeff.get("type")
    if kind == "power":
        prof = power_profile(float(coeff["gamma"]), a=a)
        return prof, prof.w
    if kind == "measure":
        mu = measure_from_spec(coeff["measure"])
        prof = profile_from_measure(mu)
        return prof, prof.w
    raise MaxmartError(f"unknown coefficient type {kind!r}")


def _cmd_solve(args) -> int:
    coeff = _load_json(args.coeff)
    with open(args.driver) as fp:
        driver = read_path_csv(fp)
    a = float(driver.values[0])
    if args.eq == "bachelier":
        if coeff.get("type") == "power":
            prof = power_profile(float(coeff["gamma"]), a=a)
            sol = solve_bachelier_closed(driver, profile=prof)
        else:
            raise MaxmartError("bachelier solve supports the power coefficient spec")
        event = {"kind": "hit_barrier" if sol.stop_index is not None else "horizon_censored",
                 "index": sol.stop_index if sol.stop_index is not None else len(sol) - 1,
                 "level": float(sol.values[-1])}
    else:
        prof, _ = _coeff_profile(coeff, a, a_star=0.0)
        sol, ev = solve_drawdown_closed(driver, profile=prof)
        event = ev.to_dict()
    with open(args.out, "w") as fp:
        write_path_csv(sol, fp)
    if args.event_out:
        write_report(event, args.event_out, _provenance(coeff, None, {}))
    return 0


def _gen_spec(args) -> GenSpec:
    kind = GEN_ALIASES[args.gen]
    return GenSpec(kind=kind, dt=args.dt, horizon=args.horizon,
                   volatility=args.sigma, start=args.start,
                   base_seed=args.seed, barrier=args.barrier)


def _cmd_simulate(args) -> int:
    spec = _gen_spec(args)
    indices = [int(s) for s in args.indices.split(",")] if args.indices else [0]
    for i in indices:
        p = generate(spec, i)
        name = args.out_template.format(i=i)
        with open(name, "w") as fp:
            write_path_csv(p, fp)
    return 0


def _cmd_verify(args) -> int:
    spec = _gen_spec(args)
    if args.suite == "uniform-law":
        rep = uniform_law_report(spec, args.paths, censor_budget=args.censor_budget,
                                 threads=args.threads)
        ok = (rep.ks_stat is not None and rep.ks_stat < args.ks_budget
              and not rep.inconclusive)
    elif args.suite == "barrier-split":
        rep = uniform_law_report(spec, args.paths, censor_budget=args.censor_budget,
                                 threads=args.threads)
        gap = abs(rep.extra["barrier_mass"] - rep.extra["barrier_mass_target"])
        ok = gap < args.mass_budget and not rep.inconclusive
    else:  # last-passage
        t_list = [float(t) for t in args.t_list.split(",")]
        rep = last_passage_report(spec, args.paths, t_list,
                                  censor_budget=args.censor_budget, threads=args.threads)
        ok = rep.ks_stat < args.gap_budget and not rep.inconclusive
    write_report(rep.to_dict(), args.out,
                 _provenance(spec.to_dict(), spec.base_seed, rep.grid))
    return 0 if ok else 3


def _cmd_embed(args) -> int:
    mu = measure_from_spec(_load_json(args.measure), n_atoms=args.n_atoms)
    spec = GenSpec(kind="brownian", dt=args.dt, horizon=args.horizon,
                   volatility=args.sigma, start=0.0, base_seed=args.seed)
    rep = embed_report(mu, spec, args.paths, threads=args.threads)
    write_report(rep.to_dict(), args.out,
                 _provenance(mu.to_spec(), spec.base_seed, rep.grid))
    if args.emit_plot_data:
        hl = hl_transform(mu)
        _emit_plot(args.emit_plot_data, np.asarray([]), hl.cdf) if False else None
    ok = (rep.tv_stat < args.tv_budget and rep.ks_stat < args.ks_budget
          and not rep.inconclusive)
    return 0 if ok else 3


def _cmd_dominate(args) -> int:
    mu = measure_from_spec(_load_json(args.measure), n_atoms=args.n_atoms)
    spec = GenSpec(kind="brownian", dt=args.dt, horizon=args.horizon,
                   volatility=args.sigma, start=0.0, base_seed=args.seed)
    rep = dominance_report(mu, spec, args.paths, threads=args.threads)
    write_report(rep.to_dict(), args.out,
                 _provenance(mu.to_spec(), spec.base_seed, rep.grid))
    ok = (not rep.inconclusive and rep.extra["dominated_everywhere"]
          and rep.extra["ay_attains_everywhere"])
    return 0 if ok else 3


def _cmd_floor(args) -> int:
    gamma = args.gamma
    prof = power_profile(gamma, a=args.start)

    def g(x):
        return np.asarray(x, dtype=float) ** (1.0 - gamma) / (1.0 - gamma)

    spec = GenSpec(kind="exp_martingale", dt=args.dt, horizon=args.horizon,
                   volatility=args.sigma, start=args.start, base_seed=args.seed)
    rep = floor_report(g, spec, args.paths, profile=prof, threads=args.threads)
    write_report(rep.to_dict(), args.out,
                 _provenance({"floor": "power", "gamma": gamma}, spec.base_seed, rep.grid))
    ok = rep.extra["pathwise_violations"] == 0 and rep.extra["utility_order_holds"]
    return 0 if ok else 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="maxmart", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measure", help="evaluate a measure operation at a point")
    p.add_argument("--spec", required=True)
    p.add_argument("--op", required=True,
                   choices=["tail", "quantile", "call", "avar", "avar-dual",
                            "barycentre", "mean", "hl-tail"])
    p.add_argument("--x", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--n-atoms", type=int, default=1000)
    p.set_defaults(fn=_cmd_measure)

    p = sub.add_parser("transform", help="measure-level transforms to JSON")
    p.add_argument("--spec", required=True)
    p.add_argument("--op", required=True, choices=["hl", "delta", "profile"])
    p.add_argument("--of-hl", action="store_true",
                   help="apply the inverse operator to the maximal-law transform of the spec")
    p.add_argument("--n-atoms", type=int, default=1000)
    p.add_argument("--table-points", type=int, default=200)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_transform)

    p = sub.add_parser("solve", help="solve a max-driven SDE along a driver CSV")
    p.add_argument("--eq", required=True, choices=["bachelier", "drawdown"])
    p.add_argument("--coeff", required=True, help="coefficient spec JSON")
    p.add_argument("--driver", required=True, help="driver path CSV (t,x)")
    p.add_argument("--out", required=True, help="solution path CSV")
    p.add_argument("--event-out", default=None, help="stop event JSON")
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("simulate", help="generate seeded paths to CSV")
    p.add_argument("--gen", required=True, choices=sorted(GEN_ALIASES))
    p.add_argument("--indices", default="0", help="comma-separated path indices")
    p.add_argument("--out-template", default="path_{i}.csv")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--start", type=float, default=1.0)
    p.add_argument("--barrier", type=float, default=None)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("verify", help="run a distributional verification suite")
    p.add_argument("--suite", required=True,
                   choices=["uniform-law", "barrier-split", "last-passage"])
    p.add_argument("--gen", default="exp", choices=sorted(GEN_ALIASES))
    p.add_argument("--start", type=float, default=1.0)
    p.add_argument("--barrier", type=float, default=None)
    p.add_argument("--censor-budget", type=float, default=0.002)
    p.add_argument("--ks-budget", type=float, default=0.01)
    p.add_argument("--mass-budget", type=float, default=0.01)
    p.add_argument("--gap-budget", type=float, default=0.01)
    p.add_argument("--t-list", default="1,4,9")
    _add_mc_args(p)
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("embed", help="embed a centered measure in Brownian motion")
    p.add_argument("--measure", required=True)
    p.add_argument("--n-atoms", type=int, default=1000)
    p.add_argument("--tv-budget", type=float, default=0.02)
    p.add_argument("--ks-budget", type=float, default=0.02)
    p.add_argument("--start", type=float, default=0.0)
    _add_mc_args(p)
    p.set_defaults(fn=_cmd_embed)

    p = sub.add_parser("dominate", help="check maximal-law domination of embeddings")
    p.add_argument("--measure", required=True)
    p.add_argument("--n-atoms", type=int, default=1000)
    p.add_argument("--start", type=float, default=0.0)
    _add_mc_args(p)
    p.set_defaults(fn=_cmd_dominate)

    p = sub.add_parser("floor", help="power-floor domination check")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--start", type=float, default=1.0)
    _add_mc_args(p)
    p.set_defaults(fn=_cmd_floor)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except MaxmartError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
