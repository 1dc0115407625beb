"""Command-line entry point: ``whittaker <subcommand> ...`` (or ``python -m whittaker``).

Exact rationals print as ``p/q``; floats print with 17 significant digits.
Option precedence is command line, then ``--config`` JSON, then defaults; the
seed falls back to ``WHITTAKER_SEED`` when ``--seed`` is absent.  A run that
writes files also writes ``<first output>.manifest.json``.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import platform
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import mpmath
import numpy as np
import scipy

from . import brownian, coefficients, hitting, intertwining, ldp, operators, simulation
from .shapes import EMPTY, AlphaSpec, PlaneArray, Shape

VERSION = "0.1.0"


class CliError(Exception):
    pass


# ---------------------------------------------------------------------------
# formatting


def fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {(",".join(map(str, k)) if isinstance(k, tuple) else str(k)): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return fmt(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(fmt(obj))
    if isinstance(obj, complex):
        return [float(fmt(obj.real)), float(fmt(obj.imag))]
    return obj


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1)


def ints(text: str | None) -> tuple[int, ...]:
    if text is None or not text.strip():
        return ()
    return tuple(int(x) for x in text.split(","))


def floats(text: str | None) -> tuple[float, ...]:
    if text is None or not text.strip():
        return ()
    return tuple(float(x) for x in text.split(","))


def shape(text: str | None) -> Shape:
    return EMPTY if text is None else Shape.parse(text)


def manifest(args: argparse.Namespace, outputs: Sequence[str]) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    return {"subcommand": args.command, "parameters": params, "seed": getattr(args, "seed", None),
            "outputs": list(outputs),
            "versions": {"whittaker": VERSION, "python": platform.python_version(), "numpy": np.__version__,
                         "scipy": scipy.__version__, "mpmath": mpmath.__version__}}


def write_manifest(args, outputs: Sequence[str]) -> None:
    if outputs:
        Path(str(outputs[0]) + ".manifest.json").write_text(dump_json(manifest(args, outputs)) + "\n")


def emit(text: str, out: str | None, args) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
        write_manifest(args, [out])
    else:
        print(text, end="" if text.endswith("\n") else "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_coeff(args) -> int:
    alpha = AlphaSpec.parse(args.alpha)
    lam, mu = shape(args.shape), shape(args.mu)
    kw = dict(r=args.r, alpha=alpha, lam=lam if args.shape else None, mu=mu if args.shape else None)
    if args.table is not None:
        dim = coefficients.index_dimension(args.family, args.r, kw["lam"], kw["mu"])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"n{k + 1}" for k in range(dim)] + ["value"])
        for n in itertools.product(range(args.table + 1), repeat=dim):
            w.writerow(list(n) + [fmt(coefficients.coefficient(args.family, n=n, **kw))])
        emit(buf.getvalue(), args.out, args)
    else:
        emit(fmt(coefficients.coefficient(args.family, n=ints(args.n), **kw)), args.out, args)
    return 0


def _roof(text: str | None, default: int = 3):
    vals = ints(text)
    if not vals:
        return default
    return vals[0] if len(vals) == 1 else vals


def cmd_operator(args) -> int:
    alpha = AlphaSpec.parse(args.alpha)
    kind = args.kind
    if kind in ("G", "H"):
        lam, mu = shape(args.shape), shape(args.mu)
        build = operators.build_G if kind == "G" else operators.build_H
        _, op = build(lam, mu, alpha, _roof(args.roof))
    elif kind == "L":
        op = operators.build_L_r(args.r, alpha, _expand(_roof(args.roof), args.r))
    elif kind == "h":
        op = operators.build_h_r(args.r, alpha, _expand(_roof(args.roof), args.r))
    elif kind == "M":
        op = operators.build_M(args.r, int(_roof(args.roof)))
    else:
        raise CliError(f"unknown operator kind {kind!r}")
    emit(op.to_json(), args.out, args)
    return 0


def _expand(roof, r: int) -> tuple[int, ...]:
    return tuple(roof) if isinstance(roof, tuple) else (int(roof),) * r


def cmd_verify(args) -> int:
    alpha = AlphaSpec.parse(args.alpha)
    what = args.what
    if what == "iq":
        rep = intertwining.verify_prop_iq(args.r, alpha, args.max, perturb=args.perturb)
    elif what == "mfrpp":
        rep = intertwining.verify_mf_rpp(shape(args.shape), shape(args.mu), alpha, _roof(args.roof, args.max),
                                         perturb=args.perturb)
    elif what == "doob":
        rep = intertwining.verify_staircase_doob(args.r, alpha, args.max)
    elif what == "root":
        rep = intertwining.verify_root_system(args.which, args.max, perturb=args.perturb)
    elif what == "projection":
        rep = intertwining.verify_projection_exact(shape(args.shape), shape(args.mu), alpha, ints(args.sigma0),
                                                   args.t, perturb=args.perturb)
    elif what == "bose":
        rep = intertwining.verify_first_row_bose(shape(args.shape), args.max, perturb=args.perturb)
    else:
        raise CliError(f"unknown check {what!r}")
    print(rep)
    if args.json:
        Path(args.json).write_text(rep.to_json() + "\n")
        write_manifest(args, [args.json])
    return 0 if rep.ok else 1


def _initial_array(args, cells) -> PlaneArray:
    if args.init_file:
        text = Path(args.init_file).read_text()
        return PlaneArray.from_json(text) if args.init_file.endswith(".json") else PlaneArray.from_csv(text)
    if args.init is None:
        raise CliError("give --init N or --init-file")
    return PlaneArray(cells, [args.init] * len(cells))


def cmd_simulate(args) -> int:
    lam, mu = shape(args.shape), shape(args.mu)
    alpha = AlphaSpec.parse(args.alpha)
    cells = [c for c in lam.cells() if c not in mu]
    init = _initial_array(args, cells)
    cfg = simulation.SimConfig(lam, mu, alpha, init=init, stop=simulation.StopRule.parse(args.stop),
                               seed=args.seed, method=args.method)
    rec = simulation.simulate(cfg, args.replica, record=True)
    outputs = []
    if args.out:
        simulation.render_heightmap(rec.final, args.out, maxval=init.max(), svg=args.svg)
        outputs.append(args.out)
        if args.svg:
            outputs.append(args.svg)
    if args.events:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "i", "j", "value"])
        for t, (i, j), v in zip(rec.times, rec.cells, rec.values):
            w.writerow([fmt(t), i, j, v])
        Path(args.events).write_text(buf.getvalue())
        outputs.append(args.events)
    summary = {"events": rec.events, "end_time": rec.end_time, "stopped_by": rec.stopped_by,
               "seed": args.seed, "replica": args.replica}
    print(dump_json(summary))
    write_manifest(args, outputs)
    return 0


def cmd_sample_k(args) -> int:
    lam, mu = shape(args.shape), shape(args.mu)
    alpha = AlphaSpec.parse(args.alpha)
    sigma = coefficients.sigma_from_tuple(lam, mu, ints(args.sigma))
    cells = mu.cells()
    rng = simulation.stream(args.seed, 0, 0x5A)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"{i}_{j}" for i, j in cells])
    for _ in range(args.reps):
        pi = simulation.sample_K(lam, mu, sigma, rng, alpha, args.method)
        w.writerow([pi[c] for c in cells])
    emit(buf.getvalue(), args.out, args)
    return 0


def cmd_hitprob(args) -> int:
    if args.table is not None:
        tab = hitting.entrance_table(args.table, args.tol)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "m", "h"])
        for (n, m) in sorted(tab):
            w.writerow([n, m, fmt(tab[(n, m)])])
        emit(buf.getvalue(), args.out, args)
    elif args.entrance:
        val = hitting.hitting_prob_entrance(args.n, args.m, args.tol)
        emit(fmt(val.value) if not args.json else dump_json(
            {"value": val.value, "bound": val.bound, "terms": val.terms}), args.out, args)
    else:
        k, l = ints(getattr(args, "from"))
        n, m = ints(args.to)
        p = hitting.hitting_prob_finite(k, l, n, m)
        emit(fmt(p) if args.exact else fmt(float(p)), args.out, args)
    return 0


def cmd_mc(args) -> int:
    kw = dict(t=args.t, paths=args.paths, dt=args.dt, seed=args.seed, threads=args.threads)
    if args.kind == "duality-l":
        n = ints(args.n) or (1,) * args.r
        m = ints(args.m) or (0,) * args.r
        rep = brownian.duality_check_L(args.r, n, m, **kw)
    elif args.kind == "duality-m":
        rep = brownian.duality_check_M(args.r, args.p, **kw)
    elif args.kind == "phi":
        rep = brownian.phi_check(args.r, floats(args.y) or (1.0,) * args.r, **kw)
    else:
        raise CliError(f"unknown estimator {args.kind!r}")
    e = rep.estimate
    out = {"name": rep.name, "estimate": e.mean, "stderr": e.stderr, "count": e.count, "seed": e.seed,
           "oracle": rep.oracle, "z": rep.z, "ok": rep.ok, "details": rep.details}
    emit(dump_json(out), args.out, args)
    return 0


def cmd_ldp(args) -> int:
    lam, mu = shape(args.shape), shape(args.mu)
    prob = ldp.LimitShapeProblem.from_values(lam, mu, floats(args.boundary))
    if args.action == "solve":
        sol = ldp.solve_limit_shape(prob)
        emit(dump_json(json.loads(sol.to_json())), args.out, args)
        return 0 if sol.residual < 1e-12 and sol.hessian_pd else 1
    if args.action == "concentrate":
        emit(dump_json(ldp.concentration_experiment(prob, args.N, args.reps, args.seed)), args.out, args)
        return 0
    raise CliError(f"unknown ldp action {args.action!r}")


def cmd_render(args) -> int:
    src = Path(args.input)
    if src.suffix == ".pgm":
        data = simulation.read_pgm(src)
        pi = PlaneArray.from_rows(data.tolist())
    elif src.suffix == ".json":
        pi = PlaneArray.from_json(src.read_text())
    else:
        pi = PlaneArray.from_csv(src.read_text())
    top = args.maxval if args.maxval is not None else int(pi.max())
    outputs = []
    if args.pgm:
        simulation.render_heightmap(pi, args.pgm, maxval=top)
        outputs.append(args.pgm)
    if args.svg:
        simulation.render_svg(pi, args.svg, top)
        outputs.append(args.svg)
    if not outputs:
        raise CliError("give --pgm and/or --svg")
    write_manifest(args, outputs)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option defaults (command line wins)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--out", help="write the main output here instead of stdout")

    p = argparse.ArgumentParser(prog="whittaker", description="Discrete Whittaker processes: exact and Monte Carlo tools.")
    p.add_argument("--version", action="version", version=VERSION)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coeff", parents=[common], help="series coefficients as exact rationals")
    c.add_argument("--family", choices=["a", "A", "B", "BC2", "G2", "shape"], default="a")
    c.add_argument("--r", type=int, default=1)
    c.add_argument("--alpha")
    c.add_argument("--n", default="")
    c.add_argument("--shape")
    c.add_argument("--mu")
    c.add_argument("--table", type=int, help="CSV of all values with every index <= TABLE")
    c.set_defaults(func=cmd_coeff)

    o = sub.add_parser("operator", parents=[common], help="dump a generator as JSON triplets")
    o.add_argument("action", choices=["dump"])
    o.add_argument("--kind", choices=["G", "H", "L", "h", "M"], default="G")
    o.add_argument("--shape", default="2,1")
    o.add_argument("--mu")
    o.add_argument("--r", type=int, default=2)
    o.add_argument("--alpha")
    o.add_argument("--roof", help="one bound, or one per coordinate")
    o.set_defaults(func=cmd_operator)

    v = sub.add_parser("verify", parents=[common], help="exact intertwining checks; exit 1 on failure")
    v.add_argument("what", choices=["iq", "mfrpp", "doob", "root", "projection", "bose"])
    v.add_argument("--r", type=int, default=2)
    v.add_argument("--alpha")
    v.add_argument("--max", type=int, default=3)
    v.add_argument("--shape", default="3,2,1")
    v.add_argument("--mu", default="2,1")
    v.add_argument("--roof")
    v.add_argument("--which", default="B2", choices=["B2", "B3", "BC1", "BC2", "G2"])
    v.add_argument("--sigma0", default="2,1,1")
    v.add_argument("--t", type=float, default=0.5)
    v.add_argument("--perturb", action="store_true", help="run the negative control")
    v.add_argument("--json", help="write the JSON report here")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", parents=[common], help="run the cell chain and write a PGM heightmap")
    s.add_argument("--shape", default="50x50")
    s.add_argument("--mu")
    s.add_argument("--alpha")
    s.add_argument("--init", type=int)
    s.add_argument("--init-file")
    s.add_argument("--stop", default="absorb")
    s.add_argument("--method", choices=["next_reaction", "gillespie"], default="next_reaction")
    s.add_argument("--replica", type=int, default=0)
    s.add_argument("--svg")
    s.add_argument("--events", help="CSV of (time, i, j, new value)")
    s.set_defaults(func=cmd_simulate)

    k = sub.add_parser("sample-k", parents=[common], help="exact samples from the kernel K as CSV")
    k.add_argument("--shape", default="2,1")
    k.add_argument("--mu", default="1")
    k.add_argument("--sigma", required=True, help="boundary values in row-major order")
    k.add_argument("--alpha")
    k.add_argument("--reps", type=int, default=1)
    k.add_argument("--method", choices=["auto", "sequential", "enumerate"], default="auto")
    k.set_defaults(func=cmd_sample_k)

    h = sub.add_parser("hitprob", parents=[common], help="hitting probabilities for the r = 2 chain")
    h.add_argument("--entrance", action="store_true", help="from the entrance law at infinity")
    h.add_argument("--n", type=int, default=0)
    h.add_argument("--m", type=int, default=0)
    h.add_argument("--tol", type=float, default=1e-14)
    h.add_argument("--from", dest="from", default="5,5")
    h.add_argument("--to", default="0,0")
    h.add_argument("--exact", action="store_true", help="print the exact rational")
    h.add_argument("--table", type=int, help="CSV of the entrance table up to level TABLE")
    h.add_argument("--json", action="store_true")
    h.set_defaults(func=cmd_hitprob)

    m = sub.add_parser("mc", parents=[common], help="Brownian Monte Carlo against exact oracles")
    m.add_argument("kind", choices=["duality-l", "duality-m", "phi"])
    m.add_argument("--r", type=int, default=1)
    m.add_argument("--t", type=float, default=1.0)
    m.add_argument("--paths", type=int, default=100_000)
    m.add_argument("--dt", type=float, default=1e-3)
    m.add_argument("--n")
    m.add_argument("--m")
    m.add_argument("--p", type=int, default=1)
    m.add_argument("--y")
    m.set_defaults(func=cmd_mc)

    d = sub.add_parser("ldp", parents=[common], help="limit shapes and concentration")
    d.add_argument("action", choices=["solve", "concentrate"])
    d.add_argument("--shape", default="2,1")
    d.add_argument("--mu", default="1")
    d.add_argument("--boundary", default="1,1", help="boundary values in row-major order")
    d.add_argument("--N", type=int, default=200)
    d.add_argument("--reps", type=int, default=1000)
    d.set_defaults(func=cmd_ldp)

    g = sub.add_parser("render", parents=[common], help="re-render a PGM, JSON or CSV array")
    g.add_argument("input")
    g.add_argument("--pgm")
    g.add_argument("--svg")
    g.add_argument("--maxval", type=int)
    g.set_defaults(func=cmd_render)
    return p


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
        sub = parser._subparsers._group_actions[0].choices[args.command]
        # config values become defaults, so anything given on the command line still wins
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = parser.parse_args(argv)
    if args.seed is None:
        env = os.environ.get("WHITTAKER_SEED")
        args.seed = int(env) if env else 0
    return args


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, KeyError) as exc:
        print(f"whittaker {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
