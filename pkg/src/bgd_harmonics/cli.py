"""Command-line front end.

Exit codes: 0 success, 1 I/O or parse error, 2 invalid input or failed
validation, 3 trace fixed point did not converge, 4 cross-check discrepancy
above threshold.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bgd
from .bgd import BgdSpec, DomainTraceSet, domain_trace_fixed_point, flux_transfer_matrices
from .exceptions import (
    BgdError,
    CapHit,
    CountOverflow,
    DepthMismatch,
    DepthOverflow,
    InvalidSpec,
    InvalidStructure,
    MissingV0Data,
    NoConvergence,
    WordNotAdmissible,
)
from .measure import (
    CylinderMeasureContext,
    SimpleBoundaryFunction,
    cumulative_distribution,
    energy_functional,
    harmonic_energy,
    measure_vector,
    poisson_value,
    poisson_value_extended,
)
from .oracle import WalkConfig, build_approx_network, direct_hitting, random_walk_hitting, richardson_report
from .pcf import validate_structure
from .registry import example_names, get_example

log = logging.getLogger("bgd_harmonics")

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NOCONV, EXIT_DISCREPANCY = 0, 1, 2, 3, 4
CACHE_ENV = "BGD_HARMONICS_CACHE"


class InputError(Exception):
    """Unreadable or unparsable input."""


# ---------------------------------------------------------------- output


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return f"{x:.17g}"
    return str(x)


def dumps(obj, indent=0) -> str:
    """JSON with every float written at 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return json.dumps(str(obj))


def emit(args, payload, csv_rows=None, header=None):
    out = args.out
    if args.format == "csv" and csv_rows is not None:
        print(",".join(header), file=out)
        for row in csv_rows:
            print(",".join(fmt(x) for x in row), file=out)
    else:
        print(dumps(payload), file=out)


# ----------------------------------------------------------------- inputs


def load_input(args) -> tuple:
    if args.example:
        try:
            return args.example, get_example(args.example).spec()
        except KeyError as exc:
            raise InputError(str(exc)) from exc
    if not args.input:
        raise InputError("pass --example NAME or --input PATH")
    try:
        doc = json.loads(Path(args.input).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {args.input}: {exc}") from exc
    try:
        return Path(args.input).stem, BgdSpec.from_json(doc)
    except (KeyError, TypeError, AttributeError) as exc:
        raise InputError(f"malformed spec document: {exc!r}") from exc


def read_json_file(path):
    """Parse ``path`` as a JSON file, or as inline JSON when it starts with ``{``."""
    try:
        if path.lstrip().startswith("{"):
            return json.loads(path)
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def solve_traces(args, spec: BgdSpec) -> DomainTraceSet:
    cache = os.environ.get(CACHE_ENV)
    path = None
    if cache:
        path = Path(cache) / f"{spec.fingerprint()}_{args.tol!r}_{args.max_iter}.json"
        if path.exists():
            try:
                return DomainTraceSet.from_json(spec, json.loads(path.read_text()))
            except (OSError, ValueError, KeyError):
                log.warning("ignoring unreadable trace cache %s", path)
    traces = domain_trace_fixed_point(spec, args.tol, args.max_iter)
    if path is not None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(traces.to_json()))
        except OSError:
            log.warning("could not write trace cache %s", path)
    return traces


def pipeline(args):
    name, spec = load_input(args)
    traces = solve_traces(args, spec)
    return name, spec, traces, flux_transfer_matrices(spec, traces)


def _domain(args, spec):
    i = args.domain - 1
    if not 0 <= i < spec.domain_count:
        raise InvalidSpec(f"domain {args.domain} out of range 1..{spec.domain_count}")
    return i


def _point(args, spec, i):
    inside = sorted(spec.domains[i].in_v0)
    if args.k is None:
        if not inside:
            raise InvalidSpec(f"domain {i + 1} contains no boundary point")
        return inside[0]
    if args.k - 1 not in inside:
        raise InvalidSpec(f"p_{args.k} is not inside domain {i + 1}")
    return args.k - 1


def _check_depth(args, m, what="depth"):
    if m < 0 or m > args.depth_cap:
        raise DepthOverflow(f"{what} {m} outside 0..{args.depth_cap} (see --depth-cap)")


# --------------------------------------------------------------- commands


def cmd_validate(args) -> int:
    name, spec = load_input(args)
    rep = validate_structure(spec.hs, tol=1e-12, raise_on_error=False)
    rep.merge(bgd.validate_bgd(spec))
    payload = rep.to_dict()
    payload["input"] = name
    print(dumps(payload), file=args.out)
    return EXIT_OK if rep.ok else EXIT_INVALID


def cmd_matrices(args) -> int:
    name, spec, traces, flux = pipeline(args)
    payload = {
        "input": name,
        "tol": args.tol,
        "iterations": traces.iterations,
        "bracket_width": traces.width,
        "matrices": flux.to_json(),
        "resistances": [
            {"domain": i + 1, "point": k + 1, "resistance": r} for (i, k), r in sorted(flux.resistances.items())
        ],
    }
    rows = [
        (e + 1, a + 1, b + 1, float(flux.matrices[e, a, b]))
        for e in range(len(flux))
        for a in range(spec.hs.boundary_size)
        for b in range(spec.hs.boundary_size)
    ]
    emit(args, payload, rows, ["edge", "row", "col", "value"])
    print(f"# bracket width {fmt(traces.width)} after {traces.iterations} iterations (tol {fmt(args.tol)})", file=sys.stderr)
    return EXIT_OK


def cmd_trace(args) -> int:
    name, spec = load_input(args)
    traces = solve_traces(args, spec)
    payload = {"input": name, **traces.to_json()}
    payload["resistances"] = [
        {"domain": i + 1, "point": k + 1, "resistance": traces.resistance(i, k)}
        for i, d in enumerate(spec.domains)
        for k in sorted(d.in_v0)
    ]
    rows = [(r["domain"], r["point"], r["resistance"]) for r in payload["resistances"]]
    emit(args, payload, rows, ["domain", "point", "resistance"])
    return EXIT_OK


def cmd_measure(args) -> int:
    name, spec, traces, flux = pipeline(args)
    i = _domain(args, spec)
    k = _point(args, spec, i)
    _check_depth(args, args.m)
    vec = measure_vector(CylinderMeasureContext(flux, i, k), args.m)
    total = sum(vec.values())
    cum = cumulative_distribution(vec)
    if args.plot_data:
        Path(args.plot_data).write_text(dumps({"words": [w.label for w in vec], "cumulative": [list(c) for c in cum]}) + "\n")
    if args.format == "csv":
        print("word,probability", file=args.out)
        for w, x in vec.items():
            print(f"{w.label},{fmt(x)}", file=args.out)
        print(f"# total {fmt(total)}", file=args.out)
    else:
        payload = {
            "input": name,
            "domain": i + 1,
            "point": k + 1,
            "depth": args.m,
            "measure": [{"word": w.label, "probability": x} for w, x in vec.items()],
            "total": total,
            "cumulative": [list(c) for c in cum],
        }
        print(dumps(payload), file=args.out)
    return EXIT_OK


def _load_function(args, spec, i, path, depth=None):
    doc = read_json_file(path)
    return SimpleBoundaryFunction.from_json(spec, i, doc, depth)


def cmd_poisson(args) -> int:
    name, spec, traces, flux = pipeline(args)
    i = _domain(args, spec)
    k = _point(args, spec, i)
    f = _load_function(args, spec, i, args.f, args.m)
    ctx = CylinderMeasureContext(flux, i, k)
    if args.v0_flux:
        raw = read_json_file(args.v0_flux)
        data = {int(x) - 1: v for x, v in raw.items()}
        value = poisson_value_extended(ctx, f, data)
    else:
        value = poisson_value(ctx, f)
    emit(args, {"input": name, "domain": i + 1, "point": k + 1, "value": value}, [(i + 1, k + 1, value)], ["domain", "point", "value"])
    return EXIT_OK


def _energy_row(traces, flux, i, f):
    he = harmonic_energy(traces, i, f)
    ef = energy_functional(flux, i, f)
    ratio = he / ef if ef > 0 else float("nan")
    row = {"harmonic_energy": he, "energy_functional": ef, "ratio": ratio}
    if ef == 0:
        row["note"] = "boundary data is constant; both sides vanish and the ratio is undefined"
    return row


def cmd_energy(args) -> int:
    name, spec, traces, flux = pipeline(args)
    i = _domain(args, spec)
    if args.batch:
        if args.m is None:
            raise DepthMismatch("--batch needs -m")
        _check_depth(args, args.m)
        rng = np.random.default_rng(args.seed)
        rows = [_energy_row(traces, flux, i, SimpleBoundaryFunction.random(spec, i, args.m, rng)) for _ in range(args.batch)]
        ratios = [r["ratio"] for r in rows]
        payload = {
            "input": name,
            "domain": i + 1,
            "depth": args.m,
            "seed": args.seed,
            "samples": rows,
            "bracket": [min(ratios), max(ratios)],
        }
        emit(args, payload, [(r["harmonic_energy"], r["energy_functional"], r["ratio"]) for r in rows], ["harmonic_energy", "energy_functional", "ratio"])
        return EXIT_OK
    if not args.f:
        raise InputError("energy needs --f FILE or --batch N")
    f = _load_function(args, spec, i, args.f, args.m)
    _check_depth(args, f.depth)
    row = _energy_row(traces, flux, i, f)
    emit(args, {"input": name, "domain": i + 1, "depth": f.depth, **row}, [(row["harmonic_energy"], row["energy_functional"], row["ratio"])], ["harmonic_energy", "energy_functional", "ratio"])
    return EXIT_OK


def cmd_crosscheck(args) -> int:
    name, spec, traces, flux = pipeline(args)
    i = _domain(args, spec)
    k = _point(args, spec, i)
    m, n = args.m, args.n
    if n < m:
        raise InvalidSpec("-n must be at least -m")
    _check_depth(args, n, "approximation depth")
    ref = measure_vector(CylinderMeasureContext(flux, i, k), m)
    n_list = sorted({min(m + 1, n), *range(n, m, -2)}) if n > m else [n]
    table = richardson_report(spec, i, k, m, n_list, ref)
    final = [r.max_discrepancy for r in table.rows if r.n == n_list[-1] and r.mode == "cut"][0]
    failed = final > args.threshold
    payload = {
        "input": name,
        "domain": i + 1,
        "point": k + 1,
        "class_depth": m,
        "threshold": args.threshold,
        "convergence": [vars(r) for r in table.rows],
        "final_discrepancy": final,
    }
    if args.walkers > 0:
        depth = min(n, args.mc_depth if args.mc_depth is not None else m + 3)
        approx = build_approx_network(spec, i, depth, m, "cut")
        exact = direct_hitting(approx, k)
        mc = random_walk_hitting(approx, WalkConfig(args.seed, args.walkers), k, threads=args.threads)
        rows = []
        for w, (est, err) in mc.items():
            z = abs(est - exact[w]) / max(err, 1.0 / args.walkers)
            rows.append({"word": w.label, "estimate": est, "stderr": err, "direct": exact[w], "z": z})
            failed |= z > 3
        payload["monte_carlo"] = {"depth": depth, "walkers": args.walkers, "seed": args.seed, "rows": rows}
    payload["ok"] = not failed
    if args.format == "csv":
        print(table.to_csv(), end="", file=args.out)
    else:
        print(dumps(payload), file=args.out)
    return EXIT_DISCREPANCY if failed else EXIT_OK


# ------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--example", choices=example_names(), help="compiled-in example")
    src.add_argument("--input", metavar="PATH", help="JSON spec with an embedded structure")
    common.add_argument("--tol", type=float, default=1e-10, help="bracket width of the trace fixed point")
    common.add_argument("--max-iter", type=int, default=10_000)
    common.add_argument("--depth-cap", type=int, default=16, help="largest word depth any command may expand")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    dom = argparse.ArgumentParser(add_help=False)
    dom.add_argument("-i", "--domain", type=int, default=1, help="1-based domain index")
    dom.add_argument("-k", type=int, default=None, help="1-based boundary index (default: first inside the domain)")

    p = argparse.ArgumentParser(prog="bgd-harmonics", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check structure and spec invariants").set_defaults(func=cmd_validate)
    sub.add_parser("matrices", parents=[common], help="flux transfer matrices").set_defaults(func=cmd_matrices)
    sub.add_parser("trace", parents=[common], help="converged domain traces").set_defaults(func=cmd_trace)
    sp = sub.add_parser("measure", parents=[common, dom], help="cylinder masses of a hitting measure")
    sp.add_argument("-m", type=int, default=1, help="cylinder depth")
    sp.add_argument("--plot-data", metavar="PATH", help="write cumulative-distribution JSON here")
    sp.set_defaults(func=cmd_measure)
    sp = sub.add_parser("poisson", parents=[common, dom], help="Poisson value of a simple boundary function")
    sp.add_argument("--f", required=True, metavar="PATH", help="JSON map word -> value")
    sp.add_argument("-m", type=int, default=None, help="expected depth of the words in --f")
    sp.add_argument("--v0-flux", metavar="PATH", help="JSON map boundary index -> (du)_x or [v(x), (du)_x]")
    sp.set_defaults(func=cmd_poisson)
    sp = sub.add_parser("energy", parents=[common, dom], help="harmonic energy against the boundary energy functional")
    sp.add_argument("--f", metavar="PATH", help="JSON map word -> value")
    sp.add_argument("-m", type=int, default=None, help="depth of the boundary data")
    sp.add_argument("--batch", type=int, default=0, help="evaluate this many random functions instead")
    sp.set_defaults(func=cmd_energy)
    sp = sub.add_parser("crosscheck", parents=[common, dom], help="compare with direct solves and random walks")
    sp.add_argument("-m", type=int, default=1, help="class depth")
    sp.add_argument("-n", type=int, default=8, help="largest approximation depth")
    sp.add_argument("--walkers", type=int, default=0, help="Monte Carlo walkers (0 disables)")
    sp.add_argument("--mc-depth", type=int, default=None, help="approximation depth for the walk (default m+3)")
    sp.add_argument("--threshold", type=float, default=1e-4)
    sp.set_defaults(func=cmd_crosscheck)
    return p


def main(argv=None, out=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.out = out or sys.stdout
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.tol <= 0 or args.max_iter < 0 or args.depth_cap < 0 or args.threads < 1:
        print("error: --tol must be positive, caps nonnegative, --threads at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NoConvergence as exc:
        print(f"error: trace fixed point did not converge: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except (InvalidStructure, InvalidSpec, DepthMismatch, WordNotAdmissible, MissingV0Data, DepthOverflow, CountOverflow, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (CapHit, BgdError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
