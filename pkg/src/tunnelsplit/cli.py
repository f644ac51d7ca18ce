"""Command-line driver.

Subcommands: spectrum, pairs, predict, compare, scan, wsum, catalog.
Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.
Errors are emitted as one-line JSON on stderr.  A flat key=value config
file can seed any flag; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import catalog, export, predictor, quantize
from .exceptions import ConfigError, TunnelSplitError

LEVEL_COLUMNS = ["index", "energy", "delta_eps", "eta", "p2_expectation", "sector"]
COMPARE_COLUMNS = ["eps", "delta_num", "delta_pred", "eta_num", "eta_pred",
                   "ratio", "flag"]


def _read_config(path):
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"config line without '=': {line!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def _build_parser():
    top = argparse.ArgumentParser(prog="tunnelsplit", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    def add_common(p, *, window=True):
        p.add_argument("--config", help="key=value config file; flags override")
        p.add_argument("--system", help="catalog identifier")
        p.add_argument("--hbar", type=float)
        p.add_argument("--k", type=int, help="smoothness order parameter")
        p.add_argument("--j", type=float, help="spin quantum number")
        p.add_argument("--pc", type=float, help="kinetic kink position")
        p.add_argument("--pc-over-hbar", dest="pc_over_hbar", type=float,
                       help="kinetic kink position in units of hbar")
        p.add_argument("--lambda", dest="lam", type=float, help="potential scale")
        if window:
            p.add_argument("--emin", type=float)
            p.add_argument("--emax", type=float)
        p.add_argument("--gap-ratio", type=float, default=None)
        p.add_argument("--basis-cap", type=int, default=quantize.DEFAULT_BASIS_CAP)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", help="output path (stdout when omitted)")

    p = sub.add_parser("spectrum", help="eigenvalues with diagnostics")
    add_common(p)

    p = sub.add_parser("pairs", help="near-degenerate pairs")
    add_common(p)

    p = sub.add_parser("predict", help="leading-order splitting prediction")
    add_common(p)
    p.add_argument("--eps", type=float, help="single energy (JSON report)")
    p.add_argument("--num", type=int, default=40, help="grid size for curves")
    p.add_argument("--route", choices=("engine", "closed"), default="engine")

    p = sub.add_parser("compare", help="numeric vs predicted splittings")
    add_common(p)
    p.add_argument("--route", choices=("closed", "engine"), default="closed")

    p = sub.add_parser("scan", help="parameter scans with slope fits")
    add_common(p)
    p.add_argument("--axis", choices=("hbar", "lambda", "pc"), required=True)
    p.add_argument("--grid", required=True,
                   help="comma list or start:stop:num (hbar uses log spacing)")
    p.add_argument("--eps-ref", type=float, required=True)
    p.add_argument("--envelope-samples", type=int, default=16)
    p.add_argument("--envelope-halfwidth", type=float, default=0.08)
    p.add_argument("--envelope-period", type=float, default=None,
                   help="oscillation period in 1/hbar, when known")

    p = sub.add_parser("wsum", help="evaluate the periodized inverse-power sum")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--out")

    p = sub.add_parser("catalog", help="list or describe built-in systems")
    p.add_argument("action", choices=("list", "describe"))
    p.add_argument("ident", nargs="?")
    return top


def _merge_config(args):
    if getattr(args, "config", None):
        file_vals = _read_config(args.config)
        for key, raw in file_vals.items():
            if not hasattr(args, key):
                raise ConfigError(f"unknown config key '{key}'")
            if getattr(args, key) is None:
                cast = {"system": str, "out": str, "format": str, "grid": str,
                        "axis": str, "route": str}.get(key, float)
                if key in ("k", "jobs", "basis_cap", "num", "envelope_samples"):
                    cast = int
                setattr(args, key, cast(raw))
    return args


def _system_params(args):
    if not args.system:
        raise ConfigError("--system is required")
    params = {}
    for name in ("hbar", "k", "j", "pc", "lam"):
        v = getattr(args, name, None)
        if v is not None:
            params[name] = v
    ratio = getattr(args, "pc_over_hbar", None)
    if ratio is not None:
        if "pc" in params:
            raise ConfigError("give either --pc or --pc-over-hbar, not both")
        hbar = params.get("hbar")
        if hbar is None:
            raise ConfigError("--pc-over-hbar requires --hbar")
        params["pc"] = ratio * hbar
    return args.system, params


def _grid(spec, log=False):
    if ":" in spec:
        start, stop, num = spec.split(":")
        start, stop, num = float(start), float(stop), int(num)
        if num < 1:
            raise ConfigError("grid needs at least one point")
        if log:
            return list(np.geomspace(start, stop, num))
        return list(np.linspace(start, stop, num))
    return [float(s) for s in spec.split(",")]


def _pairs_rows(built, spectrum, window, gap_ratio):
    pairs = catalog.nd_pairs(built, spectrum, window=window,
                             gap_ratio=gap_ratio or 0.25)
    return [{
        "index": p.index, "energy": p.mean, "delta_eps": p.delta, "eta": p.eta,
        "p2_expectation": p.p2, "sector": "|".join(p.sectors),
    } for p in pairs]


def _default_window(built, args):
    if built.spin is not None:
        j2 = built.spin.radius ** 2
        lo = args.emin if args.emin is not None else -j2
        hi = args.emax if args.emax is not None else j2
    else:
        lo = args.emin if args.emin is not None else -np.inf
        hi = args.emax if args.emax is not None else 3.0
    return lo, hi


def _emit(args, schema, columns, rows, config):
    text = export.render(schema, 1, columns, rows, args.format)
    if args.format == "json" and schema == "report":
        text = rows  # already rendered
    left = export.write_output(text, args.out, config)
    if left is not None:
        sys.stdout.write(left)


def _cmd_spectrum(args):
    ident, params = _system_params(args)
    built = catalog.build(ident, **params)
    lo, hi = _default_window(built, args)
    spectrum = catalog.solve_built(built, eps_max=None if built.spin else hi)
    rows = []
    for i, e in enumerate(spectrum.energies):
        if lo <= e <= hi:
            rows.append({"index": i, "energy": float(e), "delta_eps": None,
                         "eta": None, "p2_expectation": float(spectrum.p2[i]),
                         "sector": spectrum.sectors[i]})
    _emit(args, "levels", LEVEL_COLUMNS, rows, vars(args))
    return 0


def _cmd_pairs(args):
    ident, params = _system_params(args)
    built = catalog.build(ident, **params)
    lo, hi = _default_window(built, args)
    spectrum = catalog.solve_built(built, eps_max=None if built.spin else hi)
    rows = _pairs_rows(built, spectrum, (lo, hi), args.gap_ratio)
    _emit(args, "levels", LEVEL_COLUMNS, rows, vars(args))
    return 0


def _cmd_predict(args):
    ident, params = _system_params(args)
    built = catalog.build(ident, **params)
    if args.eps is not None:
        rep = built.predict(args.eps)
        doc = rep.as_dict()
        if args.route == "closed":
            closed = built.closed_prediction(args.eps)
            if closed is not None:
                doc["closed_form"] = {k: v for k, v in closed.items()}
        text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
        left = export.write_output(text, args.out, vars(args))
        if left is not None:
            sys.stdout.write(left)
        return 0
    lo, hi = _default_window(built, args)
    if not np.isfinite(lo):
        raise ConfigError("predict curves need --emin/--emax")
    rows = []
    for eps in np.linspace(lo, hi, args.num):
        if args.route == "closed":
            closed = built.closed_prediction(eps)
        else:
            closed = None
        if closed is not None:
            rows.append({"eps": float(eps), "eta0": closed.get("eta"),
                         "delta0": closed.get("delta"),
                         "amp": closed.get("amp"), "flag": ""})
        else:
            rep = built.predict(eps)
            flag = "below_power_law_floor" if rep.below_power_law_floor else (
                "interference_zero" if rep.interference_zero else "")
            rows.append({"eps": float(eps), "eta0": rep.eta, "delta0": rep.delta,
                         "amp": abs(rep.amplitude), "flag": flag})
    _emit(args, "prediction", ["eps", "eta0", "delta0", "amp", "flag"], rows,
          vars(args))
    return 0


def _cmd_compare(args):
    ident, params = _system_params(args)
    built = catalog.build(ident, **params)
    lo, hi = _default_window(built, args)
    rows = catalog.comparison_rows(built, (lo, hi),
                                   gap_ratio=args.gap_ratio or 0.25,
                                   route=args.route)
    _emit(args, "compare", COMPARE_COLUMNS, rows, vars(args))
    return 0


def _cmd_scan(args):
    ident, params = _system_params(args)
    if args.axis == "hbar":
        params.pop("hbar", None)
        grid = _grid(args.grid, log=True)
        rows = catalog.hbar_scan(ident, grid, eps_ref=args.eps_ref,
                                 envelope_halfwidth=args.envelope_halfwidth,
                                 envelope_period=args.envelope_period,
                                 envelope_samples=args.envelope_samples,
                                 jobs=args.jobs, **params)
        cols = ["hbar_nominal", "hbar", "eps", "delta_env", "delta_pred", "slope"]
    else:
        scan_param = {"lambda": "lam", "pc": "pc"}[args.axis]
        params.pop(scan_param, None)
        grid = _grid(args.grid)
        rows = catalog.parameter_scan(ident, scan_param, grid,
                                      eps_ref=args.eps_ref, jobs=args.jobs,
                                      **params)
        cols = [scan_param, "eps", "delta_num", "eta_num", "amp_pred",
                "delta_pred", "eta_pred"]
    _emit(args, f"scan-{args.axis}", cols, rows, vars(args))
    return 0


def _cmd_wsum(args):
    val = predictor.circle_lattice_sum(args.k, args.x, args.y)
    rows = [{"k": args.k, "x": args.x, "y": args.y,
             "re": val.real, "im": val.imag, "abs": abs(val)}]
    text = export.render("wsum", 1, ["k", "x", "y", "re", "im", "abs"], rows,
                         args.format)
    left = export.write_output(text, args.out, vars(args))
    if left is not None:
        sys.stdout.write(left)
    return 0


def _cmd_catalog(args):
    if args.action == "list":
        for ident in catalog.list_entries():
            sys.stdout.write(f"{ident}: {catalog.CATALOG[ident].summary}\n")
        return 0
    if not args.ident:
        raise ConfigError("catalog describe needs an identifier")
    sys.stdout.write(catalog.describe(args.ident) + "\n")
    return 0


_COMMANDS = {
    "spectrum": _cmd_spectrum,
    "pairs": _cmd_pairs,
    "predict": _cmd_predict,
    "compare": _cmd_compare,
    "scan": _cmd_scan,
    "wsum": _cmd_wsum,
    "catalog": _cmd_catalog,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__,
                                     "message": str(exc)}) + "\n")
        return 2
    except TunnelSplitError as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__,
                                     "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
