"""Command-line front end: ``hmink {profiles,qiter,bounds,flow,disk}``.

Exit codes: 0 success, 1 usage or construction error, 2 Q-iteration did not
converge, 3 infeasible (S, V), 4 flow failure or failed audit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    bounds_report,
    compare_sharp_vs_bgl,
    double_disk,
    bound_santalo,
    santalo_violation_threshold,
)
from .errors import ConvexityError, FlowError, HminkError
from .flow import FlowConfig, make_perturbed_sphere, make_sphere, monotone_audit, run_flow
from .profiles import SpaceForm, eta, sphere_area, sphere_tmc, sphere_volume, xi
from .qiter import IterationConfig, run_iteration

log = logging.getLogger("hmink")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2
EXIT_INFEASIBLE = 3
EXIT_FLOW = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v):
    return f"{v:.17g}"


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def _sidecar(out, suffix):
    out = Path(out)
    return out.with_name(out.stem + suffix)


def _threads():
    raw = os.environ.get("HMINK_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"HMINK_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise UsageError("HMINK_THREADS must be a positive integer")
    return n


def _write_manifest(args, outputs, started):
    """Run metadata lives beside the outputs so data files stay byte-stable."""
    if not outputs:
        return
    params = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    manifest = {
        "command": args.command,
        "parameters": params,
        "version": __version__,
        "threads": _threads(),
        "wall_time_s": time.perf_counter() - started,
        "outputs": [str(p) for p in outputs],
    }
    write_atomic(_sidecar(outputs[0], ".manifest.json"), _json_text(manifest))


def _space_form(a):
    try:
        return SpaceForm(a)
    except ValueError as exc:
        raise UsageError(str(exc))


def cmd_profiles(args):
    sf = _space_form(args.a)
    if not args.r_max > 0:
        raise UsageError("--r-max must be positive")
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    rows = []
    worst = 0.0
    for r in np.linspace(0.0, args.r_max, args.n):
        r = float(r)
        v, s, m = sphere_volume(r, sf), sphere_area(r, sf), sphere_tmc(r, sf)
        e, x = eta(v, sf), xi(v, sf)
        worst = max(worst, abs(e - s) / max(1.0, s))
        rows.append((r, v, s, m, e, x))
    if worst > 1e-9:
        raise HminkError(f"profile self-test failed: eta(V(r)) deviates from S(r) by {worst:.3e}")
    text = _csv_text(["r", "V", "S", "M", "eta_of_V", "xi_of_V"], rows)
    outputs = []
    if args.out:
        write_atomic(args.out, text)
        outputs.append(Path(args.out))
    else:
        sys.stdout.write(text)
    if args.json:
        print(_json_text({"rows": len(rows), "max_eta_minus_S_rel": worst}), end="")
    return EXIT_OK, outputs


def cmd_qiter(args):
    sf = _space_form(args.a)
    try:
        cfg = IterationConfig(sf=sf, x_max=args.x_max, n_points=args.n_points,
                              sup_tol=args.sup_tol, max_n=args.max_n)
    except ValueError as exc:
        raise UsageError(str(exc))
    report = run_iteration(cfg)
    outputs = []
    if args.out:
        out = Path(args.out)
        write_atomic(out, report.to_csv())
        write_atomic(_sidecar(out, ".json"), report.to_json())
        outputs += [out, _sidecar(out, ".json")]
    if args.json or not args.out:
        sys.stdout.write(report.to_json())
    log.info("q-iteration: n_final=%d converged=%s", report.n_final, report.converged)
    return (EXIT_OK if report.converged else EXIT_NOT_CONVERGED), outputs


def cmd_bounds(args):
    sf = _space_form(args.a)
    if args.S < 0 or args.V < 0:
        raise UsageError("S and V must be nonnegative")
    rep = bounds_report(args.S, args.V, sf)
    payload = rep.to_dict()
    if sf.a == -1.0 and rep.feasible:
        cmp = compare_sharp_vs_bgl(args.S, args.V)
        payload["comparison"] = {"f1": cmp.f1, "f2": cmp.f2, "gap": cmp.gap,
                                 "equality": cmp.equality}
    text = _json_text(payload)
    sys.stdout.write(text)
    outputs = []
    if args.out:
        write_atomic(args.out, text)
        outputs.append(Path(args.out))
    return (EXIT_OK if rep.feasible else EXIT_INFEASIBLE), outputs


def cmd_flow(args):
    sf = _space_form(args.a)
    try:
        cfg = FlowConfig(dt=args.dt, t_max=args.t_max, stop_radius=args.stop_radius,
                         record_every=args.record_every, n_grid=args.n)
        if args.shape == "sphere":
            surf = make_sphere(args.r0, sf, args.n)
        else:
            surf = make_perturbed_sphere(args.r0, args.eps, args.mode, sf, args.n)
    except (ValueError, ConvexityError) as exc:
        raise UsageError(f"cannot construct initial surface: {exc}")
    out = Path(args.out) if args.out else None
    code = EXIT_OK
    try:
        trace = run_flow(surf, cfg)
    except FlowError as exc:
        log.error("%s", exc)
        trace, code = exc.trace, EXIT_FLOW
        audit = {"passed": False, "error": str(exc)}
    else:
        audit = _plain(monotone_audit(trace)) if len(trace) >= 3 else {"passed": False,
                                                                      "error": "too few records"}
        if not audit["passed"]:
            code = EXIT_FLOW
    outputs = []
    if out:
        write_atomic(out, trace.to_csv())
        write_atomic(_sidecar(out, ".json"), trace.to_json())
        write_atomic(_sidecar(out, ".audit.json"), _json_text(audit))
        outputs += [out, _sidecar(out, ".json"), _sidecar(out, ".audit.json")]
        if trace.final_surface is not None:
            write_atomic(_sidecar(out, ".surface.csv"), trace.final_surface.to_csv())
            outputs.append(_sidecar(out, ".surface.csv"))
    if args.json or not out:
        sys.stdout.write(_json_text(audit))
    return code, outputs


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def cmd_disk(args):
    if not args.rho_max > 0:
        raise UsageError("--rho-max must be positive")
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    rows = []
    for rho in np.linspace(args.rho_max / args.n, args.rho_max, args.n):
        d = double_disk(float(rho))
        bound = bound_santalo(d.S, d.sf)
        rows.append((float(rho), d.S, d.M, bound, int(d.M < bound)))
    rho_star = santalo_violation_threshold()
    text = _csv_text(["rho", "S", "M", "santalo_bound", "violated"], rows)
    sidecar = {"rho_star": rho_star, "cosh_rho_star": math.cosh(rho_star),
               "cosh_rho_star_closed_form": math.pi ** 2 / (16 - math.pi ** 2)}
    outputs = []
    if args.out:
        out = Path(args.out)
        write_atomic(out, text)
        write_atomic(_sidecar(out, ".json"), _json_text(sidecar))
        outputs += [out, _sidecar(out, ".json")]
    else:
        sys.stdout.write(text)
    if args.json:
        sys.stdout.write(_json_text(sidecar))
    return EXIT_OK, outputs


def _read_config(path):
    """Plain ``key = value`` lines; '#' starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def build_parser():
    parser = _Parser(prog="hmink", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, out_help):
        p.add_argument("--a", type=float, default=-1.0, help="curvature a <= 0 (default -1)")
        p.add_argument("--out", default=None, help=out_help)
        p.add_argument("--json", action="store_true", help="also print a JSON summary")
        p.add_argument("--config", default=None, help="key = value defaults file")

    p = sub.add_parser("profiles", help="tabulate sphere quantities and profiles")
    common(p, "CSV output path (stdout if omitted)")
    p.add_argument("--r-max", type=float, default=3.0)
    p.add_argument("--n", type=int, default=301)
    p.set_defaults(func=cmd_profiles)

    p = sub.add_parser("qiter", help="run the Q_n iteration")
    common(p, "iterates CSV path; the report goes to <stem>.json")
    p.add_argument("--x-max", type=float, default=50.0)
    p.add_argument("--n-points", type=int, default=2001)
    p.add_argument("--sup-tol", type=float, default=1e-4)
    p.add_argument("--max-n", type=int, default=100)
    p.set_defaults(func=cmd_qiter)

    p = sub.add_parser("bounds", help="evaluate all lower bounds at (S, V, a)")
    common(p, "optional copy of the JSON report")
    p.add_argument("--S", type=float, required=True)
    p.add_argument("--V", type=float, required=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("flow", help="run harmonic mean curvature flow and audit it")
    common(p, "trace CSV path; <stem>.json, <stem>.audit.json, <stem>.surface.csv beside it")
    p.add_argument("--shape", choices=("sphere", "perturbed"), default="sphere")
    p.add_argument("--r0", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--mode", type=int, default=2)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--t-max", type=float, default=0.4)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--stop-radius", type=float, default=1e-2)
    p.add_argument("--record-every", type=int, default=100)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("disk", help="double-disk counterexample table")
    common(p, "CSV path; the threshold goes to <stem>.json")
    p.add_argument("--rho-max", type=float, default=3.0)
    p.add_argument("--n", type=int, default=300)
    p.set_defaults(func=cmd_disk)
    return parser


def _apply_config(parser, argv):
    """Parse ``argv`` with config-file values as defaults; explicit flags still win."""
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in subparsers), None)
    if known.config and command:
        sub = subparsers[command]
        actions = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, raw in _read_config(known.config).items():
            if key not in actions or key in ("config", "help"):
                raise UsageError(f"unknown config key {key!r} for {command}")
            action = actions[key]
            try:
                if isinstance(action, argparse._StoreTrueAction):
                    defaults[key] = raw.lower() in ("1", "true", "yes", "on")
                else:
                    defaults[key] = action.type(raw) if action.type else raw
            except ValueError:
                raise UsageError(f"bad value {raw!r} for config key {key!r}")
            action.required = False
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    started = time.perf_counter()
    try:
        try:
            args = _apply_config(parser, argv)
        except SystemExit as exc:
            # argparse exits on --help/--version and on usage errors
            return exc.code if isinstance(exc.code, int) else EXIT_USAGE
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        _threads()
        code, outputs = args.func(args)
        _write_manifest(args, outputs, started)
        return code
    except UsageError as exc:
        print(f"hmink: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HminkError, ValueError, OSError) as exc:
        print(f"hmink: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
