"""Command line interface: ``dressed-limit validate|analyze|oracle|scan|search``.

Data goes to stdout, diagnostics to stderr. Exit codes: 0 success,
2 invalid scheme or open manifold, 3 numerical failure, 4 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .dressed import parse_rule
from .exceptions import DressedLimitError, NumericalError, SchemeError
from .explorer import (
    DEFAULT_CAP,
    Parameter,
    ParameterSpace,
    default_threads,
    scan,
    search_max_saturation,
    search_max_snr_at_fixed_destruction,
)
from .manifold import analyze_manifold, classify_shared_states, format_offsets
from .observables import analyze
from .oracle import evolve_adiabatic, fd_comparison
from .scheme import parse_scheme, reference_rate
from .serialize import dumps

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_USAGE = 0, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _read(path):
    """Scheme and the frequency scale declared in its file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    scheme = parse_scheme(text)
    scale = json.loads(text).get("units", {}).get("frequency_scale", 1.0)
    return scheme, float(scale)


def _format(args):
    if args.format:
        return args.format
    return "table" if sys.stdout.isatty() else "json"


def _rule(text):
    try:
        return parse_rule(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _param(text, need_count):
    try:
        name, bounds = text.split("=", 1)
        parts = bounds.split(":")
        lo, hi = float(parts[0]), float(parts[1])
        if need_count:
            if len(parts) != 3:
                raise ValueError
            return name, lo, hi, int(parts[2])
        if len(parts) not in (2, 3):
            raise ValueError
        return name, lo, hi, None
    except (ValueError, IndexError):
        form = "name=lo:hi:n" if need_count else "name=lo:hi"
        raise UsageError(f"bad --param {text!r}; expected {form}") from None


def _space(scheme, scale, params, in_file_units, need_count):
    parsed = [_param(p, need_count) for p in params]
    if not parsed:
        raise UsageError("at least one --param is required")
    factor = scale if in_file_units else 1.0
    try:
        space = ParameterSpace(scheme, [Parameter(n, lo * factor, hi * factor)
                                        for n, lo, hi, _ in parsed])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return space, [n for *_, n in parsed]


def cmd_validate(args, out):
    scheme, _ = _read(args.file)
    m = analyze_manifold(scheme, raise_on_open=False)
    shared = classify_shared_states(scheme, m) if m.closed else []
    if _format(args) == "json":
        out.write(dumps({
            "closed": m.closed,
            "lasers": list(m.laser_ids),
            "levels": list(m.level_ids),
            "b": m.b.tolist(),
            "reachable": sorted(m.reachable),
            "cycle": list(m.cycle) if m.cycle else None,
            "cycle_transitions": [i + 1 for i in m.cycle_transitions] if m.cycle else None,
            "shared_levels": [{"level": s.level, "lasers": list(s.lasers)} for s in shared],
        }) + "\n")
    else:
        out.write(format_offsets(m) + "\n")
        out.write(f"verdict: {'closed' if m.closed else 'open'}\n")
        for st in shared:
            out.write(f"level {st.level} shared by lasers {list(st.lasers)}\n")
    if not m.closed:
        path = "->".join(str(x) for x in m.cycle)
        print(f"open manifold: photon numbers not conserved around cycle {path} "
              f"(transitions {[i + 1 for i in m.cycle_transitions]})", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def _report_table(report):
    lines = [f"dressed eigenvalue: {report.dressed.eigenvalue:.16e} rad/s "
             f"({report.dressed.selection})",
             f"destruction: {report.destruction:.16e} 1/s", "",
             f"{'laser':>5} {'phase_shift':>24} {'snr':>24} {'bound':>24} {'saturation':>24}"]
    for lo in report.lasers:
        sat = "undefined" if lo.saturation is None else f"{lo.saturation:.16e}"
        lines.append(f"{lo.laser:>5} {lo.phase_shift:>24.16e} {lo.snr:>24.16e} "
                     f"{lo.bound:>24.16e} {sat:>24}")
    lines += ["", f"{'transition':>10} {'coherence':>24} {'rho_upper':>24} {'emission':>24}"]
    for o in report.transitions:
        t = o.transition
        label = f"{t.laser}:{t.lower}-{t.upper}"
        lines.append(f"{label:>10} {o.coherence:>24.16e} {o.upper_population:>24.16e} "
                     f"{o.emission_rate:>24.16e}")
    for lv, idx in report.shared_upper:
        lines.append(f"note: upper level {lv} is counted by transitions "
                     f"{[i + 1 for i in idx]} in the bound")
    return "\n".join(lines) + "\n"


def cmd_analyze(args, out):
    scheme, _ = _read(args.file)
    report = analyze(scheme, args.track)
    if _format(args) == "json":
        out.write(dumps(report.to_dict()) + "\n")
    else:
        out.write(_report_table(report))
    return EXIT_OK


def cmd_oracle(args, out):
    scheme, scale = _read(args.file)
    m = analyze_manifold(scheme)
    if args.duration is None:
        duration = 500.0 / reference_rate(scheme)
    else:
        duration = args.duration / scale if args.in_file_units else args.duration
    result = {"evolution": evolve_adiabatic(scheme, m, duration).to_dict()}
    if args.fd:
        result["finite_difference"] = fd_comparison(scheme, m)
    out.write(dumps(result) + "\n")
    return EXIT_OK


def cmd_scan(args, out):
    scheme, scale = _read(args.file)
    space, counts = _space(scheme, scale, args.param, args.in_file_units, need_count=True)
    table = scan(space, counts, args.track, cap=args.cap, threads=args.threads)
    for row in table.rows:
        if row.error:
            print(f"point {row.point}: {row.error}", file=sys.stderr)
    out.write(table.to_csv())
    return EXIT_OK


def cmd_search(args, out):
    scheme, scale = _read(args.file)
    space, _ = _space(scheme, scale, args.param, args.in_file_units, need_count=False)
    factor = scale if args.in_file_units else 1.0
    if args.objective == "snr":
        if args.fix_destruction is None:
            raise UsageError("--objective snr requires --fix-destruction")
        target = args.fix_destruction * factor
        tolerance = (args.tolerance * factor if args.tolerance is not None
                     else 1e-4 * target)
        result = search_max_snr_at_fixed_destruction(
            space, target, tolerance, args.budget, args.seed, args.track, args.laser)
    else:
        result = search_max_saturation(space, args.budget, args.seed, args.track, args.laser)
    out.write(dumps(result.to_dict()) + "\n")
    if not result.feasible:
        print("search found no feasible point", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="dressed-limit",
                     description="Dressed-state phase shifts, SNR and the two-level "
                                 "detection limit for multi-level atom-laser schemes.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, track=True):
        p.add_argument("file", help="scheme file (JSON)")
        p.add_argument("--format", choices=("json", "csv", "table"))
        p.add_argument("--threads", type=int, default=default_threads())
        if track:
            p.add_argument("--track", type=_rule, default=("overlap", None),
                           help="overlap | index:k | min-excited (default overlap)")
        return p

    p = common(sub.add_parser("validate", help="check closure and print photon offsets"),
               track=False)
    p.set_defaults(func=cmd_validate)

    p = common(sub.add_parser("analyze", help="dressed state and all observables"))
    p.set_defaults(func=cmd_analyze)

    p = common(sub.add_parser("oracle", help="time-domain and finite-difference checks"),
               track=False)
    p.add_argument("--duration", type=float,
                   help="ramp duration in s (default 500 / reference rate)")
    p.add_argument("--fd", action="store_true", help="compare coherences with finite differences")
    p.add_argument("--in-file-units", action="store_true",
                   help="read --duration in units of 1 / the file's frequency_scale")
    p.set_defaults(func=cmd_oracle)

    p = common(sub.add_parser("scan", help="grid scan, CSV output"))
    p.add_argument("--param", action="append", default=[], metavar="NAME=LO:HI:N")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--in-file-units", action="store_true",
                   help="read bounds in the file's frequency_scale")
    p.set_defaults(func=cmd_scan)

    p = common(sub.add_parser("search", help="multi-start Nelder-Mead search, JSON output"))
    p.add_argument("--param", action="append", default=[], metavar="NAME=LO:HI")
    p.add_argument("--objective", choices=("saturation", "snr"), default="saturation")
    p.add_argument("--fix-destruction", type=float, metavar="R")
    p.add_argument("--tolerance", type=float,
                   help="allowed |R - target| (default 1e-4 * target)")
    p.add_argument("--laser", type=int)
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--in-file-units", action="store_true",
                   help="read bounds, R and tolerance in the file's frequency_scale")
    p.set_defaults(func=cmd_search)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"dressed-limit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemeError as exc:
        print(f"dressed-limit: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"dressed-limit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DressedLimitError as exc:
        print(f"dressed-limit: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"dressed-limit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
