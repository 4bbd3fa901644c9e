"""Command-line surface: ``python manage.py conelab <subcommand> [flags]``.

``run`` parses the flags, loads the inputs, calls one builder from
``reports`` and writes a single JSON document (or CSV) to ``stdout``.
Every document carries the effective knobs under ``"config"``.

Exit codes: 0 success/pass, 1 check failure, 2 usage error, 3 toolkit error.
"""

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from django.conf import settings
from rest_framework.renderers import JSONRenderer

from . import reports
from .boundary import preset_spectrum
from .conormal import PRESET_NAMES, preset_operator
from .domains import (
    ExtensionFilter, exact_parameter, friedrichs_domain, maximal_extension, minimal_extension,
)
from .ellipticity import DEFAULT_GRID, DEFAULT_SAMPLES, E3Method, Sector
from .errors import ConeLabError, InvalidDocument
from .mellin_green import bump
from .resolvent import Forcing, Scheme, TimeProfile, discrete_domain, ground_state_profile, lp_weight
from .selftest import CRITERIA_IDS, selftest_report
from .serializers import RunConfigSerializer, load_extension, load_operator, load_radial, load_spectrum
from .workers import resolve_jobs

logger = logging.getLogger(__name__)

SUBCOMMANDS = (
    "poles", "domains", "extensions", "adjoint", "check", "green", "resolvent", "spectrum", "heat", "selftest",
)
EXTENSION_PRESETS = ("friedrichs", "minimal", "maximal")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_ERROR = 3

# tolerances a flag may override, with their defaults
TOLERANCES = {
    "spectrum": 1e-10,
    "green_oracle": reports.GREEN_ORACLE_TOL,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of printing and exiting on bad flags."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _complex(text: str) -> complex:
    """``-1``, ``5,3`` (re,im) or Python's ``-3.5+3.5j``."""
    try:
        if "," in text:
            re, im = text.split(",", 1)
            return complex(float(re), float(im))
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a complex number")


def _tolerance(text: str) -> tuple:
    name, _, value = text.partition("=")
    name = name.strip().replace("-", "_")
    if name not in TOLERANCES:
        raise argparse.ArgumentTypeError(f"unknown tolerance {name!r}; choose one of {', '.join(TOLERANCES)}")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {name} needs a number, got {value!r}")


def build_parser() -> _Parser:
    parser = _Parser(prog="conelab", description="Cone differential operator toolkit.", allow_abbrev=False)
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--operator", default="laplacian", help=f"preset ({', '.join(PRESET_NAMES)}) or @file.json")
    parser.add_argument("--n", type=int, default=None, help="dimension of the cross-section")
    parser.add_argument("--modes", type=int, default=None, help="number of boundary modes kept")
    parser.add_argument("--spectrum", default=None, help="@file.json with a boundary spectrum")
    parser.add_argument("--gamma", default=None, help="weight γ (number or 'p/q')")
    parser.add_argument("--p", default="2", help="integrability index p in (1, ∞)")
    parser.add_argument("--theta", type=float, default=math.pi / 2, help="sector half-angle")
    parser.add_argument("--strip", type=float, nargs=2, default=[-3.0, 3.0], metavar=("A", "B"))
    parser.add_argument("--extension", default="friedrichs", help=f"{', '.join(EXTENSION_PRESETS)} or @file.json")
    parser.add_argument("--filter", default=ExtensionFilter.DILATION_INVARIANT.value,
                        choices=[f.value for f in ExtensionFilter])
    parser.add_argument("--e3-method", default=E3Method.BOTH.value, choices=[m.value for m in E3Method])
    parser.add_argument("--grid", type=int, default=DEFAULT_GRID, help="(E1) symbol grid resolution")
    parser.add_argument("--csv", action="store_true", help="write CSV rows instead of JSON")
    parser.add_argument("--plot-data", default=None, metavar="PATH", help="write x y columns to PATH")
    parser.add_argument("--jobs", type=int, default=None)
    parser.add_argument("--nodes", type=int, default=None, help="radial grid nodes")
    parser.add_argument("--t-min", type=float, default=None, help="left end of the radial grid")
    parser.add_argument("--tol", type=_tolerance, action="append", default=[], metavar="NAME=VALUE")
    # green
    parser.add_argument("--gamma1", type=float, default=0.5)
    parser.add_argument("--gamma2", type=float, default=1.5)
    parser.add_argument("--input", default=None, help="@file.json or inline radial function document")
    parser.add_argument("--t", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.3], dest="t_samples")
    parser.add_argument("--oracle", action="store_true")
    # resolvent / spectrum / heat
    parser.add_argument("--lam", type=_complex, default=complex(-1.0))
    parser.add_argument("--f", default=None, help="@file.json radial function, or 'ground-state'")
    parser.add_argument("--ray", type=float, default=math.pi, help="arg λ of the decay ray")
    parser.add_argument("--magnitudes", type=float, nargs="+", default=None)
    parser.add_argument("--interval", type=float, nargs=2, default=[0.0, 20.0], metavar=("LOW", "HIGH"))
    parser.add_argument("--convergence", action="store_true")
    parser.add_argument("--T", type=float, default=1.0, dest="T")
    parser.add_argument("--steps", type=int, default=50)
    parser.add_argument("--q", type=float, default=2.0)
    parser.add_argument("--scheme", default=Scheme.EULER.value, choices=[s.value for s in Scheme])
    parser.add_argument("--time-profile", default=TimeProfile.CONSTANT._value_, choices=[t._value_ for t in TimeProfile])
    parser.add_argument("--battery", action="store_true")
    # selftest
    parser.add_argument("--criteria", nargs="+", default=None, choices=CRITERIA_IDS)
    return parser


# ---------------------------------------------------------------------------
# Input loading
# ---------------------------------------------------------------------------

def _read_document(ref: str, what: str):
    """``@path`` reads a JSON file; anything else is parsed as inline JSON."""
    text = ref
    if ref.startswith("@"):
        path = Path(ref[1:])
        try:
            text = path.read_text()
        except OSError as exc:
            raise InvalidDocument(f"cannot read the {what} file {path}: {exc.strerror}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidDocument(f"the {what} document is not valid JSON: {exc.msg} (line {exc.lineno})")


def _operator(args):
    if args.operator.startswith("@"):
        return load_operator(_read_document(args.operator, "operator"))
    if args.operator not in PRESET_NAMES:
        raise UsageError(f"unknown operator {args.operator!r}; choose one of {', '.join(PRESET_NAMES)} or @file")
    return preset_operator(args.operator, args.n)


def _spectrum(args, A):
    if args.spectrum:
        return load_spectrum(_read_document(args.spectrum, "spectrum"))
    return preset_spectrum(A.n, args.modes)


def _extension(args, S, gamma, p):
    ref = args.extension
    if ref.startswith("@"):
        return load_extension(_read_document(ref, "extension"), S)
    if ref == "friedrichs":
        return friedrichs_domain(S, gamma, p)
    if ref == "minimal":
        return minimal_extension(S, gamma, p)
    if ref == "maximal":
        return maximal_extension(S, gamma, p)
    raise UsageError(f"unknown extension {ref!r}; choose one of {', '.join(EXTENSION_PRESETS)} or @file")


def _radial(ref, dd=None):
    if ref is None:
        return bump()
    if ref == "ground-state":
        if dd is None:
            raise UsageError("'ground-state' is only available for the radial solvers")
        return ground_state_profile(dd)
    return load_radial(_read_document(ref, "radial function"))


def _config(args, tolerances) -> dict:
    raw = {
        "subcommand": args.subcommand,
        "operator": args.operator,
        "n": args.n,
        "modes": args.modes,
        "spectrum_file": args.spectrum,
        "gamma": args.gamma,
        "p": args.p,
        "theta": args.theta,
        "strip": list(args.strip),
        "extension": args.extension,
        "filter": args.filter,
        "e3_method": args.e3_method,
        "nodes": args.nodes,
        "t_min": args.t_min,
        "jobs": args.jobs,
        "tolerances": tolerances,
    }
    serializer = RunConfigSerializer(data=raw)
    if not serializer.is_valid():
        raise UsageError(f"invalid options: {json.dumps(serializer.errors)}")
    return raw


# ---------------------------------------------------------------------------
# Subcommand pipelines
# ---------------------------------------------------------------------------

def _gamma(args, default=0):
    return exact_parameter(args.gamma) if args.gamma is not None else exact_parameter(default)


def _discrete(args, A, S, gamma, p):
    return discrete_domain(_extension(args, S, gamma, p), t_min=args.t_min, nodes=args.nodes)


def _dispatch(args, tolerances) -> reports.Report:
    if args.subcommand == "selftest":
        return selftest_report(args.criteria)

    A = _operator(args)
    S = _spectrum(args, A)
    p = exact_parameter(args.p)
    gamma = _gamma(args)
    sub = args.subcommand

    if sub == "poles":
        return reports.poles_report(A, S, args.strip)
    if sub == "domains":
        return reports.domains_report(A, S, gamma, p, jobs=args.jobs)
    if sub == "extensions":
        return reports.extensions_report(A, S, gamma, p, args.filter)
    if sub == "adjoint":
        return reports.adjoint_report(_extension(args, S, gamma, p))
    if sub == "check":
        # the sector conditions are stated for −A (−Δ for the Laplacian preset)
        return reports.check_report(
            A.negated(), _extension(args, S, gamma, p), Sector(args.theta), args.e3_method,
            DEFAULT_SAMPLES, args.grid, jobs=args.jobs,
        )
    if sub == "green":
        u = _radial(args.input)
        return reports.green_report(
            A, S, args.gamma1, args.gamma2, u, args.t_samples, oracle=args.oracle, tol=tolerances["green_oracle"],
        )
    if sub == "resolvent":
        dd = _discrete(args, A, S, gamma, p)
        if args.magnitudes:
            return reports.decay_report(dd, args.ray, args.magnitudes, jobs=args.jobs)
        return reports.resolvent_report(dd, args.lam, _radial(args.f, dd), jobs=args.jobs)
    if sub == "spectrum":
        dd = _discrete(args, A, S, gamma, p)
        return reports.spectrum_report(
            dd, args.interval, tolerances["spectrum"], convergence=args.convergence, jobs=args.jobs,
        )
    if sub == "heat":
        gamma = _gamma(args, default=lp_weight(A.n, p))
        dd = _discrete(args, A, S, gamma, p)
        forcing = Forcing(profiles=(_radial(args.f, dd),), time=TimeProfile(args.time_profile))
        return reports.heat_report(
            dd, forcing, args.T, args.steps, args.q, Scheme(args.scheme), battery=args.battery, jobs=args.jobs,
        )
    raise UsageError(f"unknown subcommand {sub!r}")


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _render(document) -> str:
    return JSONRenderer().render(document, renderer_context={'indent': 2}).decode() + "\n"


def _write_csv(report: reports.Report, stdout):
    writer = csv.writer(stdout, lineterminator="\n")
    writer.writerow(report.csv_header)
    writer.writerows(report.csv_rows)


def _write_plot(report: reports.Report, path: str):
    lines = [f"{float(x):.12g} {float(y):.12g}" for x, y in report.plot]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def run(subcommand: str, argv=(), stdout=None, stderr=None) -> int:
    """Run one subcommand; returns the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    config = {"subcommand": subcommand}
    try:
        args = build_parser().parse_args([subcommand, *argv])
        if args.modes is None:
            args.modes = getattr(settings, 'CONE_LAB_MODES', 6)
        if args.nodes is None:
            args.nodes = getattr(settings, 'CONE_LAB_GRID_NODES', 400)
        if args.t_min is None:
            args.t_min = getattr(settings, 'CONE_LAB_T_MIN', 1e-6)
        args.jobs = resolve_jobs(args.jobs)
        tolerances = {**TOLERANCES, **dict(args.tol)}
        config = _config(args, tolerances)
    except UsageError as exc:
        stdout.write(_render({"config": config, "error": "UsageError", "message": str(exc)}))
        return EXIT_USAGE
    except SystemExit as exc:
        # --help
        return EXIT_OK if not exc.code else EXIT_USAGE

    try:
        report = _dispatch(args, tolerances)
    except UsageError as exc:
        stdout.write(_render({"config": config, "error": "UsageError", "message": str(exc)}))
        return EXIT_USAGE
    except ConeLabError as exc:
        logger.error(f"{subcommand} failed: {exc.name}: {exc}")
        stdout.write(_render({"config": config, **exc.to_dict()}))
        return EXIT_ERROR
    except ValueError as exc:
        # contract violations raised by the engine with a plain ValueError
        logger.error(f"{subcommand} failed: {exc}")
        stdout.write(_render({"config": config, "error": "ValueError", "message": str(exc)}))
        return EXIT_ERROR

    if report.table:
        stderr.write(report.table)
    if args.plot_data:
        _write_plot(report, args.plot_data)
    if args.csv:
        _write_csv(report, stdout)
    else:
        stdout.write(_render({"config": config, **report.payload}))
    if report.passed is False:
        logger.warning(f"{subcommand}: check failed")
        return EXIT_FAILED
    return EXIT_OK
