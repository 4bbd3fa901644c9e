"""Pipelines behind the CLI subcommands.

Each builder runs the engine calls for one subcommand and assembles the
output document (without the "config" echo, which the CLI adds), the CSV
rows and the two-column plot data.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .conormal import conormal_symbol, invert_conormal, nonbijectivity_points
from .cutoff import as_pair, as_real
from .domains import (
    ExtensionFilter, adjoint_extension, admissible_interval, enumerate_extensions, equivalent, exact_parameter,
    friedrichs_domain, is_laplacian, is_selfadjoint, maximal_domain, minimal_domain, model_dimension_check,
)
from .ellipticity import check_ellipticity, heat_ellipticity
from .mellin_green import green_action, green_action_contour_oracle
from .resolvent import (
    DiscreteDomain, detect_spectrum, heat_solve, norm_decay_fit, regularity_battery, resolvent_apply,
    spectrum_convergence,
)


logger = logging.getLogger(__name__)


GREEN_ORACLE_TOL = 1e-8


@dataclass
class Report:
    payload: dict
    passed: Optional[bool] = None
    csv_header: tuple = ()
    csv_rows: list = field(default_factory=list)
    plot: list = field(default_factory=list)
    table: str = ""


def poles_report(A, S, strip) -> Report:
    sigma = conormal_symbol(A, S)
    points = nonbijectivity_points(sigma, strip)
    return Report(
        payload={
            "operator": A.to_dict(),
            "spectrum": S.to_dict(),
            "strip": [float(strip[0]), float(strip[1])],
            "symbol": sigma.to_dict(),
            "poles": [p.to_dict() for p in points],
        },
        csv_header=("q_re", "q_im", "order", "modes"),
        csv_rows=[
            (as_real(p.value.real), as_real(p.value.imag), p.order, " ".join(map(str, p.modes))) for p in points
        ],
        plot=[(p.value.real, p.value.imag) for p in points],
    )


def domains_report(A, S, gamma, p, jobs=None) -> Report:
    minimal = minimal_domain(A, S, gamma, p)
    maximal = maximal_domain(A, S, gamma, p, jobs=jobs)
    dim_a, dim_model = model_dimension_check(A, S, gamma)
    payload = {
        "operator": A.to_dict(),
        "spectrum": S.to_dict(),
        "minimal": minimal.to_dict(),
        "maximal": maximal.to_dict(),
        "maximal_asymptotics": maximal.asymptotics.entries(),
        "extensions": [],
        "model_dimension": {"operator": dim_a, "frozen": dim_model, "equal": dim_a == dim_model},
    }
    if is_laplacian(A):
        payload["admissible_interval"] = admissible_interval(S, gamma).to_dict()
        payload["extensions"] = [ext.to_dict() for ext in enumerate_extensions(A, S, gamma, p)]
    entries = payload["maximal_asymptotics"]
    return Report(
        payload=payload,
        csv_header=("q_re", "q_im", "log_powers", "modes"),
        csv_rows=[(e["q"][0], e["q"][1], e["log_powers"], " ".join(map(str, e["modes"]))) for e in entries],
    )


def _friedrichs_or_none(S, gamma, p):
    if gamma == 0 and p == 2:
        return friedrichs_domain(S)
    return None


def extensions_report(A, S, gamma, p, filter=ExtensionFilter.DILATION_INVARIANT) -> Report:
    extensions = enumerate_extensions(A, S, gamma, p, filter)
    friedrichs = _friedrichs_or_none(S, exact_parameter(gamma), exact_parameter(p))
    documents, rows = [], []
    for ext in extensions:
        doc = ext.to_dict()
        doc["selfadjoint"] = is_selfadjoint(ext) if ext.dilation_invariant else None
        doc["friedrichs"] = bool(friedrichs is not None and ext.dilation_invariant and equivalent(ext, friedrichs))
        documents.append(doc)
        rows.append((doc["label"], doc["dimension"], doc["dilation_invariant"], doc["selfadjoint"]))
    return Report(
        payload={
            "operator": A.to_dict(),
            "interval": admissible_interval(S, gamma).to_dict(),
            "count": len(documents),
            "extensions": documents,
        },
        csv_header=("label", "dimension", "dilation_invariant", "selfadjoint"),
        csv_rows=rows,
    )


def adjoint_report(ext) -> Report:
    adjoint = adjoint_extension(ext)
    biduality = equivalent(adjoint_extension(adjoint), ext)
    selfadjoint = is_selfadjoint(ext)
    return Report(
        payload={
            "extension": ext.to_dict(),
            "adjoint": adjoint.to_dict(),
            "biduality": biduality,
            "selfadjoint": selfadjoint,
        },
        passed=biduality,
        csv_header=("extension", "adjoint", "biduality", "selfadjoint"),
        csv_rows=[(ext.describe(), adjoint.describe(), biduality, selfadjoint)],
    )


def check_report(A, ext, sector, method, samples, grid, jobs=None) -> Report:
    report = check_ellipticity(A, ext, sector, method=method, samples=samples, grid=grid, jobs=jobs)
    return Report(
        payload={"operator": A.to_dict(), "extension": ext.to_dict(), "report": report.to_dict()},
        passed=report.overall,
        csv_header=("condition", "passed"),
        csv_rows=[
            ("E1", report.e1.passed),
            ("E2", report.e2.passed),
            ("E3", report.e3.status.value),
            ("overall", report.overall),
        ],
    )


def green_report(A, S, gamma1, gamma2, u, t_samples, oracle: bool = False, tol: float = GREEN_ORACLE_TOL) -> Report:
    g = invert_conormal(conormal_symbol(A, S))
    action = green_action(g, A.n, gamma1, gamma2, u)
    t = np.asarray(t_samples, dtype=float)
    values = action.evaluate(t, mode=u.mode)
    payload = {
        "operator": A.to_dict(),
        "input": u.to_dict(),
        "action": action.to_dict(),
        "samples": [{"t": float(x), "value": as_pair(v)} for x, v in zip(t, values)],
    }
    passed = None
    if oracle:
        contour = green_action_contour_oracle(g, A.n, gamma1, gamma2, u, t).get(u.mode, np.zeros_like(values))
        scale = max(1.0, float(np.max(np.abs(contour))))
        deviation = float(np.max(np.abs(values - contour)) / scale)
        passed = deviation <= tol
        payload["oracle"] = {
            "values": [as_pair(v) for v in contour],
            "max_relative_deviation": as_real(deviation),
            "tolerance": tol,
            "agrees": passed,
        }
    return Report(
        payload=payload,
        passed=passed,
        csv_header=("t", "re", "im"),
        csv_rows=[(float(x), as_real(v.real), as_real(v.imag)) for x, v in zip(t, values)],
        plot=[(float(x), float(v.real)) for x, v in zip(t, values)],
    )


def resolvent_report(dd: DiscreteDomain, lam, f, jobs=None) -> Report:
    result = resolvent_apply(dd, lam, f, jobs)
    payload = result.to_dict()
    payload["solution"] = [
        {"mode": s.mode, "t": [as_real(x) for x in dd.t], "values": [as_pair(v) for v in s.values]}
        for s in result.solutions
    ]
    rows, plot = [], []
    for s in result.solutions:
        for x, v in zip(dd.t, s.values):
            rows.append((s.mode, float(x), as_real(v.real), as_real(v.imag)))
            plot.append((float(x), float(v.real)))
    return Report(
        payload=payload,
        passed=all(d.passed for d in result.diagnostics),
        csv_header=("mode", "t", "re", "im"),
        csv_rows=rows,
        plot=plot,
    )


def decay_report(dd: DiscreteDomain, ray, magnitudes, jobs=None) -> Report:
    fit = norm_decay_fit(dd, ray, magnitudes, jobs)
    return Report(
        payload={"discretization": dd.to_dict(), "decay": fit.to_dict()},
        csv_header=("magnitude", "norm"),
        csv_rows=[(m, as_real(r)) for m, r in fit.norms],
        plot=list(fit.norms),
    )


def spectrum_report(dd: DiscreteDomain, interval, tol, convergence: bool = False, jobs=None) -> Report:
    ext = dd.extension
    friedrichs = _friedrichs_or_none(ext.spectrum, ext.gamma, ext.p)
    reference = friedrichs is not None and ext.dilation_invariant and equivalent(ext, friedrichs)
    if convergence:
        pairs = spectrum_convergence(dd, interval, tol, jobs=jobs)
    else:
        pairs = [(point, None) for point in detect_spectrum(dd, interval, tol, jobs=jobs)]
    documents, rows = [], []
    for point, refined in pairs:
        doc = point.to_dict()
        if reference:
            doc["bessel_reference"] = as_real(point.bessel_reference(dd))
        if convergence:
            doc["refined"] = as_real(refined) if refined is not None else None
        documents.append(doc)
        rows.append((point.mode, point.index, as_real(point.value)))
    return Report(
        payload={
            "discretization": dd.to_dict(),
            "interval": [float(interval[0]), float(interval[1])],
            "tolerance": tol,
            "points": documents,
        },
        csv_header=("mode", "index", "value"),
        csv_rows=rows,
        plot=[(point.mode, point.value) for point, _ in pairs],
    )


def heat_report(dd: DiscreteDomain, forcing, T, steps, q, scheme, battery: bool = False, jobs=None) -> Report:
    ellipticity = heat_ellipticity(dd.extension, jobs=jobs)
    if not ellipticity.overall:
        logger.warning(f"{dd.extension.describe()} is not shown elliptic at θ = π/2; the heat run may not converge")
    result = heat_solve(dd, forcing, T, steps, q, scheme, jobs)
    payload = {"discretization": dd.to_dict(), "forcing": forcing.to_dict(), "heat": result.to_dict()}
    payload["ellipticity"] = ellipticity.to_dict()
    passed = None
    if battery:
        report = regularity_battery(dd, forcing.profiles, T, steps, q, scheme, jobs)
        payload["regularity"] = report.to_dict()
        passed = report.within_bound
    return Report(
        payload=payload,
        passed=passed,
        csv_header=("time", "norm"),
        csv_rows=[(as_real(t), as_real(v)) for t, v in zip(result.times, result.norms)],
        plot=list(zip(result.times, result.norms)),
    )
