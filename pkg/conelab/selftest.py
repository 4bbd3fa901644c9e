"""Acceptance battery behind ``conelab selftest``.

Each criterion returns ``(passed, detail)``; the battery runs at reduced
resolution where the numbers allow it.
"""

import logging
import time
from dataclasses import dataclass

import numpy as np
import sympy as sp

from .boundary import circle_spectrum, preset_spectrum
from .conormal import (
    conormal_symbol, example_abcd, g_recursion, invert_conormal, kronecker_defects, laplacian, make_operator,
    nonbijectivity_points, same_point, t as t_symbol, lam as lam_symbol, taylor_sequence,
)
from .domains import (
    DomainKind, PairingElement, adjoint_extension, enumerate_extensions, equivalent, friedrichs_domain,
    indicial_roots, is_selfadjoint, maximal_domain, minimal_domain, pairing_bracket, selfadjoint_extensions,
)
from .ellipticity import DEFAULT_SAMPLES, Sector, check_E3_numeric, check_E3_rule, combine_e3
from .errors import ConeLabError, E3Disagreement, OracleInconclusive
from .mellin_green import bump, green_action, green_action_contour_oracle
from .reports import Report
from .resolvent import (
    Forcing, TimeProfile, detect_spectrum, discrete_domain, heat_solve, norm_decay_fit, regularity_battery,
    spectrum_convergence,
)

logger = logging.getLogger(__name__)

SELFTEST_NODES = 200
SELFTEST_MODES = 3
ROOT_TOL = 1e-12
BRACKET_ZERO = 1e-8


@dataclass(frozen=True)
class Criterion:
    id: str
    title: str
    run: object


def _term_key(q, k):
    value = complex(q)
    return round(value.real, 9), round(value.imag, 9), k


def _span_rank(vectors, keys):
    matrix = np.array([[v.get(key, 0) for key in keys] for v in vectors], dtype=complex)
    return int(np.linalg.matrix_rank(matrix, tol=1e-9)) if matrix.size else 0


def abcd_golden():
    A = example_abcd()
    S = circle_spectrum(SELFTEST_MODES)
    minimal = minimal_domain(A, S, 0)
    space = maximal_domain(A, S, 0).asymptotics
    found = [
        {_term_key(q, k): complex(c) for q, k, c in gen.terms}
        for gen in space.generators
    ]
    # span{ω, ω(t + log t)}: t = t^{-q} at q = -1
    expected = [{_term_key(0, 0): 1}, {_term_key(-1, 0): 1, _term_key(0, 1): 1}]
    keys = sorted({key for v in found + expected for key in v})
    same_span = _span_rank(found, keys) == _span_rank(expected, keys) == _span_rank(found + expected, keys) == 2
    passed = minimal.kind == DomainKind.MINIMAL_PLAIN and minimal.s == 2 and space.dimension == 2 and same_span
    return passed, f"minimal {minimal.kind.value}, dim E = {space.dimension}, span match {same_span}"


def pole_structure():
    problems = []
    for n in (0, 1, 2, 3):
        S = preset_spectrum(n, SELFTEST_MODES)
        points = nonbijectivity_points(conormal_symbol(laplacian(n), S), (-10, 10))
        for mode in S:
            roots = indicial_roots(n, mode.eigenvalue)
            if len(roots) == 2 and sp.simplify(roots[0] + roots[1] - (n - 1)) != 0:
                problems.append(f"n={n}: q+ + q- != n-1 for eigenvalue {mode.eigenvalue}")
            for root in roots:
                if abs(complex(root).real) < 10 and not any(
                    abs(complex(p.q) - complex(root)) <= ROOT_TOL for p in points
                ):
                    problems.append(f"n={n}: indicial root {root} missing")
        if n == 1 and not any(same_point(p.q, 0) and p.order == 2 for p in points):
            problems.append("n=1: no double pole at 0")
        if n == 0 and sorted(complex(p.q).real for p in points) != [-1.0, 0.0]:
            problems.append("n=0: poles are not {-1, 0}")
    return not problems, "; ".join(problems) or "pole sets and symmetry hold for n = 0..3"


def partial_fractions():
    rng = np.random.default_rng(3)
    worst = 0.0
    for A, S in ((laplacian(1), circle_spectrum(SELFTEST_MODES)), (example_abcd(), circle_spectrum(SELFTEST_MODES))):
        for g in invert_conormal(conormal_symbol(A, S)):
            zs = rng.uniform(-4, 4, 100) + 1j * rng.uniform(-4, 4, 100)
            direct = g(zs)
            rebuilt = g.reconstruct(zs)
            worst = max(worst, float(np.max(np.abs(direct - rebuilt) / np.maximum(np.abs(direct), 1e-300))))
    return worst <= ROOT_TOL, f"max relative error {worst:.2e}"


def adjoint_suite():
    failures = []
    for n in (1, 2):
        S = preset_spectrum(n, SELFTEST_MODES)
        for gamma in (sp.Rational(-1, 2), 0, sp.Rational(1, 2)):
            for ext in enumerate_extensions(laplacian(n), S, gamma):
                if not equivalent(adjoint_extension(adjoint_extension(ext)), ext):
                    failures.append(f"biduality n={n} γ={gamma} {ext.describe()}")
        if not is_selfadjoint(friedrichs_domain(S)):
            failures.append(f"Friedrichs not selfadjoint for n={n}")
    circle = circle_spectrum(SELFTEST_MODES)
    selfadjoint = selfadjoint_extensions(circle)
    if len(selfadjoint) != 1 or not equivalent(selfadjoint[0], friedrichs_domain(circle)):
        failures.append(f"n=1 selfadjoint classification gave {len(selfadjoint)} extension(s)")
    omega_only = PairingElement(mode=0, terms=((0, 0, 1),))
    omega_log = PairingElement(mode=0, terms=((0, 1, 1),))
    if abs(pairing_bracket(omega_only, omega_only, circle)) >= BRACKET_ZERO:
        failures.append("bracket(ω, ω) does not vanish")
    if abs(pairing_bracket(omega_log, omega_only, circle)) < BRACKET_ZERO:
        failures.append("bracket(ω log t, ω) vanishes")
    return not failures, "; ".join(failures) or "biduality, classification and brackets agree"


def green_oracle():
    A = laplacian(1)
    g = invert_conormal(conormal_symbol(A, circle_spectrum(SELFTEST_MODES)))
    u = bump()
    t = np.array([0.05, 0.1, 0.15, 0.2])
    worst = 0.0
    # the first strip holds only the double pole at 0 (log case)
    for gamma1, gamma2 in ((0.5, 1.5), (-0.5, 1.5)):
        residues = green_action(g, 1, gamma1, gamma2, u).evaluate(t, mode=0)
        contour = green_action_contour_oracle(g, 1, gamma1, gamma2, u, t)[0]
        scale = max(1.0, float(np.max(np.abs(contour))))
        worst = max(worst, float(np.max(np.abs(residues - contour))) / scale)
    return worst <= 1e-8, f"max relative deviation {worst:.2e}"


def e3_concordance():
    sector = Sector(np.pi / 2)
    disagreements, inconclusive, total = [], 0, 0
    for n in (1, 2):
        S = preset_spectrum(n, SELFTEST_MODES)
        for gamma in (sp.Rational(-1, 2), 0, sp.Rational(1, 2)):
            for ext in enumerate_extensions(laplacian(n), S, gamma):
                total += 1
                try:
                    rule = check_E3_rule(ext, sector)
                    numeric = check_E3_numeric(ext, sector, DEFAULT_SAMPLES)
                    combine_e3(rule, numeric, ext.describe())
                except OracleInconclusive:
                    inconclusive += 1
                except E3Disagreement as exc:
                    disagreements.append(f"n={n} γ={gamma}: {exc}")
    passed = not disagreements and inconclusive <= 0.02 * total
    detail = f"{total} extensions, {len(disagreements)} disagreement(s), {inconclusive} inconclusive"
    return passed, "; ".join([detail, *disagreements])


def resolvent_decay():
    dd = discrete_domain(friedrichs_domain(circle_spectrum(SELFTEST_MODES)), nodes=SELFTEST_NODES)
    fit = norm_decay_fit(dd, np.pi, [1, 10, 100, 1000, 10000])
    passed = -1.1 <= fit.slope <= -0.9 and fit.max_residual <= 1e-7
    return passed, f"slope {fit.slope:.4f}, max residual {fit.max_residual:.1e}"


def disk_spectrum():
    dd = discrete_domain(friedrichs_domain(circle_spectrum(2)))
    found = {(p.mode, p.index): p for p in detect_spectrum(dd, (0, 20), modes=[0, 1])}
    problems = []
    for key, tol in (((0, 1), 1e-2), ((1, 1), 5e-2)):
        point = found.get(key)
        if point is None:
            problems.append(f"no eigenvalue for mode {key[0]}")
        elif abs(point.value - point.bessel_reference(dd)) > tol:
            problems.append(f"mode {key[0]}: {point.value:.5f} vs {point.bessel_reference(dd):.5f}")
    for point, refined in spectrum_convergence(dd, (0, 8), modes=[0]):
        reference = point.bessel_reference(dd)
        if refined is None or abs(refined - reference) > abs(point.value - reference) + 1e-9:
            problems.append(f"refinement does not approach j² on mode {point.mode}")
    return not problems, "; ".join(problems) or "j01² and j11² recovered; refinement converges"


def heat_demo():
    dd = discrete_domain(friedrichs_domain(circle_spectrum(SELFTEST_MODES)), nodes=SELFTEST_NODES)
    zero = heat_solve(dd, Forcing(), 1.0, 10)
    f = bump()
    steady = heat_solve(dd, Forcing(profiles=(f,), time=TimeProfile.CONSTANT), 4.0, 40)
    battery = regularity_battery(dd, (f,), 1.0, 20)
    passed = max(zero.norms) == 0 and steady.steady_state_error <= 1e-4 and battery.within_bound
    return passed, (
        f"zero forcing max {max(zero.norms):.1e}, steady-state error {steady.steady_state_error:.1e}, "
        f"max regularity ratio {battery.max_ratio:.3f}"
    )


def _random_operator(rng, mu: int, index: int):
    def rational():
        return sp.Rational(int(rng.integers(-5, 6)), int(rng.integers(1, 5)))

    coeffs = [lam_symbol + rational() * t_symbol]
    for _ in range(1, mu):
        coeffs.append(rational() + rational() * t_symbol + rational() * t_symbol ** 2)
    coeffs.append(sp.Rational(int(rng.integers(1, 5)), int(rng.integers(1, 4))) + rational() * t_symbol)
    return make_operator(mu, 1, coeffs, name=f"random-{index}")


def kronecker_identity():
    rng = np.random.default_rng(7)
    operators = [laplacian(1), example_abcd()]
    operators += [_random_operator(rng, mu, i) for i, mu in enumerate((2, 3, 3))]
    S = circle_spectrum(2)
    bad = []
    for A in operators:
        F = taylor_sequence(A, S)
        defects = kronecker_defects(F, g_recursion(F))
        if any(d != 0 for row in defects for d in row):
            bad.append(A.name)
    return not bad, f"nonzero defects for {', '.join(bad)}" if bad else f"{len(operators)} operators exact"


CRITERIA = (
    Criterion("A1", "example abcd golden domain", abcd_golden),
    Criterion("A2", "pole structure and symmetry", pole_structure),
    Criterion("A3", "partial-fraction identity", partial_fractions),
    Criterion("A4", "adjoint and selfadjoint suite", adjoint_suite),
    Criterion("A5", "Green operator contour oracle", green_oracle),
    Criterion("A6", "(E3) rule/oracle concordance", e3_concordance),
    Criterion("A7", "resolvent 1/|λ| decay", resolvent_decay),
    Criterion("A8", "disk spectrum against Bessel zeros", disk_spectrum),
    Criterion("A9", "heat equation demo", heat_demo),
    Criterion("A10", "Kronecker recursion identity", kronecker_identity),
)
CRITERIA_IDS = tuple(c.id for c in CRITERIA)


def format_table(results) -> str:
    lines = [f"{'id':<4} {'status':<6} {'seconds':>8}  title"]
    for r in results:
        lines.append(f"{r['id']:<4} {'PASS' if r['passed'] else 'FAIL':<6} {r['seconds']:>8.2f}  {r['title']}")
    return "\n".join(lines) + "\n"


def selftest_report(criteria=None) -> Report:
    selected = [c for c in CRITERIA if criteria is None or c.id in criteria]
    results = []
    for criterion in selected:
        start = time.perf_counter()
        try:
            passed, detail = criterion.run()
        except ConeLabError as exc:
            passed, detail = False, f"{exc.name}: {exc}"
        seconds = time.perf_counter() - start
        logger.info(f"{criterion.id} {'pass' if passed else 'FAIL'} in {seconds:.1f}s: {detail}")
        results.append({
            "id": criterion.id, "title": criterion.title, "passed": bool(passed),
            "detail": detail, "seconds": round(seconds, 3),
        })
    failed = [r["id"] for r in results if not r["passed"]]
    return Report(
        payload={"criteria": results, "failed": failed, "passed": not failed},
        passed=not failed,
        csv_header=("id", "title", "passed", "seconds"),
        csv_rows=[(r["id"], r["title"], r["passed"], r["seconds"]) for r in results],
        table=format_table(results),
    )
