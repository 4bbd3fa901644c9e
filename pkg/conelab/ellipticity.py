"""
Ellipticity conditions for closed extensions

(E1) symbols: the interior principal symbol and the rescaled symbol of the
     checked operator take no value in the sector Λ_θ = {|arg z| >= θ} ∪ {0}
(E2) the extension domain is invariant under dilations t ↦ ρt, checked on
     the generator span with θ = t∂_t:
     θ(t^{−q} log^k t) = −q t^{−q} log^k t + k t^{−q} log^{k−1} t
(E3) the model cone operator on the extension has no spectrum in Λ_θ, by
     - the rule systems for the cone Laplacian (maximal/minimal in high
       dimension, the pairing rules for dim B <= 3)
     - a numerical oracle: per mode and sample λ the solution of
       (λ + Δ)u = 0 decaying at infinity is integrated backwards, its
       behaviour at t -> 0 classified against the indicial roots, and λ is
       spectral iff that behaviour is admissible in the domain

The checked operator is −Δ for the Laplacian presets, so spectral values of
the model operator lie on [0, ∞) and every θ > 0 separates them from Λ_θ.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np
import sympy as sp
from scipy import integrate, linalg

from .boundary import BoundarySpectrum
from .conormal import ConeOperator, lam, rescaled_symbol, t as t_symbol
from .cutoff import as_pair, as_real
from .domains import (
    Extension, ExtensionFilter, SelectionKind, _complement, admissible_interval, compare, enumerate_extensions,
    equivalent, extension_vectors, indicial_roots, is_laplacian, laplacian, make_selection, maximal_extension,
    minimal_extension, _coordinates,
)
from .errors import (
    E3Disagreement, OracleInconclusive, SampleOutsideSector, UnsupportedOperator, WeightOutOfRange,
)
from .workers import parallel_map

logger = logging.getLogger(__name__)

DEFAULT_GRID = 256
DEFAULT_SAMPLES = (-1.0 + 0j, -10.0 + 0j, 5.0 * np.exp(0.75j * np.pi))
SLOPE_TOL = 0.05
PRESENCE_TOL = 1e-6
ORACLE_T_MIN = 1e-6
ORACLE_DECAY = 50.0
HEAT_SECTOR = np.pi / 2


class E3Status(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    NOT_COVERED = "not-covered-by-paper-rules"
    DISAGREEMENT = "disagreement"


class E3Method(str, Enum):
    RULE = "rule"
    NUMERIC = "numeric"
    BOTH = "both"


@dataclass(frozen=True)
class Sector:
    theta: float

    def __post_init__(self):
        if not 0 <= self.theta < np.pi:
            raise ValueError(f"sector angle θ must lie in [0, π), got {self.theta}")

    def contains(self, value) -> bool:
        value = complex(value)
        if value == 0 or self.theta == 0:
            return True
        return abs(np.angle(value)) >= self.theta - 1e-12

    def root_angles(self, mu: int) -> tuple:
        """Σ = {η : θ/μ <= |arg η| <= π/μ} maps onto Λ_θ under η ↦ η^μ."""
        return self.theta / mu, np.pi / mu

    def in_root_sector(self, eta, mu: int) -> bool:
        lo, hi = self.root_angles(mu)
        arg = abs(np.angle(complex(eta)))
        return complex(eta) == 0 or lo - 1e-12 <= arg <= hi + 1e-12

    def to_dict(self):
        return {"theta": self.theta}


# ---------------------------------------------------------------------------
# (E1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class E1Verdict:
    passed: bool
    grid: int
    witness: Optional[dict] = None
    value_range: tuple = ()
    all_real: bool = True

    def to_dict(self):
        return {
            "passed": self.passed,
            "grid": [self.grid, self.grid],
            "witness": self.witness,
            "value_range": [as_real(v) for v in self.value_range],
            "all_real": self.all_real,
        }


def _principal_in_t(A: ConeOperator):
    """Per j: coefficient of λ^{(μ−j)/2} in a_j(t) as a callable of t (0 when μ−j is odd)."""
    table = []
    for j, coeff in enumerate(A.coeffs):
        order = A.mu - j
        if order % 2:
            table.append(lambda x: 0.0 * x)
            continue
        part = sp.Poly(coeff, lam).coeff_monomial(lam ** (order // 2))
        table.append(sp.lambdify(t_symbol, part, 'numpy'))
    return table


def interior_symbol_grid(A: ConeOperator, grid: int = DEFAULT_GRID) -> np.ndarray:
    """Principal symbol on the unit cosphere of the cone metric, t in (0, 1], angle φ."""
    phi = np.linspace(-np.pi / 2, np.pi / 2, grid)
    ts = np.linspace(1.0 / grid, 1.0, grid)
    table = _principal_in_t(A)
    cos2 = np.cos(phi) ** 2
    sin = np.sin(phi)
    values = np.zeros((grid, grid), dtype=complex)
    for j, fn in enumerate(table):
        coeff = np.broadcast_to(np.asarray(fn(ts), dtype=complex), ts.shape)
        if not np.any(coeff):
            continue
        power = (A.mu - j) // 2
        values += np.outer(coeff, (-cos2) ** power * (-1j * sin) ** j)
    return values


def check_E1(A: ConeOperator, sector: Sector, grid: int = DEFAULT_GRID) -> E1Verdict:
    """Symbol values of A on the grid must avoid Λ_θ (pass the operator actually checked, e.g. −Δ)."""
    phi = np.linspace(-np.pi / 2, np.pi / 2, grid)
    rescaled = rescaled_symbol(A)(np.cos(phi) ** 2, np.sin(phi))
    interior = interior_symbol_grid(A, grid)
    witness = None
    for label, values, coords in (
        ("rescaled", rescaled, lambda idx: {"xi_norm2": float(np.cos(phi[idx[0]]) ** 2), "tau": float(np.sin(phi[idx[0]]))}),
        ("interior", interior, lambda idx: {
            "t": float(np.linspace(1.0 / grid, 1.0, grid)[idx[0]]),
            "xi_norm2": float(np.cos(phi[idx[1]]) ** 2), "tau": float(np.sin(phi[idx[1]])),
        }),
    ):
        inside = np.vectorize(sector.contains)(values)
        if np.any(inside):
            idx = np.unravel_index(np.argmax(inside), values.shape)
            witness = {"symbol": label, **coords(idx), "value": as_pair(values[idx])}
            break
    combined = np.concatenate([np.ravel(rescaled), np.ravel(interior)])
    all_real = bool(np.all(np.abs(combined.imag) <= 1e-12))
    verdict = E1Verdict(
        passed=witness is None, grid=grid, witness=witness,
        value_range=(float(np.min(combined.real)), float(np.max(combined.real))), all_real=all_real,
    )
    if not verdict.passed:
        logger.info(f"E1 fails for {A.name} at θ={sector.theta}: {witness}")
    return verdict


# ---------------------------------------------------------------------------
# (E2)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class E2Verdict:
    passed: bool
    offending: tuple = ()

    def to_dict(self):
        return {"passed": self.passed, "offending": list(self.offending)}


def dilation_matrix(ext: Extension) -> np.ndarray:
    """θ = t∂_t on the coordinates (q, log power, mode, component) of ⊕ E_q."""
    keys = _coordinates(ext.interval)
    index = {key: i for i, key in enumerate(keys)}
    D = np.zeros((len(keys), len(keys)), dtype=complex)
    for key, col in index.items():
        qi, k, mode, i = key
        q = complex(ext.interval.exponents[qi].q)
        D[col, col] = -q
        if k >= 1:
            D[index[(qi, k - 1, mode, i)], col] = k
    return D


def check_E2(ext: Extension) -> E2Verdict:
    _, S = extension_vectors(ext)
    if S.shape[0] == 0:
        return E2Verdict(passed=True)
    D = dilation_matrix(ext)
    images = S @ D.T
    base = np.linalg.matrix_rank(S, tol=1e-9)
    offending = []
    for r in range(S.shape[0]):
        if np.linalg.matrix_rank(np.vstack([S, images[r:r + 1]]), tol=1e-9) > base:
            offending.append(r)
    names = _row_names(ext)
    return E2Verdict(passed=not offending, offending=tuple(names[r] for r in offending))


def _row_names(ext: Extension) -> list:
    names = []
    for choice, space in zip(ext.choices, ext.interval.exponents):
        for mode in space.modes:
            count = choice.rows_for(space, mode).shape[0]
            logs = 2 if space.log and choice.kind == SelectionKind.FULL else 1
            names.extend([f"Ê_q at q={float(space.q):g}, mode {mode}"] * (count * logs))
    for gen in ext.generators:
        terms = " + ".join(f"{complex(c):g}·t^{-complex(q).real:g}·log^{k}" for q, k, c in gen.terms)
        names.append(f"generator on mode {gen.mode}: {terms}")
    return names


# ---------------------------------------------------------------------------
# (E3) rule systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RuleVerdict:
    passed: bool
    rule: str
    violations: tuple = ()

    def to_dict(self):
        return {"passed": self.passed, "rule": self.rule, "violations": list(self.violations)}


def _check_weight(ext: Extension):
    bound = sp.Rational(ext.n + 1, 2)
    if abs(ext.gamma) >= bound:
        raise WeightOutOfRange(f"|γ| = {abs(ext.gamma)} must be below (n+1)/2 = {bound}")


def _same_selection(a, b, space) -> bool:
    if space.log:
        return a.kind == b.kind
    for mode in space.modes:
        ra, rb = a.rows_for(space, mode), b.rows_for(space, mode)
        if ra.shape[0] != rb.shape[0]:
            return False
        if ra.shape[0] and np.linalg.matrix_rank(np.vstack([ra, rb]), tol=1e-9) != ra.shape[0]:
            return False
    return True


def check_E3_rule(ext: Extension, sector: Optional[Sector] = None) -> RuleVerdict:
    """Rules for the cone Laplacian; a failing rule means "not covered", not "not elliptic"."""
    _check_weight(ext)
    n, gamma = ext.n, ext.gamma
    if not ext.dilation_invariant:
        return RuleVerdict(passed=False, rule="dilation-invariant", violations=("extension is not dilation invariant",))

    if n >= 3:
        is_max = equivalent(ext, maximal_extension(ext.spectrum, gamma, ext.p))
        is_min = equivalent(ext, minimal_extension(ext.spectrum, gamma, ext.p))
        passed = (is_max and gamma >= 0) or (is_min and gamma <= 0)
        violations = () if passed else (
            f"dim B = {n + 1} >= 4 needs the maximal extension for γ >= 0 or the minimal one for γ <= 0",
        )
        return RuleVerdict(passed=passed, rule="high-dimension", violations=violations)

    violations = []
    for choice, space in zip(ext.choices, ext.interval.exponents):
        dual = sp.simplify(n - 1 - space.q)
        partner_space = ext.interval.find(dual)
        q_text = f"q={float(space.q):g}"
        if partner_space is not None:
            kind, basis = _complement(choice, space)
            expected = make_selection(partner_space, kind, basis)
            partner = ext.selection_for(partner_space.q)
            if not _same_selection(expected, partner, partner_space):
                violations.append(f"{q_text}: Ê_q^⊥ must equal Ê at the dual exponent {float(dual):g}")
        elif gamma >= 0 and choice.kind != SelectionKind.FULL:
            violations.append(f"{q_text}: exponents outside I_(-γ) must be selected fully for γ >= 0")
        elif gamma <= 0 and choice.kind != SelectionKind.ZERO:
            violations.append(f"{q_text}: exponents outside I_(-γ) must be left out for γ <= 0")
    return RuleVerdict(passed=not violations, rule="pairing", violations=tuple(violations))


# ---------------------------------------------------------------------------
# (E3) numerical oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NearZeroBehaviour:
    """Classified t -> 0 behaviour of the decaying solution on one mode."""
    slope: Optional[float]
    leading: float
    components: tuple  # ((q, log_power, relative size), ...)

    def to_dict(self):
        return {
            "slope": as_real(self.slope) if self.slope is not None else None,
            "leading_q": as_real(self.leading),
            "components": [{"q": as_real(q), "log_power": k, "coefficient": as_pair(c)} for q, k, c in self.components],
        }


def _frobenius(n: int, eigenvalue: float, lam_value: complex, r: float, t):
    """t^r Σ c_k t^{2k} with c_k P(r + 2k) = −λ c_{k−1}, P(x) = x² + (n−1)x + λ_j."""
    t = np.asarray(t, dtype=float)
    term = np.ones_like(t, dtype=complex)
    total = term.copy()
    c = 1.0 + 0j
    for k in range(1, 400):
        x = r + 2 * k
        denom = x * x + (n - 1) * x + eigenvalue
        c = -lam_value * c / denom
        term = c * t ** (2 * k)
        total = total + term
        if np.max(np.abs(term)) < 1e-17 * np.max(np.abs(total)):
            break
    return t ** r * total


@lru_cache(maxsize=1024)
def decaying_behaviour(n: int, eigenvalue: float, lam_value: complex, t_min: float = ORACLE_T_MIN) -> NearZeroBehaviour:
    """Integrate θ²u + (n−1)θu + (λ_j + λt²)u = 0 from t_max = 50/√|λ| down to t_min."""
    half = (n - 1) / 2
    nu = float(np.sqrt(half * half - eigenvalue))
    kappa = np.sqrt(-lam_value + 0j)
    if kappa.real < 0:
        kappa = -kappa
    t_max = ORACLE_DECAY / np.sqrt(abs(lam_value))
    s_max, s_min = np.log(t_max), np.log(t_min)
    correction = (4 * nu * nu - 1) / (8 * kappa)
    y0 = np.array([1.0 + 0j, -kappa * t_max - half - correction / t_max], dtype=complex)

    def rhs(s, y):
        return [y[1], -(n - 1) * y[1] - (eigenvalue + lam_value * np.exp(2 * s)) * y[0]]

    sol = integrate.solve_ivp(rhs, (s_max, s_min), y0, method='DOP853', rtol=1e-11, atol=1e-300, dense_output=True)
    if not sol.success:
        raise OracleInconclusive(f"backward integration failed on λ_j={eigenvalue}, λ={lam_value}: {sol.message}")

    exact = sp.Integer(int(eigenvalue)) if float(eigenvalue).is_integer() else sp.Float(eigenvalue)
    roots = [float(q) for q in indicial_roots(n, exact)]
    s_fit = np.linspace(s_min, s_min + np.log(10.0), 60)
    u_fit = sol.sol(s_fit)[0]

    if len(roots) == 1:
        q = roots[0]
        basis = np.column_stack([np.ones_like(s_fit), s_fit]) * np.exp(-q * s_fit)[:, None]
        coeffs, *_ = np.linalg.lstsq(basis.astype(complex), u_fit, rcond=None)
        c0, c1 = coeffs
        scale = abs(c0) + abs(c1)
        components = [(q, 0, c0 / scale), (q, 1, c1 / scale)]
        components = tuple((cq, ck, cc) for cq, ck, cc in components if abs(cc) > PRESENCE_TOL)
        return NearZeroBehaviour(slope=None, leading=q, components=components)

    slope = float(np.polyfit(s_fit, np.log(np.abs(u_fit)), 1)[0])
    matches = [q for q in roots if abs(-slope - q) < SLOPE_TOL]
    if len(matches) != 1:
        raise OracleInconclusive(
            f"near-0 slope {slope:.4f} does not single out one of the indicial roots {roots} (λ_j={eigenvalue})"
        )
    leading = matches[0]
    q_plus, q_minus = roots
    if abs((q_plus - q_minus) / 2 - round((q_plus - q_minus) / 2)) < 1e-12:
        # resonant pair: the subleading part carries a logarithm; keep it as present
        components = ((leading, 0, 1.0 + 0j), (q_minus, 0, 1.0 + 0j)) if leading == q_plus else ((leading, 0, 1.0 + 0j),)
        return NearZeroBehaviour(slope=slope, leading=leading, components=components)

    t_hi = 0.5 / np.sqrt(abs(lam_value))
    t_lo = max(10 * t_min, 1e-3 * t_hi)
    t_pts = np.geomspace(t_lo, t_hi, 80)
    u_pts = sol.sol(np.log(t_pts))[0]
    basis = np.column_stack([
        _frobenius(n, eigenvalue, lam_value, -q_plus, t_pts),
        _frobenius(n, eigenvalue, lam_value, -q_minus, t_pts),
    ])
    (a, b), *_ = np.linalg.lstsq(basis, u_pts, rcond=None)
    # each component measured by its size at the fit scale t_hi
    sizes = (a * basis[-1, 0], b * basis[-1, 1])
    norm = max(abs(x) for x in sizes)
    components = tuple(
        (q, 0, size / norm) for q, size in zip((q_plus, q_minus), sizes) if abs(size) > PRESENCE_TOL * norm
    )
    return NearZeroBehaviour(slope=slope, leading=leading, components=components)


@dataclass(frozen=True)
class SampleResult:
    lam: complex
    behaviour: NearZeroBehaviour
    kernel_dim: int

    def to_dict(self):
        return {"lambda": as_pair(self.lam), "kernel_dim": self.kernel_dim, **self.behaviour.to_dict()}


@dataclass(frozen=True)
class ModeVerdict:
    mode: int
    multiplicity: int
    admissible: int
    samples: tuple = ()

    @property
    def index_ok(self) -> bool:
        return self.admissible == self.multiplicity

    @property
    def spectral(self) -> bool:
        return any(s.kernel_dim > 0 for s in self.samples)

    @property
    def passed(self) -> bool:
        return self.index_ok and not self.spectral

    def to_dict(self):
        return {
            "mode": self.mode,
            "multiplicity": self.multiplicity,
            "admissible_behaviours": self.admissible,
            "index_ok": self.index_ok,
            "spectral": self.spectral,
            "samples": [s.to_dict() for s in self.samples],
        }


@dataclass(frozen=True)
class NumericVerdict:
    modes: tuple = ()

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.modes)

    def to_dict(self):
        return {"passed": self.passed, "modes": [m.to_dict() for m in self.modes]}


def _complement_projector(ext: Extension):
    """Coordinates of ⊕ E_q and the orthogonal projector onto the complement of Ê."""
    keys, S = extension_vectors(ext)
    if S.shape[0]:
        basis = linalg.orth(S.T)
        P = np.eye(len(keys)) - basis @ basis.conj().T
    else:
        P = np.eye(len(keys), dtype=complex)
    index = {key: i for i, key in enumerate(keys)}
    return keys, index, P, S


def _admissible_count(ext: Extension, mode: int, keys, S) -> int:
    """Near-0 behaviours the domain allows on the mode: D_min roots plus dim of Ê on the mode."""
    m = ext.spectrum[mode].multiplicity
    roots = indicial_roots(ext.n, ext.spectrum[mode].eigenvalue)
    per_root = 2 * m if len(roots) == 1 else m
    count = sum(per_root for q in roots if compare(q, ext.interval.lower) <= 0)
    cols = [i for i, key in enumerate(keys) if key[2] == mode]
    if S.shape[0] and cols:
        own = [r for r in range(S.shape[0]) if np.allclose(np.delete(S[r], cols), 0)]
        if own:
            count += int(np.linalg.matrix_rank(S[own][:, cols], tol=1e-9))
    return count


def _kernel_dim(ext: Extension, mode: int, behaviour: NearZeroBehaviour, index, P) -> int:
    m = ext.spectrum[mode].multiplicity
    W = np.zeros((P.shape[0], m), dtype=complex)
    for q, k, coeff in behaviour.components:
        if compare(q, ext.interval.upper) >= 0:
            return 0  # not even in the maximal domain
        if compare(q, ext.interval.lower) <= 0:
            continue
        space = ext.interval.find(q)
        qi = ext.interval.exponents.index(space)
        for i in range(m):
            W[index[(qi, k, mode, i)], i] += coeff
    if not np.any(W):
        return m
    image = P @ W
    return m - int(np.linalg.matrix_rank(image, tol=1e-6 * max(1.0, np.max(np.abs(W)))))


def check_E3_numeric(ext: Extension, sector: Sector, samples=DEFAULT_SAMPLES, t_min: float = ORACLE_T_MIN,
                     jobs=None) -> NumericVerdict:
    for sample in samples:
        if complex(sample) == 0 or not sector.contains(sample):
            raise SampleOutsideSector(f"sample λ={sample} is not in Λ_θ \\ {{0}} (θ={sector.theta})")
    keys, index, P, S = _complement_projector(ext)

    def per_mode(mode):
        eigenvalue = float(ext.spectrum[mode].eigenvalue)
        results = []
        for sample in samples:
            behaviour = decaying_behaviour(ext.n, eigenvalue, complex(sample), t_min)
            results.append(SampleResult(lam=complex(sample), behaviour=behaviour,
                                        kernel_dim=_kernel_dim(ext, mode, behaviour, index, P)))
        return ModeVerdict(
            mode=mode, multiplicity=ext.spectrum[mode].multiplicity,
            admissible=_admissible_count(ext, mode, keys, S), samples=tuple(results),
        )

    verdict = NumericVerdict(modes=tuple(parallel_map(per_mode, range(len(ext.spectrum)), jobs)))
    logger.info(f"E3 oracle for {ext.describe()} at γ={ext.gamma}: {'pass' if verdict.passed else 'fail'}")
    return verdict


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class E3Result:
    status: E3Status
    rule: Optional[RuleVerdict] = None
    numeric: Optional[NumericVerdict] = None

    @property
    def passed(self) -> bool:
        return self.status == E3Status.PASS

    def to_dict(self):
        return {
            "status": self.status.value,
            "rule": self.rule.to_dict() if self.rule else None,
            "numeric": self.numeric.to_dict() if self.numeric else None,
        }


@dataclass(frozen=True)
class EllipticityReport:
    e1: E1Verdict
    e2: E2Verdict
    e3: E3Result
    sector: Sector = field(default_factory=lambda: Sector(np.pi / 2))

    @property
    def overall(self) -> bool:
        return self.e1.passed and self.e2.passed and self.e3.passed

    def to_dict(self):
        return {
            "sector": self.sector.to_dict(),
            "e1": self.e1.to_dict(),
            "e2": self.e2.to_dict(),
            "e3": self.e3.to_dict(),
            "overall": self.overall,
        }


def combine_e3(rule: Optional[RuleVerdict], numeric: Optional[NumericVerdict], label: str = "") -> E3Result:
    if rule is not None and numeric is not None:
        if rule.passed != numeric.passed:
            raise E3Disagreement(
                f"rule system says {'pass' if rule.passed else 'not covered'} but the numeric oracle says "
                f"{'pass' if numeric.passed else 'fail'} for {label or 'the extension'}"
            )
        status = E3Status.PASS if rule.passed else E3Status.FAIL
    elif rule is not None:
        status = E3Status.PASS if rule.passed else E3Status.NOT_COVERED
    else:
        status = E3Status.PASS if numeric.passed else E3Status.FAIL
    return E3Result(status=status, rule=rule, numeric=numeric)


def check_ellipticity(A: ConeOperator, ext: Extension, sector: Sector, method=E3Method.BOTH,
                      samples=DEFAULT_SAMPLES, grid: int = DEFAULT_GRID, jobs=None) -> EllipticityReport:
    """(E1)–(E3) for the operator A (−Δ for the Laplacian presets) on the extension."""
    method = E3Method(method)
    if not is_laplacian(A):
        raise UnsupportedOperator(f"(E3) is only decided for the cone Laplacian, not {A.name}")
    e1 = check_E1(A, sector, grid)
    e2 = check_E2(ext)
    rule = check_E3_rule(ext, sector) if method in (E3Method.RULE, E3Method.BOTH) else None
    numeric = check_E3_numeric(ext, sector, samples, jobs=jobs) if method in (E3Method.NUMERIC, E3Method.BOTH) else None
    e3 = combine_e3(rule, numeric, ext.describe())
    return EllipticityReport(e1=e1, e2=e2, e3=e3, sector=sector)


def heat_ellipticity(ext: Extension, method=E3Method.RULE, jobs=None) -> EllipticityReport:
    """(E1)–(E3) for −Δ on the extension at θ = π/2, the sector the heat semigroup needs."""
    return check_ellipticity(laplacian(ext.n).negated(), ext, Sector(HEAT_SECTOR), method=method, jobs=jobs)


def elliptic_extensions(S: BoundarySpectrum, gamma, p=2) -> list:
    """Enumerated dilation invariant extensions accepted by the rule systems."""
    extensions = enumerate_extensions(laplacian(S.dim_boundary), S, gamma, p, ExtensionFilter.DILATION_INVARIANT)
    return [ext for ext in extensions if check_E3_rule(ext).passed]
