"""
Closed extensions of cone operators

Two layers:

1. Any operator in scope (module conormal): minimal domain, maximal domain
   and the asymptotics space E with D(A_max) = D(A_min) + E, computed from
   the poles of the recursion g_0..g_{μ−1} in shifted windows below the
   weight line.

2. The Laplacian: the admissible exponents I_γ, the dilation invariant
   extensions Ê = ⊕_{q∈I_γ} Ê_q, adjoints, selfadjointness, the Friedrichs
   extension and the boundary pairing ⟨Δu,v⟩ − ⟨u,Δv⟩.

Conventions:
- weights and indices (γ, p) are kept exact: floats are read through their
  decimal string, so 0.5 is exactly 1/2
- an asymptotic term ω t^{−q} log^k t is the monomial (q, k)
- the critical line is Re z = (n+1)/2 − γ − μ
- a pole exactly on a window endpoint is decided with exact arithmetic when
  the inputs are exact, with a 1e-9 tolerance otherwise
"""

import logging
from dataclasses import dataclass
from enum import Enum
from itertools import product
from math import factorial
from typing import Optional

import numpy as np
import sympy as sp
from scipy import integrate, linalg

from .boundary import BoundarySpectrum
from .conormal import (
    ROOT_CLUSTER_TOL, ConeOperator, conormal_symbol, g_recursion, invert_conormal, is_exact, laplacian,
    model_cone_operator, point_key, polynomial_roots, same_point, taylor_sequence,
)
from .cutoff import CUTOFF_END, CUTOFF_START, as_pair, as_real, omega
from .errors import (
    IdenticallyZero, NotDilationInvariant, QuadratureFailure, UnsupportedExtension, UnsupportedOperator,
    WrongWeight,
)
from .workers import parallel_map

logger = logging.getLogger(__name__)

RANK_TOL = 1e-9
BRACKET_TOL = 1e-8


def exact_parameter(value) -> sp.Expr:
    """γ, p and friends as exact rationals (0.5 -> 1/2)."""
    if isinstance(value, sp.Basic):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a number")
    if isinstance(value, int):
        return sp.Integer(value)
    return sp.Rational(str(value).strip())


def dual_index(p) -> sp.Expr:
    p = exact_parameter(p)
    if p <= 1:
        raise ValueError(f"p must lie in (1, ∞), got {p}")
    return sp.simplify(p / (p - 1))


def compare(x, y) -> int:
    """Sign of x − y: exact when possible, 1e-9 tolerance otherwise."""
    x, y = sp.sympify(x), sp.sympify(y)
    if is_exact(x) and is_exact(y):
        diff = sp.simplify(sp.re(x) - sp.re(y))
        if diff == 0:
            return 0
        if diff.is_number:
            return 1 if diff > 0 else -1
    diff = complex(x).real - complex(y).real
    if abs(diff) <= ROOT_CLUSTER_TOL:
        return 0
    return 1 if diff > 0 else -1


def critical_line(n: int, gamma, mu: int) -> sp.Expr:
    return sp.Rational(n + 1, 2) - exact_parameter(gamma) - mu


# ---------------------------------------------------------------------------
# Minimal and maximal domains
# ---------------------------------------------------------------------------

class DomainKind(str, Enum):
    MINIMAL_PLAIN = "MinimalPlain"
    MINIMAL_WITH_EPS_LOSS = "MinimalWithEpsLoss"
    DIRECT = "Direct"


class Directness(str, Enum):
    PROVED = "proved"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class AsymptoticGenerator:
    """One basis element Σ c ω t^{−q} log^k t ⊗ E_j of E, leading (most singular) term first."""
    mode: int
    multiplicity: int
    terms: tuple  # ((q, log_power, coefficient), ...)

    @property
    def leading(self):
        return self.terms[0]

    @property
    def is_coupled(self) -> bool:
        exponents = {point_key(q) for q, _, _ in self.terms}
        return len(exponents) > 1

    def to_dict(self):
        return {
            "mode": self.mode,
            "multiplicity": self.multiplicity,
            "terms": [
                {"q": as_pair(q), "log_power": k, "coefficient": as_pair(c)} for q, k, c in self.terms
            ],
        }


@dataclass(frozen=True)
class AsymptoticSpace:
    n: int
    gamma: sp.Expr
    mu: int
    window: tuple  # (lower, upper): lower <= Re q < upper
    generators: tuple = ()
    epsilon: Optional[float] = None

    @property
    def dimension(self) -> int:
        return sum(g.multiplicity for g in self.generators)

    def entries(self) -> list:
        """Generators grouped by leading exponent and mode."""
        grouped = {}
        for gen in self.generators:
            q, k, _ = gen.leading
            key = (point_key(q), gen.mode)
            entry = grouped.setdefault(key, {"q": q, "log_powers": 0, "modes": [gen.mode], "coupling": []})
            entry["log_powers"] = max(entry["log_powers"], k)
            if gen.is_coupled:
                entry["coupling"].append([
                    {"q": as_pair(tq), "log_power": tk, "coefficient": as_pair(tc)}
                    for tq, tk, tc in gen.terms
                ])
        entries = []
        for key in sorted(grouped):
            entry = grouped[key]
            entries.append({
                "q": as_pair(entry["q"]),
                "log_powers": entry["log_powers"],
                "modes": entry["modes"],
                "coupling": entry["coupling"] or None,
            })
        return entries

    def to_dict(self):
        return {
            "gamma": float(self.gamma),
            "window": [as_real(self.window[0]), as_real(self.window[1])],
            "dimension": self.dimension,
            "epsilon": as_real(self.epsilon) if self.epsilon is not None else None,
            "entries": self.entries(),
            "generators": [g.to_dict() for g in self.generators],
        }


@dataclass(frozen=True)
class DomainDescription:
    kind: DomainKind
    s: int
    weight: sp.Expr
    p: sp.Expr
    critical_line: sp.Expr
    critical_poles: tuple = ()
    asymptotics: Optional[AsymptoticSpace] = None
    directness: Optional[Directness] = None

    @property
    def epsilon_loss(self) -> bool:
        return self.kind == DomainKind.MINIMAL_WITH_EPS_LOSS

    def to_dict(self):
        data = {
            "kind": self.kind.value,
            "space": {"s": self.s, "weight": float(self.weight), "p": float(self.p)},
            "epsilon_loss": self.epsilon_loss,
            "critical_line": float(self.critical_line),
            "critical_line_poles": [
                {"q": as_pair(q), "order": order, "mode": mode} for q, order, mode in self.critical_poles
            ],
        }
        if self.asymptotics is not None:
            data["asymptotics"] = self.asymptotics.to_dict()
        if self.directness is not None:
            data["directness"] = self.directness.value
        return data


def critical_line_poles(A: ConeOperator, S: BoundarySpectrum, gamma) -> list:
    """Poles of σ_M^μ(A)^{-1} on Re z = (n+1)/2 − γ − μ as (q, order, mode)."""
    line = critical_line(A.n, gamma, A.mu)
    sigma = conormal_symbol(A, S)
    found = []
    for j, poly in enumerate(sigma.polys):
        if poly.is_zero:
            raise IdenticallyZero(f"conormal symbol vanishes identically on mode {j}")
        for q, order in polynomial_roots(poly):
            if compare(q, line) == 0:
                found.append((q, order, j))
    return found


def minimal_domain(A: ConeOperator, S: BoundarySpectrum, gamma, p=2) -> DomainDescription:
    gamma = exact_parameter(gamma)
    poles = critical_line_poles(A, S, gamma)
    kind = DomainKind.MINIMAL_WITH_EPS_LOSS if poles else DomainKind.MINIMAL_PLAIN
    if poles:
        logger.info(f"{len(poles)} conormal pole(s) on the critical line; minimal domain loses ε")
    return DomainDescription(
        kind=kind, s=A.mu, weight=gamma + A.mu, p=exact_parameter(p),
        critical_line=critical_line(A.n, gamma, A.mu), critical_poles=tuple(poles),
    )


def _in_window(point, low, high, closed_low: bool) -> bool:
    lower = compare(point, low)
    upper = compare(point, high)
    if closed_low:
        return lower >= 0 and upper < 0
    return lower > 0 and upper < 0


def _mode_generators(column, c, mu, multiplicity, mode):
    """Basis of im G_0 + ... + im G_{μ−1} on one mode.

    ``column`` is [g_0, ..., g_{μ−1}] (ModeMeromorphic) for the mode.
    """
    images = []  # one dict monomial -> coefficient per free jet M^{(r)}(p)
    for k in range(mu):
        low, high = c + k, c + k + 1
        jets = {}
        points = []
        for l in range(k + 1):
            for pole in column[l].poles:
                if not _in_window(pole.point, low, high, closed_low=k >= 1):
                    continue
                for index, known in enumerate(points):
                    if same_point(known, pole.point):
                        break
                else:
                    index = len(points)
                    points.append(pole.point)
                for m in range(pole.order):
                    for kk in range(m, pole.order):
                        r = kk - m
                        coeff = sp.Integer(-1) ** m * pole.principal[kk] / (factorial(m) * factorial(kk - m))
                        monomial = (sp.simplify(pole.point - l), m)
                        image = jets.setdefault((index, r), {})
                        image[monomial] = image.get(monomial, sp.Integer(0)) + coeff
        images.extend(jets.values())

    images = [img for img in images if any(v != 0 for v in img.values())]
    if not images:
        return []
    monomials = sorted(
        {mono for img in images for mono in img},
        key=lambda mono: (-complex(mono[0]).real, -complex(mono[0]).imag, -mono[1]),
    )
    rows = sp.Matrix([[img.get(mono, 0) for mono in monomials] for img in images])
    exact = all(is_exact(v) for v in rows)
    if exact:
        reduced, pivots = rows.rref(simplify=True)
    else:
        reduced, pivots = rows.rref(iszerofunc=lambda x: abs(complex(x)) < RANK_TOL)

    generators = []
    for i in range(len(pivots)):
        terms = []
        for col, mono in enumerate(monomials):
            value = sp.simplify(reduced[i, col]) if exact else reduced[i, col]
            if exact and value == 0:
                continue
            if not exact and abs(complex(value)) < RANK_TOL:
                continue
            terms.append((mono[0], mono[1], value))
        generators.append(AsymptoticGenerator(mode=mode, multiplicity=multiplicity, terms=tuple(terms)))
    return generators


def _epsilon(columns, c, mu) -> Optional[float]:
    distances = []
    for column in columns:
        for g in column:
            for pole in g.poles:
                re = pole.value.real
                nearest = min(abs(re - float(c + k)) for k in range(mu + 1))
                if nearest > ROOT_CLUSTER_TOL:
                    distances.append(nearest)
    return min(distances) / 2 if distances else None


def maximal_domain_asymptotics(A: ConeOperator, S: BoundarySpectrum, gamma, jobs=None) -> AsymptoticSpace:
    gamma = exact_parameter(gamma)
    c = critical_line(A.n, gamma, A.mu)
    G = g_recursion(taylor_sequence(A, S))
    columns = [G.mode_entries(j) for j in range(len(S))]

    def per_mode(j):
        return _mode_generators(columns[j], c, A.mu, S[j].multiplicity, j)

    generators = [gen for block in parallel_map(per_mode, range(len(S)), jobs) for gen in block]
    space = AsymptoticSpace(
        n=A.n, gamma=gamma, mu=A.mu, window=(c, c + A.mu), generators=tuple(generators),
        epsilon=_epsilon(columns, c, A.mu),
    )
    logger.info(f"maximal asymptotics of {A.name} at γ={gamma}: dim {space.dimension}")
    return space


def constant_coefficient_dimension(A: ConeOperator, S: BoundarySpectrum, gamma) -> int:
    """Σ (pole order × multiplicity) over poles of σ_M^μ(A)^{-1} in the open strip."""
    c = critical_line(A.n, gamma, A.mu)
    total = 0
    for inverse in invert_conormal(conormal_symbol(A, S)):
        for pole in inverse.poles:
            if _in_window(pole.point, c, c + A.mu, closed_low=False):
                total += pole.order * S[inverse.mode].multiplicity
    return total


def model_dimension_check(A: ConeOperator, S: BoundarySpectrum, gamma) -> tuple:
    """(dim E(A), dim E(Â)) with Â the operator frozen at t = 0; equal for operators in scope."""
    return (
        maximal_domain_asymptotics(A, S, gamma).dimension,
        constant_coefficient_dimension(model_cone_operator(A), S, gamma),
    )


def maximal_domain(A: ConeOperator, S: BoundarySpectrum, gamma, p=2, jobs=None) -> DomainDescription:
    gamma = exact_parameter(gamma)
    poles = critical_line_poles(A, S, gamma)
    asymptotics = maximal_domain_asymptotics(A, S, gamma, jobs=jobs)
    proved = A.is_constant_coefficient or not poles
    return DomainDescription(
        kind=DomainKind.DIRECT, s=A.mu, weight=gamma + A.mu, p=exact_parameter(p),
        critical_line=critical_line(A.n, gamma, A.mu), critical_poles=tuple(poles),
        asymptotics=asymptotics, directness=Directness.PROVED if proved else Directness.UNKNOWN,
    )


# ---------------------------------------------------------------------------
# Laplacian: admissible exponents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentSpace:
    """E_q = ⊕ E_j ⊗ ω t^{−q} over the modes with q_j^± = q (with ω log t when q_j^+ = q_j^−)."""
    q: sp.Expr
    modes: tuple
    multiplicities: tuple
    log: bool = False

    @property
    def value(self) -> float:
        return float(self.q)

    @property
    def dimension(self) -> int:
        return sum(self.multiplicities) * (2 if self.log else 1)

    def multiplicity_of(self, mode: int) -> int:
        return self.multiplicities[self.modes.index(mode)]

    def to_dict(self):
        return {
            "q": as_pair(self.q),
            "modes": list(self.modes),
            "dimension": self.dimension,
            "log": self.log,
        }


@dataclass(frozen=True)
class AdmissibleInterval:
    n: int
    gamma: sp.Expr
    lower: sp.Expr
    upper: sp.Expr
    exponents: tuple
    on_boundary: tuple = ()

    def __iter__(self):
        return iter(self.exponents)

    def __len__(self):
        return len(self.exponents)

    def find(self, q) -> Optional[ExponentSpace]:
        for space in self.exponents:
            if same_point(space.q, q):
                return space
        return None

    def to_dict(self):
        return {
            "gamma": float(self.gamma),
            "interval": [float(self.lower), float(self.upper)],
            "exponents": [e.to_dict() for e in self.exponents],
            "critical_line_exponents": [e.to_dict() for e in self.on_boundary],
        }


def indicial_roots(n: int, eigenvalue) -> list:
    """q_j^± = (n−1)/2 ± √(((n−1)/2)² − λ_j); a single root when they coincide."""
    half = sp.Rational(n - 1, 2)
    disc = sp.sqrt(half ** 2 - eigenvalue)
    if sp.simplify(disc) == 0:
        return [sp.simplify(half)]
    return [sp.simplify(half + disc), sp.simplify(half - disc)]


def laplacian_exponents(S: BoundarySpectrum) -> list:
    n = S.dim_boundary
    merged = []
    for j, mode in enumerate(S):
        roots = indicial_roots(n, mode.eigenvalue)
        log = len(roots) == 1
        for q in roots:
            for entry in merged:
                if same_point(entry["q"], q):
                    entry["modes"].append(j)
                    entry["mult"].append(mode.multiplicity)
                    entry["log"] = entry["log"] or log
                    break
            else:
                merged.append({"q": q, "modes": [j], "mult": [mode.multiplicity], "log": log})
    spaces = [
        ExponentSpace(q=e["q"], modes=tuple(e["modes"]), multiplicities=tuple(e["mult"]), log=e["log"])
        for e in merged
    ]
    return sorted(spaces, key=lambda s: point_key(s.q))


def admissible_interval(S: BoundarySpectrum, gamma) -> AdmissibleInterval:
    """I_γ = {q_j^±} ∩ ](n+1)/2 − γ − 2, (n+1)/2 − γ[ with the endpoint exponents kept aside."""
    n = S.dim_boundary
    gamma = exact_parameter(gamma)
    upper = sp.Rational(n + 1, 2) - gamma
    lower = upper - 2
    inside, boundary = [], []
    for space in laplacian_exponents(S):
        lo, hi = compare(space.q, lower), compare(space.q, upper)
        if lo > 0 and hi < 0:
            inside.append(space)
        elif lo == 0 or hi == 0:
            boundary.append(space)
    if len(S) > 1 and any(len(S) - 1 in e.modes for e in inside):
        logger.warning("the last retained mode contributes to I_γ; increase the mode truncation")
    return AdmissibleInterval(
        n=n, gamma=gamma, lower=lower, upper=upper, exponents=tuple(inside), on_boundary=tuple(boundary),
    )


def is_laplacian(A: ConeOperator) -> bool:
    reference = laplacian(A.n).coeffs
    for sign in (1, -1):
        if all(sp.expand(a - sign * b) == 0 for a, b in zip(A.coeffs, reference)):
            return True
    return False


# ---------------------------------------------------------------------------
# Laplacian: extensions
# ---------------------------------------------------------------------------

class SelectionKind(str, Enum):
    ZERO = "zero"
    FULL = "full"
    OMEGA = "omega"  # E_0 ⊗ ω in the logarithmic case
    SUBSPACE = "subspace"


class ExtensionFilter(str, Enum):
    ALL = "All"
    DILATION_INVARIANT = "DilationInvariant"


def _orthonormal_rows(rows, size: int) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=complex)) if len(rows) else np.zeros((0, size), dtype=complex)
    if rows.shape[0] == 0:
        return rows
    if rows.shape[1] != size:
        raise UnsupportedExtension(f"basis rows must have length {size}, got {rows.shape[1]}")
    basis = linalg.orth(rows.T).T
    return basis


@dataclass(frozen=True)
class Selection:
    """Ê_q ⊆ E_q: ``basis`` holds (mode, rows) with orthonormal rows in C^{m_j} for SUBSPACE."""
    q: sp.Expr
    kind: SelectionKind
    basis: tuple = ()

    def rows_for(self, space: ExponentSpace, mode: int) -> np.ndarray:
        size = space.multiplicity_of(mode)
        if self.kind in (SelectionKind.FULL, SelectionKind.OMEGA):
            return np.eye(size, dtype=complex)
        if self.kind == SelectionKind.ZERO:
            return np.zeros((0, size), dtype=complex)
        for basis_mode, rows in self.basis:
            if basis_mode == mode:
                return np.asarray(rows, dtype=complex).reshape(-1, size)
        return np.zeros((0, size), dtype=complex)

    def dimension(self, space: ExponentSpace) -> int:
        if self.kind == SelectionKind.FULL:
            return space.dimension
        if self.kind == SelectionKind.OMEGA:
            return sum(space.multiplicities)
        if self.kind == SelectionKind.ZERO:
            return 0
        return sum(len(rows) for _, rows in self.basis)

    def to_dict(self):
        data = {"q": as_pair(self.q), "kind": self.kind.value}
        if self.kind == SelectionKind.SUBSPACE:
            data["modes"] = [
                {"mode": mode, "basis": [[as_pair(x) for x in row] for row in rows]} for mode, rows in self.basis
            ]
        return data


def make_selection(space: ExponentSpace, kind, basis=None) -> Selection:
    """Canonical Ê_q: subspaces that are everything or nothing become FULL / ZERO."""
    kind = SelectionKind(kind)
    if kind == SelectionKind.OMEGA and not space.log:
        raise UnsupportedExtension(f"the ω-only choice exists only for the logarithmic exponent, not q={space.q}")
    if kind != SelectionKind.SUBSPACE:
        return Selection(q=space.q, kind=kind)
    if space.log:
        raise UnsupportedExtension("proper subspaces of the logarithmic E_0 are not dilation invariant")

    normalized = []
    for mode, rows in (basis or {}).items():
        if mode not in space.modes:
            raise UnsupportedExtension(f"mode {mode} does not contribute to q={space.q}")
        ortho = _orthonormal_rows(rows, space.multiplicity_of(mode))
        if ortho.shape[0]:
            normalized.append((mode, tuple(tuple(complex(x) for x in row) for row in ortho)))
    normalized.sort()
    if not normalized:
        return Selection(q=space.q, kind=SelectionKind.ZERO)
    if len(normalized) == len(space.modes) and all(
        len(rows) == space.multiplicity_of(mode) for mode, rows in normalized
    ):
        return Selection(q=space.q, kind=SelectionKind.FULL)
    return Selection(q=space.q, kind=SelectionKind.SUBSPACE, basis=tuple(normalized))


@dataclass(frozen=True)
class ExplicitGenerator:
    """A single line Σ c ω t^{−q} log^k t ⊗ (vector in E_j) outside the invariant lattice."""
    mode: int
    vector: tuple
    terms: tuple  # ((q, log_power, coefficient), ...)

    def to_dict(self):
        return {
            "mode": self.mode,
            "vector": [as_pair(x) for x in self.vector],
            "terms": [{"q": as_pair(q), "log_power": k, "coefficient": as_pair(c)} for q, k, c in self.terms],
        }


@dataclass(frozen=True)
class Extension:
    gamma: sp.Expr
    p: sp.Expr
    spectrum: BoundarySpectrum
    interval: AdmissibleInterval
    choices: tuple  # one Selection per exponent of the interval, same order
    generators: tuple = ()
    label: str = ""

    @property
    def n(self) -> int:
        return self.spectrum.dim_boundary

    @property
    def dilation_invariant(self) -> bool:
        return not self.generators

    def selection_for(self, q) -> Optional[Selection]:
        for choice in self.choices:
            if same_point(choice.q, q):
                return choice
        return None

    @property
    def dimension(self) -> int:
        return int(np.linalg.matrix_rank(extension_vectors(self)[1], tol=RANK_TOL)) if self.generators else sum(
            c.dimension(s) for c, s in zip(self.choices, self.interval.exponents)
        )

    def describe(self) -> str:
        if self.label:
            return self.label
        parts = [f"q={float(c.q):g}:{c.kind.value}" for c in self.choices]
        return ", ".join(parts) or "trivial"

    def to_dict(self):
        return {
            "label": self.describe(),
            "gamma": float(self.gamma),
            "p": float(self.p),
            "gamma_exact": str(self.gamma),
            "p_exact": str(self.p),
            "n": self.n,
            "dim_boundary": self.n,
            "dilation_invariant": self.dilation_invariant,
            "dimension": self.dimension,
            "choices": [c.to_dict() for c in self.choices],
            "generators": [g.to_dict() for g in self.generators],
            "spectrum": self.spectrum.to_dict(),
        }


def _coordinates(interval: AdmissibleInterval) -> list:
    """Coordinate labels (q_index, log_power, mode, component) of ⊕ E_q."""
    keys = []
    for qi, space in enumerate(interval.exponents):
        for mode, mult in zip(space.modes, space.multiplicities):
            for k in range(2 if space.log else 1):
                for i in range(mult):
                    keys.append((qi, k, mode, i))
    return keys


def extension_vectors(ext: Extension):
    """(coordinate labels, matrix whose rows span Ê)."""
    keys = _coordinates(ext.interval)
    index = {key: i for i, key in enumerate(keys)}
    rows = []
    for qi, (choice, space) in enumerate(zip(ext.choices, ext.interval.exponents)):
        for mode in space.modes:
            block = choice.rows_for(space, mode)
            log_powers = (0, 1) if space.log and choice.kind == SelectionKind.FULL else (0,)
            for k in log_powers:
                for row in block:
                    vec = np.zeros(len(keys), dtype=complex)
                    for i, x in enumerate(row):
                        vec[index[(qi, k, mode, i)]] = x
                    rows.append(vec)
    for gen in ext.generators:
        vec = np.zeros(len(keys), dtype=complex)
        for q, k, coeff in gen.terms:
            space = ext.interval.find(q)
            if space is None or gen.mode not in space.modes:
                raise UnsupportedExtension(f"term q={q} is not an exponent of mode {gen.mode} in I_γ")
            qi = ext.interval.exponents.index(space)
            for i, x in enumerate(gen.vector):
                vec[index[(qi, k, gen.mode, i)]] += complex(coeff) * x
        rows.append(vec)
    matrix = np.array(rows, dtype=complex) if rows else np.zeros((0, len(keys)), dtype=complex)
    return keys, matrix


def _rank(matrix) -> int:
    return int(np.linalg.matrix_rank(matrix, tol=RANK_TOL)) if matrix.size else 0


def _same_frame(a: Extension, b: Extension):
    if a.gamma != b.gamma or a.n != b.n or a.spectrum.pairs() != b.spectrum.pairs():
        raise ValueError("extensions live on different weights or spectra")


def extension_contains(outer: Extension, inner: Extension) -> bool:
    """Ê_inner ⊆ Ê_outer."""
    _same_frame(outer, inner)
    _, big = extension_vectors(outer)
    _, small = extension_vectors(inner)
    if small.shape[0] == 0:
        return True
    return _rank(np.vstack([big, small])) == _rank(big)


def equivalent(a: Extension, b: Extension) -> bool:
    if a.gamma != b.gamma or a.p != b.p:
        return False
    return extension_contains(a, b) and extension_contains(b, a)


def _build(S, gamma, p, kinds, interval=None, label="", generators=()) -> Extension:
    interval = interval or admissible_interval(S, gamma)
    choices = tuple(make_selection(space, kind) for space, kind in zip(interval.exponents, kinds))
    return Extension(
        gamma=exact_parameter(gamma), p=exact_parameter(p), spectrum=S, interval=interval,
        choices=choices, generators=tuple(generators), label=label,
    )


def minimal_extension(S: BoundarySpectrum, gamma, p=2) -> Extension:
    interval = admissible_interval(S, gamma)
    return _build(S, gamma, p, [SelectionKind.ZERO] * len(interval), interval, label="minimal")


def maximal_extension(S: BoundarySpectrum, gamma, p=2) -> Extension:
    interval = admissible_interval(S, gamma)
    return _build(S, gamma, p, [SelectionKind.FULL] * len(interval), interval, label="maximal")


def make_extension(S: BoundarySpectrum, gamma, p, selections: dict, generators=(), label="") -> Extension:
    """``selections`` maps exponent -> kind or (kind, {mode: rows}); missing exponents are {0}."""
    interval = admissible_interval(S, gamma)
    choices = []
    for space in interval.exponents:
        value = SelectionKind.ZERO
        for q, chosen in selections.items():
            if same_point(space.q, sp.sympify(q)):
                value = chosen
                break
        if isinstance(value, tuple):
            choices.append(make_selection(space, value[0], value[1]))
        else:
            choices.append(make_selection(space, value))
    for q in selections:
        if interval.find(sp.sympify(q)) is None:
            raise UnsupportedExtension(f"q={q} is not in I_γ = ]{interval.lower}, {interval.upper}[")
    return Extension(
        gamma=exact_parameter(gamma), p=exact_parameter(p), spectrum=S, interval=interval,
        choices=tuple(choices), generators=tuple(generators), label=label,
    )


def _nearest_exponent(interval: AdmissibleInterval, q) -> ExponentSpace:
    target = complex(q)
    best = min(interval.exponents, key=lambda space: abs(complex(space.q) - target), default=None)
    if best is None or abs(complex(best.q) - target) > ROOT_CLUSTER_TOL:
        raise UnsupportedExtension(f"q={target:g} is not an exponent of I_γ = ]{interval.lower}, {interval.upper}[")
    return best


def extension_from_document(data: dict, S: BoundarySpectrum) -> Extension:
    """Rebuild an Extension from validated document data (the shape of Extension.to_dict).

    Exponents are numbers in documents; each is matched to the nearest exponent of I_γ within 1e-9.
    """
    gamma, p = data["gamma"], data.get("p", 2)
    interval = admissible_interval(S, gamma)
    selections = {}
    for entry in data.get("choices", []):
        space = _nearest_exponent(interval, entry["q"])
        basis = {m["mode"]: np.asarray(m["basis"], dtype=complex) for m in entry.get("modes", [])}
        selections[space.q] = (entry["kind"], basis or None)
    generators = []
    for gen in data.get("generators", []):
        terms = tuple(
            (_nearest_exponent(interval, term["q"]).q, term["log_power"], term["coefficient"])
            for term in gen["terms"]
        )
        generators.append(ExplicitGenerator(mode=gen["mode"], vector=tuple(gen["vector"]), terms=terms))
    label = data.get("label", "")
    if not generators and label.startswith("q="):
        label = ""
    return make_extension(S, gamma, p, selections, generators=tuple(generators), label=label)


def _choice_options(space: ExponentSpace) -> list:
    options = [(SelectionKind.ZERO, None), (SelectionKind.FULL, None)]
    if space.log:
        options.insert(1, (SelectionKind.OMEGA, None))
    elif len(space.modes) > 1:
        for mode in space.modes:
            size = space.multiplicity_of(mode)
            options.append((SelectionKind.SUBSPACE, {mode: np.eye(size)}))
    return options


def _non_invariant_lines(interval: AdmissibleInterval, S: BoundarySpectrum) -> list:
    lines = []
    for space in interval.exponents:
        if space.log:
            mode = space.modes[0]
            vector = tuple([1.0] + [0.0] * (S[mode].multiplicity - 1))
            lines.append(("log-line", ExplicitGenerator(mode=mode, vector=vector, terms=((space.q, 1, 1),))))
    for j, mode in enumerate(S):
        present = [space for space in interval.exponents if j in space.modes and not space.log]
        if len(present) == 2:
            vector = tuple([1.0] + [0.0] * (mode.multiplicity - 1))
            terms = tuple((space.q, 0, 1) for space in present)
            lines.append((f"mixed-line mode {j}", ExplicitGenerator(mode=j, vector=vector, terms=terms)))
    return lines


def enumerate_extensions(A: ConeOperator, S: BoundarySpectrum, gamma, p=2,
                         filter=ExtensionFilter.DILATION_INVARIANT) -> list:
    if not is_laplacian(A):
        raise UnsupportedOperator(f"extension enumeration is implemented for the Laplacian, not {A.name}")
    if A.n != S.dim_boundary:
        raise ValueError(f"operator has n={A.n} but the spectrum has dim_boundary={S.dim_boundary}")
    filter = ExtensionFilter(filter)
    interval = admissible_interval(S, gamma)
    extensions = []
    for combo in product(*[_choice_options(space) for space in interval.exponents]):
        choices = tuple(
            make_selection(space, kind, basis) for space, (kind, basis) in zip(interval.exponents, combo)
        )
        extensions.append(Extension(
            gamma=exact_parameter(gamma), p=exact_parameter(p), spectrum=S, interval=interval, choices=choices,
        ))
    if filter == ExtensionFilter.ALL:
        for label, line in _non_invariant_lines(interval, S):
            base = minimal_extension(S, gamma, p)
            extensions.append(Extension(
                gamma=base.gamma, p=base.p, spectrum=S, interval=interval, choices=base.choices,
                generators=(line,), label=label,
            ))
    logger.info(f"{len(extensions)} extension(s) at γ={gamma}, |I_γ|={len(interval)}, filter={filter.value}")
    return extensions


def _complement(choice: Selection, space: ExponentSpace) -> tuple:
    """(kind, basis) of the orthogonal complement of Ê_q in E_q."""
    if space.log:
        swap = {
            SelectionKind.ZERO: SelectionKind.FULL,
            SelectionKind.FULL: SelectionKind.ZERO,
            SelectionKind.OMEGA: SelectionKind.OMEGA,
        }
        return swap[choice.kind], None
    if choice.kind == SelectionKind.ZERO:
        return SelectionKind.FULL, None
    if choice.kind == SelectionKind.FULL:
        return SelectionKind.ZERO, None
    basis = {}
    for mode in space.modes:
        rows = choice.rows_for(space, mode)
        size = space.multiplicity_of(mode)
        if rows.shape[0] == 0:
            basis[mode] = np.eye(size)
            continue
        complement = linalg.null_space(np.conj(rows)).T
        if complement.shape[0]:
            basis[mode] = complement
    return SelectionKind.SUBSPACE, basis


def adjoint_extension(ext: Extension) -> Extension:
    """Weight −γ, index p′; Ê_q^⊥ sits at the dual exponent (n−1) − q."""
    if not ext.dilation_invariant:
        raise NotDilationInvariant("the adjoint is computed for dilation invariant extensions only")
    n = ext.n
    target = admissible_interval(ext.spectrum, -ext.gamma)
    selections = {}
    for choice, space in zip(ext.choices, ext.interval.exponents):
        dual = sp.simplify(n - 1 - space.q)
        dual_space = target.find(dual)
        if dual_space is None:
            raise UnsupportedExtension(f"dual exponent {dual} of q={space.q} is not in I_(-γ)")
        kind, basis = _complement(choice, space)
        selections[dual_space.q] = (kind, basis)
    choices = []
    for space in target.exponents:
        kind, basis = selections.get(space.q, (SelectionKind.FULL, None))
        choices.append(make_selection(space, kind, basis))
    return Extension(
        gamma=-ext.gamma, p=dual_index(ext.p), spectrum=ext.spectrum, interval=target,
        choices=tuple(choices),
    )


def is_selfadjoint(ext: Extension) -> bool:
    if ext.gamma != 0 or ext.p != 2 or not ext.dilation_invariant:
        return False
    return equivalent(adjoint_extension(ext), ext)


def selfadjoint_extensions(S: BoundarySpectrum, gamma=0, p=2) -> list:
    if exact_parameter(gamma) != 0 or exact_parameter(p) != 2:
        raise WrongWeight("selfadjoint extensions are classified on L_2 = H^{0,0}_2 only (γ=0, p=2)")
    candidates = enumerate_extensions(laplacian(S.dim_boundary), S, 0, 2)
    return [ext for ext in candidates if is_selfadjoint(ext)]


def friedrichs_domain(S: BoundarySpectrum, gamma=0, p=2) -> Extension:
    if exact_parameter(gamma) != 0 or exact_parameter(p) != 2:
        raise WrongWeight("the Friedrichs extension is taken in L_2 (γ=0, p=2)")
    n = S.dim_boundary
    interval = admissible_interval(S, 0)
    kinds = []
    for space in interval.exponents:
        if n == 1:
            if space.log:
                kinds.append(SelectionKind.OMEGA)
            elif compare(space.q, 0) < 0:
                kinds.append(SelectionKind.FULL)
            else:
                kinds.append(SelectionKind.ZERO)
        else:
            half = sp.Rational(n - 1, 2)
            kinds.append(SelectionKind.FULL if compare(space.q, half) <= 0 else SelectionKind.ZERO)
    return _build(S, 0, 2, kinds, interval, label="friedrichs")


# ---------------------------------------------------------------------------
# Boundary pairing
# ---------------------------------------------------------------------------

_t = sp.Symbol('t', positive=True)


@dataclass(frozen=True)
class PairingElement:
    """Σ c ω t^{−q} log^k t ⊗ e with e = vector in the eigenspace E_mode."""
    mode: int
    terms: tuple  # ((q, log_power, coefficient), ...)
    vector: tuple = (1.0,)

    @classmethod
    def from_generator(cls, gen: ExplicitGenerator) -> "PairingElement":
        return cls(mode=gen.mode, terms=gen.terms, vector=gen.vector)


def _radial_parts(element: PairingElement, n: int, eigenvalue):
    h = sum((sp.sympify(c) * _t ** (-sp.sympify(q)) * sp.log(_t) ** k for q, k, c in element.terms), sp.Integer(0))
    dh = sp.diff(h, _t)
    lap = sp.simplify(sp.diff(h, _t, 2) + n / _t * dh + eigenvalue / _t ** 2 * h)
    return h, dh, lap


def _check_integrable(u: PairingElement, v: PairingElement, n: int, lap_u, lap_v):
    """Near 0 the integrand carries t^{n − 2 − Re(q + q')}; it must beat t^{-1}."""
    for lap, left, right in ((lap_u, u, v), (lap_v, v, u)):
        if lap == 0:
            continue
        for q, _, _ in left.terms:
            for q2, _, _ in right.terms:
                exponent = n - 2 - complex(q).real - complex(q2).real
                if exponent <= -1 + ROOT_CLUSTER_TOL:
                    raise QuadratureFailure(
                        f"bracket integrand ~ t^{exponent:g} near 0 is not integrable (q={q}, q'={q2})"
                    )


def _quad_complex(fn, a, b):
    re, err_re = integrate.quad(lambda x: fn(x).real, a, b, limit=200, epsabs=1e-13, epsrel=1e-11)
    im, err_im = integrate.quad(lambda x: fn(x).imag, a, b, limit=200, epsabs=1e-13, epsrel=1e-11)
    return complex(re, im), max(err_re, err_im)


def pairing_bracket(u: PairingElement, v: PairingElement, S: BoundarySpectrum) -> complex:
    """⟨Δu, v⟩ − ⟨u, Δv⟩ in H^{0,0}_2 by direct quadrature (measure t^n dt)."""
    if u.mode != v.mode:
        return 0j
    n = S.dim_boundary
    inner = complex(np.vdot(np.asarray(v.vector, dtype=complex), np.asarray(u.vector, dtype=complex)))
    if inner == 0:
        return 0j
    eigenvalue = S[u.mode].eigenvalue
    h_u, dh_u, lap_u = _radial_parts(u, n, eigenvalue)
    h_v, dh_v, lap_v = _radial_parts(v, n, eigenvalue)
    _check_integrable(u, v, n, lap_u, lap_v)

    f_u = [sp.lambdify(_t, e, 'numpy') for e in (h_u, dh_u, lap_u)]
    f_v = [sp.lambdify(_t, e, 'numpy') for e in (h_v, dh_v, lap_v)]

    def values(fns, x):
        return [complex(np.asarray(f(x), dtype=complex)) for f in fns]

    def integrand(x):
        h1, d1, l1 = values(f_u, x)
        h2, d2, l2 = values(f_v, x)
        w0, w1, w2 = (float(omega(x, order)) for order in (0, 1, 2))
        lap_wu = w0 * l1 + 2 * w1 * d1 + w2 * h1 + n / x * w1 * h1
        lap_wv = w0 * l2 + 2 * w1 * d2 + w2 * h2 + n / x * w1 * h2
        return (lap_wu * np.conj(w0 * h2) - w0 * h1 * np.conj(lap_wv)) * x ** n

    total, error = _quad_complex(integrand, CUTOFF_START, CUTOFF_END)
    if lap_u != 0 or lap_v != 0:
        near, near_error = _quad_complex(integrand, 0.0, CUTOFF_START)
        total += near
        error = max(error, near_error)
    if not np.isfinite(total) or error > 1e-6:
        raise QuadratureFailure(f"bracket quadrature did not converge (error estimate {error:.2e})")
    value = inner * total

    closed = pairing_closed_form(u, v, S)
    if closed is not None and abs(closed - value) > BRACKET_TOL * max(1.0, abs(value)):
        logger.warning(f"bracket quadrature {value} differs from the closed form {closed}")
    return value


def pairing_closed_form(u: PairingElement, v: PairingElement, S: BoundarySpectrum) -> Optional[complex]:
    """Σ c c̄' 2(q̄' − q)⟨e,f⟩ ∫ ω ω' t^{n−q−q̄'−1} dt for log-free indicial terms; None otherwise."""
    if u.mode != v.mode:
        return 0j
    n = S.dim_boundary
    eigenvalue = S[u.mode].eigenvalue
    roots = indicial_roots(n, eigenvalue)
    for element in (u, v):
        for q, k, _ in element.terms:
            if k != 0 or not any(same_point(q, r) for r in roots):
                return None
    inner = complex(np.vdot(np.asarray(v.vector, dtype=complex), np.asarray(u.vector, dtype=complex)))
    total = 0j
    for q, _, c in u.terms:
        for q2, _, c2 in v.terms:
            qc = complex(q)
            q2c = np.conj(complex(q2))
            weight, _ = _quad_complex(
                lambda x: complex(omega(x) * omega(x, 1)) * x ** (n - qc - q2c - 1),
                CUTOFF_START, CUTOFF_END,
            )
            total += complex(c) * np.conj(complex(c2)) * 2 * (q2c - qc) * weight
    return inner * total
