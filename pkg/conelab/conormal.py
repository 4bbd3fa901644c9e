"""
Conormal symbol algebra

A cone differential operator near the boundary is

    A = t^{-μ} Σ_j a_j(t) (−t∂_t)^j,   j = 0..μ,

with a_j(t) polynomials in t whose coefficients are polynomials in the
boundary Laplacian Δ_∂ (written as polynomials in its eigenvalue λ). On a
boundary mode with eigenvalue λ_j everything becomes a scalar rational
function of the Mellin variable z:

- conormal symbol      f_0(z) = Σ_j a_j(0)(λ_j) z^j
- Taylor sequence      f_l(z) = (1/l!) Σ_j (d_t^l a_j)(0)(λ_j) z^j
- recursion            g_0 = f_0^{-1},
                       g_l = −(T^{-l} f_0^{-1}) Σ_{j<l} (T^{-j} f_{l-j}) g_j,
                       (T^σ f)(z) = f(z + σ)

Arithmetic is exact (sympy) whenever the inputs are; roots fall back to
companion-matrix eigenvalues with one Newton step when they are not.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import sympy as sp

from .boundary import BoundarySpectrum, to_exact
from .cutoff import as_pair
from .errors import DimensionMismatch, IdenticallyZero, UnsupportedCoefficient

logger = logging.getLogger(__name__)

z = sp.Symbol('z')
t = sp.Symbol('t')
lam = sp.Symbol('lam')

ROOT_CLUSTER_TOL = 1e-9
# companion eigenvalues of a multiple root split by ~eps^(1/m); such pairs are
# merged when the derivative vanishes at their midpoint
MULTIPLE_ROOT_WINDOW = 1e-6

PRESET_NAMES = ("laplacian", "example-abcd")


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConeOperator:
    mu: int
    n: int
    coeffs: tuple
    name: str = "custom"
    interior: str = "laplacian"

    def __post_init__(self):
        if self.mu < 1:
            raise ValueError("operator order mu must be >= 1")
        if len(self.coeffs) != self.mu + 1:
            raise ValueError(f"expected {self.mu + 1} coefficients a_0..a_mu, got {len(self.coeffs)}")
        for j, coeff in enumerate(self.coeffs):
            if coeff.free_symbols - {t, lam}:
                raise ValueError(f"a_{j} may only depend on t and lam")
        top = sp.expand(self.coeffs[self.mu].subs(t, 0))
        if top.has(lam) or top == 0:
            raise ValueError("a_mu(0) must be a nonzero scalar")

    def coefficient_at_zero(self, j: int) -> sp.Expr:
        return sp.expand(self.coeffs[j].subs(t, 0))

    def t_degree(self, j: int) -> int:
        return sp.Poly(self.coeffs[j], t).degree()

    @property
    def is_constant_coefficient(self) -> bool:
        return all(not c.has(t) for c in self.coeffs)

    def negated(self) -> "ConeOperator":
        name = self.name[1:] if self.name.startswith("-") else f"-{self.name}"
        return ConeOperator(
            mu=self.mu, n=self.n, coeffs=tuple(-c for c in self.coeffs),
            name=name, interior=self.interior,
        )

    @property
    def base_name(self) -> str:
        return self.name.lstrip("-")

    @property
    def sign(self) -> int:
        return -1 if self.name.startswith("-") else 1

    def to_dict(self):
        coeffs = []
        for j, coeff in enumerate(self.coeffs):
            terms = []
            poly_t = sp.Poly(coeff, t)
            for (power,), c_t in sorted(poly_t.terms()):
                poly_l = sp.Poly(c_t, lam)
                degree = poly_l.degree()
                lam_coeffs = [str(poly_l.coeff_monomial(lam ** k)) for k in range(max(degree, 0) + 1)]
                terms.append([power, lam_coeffs])
            coeffs.append([j, terms])
        return {"name": self.name, "mu": self.mu, "n": self.n, "coeffs": coeffs}


def _check_polynomial(expr, j):
    try:
        sp.Poly(expr, t, lam)
    except sp.PolynomialError as exc:
        raise ValueError(f"a_{j} is not polynomial in t and lam") from exc


def make_operator(mu: int, n: int, coeffs, name: str = "custom", interior: str = "laplacian") -> ConeOperator:
    exprs = tuple(sp.expand(sp.sympify(c)) for c in coeffs)
    for j, expr in enumerate(exprs):
        _check_polynomial(expr, j)
    return ConeOperator(mu=mu, n=n, coeffs=exprs, name=name, interior=interior)


def laplacian(n: int) -> ConeOperator:
    """Δ = t^{-2}{(t∂_t)² + (n−1) t∂_t + Δ_∂}: a_2 = 1, a_1 = −(n−1), a_0 = Δ_∂."""
    return make_operator(2, n, [lam, -(n - 1), 1], name="laplacian")


def example_abcd() -> ConeOperator:
    """t^{-2}{¼((t∂_t)² − t(t∂_t)) + Δ_∂} on the cone over the circle."""
    return make_operator(2, 1, [lam, t / 4, sp.Rational(1, 4)], name="example-abcd")


def preset_operator(name: str, n: Optional[int] = None) -> ConeOperator:
    if name == "laplacian":
        return laplacian(1 if n is None else n)
    if name == "example-abcd":
        if n not in (None, 1):
            raise DimensionMismatch("example-abcd lives on the cone over the circle (n = 1)")
        return example_abcd()
    raise ValueError(f"unknown operator preset {name!r}; choose one of {', '.join(PRESET_NAMES)}")


def operator_from_document(data: dict) -> ConeOperator:
    """Build an operator from validated {"mu", "n", "coeffs": [[j, [[t_power, [c0, c1, ...]], ...]], ...]}.

    The λ-coefficient list is in ascending powers: [c0, c1] means c0 + c1·λ.
    """
    mu = data["mu"]
    exprs = [sp.Integer(0)] * (mu + 1)
    for j, terms in data["coeffs"]:
        if not 0 <= j <= mu:
            raise ValueError(f"coefficient index {j} outside 0..{mu}")
        for t_power, lam_coeffs in terms:
            lam_poly = sum((to_exact(c) * lam ** k for k, c in enumerate(lam_coeffs)), sp.Integer(0))
            exprs[j] = exprs[j] + lam_poly * t ** int(t_power)
    return make_operator(mu, data["n"], exprs, name=data.get("name") or "custom")


def model_cone_operator(A: ConeOperator) -> ConeOperator:
    """Freeze the coefficients at t = 0."""
    return ConeOperator(
        mu=A.mu, n=A.n, coeffs=tuple(A.coefficient_at_zero(j) for j in range(A.mu + 1)),
        name=f"{A.name}-frozen", interior=A.interior,
    )


def _check_dimensions(A: ConeOperator, S: BoundarySpectrum):
    if A.n != S.dim_boundary:
        raise DimensionMismatch(
            f"operator {A.name} has n={A.n} but the spectrum has dim_boundary={S.dim_boundary}"
        )


# ---------------------------------------------------------------------------
# Roots and meromorphic functions
# ---------------------------------------------------------------------------

def is_exact(expr) -> bool:
    return not sp.sympify(expr).has(sp.Float)


def same_point(p, q) -> bool:
    if is_exact(p) and is_exact(q):
        diff = sp.simplify(p - q)
        if diff == 0:
            return True
        if diff.is_number and diff.is_zero is False:
            return False
    return abs(complex(p) - complex(q)) <= ROOT_CLUSTER_TOL * max(1.0, abs(complex(p)))


def point_key(p):
    """Sort key: real part, then imaginary part."""
    value = complex(p)
    return (round(value.real, 9), round(value.imag, 9))


def _numeric_roots(poly: sp.Poly) -> list:
    coeffs = np.array([complex(c) for c in poly.all_coeffs()], dtype=complex)
    raw = np.roots(coeffs)
    dcoeffs = np.polyder(coeffs)
    polished = []
    for r in raw:
        d = np.polyval(dcoeffs, r)
        if abs(d) > MULTIPLE_ROOT_WINDOW:
            r = r - np.polyval(coeffs, r) / d
        polished.append(complex(r))

    clusters = []
    for r in sorted(polished, key=lambda w: (w.real, w.imag)):
        for cluster in clusters:
            centre = np.mean(cluster)
            gap = abs(r - centre)
            if gap <= ROOT_CLUSTER_TOL * max(1.0, abs(centre)):
                cluster.append(r)
                break
            if gap <= MULTIPLE_ROOT_WINDOW and abs(np.polyval(dcoeffs, (r + centre) / 2)) <= MULTIPLE_ROOT_WINDOW:
                cluster.append(r)
                break
        else:
            clusters.append([r])

    result = []
    for cluster in clusters:
        centre = complex(np.mean(cluster))
        if abs(centre.imag) <= ROOT_CLUSTER_TOL:
            point = sp.Float(centre.real)
        else:
            point = sp.Float(centre.real) + sp.I * sp.Float(centre.imag)
        result.append((point, len(cluster)))
    return result


def polynomial_roots(poly: sp.Poly) -> list:
    """[(root, multiplicity)] sorted by real then imaginary part."""
    if poly.degree() <= 0:
        return []
    if is_exact(poly.as_expr()):
        exact = sp.roots(poly, multiple=False)
        if sum(exact.values()) == poly.degree():
            return sorted(exact.items(), key=lambda item: point_key(item[0]))
        logger.warning(f"no closed-form roots for {poly.as_expr()}; using companion eigenvalues")
    return sorted(_numeric_roots(poly), key=lambda item: point_key(item[0]))


def _simplify_number(value, exact: bool):
    if exact:
        return sp.simplify(value)
    return sp.N(value, 17)


@dataclass(frozen=True)
class Pole:
    point: sp.Expr
    order: int
    principal: tuple  # R_{p,k}: coefficient of (z − p)^{-(k+1)}, k = 0..order−1

    @property
    def value(self) -> complex:
        return complex(self.point)

    @property
    def n_p(self) -> int:
        return self.order - 1

    def to_dict(self):
        return {
            "q": as_pair(self.point),
            "order": self.order,
            "principal_part": [as_pair(r) for r in self.principal],
        }


@dataclass(frozen=True)
class ModeMeromorphic:
    """One mode's rational function of z, with its Laurent data at every pole."""
    mode: int
    expr: sp.Expr
    poles: tuple = ()
    remainder: sp.Expr = sp.Integer(0)
    scalar: sp.Expr = sp.Integer(1)
    zeros: tuple = ()

    @cached_property
    def _numeric(self):
        return sp.lambdify(z, self.expr, 'numpy')

    @cached_property
    def _numeric_remainder(self):
        return sp.lambdify(z, self.remainder, 'numpy')

    def __call__(self, value):
        out = self._numeric(np.asarray(value, dtype=complex))
        return np.broadcast_to(out, np.shape(value)).astype(complex) if np.ndim(value) else complex(out)

    @property
    def is_zero(self) -> bool:
        return self.expr == 0

    def principal_value(self, value):
        value = np.asarray(value, dtype=complex)
        total = np.zeros_like(value)
        for pole in self.poles:
            p = pole.value
            for k, r in enumerate(pole.principal):
                total = total + complex(r) * (value - p) ** (-(k + 1))
        return total

    def reconstruct(self, value):
        """Principal parts plus the polynomial remainder."""
        value = np.asarray(value, dtype=complex)
        rem = np.broadcast_to(self._numeric_remainder(value), value.shape).astype(complex)
        return rem + self.principal_value(value)

    def poles_in_strip(self, low: float, high: float, closed_low: bool = False, closed_high: bool = False):
        selected = []
        for pole in self.poles:
            re = pole.value.real
            above = re >= low - ROOT_CLUSTER_TOL if closed_low else re > low + ROOT_CLUSTER_TOL
            below = re <= high + ROOT_CLUSTER_TOL if closed_high else re < high - ROOT_CLUSTER_TOL
            if above and below:
                selected.append(pole)
        return selected

    def shifted(self, sigma) -> "ModeMeromorphic":
        """T^σ g: z ↦ g(z + σ)."""
        return meromorphic(self.expr.subs(z, z + sigma), self.mode)

    def to_dict(self):
        return {
            "mode": self.mode,
            "expr": str(self.expr),
            "poles": [p.to_dict() for p in self.poles],
        }


def meromorphic(expr, mode: int) -> ModeMeromorphic:
    """Factor a rational function of z and collect its Laurent principal parts."""
    expr = sp.cancel(sp.together(sp.sympify(expr)))
    if expr == 0:
        return ModeMeromorphic(mode=mode, expr=sp.Integer(0), scalar=sp.Integer(0))
    num, den = sp.fraction(expr)
    num_poly = sp.Poly(num, z)
    den_poly = sp.Poly(den, z)
    exact = is_exact(expr)
    scalar = sp.simplify(num_poly.LC() / den_poly.LC())
    zeros = tuple(polynomial_roots(num_poly))
    if den_poly.degree() == 0:
        return ModeMeromorphic(mode=mode, expr=expr, remainder=sp.expand(expr), scalar=scalar, zeros=zeros)

    quotient, _ = sp.div(num_poly, den_poly)
    roots = polynomial_roots(den_poly)
    poles = []
    for index, (point, order) in enumerate(roots):
        others = sp.Integer(1)
        for other_index, (other, other_order) in enumerate(roots):
            if other_index != index:
                others *= (z - other) ** other_order
        h = num / (den_poly.LC() * others)
        principal = []
        for k in range(order):
            m = order - 1 - k
            derivative = sp.diff(h, z, m) if m else h
            value = derivative.subs(z, point) / sp.factorial(m)
            principal.append(_simplify_number(value, exact))
        poles.append(Pole(point=point, order=order, principal=tuple(principal)))
    return ModeMeromorphic(
        mode=mode, expr=expr, poles=tuple(poles), remainder=quotient.as_expr(),
        scalar=scalar, zeros=zeros,
    )


# ---------------------------------------------------------------------------
# Conormal symbol
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConormalSymbol:
    operator: ConeOperator
    spectrum: BoundarySpectrum
    polys: tuple  # one sp.Poly in z per mode

    @property
    def n(self) -> int:
        return self.operator.n

    @property
    def mu(self) -> int:
        return self.operator.mu

    def mode_expr(self, j: int) -> sp.Expr:
        return self.polys[j].as_expr()

    def evaluate(self, j: int, value) -> complex:
        return complex(self.polys[j].eval(sp.sympify(value)))

    def to_dict(self):
        return {
            "operator": self.operator.name,
            "modes": [
                {"mode": j, "eigenvalue": float(m.eigenvalue), "symbol": str(self.mode_expr(j))}
                for j, m in enumerate(self.spectrum)
            ],
        }


def conormal_symbol(A: ConeOperator, S: BoundarySpectrum) -> ConormalSymbol:
    _check_dimensions(A, S)
    polys = []
    for mode in S:
        expr = sum(
            (A.coefficient_at_zero(j).subs(lam, mode.eigenvalue) * z ** j for j in range(A.mu + 1)),
            sp.Integer(0),
        )
        polys.append(sp.Poly(sp.expand(expr), z))
    return ConormalSymbol(operator=A, spectrum=S, polys=tuple(polys))


def invert_conormal(sigma: ConormalSymbol) -> list:
    """Per-mode exact inverse σ(z)^{-1} in partial-fraction form."""
    inverses = []
    for j, poly in enumerate(sigma.polys):
        if poly.is_zero:
            raise IdenticallyZero(f"conormal symbol vanishes identically on mode {j}")
        inverses.append(meromorphic(1 / poly.as_expr(), j))
    return inverses


@dataclass(frozen=True)
class NonBijectivityPoint:
    q: sp.Expr
    order: int
    modes: tuple

    @property
    def value(self) -> complex:
        return complex(self.q)

    def to_dict(self):
        return {"q": as_pair(self.q), "order": self.order, "modes": list(self.modes)}


def nonbijectivity_points(sigma: ConormalSymbol, strip) -> list:
    """Roots of the mode polynomials with a < Re q < b, merged across modes."""
    a, b = float(strip[0]), float(strip[1])
    if a >= b:
        return []
    merged = []
    for j, poly in enumerate(sigma.polys):
        if poly.is_zero:
            raise IdenticallyZero(f"conormal symbol vanishes identically on mode {j}")
        for point, order in polynomial_roots(poly):
            re = complex(point).real
            if not (a < re < b):
                continue
            for entry in merged:
                if same_point(entry["q"], point):
                    entry["order"] = max(entry["order"], order)
                    entry["modes"].add(j)
                    break
            else:
                merged.append({"q": point, "order": order, "modes": {j}})
    points = [NonBijectivityPoint(q=e["q"], order=e["order"], modes=tuple(sorted(e["modes"]))) for e in merged]
    return sorted(points, key=lambda p: point_key(p.q))


# ---------------------------------------------------------------------------
# Rescaled symbol
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RescaledSymbol:
    """Σ_j σ(a_j)(0)(−|ξ|²) (−iτ)^j with Δ_∂ of order 2 and principal symbol −|ξ|²."""
    operator_name: str
    principal: tuple  # coefficient of (−|ξ|²)^{(μ−j)/2} for each j (0 when μ−j is odd)
    mu: int

    def __call__(self, xi_norm2, tau):
        xi_norm2 = np.asarray(xi_norm2, dtype=float)
        tau = np.asarray(tau, dtype=float)
        value = np.zeros(np.broadcast(xi_norm2, tau).shape, dtype=complex)
        for j, c in enumerate(self.principal):
            if c == 0:
                continue
            power = (self.mu - j) // 2
            value = value + complex(c) * (-xi_norm2) ** power * (-1j * tau) ** j
        return value if value.ndim else complex(value)


def rescaled_symbol(A: ConeOperator) -> RescaledSymbol:
    principal = []
    for j in range(A.mu + 1):
        coeff = A.coefficient_at_zero(j)
        poly = sp.Poly(coeff, lam)
        degree = poly.degree() if not poly.is_zero else -1
        order = A.mu - j
        if 2 * degree > order:
            raise UnsupportedCoefficient(
                f"a_{j}(0) = {coeff} has order {2 * degree} in Δ_∂, more than μ−j = {order}"
            )
        if order % 2 == 1:
            principal.append(sp.Integer(0))
        else:
            principal.append(poly.coeff_monomial(lam ** (order // 2)))
    return RescaledSymbol(operator_name=A.name, principal=tuple(principal), mu=A.mu)


# ---------------------------------------------------------------------------
# Taylor sequence and recursion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymbolSequence:
    kind: str  # "F" (holomorphic, Taylor) or "G" (meromorphic, recursion)
    operator: ConeOperator
    spectrum: BoundarySpectrum
    entries: tuple = field(default_factory=tuple)  # entries[l][mode]

    def __len__(self):
        return len(self.entries)

    def mode_entries(self, j: int) -> list:
        return [entry[j] for entry in self.entries]

    def to_dict(self):
        rows = []
        for l, entry in enumerate(self.entries):
            for j, item in enumerate(entry):
                value = item.expr if isinstance(item, ModeMeromorphic) else item
                rows.append({"l": l, "mode": j, "expr": str(value)})
        return {"kind": self.kind, "entries": rows}


def shift(expr, sigma) -> sp.Expr:
    """(T^σ f)(z) = f(z + σ)."""
    return sp.sympify(expr).subs(z, z + sigma)


def taylor_sequence(A: ConeOperator, S: BoundarySpectrum) -> SymbolSequence:
    _check_dimensions(A, S)
    entries = []
    for l in range(A.mu):
        per_mode = []
        for mode in S:
            expr = sp.Integer(0)
            for j, coeff in enumerate(A.coeffs):
                taylor = sp.Poly(coeff, t).coeff_monomial(t ** l)
                expr += sp.sympify(taylor).subs(lam, mode.eigenvalue) * z ** j
            per_mode.append(sp.expand(expr))
        entries.append(tuple(per_mode))
    return SymbolSequence(kind="F", operator=A, spectrum=S, entries=tuple(entries))


def g_recursion(F: SymbolSequence) -> SymbolSequence:
    if F.kind != "F":
        raise ValueError("g_recursion expects the Taylor (F) sequence")
    mu = len(F.entries)
    modes = len(F.spectrum)
    columns = []
    for j in range(modes):
        f = [F.entries[l][j] for l in range(mu)]
        if sp.expand(f[0]) == 0:
            raise IdenticallyZero(f"conormal symbol vanishes identically on mode {j}")
        g = [sp.cancel(1 / f[0])]
        for l in range(1, mu):
            acc = sum((shift(f[l - i], -i) * g[i] for i in range(l)), sp.Integer(0))
            g.append(sp.cancel(-shift(1 / f[0], -l) * acc))
        columns.append([meromorphic(expr, j) for expr in g])
    entries = tuple(tuple(columns[j][l] for j in range(modes)) for l in range(mu))
    logger.debug(f"g recursion done for {F.operator.name}: {mu} terms x {modes} modes")
    return SymbolSequence(kind="G", operator=F.operator, spectrum=F.spectrum, entries=entries)


def kronecker_defects(F: SymbolSequence, G: SymbolSequence) -> list:
    """Σ_{l<=j} (T^{-l} f_{j−l}) g_l − δ_{0j} per mode and j, simplified (all zero when consistent)."""
    defects = []
    for mode in range(len(F.spectrum)):
        row = []
        for j in range(len(F.entries)):
            total = sum(
                (shift(F.entries[j - l][mode], -l) * G.entries[l][mode].expr for l in range(j + 1)),
                sp.Integer(0),
            )
            row.append(sp.simplify(total - (1 if j == 0 else 0)))
        defects.append(row)
    return defects
