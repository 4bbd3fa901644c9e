"""
Per-mode resolvent of a closed Laplacian extension on the truncated cone

B = (0, 1] × ∂B with a Dirichlet condition at t = 1 (the unit disk when
n = 1). On the mode with boundary eigenvalue λ_j, (λ + cΔ)u = f reads in
s = log t

    c (e^{−(n−1)s} ∂_s(e^{(n−1)s} ∂_s u) + λ_j u) + λ e^{2s} u = e^{2s} f

discretised in flux form on a uniform s-grid over [log t_min, 0]. The
first row is the near-0 condition: of the two discrete homogeneous
solutions ρ_±^i (the grid versions of t^{−q_±}) only the admissible
combination of the chosen extension survives.

Conventions:
- A = −Δ and R(λ) = (λ + Δ)^{-1} = (λ − A)^{-1}; spectral points are λ = μ > 0
- norms are the discrete H^{0,γ}_2 norms Σ_i |t_i^{(n+1)/2−γ} u_i|² h summed over modes
- each mode must have exactly one admissible near-0 behaviour, common to
  all of E_j; anything else raises UnsupportedExtension
"""

import logging
import threading
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import sympy as sp
from django.conf import settings
from scipy import linalg, optimize

from .bessel import bessel_j, bessel_zero
from .conormal import same_point
from .cutoff import as_pair, as_real
from .domains import Extension, SelectionKind, compare, exact_parameter, indicial_roots
from .errors import DimensionMismatch, IllConditioned, OracleInconclusive, SlopeUndefined, UnsupportedExtension
from .mellin_green import RadialFunction, sampled
from .workers import parallel_map

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
POWER_ITERATIONS = 20
POWER_SEED = 0x5EED
DIAGNOSTIC_TOL = 1e-6
SCAN_POINTS = 400
FACTOR_CACHE = 2  # factored λ values kept per mode
STEADY_STATE_LAMBDA = -1e-6
BOTTOM_SCAN = (32.0, 2.0 ** 16)  # first and last upper end when searching for λ₁
REGULARITY_SLACK = 10.0


def lp_weight(n: int, p) -> sp.Expr:
    """γ_p = (n+1)(1/2 − 1/p), the weight with H^{0,γ_p}_p(B) = L_p(B)."""
    p = exact_parameter(p)
    if p <= 1:
        raise ValueError("p must be > 1")
    return sp.Integer(n + 1) * (sp.Rational(1, 2) - 1 / p)


# ---------------------------------------------------------------------------
# Near-0 channels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeChannel:
    """Near-0 behaviour of one mode: u ≈ v_1 φ_1 + v_2 φ_2 up to a constant factor.

    φ = (t^{−q+}, t^{−q−}), or (t^{−q}, t^{−q} log t) for a double root.
    """
    mode: int
    eigenvalue: float
    roots: tuple
    log: bool
    admissible: tuple


def _admissible_behaviour(ext: Extension, mode: int) -> ModeChannel:
    entry = ext.spectrum[mode]
    roots = indicial_roots(ext.n, entry.eigenvalue)
    m = entry.multiplicity
    interval = ext.interval
    log = len(roots) == 1
    vectors = []

    if log:
        q = roots[0]
        if compare(q, interval.lower) <= 0:
            vectors += [(1, 0), (0, 1)]
        elif compare(q, interval.upper) < 0:
            kind = ext.selection_for(q).kind
            if kind == SelectionKind.FULL:
                vectors += [(1, 0), (0, 1)]
            elif kind == SelectionKind.OMEGA:
                vectors.append((1, 0))
    else:
        for unit, q in zip(((1, 0), (0, 1)), roots):
            if compare(q, interval.lower) <= 0:
                vectors.append(unit)
            elif compare(q, interval.upper) < 0:
                space = interval.find(q)
                rows = ext.selection_for(q).rows_for(space, mode)
                rank = int(np.linalg.matrix_rank(rows)) if rows.shape[0] else 0
                if 0 < rank < m:
                    raise UnsupportedExtension(
                        f"mode {mode}: the selection at q={q} splits E_j; the resolvent solver needs one channel per mode"
                    )
                if rank == m:
                    vectors.append(unit)

    for gen in ext.generators:
        if gen.mode != mode:
            continue
        if m != 1:
            raise UnsupportedExtension(f"mode {mode}: a single generator line splits E_j of dimension {m}")
        vec = np.zeros(2, dtype=complex)
        for q, k, coeff in gen.terms:
            slot = k if log else (0 if same_point(q, roots[0]) else 1)
            vec[slot] += complex(coeff) * complex(gen.vector[0])
        vectors.append(tuple(vec))

    matrix = np.array(vectors, dtype=complex).reshape(-1, 2)
    rank = int(np.linalg.matrix_rank(matrix, tol=1e-9)) if matrix.size else 0
    if rank != 1:
        raise UnsupportedExtension(
            f"mode {mode}: {rank} admissible near-0 behaviours; the resolvent solver needs exactly one"
        )
    v = linalg.orth(matrix.T)[:, 0]
    k = int(np.argmax(np.abs(v)))
    v = v * abs(v[k]) / v[k]
    return ModeChannel(
        mode=mode, eigenvalue=float(entry.eigenvalue), roots=tuple(float(q) for q in roots), log=log,
        admissible=tuple(complex(x) for x in v),
    )


# ---------------------------------------------------------------------------
# Discretisation
# ---------------------------------------------------------------------------

@dataclass
class Factorization:
    mode: int
    lam: complex
    matrix: np.ndarray
    lu: tuple
    condition: float

    def solve(self, rhs, adjoint: bool = False) -> np.ndarray:
        return linalg.lu_solve(self.lu, rhs, trans=2 if adjoint else 0)

    def residual(self, x, rhs) -> float:
        scale = np.linalg.norm(rhs)
        r = np.linalg.norm(self.matrix @ x - rhs)
        return float(r / scale) if scale else float(r)

    def determinant_proxy(self) -> complex:
        """sign(det) · |det|^{1/N}: continuous in λ with the zeros of det."""
        lu, piv = self.lu
        diag = np.diag(lu)
        swaps = int(np.count_nonzero(piv != np.arange(piv.size)))
        size = np.abs(diag)
        if np.any(size == 0):
            return 0j
        phase = np.prod(diag / size) * (-1) ** swaps
        return complex(phase * np.exp(np.mean(np.log(size))))


class ModeDiscretization:
    """Tridiagonal system of one mode; row 0 is the near-0 condition, u_{N−1} = 0 is dropped."""

    def __init__(self, channel: ModeChannel, s: np.ndarray, n: int, scale: float = 1.0):
        self.channel = channel
        self.mode = channel.mode
        self.s = s
        self.h = float(s[1] - s[0])
        self.size = s.size - 1
        self.scale = scale
        h = self.h
        self.alpha = float(np.exp((n - 1) * h / 2))
        self.rho = self._discrete_roots()
        self.exponents = tuple(-np.log(r) / h for r in self.rho)

        a = self.alpha
        stiffness = np.zeros((self.size, self.size))
        idx = np.arange(1, self.size)
        stiffness[idx, idx] = -(a + 1 / a) / h ** 2 + channel.eigenvalue
        stiffness[idx, idx - 1] = 1 / (a * h ** 2)
        inner = idx[idx + 1 < self.size]
        stiffness[inner, inner + 1] = a / h ** 2
        self.stiffness = scale * stiffness
        self.mass = np.exp(2 * s[:-1])
        self.mass[0] = 0.0
        self.boundary_row = self._boundary_row()

    def _discrete_roots(self) -> tuple:
        """Roots of αρ² − (α + 1/α − h²λ_j)ρ + 1/α, ordered (q+, q−) i.e. smaller ρ first."""
        a, h = self.alpha, self.h
        b = a + 1 / a - h * h * self.channel.eigenvalue
        if self.channel.log:
            return (1 / a,)
        large = (b + np.sqrt(max(b * b - 4, 0.0))) / (2 * a)
        return (1 / (a * a * large), large)

    def _boundary_row(self) -> np.ndarray:
        va, vb = self.channel.admissible
        s0, h = float(self.s[0]), self.h
        if self.channel.log:
            rho = self.rho[0]
            c0 = vb + (vb * s0 + va) / h
            c1 = -(vb * s0 + va) / (h * rho)
        else:
            rho_p, rho_m = self.rho
            e_p, e_m = (q * s0 for q in self.exponents)
            top = max(e_p, e_m)
            w_p, w_m = np.exp(e_p - top), np.exp(e_m - top)
            c0 = -vb * w_p * rho_m - va * w_m * rho_p
            c1 = vb * w_p + va * w_m
        row = np.array([c0, c1], dtype=complex)
        row *= abs(self.scale) / (h * h * np.max(np.abs(row)))
        if np.allclose(row.imag, 0):
            row = row.real
        return row

    def matrix(self, lam) -> np.ndarray:
        lam = complex(lam)
        complex_entries = lam.imag != 0 or np.iscomplexobj(self.boundary_row)
        dtype = complex if complex_entries else float
        K = self.stiffness.astype(dtype) + (lam if complex_entries else lam.real) * np.diag(self.mass)
        K[0, :] = 0
        K[0, :2] = self.boundary_row
        return K

    def factor(self, lam, check: bool = True) -> Factorization:
        K = self.matrix(lam)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", linalg.LinAlgWarning)
            lu = linalg.lu_factor(K, check_finite=False)
        gecon, = linalg.get_lapack_funcs(('gecon',), (lu[0],))
        rcond, _ = gecon(lu[0], np.linalg.norm(K, 1), norm='1')
        condition = float(1 / rcond) if rcond > 0 else float('inf')
        if check and condition > CONDITION_LIMIT:
            logger.warning(f"mode {self.mode}: condition estimate {condition:.3g} at λ={complex(lam):g}")
            raise IllConditioned(
                f"mode {self.mode} is ill-conditioned at λ={complex(lam):g} (condition {condition:.3g}); "
                f"λ is close to the spectrum", mode=self.mode, condition=condition,
            )
        return Factorization(mode=self.mode, lam=complex(lam), matrix=K, lu=lu, condition=condition)

    def rhs(self, f_values) -> np.ndarray:
        return self.mass * np.asarray(f_values, dtype=complex)[:-1]

    def fit_near_zero(self, u) -> tuple:
        """(a, b) coefficients of (φ_1, φ_2) fitted on the innermost decade."""
        count = max(3, int(np.searchsorted(self.s, self.s[0] + np.log(10.0))))
        i = np.arange(count)
        s0 = float(self.s[0])
        u = np.asarray(u[:count], dtype=complex)
        if self.channel.log:
            rho = self.rho[0]
            basis = np.column_stack([rho ** i, i * rho ** i])
            (A, B), *_ = np.linalg.lstsq(basis, u, rcond=None)
            q = self.exponents[0]
            b = B * np.exp(q * s0) / self.h
            a = A * np.exp(q * s0) - b * s0
            return complex(a), complex(b)
        basis = np.column_stack([self.rho[0] ** i, self.rho[1] ** i])
        (A, B), *_ = np.linalg.lstsq(basis, u, rcond=None)
        return complex(A * np.exp(self.exponents[0] * s0)), complex(B * np.exp(self.exponents[1] * s0))


class DiscreteDomain:
    """An extension on the radial grid t ∈ [t_min, 1] with modes 0..J−1 and Dirichlet at t = 1."""

    def __init__(self, extension: Extension, t_min: Optional[float] = None, nodes: Optional[int] = None,
                 scale: float = 1.0):
        self.extension = extension
        self.t_min = float(t_min if t_min is not None else getattr(settings, 'CONE_LAB_T_MIN', 1e-6))
        self.nodes = int(nodes if nodes is not None else getattr(settings, 'CONE_LAB_GRID_NODES', 400))
        if not 0 < self.t_min < 1:
            raise ValueError("t_min must lie in (0, 1)")
        if self.nodes < 10:
            raise ValueError("the radial grid needs at least 10 nodes")
        self.scale = float(scale)
        self.gamma = float(extension.gamma)
        self.n = extension.n
        self.s = np.linspace(np.log(self.t_min), 0.0, self.nodes)
        self.t = np.exp(self.s)
        self.h = float(self.s[1] - self.s[0])
        self.modes = tuple(
            ModeDiscretization(_admissible_behaviour(extension, j), self.s, self.n, self.scale)
            for j in range(len(extension.spectrum))
        )
        self.weights = self.t ** ((self.n + 1) / 2 - self.gamma) * np.sqrt(self.h)
        self._factors = OrderedDict()
        self._lock = threading.Lock()
        logger.debug(f"discrete domain: {self.nodes} nodes, t_min={self.t_min:g}, J={self.J}")

    @property
    def J(self) -> int:
        return len(self.modes)

    def refined(self) -> "DiscreteDomain":
        """Half the inner radius, twice the nodes."""
        return DiscreteDomain(self.extension, self.t_min / 2, 2 * self.nodes, self.scale)

    def rescaled(self, scale: float) -> "DiscreteDomain":
        return DiscreteDomain(self.extension, self.t_min, self.nodes, scale)

    def factor(self, lam, mode: int, check: bool = True) -> Factorization:
        """LU of the mode system at λ; checked factors are kept for the last few (λ, mode) pairs."""
        if not check:
            return self.modes[mode].factor(lam, check=False)
        key = (complex(lam), mode)
        with self._lock:
            cached = self._factors.get(key)
        if cached is not None:
            return cached
        factor = self.modes[mode].factor(lam)
        with self._lock:
            self._factors[key] = factor
            while len(self._factors) > FACTOR_CACHE * self.J:
                self._factors.popitem(last=False)
        return factor

    def norm(self, values) -> float:
        return float(np.linalg.norm(self.weights * np.asarray(values)))

    def inner(self, u, v) -> complex:
        return complex(np.sum(self.weights ** 2 * np.asarray(u) * np.conj(v)))

    def to_dict(self):
        return {
            "extension": self.extension.describe(),
            "gamma": self.gamma,
            "t_min": self.t_min,
            "nodes": self.nodes,
            "modes": self.J,
            "outer_condition": "dirichlet",
            "scale": self.scale,
        }


def discrete_domain(extension: Extension, t_min=None, nodes=None, scale: float = 1.0) -> DiscreteDomain:
    return DiscreteDomain(extension, t_min=t_min, nodes=nodes, scale=scale)


# ---------------------------------------------------------------------------
# Resolvent
# ---------------------------------------------------------------------------

def mode_resolvent_solve(dd: DiscreteDomain, lam, mode: int, rhs) -> np.ndarray:
    """R(λ) on one mode: grid values of f in, grid values of u out (u = 0 at t = 1)."""
    if not 0 <= mode < dd.J:
        raise DimensionMismatch(f"mode {mode} is outside the truncation J={dd.J}")
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape != (dd.nodes,):
        raise DimensionMismatch(f"rhs has shape {rhs.shape}, the grid has {dd.nodes} nodes")
    factor = dd.factor(lam, mode)
    x = factor.solve(dd.modes[mode].rhs(rhs))
    return np.append(x, 0.0)


@dataclass(frozen=True)
class ModeDiagnostic:
    mode: int
    coefficients: tuple  # ((q, log_power, coefficient), ...)
    excluded: float

    @property
    def passed(self) -> bool:
        return self.excluded <= DIAGNOSTIC_TOL

    def to_dict(self):
        return {
            "mode": self.mode,
            "coefficients": [
                {"q": as_real(q), "log_power": k, "coefficient": as_pair(c)} for q, k, c in self.coefficients
            ],
            "excluded_relative": as_real(self.excluded),
            "passed": self.passed,
        }


def domain_diagnostic(dd: DiscreteDomain, mode: int, u) -> ModeDiagnostic:
    """Near-0 coefficients of u and the relative size of the non-admissible combination."""
    disc = dd.modes[mode]
    a, b = disc.fit_near_zero(u)
    va, vb = disc.channel.admissible
    size = np.hypot(abs(a), abs(b))
    excluded = abs(vb * a - va * b) / size if size else 0.0
    roots = disc.channel.roots
    if disc.channel.log:
        coefficients = ((roots[0], 0, a), (roots[0], 1, b))
    else:
        coefficients = ((roots[0], 0, a), (roots[1], 0, b))
    return ModeDiagnostic(mode=mode, coefficients=coefficients, excluded=float(excluded))


@dataclass(frozen=True)
class ModeSolution:
    mode: int
    values: np.ndarray
    residual: float
    condition: float


@dataclass(frozen=True)
class ResolventResult:
    lam: complex
    grid: np.ndarray
    solutions: tuple
    residual: float
    norm_f: float
    norm_u: float
    diagnostics: tuple
    discretization: dict = field(default_factory=dict)

    @property
    def applied_norm(self) -> float:
        return self.norm_u / self.norm_f if self.norm_f else 0.0

    def solution(self, mode: int) -> np.ndarray:
        for sol in self.solutions:
            if sol.mode == mode:
                return sol.values
        return np.zeros_like(self.grid, dtype=complex)

    def to_dict(self):
        return {
            "lambda": as_pair(self.lam),
            "discretization": self.discretization,
            "residual": as_real(self.residual),
            "norm_f": as_real(self.norm_f),
            "norm_u": as_real(self.norm_u),
            "applied_norm": as_real(self.applied_norm),
            "modes": [
                {"mode": s.mode, "residual": as_real(s.residual), "condition": as_real(s.condition)}
                for s in self.solutions
            ],
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }


def sample_forcing(dd: DiscreteDomain, f) -> dict:
    """{mode: grid values}; ``f`` is a RadialFunction, a list of them, or {mode: values}."""
    if isinstance(f, RadialFunction):
        f = [f]
    if isinstance(f, dict):
        samples = {int(j): np.asarray(v, dtype=complex) for j, v in f.items()}
    else:
        samples = {}
        for profile in f:
            samples[profile.mode] = samples.get(profile.mode, 0) + np.asarray(profile(dd.t), dtype=complex)
    for j, values in samples.items():
        if not 0 <= j < dd.J:
            raise DimensionMismatch(f"forcing on mode {j} is outside the truncation J={dd.J}")
        if np.shape(values) != (dd.nodes,):
            raise DimensionMismatch(f"forcing on mode {j} has {np.size(values)} values, the grid has {dd.nodes}")
    return dict(sorted(samples.items()))


def resolvent_apply(dd: DiscreteDomain, lam, f, jobs=None) -> ResolventResult:
    samples = sample_forcing(dd, f)

    def per_mode(item):
        j, values = item
        factor = dd.factor(lam, j)
        rhs = dd.modes[j].rhs(values)
        x = factor.solve(rhs)
        u = np.append(x, 0.0)
        return ModeSolution(mode=j, values=u, residual=factor.residual(x, rhs), condition=factor.condition)

    solutions = tuple(parallel_map(per_mode, samples.items(), jobs))
    norm_f = float(np.sqrt(sum(dd.norm(v) ** 2 for v in samples.values())))
    norm_u = float(np.sqrt(sum(dd.norm(s.values) ** 2 for s in solutions)))
    residual = max((s.residual for s in solutions), default=0.0)
    diagnostics = tuple(domain_diagnostic(dd, s.mode, s.values) for s in solutions)
    logger.info(f"R({complex(lam):g}) applied on {len(solutions)} mode(s), residual {residual:.2e}")
    return ResolventResult(
        lam=complex(lam), grid=dd.t, solutions=solutions, residual=residual, norm_f=norm_f, norm_u=norm_u,
        diagnostics=diagnostics, discretization=dd.to_dict(),
    )


def resolvent_identity_defect(dd: DiscreteDomain, lam, zeta, f) -> float:
    """‖R(λ)f − R(ζ)f − (ζ−λ)R(λ)R(ζ)f‖ / ‖R(λ)f‖."""
    left = right = 0.0
    for j, values in sample_forcing(dd, f).items():
        r_lam = mode_resolvent_solve(dd, lam, j, values)
        r_zeta = mode_resolvent_solve(dd, zeta, j, values)
        both = mode_resolvent_solve(dd, lam, j, r_zeta)
        left += dd.norm(r_lam - r_zeta - (complex(zeta) - complex(lam)) * both) ** 2
        right += dd.norm(r_lam) ** 2
    return float(np.sqrt(left / right)) if right else float(np.sqrt(left))


def symmetry_defect(dd: DiscreteDomain, lam, f, g) -> float:
    """|⟨R(λ)f, g⟩ − ⟨f, R(λ̄)g⟩| relative to ‖R(λ)f‖‖g‖."""
    fs, gs = sample_forcing(dd, f), sample_forcing(dd, g)
    lhs = rhs = 0j
    scale = 0.0
    for j in sorted(set(fs) | set(gs)):
        fj = fs.get(j, np.zeros(dd.nodes, dtype=complex))
        gj = gs.get(j, np.zeros(dd.nodes, dtype=complex))
        rf = mode_resolvent_solve(dd, lam, j, fj)
        lhs += dd.inner(rf, gj)
        rhs += dd.inner(fj, mode_resolvent_solve(dd, np.conj(complex(lam)), j, gj))
        scale += (dd.norm(rf) * dd.norm(gj)) ** 2
    return float(abs(lhs - rhs) / np.sqrt(scale)) if scale else float(abs(lhs - rhs))


# ---------------------------------------------------------------------------
# Operator norms and decay
# ---------------------------------------------------------------------------

def mode_operator_norm(dd: DiscreteDomain, lam, mode: int) -> tuple:
    """(‖R(λ)‖ on the mode, worst solve residual) by power iteration on R R*."""
    disc = dd.modes[mode]
    factor = dd.factor(lam, mode)
    w = dd.weights[:-1]
    rng = np.random.default_rng([POWER_SEED, mode])
    x = rng.standard_normal(disc.size) + 1j * rng.standard_normal(disc.size)
    x /= np.linalg.norm(x)
    worst = 0.0
    estimate = 0.0
    for _ in range(POWER_ITERATIONS):
        rhs = w * x
        y = factor.solve(rhs, adjoint=True)
        worst = max(worst, np.linalg.norm(factor.matrix.conj().T @ y - rhs) / max(np.linalg.norm(rhs), 1e-300))
        y = disc.mass * y / w
        rhs = disc.mass * (y / w)
        z = factor.solve(rhs)
        worst = max(worst, factor.residual(z, rhs))
        x = w * z
        estimate = np.linalg.norm(x)
        if estimate == 0:
            break
        x /= estimate
    return float(np.sqrt(estimate)), float(worst)


def operator_norm(dd: DiscreteDomain, lam, jobs=None) -> tuple:
    """(max over modes of ‖R(λ)‖, worst residual)."""
    results = parallel_map(lambda j: mode_operator_norm(dd, lam, j), range(dd.J), jobs)
    return max(r[0] for r in results), max(r[1] for r in results)


@dataclass(frozen=True)
class DecayFit:
    ray: float
    slope: float
    intercept: float
    norms: tuple  # ((|λ|, ‖R(λ)‖), ...)
    used: tuple
    max_residual: float

    def to_dict(self):
        return {
            "ray": self.ray,
            "slope": as_real(self.slope),
            "intercept": as_real(self.intercept),
            "norms": [{"magnitude": m, "norm": as_real(r)} for m, r in self.norms],
            "fitted_magnitudes": list(self.used),
            "max_residual": as_real(self.max_residual),
        }


def norm_decay_fit(dd: DiscreteDomain, ray: float, magnitudes, jobs=None) -> DecayFit:
    """Least-squares slope of log‖R(λ)‖ against log|λ| along arg λ = ray.

    Only the asymptotic regime is fitted: |λ| >= 10/‖R(λ_smallest)‖, and at
    least the two largest magnitudes.
    """
    magnitudes = sorted(float(m) for m in magnitudes)
    if len(magnitudes) < 2:
        raise SlopeUndefined("a decay slope needs at least two magnitudes")
    if magnitudes[0] <= 0:
        raise ValueError("magnitudes must be positive")
    norms, worst = [], 0.0
    for m in magnitudes:
        value, residual = operator_norm(dd, m * np.exp(1j * ray), jobs)
        norms.append((m, value))
        worst = max(worst, residual)
        logger.debug(f"‖R({m:g}·e^(i{ray:g}))‖ = {value:.6g}")
    threshold = 10.0 / norms[0][1]
    used = [m for m, _ in norms if m >= threshold]
    if len(used) < 2:
        used = magnitudes[-2:]
    x = np.log([m for m, _ in norms if m in used])
    y = np.log([r for m, r in norms if m in used])
    slope, intercept = np.polyfit(x, y, 1)
    logger.info(f"decay slope {slope:.4f} on ray {ray:g} over |λ| in {used}")
    return DecayFit(
        ray=float(ray), slope=float(slope), intercept=float(intercept), norms=tuple(norms), used=tuple(used),
        max_residual=float(worst),
    )


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralPoint:
    value: float
    mode: int
    index: int  # 1-based position among the points of the mode in the scanned interval

    def bessel_reference(self, dd: DiscreteDomain) -> float:
        """j_{ν,k}² for the solution regular at 0 (the Friedrichs realization)."""
        channel = dd.modes[self.mode].channel
        nu = float(np.sqrt(((dd.n - 1) / 2) ** 2 - channel.eigenvalue))
        return bessel_zero(nu, self.index) ** 2 * dd.scale

    def to_dict(self):
        return {"value": as_real(self.value), "mode": self.mode, "index": self.index}


def _mode_spectrum(dd: DiscreteDomain, mode: int, low: float, high: float, tol: float, points: int) -> list:
    def proxy(lam):
        return dd.factor(lam, mode, check=False).determinant_proxy().real

    grid = np.linspace(low, high, points + 1)
    values = [proxy(x) for x in grid]
    found = []
    for x0, x1, f0, f1 in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if f0 == 0:
            found.append(float(x0))
        elif f0 * f1 < 0:
            found.append(float(optimize.brentq(proxy, x0, x1, xtol=tol)))
    if values[-1] == 0:
        found.append(float(grid[-1]))
    return [SpectralPoint(value=v, mode=mode, index=k + 1) for k, v in enumerate(found)]


def detect_spectrum(dd: DiscreteDomain, interval, tol: float = 1e-10, modes=None, points: int = SCAN_POINTS,
                    jobs=None) -> list:
    """Eigenvalues of A in [low, high]: sign changes of det on a scan, refined by Brent's method.

    ``index`` counts from ``low``; for Bessel references scan from below the bottom of the spectrum.
    """
    low, high = (float(x) for x in interval)
    if not low < high:
        return []
    modes = range(dd.J) if modes is None else modes
    per_mode = parallel_map(lambda j: _mode_spectrum(dd, j, low, high, tol, points), modes, jobs)
    found = sorted((p for mode_points in per_mode for p in mode_points), key=lambda p: (p.value, p.mode))
    logger.info(f"{len(found)} spectral point(s) in [{low:g}, {high:g}]")
    return found


def spectrum_convergence(dd: DiscreteDomain, interval, tol: float = 1e-10, modes=None, jobs=None) -> list:
    """[(point, refined value)] after halving t_min and doubling the nodes."""
    fine = dd.refined()
    coarse = detect_spectrum(dd, interval, tol, modes, jobs=jobs)
    refined = detect_spectrum(fine, interval, tol, modes, jobs=jobs)
    pairs = []
    for point in coarse:
        match = [p.value for p in refined if p.mode == point.mode and p.index == point.index]
        pairs.append((point, match[0] if match else None))
    return pairs


# ---------------------------------------------------------------------------
# Heat equation u̇ − Δu = f, u(0) = 0
# ---------------------------------------------------------------------------

class Scheme(str, Enum):
    EULER = "implicit-euler"
    CRANK_NICOLSON = "crank-nicolson"


class TimeProfile(str, Enum):
    CONSTANT = "constant"
    SINE = "sine"
    STEP = "step"
    RAMP = "ramp"

    def value(self, tau: float, T: float) -> float:
        if self == TimeProfile.CONSTANT:
            return 1.0
        if self == TimeProfile.SINE:
            return float(np.sin(2 * np.pi * tau / T))
        if self == TimeProfile.STEP:
            return 1.0 if tau <= T / 2 else 0.0
        return tau / T


@dataclass(frozen=True)
class Forcing:
    """f(τ, t) = φ(τ) · Σ profiles."""
    profiles: tuple = ()
    time: TimeProfile = TimeProfile.CONSTANT

    def to_dict(self):
        return {"time": self.time._value_, "profiles": [p.to_dict() for p in self.profiles]}


def ground_state_profile(dd: DiscreteDomain, mode: int = 0) -> RadialFunction:
    """t^{−(n−1)/2} J_ν(j_{ν,1} t), the first Friedrichs eigenfunction of the mode, on the grid."""
    channel = dd.modes[mode].channel
    nu = float(np.sqrt(((dd.n - 1) / 2) ** 2 - channel.eigenvalue))
    j = bessel_zero(nu, 1)
    values = [t ** (-(dd.n - 1) / 2) * bessel_j(nu, j * t) for t in dd.t]
    values[-1] = 0.0
    return sampled(dd.t, values, mode=mode)


@dataclass(frozen=True)
class HeatResult:
    scheme: Scheme
    T: float
    steps: int
    q: float
    times: tuple
    norms: tuple
    derivative_norm: float
    forcing_norm: float
    steady_state_error: Optional[float] = None
    final: dict = field(default_factory=dict, repr=False)

    @property
    def ratio(self) -> float:
        return self.derivative_norm / self.forcing_norm if self.forcing_norm else 0.0

    def to_dict(self):
        return {
            "scheme": self.scheme.value,
            "T": self.T,
            "steps": self.steps,
            "q": self.q,
            "trajectory": [{"time": as_real(t), "norm": as_real(v)} for t, v in zip(self.times, self.norms)],
            "derivative_norm": as_real(self.derivative_norm),
            "forcing_norm": as_real(self.forcing_norm),
            "regularity_ratio": as_real(self.ratio),
            "steady_state_error": as_real(self.steady_state_error) if self.steady_state_error is not None else None,
        }


def heat_solve(dd: DiscreteDomain, forcing: Forcing, T: float, steps: int, q: float = 2.0,
               scheme: Scheme = Scheme.EULER, jobs=None) -> HeatResult:
    """Time stepping through the resolvent only.

    Implicit Euler: u^{k+1} = −R(−1/Δt)(u^k/Δt + f^{k+1}).
    Crank–Nicolson: u^{k+1} = −R(−2/Δt)(4u^k/Δt + f^{k+1} + f^k) − u^k.
    """
    if T <= 0 or steps < 1:
        raise ValueError("T must be positive and steps >= 1")
    if q < 1:
        raise ValueError("q must be >= 1")
    scheme = Scheme(scheme)
    dt = T / steps
    lam = -1 / dt if scheme == Scheme.EULER else -2 / dt
    samples = sample_forcing(dd, list(forcing.profiles)) if forcing.profiles else {}
    modes = list(samples)
    state = {j: np.zeros(dd.nodes, dtype=complex) for j in modes}

    times, norms = [0.0], [0.0]
    derivative_sum = forcing_sum = 0.0
    for k in range(steps):
        tau = (k + 1) * dt
        now = forcing.time.value(tau, T)
        before = forcing.time.value(k * dt, T)

        def advance(j):
            u = state[j]
            if scheme == Scheme.EULER:
                return -mode_resolvent_solve(dd, lam, j, u / dt + now * samples[j])
            return -mode_resolvent_solve(dd, lam, j, 4 * u / dt + (now + before) * samples[j]) - u

        new = dict(zip(modes, parallel_map(advance, modes, jobs)))
        weight = now if scheme == Scheme.EULER else (now + before) / 2
        derivative = np.sqrt(sum(dd.norm((new[j] - state[j]) / dt) ** 2 for j in modes))
        applied = abs(weight) * np.sqrt(sum(dd.norm(samples[j]) ** 2 for j in modes))
        derivative_sum += dt * derivative ** q
        forcing_sum += dt * applied ** q
        state = new
        times.append(tau)
        norms.append(float(np.sqrt(sum(dd.norm(state[j]) ** 2 for j in modes))))

    steady = None
    if forcing.time == TimeProfile.CONSTANT and modes:
        limit = {j: -mode_resolvent_solve(dd, STEADY_STATE_LAMBDA, j, samples[j]) for j in modes}
        diff = np.sqrt(sum(dd.norm(state[j] - limit[j]) ** 2 for j in modes))
        size = np.sqrt(sum(dd.norm(limit[j]) ** 2 for j in modes))
        steady = float(diff / size) if size else float(diff)
    result = HeatResult(
        scheme=scheme, T=float(T), steps=int(steps), q=float(q), times=tuple(times), norms=tuple(norms),
        derivative_norm=float(derivative_sum ** (1 / q)), forcing_norm=float(forcing_sum ** (1 / q)),
        steady_state_error=steady, final=state,
    )
    logger.info(f"heat {scheme.value}: T={T:g}, {steps} steps, ratio {result.ratio:.4f}")
    return result


def single_mode_ratio(lam: float, T: float, steps: int, q: float = 2.0, scheme: Scheme = Scheme.EULER,
                      time: TimeProfile = TimeProfile.CONSTANT) -> float:
    """‖u̇‖_q / ‖f‖_q for the scalar problem u̇ + λu = φ(τ), u(0) = 0, stepped like heat_solve."""
    if T <= 0 or steps < 1:
        raise ValueError("T must be positive and steps >= 1")
    scheme = Scheme(scheme)
    time = TimeProfile(time)
    dt = T / steps
    u = 0.0
    derivative_sum = forcing_sum = 0.0
    for k in range(steps):
        now = time.value((k + 1) * dt, T)
        before = time.value(k * dt, T)
        if scheme == Scheme.EULER:
            new = (u + dt * now) / (1 + lam * dt)
            weight = now
        else:
            weight = (now + before) / 2
            new = ((1 - lam * dt / 2) * u + dt * weight) / (1 + lam * dt / 2)
        derivative_sum += dt * abs((new - u) / dt) ** q
        forcing_sum += dt * abs(weight) ** q
        u = new
    return float((derivative_sum / forcing_sum) ** (1 / q)) if forcing_sum else 0.0


def lowest_eigenvalue(dd: DiscreteDomain, jobs=None) -> float:
    """Smallest positive eigenvalue of A, scanning [0, high] with high growing fourfold."""
    high, ceiling = BOTTOM_SCAN
    while high <= ceiling:
        found = detect_spectrum(dd, (0.0, high), jobs=jobs)
        if found:
            return found[0].value
        high *= 4
    raise OracleInconclusive(f"no eigenvalue of A in (0, {ceiling:g}]")


@dataclass(frozen=True)
class RegularityReport:
    ratios: tuple  # ((time profile, ratio), ...)
    eigenvalue: float  # λ₁
    single_mode: tuple  # ((time profile, scalar ratio at λ₁), ...)
    slack: float = REGULARITY_SLACK

    @property
    def bound(self) -> float:
        return max((r for _, r in self.single_mode), default=0.0)

    @property
    def max_ratio(self) -> float:
        return max((r for _, r in self.ratios), default=0.0)

    @property
    def within_bound(self) -> bool:
        return self.max_ratio <= self.slack * self.bound

    def to_dict(self):
        return {
            "ratios": [{"forcing": p.value, "ratio": as_real(r)} for p, r in self.ratios],
            "max_ratio": as_real(self.max_ratio),
            "lowest_eigenvalue": as_real(self.eigenvalue),
            "single_mode": [{"forcing": p.value, "ratio": as_real(r)} for p, r in self.single_mode],
            "bound": as_real(self.bound),
            "slack": self.slack,
            "within_bound": self.within_bound,
        }


def regularity_battery(dd: DiscreteDomain, profiles, T: float, steps: int, q: float = 2.0,
                       scheme: Scheme = Scheme.EULER, jobs=None) -> RegularityReport:
    """Maximal-regularity ratio of heat_solve for every time profile on the same spatial profiles.

    The bound is the worst scalar ratio for u̇ + λ₁u = φ(τ) over the profiles, λ₁ the bottom of the
    detected spectrum.
    """
    eigenvalue = lowest_eigenvalue(dd, jobs)
    ratios, single_mode = [], []
    for time in TimeProfile:
        result = heat_solve(dd, Forcing(profiles=tuple(profiles), time=time), T, steps, q, scheme, jobs)
        ratios.append((time, result.ratio))
        single_mode.append((time, single_mode_ratio(eigenvalue, T, steps, q, scheme, time)))
    report = RegularityReport(ratios=tuple(ratios), eigenvalue=eigenvalue, single_mode=tuple(single_mode))
    logger.info(f"regularity: λ₁={eigenvalue:.6g}, max ratio {report.max_ratio:.4f}, bound {report.bound:.4f}")
    return report
