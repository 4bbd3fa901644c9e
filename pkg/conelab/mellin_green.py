"""
Mellin transform and finite-rank Green operators

    (Mu)(z) = ∫_0^∞ t^{z−1} u(t) dt = ∫ e^{zs} u(e^s) ds,   M(t^σ u)(z) = (Mu)(z + σ)

For a mode-meromorphic symbol g and weights γ1 < γ2 the difference of the
Mellin quantizations on the lines Re z = (n+1)/2 − γ is, by the residue
theorem, the finite-rank operator

    (Gu)(t) = ω(t) Σ_p Σ_l ζ_pl(u) t^{−p} log^l t,
    ζ_pl(u) = Σ_{k=l}^{n_p} (−1)^l / (l!(k−l)!) · R_pk · ∂^{k−l}(Mu)(p)

summed over the poles between the lines. green_action_contour_oracle
evaluates the same operator as a contour integral (counterclockwise, with
the (2πi)^{-1} normalisation) to cross-check the residue bookkeeping.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from math import factorial
from typing import Optional

import numpy as np
from scipy import integrate

from .conormal import ROOT_CLUSTER_TOL, ModeMeromorphic
from .cutoff import CUTOFF_END, CUTOFF_START, as_pair, omega
from .errors import PoleOnLine, QuadratureFailure

logger = logging.getLogger(__name__)

CONTOUR_NODES = 2048
GAUSS_NODES = 400
QUAD_TOL = 1e-11


class RadialKind(str, Enum):
    SAMPLED = "sampled"
    INDICATOR = "indicator"         # t^a · 1_[t0, t1]
    BUMP = "bump"                   # t^a · exp(−1/(1−x²)), x = (log t − centre)/width
    CUTOFF_POWER = "cutoff-power"   # t^a · ω(t) · log^k t


@dataclass(frozen=True)
class RadialFunction:
    kind: RadialKind
    mode: int = 0
    power: complex = 0.0
    scale: complex = 1.0
    lower: float = 1.0
    upper: float = float(np.e)
    centre: float = 0.0
    width: float = 1.0
    log_power: int = 0
    t_grid: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind == RadialKind.SAMPLED:
            grid = np.asarray(self.t_grid, dtype=float)
            if grid.size < 3 or grid.size != len(self.values):
                raise ValueError("sampled radial functions need matching t_grid and values (>= 3 points)")
            if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
                raise ValueError("t_grid must be positive and strictly increasing")
        if self.kind == RadialKind.INDICATOR and not 0 < self.lower < self.upper:
            raise ValueError("indicator needs 0 < lower < upper")
        if self.kind == RadialKind.BUMP and self.width <= 0:
            raise ValueError("bump width must be positive")

    @property
    def is_exact(self) -> bool:
        return self.kind != RadialKind.SAMPLED

    def support(self) -> tuple:
        """Support in s = log t; the lower end is −∞ for cut-off powers."""
        if self.kind == RadialKind.SAMPLED:
            return float(np.log(self.t_grid[0])), float(np.log(self.t_grid[-1]))
        if self.kind == RadialKind.INDICATOR:
            return float(np.log(self.lower)), float(np.log(self.upper))
        if self.kind == RadialKind.BUMP:
            return self.centre - self.width, self.centre + self.width
        return -np.inf, float(np.log(CUTOFF_END))

    def base_in_s(self, s):
        """u(e^s) / (scale · e^{power·s})."""
        s = np.asarray(s, dtype=float)
        if self.kind == RadialKind.SAMPLED:
            grid = np.log(np.asarray(self.t_grid, dtype=float))
            vals = np.asarray(self.values, dtype=complex)
            inside = (s >= grid[0]) & (s <= grid[-1])
            out = np.interp(s, grid, vals.real) + 1j * np.interp(s, grid, vals.imag)
            return np.where(inside, out, 0.0)
        if self.kind == RadialKind.INDICATOR:
            lo, hi = self.support()
            return np.where((s >= lo) & (s <= hi), 1.0, 0.0).astype(complex)
        if self.kind == RadialKind.BUMP:
            x = (s - self.centre) / self.width
            out = np.zeros_like(s, dtype=complex)
            inside = np.abs(x) < 1
            out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
            return out
        return (omega(np.exp(s)) * s ** self.log_power).astype(complex)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        s = np.log(t)
        if self.kind == RadialKind.SAMPLED:
            return self.scale * self.base_in_s(s)
        return self.scale * t ** self.power * self.base_in_s(s)

    def scaled(self, factor) -> "RadialFunction":
        return replace(self, scale=self.scale * factor)

    def times_power(self, sigma) -> "RadialFunction":
        """t^σ u."""
        if self.kind == RadialKind.SAMPLED:
            grid = np.asarray(self.t_grid, dtype=float)
            values = tuple(np.asarray(self.values, dtype=complex) * grid ** sigma)
            return replace(self, values=values)
        return replace(self, power=self.power + sigma)

    def to_dict(self):
        data = {"kind": self.kind.value, "mode": self.mode, "power": as_pair(self.power), "scale": as_pair(self.scale)}
        if self.kind == RadialKind.INDICATOR:
            data.update(lower=self.lower, upper=self.upper)
        elif self.kind == RadialKind.BUMP:
            data.update(centre=self.centre, width=self.width)
        elif self.kind == RadialKind.CUTOFF_POWER:
            data.update(log_power=self.log_power)
        else:
            data.update(samples=len(self.t_grid))
        return data


def indicator(lower: float, upper: float, power=0.0, mode: int = 0) -> RadialFunction:
    return RadialFunction(kind=RadialKind.INDICATOR, lower=lower, upper=upper, power=power, mode=mode)


def bump(centre: float = float(np.log(0.5)), width: float = 0.5, power=0.0, mode: int = 0) -> RadialFunction:
    return RadialFunction(kind=RadialKind.BUMP, centre=centre, width=width, power=power, mode=mode)


def cutoff_power(power=0.0, log_power: int = 0, mode: int = 0) -> RadialFunction:
    return RadialFunction(kind=RadialKind.CUTOFF_POWER, power=power, log_power=log_power, mode=mode)


def sampled(t_grid, values, mode: int = 0) -> RadialFunction:
    return RadialFunction(
        kind=RadialKind.SAMPLED, t_grid=tuple(float(x) for x in t_grid),
        values=tuple(complex(v) for v in values), mode=mode,
    )


def exact_mellin(u: RadialFunction, z: complex) -> complex:
    """Closed-form transform of an indicator power: (t1^{w} − t0^{w})/w, w = z + a."""
    if u.kind != RadialKind.INDICATOR:
        raise ValueError("closed-form transform is available for indicator functions only")
    w = complex(z) + complex(u.power)
    if abs(w) < 1e-14:
        return u.scale * np.log(u.upper / u.lower)
    return complex(u.scale * (u.upper ** w - u.lower ** w) / w)


def _left_tail(w: complex, s0: float, k: int) -> complex:
    """∫_{−∞}^{s0} s^k e^{ws} ds for Re w > 0."""
    total = 0j
    for i in range(k + 1):
        total += (-1) ** i * factorial(k) / factorial(k - i) * s0 ** (k - i) / w ** (i + 1)
    return complex(np.exp(w * s0) * total)


def _quad(fn, a, b) -> complex:
    re, err_re = integrate.quad(lambda s: fn(s).real, a, b, limit=200, epsabs=1e-14, epsrel=QUAD_TOL)
    im, err_im = integrate.quad(lambda s: fn(s).imag, a, b, limit=200, epsabs=1e-14, epsrel=QUAD_TOL)
    value = complex(re, im)
    if not np.isfinite(value) or max(err_re, err_im) > 1e-8 * max(1.0, abs(value)):
        raise QuadratureFailure(f"Mellin quadrature did not converge on [{a:g}, {b:g}]")
    return value


def mellin_transform(u: RadialFunction, z, derivative: int = 0) -> complex:
    """∂_z^k (Mu)(z), differentiating the kernel: ∫ s^k e^{zs} u(e^s) ds."""
    z = complex(z)
    k = derivative
    if u.kind == RadialKind.SAMPLED:
        s = np.log(np.asarray(u.t_grid, dtype=float))
        integrand = s ** k * np.exp(z * s) * np.asarray(u.values, dtype=complex)
        return complex(u.scale * integrate.simpson(integrand, x=s))

    w = z + complex(u.power)
    lo, hi = u.support()
    if u.kind == RadialKind.CUTOFF_POWER:
        if w.real <= 0:
            raise QuadratureFailure(f"Mellin integral of t^{u.power}ω diverges at Re z = {z.real:g}")
        s0 = float(np.log(CUTOFF_START))
        tail = _left_tail(w, s0, k + u.log_power)
        body = _quad(lambda s: s ** k * np.exp(w * s) * u.base_in_s(np.array([s]))[0], s0, hi)
        return complex(u.scale * (tail + body))
    return complex(u.scale * _quad(lambda s: s ** k * np.exp(w * s) * u.base_in_s(np.array([s]))[0], lo, hi))


def mellin_many(u: RadialFunction, zs, derivative: int = 0, nodes: int = GAUSS_NODES) -> np.ndarray:
    """Vectorised transform on a fixed Gauss–Legendre rule in s (for contour sums)."""
    zs = np.asarray(zs, dtype=complex)
    k = derivative
    if u.kind == RadialKind.SAMPLED:
        s = np.log(np.asarray(u.t_grid, dtype=float))
        vals = np.asarray(u.values, dtype=complex)
        kernel = np.exp(np.outer(zs, s)) * s ** k * vals
        return u.scale * integrate.simpson(kernel, x=s, axis=1)

    x, wts = np.polynomial.legendre.leggauss(nodes)
    lo, hi = u.support()
    ws = zs + complex(u.power)
    tail = np.zeros_like(zs)
    if u.kind == RadialKind.CUTOFF_POWER:
        lo = float(np.log(CUTOFF_START))
        if np.any(ws.real <= 0):
            raise QuadratureFailure("Mellin integral of a cut-off power diverges on part of the contour")
        tail = np.array([_left_tail(w, lo, k + u.log_power) for w in ws])
    s = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    base = u.base_in_s(s) * s ** k * wts * 0.5 * (hi - lo)
    return u.scale * (np.exp(np.outer(ws, s)) @ base + tail)


# ---------------------------------------------------------------------------
# Green operators
# ---------------------------------------------------------------------------

def weight_line(n: int, gamma: float) -> float:
    return (n + 1) / 2 - gamma


@dataclass(frozen=True)
class GreenGenerator:
    mode: int
    p: complex
    log_power: int
    zeta: complex

    def to_dict(self):
        return {"mode": self.mode, "p": as_pair(self.p), "log_power": self.log_power, "zeta": as_pair(self.zeta)}


@dataclass(frozen=True)
class GreenAction:
    n: int
    gamma1: float
    gamma2: float
    generators: tuple = ()

    @property
    def lines(self) -> tuple:
        return weight_line(self.n, self.gamma1), weight_line(self.n, self.gamma2)

    @property
    def rank(self) -> int:
        return len(self.generators)

    def evaluate(self, t, mode: Optional[int] = None):
        """(Gu)(t) on one mode (default: the first mode carrying a generator)."""
        t = np.asarray(t, dtype=float)
        if mode is None and self.generators:
            mode = self.generators[0].mode
        total = np.zeros_like(t, dtype=complex)
        for gen in self.generators:
            if gen.mode != mode:
                continue
            total = total + gen.zeta * t ** (-gen.p) * np.log(t) ** gen.log_power
        return omega(t) * total

    def to_dict(self):
        return {
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "lines": list(self.lines),
            "rank": self.rank,
            "generators": [g.to_dict() for g in self.generators],
        }


def _strip_poles(g: ModeMeromorphic, n: int, gamma1: float, gamma2: float) -> list:
    right, left = weight_line(n, gamma1), weight_line(n, gamma2)
    selected = []
    for pole in g.poles:
        re = pole.value.real
        for line in (left, right):
            if abs(re - line) <= ROOT_CLUSTER_TOL:
                raise PoleOnLine(f"pole {pole.value} of mode {g.mode} lies on the weight line Re z = {line:g}")
        if left < re < right:
            selected.append(pole)
    return selected


def _check_weights(gamma1, gamma2):
    if not gamma1 < gamma2:
        raise ValueError(f"weights must satisfy γ1 < γ2, got {gamma1} and {gamma2}")


def _inputs_by_mode(u) -> dict:
    items = [u] if isinstance(u, RadialFunction) else list(u)
    by_mode = {}
    for item in items:
        if item.mode in by_mode:
            raise ValueError(f"two input functions on mode {item.mode}")
        by_mode[item.mode] = item
    return by_mode


def green_action(g, n: int, gamma1: float, gamma2: float, u) -> GreenAction:
    """Residue form of ω(op_M^{γ1−n/2}(g) − op_M^{γ2−n/2}(g)) u.

    ``g`` is a list of ModeMeromorphic (one per mode), ``u`` a RadialFunction
    or a list of them on distinct modes. Modes without input still list their
    generators with ζ = 0.
    """
    _check_weights(gamma1, gamma2)
    inputs = _inputs_by_mode(u)
    generators = []
    for g_mode in g:
        u_mode = inputs.get(g_mode.mode)
        for pole in _strip_poles(g_mode, n, gamma1, gamma2):
            p = pole.value
            jets = [0j] * pole.order
            if u_mode is not None:
                jets = [mellin_transform(u_mode, p, r) for r in range(pole.order)]
            for l in range(pole.order):
                zeta = 0j
                for k in range(l, pole.order):
                    zeta += (-1) ** l / (factorial(l) * factorial(k - l)) * complex(pole.principal[k]) * jets[k - l]
                generators.append(GreenGenerator(mode=g_mode.mode, p=p, log_power=l, zeta=zeta))
    logger.debug(f"green action γ1={gamma1} γ2={gamma2}: rank {len(generators)}")
    return GreenAction(n=n, gamma1=gamma1, gamma2=gamma2, generators=tuple(generators))


def _ellipse(n: int, gamma1: float, gamma2: float, poles: list, nodes: int):
    right, left = weight_line(n, gamma1), weight_line(n, gamma2)
    centre = 0.5 * (left + right)
    a = 0.5 * (right - left)
    b = 1.0
    for pole in poles:
        x = (pole.value.real - centre) / a
        room = np.sqrt(max(1.0 - x * x, 1e-12))
        b = max(b, 1.5 * abs(pole.value.imag) / room)
    theta = 2 * np.pi * np.arange(nodes) / nodes
    zs = centre + a * np.cos(theta) + 1j * b * np.sin(theta)
    dz = (-a * np.sin(theta) + 1j * b * np.cos(theta)) * (2 * np.pi / nodes)
    return zs, dz


def green_action_contour_oracle(g, n: int, gamma1: float, gamma2: float, u, t_samples,
                                nodes: int = CONTOUR_NODES) -> dict:
    """ω(t)(2πi)^{-1} ∮ t^{−z} g(z)(Mu)(z) dz around the strip poles, per input mode."""
    _check_weights(gamma1, gamma2)
    if nodes < CONTOUR_NODES:
        raise ValueError(f"the contour oracle uses at least {CONTOUR_NODES} nodes")
    inputs = _inputs_by_mode(u)
    t = np.asarray(t_samples, dtype=float)
    results = {}
    for g_mode in g:
        u_mode = inputs.get(g_mode.mode)
        if u_mode is None:
            continue
        poles = _strip_poles(g_mode, n, gamma1, gamma2)
        zs, dz = _ellipse(n, gamma1, gamma2, poles, nodes)
        weights = g_mode(zs) * mellin_many(u_mode, zs) * dz
        kernel = np.exp(-np.outer(np.log(t), zs))
        values = kernel @ weights / (2j * np.pi)
        if not np.all(np.isfinite(values)):
            raise QuadratureFailure(f"contour sum is not finite on mode {g_mode.mode}")
        results[g_mode.mode] = omega(t) * values
    return results


def green_split(g, n: int, gamma1: float, gamma: float, gamma2: float, u) -> tuple:
    """(G_1, G_2) with G_1 between γ1 and γ, G_2 between γ and γ2; G = G_1 + G_2."""
    if not gamma1 < gamma < gamma2:
        raise ValueError(f"need γ1 < γ < γ2, got {gamma1}, {gamma}, {gamma2}")
    return green_action(g, n, gamma1, gamma, u), green_action(g, n, gamma, gamma2, u)


def shift_identity_defect(g, n: int, gamma1: float, gamma2: float, u: RadialFunction, sigma: float,
                          t_samples) -> float:
    """Max relative gap between G_g(t^σ u) and t^σ G_{T^{−σ}g}^{γ1−σ,γ2−σ}(u)."""
    t = np.asarray(t_samples, dtype=float)
    left = green_action(g, n, gamma1, gamma2, u.times_power(sigma)).evaluate(t, mode=u.mode)
    shifted = [m.shifted(-sigma) for m in g]
    right = t ** sigma * green_action(shifted, n, gamma1 - sigma, gamma2 - sigma, u).evaluate(t, mode=u.mode)
    scale = max(1.0, float(np.max(np.abs(left))))
    return float(np.max(np.abs(left - right)) / scale)
