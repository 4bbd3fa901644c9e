"""
Boundary spectra

Spectrum of the boundary Laplacian Δ_∂ on the cross-section ∂B. This is the
frame every other module works in: all operators in scope are diagonal in
it, so an eigenspace E_j is just a mode index with a multiplicity.

Conventions:
- Δ_∂ is the negative Laplacian, 0 = λ_0 > λ_1 > ... (eigenvalues <= 0)
- Circle and sphere eigenvalues are exact sympy integers; custom spectra
  keep whatever exactness their input had (ints and "p/q" strings stay
  exact, floats stay floats)
"""

import logging
from dataclasses import dataclass
from enum import Enum
from math import comb
from typing import Optional

import sympy as sp

from .errors import NonMonotone, PositiveEigenvalue

logger = logging.getLogger(__name__)


class SpectrumSource(str, Enum):
    CIRCLE = "circle"
    SPHERE = "sphere"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Mode:
    label: str
    eigenvalue: sp.Expr
    multiplicity: int

    @property
    def is_exact(self) -> bool:
        return not self.eigenvalue.has(sp.Float)

    def to_dict(self):
        return {
            "label": self.label,
            "eigenvalue": float(self.eigenvalue),
            "multiplicity": self.multiplicity,
        }


@dataclass(frozen=True)
class BoundarySpectrum:
    modes: tuple
    dim_boundary: int
    source: SpectrumSource = SpectrumSource.CUSTOM
    sphere_dim: Optional[int] = None

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, index):
        return self.modes[index]

    @property
    def eigenvalues(self):
        return [m.eigenvalue for m in self.modes]

    @property
    def total_multiplicity(self) -> int:
        return sum(m.multiplicity for m in self.modes)

    def pairs(self):
        """(eigenvalue, multiplicity) list, the shape custom spectra are built from."""
        return [(m.eigenvalue, m.multiplicity) for m in self.modes]

    def to_dict(self):
        source = self.source.value
        if self.source == SpectrumSource.SPHERE:
            source = f"sphere({self.sphere_dim})"
        return {
            "dim_boundary": self.dim_boundary,
            "source": source,
            "modes": [m.to_dict() for m in self.modes],
        }


def to_exact(value) -> sp.Expr:
    """Numbers from documents: ints and "p/q" strings exact, floats as floats."""
    if isinstance(value, sp.Basic):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a number")
    if isinstance(value, int):
        return sp.Integer(value)
    if isinstance(value, str):
        return sp.Rational(value.strip())
    if isinstance(value, float):
        if value.is_integer():
            return sp.Integer(int(value))
        return sp.Float(value)
    if isinstance(value, complex):
        return sp.Float(value.real) + sp.I * sp.Float(value.imag)
    return sp.sympify(value)


def circle_spectrum(max_modes: int) -> BoundarySpectrum:
    """Spectrum {−k²} of the unit circle, k = 0..max_modes−1."""
    if max_modes < 1:
        raise ValueError("max_modes must be >= 1")
    modes = tuple(
        Mode(label=f"k={k}", eigenvalue=sp.Integer(-k * k), multiplicity=1 if k == 0 else 2)
        for k in range(max_modes)
    )
    return BoundarySpectrum(modes=modes, dim_boundary=1, source=SpectrumSource.CIRCLE)


def harmonic_dimension(d: int, degree: int) -> int:
    """Dimension of the degree-l spherical harmonics on S^d."""
    if degree < 0:
        return 0
    lower = comb(degree + d - 2, d) if degree >= 2 else 0
    return comb(degree + d, d) - lower


def sphere_spectrum(d: int, max_modes: int) -> BoundarySpectrum:
    if d < 2:
        raise ValueError("sphere dimension must be >= 2 (use circle_spectrum for d = 1)")
    if max_modes < 1:
        raise ValueError("max_modes must be >= 1")
    modes = tuple(
        Mode(
            label=f"l={l}",
            eigenvalue=sp.Integer(-l * (l + d - 1)),
            multiplicity=harmonic_dimension(d, l),
        )
        for l in range(max_modes)
    )
    return BoundarySpectrum(modes=modes, dim_boundary=d, source=SpectrumSource.SPHERE, sphere_dim=d)


def custom_spectrum(entries, dim_boundary: int, labels=None) -> BoundarySpectrum:
    """Wrap an explicit [(eigenvalue, multiplicity), ...] list, validating it."""
    if dim_boundary < 0:
        raise ValueError("dim_boundary must be >= 0")
    if not entries:
        raise ValueError("a spectrum needs at least one mode")

    modes = []
    previous = None
    for index, (value, multiplicity) in enumerate(entries):
        eigenvalue = to_exact(value)
        if not eigenvalue.is_real:
            raise ValueError(f"eigenvalue {value!r} is not real")
        if eigenvalue > 0:
            raise PositiveEigenvalue(f"eigenvalue {value} of mode {index} is positive")
        if previous is not None and not eigenvalue < previous:
            raise NonMonotone(
                f"eigenvalues must be strictly decreasing: {previous} then {eigenvalue} at mode {index}"
            )
        if int(multiplicity) < 1:
            raise ValueError(f"multiplicity of mode {index} must be positive")
        label = labels[index] if labels else f"j={index}"
        modes.append(Mode(label=label, eigenvalue=eigenvalue, multiplicity=int(multiplicity)))
        previous = eigenvalue

    if modes[0].eigenvalue != 0:
        logger.info("custom spectrum does not start at 0 (disconnected or shifted cross-section)")
    return BoundarySpectrum(modes=tuple(modes), dim_boundary=dim_boundary, source=SpectrumSource.CUSTOM)


def point_spectrum() -> BoundarySpectrum:
    """The zero-dimensional cross-section (dim B = 1): one mode, eigenvalue 0."""
    return custom_spectrum([(0, 1)], dim_boundary=0, labels=["point"])


def preset_spectrum(n: int, max_modes: int) -> BoundarySpectrum:
    """Point for n=0, circle for n=1, S^n otherwise."""
    if n == 0:
        return point_spectrum()
    if n == 1:
        return circle_spectrum(max_modes)
    return sphere_spectrum(n, max_modes)


def spectrum_from_document(data: dict) -> BoundarySpectrum:
    """Build a spectrum from already validated {"dim_boundary", "modes"} data."""
    return custom_spectrum([tuple(pair) for pair in data["modes"]], dim_boundary=data["dim_boundary"])
