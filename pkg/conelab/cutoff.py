"""The reference cut-off function ω and helpers for number output.

ω(t) = 1 for t <= 1/4, 0 for t >= 3/4, with the C∞ exponential smooth step
in between. All quadratures in the toolkit use this ω.
"""

import math

import numpy as np
import sympy as sp

CUTOFF_START = 0.25
CUTOFF_END = 0.75

_x = sp.Symbol('x', real=True)
_t = sp.Symbol('t', positive=True)

# smooth step s(x) = e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)}) on 0 < x < 1
_STEP = sp.exp(-1 / _x) / (sp.exp(-1 / _x) + sp.exp(-1 / (1 - _x)))
_OMEGA_INNER = 1 - _STEP.subs(_x, (_t - CUTOFF_START) / (CUTOFF_END - CUTOFF_START))

_derivative_cache = {}


def _inner_derivative(order: int):
    if order not in _derivative_cache:
        expr = sp.diff(_OMEGA_INNER, _t, order) if order else _OMEGA_INNER
        _derivative_cache[order] = sp.lambdify(_t, expr, 'numpy')
    return _derivative_cache[order]


def omega(t, order: int = 0):
    """ω or its ``order``-th derivative, vectorised over ``t``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    if order == 0:
        out[t <= CUTOFF_START] = 1.0
    inside = (t > CUTOFF_START) & (t < CUTOFF_END)
    if np.any(inside):
        out[inside] = _inner_derivative(order)(t[inside])
    return out


def as_pair(value, digits: int = 12) -> list:
    """Complex (or real, or sympy) number as a rounded ``[re, im]`` pair."""
    z = complex(value)
    re = round(z.real, digits)
    im = round(z.imag, digits)
    # avoid "-0.0" in documents
    return [re + 0.0, im + 0.0]


def as_real(value, digits: int = 12):
    x = float(value)
    if math.isnan(x) or math.isinf(x):
        return None
    return round(x, digits) + 0.0
