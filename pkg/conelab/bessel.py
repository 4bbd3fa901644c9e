"""Bessel functions of the first kind by power series, and their zeros.

Oracle for the disk spectrum: the Dirichlet eigenvalues of −Δ on the unit
disk are j_{k,m}², the squared positive zeros of J_k.
"""

import logging
from functools import lru_cache

import numpy as np
from scipy import optimize, special

logger = logging.getLogger(__name__)

SERIES_TERMS = 80
SCAN_STEP = 0.05
SCAN_LIMIT = 60.0


def bessel_j(nu: float, x: float) -> float:
    """J_ν(x) = Σ_k (−1)^k (x/2)^{2k+ν} / (k! Γ(k+ν+1))."""
    if x == 0:
        return 1.0 if nu == 0 else 0.0
    half = x / 2.0
    total = 0.0
    for k in range(SERIES_TERMS):
        log_term = (2 * k + nu) * np.log(half) - special.gammaln(k + 1) - special.gammaln(k + nu + 1)
        term = np.exp(log_term)
        total += -term if k % 2 else term
        if term < 1e-17 * max(1.0, abs(total)) and k > half:
            break
    return float(total)


@lru_cache(maxsize=None)
def bessel_zero(nu: float, k: int) -> float:
    """k-th positive zero of J_ν (k >= 1), bracketed on a scan and bisected."""
    if k < 1:
        raise ValueError("zero index k must be >= 1")
    found = 0
    x = SCAN_STEP
    previous = bessel_j(nu, x)
    while x < SCAN_LIMIT:
        nxt = x + SCAN_STEP
        value = bessel_j(nu, nxt)
        if previous * value < 0:
            found += 1
            if found == k:
                return float(optimize.bisect(lambda y: bessel_j(nu, y), x, nxt, xtol=1e-13))
        x, previous = nxt, value
    raise ValueError(f"zero {k} of J_{nu} lies beyond the scan range {SCAN_LIMIT}")


def disk_eigenvalue(mode: int, k: int = 1) -> float:
    """k-th Dirichlet eigenvalue of −Δ on the unit disk on Fourier mode ``mode``."""
    return bessel_zero(float(abs(mode)), k) ** 2


def cone_eigenvalue(n: int, boundary_eigenvalue: float, k: int = 1) -> float:
    """Friedrichs–Dirichlet eigenvalue j_{ν,k}² on the truncated cone, ν = √(((n−1)/2)² − λ_j)."""
    nu = float(np.sqrt(((n - 1) / 2) ** 2 - boundary_eigenvalue))
    return bessel_zero(nu, k) ** 2
