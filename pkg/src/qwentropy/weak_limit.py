"""Weak-limit asymptotics of the mixed-coin Hadamard walk.

For large ``w`` the position distribution of the Hadamard walk started at the
origin with a completely mixed coin approaches the density

    p(x, w) = 1 / (pi w sqrt(1 - 2 x^2 / w^2) (1 - x^2 / w^2)),   |x| < w / sqrt(2).

Its differential entropy is ``C + log2(w)`` for a constant ``C`` computed once
by quadrature.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import ConvergenceError

QUAD_TOL = 1e-8


def density(x, w: float):
    """Weak-limit density per unit position; ``|x|`` must be below ``w / sqrt(2)``."""
    x = np.asarray(x, dtype=float)
    u = (x / w) ** 2
    if np.any(2.0 * u >= 1.0):
        raise ValueError("x outside the open support (-w/sqrt(2), w/sqrt(2))")
    out = 1.0 / (math.pi * w * np.sqrt(1.0 - 2.0 * u) * (1.0 - u))
    return float(out) if out.ndim == 0 else out


def _quad(f, a, b, **kw):
    value, abserr, info = integrate.quad(f, a, b, epsabs=QUAD_TOL * 1e-2, epsrel=1e-12, limit=200, full_output=True, **kw)[:3]
    if abserr > QUAD_TOL:
        raise ConvergenceError("quadrature did not reach tolerance", residual=abserr, evaluations=info["neval"])
    return value, abserr


def normalization(w: float) -> float:
    """Integral of :func:`density` over its support, after ``x = (w/sqrt 2) sin t``."""
    # p dx = dt / (sqrt(2) pi (1 - sin^2 t / 2)): the endpoint singularity cancels
    value, _ = _quad(lambda t: 1.0 / (math.sqrt(2.0) * math.pi * (1.0 - 0.5 * math.sin(t) ** 2)), -math.pi / 2, math.pi / 2)
    return value


def entropy_integral(w: float) -> float:
    """Differential entropy ``-int p log2 p dx`` of the weak-limit density, in bits.

    With ``x = (w / sqrt 2) sin t`` the measure ``p dx`` is smooth in ``t`` and
    only ``log2 p`` keeps an integrable ``log cos t`` at the endpoints, which
    the adaptive rule resolves to the requested tolerance.
    """
    if w <= 0:
        raise ValueError("w must be positive")
    log2_pw = math.log2(math.pi * w)

    def integrand(t):
        s2 = math.sin(t) ** 2
        c = math.cos(t)
        weight = 1.0 / (math.sqrt(2.0) * math.pi * (1.0 - 0.5 * s2))
        if c <= 0.0:
            return 0.0
        return weight * (log2_pw + math.log2(c) + math.log2(1.0 - 0.5 * s2))

    value, _ = _quad(integrand, -math.pi / 2, math.pi / 2)
    return value


@lru_cache(maxsize=1)
def weak_limit_constant() -> float:
    """``entropy_integral(1)``, the offset ``C`` in ``C + log2 w``."""
    return entropy_integral(1.0)


def closed_form(w: float) -> float:
    """``C + log2 w``."""
    if w < 1:
        raise ValueError("w must be >= 1")
    return weak_limit_constant() + math.log2(w)
