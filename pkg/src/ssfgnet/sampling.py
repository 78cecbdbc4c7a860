"""Gamma and symmetric-Beta variate generation.

Beta(a, a) draws come from the ratio of two Gamma(a, 1) variates. Gamma
uses the Marsaglia-Tsang squeeze method: propose d*(1 + c*x)^3 from a
normal x, accept with the quartic squeeze or the exact log test, and for
shape < 1 boost a Gamma(a + 1) draw by u^(1/a). Everything is vectorized
so million-draw test suites stay fast.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError


def gamma_variates(alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` Gamma(alpha, 1) variates."""
    if not (alpha > 0) or not math.isfinite(alpha):
        raise ConfigError(f"gamma shape must be a finite positive number, got {alpha}")
    if size == 0:
        return np.empty(0)
    if alpha < 1.0:
        boosted = gamma_variates(alpha + 1.0, size, rng)
        return boosted * rng.random(size) ** (1.0 / alpha)

    d = alpha - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(size)
    filled = 0
    while filled < size:
        k = size - filled
        x = rng.standard_normal(k)
        u = rng.random(k)
        v = (1.0 + c * x) ** 3
        ok = v > 0
        x2 = x * x
        squeeze = u < 1.0 - 0.0331 * x2 * x2
        with np.errstate(divide="ignore", invalid="ignore"):
            exact = np.log(u) < 0.5 * x2 + d * (1.0 - v + np.log(v))
        sel = np.flatnonzero(ok & (squeeze | exact))
        take = min(sel.size, k)
        out[filled : filled + take] = d * v[sel[:take]]
        filled += take
    return out


def beta_variates(alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` Beta(alpha, alpha) variates via the Gamma ratio."""
    g1 = gamma_variates(alpha, size, rng)
    g2 = gamma_variates(alpha, size, rng)
    return g1 / (g1 + g2)


def beta_sample(alpha: float, rng: np.random.Generator) -> float:
    """One Beta(alpha, alpha) draw in [0, 1]."""
    return float(beta_variates(alpha, 1, rng)[0])
