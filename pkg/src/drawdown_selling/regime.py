"""Mild versus severe anxiety.

The regime is read off ``g(x) = exp((1-rho) x) (1/(1-rho) - 1/Lambda(x))``:
mild when ``g`` is increasing everywhere, severe when it has an interior
local minimum ``u_bar >= 0``.  For the hyper-exponential class the sign of
``H*`` decides it without scanning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .levy_model import NumericError
from .scale_functions import OccupationKernel

MILD = "Mild"
SEVERE = "Severe"

X_MAX = 50.0
N_SCAN = 2000


def g_fn(ok: OccupationKernel, rho: float, x):
    om = 1.0 - rho
    x = np.asarray(x, dtype=float)
    out = np.exp(om * x) * (1.0 / om - 1.0 / ok.Lambda(x))
    return out if out.ndim else float(out)


def g_prime(ok: OccupationKernel, rho: float, x):
    om = 1.0 - rho
    x = np.asarray(x, dtype=float)
    lam = ok.Lambda(x)
    out = np.exp(om * x) * (om * (1.0 / om - 1.0 / lam) + ok.Lambda_prime(x) / lam**2)
    return out if out.ndim else float(out)


def g_limits_at_zero(ok: OccupationKernel, rho: float) -> tuple[float, float]:
    """One-sided limits ``(g(0-), g(0+))``; they coincide when sigma > 0."""
    om = 1.0 - rho
    left = 1.0 / om - 1.0 / ok.phi_rq
    right = 1.0 / om - ok.I(0.0) / ok.I(0.0, 1)
    return left, right


def h_star(ok: OccupationKernel, rho: float, sigma: float) -> float:
    return (ok.phi_rq - 1.0 + rho) * ok.phi_rq - 2.0 * ok.q / sigma**2


@dataclass(frozen=True)
class RegimeReport:
    h_star: float
    anxiety: str
    u_bar: float
    y_bar: float | None
    g_left_0: float
    g_right_0: float

    @property
    def severe(self) -> bool:
        return self.anxiety == SEVERE

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(self.u_bar):
            d["u_bar"] = "-inf"
        return d


def local_minima(ok: OccupationKernel, rho: float, x_max: float = X_MAX, n: int = N_SCAN) -> list[float]:
    """Interior local minima of ``g`` on ``(0, x_max]``, refined on ``g'``."""
    xs = np.linspace(x_max / n, x_max, n)
    d = g_prime(ok, rho, xs)
    out = []
    for i in np.nonzero((d[:-1] < 0) & (d[1:] >= 0))[0]:
        out.append(brentq(lambda u: g_prime(ok, rho, u), xs[i], xs[i + 1], xtol=1e-12))
    if not out:
        # a minimum sitting below the first grid node
        if d[0] > 0 and g_prime(ok, rho, 1e-12) < 0:
            out.append(brentq(lambda u: g_prime(ok, rho, u), 1e-12, xs[0], xtol=1e-12))
    return out


def classify(ok: OccupationKernel, rho: float, sigma: float, x_max: float = X_MAX) -> RegimeReport:
    hs = h_star(ok, rho, sigma)
    gl, gr = g_limits_at_zero(ok, rho)
    if hs >= 0:
        return RegimeReport(hs, MILD, -math.inf, None, gl, gr)
    mins = local_minima(ok, rho, x_max)
    if not mins:
        mins = local_minima(ok, rho, 2 * x_max, 2 * N_SCAN)
    if not mins:
        # H* < 0 means g'(0+) < 0; the minimum may sit right at the origin scale
        if g_prime(ok, rho, 0.0) >= 0:
            # H* is negative only by rounding; the minimum has merged into the origin
            mins = [0.0]
        else:
            res = minimize_scalar(lambda u: g_fn(ok, rho, u), bounds=(0.0, x_max), method="bounded",
                                  options={"xatol": 1e-12})
            if res.x >= x_max * 0.999:
                raise NumericError("H* < 0 but no interior local minimum of g was found")
            mins = [float(res.x)]
    u_bar = max(mins)
    om = 1.0 - rho
    y_bar = -math.log(om * g_fn(ok, rho, u_bar)) / om
    return RegimeReport(hs, SEVERE, u_bar, y_bar, gl, gr)
