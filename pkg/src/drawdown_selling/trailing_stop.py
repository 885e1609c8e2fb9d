"""Trailing-stop floor ``a(s)`` for severely anxious, low-tolerance investors.

Between ``s_c`` and ``b*(y_c)`` the stop-loss level moves with the running
maximum.  It solves a first-order ODE in ``s`` with terminal value
``a(b*(y_c)) = a*(y_c)``; we integrate it backwards until the floor reaches
``b_low``, which pins ``s_c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from ._io import write_csv
from .levy_model import LevyModel, NumericError, Preferences
from .thresholds import SEVERE_LOW, Problem

MAX_STEP = 1e-3


def f_jump(model: LevyModel, prefs: Preferences, x):
    """Jump-overshoot term ``f`` (caller's units, value scaled by ``K``)."""
    p = Problem(model, prefs)
    return p.f_jump(np.asarray(x, dtype=float) - p.shift) * p.scale


def ode_denominator(p: Problem, a: float) -> float:
    return (p.r + p.q - p.psi_om) * np.exp(p.om * a) - (p.r + p.q) - p.om * p.f_jump(a)


def make_rhs(p: Problem):
    wc = p.sf_r(p.c)

    @lru_cache(maxsize=65536)
    def slope(s: float, a: float) -> float:
        y = s - p.c
        pieces = p.delta_pieces(a, y)
        den = ode_denominator(p, a)
        if den < 1e-12:
            raise NumericError(f"trailing-stop ODE denominator vanished at a={a}")
        num = p.q * wc * p.om * (p.v_lower(y) + pieces.above(y))
        return num / (den * pieces.kernel(s))

    def rhs(s, av):
        return [slope(round(float(s), 12), round(float(av[0]), 12))]

    rhs.slope = slope
    return rhs


@dataclass
class TrailingCurve:
    """``a(s)`` on ``[s_c, b*(y_c)]`` in the caller's units.

    ``s_grid`` runs downward from ``b*(y_c)`` to ``s_c``; evaluation uses a
    cubic Hermite interpolant through the accepted steps and their slopes.
    """

    s_grid: np.ndarray
    a_values: np.ndarray
    slopes: np.ndarray
    s_c: float
    nfev: int = 0
    _spline: CubicHermiteSpline = field(init=False, repr=False)

    def __post_init__(self):
        order = np.argsort(self.s_grid)
        self._spline = CubicHermiteSpline(self.s_grid[order], self.a_values[order], self.slopes[order])

    @property
    def s_top(self) -> float:
        return float(self.s_grid[0])

    def __call__(self, s, nu: int = 0):
        s = np.asarray(s, dtype=float)
        if np.any((s < self.s_c - 1e-12) | (s > self.s_top + 1e-12)):
            raise ValueError("trailing floor is defined on [s_c, b*(y_c)] only")
        out = self._spline(np.clip(s, self.s_c, self.s_top), nu)
        return out if out.ndim else float(out)

    def to_csv(self, path):
        return write_csv(path, ["s", "a"], zip(self.s_grid, self.a_values))


def integrate_ode(p: Problem, rtol: float = 1e-10, atol: float = 1e-12, max_step: float = MAX_STEP) -> TrailingCurve:
    """Integrate the floor backwards from ``b*(y_c)`` and locate ``s_c``."""
    if p.theorem != SEVERE_LOW:
        raise ValueError("the trailing stop only exists for severe anxiety with c < c_tilde")
    a0, s0 = p.a_b_star(p.y_c)
    rhs = make_rhs(p)
    hit = lambda s, av: av[0] - p.b_low
    hit.terminal, hit.direction = True, -1
    s_end = p.b_low + p.c
    sol = solve_ivp(rhs, (s0, s_end), [a0], method="RK45", rtol=rtol, atol=atol, max_step=max_step,
                    events=hit, dense_output=True)
    if sol.status == -1:
        raise NumericError(f"trailing-stop integration failed: {sol.message}")
    if not len(sol.t_events[0]):
        raise NumericError("trailing floor never reached b_low above b_low + c")
    s_c = float(sol.t_events[0][0])
    s = np.append(sol.t[sol.t > s_c], s_c)
    a = np.append(sol.y[0][sol.t > s_c], p.b_low)
    slopes = np.array([rhs(si, [ai])[0] for si, ai in zip(s, a)])
    sh = p.shift
    return TrailingCurve(s + sh, a + sh, slopes, s_c + sh, nfev=sol.nfev)
