"""Value function ``V(x, s; c)`` and the optimal sell/hold map.

A state is the pair ``(x, s)`` of log price and running maximum, ``x <= s``.
The plane splits into bands in ``s``; each band has its own closed form
built from ``v_lower``, the occupation kernel and ``Delta``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._io import write_csv
from .levy_model import LevyModel, Preferences
from .thresholds import MILD, SEVERE_HIGH, SEVERE_LOW, ThresholdSet, solve


class Action(str, enum.Enum):
    HOLD = "Hold"
    TAKE_PROFIT = "SellTakeProfit"
    STOP_LOSS = "SellStopLoss"
    TRAILING_STOP = "SellTrailingStop"


class Region(str, enum.Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    CONTINUATION = "Continuation"


@dataclass(frozen=True)
class StateLabel:
    action: Action
    active_region: Region
    theorem: str

    @property
    def sell(self) -> bool:
        return self.action is not Action.HOLD


class ValueSurface:
    """Evaluator of ``V`` over the state space, in the caller's units."""

    def __init__(self, ts: ThresholdSet):
        if ts.problem is None:
            raise ValueError("threshold set carries no solver state")
        if ts.theorem == SEVERE_LOW and ts.curve is None:
            raise ValueError("low-tolerance value needs the trailing curve")
        self.ts = ts
        self.p = p = ts.problem
        self.curve = ts.curve
        self.theorem = ts.theorem
        c = p.c
        self.zc = p.z_c()
        self.lam_c = float(p.kernel.Lambda(c))
        self.i_c = p.kernel.I(c)
        if p.severe:
            self.s_tilde = p.y_tilde + c
            self.s_hat = p.y_hat + c
        if self.theorem == SEVERE_LOW:
            sh = p.shift
            self.s_c = self.curve.s_c - sh
            self.d0 = p.diagonal_target
            self.v_sc = self._v_int(self.s_c, self.s_c)

    @classmethod
    def from_config(cls, model: LevyModel, prefs: Preferences) -> "ValueSurface":
        return cls(solve(model, prefs))

    # internal coordinates

    def _a_of_s(self, s: float) -> float:
        return self.curve(s + self.p.shift) - self.p.shift

    def _bands(self) -> list[float]:
        """Band edges in ``s`` (internal units)."""
        if self.theorem == MILD:
            return [self.zc]
        if self.theorem == SEVERE_HIGH:
            return [self.zc, self.s_tilde, self.s_hat]
        return [self.s_c, self.d0, self.s_hat]

    def _approach(self, x, s, target, v_target):
        p = self.p
        return math.exp(-self.lam_c * (target - s)) * p.kernel.I(x - s + p.c) / self.i_c * v_target

    def _v_int(self, x, s):
        """``V`` at internal ``(x, s)``; ``x`` may be an array for fixed ``s``."""
        p = self.p
        x = np.asarray(x, dtype=float)
        y = s - p.c
        if self.theorem == MILD:
            if s < self.zc:
                return self._approach(x, s, self.zc, p.U(self.zc))
            return p.v_bar_take_profit(x, y)
        if self.theorem == SEVERE_HIGH:
            if s < self.zc:
                return self._approach(x, s, self.zc, p.U(self.zc))
            if s < self.s_tilde:
                return p.v_bar_take_profit(x, y)
            if s < self.s_hat:
                return self._two_sided(x, y)
            return p.v_lower(x)
        if s < self.s_c:
            return self._approach(x, s, self.s_c, self.v_sc)
        if s < self.d0:
            a = self._a_of_s(s)
            pieces = p.delta_pieces(a, y)
            return p.v_lower(x) + np.where(x >= a, pieces(x), 0.0)
        if s < self.s_hat:
            return self._two_sided(x, y)
        return p.v_lower(x)

    def _two_sided(self, x, y):
        p = self.p
        a, b = p.a_b_star(y)
        inside = (x > a) & (x < b)
        return p.v_lower(x) + np.where(inside, p.delta_pieces(a, y)(x), 0.0)

    def _v_bar_int(self, x, y):
        p = self.p
        x = np.asarray(x, dtype=float)
        if not p.severe or y <= p.y_tilde:
            return p.v_bar_take_profit(x, y)
        if y < p.y_hat:
            return self._two_sided(x, y)
        return p.v_lower(x)

    def _label_int(self, x: float, s: float) -> StateLabel:
        p = self.p
        th = self.theorem
        hold = StateLabel(Action.HOLD, Region.CONTINUATION, th)
        if x < p.b_low:
            return hold
        y = s - p.c
        if th == MILD:
            if s >= self.zc and x >= p.z_star(y):
                return StateLabel(Action.TAKE_PROFIT, Region.S1, th)
            return hold
        if s >= self.s_hat:
            return StateLabel(Action.TAKE_PROFIT, Region.S3, th)
        if th == SEVERE_HIGH:
            if s < self.zc:
                return hold
            if s < self.s_tilde:
                return StateLabel(Action.TAKE_PROFIT, Region.S1, th) if x >= p.z_star(y) else hold
        else:
            if s < self.s_c:
                return hold
            if s < self.d0:
                return StateLabel(Action.TRAILING_STOP, Region.S1, th) if x <= self._a_of_s(s) else hold
        a, b = p.a_b_star(y)
        if x <= a:
            return StateLabel(Action.STOP_LOSS, Region.S2, th)
        if x >= b:
            return StateLabel(Action.TAKE_PROFIT, Region.S2, th)
        return hold

    # caller's units

    def _check(self, x, s):
        if np.any(np.asarray(x) > s + 1e-12):
            raise ValueError("states need x <= s")

    def value(self, x, s: float):
        self._check(x, s)
        sh = self.p.shift
        out = np.asarray(self._v_int(np.asarray(x, dtype=float) - sh, s - sh)) * self.p.scale
        return out if out.ndim else float(out)

    __call__ = value

    def v_bar(self, x, y: float):
        sh = self.p.shift
        out = np.asarray(self._v_bar_int(np.asarray(x, dtype=float) - sh, y - sh)) * self.p.scale
        return out if out.ndim else float(out)

    def v_lower(self, x):
        return v_lower_of(self.p, x)

    def utility(self, x):
        return self.p.prefs.utility(x)

    def classify_state(self, x: float, s: float) -> StateLabel:
        self._check(x, s)
        sh = self.p.shift
        return self._label_int(x - sh, s - sh)

    def band_edges(self) -> list[float]:
        return [e + self.p.shift for e in self._bands()]

    def region_grid(self, bounds, n: int):
        """Rows ``(x, s, value, label)`` over the window, restricted to ``x <= s``.

        ``bounds`` is ``(xmin, xmax, smin, smax)``; rows are ordered by ``s``
        then ``x``.
        """
        if n < 2:
            raise ValueError("need at least two points per axis")
        xmin, xmax, smin, smax = bounds
        xs = np.linspace(xmin, xmax, n)
        rows = []
        for s in np.linspace(smin, smax, n):
            xr = xs[xs <= s]
            if not len(xr):
                continue
            vals = np.atleast_1d(self.value(xr, s))
            for x, v in zip(xr, vals):
                rows.append((float(x), float(s), float(v), self.classify_state(x, s).action.value))
        return rows


def v_lower_of(p, x):
    sh = p.shift
    out = np.asarray(p.v_lower(np.asarray(x, dtype=float) - sh)) * p.scale
    return out if out.ndim else float(out)


def v_lower(prefs: Preferences, model: LevyModel, x):
    from .thresholds import Problem

    return v_lower_of(Problem(model, prefs), x)


def v_bar(model: LevyModel, prefs: Preferences, x, y: float):
    return ValueSurface.from_config(model, prefs).v_bar(x, y)


def value(model: LevyModel, prefs: Preferences, x, s: float):
    return ValueSurface.from_config(model, prefs).value(x, s)


def classify_state(surface: ValueSurface, x: float, s: float) -> StateLabel:
    return surface.classify_state(x, s)


def region_grid(surface: ValueSurface, bounds, n: int):
    return surface.region_grid(bounds, n)


def write_grid_csv(path, rows):
    return write_csv(path, ["x", "s", "value", "label"], rows)
