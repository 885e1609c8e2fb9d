"""Free boundaries of the drawdown-discounted selling problem.

All solves run in the shifted log price ``x - log K`` with unit transaction
cost (for ``rho = 0`` we have ``K U(exp(x - log K)) = exp(x) - K``).  The
:class:`Problem` methods speak internal coordinates; :class:`ThresholdSet`
and the module-level helpers convert back to the caller's units.

The function ``Delta(., a; y)`` is the excess of the one-sided value over
``v_lower`` for a stop-loss/take-profit pair.  Because every ingredient is an
exponential sum, it is assembled in closed form: on ``[a, y)`` and on
``[y, inf)`` it is again a finite exponential sum in ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq, minimize_scalar

from .levy_model import LevyModel, ModelError, NumericError, Preferences, crra, validate
from .regime import RegimeReport, classify, g_fn
from .scale_functions import ExpSum, OccupationKernel, ScaleFn, w_two_rate, w_two_rate_expsum

MILD = "Mild"
SEVERE_HIGH = "SevereHighTol"
SEVERE_LOW = "SevereLowTol"

QUAD_OPTS = dict(epsabs=1e-10, epsrel=1e-9, limit=200)


def _expint(alpha, lo, hi):
    """``int_lo^hi exp(alpha w) dw`` elementwise, safe at ``alpha = 0``."""
    alpha = np.asarray(alpha, dtype=complex)
    small = np.abs(alpha) < 1e-12
    safe = np.where(small, 1.0, alpha)
    return np.where(small, hi - lo, (np.exp(alpha * hi) - np.exp(alpha * lo)) / safe)


@dataclass(frozen=True)
class DeltaPieces:
    """``Delta(., a; y)`` as ``below`` on ``[a, y)`` and ``above`` on ``[y, inf)``."""

    a: float
    y: float
    below: ExpSum
    above: ExpSum
    kernel: ExpSum  # x -> W^(r,q)(x, a; y) on x >= y

    def __call__(self, x, k: int = 0):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= self.y, self.above(x, k), np.where(x > self.a, self.below(x, k), 0.0))
        return out if out.ndim else float(out)


class Problem:
    """Model plus preferences, with every threshold solver in internal units."""

    def __init__(self, model: LevyModel, prefs: Preferences):
        validate(model, prefs).raise_if_invalid()
        self.model = model
        self.prefs = prefs
        self.shift = prefs.log_k
        self.scale = prefs.K
        self.r, self.q, self.c, self.rho = prefs.r, prefs.q, prefs.c, prefs.rho
        self.om = 1.0 - prefs.rho
        self.sf_r = ScaleFn(model, self.r)
        self.sf_rq = ScaleFn(model, self.r + self.q)
        self.kernel = OccupationKernel(model, self.r, self.q, self.sf_r)
        self.phi_rq = self.kernel.phi_rq
        self.b_low = math.log(self.phi_rq / (self.phi_rq - self.om)) / self.om
        self.u_b = self.U(self.b_low)
        self.psi_om = float(model.psi(self.om))
        self._setup_exponential_terms()

    def _setup_exponential_terms(self):
        om, r, q, bl = self.om, self.r, self.q, self.b_low
        lam, eta = self.model.jumps.rates, self.model.jumps.intensities
        # f(x) = sum_i C_i exp(eta_i (b_low - x)) on x >= b_low
        self.jump_c = lam * eta * (self.u_b / (self.phi_rq + eta) - math.exp(om * bl) / (om * (om + eta))
                                   + 1.0 / (om * eta))
        self.gam = np.concatenate([[om, 0.0], -eta]).astype(complex)
        tail = self.jump_c * np.exp(eta * bl)
        self.chi_co = np.concatenate([[-(r - self.psi_om) / om, r / om], tail])
        self.h_co = np.concatenate([[(q + r - self.psi_om) / om, -(r + q) / om], -tail])
        # sum_k B_k/(gamma_m - xi_k) = 1/(psi(gamma_m) - r - q), finite at the poles
        self._res_rq = np.array([np.sum(self.sf_rq.weights / (g - self.sf_rq.roots)) for g in self.gam])
        self._res_r = np.array([np.sum(self.sf_r.weights / (g - self.sf_r.roots)) for g in self.gam])

    # utilities and one-sided values

    def U(self, x):
        return crra(x, self.rho)

    def v_lower(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= self.b_low, np.exp(self.phi_rq * (np.minimum(x, self.b_low) - self.b_low)) * self.u_b,
                       self.U(x))
        return out if out.ndim else float(out)

    def v_lower_prime(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= self.b_low,
                       self.phi_rq * np.exp(self.phi_rq * (np.minimum(x, self.b_low) - self.b_low)) * self.u_b,
                       np.exp(self.om * x))
        return out if out.ndim else float(out)

    def f_jump(self, x):
        x = np.asarray(x, dtype=float)
        eta = self.model.jumps.intensities
        out = np.exp(np.multiply.outer(self.b_low - x, eta)) @ self.jump_c
        return out if out.ndim else float(out)

    def f_jump_quad(self, x: float) -> float:
        """``f`` by quadrature against the Levy density (oracle route)."""
        dens = self.model.jumps.density
        val, _ = quad(lambda w: (self.v_lower(x + w) - self.U(x + w)) * float(dens(np.array([w]))[0]),
                      -np.inf, self.b_low - x, **QUAD_OPTS)
        return val

    def chi(self, x):
        x = np.asarray(x, dtype=float)
        om = self.om
        out = self.r / om - (self.r - self.psi_om) / om * np.exp(om * x) + self.f_jump(x)
        return out if out.ndim else float(out)

    def chi_quad(self, x: float) -> float:
        om = self.om
        return self.r / om - (self.r - self.psi_om) / om * math.exp(om * x) + self.f_jump_quad(x)

    def h(self, w):
        """``q v_lower(w) - chi(w)`` for ``w >= b_low``."""
        w = np.asarray(w, dtype=float)
        out = np.real(np.exp(np.multiply.outer(w, self.gam)) @ self.h_co)
        return out if out.ndim else float(out)

    # regime and the one-sided problem

    @cached_property
    def regime(self) -> RegimeReport:
        return classify(self.kernel, self.rho, self.model.sigma)

    @property
    def severe(self) -> bool:
        return self.regime.severe

    @property
    def u_bar(self) -> float:
        return self.regime.u_bar

    def g(self, x):
        return g_fn(self.kernel, self.rho, x)

    def z_c(self, c: float | None = None) -> float:
        lam = self.kernel.Lambda(self.c if c is None else c)
        return math.log(lam / (lam - self.om)) / self.om

    def z_star(self, y: float, check: bool = True) -> float:
        """Optimal take-profit level of the one-sided problem with clock level ``y``."""
        om = self.om
        if not self.severe and y >= self.b_low:
            return self.b_low
        if self.severe and check and y > self.y_tilde * (1 + 1e-12) + 1e-12:
            raise ValueError(f"z* is not defined beyond y_tilde={self.y_tilde} under severe anxiety")
        target = math.exp(-om * y) / om
        fn = lambda z: self.g(z - y) - target
        lo = y + (self.u_bar if self.severe else 0.0)
        if fn(lo) > 0:
            if self.severe:
                raise NumericError(f"no root of the z* equation beyond y + u_bar at y={y}")
            return self.b_low
        step, hi = 1.0, lo + 1.0
        while fn(hi) <= 0:
            lo, hi = hi, hi + step
            step *= 2.0
            if step > 1e6:
                raise NumericError("could not bracket z*")
        return brentq(fn, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)

    def v_bar_take_profit(self, x, y: float, z: float | None = None):
        """One-sided value when the optimal rule is a take-profit at ``z*(y)``."""
        z = self.z_star(y) if z is None else z
        x = np.asarray(x, dtype=float)
        out = np.where(x < z, self.kernel.I(x - y) / self.kernel.I(z - y) * self.U(z), self.U(x))
        return out if out.ndim else float(out)

    @cached_property
    def y_hat(self) -> float:
        if self.chi(self.b_low) <= 0:
            return self.b_low
        lo, hi = self.b_low, self.b_low + 1.0
        while self.chi(hi) > 0:
            lo, hi = hi, hi + 2 * (hi - self.b_low)
        return brentq(self.chi, lo, hi, xtol=1e-14, rtol=1e-15)

    def _sup_ratio(self, y: float) -> tuple[float, float]:
        """``sup_{x < y + u_bar} U(x)/I(x - y)`` and its maximizer."""
        top = y + self.u_bar
        obj = lambda x: self.U(x) / self.kernel.I(x - y)
        xs = np.linspace(self.b_low - 10.0, top, 401)[:-1]
        vals = obj(xs)
        k = int(np.argmax(vals))
        lo = xs[max(k - 1, 0)]
        hi = xs[k + 1] if k + 1 < len(xs) else top
        res = minimize_scalar(lambda x: -obj(x), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        if -res.fun >= vals[k]:
            return float(-res.fun), float(res.x)
        return float(vals[k]), float(xs[k])

    def _y_tilde_gap(self, y: float) -> float:
        z = self.z_star(y, check=False)
        return self._sup_ratio(y)[0] - self.U(z) / self.kernel.I(z - y)

    @cached_property
    def y_tilde(self) -> float:
        if not self.severe:
            raise ValueError("y_tilde exists only under severe anxiety")
        lo, hi = self.b_low + 1e-9, self.regime.y_bar - 1e-9
        if not (lo < hi and self._y_tilde_gap(lo) < 0 < self._y_tilde_gap(hi)):
            raise NumericError("y_tilde is not bracketed in (b_low, y_bar)")
        return brentq(self._y_tilde_gap, lo, hi, xtol=1e-13, rtol=1e-15)

    @cached_property
    def c_tilde(self) -> float:
        return self.z_star(self.y_tilde) - self.y_tilde

    @cached_property
    def theorem(self) -> str:
        if not self.severe:
            return MILD
        return SEVERE_HIGH if self.c >= self.c_tilde else SEVERE_LOW

    # the stop-loss/take-profit excess Delta

    def _hint(self, zeta, lo, hi, co):
        """``int_lo^hi exp(-zeta w) sum_m co_m exp(gam_m w) dw`` for each zeta."""
        zeta = np.atleast_1d(zeta)
        return np.sum(co[None, :] * _expint(self.gam[None, :] - zeta[:, None], lo, hi), axis=1)

    def delta_pieces(self, a: float, y: float) -> DeltaPieces:
        z, A = self.sf_r.roots, self.sf_r.weights
        xi, B = self.sf_rq.roots, self.sf_rq.weights
        gam, hco, cco = self.gam, self.h_co, self.chi_co
        dg = gam[None, :] - xi[:, None]
        below = ExpSum(np.concatenate([gam, xi]),
                       np.concatenate([hco * self._res_rq, -B * np.sum(hco[None, :] * np.exp(dg * a) / dg, axis=1)]))
        S = np.sum(B[None, :] / (xi[None, :] - z[:, None]), axis=1)
        Hz = self._hint(z, a, y, hco)
        Hx = self._hint(xi, a, y, hco)
        M = 1.0 / (xi[None, :] - z[:, None])
        d = A * ((1 - self.q * S) * Hz + self.q * np.exp(-z * y) * (M @ (B * np.exp(xi * y) * Hx)))
        dz = gam[None, :] - z[:, None]
        d = d + A * np.sum(cco[None, :] * np.exp(dz * y) / dz, axis=1)
        above = ExpSum(np.concatenate([z, gam]), np.concatenate([d, -cco * self._res_r]))
        return DeltaPieces(a, y, below, above, w_two_rate_expsum(self.sf_r, self.sf_rq, a, y))

    def delta(self, x, a: float, y: float, k: int = 0):
        return self.delta_pieces(a, y)(x, k)

    def delta_quad(self, x: float, a: float, y: float, kernel_method: str = "closed") -> float:
        """``Delta`` by adaptive quadrature of its defining integrals, split at ``y``."""
        if x <= a:
            return 0.0
        i1, _ = quad(lambda w: w_two_rate(self.sf_r, self.sf_rq, x, w, y, kernel_method) * self.h(w),
                     a, min(x, y), **QUAD_OPTS)
        i2 = 0.0
        if x > y:
            i2, _ = quad(lambda w: self.sf_r(x - w) * self.chi(w), y, x, **QUAD_OPTS)
        return i1 - i2

    @cached_property
    def z_tilde(self) -> float:
        """``z*(y_tilde)``, the right end of the search window for ``b*``."""
        return self.z_star(self.y_tilde)

    @lru_cache(maxsize=4096)
    def a_b_star(self, y: float) -> tuple[float, float]:
        if not self.severe:
            raise ValueError("a*, b* exist only under severe anxiety")
        yt, yh = self.y_tilde, self.y_hat
        if y < yt - 1e-12 or y >= yh:
            raise ValueError(f"a*, b* are defined on [y_tilde, y_hat) = [{yt}, {yh}), got {y}")
        if y <= yt + 1e-12:
            return self.b_low, self.z_tilde
        t = np.linspace(0.0, 1.0, 201)[1:]
        xg = y + (self.z_tilde - y) * t**2

        def phi_min(a):
            vals = self.delta_pieces(a, y).above(xg)
            k = int(np.argmin(vals))
            return vals[k], k

        lo, hi = self.b_low, y
        if phi_min(lo)[0] <= 0:
            a = lo
        else:
            while hi - lo > 1e-11:
                mid = 0.5 * (lo + hi)
                if phi_min(mid)[0] <= 0:
                    hi = mid
                else:
                    lo = mid
            a = hi
        pieces = self.delta_pieces(a, y)
        k = phi_min(a)[1]
        blo, bhi = (xg[k - 1] if k > 0 else y), xg[min(k + 1, len(xg) - 1)]
        b = minimize_scalar(pieces.above, bounds=(blo, bhi), method="bounded", options={"xatol": 1e-12}).x
        return self._polish(a, b, y)

    def _polish(self, a: float, b: float, y: float) -> tuple[float, float]:
        """Newton on ``Delta(b) = Delta_x(b) = 0`` in ``(a, b)`` from the bisection estimate."""
        a0, b0 = a, b
        for _ in range(30):
            p = self.delta_pieces(a, y)
            F = np.array([p.above(b), p.above(b, 1)])
            ha = self.h(a)
            J = np.array([[-p.kernel(b) * ha, F[1]], [-p.kernel(b, 1) * ha, p.above(b, 2)]])
            try:
                step = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                return a0, b0
            a, b = a + step[0], b + step[1]
            if not (self.b_low <= a < y < b) or abs(a - a0) > 1e-3 or abs(b - b0) > 1e-2:
                return a0, b0
            if np.max(np.abs(step)) < 1e-14:
                break
        return float(a), float(b)

    def m(self, y: float) -> float:
        if not self.severe:
            if y > self.b_low:
                raise ValueError("m is defined for y <= b_low under mild anxiety")
            return self.z_star(y) - y
        if y <= self.y_tilde:
            return self.z_star(y) - y
        return self.a_b_star(y)[1] - y

    @cached_property
    def y_c(self) -> float:
        if self.theorem != SEVERE_LOW:
            return self.z_c() - self.c
        yt, yh = self.y_tilde, self.y_hat
        fn = lambda y: self.a_b_star(y)[1] - y - self.c
        hi = yh - 1e-4 * (yh - yt)
        if fn(hi) >= 0:
            hi = yh - 1e-7 * (yh - yt)
        return brentq(fn, yt, hi, xtol=1e-12, rtol=1e-15)

    @cached_property
    def diagonal_target(self) -> float:
        """Take-profit level ``D0`` for states far below: ``z_c`` or ``b*(y_c)``."""
        if self.theorem == SEVERE_LOW:
            return self.a_b_star(self.y_c)[1]
        return self.z_c()


@dataclass
class ThresholdSet:
    """Solved boundaries in the caller's price units (shift ``log K`` added back)."""

    theorem: str
    regime: dict
    b_low: float
    z_c: float
    y_c: float
    c_tilde: float | None = None
    y_tilde: float | None = None
    y_hat: float | None = None
    y_hat_plus_c: float | None = None
    a_star_yc: float | None = None
    b_star_yc: float | None = None
    s_c: float | None = None
    residuals: dict = field(default_factory=dict)
    problem: Problem | None = field(default=None, repr=False, compare=False)
    curve: object = field(default=None, repr=False, compare=False)

    @property
    def severe(self) -> bool:
        return self.theorem != MILD

    def z_star(self, y: float) -> float:
        p = self.problem
        return p.z_star(y - p.shift) + p.shift

    def a_star(self, y: float) -> float:
        p = self.problem
        return p.a_b_star(y - p.shift)[0] + p.shift

    def b_star(self, y: float) -> float:
        p = self.problem
        return p.a_b_star(y - p.shift)[1] + p.shift

    def m(self, y: float) -> float:
        p = self.problem
        return p.m(y - p.shift)

    def to_dict(self) -> dict:
        keys = ["theorem", "b_low", "z_c", "y_c", "c_tilde", "y_tilde", "y_hat", "y_hat_plus_c",
                "a_star_yc", "b_star_yc", "s_c"]
        out = {k: getattr(self, k) for k in keys if getattr(self, k) is not None}
        out["regime"] = self.regime
        out["residuals"] = self.residuals
        return out


def solve(model: LevyModel, prefs: Preferences, trailing: bool = True) -> ThresholdSet:
    """Solve every boundary that applies to the configuration."""
    p = Problem(model, prefs)
    sh = p.shift
    reg = p.regime.to_dict()
    if reg["y_bar"] is not None:
        reg["y_bar"] = reg["y_bar"] + sh
    zc = p.z_c()
    res: dict = {}
    ts = ThresholdSet(p.theorem, reg, p.b_low + sh, zc + sh, p.y_c + sh, problem=p)
    if p.theorem != SEVERE_LOW:
        res["z_star_at_z_c_minus_c"] = abs(p.z_star(zc - p.c) - zc)
    if p.severe:
        ts.c_tilde = p.c_tilde
        ts.y_tilde = p.y_tilde + sh
        ts.y_hat = p.y_hat + sh
        ts.y_hat_plus_c = p.y_hat + p.c + sh
        x0 = p._sup_ratio(p.y_tilde)[1]
        res["y_tilde_gap"] = abs(p._y_tilde_gap(p.y_tilde))
        res["y_tilde_maximizer_minus_b_low"] = abs(x0 - p.b_low)
        res["chi_at_y_hat"] = abs(p.chi(p.y_hat))
    if p.theorem == SEVERE_LOW:
        a, b = p.a_b_star(p.y_c)
        ts.a_star_yc, ts.b_star_yc = a + sh, b + sh
        pieces = p.delta_pieces(a, p.y_c)
        res["b_star_minus_y_c_minus_c"] = abs(b - p.y_c - p.c)
        res["delta_at_b_star"] = abs(pieces.above(b)) * p.scale
        res["delta_x_at_b_star"] = abs(pieces.above(b, 1)) * p.scale
        if trailing:
            from .trailing_stop import integrate_ode

            curve = integrate_ode(p)
            ts.curve = curve
            ts.s_c = curve.s_c
            res["a_at_s_c_minus_b_low"] = abs(curve(curve.s_c) - ts.b_low)
    ts.residuals = res
    return ts
