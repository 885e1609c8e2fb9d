"""Spectrally negative Levy log-price models and investor preferences.

The supported class is Brownian motion with drift plus a compound Poisson
process of negative hyper-exponential jumps,

    psi(beta) = mu*beta + sigma^2 beta^2 / 2 - sum_i lam_i * beta / (beta + eta_i),

which keeps the Laplace exponent rational.  Every quantity downstream (scale
functions, occupation kernels, thresholds) is built on top of that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import brentq


class ModelError(ValueError):
    """Raised for configurations outside the supported model class."""


class NumericError(RuntimeError):
    """Raised when a numerical procedure fails to converge or bracket a root."""


@dataclass(frozen=True)
class JumpSpec:
    """Negative exponential jump components ``(rate, intensity)``.

    ``rate`` is the arrival rate per unit time, ``intensity`` is the
    exponential parameter per unit log price (mean jump size ``1/intensity``).
    Terms with equal intensity are merged, and terms are sorted by intensity,
    so the Levy density ``sum lam_i eta_i exp(eta_i w)`` on ``w < 0`` is a
    completely monotone (hence monotone) function of ``|w|``.
    """

    terms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        merged: dict[float, float] = {}
        for rate, intensity in self.terms:
            rate, intensity = float(rate), float(intensity)
            if not (rate > 0 and intensity > 0):
                raise ModelError(f"jump terms need rate > 0 and intensity > 0, got ({rate}, {intensity})")
            merged[intensity] = merged.get(intensity, 0.0) + rate
        object.__setattr__(self, "terms", tuple((merged[k], k) for k in sorted(merged)))

    @classmethod
    def exponential(cls, rate: float, intensity: float) -> "JumpSpec":
        return cls(((rate, intensity),))

    @property
    def rates(self) -> np.ndarray:
        return np.array([t[0] for t in self.terms], dtype=float)

    @property
    def intensities(self) -> np.ndarray:
        return np.array([t[1] for t in self.terms], dtype=float)

    @property
    def total_rate(self) -> float:
        return float(sum(t[0] for t in self.terms))

    def __len__(self) -> int:
        return len(self.terms)

    def density(self, w) -> np.ndarray:
        """Levy density on the negative half line (zero for ``w >= 0``)."""
        w = np.asarray(w, dtype=float)
        out = np.zeros_like(w)
        neg = w < 0
        for lam, eta in self.terms:
            out[neg] += lam * eta * np.exp(eta * w[neg])
        return out


@dataclass(frozen=True)
class LevyModel:
    mu: float
    sigma: float
    jumps: JumpSpec = field(default_factory=JumpSpec)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ModelError("sigma must be positive (bounded-variation paths are not supported)")

    def psi(self, beta):
        """Laplace exponent, vectorised over real or complex ``beta``."""
        beta = np.asarray(beta)
        out = self.mu * beta + 0.5 * self.sigma**2 * beta**2
        for lam, eta in self.jumps.terms:
            out = out - lam * beta / (beta + eta)
        return out

    def dpsi(self, beta):
        beta = np.asarray(beta)
        out = self.mu + self.sigma**2 * beta
        for lam, eta in self.jumps.terms:
            out = out - lam * eta / (beta + eta) ** 2
        return out

    def numerator_poly(self, rate: float) -> np.poly1d:
        """Polynomial whose roots are the solutions of ``psi(beta) = rate``.

        ``(psi(beta) - rate) * prod_i (beta + eta_i)`` with all poles cleared;
        degree is ``2 + len(jumps)``.
        """
        base = np.poly1d([0.5 * self.sigma**2, self.mu, -rate])
        poles = [np.poly1d([1.0, eta]) for eta in self.jumps.intensities]
        out = base
        for p in poles:
            out = out * p
        for i, (lam, _) in enumerate(self.jumps.terms):
            term = np.poly1d([lam, 0.0])
            for k, p in enumerate(poles):
                if k != i:
                    term = term * p
            out = out - term
        return out

    @property
    def mean_drift(self) -> float:
        """``E[X_1] - X_0 = psi'(0)``."""
        return float(self.dpsi(0.0))


def psi(model: LevyModel, beta):
    if np.any(np.asarray(beta, dtype=float) < 0):
        raise ValueError("psi is evaluated on beta >= 0")
    return model.psi(beta)


def phi(model: LevyModel, rate: float, start: float = 1.0) -> float:
    """Largest root of ``psi(beta) = rate`` (the right inverse of psi)."""
    if not rate > 0:
        raise ValueError("rate must be positive")
    f = lambda b: float(model.psi(b)) - rate
    lo, hi = 0.0, max(1.0, start)
    if f(hi) <= 0:
        lo = hi
        for _ in range(200):
            hi *= 2.0
            if f(hi) > 0:
                break
            lo = hi
        else:
            raise NumericError("could not bracket Phi(rate)")
    else:
        # psi convex with psi(0) = 0 < rate: shrink the left end while keeping sign
        while lo < hi and f(0.5 * hi) > 0 and hi > 1.0:
            hi *= 0.5
    return brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


@dataclass(frozen=True)
class Preferences:
    r: float
    q: float
    c: float
    rho: float = 0.0
    K: float = 1.0

    @property
    def log_k(self) -> float:
        return math.log(self.K)

    def utility(self, x):
        """Utility of selling at log price ``x`` in original (unshifted) units.

        ``K * U(exp(x) / K)``; for ``rho = 0`` this is ``exp(x) - K``.
        """
        return self.K * crra(np.asarray(x, dtype=float) - self.log_k, self.rho)

    def with_(self, **changes) -> "Preferences":
        data = dict(r=self.r, q=self.q, c=self.c, rho=self.rho, K=self.K)
        data.update(changes)
        return Preferences(**data)


def crra(x, rho: float):
    """CRRA utility of the price ``exp(x)``: ``(exp((1-rho) x) - 1)/(1-rho)``."""
    om = 1.0 - rho
    return np.expm1(om * np.asarray(x, dtype=float)) / om


def crra_prime(x, rho: float):
    """Derivative of ``crra(x)`` with respect to the log price ``x``."""
    return np.exp((1.0 - rho) * np.asarray(x, dtype=float))


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def raise_if_invalid(self):
        if self.violations:
            raise ModelError("; ".join(self.violations))


def validate(model: LevyModel, prefs: Preferences) -> ValidationReport:
    """Check the standing assumptions; never raises."""
    report = ValidationReport()
    add = report.violations.append
    if not model.sigma > 0:
        add("sigma <= 0")
    if not prefs.q > 0:
        add("q <= 0")
    if not prefs.c > 0:
        add("c <= 0")
    if not prefs.r > 0:
        add("r <= 0")
    if not 0.0 <= prefs.rho < 1.0:
        add("rho outside [0, 1)")
    if not prefs.K >= 1.0:
        add("K < 1")
    elif prefs.K > 1.0 and prefs.rho != 0.0:
        add("K > 1 requires rho = 0")
    # the log shift by log K leaves psi unchanged, so the condition is the same
    psi1 = float(model.psi(1.0))
    if not prefs.r > psi1:
        add(f"r <= psi(1) (r={prefs.r}, psi(1)={psi1:.6g})")
    return report


def hyper_exponential(mu: float, sigma: float, terms: Iterable[tuple[float, float]] = ()) -> LevyModel:
    return LevyModel(mu, sigma, JumpSpec(tuple(terms)))
