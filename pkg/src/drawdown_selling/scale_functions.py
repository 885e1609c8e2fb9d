"""Scale functions of the hyper-exponential model by partial fractions.

With a rational Laplace exponent, ``1/(psi(beta) - rate)`` has simple poles at
the roots ``zeta_j`` of ``psi(beta) = rate`` with residues ``1/psi'(zeta_j)``,
so the r-scale function is a finite exponential sum

    W(x) = sum_j A_j exp(zeta_j x),   A_j = 1/psi'(zeta_j),   x >= 0.

Everything here is exact up to root-finding precision and differentiates
term by term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .levy_model import LevyModel, ModelError, phi

ROOT_MERGE_TOL = 1e-8


@dataclass(frozen=True)
class ExpSum:
    """``x -> Re sum_j coef_j exp(exps_j x)`` with analytic derivatives."""

    exps: np.ndarray
    coefs: np.ndarray

    def __call__(self, x, k: int = 0):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        c = self.coefs * self.exps**k if k else self.coefs
        out = np.real(np.exp(np.outer(flat, self.exps)) @ c)
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def __add__(self, other: "ExpSum") -> "ExpSum":
        return ExpSum(np.concatenate([self.exps, other.exps]), np.concatenate([self.coefs, other.coefs]))

    def scaled(self, factor) -> "ExpSum":
        return ExpSum(self.exps, self.coefs * factor)


def _poly_roots(model: LevyModel, rate: float) -> np.ndarray:
    poly = model.numerator_poly(rate)
    roots = np.roots(poly.coeffs).astype(complex)
    # one Newton step on psi - rate sharpens the companion-matrix eigenvalues
    step = (model.psi(roots) - rate) / model.dpsi(roots)
    roots = roots - step
    real = np.abs(roots.imag) < 1e-12 * (1 + np.abs(roots.real))
    roots[real] = roots[real].real
    return roots


class ScaleFn:
    """The ``rate``-scale function ``W^(rate)`` of a model."""

    def __init__(self, model: LevyModel, rate: float):
        if not rate > 0:
            raise ValueError("scale functions are built for rate > 0")
        self.model = model
        self.rate = float(rate)
        roots = _poly_roots(model, self.rate)
        gaps = np.abs(roots[:, None] - roots[None, :])
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() < ROOT_MERGE_TOL:
            raise ModelError(f"near-repeated roots of psi(beta) = {rate}; confluent terms are not supported")
        self.phi = phi(model, self.rate)
        k = int(np.argmax(roots.real))
        roots[k] = self.phi
        order = np.argsort(-roots.real)
        self.roots = roots[order]
        self.weights = 1.0 / model.dpsi(self.roots)

    @property
    def expsum(self) -> ExpSum:
        return ExpSum(self.roots, self.weights)

    def __call__(self, x, k: int = 0):
        """``W`` (or its ``k``-th derivative) at ``x``; zero for ``x < 0``."""
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0, self.expsum(np.maximum(x, 0.0), k), 0.0)
        return out if out.ndim else float(out)

    def derivative_at_zero(self, k: int = 1) -> float:
        return float(np.real(np.sum(self.weights * self.roots**k)))

    def laplace(self, beta):
        """Closed-form Laplace transform, valid for ``beta > Phi(rate)``."""
        beta = np.asarray(beta, dtype=float)
        return np.real(np.sum(self.weights / (beta[..., None] - self.roots), axis=-1))

    def resolvent(self, beta):
        return 1.0 / (self.model.psi(beta) - self.rate)


def w_scale(sf: ScaleFn, x, k: int = 0):
    return sf(x, k)


class OccupationKernel:
    """``I(x) = int_0^inf exp(-Phi(r+q) u) W^(r)(u + x) du`` and ``Lambda = (log I)'``."""

    def __init__(self, model: LevyModel, r: float, q: float, sf_r: ScaleFn | None = None):
        self.model = model
        self.r, self.q = float(r), float(q)
        self.sf_r = sf_r if sf_r is not None else ScaleFn(model, r)
        self.phi_rq = phi(model, self.r + self.q)
        den = self.phi_rq - self.sf_r.roots
        if np.min(np.abs(den)) < ROOT_MERGE_TOL:
            raise ModelError("Phi(r+q) coincides with a root of psi = r")
        self._pos = ExpSum(self.sf_r.roots, self.sf_r.weights / den)
        self.i0 = self._pos(0.0)

    @property
    def phi_r(self) -> float:
        return self.sf_r.phi

    def I(self, x, k: int = 0):
        """``k``-th derivative of ``I`` (k = 0, 1, 2); right derivatives at 0."""
        x = np.asarray(x, dtype=float)
        neg = self.phi_rq**k * np.exp(self.phi_rq * np.minimum(x, 0.0)) * self.i0
        out = np.where(x < 0, neg, self._pos(np.maximum(x, 0.0), k))
        return out if out.ndim else float(out)

    __call__ = I

    def Lambda(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x < 0, self.phi_rq, self.I(np.maximum(x, 0.0), 1) / self.I(np.maximum(x, 0.0)))
        return out if out.ndim else float(out)

    def Lambda_prime(self, x):
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        i0, i1, i2 = self.I(xp), self.I(xp, 1), self.I(xp, 2)
        out = np.where(x < 0, 0.0, i2 / i0 - (i1 / i0) ** 2)
        return out if out.ndim else float(out)


def occupation_I(ok: OccupationKernel, x):
    return ok.I(x)


def lambda_fn(ok: OccupationKernel, x):
    return ok.Lambda(x)


def w_two_rate_expsum(sf_r: ScaleFn, sf_rq: ScaleFn, a: float, y: float) -> ExpSum:
    """``x -> W^(r,q)(x, a; y)`` on ``x >= y`` as one exponential sum.

    Uses the representation ``W^(r)(x-a) + q int_a^y W^(r)(x-z) W^(r+q)(z-a) dz``
    and integrates the double exponential sum in closed form.
    """
    if a > y:
        raise ValueError("two-rate kernel needs a <= y")
    q = sf_rq.rate - sf_r.rate
    z, A = sf_r.roots, sf_r.weights
    xi, B = sf_rq.roots, sf_rq.weights
    d = xi[None, :] - z[:, None]
    inner = B[None, :] * np.exp(-xi[None, :] * a) * (np.exp(d * y) - np.exp(d * a)) / d
    coef = A * np.exp(-z * a) + q * A * inner.sum(axis=1)
    return ExpSum(z, coef)


def w_two_rate(sf_r: ScaleFn, sf_rq: ScaleFn, x: float, a: float, y: float, method: str = "closed", k: int = 0) -> float:
    """Two-rate kernel ``W^(r,q)(x, a; y)``.

    ``method`` is ``"closed"`` (exponential sum), ``"difference"`` (quadrature of
    ``W^(r+q)(x-a) - q int_y^x W^(r)(x-z) W^(r+q)(z-a) dz``) or ``"sum"``
    (quadrature of ``W^(r)(x-a) + q int_a^y W^(r)(x-z) W^(r+q)(z-a) dz``).
    """
    if a > y:
        raise ValueError("two-rate kernel needs a <= y")
    q = sf_rq.rate - sf_r.rate
    if x <= y:
        return sf_rq(x - a, k)
    if method == "closed":
        return w_two_rate_expsum(sf_r, sf_rq, a, y)(x, k)
    if k:
        raise ValueError("derivatives are only available in closed form")
    opts = dict(epsabs=1e-10, epsrel=1e-9, limit=200)
    if method == "difference":
        val, _ = quad(lambda z: sf_r(x - z) * sf_rq(z - a), y, x, **opts)
        return sf_rq(x - a) - q * val
    if method == "sum":
        val, _ = quad(lambda z: sf_r(x - z) * sf_rq(z - a), a, y, **opts)
        return sf_r(x - a) + q * val
    raise ValueError(f"unknown method {method!r}")
