"""Independent reference computations used by the tests.

Nothing here calls into the package's solvers; each routine rebuilds its
quantity from the model primitives by a different numerical route.
"""

import math

import numpy as np
from scipy.integrate import quad
from scipy.linalg import solve, toeplitz


def psi_direct(mu, sigma, jumps, beta):
    """Laplace exponent from its defining formula; ``jumps`` is [(rate, eta), ...]."""
    out = mu * beta + 0.5 * sigma**2 * beta**2
    for lam, eta in jumps:
        out -= lam * beta / (beta + eta)
    return out


def bisect_phi(mu, sigma, jumps, rate, tol=1e-12):
    lo, hi = 0.0, 1.0
    while psi_direct(mu, sigma, jumps, hi) < rate:
        hi *= 2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if psi_direct(mu, sigma, jumps, mid) < rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def laplace_by_quad(fn, beta, upper=60.0):
    val, _ = quad(lambda x: math.exp(-beta * x) * fn(x), 0.0, upper, limit=400, epsabs=1e-13, epsrel=1e-11)
    return val


def occupation_by_quad(w, phi_rq, x, upper=60.0):
    """``int_0^inf exp(-phi_rq u) W(u + x) du`` with ``W`` given pointwise."""
    lo = max(0.0, -x)
    val, _ = quad(lambda u: math.exp(-phi_rq * u) * w(u + x), lo, upper, limit=400, epsabs=1e-13, epsrel=1e-11)
    return val


def central_diff(fn, x, h=1e-5):
    return (fn(x + h) - fn(x - h)) / (2 * h)


def fd_stopping_sets(mu, sigma, lam, eta, r, q, rho, y, h=0.005, lo=-4.0, hi=4.0):
    """Policy iteration for the fixed-``y`` selling problem on a grid.

    Solves ``max(L v - (r + q 1{x<y}) v, U - v) = 0`` with CRRA payoff
    ``(e^{(1-rho)x} - 1)/(1-rho)`` (K = 1) and one exponential jump term.
    Returns the connected components of the stopping set as (left, right)
    pairs of grid points.
    """
    om = 1.0 - rho
    x = np.arange(lo, hi + h / 2, h)
    n = len(x)
    payoff = (np.exp(om * x) - 1) / om
    disc = r + q * (x < y)
    gen = np.zeros((n, n))
    i = np.arange(1, n - 1)
    gen[i, i - 1] += sigma**2 / (2 * h**2) - mu / (2 * h)
    gen[i, i + 1] += sigma**2 / (2 * h**2) + mu / (2 * h)
    gen[i, i] -= sigma**2 / h**2
    # jump of size u ~ Exp(eta) downward, trapezoid weights; mass below grid pays 0
    w = eta * h * np.exp(-eta * h * np.arange(n))
    w[0] *= 0.5
    jump = np.tril(toeplitz(w))
    jump[0] = 0
    jump[-1] = 0
    gen += lam * jump
    gen[i, i] -= lam
    op = gen - np.diag(disc)
    stop = payoff > 0.5 * payoff.max()
    for _ in range(200):
        a = op.copy()
        rhs = np.zeros(n)
        a[stop] = 0
        a[stop, stop] = 1
        rhs[stop] = payoff[stop]
        a[0] = 0
        a[0, 0] = 1
        a[-1] = 0
        a[-1, -1] = 1
        rhs[-1] = payoff[-1]
        v = solve(a, rhs)
        new = np.where(stop, op @ v <= 0, v <= payoff)
        new[0] = False
        new[-1] = True
        if np.array_equal(new, stop):
            break
        stop = new
    pts = x[stop & (x < hi - 0.5)]
    breaks = np.where(np.diff(pts) > 1.5 * h)[0]
    starts = np.r_[0, breaks + 1]
    ends = np.r_[breaks, len(pts) - 1]
    return [(float(pts[s]), float(pts[e])) for s, e in zip(starts, ends)]
