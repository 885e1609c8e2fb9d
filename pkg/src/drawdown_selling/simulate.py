"""Monte Carlo executor for selling strategies under the drawdown clock.

Paths of ``(X, Xbar, R)`` are simulated on a time grid: exact Gaussian
increments for the diffusion, exponential waiting times for the jumps, and
Brownian-bridge extrema inside each step so that barrier crossings by the
continuous part are not missed.  Every path draws from its own counter-based
stream keyed by ``(seed, path index)``, so results do not depend on how the
paths are scheduled across threads.

The strategy is handed to the compiled kernel as a small table: a regime
code, a few scalar levels and sampled boundary curves.  ``levels(s)``
returns the take-profit level ``tp`` and the top ``hi`` of the stop band
``[b_low, hi]`` for the current running maximum ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._io import write_csv
from .levy_model import LevyModel, Preferences
from .thresholds import MILD, SEVERE_HIGH, SEVERE_LOW, Problem
from .value_function import Action, ValueSurface

CODE_MILD, CODE_HIGH, CODE_LOW, CODE_FIXED = 0, 1, 2, 3
OUT_HORIZON, OUT_TP, OUT_SL, OUT_TRAIL = 0, 1, 2, 3
OUTCOME_NAMES = {OUT_HORIZON: "Horizon", OUT_TP: Action.TAKE_PROFIT.value, OUT_SL: Action.STOP_LOSS.value,
                 OUT_TRAIL: Action.TRAILING_STOP.value}

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    horizon: float | None = None  # defaults to 40/r
    n_paths: int = 10_000
    seed: int = 0
    antithetic: bool = True
    cutoff: float = 1e-9  # stop paths whose discounted upper bound is below this

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.horizon is not None and not self.horizon > 0:
            raise ValueError("horizon must be positive")

    def horizon_for(self, r: float) -> float:
        h = 40.0 / r if self.horizon is None else self.horizon
        if h / self.dt > 2**62:
            raise ValueError("horizon/dt overflows the step counter")
        return h


@dataclass
class SimResult:
    estimate: float
    std_error: float
    n_paths: int
    n_stopped: int
    mean_stop_time: float
    order_type_counts: dict
    tail_bias_bound: float = 0.0
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(estimate=self.estimate, std_error=self.std_error, n_paths=self.n_paths,
                    n_stopped=self.n_stopped, mean_stop_time=self.mean_stop_time,
                    order_type_counts=self.order_type_counts, tail_bias_bound=self.tail_bias_bound,
                    warnings=self.warnings)


# random numbers


@njit(cache=True)
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _stream(seed, index):
    return _mix(np.uint64(seed) * _GOLDEN + _mix(np.uint64(index) + _GOLDEN))


@njit(cache=True)
def _uniform(state):
    """Return ``(u, new_state)`` with ``u`` in ``(0, 1)``."""
    state = state + _GOLDEN
    z = _mix(state)
    return ((z >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0), state


@njit(cache=True)
def _normal_pair(state):
    """Two independent standard normals (Marsaglia polar method)."""
    while True:
        u, state = _uniform(state)
        v, state = _uniform(state)
        u = 2.0 * u - 1.0
        v = 2.0 * v - 1.0
        w = u * u + v * v
        if 0.0 < w < 1.0:
            break
    f = math.sqrt(-2.0 * math.log(w) / w)
    return u * f, v * f, state


@njit(cache=True)
def _jump_size(state, cum, eta):
    u, state = _uniform(state)
    k = 0
    while k < len(cum) - 1 and u > cum[k]:
        k += 1
    e, state = _uniform(state)
    return -math.log(e) / eta[k], state


# strategy levels


@njit(cache=True)
def _levels(s, code, sc, ygrid, zs, yab, astar, bstar, sgrid, atrail):
    """Take-profit level and stop-band top for running maximum ``s``.

    ``sc`` holds ``[b_low, c, D0, s_tilde, s_hat, s_c, z_c]``.
    """
    bl, c, d0, s_tilde, s_hat, s_c, zc = sc[0], sc[1], sc[2], sc[3], sc[4], sc[5], sc[6]
    none = -np.inf
    if code == 3:
        return d0, none
    y = s - c
    if code == 0:
        if s < zc:
            return zc, none
        if y >= bl:
            return bl, none
        return np.interp(y, ygrid, zs), none
    if s >= s_hat:
        return bl, np.inf
    if code == 1:
        if s < zc:
            return zc, none
        if s < s_tilde:
            return np.interp(y, ygrid, zs), none
    else:
        if s < s_c:
            return d0, none
        if s < d0:
            return d0, np.interp(s, sgrid, atrail)
    return np.interp(y, yab, bstar), np.interp(y, yab, astar)


@njit(cache=True)
def _band_kind(s, code, sc):
    """Outcome code for a stop-band sale at running maximum ``s``."""
    if code == 2 and sc[5] <= s < sc[2]:
        return 3
    return 2


@njit(cache=True)
def _w0(x, bl0, phi_r, ub0, om):
    """Upper bound on any selling value: the problem without the drawdown clock."""
    if x <= bl0:
        return math.exp(phi_r * (x - bl0)) * ub0
    return (math.exp(om * x) - 1.0) / om


@njit(cache=True)
def _vlow(x, bl, phi_rq, ub, om):
    if x <= bl:
        return math.exp(phi_rq * (x - bl)) * ub
    return (math.exp(om * x) - 1.0) / om


@njit(cache=True)
def _run_path(x, s, state, sign, mu, sigma, lam, cum, eta, r, q, om, dt, nmax, cutoff,
              code, sc, ygrid, zs, yab, astar, bstar, sgrid, atrail, vl, rec, trace):
    """Simulate one path until sale or horizon.

    Returns ``(payoff, outcome, stop_time, steps, sale_level)``.  ``vl`` holds
    ``[b_low, Phi(r+q), U(b_low), b0, Phi(r), U(b0)]``.  When ``rec`` is set,
    rows ``(t, x, xbar, clock, trailing)`` are written into ``trace``.
    """
    bl = sc[0]
    c = sc[1]
    sq = sigma * math.sqrt(dt)
    var2 = 2.0 * sigma * sigma * dt
    R = 0.0
    t = 0.0
    next_jump = np.inf
    if lam > 0:
        u, state = _uniform(state)
        next_jump = -math.log(u) / lam
    tp, hi = _levels(s, code, sc, ygrid, zs, yab, astar, bstar, sgrid, atrail)
    if rec:
        trace[0, 0], trace[0, 1], trace[0, 2], trace[0, 3] = t, x, s, R
        trace[0, 4] = hi if hi > -np.inf and hi < np.inf and code == 2 else np.nan
    if x >= tp:
        return (math.exp(om * x) - 1.0) / om, 1, 0.0, 0, x
    if bl <= x <= hi:
        return (math.exp(om * x) - 1.0) / om, _band_kind(s, code, sc), 0.0, 0, x
    has_spare = False
    spare = 0.0
    for n in range(1, nmax + 1):
        if has_spare:
            z = spare
            has_spare = False
        else:
            z, spare, state = _normal_pair(state)
            has_spare = True
        x1 = x + mu * dt + sq * sign * z
        R += (r + q * (1.0 if x < s - c else 0.0)) * dt
        t = n * dt
        up = bl if (x < bl and hi >= bl) else tp
        # the bridge maximum matters only near the target or the running max
        top = min(up, s)
        if (top - x) * (top - x1) * 2.0 < 40.0 * var2 or x1 >= top:
            u, state = _uniform(state)
            d = x1 - x
            mx = 0.5 * (x + x1 + math.sqrt(d * d - var2 * math.log(u)))
            if mx >= up:
                kind = 1 if up == tp else _band_kind(s, code, sc)
                return math.exp(-R) * (math.exp(om * up) - 1.0) / om, kind, t, n, up
            if mx > s:
                s = mx
                tp, hi = _levels(s, code, sc, ygrid, zs, yab, astar, bstar, sgrid, atrail)
        if hi >= bl and x > hi:
            if x1 <= hi:
                return math.exp(-R) * (math.exp(om * hi) - 1.0) / om, _band_kind(s, code, sc), t, n, hi
            if 2.0 * (x - hi) * (x1 - hi) < 40.0 * var2:
                u, state = _uniform(state)
                if u < math.exp(-4.0 * (x - hi) * (x1 - hi) / var2):
                    return math.exp(-R) * (math.exp(om * hi) - 1.0) / om, _band_kind(s, code, sc), t, n, hi
        x = x1
        while next_jump <= t:
            j, state = _jump_size(state, cum, eta)
            x -= j
            u, state = _uniform(state)
            next_jump += -math.log(u) / lam
        if rec:
            trace[n, 0], trace[n, 1], trace[n, 2], trace[n, 3] = t, x, s, R
            trace[n, 4] = hi if hi > -np.inf and hi < np.inf and code == 2 else np.nan
        if x >= tp:
            return math.exp(-R) * (math.exp(om * x) - 1.0) / om, 1, t, n, x
        if bl <= x <= hi:
            return math.exp(-R) * (math.exp(om * x) - 1.0) / om, _band_kind(s, code, sc), t, n, x
        if math.exp(-R) * _w0(x, vl[3], vl[4], vl[5], om) < cutoff:
            break
    return math.exp(-R) * _vlow(x, vl[0], vl[1], vl[2], om), 0, t, n, np.nan


@njit(cache=True)
def _run_many(x0, s0, seed, n_paths, antithetic, mu, sigma, lam, cum, eta, r, q, om, dt, nmax, cutoff,
              code, sc, ygrid, zs, yab, astar, bstar, sgrid, atrail, vl):
    pay = np.empty(n_paths)
    kind = np.empty(n_paths, dtype=np.int64)
    tstop = np.empty(n_paths)
    dummy = np.empty((1, 5))
    for i in range(n_paths):
        if antithetic:
            stream = _stream(seed, i // 2)
            sign = 1.0 if i % 2 == 0 else -1.0
        else:
            stream = _stream(seed, i)
            sign = 1.0
        p, k, ts, _, _ = _run_path(x0, s0, stream, sign, mu, sigma, lam, cum, eta, r, q, om, dt, nmax, cutoff,
                                code, sc, ygrid, zs, yab, astar, bstar, sgrid, atrail, vl, False, dummy)
        pay[i] = p
        kind[i] = k
        tstop[i] = ts
    return pay, kind, tstop


@njit(cache=True)
def _exit_many(x0, a, b, y, seed, n_paths, mu, sigma, lam, cum, eta, r, q, dt, nmax):
    """Payoffs ``exp(-A_T) 1{T_b+ < T_a-}`` with ``A_t = int (r + q 1{X < y}) dt``."""
    out = np.empty(n_paths)
    sq = sigma * math.sqrt(dt)
    var2 = 2.0 * sigma * sigma * dt
    for i in range(n_paths):
        state = _stream(seed, i // 2)
        sign = 1.0 if i % 2 == 0 else -1.0
        x = x0
        R = 0.0
        next_jump = np.inf
        if lam > 0:
            u, state = _uniform(state)
            next_jump = -math.log(u) / lam
        val = 0.0
        has_spare = False
        spare = 0.0
        for n in range(1, nmax + 1):
            if has_spare:
                z = spare
                has_spare = False
            else:
                z, spare, state = _normal_pair(state)
                has_spare = True
            x1 = x + mu * dt + sq * sign * z
            R += (r + q * (1.0 if x < y else 0.0)) * dt
            if x1 >= b:
                val = math.exp(-R)
                break
            if x1 <= a:
                break
            if 2.0 * (b - x) * (b - x1) < 40.0 * var2:
                u, state = _uniform(state)
                if u < math.exp(-4.0 * (b - x) * (b - x1) / var2):
                    val = math.exp(-R)
                    break
            if 2.0 * (x - a) * (x1 - a) < 40.0 * var2:
                u, state = _uniform(state)
                if u < math.exp(-4.0 * (x - a) * (x1 - a) / var2):
                    break
            x = x1
            t = n * dt
            while next_jump <= t:
                j, state = _jump_size(state, cum, eta)
                x -= j
                u, state = _uniform(state)
                next_jump += -math.log(u) / lam
            if x <= a or R > 50.0:
                break
        out[i] = val
    return out


@njit(cache=True)
def _terminal_many(x0, T, seed, n_paths, mu, sigma, lam, cum, eta):
    """Exact ``X_T`` samples for distributional checks."""
    out = np.empty(n_paths)
    for i in range(n_paths):
        state = _stream(seed, i)
        z, _, state = _normal_pair(state)
        x = x0 + mu * T + sigma * math.sqrt(T) * z
        if lam > 0:
            u, state = _uniform(state)
            clock = -math.log(u) / lam
            while clock <= T:
                j, state = _jump_size(state, cum, eta)
                x -= j
                u, state = _uniform(state)
                clock += -math.log(u) / lam
        out[i] = x
    return out


# python side


def _model_arrays(model: LevyModel):
    lam = model.jumps.rates
    eta = model.jumps.intensities
    total = float(lam.sum())
    cum = np.cumsum(lam) / total if total > 0 else np.ones(1)
    if not len(eta):
        eta = np.ones(1)
    return float(model.mu), float(model.sigma), total, cum, eta


@dataclass
class Strategy:
    """Tabulated selling rule in internal (shifted) units."""

    code: int
    scalars: np.ndarray
    ygrid: np.ndarray = field(default_factory=lambda: np.zeros(2))
    zs: np.ndarray = field(default_factory=lambda: np.zeros(2))
    yab: np.ndarray = field(default_factory=lambda: np.zeros(2))
    astar: np.ndarray = field(default_factory=lambda: np.zeros(2))
    bstar: np.ndarray = field(default_factory=lambda: np.zeros(2))
    sgrid: np.ndarray = field(default_factory=lambda: np.zeros(2))
    atrail: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def tables(self):
        return (self.code, self.scalars, self.ygrid, self.zs, self.yab, self.astar, self.bstar,
                self.sgrid, self.atrail)

    def levels(self, s: float) -> tuple[float, float]:
        return _levels(s, *self.tables())


def _scalars(p: Problem, d0: float, s_tilde=np.nan, s_hat=np.inf, s_c=np.nan):
    return np.array([p.b_low, p.c, d0, s_tilde, s_hat, s_c, p.z_c()], dtype=float)


def optimal_strategy(surface: ValueSurface, n_table: int = 2000, n_ab: int = 240) -> Strategy:
    """Tabulate the optimal rule of a solved surface."""
    p = surface.p
    th = surface.theorem
    if th == MILD:
        y = np.linspace(p.z_c() - p.c - 1e-9, p.b_low, n_table)
        return Strategy(CODE_MILD, _scalars(p, p.z_c()), y, np.array([p.z_star(v) for v in y]))
    yt, yh = p.y_tilde, p.y_hat
    # a*, b* steepen towards y_hat, so cluster the table there
    u = np.linspace(0.0, 1.0, n_ab)
    yab = yt + (yh - yt) * (1.0 - (1.0 - u) ** 2)
    yab[-1] = yh - 1e-9 * (yh - yt)
    ab = np.array([p.a_b_star(v) for v in yab])
    if th == SEVERE_HIGH:
        y = np.linspace(p.z_c() - p.c - 1e-9, yt, n_table)
        zs = np.array([p.z_star(min(v, yt)) for v in y])
        return Strategy(CODE_HIGH, _scalars(p, p.z_c(), yt + p.c, yh + p.c), y, zs, yab, ab[:, 0], ab[:, 1])
    sg = np.linspace(surface.s_c, surface.d0, n_table)
    at = surface.curve(sg + p.shift) - p.shift
    return Strategy(CODE_LOW, _scalars(p, surface.d0, np.nan, yh + p.c, surface.s_c),
                    yab=yab, astar=ab[:, 0], bstar=ab[:, 1], sgrid=sg, atrail=at)


def take_profit_strategy(p: Problem, level: float) -> Strategy:
    """Sell at the first passage above ``level`` (internal units)."""
    return Strategy(CODE_FIXED, _scalars(p, level))


def _vl(p: Problem):
    phi_r = p.kernel.phi_r
    b0 = math.log(phi_r / (phi_r - p.om)) / p.om
    return np.array([p.b_low, p.phi_rq, p.u_b, b0, phi_r, float(p.U(b0))])


def _check_antithetic(cfg: SimConfig) -> int:
    n = cfg.n_paths
    if cfg.antithetic and n % 2:
        n += 1
    return n


def run_strategy(p: Problem, strategy: Strategy, x0: float, s0: float, cfg: SimConfig) -> SimResult:
    """Execute a tabulated strategy from internal state ``(x0, s0)``; values in caller's units."""
    if x0 > s0:
        raise ValueError("need x0 <= s0")
    n = _check_antithetic(cfg)
    horizon = cfg.horizon_for(p.r)
    nmax = int(math.ceil(horizon / cfg.dt))
    mu, sigma, lam, cum, eta = _model_arrays(p.model)
    pay, kind, tstop = _run_many(float(x0), float(s0), np.uint64(cfg.seed), n, cfg.antithetic, mu, sigma, lam,
                                 cum, eta, p.r, p.q, p.om, cfg.dt, nmax, cfg.cutoff, *strategy.tables(), _vl(p))
    pay = pay * p.scale
    samples = pay.reshape(-1, 2).mean(axis=1) if cfg.antithetic else pay
    est = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(len(samples))) if len(samples) > 1 else 0.0
    stopped = kind != OUT_HORIZON
    counts = {OUTCOME_NAMES[k]: int(np.sum(kind == k)) for k in OUTCOME_NAMES}
    tail = math.exp(-p.r * horizon) * float(np.max(np.abs(pay[~stopped]))) if np.any(~stopped) else 0.0
    warnings = []
    if est != 0 and tail > 0.05 * abs(est):
        warnings.append("horizon too short: tail bias bound exceeds 5% of the estimate")
    mean_t = float(tstop[stopped].mean()) if np.any(stopped) else float("nan")
    return SimResult(est, se, n, int(stopped.sum()), mean_t, counts, tail, warnings)


def estimate_value(surface: ValueSurface, x0: float, s0: float, cfg: SimConfig,
                   strategy: Strategy | None = None) -> SimResult:
    """Monte Carlo value of the optimal rule (or ``strategy``) from ``(x0, s0)``."""
    p = surface.p
    strategy = optimal_strategy(surface) if strategy is None else strategy
    return run_strategy(p, strategy, x0 - p.shift, s0 - p.shift, cfg)


def simulate_path(surface: ValueSurface, x0: float, s0: float, cfg: SimConfig, strategy: Strategy | None = None,
                  path_index: int = 0):
    """One traced path under the optimal rule; returns ``(trace, event)`` in caller's units."""
    p = surface.p
    strategy = optimal_strategy(surface) if strategy is None else strategy
    sh = p.shift
    horizon = cfg.horizon_for(p.r)
    nmax = int(math.ceil(horizon / cfg.dt))
    trace = np.full((nmax + 1, 5), np.nan)
    mu, sigma, lam, cum, eta = _model_arrays(p.model)
    # numba hands the state back as a Python int; keep it unsigned so the mixer stays in integer arithmetic
    stream = np.uint64(_stream(np.uint64(cfg.seed), np.uint64(path_index)))
    pay, kind, t, steps, level = _run_path(float(x0 - sh), float(s0 - sh), stream, 1.0, mu, sigma, lam, cum, eta,
                                    p.r, p.q, p.om, cfg.dt, nmax, 0.0, *strategy.tables(), _vl(p), True, trace)
    trace = trace[: steps + 1]
    trace[:, [1, 2, 4]] += sh
    level = None if kind == OUT_HORIZON else float(level) + sh
    event = dict(time=float(t), type=OUTCOME_NAMES[int(kind)], level=level,
                 discounted_payoff=float(pay) * p.scale, steps=int(steps))
    return trace, event


def write_trace_csv(path, trace):
    return write_csv(path, ["t", "x", "xbar", "clock", "trailing"], trace)


def replay_path(surface: ValueSurface, seed: int, x0: float | None = None, dt: float = 1e-3,
                   max_tries: int = 1):
    """Trace one low-tolerance path started on the diagonal ``X0 = Xbar0`` (default 2)."""
    if surface.theorem != SEVERE_LOW:
        raise ValueError("replay needs the severe-anxiety, low-tolerance regime")
    x0 = 2.0 if x0 is None else x0
    cfg = SimConfig(dt=dt, seed=seed, n_paths=1, antithetic=False)
    return simulate_path(surface, x0, x0, cfg)


# fluctuation identities by simulation


def exit_estimate(model: LevyModel, x: float, a: float, b: float, y: float, r: float, q: float,
                  n_paths: int, seed: int = 0, dt: float = 1e-3, horizon: float = 400.0) -> tuple[float, float]:
    """MC of ``E_x[exp(-A^y_{T_b+}) 1{T_b+ < T_a-}]``; ``a = -inf`` drops the lower exit."""
    mu, sigma, lam, cum, eta = _model_arrays(model)
    n = n_paths + (n_paths % 2)
    pay = _exit_many(float(x), float(a), float(b), float(y), np.uint64(seed), n, mu, sigma, lam, cum, eta,
                     float(r), float(q), float(dt), int(horizon / dt))
    pairs = pay.reshape(-1, 2).mean(axis=1)
    return float(pairs.mean()), float(pairs.std(ddof=1) / math.sqrt(len(pairs)))


def terminal_samples(model: LevyModel, x0: float, T: float, n_paths: int, seed: int = 0):
    mu, sigma, lam, cum, eta = _model_arrays(model)
    return _terminal_many(float(x0), float(T), np.uint64(seed), int(n_paths), mu, sigma, lam, cum, eta)
