import math

import numpy as np
import pytest

from drawdown_selling import solve
from drawdown_selling.value_function import Action, Region, ValueSurface
from conftest import config, surface

NAMES = ["mild_take_profit", "severe_high_tolerance", "severe_low_tolerance"]


def grid_states(s, n=100):
    edges = s.band_edges()
    lo, hi = s.ts.b_low - 0.7, max(edges) + 0.5
    out = []
    for sv in np.linspace(lo, hi, n):
        xs = np.linspace(lo, hi, n)
        out.append((sv, xs[xs <= sv]))
    return out


def test_mild_diagonal_below_z_c():
    s = surface("mild_take_profit")
    p = s.p
    for sv in (3.9, 4.1, 4.25):
        expected = math.exp(-s.lam_c * (s.ts.z_c - sv)) * s.utility(s.ts.z_c)
        assert s.value(sv, sv) == pytest.approx(expected, rel=1e-12)


def test_high_tolerance_far_band_is_v_lower():
    s = surface("severe_high_tolerance")
    sv = s.ts.y_hat_plus_c + 0.2
    xs = np.linspace(1.5, sv, 30)
    np.testing.assert_allclose(s.value(xs, sv), s.v_lower(xs), rtol=1e-13)


def test_trailing_band_value_at_floor():
    s = surface("severe_low_tolerance")
    for sv in np.linspace(s.ts.s_c, s.ts.b_star_yc, 6)[:-1]:
        a = s.ts.curve(sv)
        assert s.value(a, sv) == pytest.approx(s.v_lower(a), rel=1e-10)


def test_classify_examples():
    assert surface("mild_take_profit").classify_state(4.30, 4.30).action is Action.TAKE_PROFIT
    s4 = surface("severe_low_tolerance")
    assert s4.ts.b_low <= 2.6 <= s4.ts.curve(3.5)
    lab = s4.classify_state(2.6, 3.5)
    assert (lab.action, lab.active_region) == (Action.TRAILING_STOP, Region.S1)
    for name in NAMES:
        s = surface(name)
        assert s.classify_state(s.ts.b_low - 0.01, s.ts.b_low + 2).action is Action.HOLD


def test_states_must_satisfy_x_le_s():
    with pytest.raises(ValueError):
        surface("mild_take_profit").value(4.5, 4.0)


@pytest.mark.parametrize("name", NAMES)
def test_sandwich_dominance_and_sell_iff_value_equals_payoff(name):
    s = surface(name)
    c = config(name).prefs.c
    bad = 0
    for sv, xs in grid_states(s):
        v = s.value(xs, sv)
        lo, hi, u = s.v_lower(xs), s.v_bar(xs, sv - c), s.utility(xs)
        tol = 1e-9 * np.maximum(1, np.abs(v))
        bad += np.sum(v < lo - tol) + np.sum(v > hi + tol) + np.sum(v < u - tol)
        sell = np.array([s.classify_state(x, sv).sell for x in xs])
        bad += np.sum(sell != (np.abs(v - u) <= tol))
    assert bad == 0


@pytest.mark.parametrize("name", NAMES)
def test_continuity_across_bands(name):
    s = surface(name)
    for e in s.band_edges():
        xs = np.linspace(s.ts.b_low - 0.5, e - 1e-3, 9)
        j4 = np.abs(s.value(xs, e + 1e-4) - s.value(xs, e - 1e-4))
        j5 = np.abs(s.value(xs, e + 1e-5) - s.value(xs, e - 1e-5))
        assert np.all(j4 <= 1e-3 * np.maximum(1, np.abs(s.value(xs, e))))
        # the gap shrinks linearly with the probe, so the limit is zero
        assert np.all(np.abs(j5 - (j4 - j5) / 9) < 1e-6)


@pytest.mark.parametrize("name", NAMES)
def test_neumann_condition_on_diagonal(name):
    s = surface(name)
    h = 1e-6
    for sv in np.linspace(s.ts.b_low - 0.3, max(s.band_edges()) + 0.3, 15):
        assert abs((s.value(sv, sv + h) - s.value(sv, sv)) / h) < 1e-4


def test_smooth_fit_at_take_profit():
    s = surface("mild_take_profit")
    p = s.p
    for y in (p.b_low - 0.2, p.b_low - 0.6, p.z_c() - p.c):
        z = p.z_star(y)
        # left derivative of I(x - y)/I(z - y) U(z) equals U'(z)
        assert p.kernel.Lambda(z - y) * p.U(z) == pytest.approx(math.exp(p.om * z), abs=1e-6)


def test_smooth_and_continuous_fit_two_sided():
    p = surface("severe_high_tolerance").p
    for frac in (0.3, 0.7):
        y = p.y_tilde + frac * (p.y_hat - p.y_tilde)
        a, b = p.a_b_star(y)
        pieces = p.delta_pieces(a, y)
        assert p.v_lower(b) + pieces(b) == pytest.approx(float(p.U(b)), abs=1e-7)
        assert p.v_lower_prime(b) + pieces(b, 1) == pytest.approx(math.exp(p.om * b), abs=1e-6)
        assert p.v_lower(a) + pieces(a) == pytest.approx(float(p.U(a)), abs=1e-12)


def _perturbed(name, **changes):
    cfg = config(name)
    return ValueSurface(solve(cfg.model, cfg.prefs.with_(**changes)))


@pytest.mark.parametrize("name, dq, dc", [("mild_take_profit", 0.001, 0.05), ("severe_low_tolerance", 0.1, 0.05)])
def test_monotone_in_q_and_c(name, dq, dc):
    base = surface(name)
    prefs = config(name).prefs
    more_q = _perturbed(name, q=prefs.q + dq)
    more_c = _perturbed(name, c=prefs.c + dc)
    assert more_q.theorem == base.theorem == more_c.theorem
    rng = np.random.default_rng(11)
    lo, hi = base.ts.b_low - 0.5, max(base.band_edges()) + 0.3
    for _ in range(50):
        s = rng.uniform(lo, hi)
        x = rng.uniform(lo - 0.3, s)
        v = base.value(x, s)
        tol = 1e-9 * max(1, abs(v))
        assert more_q.value(x, s) <= v + tol
        assert more_c.value(x, s) >= v - tol


def test_region_grid_shapes():
    s = surface("mild_take_profit")
    rows = s.region_grid((3.0, 3.5, 4.0, 5.0), 2)
    assert len(rows) == 4
    assert rows[0][:2] == (3.0, 4.0) and rows[-1][:2] == (3.5, 5.0)
    assert s.region_grid((4.0, 5.0, 2.0, 3.0), 10) == []


def test_mild_boundary_traces_z_star():
    s = surface("mild_take_profit")
    n = 100
    rows = s.region_grid((3, 5, 3, 5), n)
    dx = 2 / (n - 1)
    c = config("mild_take_profit").prefs.c
    by_s = {}
    for x, sv, _, lab in rows:
        by_s.setdefault(sv, []).append((x, lab))
    for sv, pts in by_s.items():
        sells = [x for x, lab in pts if lab != "Hold"]
        if sv < s.ts.z_c:
            assert not sells
        elif sells:
            assert min(sells) == pytest.approx(max(s.ts.z_star(sv - c), s.ts.b_low), abs=dx)


def test_high_tolerance_stop_loss_band():
    s = surface("severe_high_tolerance")
    rows = s.region_grid((2, 5, 2, 5), 100)
    stop = [sv for _, sv, _, lab in rows if lab == "SellStopLoss"]
    assert stop and min(stop) >= s.ts.y_tilde + config("severe_high_tolerance").prefs.c
    assert any(lab == "SellTakeProfit" for *_, lab in rows)
