"""
Severe anxiety, high tolerance
==============================

With q = 1 the investor is severely anxious.  A generous tolerance c = 1.8
(above the critical c_tilde) still leads to a three-part rule:

* take-profit at z*(s - c) for z_c <= s < y_tilde + c,
* a two-sided stop-loss/take-profit band for y_tilde + c <= s < y_hat + c,
* sell immediately anywhere above b_low once s >= y_hat + c.
"""

from collections import Counter

from drawdown_selling import solve
from drawdown_selling.cli import load_config
from drawdown_selling.value_function import ValueSurface

cfg = load_config("severe_high_tolerance")
ts = solve(cfg.model, cfg.prefs)
for key in ("b_low", "z_c", "c_tilde", "y_tilde", "y_hat"):
    print(f"{key:>8} = {getattr(ts, key):.4f}")

c = cfg.prefs.c
for y in (ts.y_tilde, 0.5 * (ts.y_tilde + ts.y_hat), ts.y_hat - 0.05):
    print(f"y = {y:.4f}: stop-loss band [{ts.b_low:.4f}, {ts.a_star(y):.4f}], take-profit at {ts.b_star(y):.4f}")

surface = ValueSurface(ts)
labels = Counter(row[3] for row in surface.region_grid((2, 5, 2, 5), 100))
print(dict(labels))
