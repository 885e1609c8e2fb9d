"""
Mild anxiety: a single take-profit boundary
============================================

With q = 0.003 the investor only ever places take-profit orders.  Below the
diagonal threshold z_c they wait; above it they sell as soon as the price
reaches z*(s - c).
"""

from drawdown_selling.cli import load_config
from drawdown_selling.value_function import ValueSurface, write_grid_csv
from drawdown_selling import solve

cfg = load_config("mild_take_profit")
ts = solve(cfg.model, cfg.prefs)
print("theorem:", ts.theorem)
print(f"H* = {ts.regime['h_star']:.4f}, b_low = {ts.b_low:.4f}, z_c = {ts.z_c:.4f}")

surface = ValueSurface(ts)
c = cfg.prefs.c
for s in (4.0, 4.3, 4.6, 5.0):
    y = s - c
    print(f"s = {s:.1f}: sell once x >= {max(ts.z_star(y), ts.b_low):.4f}" if s >= ts.z_c
          else f"s = {s:.1f}: hold, target z_c")

rows = surface.region_grid((3, 5, 3, 5), 100)
write_grid_csv("mild_region.csv", rows)
print(f"wrote {len(rows)} grid points to mild_region.csv")
