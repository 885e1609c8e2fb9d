"""
Severe anxiety, low tolerance: the trailing stop
================================================

Shrinking the tolerance to c = 0.3568 < c_tilde changes the middle band into
a trailing stop.  Once the running maximum reaches s_c the investor keeps a
stop-loss at a(s), which ratchets up with s until it meets a*(y_c) at
b*(y_c).  Then replay one path and look at how it ended.
"""

import numpy as np

from drawdown_selling import solve
from drawdown_selling.cli import load_config
from drawdown_selling.simulate import SimConfig, simulate_path
from drawdown_selling.value_function import ValueSurface

cfg = load_config("severe_low_tolerance")
ts = solve(cfg.model, cfg.prefs)
print(f"s_c = {ts.s_c:.4f}   b*(y_c) = {ts.b_star_yc:.4f}   a*(y_c) = {ts.a_star_yc:.4f}")

for s in np.linspace(ts.s_c, ts.b_star_yc, 6):
    print(f"  a({s:.4f}) = {ts.curve(s):.4f}")
ts.curve.to_csv("trailing_curve.csv")

surface = ValueSurface(ts)
print(surface.classify_state(2.6, 3.5))

for seed in range(4):
    trace, event = simulate_path(surface, 2.0, 2.0, SimConfig(seed=seed, n_paths=1, antithetic=False))
    armed = trace[~np.isnan(trace[:, 4])]
    when = f"armed at t = {armed[0, 0]:.3f}" if len(armed) else "never armed"
    print(f"seed {seed}: {event['type']:>17} at t = {event['time']:8.3f}, level {event['level']:.4f} ({when})")
