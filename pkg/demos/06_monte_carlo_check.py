"""
Checking the value function by simulation
=========================================

Run the optimal rule on simulated paths and compare the average discounted
payoff with the closed-form value.  A plain take-profit at z_c is run from
the same states for contrast; it should never beat the optimum.
"""

from drawdown_selling.cli import load_config
from drawdown_selling import solve
from drawdown_selling.simulate import SimConfig, estimate_value, optimal_strategy, run_strategy, take_profit_strategy
from drawdown_selling.value_function import ValueSurface

cfg_sim = SimConfig(dt=1e-3, n_paths=20_000, seed=1)

for name, x, s in [("mild_take_profit", 4.0, 4.0), ("severe_high_tolerance", 3.2, 5.0), ("severe_low_tolerance", 3.3, 3.5)]:
    cfg = load_config(name)
    surface = ValueSurface(solve(cfg.model, cfg.prefs))
    v = surface.value(x, s)
    res = estimate_value(surface, x, s, cfg_sim, optimal_strategy(surface))
    p = surface.p
    alt = run_strategy(p, take_profit_strategy(p, p.z_c()), x - p.shift, s - p.shift, cfg_sim)
    print(f"{name} ({x}, {s}): V = {v:.4f}, MC = {res.estimate:.4f} +- {res.std_error:.4f}, "
          f"take-profit at z_c = {alt.estimate:.4f}")
    print("   outcomes:", res.order_type_counts)
