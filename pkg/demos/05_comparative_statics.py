"""
Comparative statics
===================

Seven configurations around a benchmark (risk aversion, volatility and jump
size each moved up and down).  The columns are the lowest sale level, the
take-profit level where the trailing stop ends, where it begins, and the
level beyond which the investor sells at once.
"""

from drawdown_selling.cli import compstats_rows

print(f"{'row':<14} {'b_low':>8} {'b*(y_c)':>8} {'s_c':>8} {'y_hat+c':>8}")
for row in compstats_rows():
    if row["status"] != "ok":
        print(f"{row['row']:<14} {row['status']}")
        continue
    print(f"{row['row']:<14} {row['b_low']:8.4f} {row['b_star_yc']:8.4f} {row['s_c']:8.4f} {row['y_hat_plus_c']:8.4f}")
