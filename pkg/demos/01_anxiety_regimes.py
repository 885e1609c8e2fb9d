"""
Mild or severe anxiety?
=======================

The sign of H* decides whether the investor's drawdown anxiety changes the
shape of the selling rule.  Sweep the anxiety rate q for the exponential
jump model and watch H* cross zero.
"""

import numpy as np
from scipy.optimize import brentq

from drawdown_selling import OccupationKernel, ScaleFn, hyper_exponential
from drawdown_selling.regime import classify, h_star

model = hyper_exponential(0.18, 0.2, [(0.25, 4.0)])
r, rho = 0.18, 0.0
sf = ScaleFn(model, r)

print(f"{'q':>8} {'H*':>12} {'regime':>8} {'u_bar':>8}")
for q in np.geomspace(1e-3, 2.0, 12):
    rep = classify(OccupationKernel(model, r, q, sf), rho, model.sigma)
    print(f"{q:8.4f} {rep.h_star:12.4f} {rep.anxiety:>8} {rep.u_bar:8.4f}")

# the switch happens where H*(q) = 0
q_switch = brentq(lambda q: h_star(OccupationKernel(model, r, q, sf), rho, model.sigma), 1e-3, 2.0)
print(f"\nanxiety turns severe at q = {q_switch:.5f}")
print("just past it:", classify(OccupationKernel(model, r, q_switch * 1.01, sf), rho, model.sigma))
