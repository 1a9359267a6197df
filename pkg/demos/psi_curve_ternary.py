"""
Trade-off curve for a ternary target through a binary relay
===========================================================

The target is a noisy 3-ary channel, while the symbol the encoder sends
is binary. We compute the optimized curve over a grid of entropy budgets
``t`` and compare it to two easy upper bounds: the best constant output
and the best symbol-by-symbol relay.
"""

import math

import numpy as np

from seqsynth import bounds as bd

pi_YgX = [[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]]
target = bd.P2PTarget([1 / 3, 1 / 3, 1 / 3], pi_YgX, B_size=2)
settings = bd.OptimizerSettings(restarts=16, seed=0)

# Below -log|B| the constraint cannot be met and the value is +inf.
grid = np.linspace(-math.log(2) + 0.05, 1.0, 8)
curve = bd.psi_curve(target, grid, settings=settings)

cap = bd.lemma1_upper_bound(target)
relay = bd.delta_symbolwise(target, settings)
print(f"constant-output cap   {cap:.4f}")
print(f"symbol-wise relay     {relay.value:.4f}")
for t, v in curve:
    print(f"t = {t:+.3f}   value = {v:.5f}")

# With no common randomness budget (H_W = 0) the operational value is the
# curve evaluated at t = 0.
res = bd.delta_p2p(target, settings=settings)
print(f"zero-budget value     {res.value:.5f}  (slack {res.constraint_slack:.1e})")
