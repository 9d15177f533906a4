"""How the loss terms react to a break in a vessel, and a gradient sanity check.

Run: python demos/topology_loss.py
"""

import numpy as np

from topovessel import oracles
from topovessel.acceptance import gradient_error
from topovessel.topoloss import CENTERLINE, UNIFORM, cldice_loss, dice_loss, soft_skeleton

g, skel = oracles.bar_instance()
print("soft skeleton of a 3 px bar (rows 1-3):")
print(np.round(soft_skeleton(g.astype(float))[1:4, 1:12], 2))

for label, cut_cols in (("one pixel", None), ("one column", 11)):
    cut = g.copy()
    if cut_cols is None:
        cut[2, 11] = False
    else:
        cut[:, cut_cols] = False
    d_dice = dice_loss(cut.astype(float), g) - dice_loss(g.astype(float), g)
    d_cl = cldice_loss(cut.astype(float), g, skel) - cldice_loss(g.astype(float), g, skel)
    print(f"gap of {label:<10} dDice={d_dice:.5f} dclDice={d_cl:.5f} ratio={d_cl / d_dice:.2f}")

for state in (UNIFORM, CENTERLINE):
    print(f"gradient vs finite differences ({state}): max rel error {gradient_error(0, state):.2e}")
