"""Cake-wavelet bank: partition of unity and which orientation lights up for a bar.

Run: python demos/orientation_scores.py
"""

import numpy as np

from topovessel.acceptance import line_bar
from topovessel.cakewavelets import build_bank, orientation_scores, partition_error

bank = build_bank()
print(f"{len(bank.thetas)} orientations, kernels {bank.kernels.shape[1:]}, partition error {partition_error(bank):.1e}")

n = len(bank.thetas)
for j in (0, 3, 6, 9):
    theta = bank.thetas[j]
    scores = orientation_scores(1.0 - line_bar(theta), bank)
    core = line_bar(theta, width=0.5, length=16) > 0
    mean = scores[:, core].mean(axis=1)
    best = int(np.argmax(mean))
    print(f"dark bar at {np.degrees(theta):5.1f} deg -> strongest kernel {best:2d} ({np.degrees(bank.thetas[best]):5.1f} deg)")
# kernels answer to lines perpendicular to their angle, and repeat every pi
print(f"expected kernel index: bar index + {n // 4}, modulo {n // 2}")
