"""
The adaptive temperature
========================

The softmax temperature of each row is chosen from the local gap (distance
to the second-nearest point minus distance to the nearest) so that, when all
other entries sit exactly one gap away, the nearest point receives
probability ``p_min``. The temperature does not depend on the overall scale.
"""

import numpy as np

from apml import ApmlConfig, adaptive_temperature, directional_softmax, local_gap

costs = np.array([1.0, 2.0, 2.0])
c_min, gap = local_gap(costs, delta=1e-12)
t = adaptive_temperature(gap, k=3, p_min=0.8)
print(f"c_min={c_min} gap={gap:.6f} T={t:.6f} (log 8 = {np.log(8):.6f})")

cfg = ApmlConfig(p_min=0.8, delta=1e-12)
print("probabilities:", directional_softmax(costs[None, :], "row", cfg)[0])

# scale invariance: multiplying every cost by 100 leaves the row unchanged
print("scaled x100:  ", directional_softmax(100 * costs[None, :], "row", cfg)[0])

# a generic row: the argmin keeps at least p_min when the others are farther
row = np.array([[0.3, 0.5, 0.9, 1.4, 0.55]])
p = directional_softmax(row, "row", ApmlConfig(p_min=0.9))[0]
print("generic row:", np.round(p, 4), "argmin mass", p[row.argmin()])
