"""Level-set balls: temporal depth, ellipsoidal slices, membership, export.

The ball of radius r is the superlevel set where the fundamental solution
from the center exceeds 1/r.  Every time slice is an exact ellipsoid; this
demo prints the slice data, cross-checks membership two ways, and writes a
CSV of slices for plotting.
"""

import math
import os
import tempfile

import numpy as np

import kolpot as kp

heat1 = kp.heat_operator(1)
r = math.sqrt(4.0 * math.pi)
ball = kp.lball(heat1, r)
print(f"heat ball in R^1, r = sqrt(4 pi): temporal depth s_max = {ball.s_max:.12f}")

for s in (0.1, 0.5, 0.9):
    ell = ball.slice_at(s)
    half = math.sqrt(ell.level / ell.shape[0, 0])
    print(f"  slice at depth {s}: |x| < {half:.6f} "
          f"(classical form sqrt(2 s log(1/s)) = {math.sqrt(2*s*math.log(1/s)):.6f})")

lo, hi = kp.ball_bounding_box(ball)
print(f"bounding box: x in [{lo[0]:.6f}, {hi[0]:.6f}], t in [{lo[1]:.2f}, {hi[1]:.2f}]")
print(f"the spatial half-width equals sqrt(2/e) = {math.sqrt(2/math.e):.6f}")

proto = kp.kolmogorov_prototype()
bp = kp.lball(proto, 2.0 * math.pi / math.sqrt(3.0))
print(f"\nprototype ball: s_max = {bp.s_max:.12f}")
print("slice shape matrix at s = 0.5 (tilted by the drift):")
print(bp.slice_at(0.5).shape)

rng = np.random.default_rng(1)
agree = 0
total = 0
for _ in range(5000):
    z = proto.point(rng.uniform(-2, 2, 2), rng.uniform(-1.2, 0.1))
    if bp.classify(z) == "boundary":
        continue
    s = bp.t0 - z.t
    inside_direct = bp.contains(z)
    if 0 < s < bp.s_max:
        w = bp.to_origin_frame(z)
        inside_slice = bool(bp.slice_at(s).contains(w.x[None, :])[0])
    else:
        inside_slice = False
    total += 1
    agree += inside_direct == inside_slice
print(f"\nmembership via the level set vs via slices: {agree}/{total} agree")

big = kp.ball_dilate(bp, 2.0)
print(f"dilating by 2 multiplies the radius by 2^(Q-2) = 16: {big.r / bp.r:.1f}")

path = os.path.join(tempfile.gettempdir(), "prototype_slices.csv")
kp.export_slices_csv(bp, path, count=100)
print(f"wrote 100 slices to {path}")
