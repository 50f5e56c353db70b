"""The homogeneous group attached to a degenerate parabolic operator.

Builds the two-dimensional prototype d^2/dx^2 + x d/dy - d/dt, walks through
its composition law, inverses and anisotropic dilations, and checks the
homogeneous dimension against the dilation determinant.
"""

import numpy as np

import kolpot as kp

proto = kp.kolmogorov_prototype()
print("blocks:", proto.block_sizes, " spatial weights:", proto.weights)
print("homogeneous dimension Q =", proto.Q)

z = proto.point([1.0, 0.0], 0.0)
w = proto.point([0.0, 0.0], 1.0)
print("\ncomposition moves points along the drift:")
print(f"  {z} o {w} = {kp.group_compose(z, w, proto)}")

zi = kp.group_inverse(proto.point([1.0, 0.0], 1.0), proto)
print("inverse of ((1,0),1):", zi)
print("z o z^{-1} =", kp.group_compose(proto.point([1.0, 0.0], 1.0), zi, proto))

print("\nanisotropic dilation with lambda = 2:")
print("  ((1,1),1) ->", kp.dilate(2.0, proto.point([1.0, 1.0], 1.0), proto))

lam = 1.7
D = kp.dilation_matrix(lam, proto)
det_full = np.prod(np.diag(D)) * lam ** 2
print(f"\ndet of the full dilation at lambda={lam}: {det_full:.6f}"
      f"  vs lambda^Q = {lam ** proto.Q:.6f}")

rng = np.random.default_rng(0)
worst = 0.0
for _ in range(1000):
    a = proto.point(rng.standard_normal(2), rng.standard_normal())
    b = proto.point(rng.standard_normal(2), rng.standard_normal())
    c = proto.point(rng.standard_normal(2), rng.standard_normal())
    lhs = kp.group_compose(kp.group_compose(a, b, proto), c, proto)
    rhs = kp.group_compose(a, kp.group_compose(b, c, proto), proto)
    worst = max(worst, np.abs(lhs.x - rhs.x).max(), abs(lhs.t - rhs.t))
print(f"worst associativity defect over 1000 random triples: {worst:.2e}")
