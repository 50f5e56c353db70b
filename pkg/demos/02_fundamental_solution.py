"""Fundamental solution and mean-value kernel, from the covariance polynomials.

Shows the exact matrix polynomials E(s) = exp(-sB) and C(t), evaluates the
Gaussian fundamental solution, verifies its homogeneity degree 2 - Q and its
unit spatial mass numerically, and inspects the kernel W and its zero set.
"""

import math

import numpy as np

import kolpot as kp

proto = kp.kolmogorov_prototype()
ev = kp.GammaEvaluator(proto)

E = kp.exponential_polynomial(proto)
C = kp.covariance_polynomial(proto)
print("E(s) coefficients (I and -B):")
print(E.coeffs)
print("\nC(t) = t*M1 + t^2*M2 + t^3*M3 with")
print(C.coeffs[1:], sep="\n")
print("\ndet C(t) coefficients:", kp.det_covariance_polynomial(proto))

z = proto.point([0.0, 0.0], 1.0)
print(f"\ngamma((0,0),1) = {ev.gamma(z):.10f}  (= sqrt(3)/(2 pi) = "
      f"{math.sqrt(3)/(2*math.pi):.10f})")
print("gamma vanishes for t <= 0:", ev.gamma(proto.point([1.0, 1.0], -0.5)))

lam = 1.3
zz = proto.point([0.4, -0.1], 0.8)
print(f"\nhomogeneity: gamma(dilate) / (lam^(2-Q) gamma) = "
      f"{ev.gamma(kp.dilate(lam, zz, proto)) / (lam ** (2 - proto.Q) * ev.gamma(zz)):.12f}")

# spatial mass by tensor Gauss-Hermite, treating gamma as a black box
nodes, weights = np.polynomial.hermite.hermgauss(48)
t = 0.7
scales = 2.0 * np.sqrt(np.diag(ev.cov.C(t)))
G = np.meshgrid(*[nodes * s for s in scales], indexing="ij")
X = np.stack([g.ravel() for g in G], axis=1)
u2 = sum((X[:, i] / scales[i]) ** 2 for i in range(2))
W2 = np.prod(np.stack([w.ravel() for w in np.meshgrid(weights, weights, indexing="ij")],
                      axis=1), axis=1)
mass = float(W2 @ (ev.gamma_slice(X, t) * np.exp(u2))) * float(np.prod(scales))
print(f"spatial mass at t={t}: {mass:.10f}")

print(f"\nkernel W((1,0),1) = {ev.W(proto.point([1.0, 0.0], 1.0))} (exactly 4)")
x_zero = ev.cov.C(1.0) @ np.array([0.0, 1.0])
print(f"W vanishes on C(t) ker(A): W({x_zero}, 1) = {ev.W(proto.point(x_zero, 1.0)):.2e}")
