"""Exact polynomial form of E(s) = exp(-s B) and C(t) = int_0^t E A E^T ds.

Because B is nilpotent of index r+1, the integrand E(s) A E(s)^T is a matrix
polynomial of degree at most 2r and C(t) one of degree at most 2r+1.  Both
are computed coefficient-by-coefficient, so no quadrature enters C(t) itself.
C(t) is strictly positive definite for t > 0 and strictly negative definite
for t < 0; its determinant is a polynomial that is positive and increasing
on t > 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.polynomial import polynomial as npoly

from .errors import IllConditionedWarning, SingularAtZero
from .operators import OperatorSpec

__all__ = [
    "MatrixPolynomial",
    "exponential_polynomial",
    "covariance_polynomial",
    "covariance_at",
    "covariance_inverse_at",
    "det_covariance_polynomial",
    "CovarianceModel",
]


@dataclass(frozen=True, eq=False)
class MatrixPolynomial:
    """P(t) = sum_k t^k M_k with square-matrix coefficients, stacked in ``coeffs``."""

    coeffs: np.ndarray  # shape (degree+1, n, n)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValueError("coefficients must be a stack of square matrices")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    def __call__(self, t):
        """Evaluate by Horner's scheme; ``t`` may be scalar or an array.

        Array input of shape (m,) returns shape (m, n, n).
        """
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            out = self.coeffs[-1].copy()
            for k in range(self.degree - 1, -1, -1):
                out *= t
                out += self.coeffs[k]
            return out
        tt = t[:, None, None]
        out = np.broadcast_to(self.coeffs[-1], (t.size,) + self.coeffs[-1].shape).copy()
        for k in range(self.degree - 1, -1, -1):
            out = out * tt + self.coeffs[k]
        return out

    def derivative(self) -> "MatrixPolynomial":
        if self.degree == 0:
            return MatrixPolynomial(np.zeros((1,) + self.coeffs.shape[1:]))
        d = self.coeffs[1:] * np.arange(1, self.degree + 1)[:, None, None]
        return MatrixPolynomial(d)


def exponential_polynomial(spec: OperatorSpec) -> MatrixPolynomial:
    """E(s) = sum_{k<=r} (-s)^k B^k / k! as an exact matrix polynomial."""
    coeffs = np.stack(
        [(-1.0) ** k / math.factorial(k) * Bk for k, Bk in enumerate(spec.B_powers)]
    )
    return MatrixPolynomial(coeffs)


def covariance_polynomial(spec: OperatorSpec) -> MatrixPolynomial:
    """C(t) as an exact matrix polynomial; C(0) = 0, all coefficients symmetric."""
    r = spec.r
    A = spec.A
    # integrand coefficient of s^m: (-1)^m sum_{k+l=m} B^k A (B^T)^l / (k! l!)
    G = [np.zeros((spec.n, spec.n)) for _ in range(2 * r + 1)]
    for k, Bk in enumerate(spec.B_powers):
        for l, Bl in enumerate(spec.B_powers):
            G[k + l] += (-1.0) ** (k + l) / (math.factorial(k) * math.factorial(l)) * (
                Bk @ A @ Bl.T
            )
    coeffs = np.zeros((2 * r + 2, spec.n, spec.n))
    for m, Gm in enumerate(G):
        Cm = Gm / (m + 1)
        coeffs[m + 1] = 0.5 * (Cm + Cm.T)
    return MatrixPolynomial(coeffs)


def covariance_at(t: float, spec: OperatorSpec) -> np.ndarray:
    """C(t) evaluated by Horner's scheme."""
    return covariance_polynomial(spec)(t)


def _spd_inverse(M: np.ndarray) -> np.ndarray:
    c, low = scipy.linalg.cho_factor(M, lower=True)
    inv = scipy.linalg.cho_solve((c, low), np.eye(M.shape[0]))
    return 0.5 * (inv + inv.T)


def covariance_inverse_at(t: float, spec: OperatorSpec) -> np.ndarray:
    """C(t)^{-1} via symmetric (Cholesky) factorization; sign-aware for t < 0.

    Raises SingularAtZero at t = 0.  Condition numbers above 1e14 are reported
    through an IllConditionedWarning but the inverse is still returned.
    """
    if t == 0.0:
        raise SingularAtZero("C(0) = 0 has no inverse")
    C = covariance_at(t, spec)
    sign = 1.0 if t > 0 else -1.0
    inv = sign * _spd_inverse(sign * C)
    cond = np.linalg.cond(C)
    if cond > 1e14:
        warnings.warn(
            f"C({t:g}) has condition number {cond:.3g} > 1e14", IllConditionedWarning
        )
    return inv


def _poly_matrix_det(cols: list[list[np.ndarray]]) -> np.ndarray:
    """Determinant of a matrix with 1-d polynomial-coefficient entries.

    Cofactor expansion along the first row; fine for n <= 4.
    """
    m = len(cols)
    if m == 1:
        return cols[0][0]
    det = np.zeros(1)
    for j in range(m):
        minor = [[cols[i][k] for k in range(m) if k != j] for i in range(1, m)]
        term = npoly.polymul(cols[0][j], _poly_matrix_det(minor))
        det = npoly.polyadd(det, term if j % 2 == 0 else -term)
    return det


def det_covariance_polynomial(spec: OperatorSpec) -> np.ndarray:
    """det C(t) as a 1-d polynomial coefficient array (ascending powers).

    Exact cofactor expansion over the polynomial ring for n <= 4; evaluation
    plus interpolation at 2 n (2r+1) + 1 points otherwise.
    """
    C = covariance_polynomial(spec)
    n = spec.n
    deg_entry = C.degree
    if n <= 4:
        entries = [
            [np.trim_zeros(C.coeffs[:, i, j], "b") if np.any(C.coeffs[:, i, j]) else np.zeros(1)
             for j in range(n)]
            for i in range(n)
        ]
        det = _poly_matrix_det(entries)
    else:
        deg = n * deg_entry
        npts = 2 * n * deg_entry + 1
        ts = np.linspace(-1.0, 1.0, npts)
        vals = np.linalg.det(C(ts))
        det = npoly.polyfit(ts, vals, deg)
        det[np.abs(det) < 1e-12 * np.abs(det).max()] = 0.0
    det = np.trim_zeros(np.atleast_1d(det), "b")
    if det.size == 0:
        det = np.zeros(1)
    # pad so the degree slot n*(2r+1) always exists
    full = np.zeros(n * deg_entry + 1)
    full[: det.size] = det
    return full


class CovarianceModel:
    """Bundle of the polynomial data for one operator, evaluated many times.

    Provides cached E(s), C(t), det C(t) and their evaluations; this is the
    working object the fundamental-solution and geometry layers share.
    """

    def __init__(self, spec: OperatorSpec):
        self.spec = spec
        self.E_poly = exponential_polynomial(spec)
        self.C_poly = covariance_polynomial(spec)
        self.detC_poly = det_covariance_polynomial(spec)
        self.detC_deriv = npoly.polyder(self.detC_poly)

    def E(self, s):
        return self.E_poly(s)

    def C(self, t):
        return self.C_poly(t)

    def detC(self, t):
        return npoly.polyval(t, self.detC_poly)

    def C_inverse(self, t: float) -> np.ndarray:
        if t == 0.0:
            raise SingularAtZero("C(0) = 0 has no inverse")
        sign = 1.0 if t > 0 else -1.0
        return sign * _spd_inverse(sign * self.C_poly(t))

    def C_cholesky(self, t: float) -> np.ndarray:
        """Lower Cholesky factor of C(t) for t > 0."""
        if t <= 0.0:
            raise SingularAtZero("Cholesky factor requires t > 0")
        return np.linalg.cholesky(self.C_poly(t))
