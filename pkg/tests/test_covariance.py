
import numpy as np
import pytest

import kolpot as kp
from kolpot.covariance import CovarianceModel
from kolpot.errors import SingularAtZero


def test_exponential_polynomial_prototype(proto):
    E = kp.exponential_polynomial(proto)
    assert E.degree == 1
    assert np.array_equal(E.coeffs[0], np.eye(2))
    assert np.array_equal(E(1.0), np.array([[1.0, 0.0], [-1.0, 1.0]]))
    # inverse as a polynomial identity: E(s) E(-s) = I
    for s in (-2.0, 0.3, 5.0):
        assert np.allclose(E(s) @ E(-s), np.eye(2), atol=1e-14)


def test_exponential_heat_is_identity(heat2):
    E = kp.exponential_polynomial(heat2)
    assert E.degree == 0
    assert np.array_equal(E(3.7), np.eye(2))


def test_determinant_of_transport_is_one(all_specs):
    for spec in all_specs.values():
        E = kp.exponential_polynomial(spec)
        for s in (-4.0, -0.5, 0.1, 2.0):
            assert np.linalg.det(E(s)) == pytest.approx(1.0, rel=1e-13)


def test_covariance_prototype_exact(proto):
    C = kp.covariance_polynomial(proto)
    # coefficients of t, t^2, t^3
    assert np.array_equal(C.coeffs[1], np.array([[1.0, 0.0], [0.0, 0.0]]))
    assert np.array_equal(C.coeffs[2], np.array([[0.0, -0.5], [-0.5, 0.0]]))
    assert np.array_equal(C.coeffs[3], np.array([[0.0, 0.0], [0.0, 1.0 / 3.0]]))
    assert np.allclose(C(1.0), [[1.0, -0.5], [-0.5, 1.0 / 3.0]], rtol=0, atol=0)


def test_covariance_heat(heat2):
    C = kp.covariance_polynomial(heat2)
    for t in (0.25, 1.0, 10.0):
        assert np.allclose(C(t), t * np.eye(2), rtol=1e-15)


def test_covariance_inverse_prototype(proto):
    Cinv = kp.covariance_inverse_at(1.0, proto)
    assert np.allclose(Cinv, [[4.0, 6.0], [6.0, 12.0]], rtol=1e-12)
    with pytest.raises(SingularAtZero):
        kp.covariance_inverse_at(0.0, proto)


def test_covariance_signs(all_specs):
    for spec in all_specs.values():
        C = kp.covariance_polynomial(spec)
        for t in np.logspace(-3, 3, 13):
            assert np.linalg.eigvalsh(C(t)).min() > 0.0
            assert np.linalg.eigvalsh(C(-t)).max() < 0.0


def test_covariance_matches_integrand_derivative(all_specs):
    # d/dt C(t) = E(t) A E(t)^T, checked by central differences
    rng = np.random.default_rng(7)
    for spec in all_specs.values():
        C = kp.covariance_polynomial(spec)
        E = kp.exponential_polynomial(spec)
        for _ in range(100):
            t = rng.uniform(-2.0, 2.0)
            h = 1e-5
            fd = (C(t + h) - C(t - h)) / (2.0 * h)
            exact = E(t) @ spec.A @ E(t).T
            assert np.abs(fd - exact).max() < 1e-8 * (1.0 + np.abs(exact).max())


def test_det_covariance_polynomials(heat1, heat2, proto, chain):
    d1 = kp.det_covariance_polynomial(heat1)
    assert np.allclose(d1, [0.0, 1.0])
    d2 = kp.det_covariance_polynomial(heat2)
    assert np.allclose(d2, [0.0, 0.0, 1.0])
    dp = kp.det_covariance_polynomial(proto)
    expected = np.zeros(7)
    expected[4] = 1.0 / 12.0
    assert np.allclose(dp, expected, rtol=1e-14, atol=1e-16)
    dc = kp.det_covariance_polynomial(chain)
    assert dc[5] == pytest.approx(1.0 / 12.0, rel=1e-12)
    assert np.allclose(np.delete(dc, 5), 0.0, atol=1e-16)


def test_det_is_pure_power_of_homogeneous_degree(all_specs):
    # the dilation scaling of C forces det C(t) = det C(1) * t^(Q-2) on t > 0
    for spec in all_specs.values():
        d = kp.det_covariance_polynomial(spec)
        nz = np.nonzero(np.abs(d) > 1e-14 * np.abs(d).max())[0]
        assert list(nz) == [spec.Q - 2]


def test_det_interpolation_path_large_n():
    # n = 5 goes through the evaluation + interpolation branch
    spec = kp.validate_operator(5, [5], np.eye(5))
    d = kp.det_covariance_polynomial(spec)
    assert d[5] == pytest.approx(1.0, rel=1e-10)
    assert np.allclose(np.delete(d, 5), 0.0, atol=1e-9)


def test_covariance_at_point_and_value(heat2, proto):
    assert np.allclose(kp.covariance_at(2.0, heat2), 2.0 * np.eye(2))
    assert np.allclose(kp.covariance_inverse_at(2.0, heat2), 0.5 * np.eye(2))
    model = CovarianceModel(proto)
    assert model.detC(1.0) == pytest.approx(1.0 / 12.0, rel=1e-14)
    # negative times invert through the sign-split factorization
    Cm = model.C_inverse(-1.0)
    assert np.allclose(Cm @ model.C(-1.0), np.eye(2), atol=1e-10)


def test_ill_conditioned_warning(proto):
    # the prototype covariance has scales t and t^3/3, so the condition
    # number grows like 3/t^2 and crosses 1e14 near t = 1e-7
    with pytest.warns(kp.errors.IllConditionedWarning):
        kp.covariance_inverse_at(1e-8, proto)
