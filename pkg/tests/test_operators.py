
import numpy as np
import pytest

import kolpot as kp
from kolpot.errors import (
    BlockSizeMonotonicityViolated,
    DimensionMismatch,
    NonPositiveLambda,
    NonSymmetricA0,
    NotPositiveDefiniteA0,
    RankDeficientBlock,
)


def test_heat_operator_dimensions(heat1, heat2):
    assert heat1.Q == 3
    assert heat2.Q == 4
    assert heat1.is_heat and heat2.is_heat
    assert np.all(heat1.B == 0.0)


def test_prototype_assembly(proto):
    assert proto.Q == 6
    assert proto.block_sizes == (1, 1)
    assert np.array_equal(proto.B, np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert proto.weights == (1, 3)


def test_chain_dimensions(chain):
    assert chain.Q == 7
    assert chain.weights == (1, 1, 3)


def test_dilation_determinant_matches_Q(all_specs):
    # product of all dilation scales (space and time) must equal lam^Q
    for spec in all_specs.values():
        for lam in (2.0, 3.0, 0.5):
            det = lam ** 2 * float(np.prod([lam ** w for w in spec.weights]))
            assert det == pytest.approx(lam ** spec.Q, rel=1e-13)


def test_validation_rejects_bad_inputs():
    with pytest.raises(NotPositiveDefiniteA0):
        kp.validate_operator(2, [1, 1], [[-1.0]], [np.array([[1.0]])])
    with pytest.raises(NonSymmetricA0):
        kp.validate_operator(2, [2], [[1.0, 0.5], [0.2, 1.0]])
    with pytest.raises(RankDeficientBlock) as err:
        kp.validate_operator(3, [2, 1], np.eye(2), [np.array([[0.0, 0.0]])])
    assert err.value.j == 1
    with pytest.raises(BlockSizeMonotonicityViolated):
        kp.validate_operator(3, [1, 2], np.eye(1), [np.array([[1.0], [1.0]])])
    with pytest.raises(DimensionMismatch):
        kp.validate_operator(4, [1, 1], [[1.0]], [np.array([[1.0]])])


def test_group_composition_examples(proto, heat1):
    z = proto.point([1.0, 0.0], 0.0)
    w = proto.point([0.0, 0.0], 1.0)
    zw = kp.group_compose(z, w, proto)
    assert np.allclose(zw.x, [1.0, -1.0]) and zw.t == 1.0

    # heat case reduces to plain addition
    a = heat1.point([0.3], -0.2)
    b = heat1.point([1.1], 0.5)
    ab = kp.group_compose(a, b, heat1)
    assert ab.x[0] == pytest.approx(1.4) and ab.t == pytest.approx(0.3)

    # neutral element both sides
    e = proto.origin()
    for lhs, rhs in ((z, e), (e, z)):
        res = kp.group_compose(lhs, rhs, proto)
        assert np.allclose(res.x, z.x) and res.t == z.t


def test_group_inverse_examples(proto, heat1):
    z = proto.point([1.0, 0.0], 1.0)
    zi = kp.group_inverse(z, proto)
    assert np.allclose(zi.x, [-1.0, -1.0]) and zi.t == -1.0

    a = heat1.point([0.7], 0.3)
    ai = kp.group_inverse(a, heat1)
    assert np.allclose(ai.x, [-0.7]) and ai.t == pytest.approx(-0.3)

    e = kp.group_inverse(proto.origin(), proto)
    assert np.allclose(e.x, 0.0) and e.t == 0.0


def test_dilation_examples(proto, heat1):
    z = proto.point([1.0, 1.0], 1.0)
    d = kp.dilate(2.0, z, proto)
    assert np.allclose(d.x, [2.0, 8.0]) and d.t == 4.0

    h = kp.dilate(2.0, heat1.point([1.0], 1.0), heat1)
    assert np.allclose(h.x, [2.0]) and h.t == 4.0

    same = kp.dilate(1.0, z, proto)
    assert np.allclose(same.x, z.x) and same.t == z.t

    with pytest.raises(NonPositiveLambda):
        kp.dilate(0.0, z, proto)


def _random_points(spec, rng, count):
    return [
        spec.point(rng.standard_normal(spec.n), rng.standard_normal())
        for _ in range(count)
    ]


@pytest.mark.parametrize("name", ["heat1", "heat2", "proto", "chain"])
def test_group_laws_random(all_specs, name):
    spec = all_specs[name]
    rng = np.random.default_rng(12345)
    pts = _random_points(spec, rng, 300)

    def close(a, b):
        scale = 1.0 + max(np.abs(a.x).max(), np.abs(b.x).max(), abs(a.t), abs(b.t))
        return np.abs(a.x - b.x).max() <= 1e-12 * scale and abs(a.t - b.t) <= 1e-12 * scale

    for i in range(0, 297, 3):
        z, w, v = pts[i], pts[i + 1], pts[i + 2]
        lhs = kp.group_compose(kp.group_compose(z, w, spec), v, spec)
        rhs = kp.group_compose(z, kp.group_compose(w, v, spec), spec)
        assert close(lhs, rhs)
        zi = kp.group_inverse(z, spec)
        for prod in (kp.group_compose(z, zi, spec), kp.group_compose(zi, z, spec)):
            assert np.abs(prod.x).max() <= 1e-12 * (1 + np.abs(z.x).max()) and abs(prod.t) <= 1e-13

        lam = 0.5 + rng.random() * 1.5
        left = kp.dilate(lam, kp.group_compose(z, w, spec), spec)
        right = kp.group_compose(kp.dilate(lam, z, spec), kp.dilate(lam, w, spec), spec)
        assert close(left, right)


def test_dilations_form_a_one_parameter_group(proto):
    z = proto.point([0.3, -1.2], 0.7)
    d1 = kp.dilate(1.5, kp.dilate(2.0, z, proto), proto)
    d2 = kp.dilate(3.0, z, proto)
    assert np.allclose(d1.x, d2.x, rtol=1e-14) and d1.t == pytest.approx(d2.t, rel=1e-14)


def test_transport_commutes_with_dilation(all_specs):
    # E(lam^2 tau) D(lam) = D(lam) E(tau), the structural identity behind the
    # dilation automorphism property
    for spec in all_specs.values():
        D = kp.dilation_matrix(1.7, spec)
        for tau in (-0.8, 0.4, 2.3):
            lhs = kp.transport_matrix(1.7 ** 2 * tau, spec) @ D
            rhs = D @ kp.transport_matrix(tau, spec)
            assert np.allclose(lhs, rhs, atol=1e-12)


def test_operator_hash_stable(proto):
    h1 = kp.operator_hash(proto)
    h2 = kp.operator_hash(kp.kolmogorov_prototype())
    assert h1 == h2 and len(h1) == 16
