from fractions import Fraction as F

import numpy as np
import pytest

from quadctrl.polyfield import (
    ControlDependence,
    DegreeCapExceeded,
    NotAnEquilibrium,
    Polynomial,
    PolyVectorField,
    ad_power,
    lie_bracket,
    parse_rational,
    taylor_truncate,
    translate_to_origin,
)
from conftest import fd_bracket, fd_jacobian, horner_evaluate, random_field, random_point


def poly(n, terms):
    return Polynomial(n, {(tuple(px), pu): F(c) for (px, pu), c in terms.items()})


def easy_drift_fields():
    f0 = PolyVectorField([Polynomial.zero(2), poly(2, {((2, 0), 0): 1})])
    f1 = PolyVectorField([Polynomial.const(2, 1), Polynomial.zero(2)])
    return f0, f1


def sussmann_fields():
    f0 = PolyVectorField([
        Polynomial.zero(3),
        poly(3, {((1, 0, 0), 0): 1}),
        poly(3, {((3, 0, 0), 0): 1, ((0, 2, 0), 0): 1}),
    ])
    f1 = PolyVectorField([Polynomial.const(3, 1), Polynomial.zero(3), Polynomial.zero(3)])
    return f0, f1


def test_parse_rational():
    assert parse_rational("1/3") == F(1, 3)
    assert parse_rational("0.25") == F(1, 4)
    assert parse_rational("-3") == F(-3)


def test_evaluate_direct_substitution():
    # f = (u, x1^2)
    f = PolyVectorField([Polynomial.control(2), poly(2, {((2, 0), 0): 1})])
    assert f.evaluate([F(2), F(0)], F(3)) == [F(3), F(4)]
    assert f.evaluate([F(0), F(0)], F(0)) == [F(0), F(0)]


def test_evaluate_matches_horner_oracle(rng):
    for _ in range(25):
        p = random_field(rng, 3, degree=3).components[0]
        x = random_point(rng, 3)
        u = F(rng.randint(-2, 2), rng.randint(1, 3))
        assert p.evaluate(x, u) == horner_evaluate(p, x, u)


def test_jacobian_power_rule():
    f = PolyVectorField([Polynomial.zero(2), poly(2, {((2, 0), 0): 1})])
    jac = f.jacobian()
    assert jac[0][0].is_zero() and jac[0][1].is_zero() and jac[1][1].is_zero()
    assert jac[1][0] == poly(2, {((1, 0), 0): 2})


def test_jacobian_constant_field():
    f = PolyVectorField.constant([F(3), F(-1)])
    assert all(p.is_zero() for row in f.jacobian() for p in row)


def test_jacobian_matches_finite_differences(rng, nprng):
    f = random_field(rng, 3, degree=3)
    for _ in range(5):
        x = nprng.uniform(-0.5, 0.5, size=3)
        exact = np.array(
            [[float(f.jacobian()[i][j].evaluate(list(x))) for j in range(3)] for i in range(3)]
        )
        approx = fd_jacobian(f, x)
        scale = max(1.0, np.max(np.abs(exact)))
        assert np.max(np.abs(exact - approx)) / scale <= 1e-6


def test_bracket_easy_drift_value():
    f0, f1 = easy_drift_fields()
    br = lie_bracket(f1, lie_bracket(f0, f1))
    assert br.evaluate([F(0), F(0)]) == [F(0), F(-2)]


def test_bracket_antisymmetry_with_self():
    f0, _ = easy_drift_fields()
    assert lie_bracket(f0, f0).is_zero()


def test_bracket_sussmann_ad3_value():
    f0, f1 = sussmann_fields()
    br = lie_bracket(f1, ad_power(f0, f1, 3))
    assert br.evaluate([F(0)] * 3) == [F(0), F(0), F(2)]


def test_bracket_rejects_control_fields():
    f = PolyVectorField([Polynomial.control(2), Polynomial.zero(2)])
    g = PolyVectorField.constant([F(1), F(0)])
    with pytest.raises(ControlDependence):
        lie_bracket(f, g)


def test_ad_power_order_zero_is_identity():
    f0, f1 = easy_drift_fields()
    assert ad_power(f0, f1, 0) == f1


def test_ad_power_sussmann_order_two():
    f0, f1 = sussmann_fields()
    ad2 = ad_power(f0, f1, 2)
    expected = PolyVectorField([
        Polynomial.zero(3), Polynomial.zero(3), poly(3, {((0, 1, 0), 0): 2})
    ])
    assert ad2 == expected


def test_ad_power_commuting_fields_vanish():
    x1 = PolyVectorField([Polynomial.const(2, 1), Polynomial.zero(2)])
    x2 = PolyVectorField([Polynomial.zero(2), Polynomial.const(2, 1)])
    for k in range(1, 4):
        assert ad_power(x1, x2, k).is_zero()


def test_taylor_truncate_degree_filter():
    f = PolyVectorField([
        Polynomial.control(2),
        poly(2, {((2, 0), 0): 1, ((3, 0), 0): 1}),
    ])
    assert taylor_truncate(f, 2) == PolyVectorField(
        [Polynomial.control(2), poly(2, {((2, 0), 0): 1})]
    )
    assert taylor_truncate(f, 9) == f
    g = PolyVectorField([poly(2, {((1, 1), 1): 1}), Polynomial.zero(2)])
    assert taylor_truncate(g, 2).components[0].is_zero()


def test_translate_identity_shift():
    f0, _ = easy_drift_fields()
    assert translate_to_origin(f0, [F(0), F(0)]) == f0


def test_translate_rejects_non_equilibrium():
    f0, _ = easy_drift_fields()
    with pytest.raises(NotAnEquilibrium):
        translate_to_origin(f0, [F(1), F(0)])


def test_translate_round_trip(rng):
    for _ in range(10):
        f = random_field(rng, 3, degree=2, no_constant=True)
        x_e = [F(0)] * 3  # stationary at the origin by construction
        shifted = translate_to_origin(f, x_e)
        assert shifted == f
    # a genuinely shifted equilibrium: f = x - c vanishes at c
    c = [F(1), F(-2)]
    f = PolyVectorField([
        Polynomial.variable(2, 0) - Polynomial.const(2, c[0]),
        Polynomial.variable(2, 1) - Polynomial.const(2, c[1]),
    ])
    shifted = translate_to_origin(f, c)
    assert shifted.evaluate([F(0), F(0)]) == [F(0), F(0)]
    back = PolyVectorField([p.shift([-v for v in c], 0) for p in shifted.components])
    assert back == f


def test_bracket_antisymmetry_and_jacobi_exact(rng):
    for _ in range(30):
        x = random_field(rng, 3, degree=2)
        y = random_field(rng, 3, degree=2)
        z = random_field(rng, 3, degree=2)
        assert (lie_bracket(x, y) + lie_bracket(y, x)).is_zero()
        jac = (
            lie_bracket(x, lie_bracket(y, z))
            + lie_bracket(y, lie_bracket(z, x))
            + lie_bracket(z, lie_bracket(x, y))
        )
        assert jac.is_zero()


def test_bracket_matches_finite_differences(rng, nprng):
    for _ in range(10):
        x = random_field(rng, 4, degree=3)
        y = random_field(rng, 4, degree=3)
        br = lie_bracket(x, y)
        p = nprng.uniform(-0.4, 0.4, size=4)
        exact = np.array([float(v) for v in br.evaluate(list(p))])
        approx = fd_bracket(x, y, p)
        scale = max(1.0, np.max(np.abs(exact)))
        assert np.max(np.abs(exact - approx)) / scale <= 1e-6


def test_translate_preserves_trajectories():
    from quadctrl.simulate import rk4_path

    f = PolyVectorField([
        Polynomial.variable(2, 1) - Polynomial.const(2, 1),
        (Polynomial.variable(2, 0) - Polynomial.const(2, 2)).scale(-1),
    ])
    x_e = [F(2), F(1)]
    shifted = translate_to_origin(f, x_e)

    def rhs_of(field):
        return lambda t, x: np.array([float(v) for v in field.evaluate(list(x))])

    x0 = np.array([0.1, -0.2])
    _, xs_shift = rk4_path(rhs_of(shifted), x0, 1.0, 1e-2)
    _, xs_orig = rk4_path(rhs_of(f), x0 + np.array([2.0, 1.0]), 1.0, 1e-2)
    assert np.max(np.abs((xs_orig - np.array([2.0, 1.0])) - xs_shift)) <= 1e-9


def test_degree_cap_guard(monkeypatch):
    p = poly(2, {((12, 0), 0): 1})
    with pytest.raises(DegreeCapExceeded):
        _ = p * p * p
    monkeypatch.setenv("QUADCTRL_DEGREE_CAP", "40")
    q = p * p * p  # 36 <= 40 now passes
    assert q.degree() == 36
