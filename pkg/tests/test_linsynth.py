import numpy as np
import pytest

from quadctrl import ratlin
from quadctrl.coercivity import expm
from quadctrl.examples import example_names, example_system
from quadctrl.lie_analysis import build_report, extract_quadratic_data
from quadctrl.linsynth import (
    SingularGramian,
    duhamel_endpoint,
    gramian,
    hum_control,
    missing_directions,
    smooth_plateau,
    steer_nonlinear,
    verify_steering,
)

H0_DI = np.array([[0.0, 0.0], [1.0, 0.0]])
B_DI = np.array([1.0, 0.0])


def linearization(name):
    qd = extract_quadratic_data(example_system(name))
    return np.asarray(ratlin.to_float(qd.H0)), np.asarray(ratlin.to_float(list(qd.b)))


def test_gramian_constant_integrand():
    g = gramian(np.zeros((2, 2)), np.array([1.0, 0.0]), 1.0)
    assert np.max(np.abs(g.matrix - np.outer([1, 0], [1, 0]))) <= 1e-14


def test_gramian_double_integrator_closed_form():
    g = gramian(H0_DI, B_DI, 1.0)
    expected = np.array([[1.0, 0.5], [0.5, 1.0 / 3.0]])
    assert np.max(np.abs(g.matrix - expected)) <= 1e-10


def test_gramian_smoothed_converges_as_eps_shrinks():
    # rho = 0 on [0, eps] and rho < 1 on the rise, so the deficit is O(eps):
    # measured 3.04e-3 at eps = 1e-3 for the double integrator; halving eps
    # halves it (frozen from the Simpson quadrature oracle below)
    g0 = gramian(H0_DI, B_DI, 1.0, eps=0.0)
    d1 = np.linalg.norm(gramian(H0_DI, B_DI, 1.0, eps=1e-3, n_quad=2 ** 14).matrix - g0.matrix, 2)
    d2 = np.linalg.norm(gramian(H0_DI, B_DI, 1.0, eps=5e-4, n_quad=2 ** 14).matrix - g0.matrix, 2)
    assert d1 <= 4e-3
    assert 0.3 <= d2 / d1 <= 0.7


def test_gramian_symmetric_psd():
    for name in ("double_integrator", "competition", "sussmann", "bilinear"):
        H0, b = linearization(name)
        g = gramian(H0, b, 1.0, eps=0.1)
        assert np.array_equal(g.matrix, g.matrix.T)
        assert np.linalg.eigvalsh(g.matrix)[0] >= -1e-12


def test_singular_iff_kalman_fails_on_all_fixtures():
    for name in example_names():
        sys_ = example_system(name)
        rep = build_report(extract_quadratic_data(sys_))
        H0 = np.asarray(ratlin.to_float(rep.qd.H0))
        b = np.asarray(ratlin.to_float(list(rep.qd.b)))
        g = gramian(H0, b, 1.0)
        assert g.invertible == rep.kalman, name


def test_hum_zero_data_zero_control():
    u = hum_control(H0_DI, B_DI, np.zeros(2), np.zeros(2), 1.0)
    assert np.max(np.abs(u.values)) == 0.0


def test_hum_double_integrator_steering():
    target = np.array([0.0, 1.0])
    u = hum_control(H0_DI, B_DI, np.zeros(2), target, 1.0)
    assert verify_steering(H0_DI, B_DI, u, np.zeros(2), target) <= 1e-6


def test_hum_smoothed_support_and_steering():
    target = np.array([0.0, 1.0])
    u = hum_control(H0_DI, B_DI, np.zeros(2), target, 1.0, eps=0.1)
    outside = (u.t < 0.1) | (u.t > 0.9)
    assert np.max(np.abs(u.values[outside])) == 0.0
    assert verify_steering(H0_DI, B_DI, u, np.zeros(2), target) <= 1e-6


def test_hum_raises_on_singular_gramian():
    with pytest.raises(SingularGramian) as err:
        hum_control(np.zeros((2, 2)), np.array([1.0, 0.0]), np.zeros(2), np.array([0.0, 1.0]), 1.0)
    assert err.value.missing_directions.shape == (1, 2)


def test_steering_error_zero_control_duhamel():
    x_star = np.array([0.2, -0.1])
    from quadctrl.simulate import ControlSignal

    u = ControlSignal.zero(1.0, 512)
    err = verify_steering(H0_DI, B_DI, u, x_star, x_star)
    expected = np.linalg.norm(expm(H0_DI) @ x_star - x_star)
    assert abs(err - expected) <= 1e-9
    assert verify_steering(H0_DI, B_DI, u, np.zeros(2), np.zeros(2)) == 0.0


def test_steering_linearity_superposition(nprng):
    pairs = [(nprng.uniform(-1, 1, 2), nprng.uniform(-1, 1, 2)) for _ in range(5)]
    for (a1, b1), (a2, b2) in zip(pairs, pairs[1:]):
        u1 = hum_control(H0_DI, B_DI, a1, b1, 1.0)
        u2 = hum_control(H0_DI, B_DI, a2, b2, 1.0)
        u12 = hum_control(H0_DI, B_DI, a1 + a2, b1 + b2, 1.0)
        assert np.max(np.abs(u12.values - u1.values - u2.values)) <= 1e-9


def test_norm_bound_stable_across_magnitudes(nprng):
    ratios = []
    for scale in (1e-2, 1e-1):
        worst = 0.0
        for _ in range(10):
            a = scale * nprng.uniform(-1, 1, 2)
            b = scale * nprng.uniform(-1, 1, 2)
            if np.linalg.norm(a) + np.linalg.norm(b) < 1e-12:
                continue
            u = hum_control(H0_DI, B_DI, a, b, 1.0)
            worst = max(worst, np.max(np.abs(u.values)) / (np.linalg.norm(a) + np.linalg.norm(b)))
        ratios.append(worst)
    assert abs(ratios[0] - ratios[1]) / ratios[1] <= 0.5   # same-order constants


def test_duhamel_oracle_agrees_with_rk4():
    target = np.array([0.3, -0.4])
    u = hum_control(H0_DI, B_DI, np.array([0.1, 0.0]), target, 1.0)
    end = duhamel_endpoint(H0_DI, B_DI, u, np.array([0.1, 0.0]))
    assert np.linalg.norm(end - target) <= 1e-6


def test_plateau_shape():
    rho = smooth_plateau(1.0, 0.1)
    ts = np.linspace(0, 1, 101)
    vals = rho(ts)
    assert np.max(vals) <= 1.0 + 1e-12
    assert np.all(vals[(ts >= 0.2) & (ts <= 0.8)] >= 1.0 - 1e-12)
    assert np.all(vals[(ts <= 0.1) | (ts >= 0.9)] <= 1e-12)


def test_nonlinear_fixed_point_steering_demo():
    sys_ = example_system("absorbed")   # x' = u + x^2, Kalman holds
    out = steer_nonlinear(sys_, np.array([0.0]), np.array([0.05]), 1.0, dt=1e-3)
    assert out.converged
    assert out.residual <= 1e-8
