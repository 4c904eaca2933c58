import numpy as np
import pytest
from conftest import random_canonical

from affine_processes import (
    DomainError,
    RayJump,
    WishartModel,
    cir,
    fixture_path,
    heston,
    load_model,
    martingale_check,
    mgf,
    tilt,
)
from affine_processes.martingale import INCONCLUSIVE, MARTINGALE, NOT_LOCAL, STRICT_LOCAL
from affine_processes.riccati import exponents


def test_identity_tilt(rng):
    m = random_canonical(rng, jumps=True)
    base, tilted = exponents(m), tilt(m, np.zeros(m.d))
    U = rng.normal(size=(5, m.d)) * 0.3 + 1j * rng.normal(size=(5, m.d))
    assert np.allclose(tilted.F(U), base.F(U), atol=0)
    assert np.allclose(tilted.R(U), base.R(U), atol=0)


def test_cir_tilt_shifts_mean_reversion():
    b, beta, sigma, theta = 0.3, -0.7, 0.9, 0.4
    tilted = tilt(cir(b, beta, sigma), [theta])
    for u in (-1.0, 0.2, 0.5 + 1j):
        R = tilted.R(np.array([u]))[0]
        assert R == pytest.approx(sigma ** 2 * u ** 2 / 2 + (beta + sigma ** 2 * theta) * u)
        assert tilted.F(np.array([u])) == pytest.approx(b * u)


def test_tilted_exponents_vanish_at_zero(rng):
    for _ in range(5):
        m = random_canonical(rng, jumps=True)
        th = np.r_[rng.uniform(-0.5, 0.5, m.m), rng.normal(size=m.n) * 0.5]
        ex = tilt(m, th)
        z = np.zeros((1, m.d), dtype=complex)
        assert abs(ex.F(z)[0]) < 1e-15
        assert np.all(np.abs(ex.R(z)) < 1e-15)


def test_double_tilt(rng):
    m = random_canonical(rng, jumps=True)
    th = np.r_[rng.uniform(-0.5, 0.5, m.m), rng.normal(size=m.n) * 0.5]
    back = tilt(tilt(m, th), -th)
    base = exponents(m)
    U = rng.normal(size=(8, m.d)) * 0.3 + 1j * rng.normal(size=(8, m.d))
    assert np.max(np.abs(back.F(U) - base.F(U))) < 1e-12
    assert np.max(np.abs(back.R(U) - base.R(U))) < 1e-12


def test_tilt_outside_jump_domain():
    m = cir(0.1, -1.0, 1.0, jump0=RayJump(1.0, [1.0], 1.0, 0.5))
    with pytest.raises(DomainError):
        tilt(m, [2.5])


def test_martingale_example():
    m = cir(0.0, -0.5, 1.0)
    res = martingale_check(m, [1.0], 5.0)
    assert res.verdict == MARTINGALE
    assert max(res.ratios) / min(res.ratios) <= 10
    for t in np.linspace(0, 5.0, 20):
        assert abs(mgf(m, t, [1.0], [0.7]).value - np.exp(0.7)) <= 1e-6 * np.exp(0.7)


def test_not_local_example():
    res = martingale_check(cir(0.2, -0.5, 1.0), [1.0], 5.0)
    assert res.verdict == NOT_LOCAL
    assert res.F_theta == pytest.approx(0.2)


def test_zero_theta_is_martingale(rng):
    for _ in range(3):
        m = random_canonical(rng)
        assert martingale_check(m, np.zeros(m.d), 1.0).verdict == MARTINGALE


def test_calibrated_strict_local_fixture():
    m = load_model(fixture_path("cir_strict_local"))
    res = martingale_check(m, [10.0], 5.0)
    assert res.verdict == STRICT_LOCAL
    assert res.diagnostics["ratio_spread"] > 10


def test_tilt_consistency_with_measure_change():
    m, theta, x = cir(0.0, -0.5, 1.0), 1.0, 0.8
    tilted = tilt(m, [theta])
    from affine_processes import solve

    for t in (0.5, 1.0, 2.0):
        for v in (-1.0, -0.3, 0.2):
            sol = solve(tilted, [v], t)
            lhs = np.exp(sol.phi_T + sol.psi_T[0] * x)
            rhs = mgf(m, t, [v + theta], [x]).value * np.exp(-theta * x)
            assert abs(lhs - rhs) < 1e-7 * abs(rhs)


def test_heston_price_martingale():
    # exp(log S) is a martingale when r = 0
    res = martingale_check(heston(1.5, 0.04, 0.3, -0.7), [0.0, 1.0], 2.0)
    assert res.verdict == MARTINGALE


def test_wishart_theta_matrix():
    w = WishartModel(2, np.zeros((2, 2)), -0.5 * np.eye(2), np.zeros((2, 2)))
    assert martingale_check(w, np.zeros((2, 2)), 1.0).verdict == MARTINGALE
    with pytest.raises(DomainError):
        martingale_check(w, [[0.0, 1.0], [0.0, 0.0]], 1.0)


def test_requires_admissible_model():
    with pytest.raises(DomainError):
        martingale_check(cir(-0.2, -0.5, 1.0), [1.0], 1.0)


def test_result_serialises():
    d = martingale_check(cir(0.0, -0.5, 1.0), [1.0], 1.0).to_dict()
    assert d["verdict"] == MARTINGALE and len(d["ratios"]) == 3
    assert INCONCLUSIVE == "Inconclusive"
