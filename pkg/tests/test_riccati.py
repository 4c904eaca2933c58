import itertools

import numpy as np
import pytest
from conftest import cir_phi, cir_psi, random_canonical, random_cir, random_heston

from affine_processes import (
    DomainError,
    PointJump,
    RayJump,
    StiffnessError,
    WishartModel,
    cir,
    eval_exponents,
    explosion_time,
    gaussian_ou,
    heston,
    solve,
    solve_batch,
)
from affine_processes.ode import integrate
from affine_processes.riccati import BLOWUP, COMPLETE, CharacteristicExponents, exponents


def test_exponents_vanish_at_zero(rng):
    for model in [random_canonical(rng) for _ in range(10)] + [cir(0.2, -0.1, 0.5)]:
        F, R = eval_exponents(model, np.zeros(model.d))
        assert F == 0 and np.all(R == 0)


def test_cir_exponents_closed_form():
    b, beta, sigma = 0.2, -0.1, 0.5
    for u in (-1.0, 0.3, 2.0):
        F, R = eval_exponents(cir(b, beta, sigma), [u])
        assert F == pytest.approx(b * u)
        assert R[0] == pytest.approx(sigma ** 2 * u ** 2 / 2 + beta * u)


def test_levy_ou_exponents_linear(rng):
    beta = rng.normal(size=(2, 2))
    from affine_processes import CanonicalAffineModel
    m = CanonicalAffineModel(0, 2, np.zeros((2, 2)), (), [0.0, 0.0], beta,
                             PointJump(0.7, [0.3, -0.2]))
    u = rng.normal(size=2) + 1j * rng.normal(size=2)
    F, R = eval_exponents(m, u)
    assert np.allclose(R, beta.T @ u)
    assert F == pytest.approx(0.7 * (np.exp(0.3 * u[0] - 0.2 * u[1]) - 1))


def test_exponential_jump_exponent():
    m = cir(0.0, -1.0, 1.0, jump0=RayJump(2.0, [1.0], 1.0, 0.25))
    F, _ = eval_exponents(m, [1.0])
    assert F == pytest.approx(2.0 * (1 / (1 - 0.25) - 1))


def test_jump_domain_error_names_the_jump():
    m = cir(0.0, -1.0, 1.0, jump0=RayJump(2.0, [1.0], 1.0, 0.25))
    with pytest.raises(DomainError, match="jump0"):
        eval_exponents(m, [4.5])
    with pytest.raises(DomainError):
        solve(m, [4.5], 1.0)


def test_wishart_exponents():
    q = np.array([[1.0, 0.2], [0.0, 0.8]])
    beta = np.array([[-0.5, 0.1], [0.0, -0.3]])
    w = WishartModel(2, 2 * q.T @ q, beta, q)
    u = np.array([[-0.3, 0.1], [0.1, -0.2]])
    F, R = eval_exponents(w, u.ravel())
    alpha = q.T @ q
    assert F == pytest.approx(np.trace(w.b @ u))
    assert np.allclose(R.reshape(2, 2), 2 * u @ alpha @ u + u @ beta + beta.T @ u)


@pytest.mark.parametrize("u", [-1.0, -0.5, 0.4, 0.8])
def test_cir_solution_matches_closed_form(u):
    b, beta, sigma = 0.2, -0.1, 0.5
    sol = solve(cir(b, beta, sigma), [u], 2.0, tol=1e-10)
    assert sol.status == COMPLETE
    ts = np.linspace(0, 2, 41)
    psi = sol.psi(ts)[:, 0]
    phi = sol.phi(ts)
    ref_psi = cir_psi(u, ts, beta, sigma)
    ref_phi = cir_phi(u, ts, b, beta, sigma)
    assert np.max(np.abs(psi - ref_psi) / (1 + np.abs(ref_psi))) < 1e-8
    assert np.max(np.abs(phi - ref_phi) / (1 + np.abs(ref_phi))) < 1e-8


def test_initial_values_exact():
    sol = solve(heston(1.5, 0.04, 0.3, -0.7), [0.1, 0.5 + 1j], 1.0)
    assert np.array_equal(sol.psi(0.0), np.array([0.1, 0.5 + 1j]))
    assert sol.phi(0.0) == 0


def test_zero_datum_stays_zero(rng):
    for model in [random_canonical(rng) for _ in range(5)]:
        sol = solve(model, np.zeros(model.d), 3.0)
        assert sol.complete
        assert np.all(sol.psi(np.linspace(0, 3, 11)) == 0)
        assert np.all(sol.phi(np.linspace(0, 3, 11)) == 0)


def test_integral_residual(rng):
    from scipy.integrate import quad_vec

    for _ in range(5):
        model = random_heston(rng)
        u = np.array([-0.5, 0.3 + 2j])
        sol = solve(model, u, 1.0)
        ex = exponents(model)
        grid = np.linspace(0, 1, 100)
        psi = sol.psi(grid)
        for k in (25, 60, 99):
            integral, _ = quad_vec(lambda s, ex=ex, sol=sol: ex.R(sol.psi(s)), 0, grid[k], epsabs=1e-13, epsrel=1e-12)
            resid = np.linalg.norm(psi[k] - u - integral)
            assert resid <= 10 * 1e-10 * (1 + np.abs(psi).max())


def test_levy_ou_flow():
    beta = np.array([[-1.0, 0.4], [0.2, -0.7]])
    from scipy.linalg import expm

    from affine_processes import CanonicalAffineModel

    m = CanonicalAffineModel(0, 2, np.eye(2) * 0.1, (), [0.0, 0.0], beta)
    u = np.array([0.3, -1.2])
    sol = solve(m, u, 2.0)
    for t in (0.5, 1.3, 2.0):
        assert np.allclose(sol.psi(t), expm(t * beta.T) @ u, rtol=0, atol=1e-9)


def test_blowup_time_and_bracket():
    sol = solve(cir(0.0, 0.1, 1.0), [0.3], 10.0)
    ref = 10 * np.log(5 / 3)
    assert sol.status == BLOWUP
    lo, hi = sol.bracket
    assert hi - lo < 1e-6 * sol.t_star
    assert abs(sol.t_star - ref) < 1e-4
    assert lo <= ref + 1e-6


@pytest.mark.parametrize("u", [0.1, 0.3, 0.5])
def test_explosion_time_closed_form(u):
    t = explosion_time(cir(0.0, 0.1, 1.0), [u], 100.0)
    assert abs(t - 10 * np.log(1 + 0.2 / u)) < 1e-4


def test_explosion_censored():
    assert explosion_time(cir(0.0, -0.5, 1.0), [0.5], 50.0) == np.inf
    assert explosion_time(cir(0.0, 0.1, 1.0), [0.0], 50.0) == np.inf


def test_explosion_time_rejects_complex():
    with pytest.raises(DomainError):
        explosion_time(cir(0.0, 0.1, 1.0), [0.3 + 1j], 10.0)


def test_blowup_monotonicity():
    m = cir(0.1, 0.2, 0.8)
    t_star = explosion_time(m, [0.6], 100.0)
    assert solve(m, [0.6], 0.99 * t_star).status == COMPLETE
    assert solve(m, [0.6], t_star * (1 + 1e-5) + 1e-9).status == BLOWUP


def test_explosion_time_nonincreasing(rng):
    for _ in range(5):
        m = random_cir(rng)
        times = [explosion_time(m, [u], 200.0) for u in (0.5, 1.0, 2.0, 4.0)]
        assert all(a >= b - 1e-6 for a, b in itertools.pairwise(times))


def test_semiflow(rng):
    for _ in range(10):
        m = random_heston(rng) if rng.random() < 0.5 else random_cir(rng, jumps=True)
        u = np.r_[rng.uniform(-1, 0.1), rng.normal(size=m.d - 1)] + 1j * rng.normal(size=m.d)
        s, t = rng.uniform(0.1, 1.0, 2)
        full = solve(m, u, s + t)
        first = solve(m, u, s)
        second = solve(m, first.psi_T, t)
        assert np.allclose(full.psi_T, second.psi_T, rtol=0, atol=1e-7)
        assert abs(full.phi_T - (first.phi_T + second.phi_T)) < 1e-7


def test_batch_matches_single(rng):
    m = random_heston(rng)
    U = np.array([[-0.2, 1j], [0.1, 0.5], [-1.0, 0.3 - 2j]])
    batch = solve_batch(m, U, 1.5)
    for k, u in enumerate(U):
        sol = solve(m, u, 1.5)
        assert np.allclose(batch.psi[k], sol.psi_T, atol=1e-9)
        assert abs(batch.phi[k] - sol.phi_T) < 1e-9


def test_batch_marks_blowup():
    batch = solve_batch(cir(0.0, 0.1, 1.0), [[0.3], [-0.3]], 10.0)
    assert list(batch.blowup) == [True, False]
    assert np.isnan(batch.psi[0, 0]) and np.isfinite(batch.psi[1, 0])
    assert abs(batch.t_star[0] - 10 * np.log(5 / 3)) < 1e-3


def test_tolerance_bounds():
    with pytest.raises(ValueError):
        solve(cir(0.2, -0.1, 0.5), [0.1], 1.0, tol=1e-2)
    with pytest.raises(ValueError):
        solve(cir(0.2, -0.1, 0.5), [0.1], 0.0)


class _Wall(CharacteristicExponents):
    """Vector field undefined beyond psi = 0.5 while bounded before it."""

    dim = 1

    def F(self, u):
        return np.zeros(u.shape[:-1], dtype=u.dtype)

    def R(self, u):
        return np.where(np.real(u) < 0.5, 1.0, np.nan) + 0 * u


def test_stiffness_is_distinct_from_blowup():
    with pytest.raises(StiffnessError):
        solve(_Wall(), [0.0], 1.0)


def test_dense_output_matches_steps():
    sol = solve(cir(0.2, -0.1, 0.5), [0.8], 2.0)
    ts = np.sort(np.random.default_rng(0).uniform(0, 2, 200))
    assert np.max(np.abs(sol.psi(ts)[:, 0] - cir_psi(0.8, ts, -0.1, 0.5))) < 1e-8


def test_to_rows_layout():
    rows = solve(heston(1.5, 0.04, 0.3, -0.7), [0.0, 1j], 1.0).to_rows(11)
    assert rows.shape == (11, 1 + 2 * 2 + 2)
    assert rows[0, 0] == 0 and rows[-1, 0] == 1.0


def test_raw_integrator_exponential():
    res = integrate(lambda y: -y, np.ones((3, 1)) * [[1.0], [2.0], [3.0]], 2.0, 1e-10)
    assert np.allclose(res.y[:, 0], np.array([1.0, 2.0, 3.0]) * np.exp(-2.0), rtol=1e-9)
    assert np.all(res.t == 2.0)


def test_ou_complex_flow():
    m = gaussian_ou(0.5, 0.1, -2.0)
    sol = solve(m, [1j], 1.0)
    assert abs(sol.psi_T[0] - 1j * np.exp(-2.0)) < 1e-10
