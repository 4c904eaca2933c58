import os

import numpy as np
import pytest
from conftest import cir_mean_var, cir_mgf
from scipy import stats
from scipy.integrate import solve_ivp

from affine_processes import (
    AdmissibilityError,
    CanonicalAffineModel,
    DomainError,
    PointJump,
    WishartModel,
    boundary_report,
    cir,
    empirical_mgf,
    heston,
    mean_and_variance,
    mgf,
    simulate_canonical,
    simulate_cir_exact,
    simulate_wishart,
)
from affine_processes.simulate import SaturationWarning, summary


def test_deterministic_flow_matches_ode():
    beta = np.array([[-1.0, 0.5], [0.0, -0.5]])
    m = CanonicalAffineModel(0, 2, np.zeros((2, 2)), (), [0.3, 0.1], beta)
    x0 = np.array([1.0, -1.0])
    ref = solve_ivp(lambda t, x: m.b + beta @ x, (0, 1), x0, rtol=1e-12, atol=1e-12).y[:, -1]
    errs = []
    for n in (50, 100):
        ens = simulate_canonical(m, x0, 1.0, n, 3, seed=1)
        assert np.allclose(ens.terminal[0], ens.terminal[1])
        errs.append(np.abs(ens.terminal[0] - ref).max())
    assert errs[0] < 0.05
    assert 1.6 < errs[0] / errs[1] < 2.4


def test_cir_mean_within_three_se():
    b, beta, sigma = 0.2, -0.1, 0.5
    ens = simulate_canonical(cir(b, beta, sigma), [1.0], 1.0, 100, 20_000, seed=42, store="terminal")
    xt = ens.terminal[:, 0]
    mean, _ = cir_mean_var(1.0, 1.0, b, beta, sigma)
    assert abs(xt.mean() - mean) < 3 * xt.std(ddof=1) / np.sqrt(len(xt))


def test_jump_count_rate():
    m = cir(0.2, -0.1, 0.5, jump0=PointJump(1.0, [1.0]))
    ens = simulate_canonical(m, [1.0], 1.0, 50, 20_000, seed=3, store="terminal")
    counts = ens.jump_counts
    assert abs(counts.mean() - 1.0) < 3 * counts.std(ddof=1) / np.sqrt(len(counts))


def test_jump_moments_with_state_dependent_intensity():
    from affine_processes import RayJump

    m = CanonicalAffineModel(1, 0, [[0.0]], ([[0.04]],), [0.2], [[-1.0]], RayJump(0.5, [1.0], 1.0, 0.3),
                             (RayJump(0.8, [1.0], 2.0, 0.1),))
    ens = simulate_canonical(m, [0.5], 1.0, 200, 40_000, seed=9, store="terminal")
    xt = ens.terminal[:, 0]
    mean, _ = mean_and_variance(m, 1.0, [0.5])
    assert abs(xt.mean() - mean[0]) < 3.5 * xt.std(ddof=1) / np.sqrt(len(xt))


def test_bit_identical_and_chunk_independent():
    m = heston(1.5, 0.04, 0.5, -0.7)
    a = simulate_canonical(m, [0.04, 0.0], 1.0, 20, 300, seed=5)
    b = simulate_canonical(m, [0.04, 0.0], 1.0, 20, 300, seed=5, chunk=64)
    assert a.states.tobytes() == b.states.tobytes()
    c = simulate_canonical(m, [0.04, 0.0], 1.0, 20, 300, seed=6)
    assert not np.array_equal(a.states, c.states)


def test_path_alone_equals_path_in_batch():
    m = cir(0.2, -0.1, 0.5, jump0=PointJump(0.5, [0.2]))
    big = simulate_canonical(m, [1.0], 1.0, 30, 100, seed=11)
    small = simulate_canonical(m, [1.0], 1.0, 30, 3, seed=11)
    assert np.array_equal(big.states[:3], small.states)
    assert big.seed_record()[2] == (11, 2)


def test_thread_count_does_not_change_output(monkeypatch):
    m = WishartModel(2, 2 * np.eye(2), -0.5 * np.eye(2), np.eye(2))
    monkeypatch.setenv("AFFINE_THREADS", "1")
    a = simulate_wishart(m, np.eye(2), 1.0, 10, 5000, seed=2, chunk=512)
    monkeypatch.setenv("AFFINE_THREADS", "4")
    b = simulate_wishart(m, np.eye(2), 1.0, 10, 5000, seed=2, chunk=512)
    assert a.states.tobytes() == b.states.tobytes()


def test_canonical_invariants(rng):
    from conftest import random_canonical

    for _ in range(5):
        m = random_canonical(rng)
        x0 = np.r_[rng.uniform(0, 1, m.m), rng.normal(size=m.n)]
        ens = simulate_canonical(m, x0, 1.0, 20, 200, seed=1)
        assert np.all(ens.states[..., : m.m] >= 0)
        assert ens.states.shape == (200, 21, m.d)


def test_wishart_invariants():
    m = WishartModel(2, np.eye(2), -0.5 * np.eye(2), np.eye(2))
    ens = simulate_wishart(m, np.eye(2), 1.0, 20, 500, seed=4)
    assert np.array_equal(ens.states, np.swapaxes(ens.states, -1, -2))
    assert np.linalg.eigvalsh(ens.states).min() >= -1e-10


def test_wishart_without_noise_follows_linear_ode():
    beta = np.array([[-0.5, 0.2], [0.0, -0.3]])
    b = np.array([[1.0, 0.2], [0.2, 0.5]])
    m = WishartModel(2, b, beta, np.zeros((2, 2)))
    x0 = np.eye(2)
    rhs = lambda t, y: (b + beta @ y.reshape(2, 2) + y.reshape(2, 2) @ beta.T).ravel()
    ref = solve_ivp(rhs, (0, 1), x0.ravel(), rtol=1e-12, atol=1e-12).y[:, -1].reshape(2, 2)
    errs = [np.abs(simulate_wishart(m, x0, 1.0, n, 2, seed=0).terminal[0] - ref).max() for n in (50, 100)]
    assert errs[0] < 0.05 and 1.6 < errs[0] / errs[1] < 2.4


def test_scalar_wishart_matches_exact_cir():
    q, b, beta, x0 = 0.5, 0.6, -0.4, 1.0
    m = WishartModel(1, [[b]], [[beta]], [[q]])
    ens = simulate_wishart(m, [[x0]], 1.0, 200, 10_000, seed=8, store="terminal", scheme="milstein")
    exact = simulate_cir_exact(b, 2 * beta, 2 * q, x0, 1.0, 10_000, seed=99)
    res = stats.ks_2samp(ens.terminal[:, 0, 0], exact)
    crit = 1.63 * np.sqrt(2 / 10_000)
    assert res.statistic < crit


def test_exact_cir_sampler():
    assert np.all(simulate_cir_exact(0.0, -1.0, 1.0, 0.0, 1.0, 100, seed=0) == 0)
    b, beta, sigma = 0.2, -0.1, 0.5
    xs = simulate_cir_exact(b, beta, sigma, 1.0, 1.0, 100_000, seed=1)
    mean, var = cir_mean_var(1.0, 1.0, b, beta, sigma)
    n = len(xs)
    assert abs(xs.mean() - mean) < 3 * np.sqrt(var / n)
    assert abs(xs.var() - var) < 3 * np.std((xs - mean) ** 2) / np.sqrt(n)
    vals = np.exp(0.4 * xs)
    assert abs(vals.mean() - cir_mgf(0.4, 1.0, 1.0, b, beta, sigma)) < 3 * vals.std() / np.sqrt(n)


def test_empirical_mgf_zero_and_saturation():
    ens = simulate_canonical(cir(0.2, -0.1, 0.5), [1.0], 1.0, 10, 100, seed=1)
    assert empirical_mgf(ens, [0.0]) == (1.0, 0.0)
    with pytest.warns(SaturationWarning, match="of 100 paths"):
        empirical_mgf(ens, [1e4])


def test_empirical_mgf_beyond_explosion_does_not_settle():
    b, beta, sigma = 0.2, 0.1, 1.0
    u = 1.5 * 2 * beta / (sigma ** 2 * np.expm1(beta))
    assert mgf(cir(b, beta, sigma), 1.0, [u], [1.0]).explodes
    est = [np.mean(np.exp(u * simulate_cir_exact(b, beta, sigma, 1.0, 1.0, n, seed=3))) for n in
           (1_000, 10_000, 100_000)]
    ses = [np.std(np.exp(u * simulate_cir_exact(b, beta, sigma, 1.0, 1.0, n, seed=3))) / np.sqrt(n)
           for n in (1_000, 10_000, 100_000)]
    # a finite mean would leave the relative standard error shrinking like n^(-1/2)
    assert ses[2] / est[2] > 0.3 * ses[0] / est[0]


def test_boundary_report_strong_condition():
    m = WishartModel(2, 3.5 * np.eye(2), -0.5 * np.eye(2), np.eye(2))
    assert m.strong_capable
    ens = simulate_wishart(m, np.eye(2), 1.0, 2000, 1000, seed=7, store="terminal", scheme="milstein")
    rep = boundary_report(ens)
    assert rep["fraction_hitting"] <= 0.01
    assert rep["tol"] == pytest.approx(1e-8)


def test_euler_boundary_hits_shrink_under_refinement():
    # clipped Euler touches zero on a fraction of paths that vanishes only as h -> 0
    m = WishartModel(2, 3.5 * np.eye(2), -0.5 * np.eye(2), np.eye(2))
    fractions = [boundary_report(simulate_wishart(m, np.eye(2), 1.0, n, 1000, seed=7, store="terminal"))
                 ["fraction_hitting"] for n in (250, 1000, 4000)]
    assert fractions[0] > fractions[1] > fractions[2]


def test_boundary_report_singular_start_and_refusal():
    m = WishartModel(2, np.eye(2), -0.5 * np.eye(2), np.eye(2))
    ens = simulate_wishart(m, np.diag([1.0, 0.0]), 1.0, 5, 50, seed=1)
    assert boundary_report(ens)["fraction_hitting"] == 1.0
    with pytest.raises(AdmissibilityError):
        simulate_wishart(WishartModel(2, 0.1 * np.eye(2), -np.eye(2), np.eye(2)), np.eye(2), 1.0, 5, 5, seed=1)
    with pytest.raises(ValueError):
        boundary_report(simulate_canonical(cir(0.2, -0.1, 0.5), [1.0], 1.0, 2, 2, seed=0))


def test_domain_errors():
    with pytest.raises(DomainError):
        simulate_canonical(cir(0.2, -0.1, 0.5), [-1.0], 1.0, 2, 2, seed=0)
    m = WishartModel(2, np.eye(2), -np.eye(2), np.eye(2))
    with pytest.raises(DomainError):
        simulate_wishart(m, -np.eye(2), 1.0, 2, 2, seed=0)
    with pytest.raises(ValueError):
        simulate_wishart(m, np.eye(2), 1.0, 2, 2, seed=0, scheme="exact")


def test_terminal_store_matches_full():
    m = heston(1.5, 0.04, 0.5, -0.7)
    full = simulate_canonical(m, [0.04, 0.0], 1.0, 20, 50, seed=5)
    term = simulate_canonical(m, [0.04, 0.0], 1.0, 20, 50, seed=5, store="terminal")
    assert np.array_equal(full.terminal, term.terminal)
    assert term.states.shape == (50, 2, 2)
    assert np.array_equal(full.path_min, term.path_min)


def test_summary_keys():
    m = WishartModel(2, 2 * np.eye(2), -0.5 * np.eye(2), np.eye(2))
    ens = simulate_wishart(m, np.eye(2), 1.0, 10, 200, seed=4)
    out = summary(ens, -0.1 * np.eye(2))
    assert {"mean", "var", "mgf", "boundary"} <= set(out)


@pytest.mark.slow
def test_cir_weak_order():
    b, beta, sigma = 0.3, -2.0, 0.8
    m = cir(b, beta, sigma)
    exact, _ = cir_mean_var(1.0, 1.0, b, beta, sigma)
    errs = []
    for n in (4, 8, 16):
        ens = simulate_canonical(m, [1.0], 1.0, n, 100_000, seed=12, store="terminal")
        errs.append(abs(ens.terminal[:, 0].mean() - exact))
    assert 1.5 <= errs[0] / errs[1] <= 3 and 1.5 <= errs[1] / errs[2] <= 3


def test_thread_env_parsing(monkeypatch):
    from affine_processes.simulate import thread_count

    monkeypatch.setenv("AFFINE_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.delenv("AFFINE_THREADS")
    assert thread_count() >= 1
    assert os.cpu_count() is None or thread_count() <= os.cpu_count()
    monkeypatch.setenv("AFFINE_THREADS", "many")
    with pytest.raises(ValueError):
        thread_count()
