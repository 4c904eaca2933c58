import numpy as np
import pytest

from affine_processes import CanonicalAffineModel, RankOneJump, RayJump, WishartModel, cir, heston

ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    """Remember one acceptance verdict; printed in the terminal summary."""
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo heavy tests")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# closed forms


def cir_psi(u, t, beta, sigma):
    """Riccati solution of ``psi' = sigma^2 psi^2 / 2 + beta psi``."""
    if beta == 0:
        return u / (1 - u * sigma ** 2 * t / 2)
    e = np.exp(beta * t)
    return u * e / (1 - u * sigma ** 2 * (e - 1) / (2 * beta))


def cir_phi(u, t, b, beta, sigma):
    """``int_0^t b psi(s) ds`` for the CIR Riccati solution."""
    if beta == 0:
        return -2 * b / sigma ** 2 * np.log(1 - u * sigma ** 2 * t / 2)
    e = np.exp(beta * t)
    return -2 * b / sigma ** 2 * np.log(1 - u * sigma ** 2 * (e - 1) / (2 * beta))


def cir_mgf(u, t, x, b, beta, sigma):
    return np.exp(cir_phi(u, t, b, beta, sigma) + cir_psi(u, t, beta, sigma) * x)


def cir_mean_var(t, x, b, beta, sigma):
    if beta == 0:
        return x + b * t, sigma ** 2 * (x * t + b * t ** 2 / 2)
    e = np.exp(beta * t)
    mean = x * e + b * (e - 1) / beta
    var = x * sigma ** 2 * (e * e - e) / beta + b * sigma ** 2 * (e - 1) ** 2 / (2 * beta ** 2)
    return mean, var


def cir_explosion_threshold(t, beta, sigma):
    """Largest ``u`` with finite mgf at time ``t``."""
    if beta == 0:
        return 2 / (sigma ** 2 * t)
    return 2 * beta / (sigma ** 2 * np.expm1(beta * t))


# ---------------------------------------------------------------------------
# randomized admissible models


def random_cir(rng, jumps=False):
    b = rng.uniform(0.0, 1.0)
    beta = rng.uniform(-1.5, 0.3)
    sigma = rng.uniform(0.2, 1.5)
    jump0 = RayJump(rng.uniform(0, 0.8), [1.0], 1.0, rng.uniform(0.05, 0.3)) if jumps else None
    return cir(b, beta, sigma, jump0=jump0)


def random_heston(rng):
    return heston(kappa=rng.uniform(0.5, 3.0), theta=rng.uniform(0.02, 0.2), sigma=rng.uniform(0.1, 0.6),
                  rho=rng.uniform(-0.9, 0.3), r=rng.uniform(0.0, 0.05))


def random_canonical(rng, m=None, n=None, jumps=None):
    """Admissible model on ``R_+^m x R^n`` with random coefficients."""
    m = int(rng.integers(1, 3)) if m is None else m
    n = int(rng.integers(0, 3)) if n is None else n
    jumps = bool(rng.integers(0, 2)) if jumps is None else jumps
    d = m + n
    real = np.arange(m, d)
    a = np.zeros((d, d))
    if n:
        g = rng.normal(size=(n, n)) * 0.4
        a[np.ix_(real, real)] = g @ g.T
    alpha = []
    for i in range(m):
        idx = np.r_[i, real]
        g = rng.normal(size=(len(idx), len(idx))) * 0.5
        al = np.zeros((d, d))
        al[np.ix_(idx, idx)] = g @ g.T
        alpha.append(al)
    b = np.r_[rng.uniform(0, 0.6, m), rng.normal(0, 0.3, n)]
    beta = np.zeros((d, d))
    beta[:m, :m] = rng.uniform(0, 0.2, (m, m))
    beta[np.arange(m), np.arange(m)] = rng.uniform(-1.5, 0.2, m)
    beta[m:, :] = rng.normal(0, 0.3, (n, d))
    beta[real, real] -= 0.5
    jump0, state_jumps = None, ()
    if jumps:
        direction = np.r_[rng.uniform(0, 1, m), rng.normal(0, 0.5, n)]
        jump0 = RayJump(rng.uniform(0, 0.6), direction, rng.uniform(0.5, 2.0), rng.uniform(0.05, 0.2))
        state_jumps = tuple(RayJump(rng.uniform(0, 0.4), np.r_[np.eye(m)[i], np.zeros(n)], 1.0,
                                    rng.uniform(0.05, 0.2)) for i in range(m))
    return CanonicalAffineModel(m, n, a, tuple(alpha), b, beta, jump0, state_jumps)


def random_wishart(rng, d=2, jumps=False):
    q = rng.normal(size=(d, d)) * 0.4
    alpha = q.T @ q
    g = rng.normal(size=(d, d)) * 0.3
    b = (d - 1) * alpha + rng.uniform(0.5, 2.0) * alpha + g @ g.T
    beta = rng.normal(size=(d, d)) * 0.2 - 0.5 * np.eye(d)
    jump = RankOneJump(rng.uniform(0, 0.5), rng.normal(size=d), rng.uniform(0.05, 0.3)) if jumps else None
    return WishartModel(d, b, beta, q, jump)


def random_battery(seed=2024, count=100):
    """Mixed list of admissible models used by the property suites."""
    rng = np.random.default_rng(seed)
    makers = [lambda: random_cir(rng, jumps=bool(rng.integers(0, 2))), lambda: random_heston(rng),
              lambda: random_canonical(rng), lambda: random_wishart(rng, int(rng.integers(1, 4)),
                                                                   bool(rng.integers(0, 2)))]
    return [makers[k % len(makers)]() for k in range(count)]
