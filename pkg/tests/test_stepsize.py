import numpy as np
import pytest

from sparsekaczmarz.errors import InconsistentBlock, ZeroBlock, ZeroRow
from sparsekaczmarz.shrinkage import conjugate_value, soft_shrink
from sparsekaczmarz.stepsize import (
    StepsizeRule,
    constant_step,
    dynamic_step,
    exact_step,
    spectral_norm_sq,
)


def g(z, a, lam, t):
    return float(a @ soft_shrink(z - t * a, lam))


def bisect_step(z, a, beta, lam, iters=200):
    """Root of the nonincreasing g(t) = beta by an expanding bracket + bisection."""
    lo, hi = -1.0, 1.0
    while g(z, a, lam, lo) < beta:
        lo *= 2
    while g(z, a, lam, hi) > beta:
        hi *= 2
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if g(z, a, lam, mid) > beta:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def jacobi_max_eig(S, sweeps=100):
    """Largest eigenvalue of a symmetric matrix via cyclic Jacobi rotations."""
    S = np.array(S, dtype=float)
    n = len(S)
    for _ in range(sweeps):
        off = np.sqrt(np.sum(S**2) - np.sum(np.diag(S) ** 2))
        if off < 1e-14 * np.linalg.norm(S):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(S[p, q]) < 1e-300:
                    continue
                theta = (S[q, q] - S[p, p]) / (2 * S[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta**2 + 1)) if theta else 1.0
                c = 1 / np.sqrt(t**2 + 1)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q], J[q, p] = s, -s
                S = J.T @ S @ J
    return float(np.max(np.diag(S)))


def test_exact_step_examples():
    assert exact_step([1, 0], [1, 0], 0, 0) == 1.0
    assert exact_step([0, 0], [1, 0], 2, 1) == pytest.approx(-3.0)
    assert bisect_step(np.zeros(2), np.array([1.0, 0]), 2, 1) == pytest.approx(-3.0)
    t = exact_step([0, 0], [1, 1], 4, 1)
    assert t == pytest.approx(-3.0)
    assert g(np.zeros(2), np.ones(2), 1, t) == pytest.approx(4.0)
    assert bisect_step(np.zeros(2), np.ones(2), 4, 1) == pytest.approx(-3.0)


def test_exact_step_zero_row():
    with pytest.raises(ZeroRow):
        exact_step([1.0, 2.0], [0.0, 0.0], 1.0, 0.5)


def test_exact_step_random_against_bisection():
    rng = np.random.default_rng(42)
    for _ in range(300):
        n = rng.integers(1, 30)
        z = 2 * rng.standard_normal(n)
        a = rng.standard_normal(n) * (rng.random(n) > 0.2)
        if not a.any():
            continue
        lam, beta = rng.uniform(0, 2), 3 * rng.standard_normal()
        t = exact_step(z, a, beta, lam)
        assert abs(g(z, a, lam, t) - beta) <= 1e-10 * (1 + abs(beta))
        assert abs(t - bisect_step(z, a, beta, lam)) <= 1e-8


def test_exact_step_flat_segment_left_endpoint():
    # g(t) = S_1(0.5 - t) vanishes on [-0.5, 1.5]
    z, a, lam = np.array([0.5]), np.array([1.0]), 1.0
    t = exact_step(z, a, 0.0, lam)
    assert t == pytest.approx(-0.5)
    assert g(z, a, lam, t) == 0.0


def test_exact_step_lambda_zero_is_kaczmarz():
    rng = np.random.default_rng(1)
    for _ in range(100):
        z, a = rng.standard_normal(9), rng.standard_normal(9)
        beta = rng.standard_normal()
        assert exact_step(z, a, beta, 0.0) == pytest.approx((a @ z - beta) / (a @ a), abs=1e-12)


def test_g_is_nonincreasing():
    rng = np.random.default_rng(2)
    for _ in range(100):
        z, a = rng.standard_normal(6), rng.standard_normal(6)
        lam = rng.uniform(0, 1.5)
        t1, t2 = np.sort(rng.normal(scale=3, size=2))
        assert g(z, a, lam, t1) >= g(z, a, lam, t2) - 1e-12


def test_exact_step_minimises_dual_objective():
    rng = np.random.default_rng(3)
    for _ in range(50):
        z, a = rng.standard_normal(8), rng.standard_normal(8)
        lam, beta = rng.uniform(0, 1), rng.standard_normal()
        t = exact_step(z, a, beta, lam)

        def phi(s):
            return conjugate_value(z - s * a, lam) + s * beta

        best = phi(t)
        deltas = rng.normal(scale=0.5, size=100)
        assert all(best <= phi(t + d) + 1e-12 for d in deltas)


def test_dynamic_step_examples():
    a = np.array([[3.0, 4.0]])
    x = np.array([1.0, 1.0])
    beta = a[0] @ x - 5.0
    assert dynamic_step(a, [beta], x) == pytest.approx(1 / 25)
    Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((6, 3)))
    assert dynamic_step(Q.T, np.zeros(3), np.ones(6)) == pytest.approx(1.0)
    assert dynamic_step(a, [a[0] @ x], x) == 0.0


def test_dynamic_step_singleton_exact_value():
    rng = np.random.default_rng(9)
    for _ in range(50):
        a = rng.standard_normal((1, 5))
        x = rng.standard_normal(5)
        b = rng.standard_normal(1)
        assert dynamic_step(a, b, x) == pytest.approx(1.0 / (a[0] @ a[0]), rel=1e-14)


def test_dynamic_step_inconsistent_block():
    A = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(InconsistentBlock):
        dynamic_step(A, [1.0, -1.0], np.zeros(2))


def test_constant_step_examples():
    assert constant_step(np.eye(4)) == pytest.approx(1.0)
    assert constant_step(2 * np.eye(4)) == pytest.approx(0.25)
    with pytest.raises(ZeroBlock):
        constant_step(np.zeros((2, 3)))


def test_constant_step_against_jacobi_oracle():
    rng = np.random.default_rng(5)
    for _ in range(5):
        A = rng.standard_normal((5, 8))
        lam_max = jacobi_max_eig(A.T @ A)
        assert spectral_norm_sq(A) == pytest.approx(lam_max, rel=1e-6)
        assert constant_step(A) == pytest.approx(1 / lam_max, rel=1e-6)


def test_rule_caches_constants():
    rule = StepsizeRule("constant")
    A = np.diag([1.0, 3.0])
    assert rule.block_step(A, [0, 0], np.ones(2), key=0) == pytest.approx(1 / 9)
    assert rule._constants[0] == pytest.approx(1 / 9)
    with pytest.raises(ValueError):
        StepsizeRule("exact").block_step(A, [0, 0], np.ones(2))
    with pytest.raises(ValueError):
        StepsizeRule("optimal")
