import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from krylovfb.exceptions import DomainError, ShapeError, VerificationError
from krylovfb.feedback import (
    FeedbackSystem,
    _toeplitz_prefix,
    bkc_reachability_check,
    classify_distance,
    mimo_bilinear_solve,
    rank_one_update,
    state_feedback_from_sigma,
    verify_feedback,
)
from krylovfb.krylov import annihilating_polynomial, krylov_columns
from krylovfb.numerics import charpoly_eig, kernel_basis
from krylovfb.sigma import sigma_identity, sigma_mul

from conftest import charpoly_oracle, rel_err


def random_system(rng, n, m, p):
    while True:
        try:
            return FeedbackSystem(rng.uniform(-1, 1, (n, n)), rng.standard_normal((n, m)),
                                  rng.standard_normal((p, n)))
        except DomainError:
            continue


def unit(rng, m):
    v = rng.uniform(-1, 1, m)
    return v / np.linalg.norm(v)


# --- system ---------------------------------------------------------------


def test_system_invariants():
    A = np.diag([1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        FeedbackSystem(A, np.ones((3, 2)), np.eye(3))  # dependent columns of B
    with pytest.raises(DomainError):
        FeedbackSystem(A, np.ones((3, 1)), np.vstack([np.eye(3)[0], np.eye(3)[0]]))
    with pytest.raises(DomainError):
        FeedbackSystem(A, np.eye(3)[:, :1], np.eye(3))  # uncontrollable
    with pytest.raises(ShapeError):
        FeedbackSystem(A, np.ones((2, 1)), np.eye(3))
    sys = FeedbackSystem(A, np.ones((3, 1)), np.eye(3)[:2])
    assert (sys.n, sys.m, sys.p) == (3, 1, 2)
    with pytest.raises(ShapeError):
        sys.closed_loop(np.zeros((2, 2)))


def test_classify_distance():
    assert classify_distance(0.0, 1.0) == "reachable"
    assert classify_distance(0.5, 1.0) == "unreachable"
    assert classify_distance(1e-5, 1.0) == "indeterminate"


# --- rank-one update ----------------------------------------------------------


def test_rank_one_trivial(rng):
    sys = random_system(rng, 6, 2, 2)
    mu = np.array([1.0, 0.0])
    d = annihilating_polynomial(sys.A, rng=rng)
    res = rank_one_update(sys, mu, d, d=d, rng=rng)
    assert not np.any(res.rho) and not np.any(res.K)
    assert res.residual == 0.0
    np.testing.assert_array_equal(res.d_new, d)


@given(st.integers(3, 12), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_rank_one_forward_construction(n, m, p, seed):
    rng = np.random.default_rng(seed)
    sys = random_system(rng, n, m, p)
    mu = unit(rng, m)
    rho0 = rng.uniform(-1e-3, 1e-3, p)
    K0 = -np.outer(mu, rho0)
    b = charpoly_eig(sys.closed_loop(K0))
    res = rank_one_update(sys, mu, b, rng=rng)
    assert res.residual <= 1e-8 * np.linalg.norm(b)
    assert rel_err(res.d_new, b) <= 1e-7
    assert res.verdict == "reachable"
    np.testing.assert_allclose(sys.B @ res.K @ sys.C, sys.B @ K0 @ sys.C, atol=1e-7)


def test_rank_one_structure(rng):
    sys = random_system(rng, 8, 3, 2)
    mu = unit(rng, 3)
    b = np.concatenate([[1.0], rng.standard_normal(8)])
    res = rank_one_update(sys, mu, b, rng=rng)
    np.testing.assert_array_equal(res.K, -np.outer(mu, res.rho))
    assert np.linalg.matrix_rank(res.K) <= 1
    np.testing.assert_array_equal(res.d_new, sigma_mul(res.sigma, res.d))
    assert res.verification_error <= 1e-6


def test_rank_one_unreachable_n20(rng):
    sys = random_system(rng, 20, 3, 3)
    d = annihilating_polynomial(sys.A, rng=rng)
    hits = 0
    for _ in range(10):
        b = np.concatenate([[1.0], rng.standard_normal(20) * np.abs(d[1:]).max()])
        res = rank_one_update(sys, unit(rng, 3), b, d=d, verify=False)
        hits += res.residual / np.linalg.norm(b) > 0.02
    assert hits >= 9


def test_rank_one_verification_failure(rng):
    sys = random_system(rng, 6, 2, 2)
    b = np.concatenate([[1.0], rng.standard_normal(6)])
    wrong = annihilating_polynomial(sys.A, rng=rng) + np.r_[0, np.ones(6)]
    with pytest.raises(VerificationError):
        rank_one_update(sys, np.array([1.0, 0.0]), b, d=wrong, rng=rng)


def _monotone_case(rng, zero):
    n, m, p = 10, 2, 2
    sys = random_system(rng, n, m, p)
    d = annihilating_polynomial(sys.A, rng=rng)
    mu = unit(rng, m)
    if zero:
        W = krylov_columns(sys.A, sys.B @ mu)[:, :n]
        Q = sys.C @ W @ _toeplitz_prefix(d)
        f = kernel_basis(Q) @ rng.standard_normal(n - p)
    else:
        f = rng.standard_normal(n)
    b = np.concatenate([[1.0], d[1:] + f])
    return rank_one_update(sys, mu, b, d=d, verify=False), b, d


@given(st.booleans(), st.integers(0, 2**32 - 1))
def test_monotone_and_equality_iff_zero(zero, seed):
    res, b, d = _monotone_case(np.random.default_rng(seed), zero)
    before = np.linalg.norm(b - d)
    after = np.linalg.norm(b - res.d_new)
    assert after <= before + 1e-12 * before
    is_zero = np.linalg.norm(res.rho) <= 1e-9 * np.linalg.norm(b - d) / max(1.0, np.abs(d).max())
    equal = before - after <= 1e-12 * before
    assert equal == is_zero
    assert zero == is_zero


@given(st.integers(0, 2**32 - 1))
def test_optimality_among_admissible_sigma(seed):
    rng = np.random.default_rng(seed)
    sys = random_system(rng, 9, 2, 3)
    mu = unit(rng, 2)
    d = annihilating_polynomial(sys.A, rng=rng)
    b = np.concatenate([[1.0], d[1:] + rng.standard_normal(9)])
    res = rank_one_update(sys, mu, b, d=d, verify=False)
    M = sys.C @ krylov_columns(sys.A, sys.B @ mu)[:, :9]
    rho = rng.standard_normal(3) * np.linalg.norm(res.rho) * rng.uniform(0, 3)
    other = np.concatenate([[1.0], rho @ M])
    assert np.linalg.norm(b - res.d_new) <= np.linalg.norm(b - sigma_mul(other, d)) + 1e-9


def test_zero_propagation(rng):
    n, m, p = 12, 2, 3
    sys = random_system(rng, n, m, p)
    d = annihilating_polynomial(sys.A, rng=rng)
    D = _toeplitz_prefix(d)
    Q = np.vstack([sys.C @ krylov_columns(sys.A, sys.B[:, i])[:, :n] @ D for i in range(m)])
    f = kernel_basis(Q) @ rng.standard_normal(n - m * p)
    b = np.concatenate([[1.0], d[1:] + f])
    tol = 1e-9 * np.linalg.norm(f)
    for i in range(m):
        assert np.linalg.norm(rank_one_update(sys, np.eye(m)[i], b, d=d, verify=False).rho) <= tol
    for _ in range(20):
        assert np.linalg.norm(rank_one_update(sys, unit(rng, m), b, d=d, verify=False).rho) <= 10 * tol


# --- state feedback -------------------------------------------------------------


def test_state_feedback_identity(rng):
    sys = random_system(rng, 5, 2, 2)
    np.testing.assert_array_equal(state_feedback_from_sigma(sys, np.array([1.0, 0]), sigma_identity(6)), 0)


def test_state_feedback_single_input(rng):
    for _ in range(5):
        sys = random_system(rng, 6, 1, 1)
        d = charpoly_oracle(sys.A)
        s = np.concatenate([[1.0], rng.uniform(-0.1, 0.1, 6)])
        F = state_feedback_from_sigma(sys, np.ones(1), s)
        got = annihilating_polynomial(sys.A + sys.B @ F, rng=rng)
        assert rel_err(got, sigma_mul(s, d)) <= 1e-7


def test_state_feedback_matches_output_feedback(rng):
    sys = random_system(rng, 8, 2, 3)
    mu = unit(rng, 2)
    b = charpoly_eig(sys.closed_loop(-np.outer(mu, rng.uniform(-1e-3, 1e-3, 3))))
    res = rank_one_update(sys, mu, b, rng=rng)
    np.testing.assert_allclose(sys.B @ res.F, sys.B @ res.K @ sys.C, atol=1e-8)
    F = state_feedback_from_sigma(sys, mu, res.sigma)
    np.testing.assert_allclose(sys.B @ F, sys.B @ res.K @ sys.C, atol=1e-8)


def test_verify_feedback(rng):
    sys = random_system(rng, 7, 2, 2)
    K = rng.uniform(-0.1, 0.1, (2, 2))
    ok, recomputed, err = verify_feedback(sys, K, charpoly_oracle(sys.closed_loop(K)), rng=rng)
    assert ok and err <= 1e-9
    ok, _, _ = verify_feedback(sys, K, charpoly_oracle(sys.A) + np.r_[0, np.full(7, 0.1)], rng=rng)
    assert not ok


# --- BKC factorization ------------------------------------------------------------


def test_bkc_identity(rng):
    sys = random_system(rng, 6, 2, 2)
    v = bkc_reachability_check(sys.A, sys.A, sys.B, sys.C)
    assert v and v.reachable
    np.testing.assert_allclose(v.K, 0, atol=1e-15)


def test_bkc_planted(rng):
    sys = random_system(rng, 8, 2, 3)
    K0 = rng.standard_normal((2, 3))
    v = bkc_reachability_check(sys.A, sys.closed_loop(K0), sys.B, sys.C)
    assert v.column_condition and v.kernel_condition
    assert np.linalg.norm(sys.B @ v.K @ sys.C - sys.B @ K0 @ sys.C) <= 1e-9


def test_bkc_generic_full(rng):
    sys = random_system(rng, 8, 2, 2)
    v = bkc_reachability_check(sys.A, sys.A + rng.standard_normal((8, 8)), sys.B, sys.C)
    assert not v
    assert v.max_violation > 1e3 * v.threshold


def test_bkc_single_condition(rng):
    n = 6
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, 2))
    C = rng.standard_normal((2, n))
    # in col(B) but not vanishing on ker(C)
    v = bkc_reachability_check(A, A + B @ rng.standard_normal((2, n)), B, C)
    assert v.column_condition and not v.kernel_condition and not v
    # vanishes on ker(C) but leaves col(B)
    v = bkc_reachability_check(A, A + rng.standard_normal((n, 2)) @ C, B, C)
    assert v.kernel_condition and not v.column_condition


def test_bkc_shapes(rng):
    with pytest.raises(ShapeError):
        bkc_reachability_check(np.eye(3), np.eye(2), np.ones((3, 1)), np.ones((1, 3)))


# --- bilinear MIMO ---------------------------------------------------------------


def test_bilinear_trivial(rng):
    sys = random_system(rng, 6, 2, 2)
    d = annihilating_polynomial(sys.A, rng=rng)
    out = mimo_bilinear_solve(sys, d, d=d, rng=rng)
    assert out.converged and out.iterations == 0 and not np.any(out.rho)


def test_bilinear_forward_construction():
    rng = np.random.default_rng(7)
    solved = 0
    for _ in range(10):
        sys = random_system(rng, 8, 2, 2)
        alpha0 = unit(rng, 2)
        rho0 = rng.uniform(-1e-2, 1e-2, 2)
        b = charpoly_eig(sys.closed_loop(-np.outer(alpha0, rho0)))
        out = mimo_bilinear_solve(sys, b, max_iters=200, rng=rng)
        solved += out.residual_history[-1] <= 1e-6
    assert solved >= 8


def test_bilinear_history_monotone():
    rng = np.random.default_rng(11)
    for _ in range(100):
        sys = random_system(rng, 7, 2, 2)
        b = np.concatenate([[1.0], rng.standard_normal(7)])
        out = mimo_bilinear_solve(sys, b, max_iters=30, rng=rng)
        h = np.array(out.residual_history)
        assert np.all(np.diff(h) <= 0)
        np.testing.assert_allclose(out.K, -np.outer(out.alpha, out.rho))


def test_bilinear_rejects_zero_alpha(rng):
    sys = random_system(rng, 5, 2, 2)
    with pytest.raises(DomainError):
        mimo_bilinear_solve(sys, np.ones(6), alpha0=np.zeros(2))
