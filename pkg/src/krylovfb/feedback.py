"""Rank-one output feedback, BKC factorization, and the bilinear MIMO solver.

For a system ``(A, B, C)`` and an initial vector ``w0 = B mu`` with full
Krylov sequence ``W``, every rank-one output feedback ``K = -mu rho^T``
changes the annihilating polynomial from ``d`` to ``sigma * d`` where
``sigma = (1, rho^T C W[:, :n])``. Moving ``d`` toward a target ``b`` is
therefore a linear least-squares problem in ``rho``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import ConditioningError, DependentPrefixError, DomainError, ShapeError, VerificationError
from .krylov import _equilibrate, annihilating_from_krylov, annihilating_polynomial, full_krylov, krylov_columns
from .numerics import (
    DEFAULT_TOL,
    check_matrix,
    check_monic,
    check_vector,
    condition_number,
    kernel_basis,
    least_squares_row,
    numerical_rank,
)
from .sigma import check_sigma, sigma_mul, sigma_to_toeplitz

#: relative coefficient distance at or below which a target counts as reached
REACHED_RTOL = 1e-8
#: relative coefficient distance at or above which a target counts as unreachable
UNREACHABLE_RTOL = 1e-3
#: relative mismatch tolerated by independent verification
VERIFY_RTOL = 1e-6


@dataclass(frozen=True)
class FeedbackSystem:
    """The triple ``(A, B, C)`` of ``x' = Ax + Bu, y = Cx``.

    Construction checks shapes, independence of the columns of ``B`` and of
    the rows of ``C``, and full controllability. Pass ``validate=False`` to
    skip the rank checks (shapes are always checked).
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        A = check_matrix(self.A, "A", square=True)
        n = A.shape[0]
        B = check_matrix(self.B, "B", shape=(n, None))
        C = check_matrix(self.C, "C", shape=(None, n))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        if not self.validate:
            return
        if numerical_rank(B) < B.shape[1]:
            raise DomainError("columns of B are not linearly independent")
        if numerical_rank(C) < C.shape[0]:
            raise DomainError("rows of C are not linearly independent")
        if not is_controllable(A, B):
            raise DomainError("(A, B) is not controllable")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def closed_loop(self, K):
        K = check_matrix(K, "K", shape=(self.m, self.p))
        return self.A + self.B @ K @ self.C


def is_controllable(A, B, tol=DEFAULT_TOL):
    """Rank test on the block-equilibrated controllability matrix."""
    n = A.shape[0]
    blocks = []
    X = B
    for _ in range(n):
        nrm = np.linalg.norm(X)
        blocks.append(X / nrm if nrm > 0 else X)
        X = A @ X
    return numerical_rank(np.hstack(blocks), tol) == n


def _toeplitz_prefix(d):
    # n x n upper-triangular Toeplitz of (d_0, ..., d_(n-1))
    return sigma_to_toeplitz(d[:-1])


def classify_distance(distance, target_norm):
    rel = distance / target_norm if target_norm > 0 else distance
    if rel <= REACHED_RTOL:
        return "reachable"
    if rel >= UNREACHABLE_RTOL:
        return "unreachable"
    return "indeterminate"


@dataclass(frozen=True)
class RankOneResult:
    """Outcome of one least-squares rank-one update.

    ``residual`` is ``||b - d_new||``; ``relative_residual`` divides it by
    ``||b - d||``. ``verdict`` classifies ``residual / ||b||``.
    """

    rho: np.ndarray
    sigma: np.ndarray
    K: np.ndarray
    F: np.ndarray
    d: np.ndarray
    d_new: np.ndarray
    residual: float
    relative_residual: float
    mu: np.ndarray
    verdict: str
    verification_error: float | None = None


def _rank_one_core(A, B, C, mu, b, d, tol):
    """Shared kernel: returns ``(rho, sigma, d_new, W)`` without validation overhead."""
    n = A.shape[0]
    W = krylov_columns(A, B @ mu)
    scaled, _ = _equilibrate(W[:, :n])
    if numerical_rank(scaled, tol) < n:
        raise DependentPrefixError("initial vector B @ mu does not generate a full Krylov sequence")
    M = C @ W[:, :n]
    Q = M @ _toeplitz_prefix(d)
    sol = least_squares_row(Q, b[1:] - d[1:], tol)
    rho = sol.x
    sigma = np.empty(n + 1)
    sigma[0] = 1.0
    sigma[1:] = rho @ M
    return rho, sigma, sigma_mul(sigma, d), W


def rank_one_update(sys, mu, b, tol=DEFAULT_TOL, *, d=None, verify=True, rng=None):
    """Least-squares rank-one output feedback toward target polynomial ``b``.

    Parameters
    ----------
    sys : FeedbackSystem
    mu : (m,) array_like
        Input combination; the Krylov sequence starts at ``B @ mu``.
    b : (n+1,) array_like
        Monic target polynomial.
    d : (n+1,) array_like, optional
        Current annihilating polynomial of ``sys.A``. Extracted from the
        same Krylov sequence when omitted.
    verify : bool
        Recompute the annihilating polynomial of ``A + B K C`` from fresh
        random initial vectors and raise ``VerificationError`` on mismatch.
    rng : seed or Generator, optional
        Randomness for the verification path.

    Returns
    -------
    RankOneResult
    """
    n = sys.n
    mu = check_vector(mu, "mu", size=sys.m)
    b = check_monic(b, "b", degree=n)
    if d is None:
        d = annihilating_from_krylov(full_krylov(sys.A, sys.B @ mu, tol), tol)
    else:
        d = check_monic(d, "d", degree=n)
    rho, sigma, d_new, W = _rank_one_core(sys.A, sys.B, sys.C, mu, b, d, tol)
    K = -np.outer(mu, rho)
    F = _state_feedback(W[:, :n], mu, sigma, tol)
    residual = float(np.linalg.norm(b - d_new))
    gap = float(np.linalg.norm(b - d))
    rel = residual / gap if gap > 0 else 0.0
    err = None
    if verify:
        err = verification_error(sys.closed_loop(K), d_new, rng)
        if err > VERIFY_RTOL:
            raise VerificationError(f"recomputed annihilating polynomial differs by {err:.3e} (relative)")
    return RankOneResult(
        rho=rho,
        sigma=sigma,
        K=K,
        F=F,
        d=d,
        d_new=d_new,
        residual=residual,
        relative_residual=rel,
        mu=mu,
        verdict=classify_distance(residual, float(np.linalg.norm(b))),
        verification_error=err,
    )


def _state_feedback(V, mu, sigma, tol):
    n = V.shape[0]
    scaled, s = _equilibrate(V)
    cond = condition_number(scaled)
    if cond > 1.0 / tol.rank_threshold((n, n)):
        raise ConditioningError(f"Krylov basis condition estimate {cond:.3e} too large")
    # row vector y with y V = sigma[1:]
    y = np.linalg.solve(scaled.T, sigma[1:] / s)
    return -np.outer(mu, y)


def state_feedback_from_sigma(sys, mu, sigma, tol=DEFAULT_TOL):
    """State feedback ``F = -mu (sigma_1..sigma_n) (w^0|...|w^(n-1))^(-1)``.

    ``A + B F`` has annihilating polynomial ``sigma * d``.
    """
    mu = check_vector(mu, "mu", size=sys.m)
    sigma = check_sigma(sigma, "sigma")
    if sigma.shape[0] != sys.n + 1:
        raise ShapeError(f"sigma must have length {sys.n + 1}")
    Kry = full_krylov(sys.A, sys.B @ mu, tol)
    return _state_feedback(Kry.basis, mu, sigma, tol)


def verification_error(A_closed, claimed, rng=None, tries=4):
    """Relative coefficient mismatch between ``claimed`` and a fresh Krylov extraction."""
    check = annihilating_polynomial(A_closed, rng=rng, tries=tries)
    return float(np.linalg.norm(check - claimed) / np.linalg.norm(claimed))


def verify_feedback(sys, K, claimed, rng=None, rtol=VERIFY_RTOL):
    """Rebuild ``A + B K C`` and compare its annihilating polynomial with ``claimed``.

    Returns ``(ok, recomputed, relative_error)``.
    """
    A_closed = sys.closed_loop(K)
    claimed = check_monic(claimed, "claimed", degree=sys.n)
    recomputed = annihilating_polynomial(A_closed, rng=rng)
    err = float(np.linalg.norm(recomputed - claimed) / np.linalg.norm(claimed))
    return err <= rtol, recomputed, err


# ---------------------------------------------------------------------------
# BKC factorization


@dataclass(frozen=True)
class ReachabilityVerdict:
    """Whether ``A_hat - A`` factors as ``B K C``.

    ``column_condition``: every column of the difference lies in ``col(B)``.
    ``kernel_condition``: the difference vanishes on ``ker(C)``.
    """

    column_condition: bool
    kernel_condition: bool
    max_violation: float
    threshold: float
    K: np.ndarray | None = None

    @property
    def reachable(self):
        return self.column_condition and self.kernel_condition

    def __bool__(self):
        return self.reachable


def bkc_reachability_check(A, A_hat, B, C, tol=DEFAULT_TOL, *, rtol=1e-8):
    """Test whether ``A_hat = A + B K C`` for some ``K``; recover ``K`` if so.

    Violations are compared against ``rtol * max(1, ||A_hat||_F)``.
    """
    A = check_matrix(A, "A", square=True)
    n = A.shape[0]
    A_hat = check_matrix(A_hat, "A_hat", shape=(n, n))
    B = check_matrix(B, "B", shape=(n, None))
    C = check_matrix(C, "C", shape=(None, n))
    E = A_hat - A
    thr = rtol * max(1.0, float(np.linalg.norm(A_hat)))

    U, s, _ = np.linalg.svd(B, full_matrices=False)
    r = int(np.sum(s > tol.rank_threshold(B.shape) * (s[0] if s.size else 0.0))) if s.size else 0
    Ub = U[:, :r]
    col_viol = float(np.max(np.linalg.norm(E - Ub @ (Ub.T @ E), axis=0), initial=0.0))

    Z = kernel_basis(C, tol)
    ker_viol = float(np.max(np.linalg.norm(E @ Z, axis=0), initial=0.0)) if Z.size else 0.0

    col_ok = col_viol <= thr
    ker_ok = ker_viol <= thr
    K = None
    if col_ok and ker_ok:
        X = scipy.linalg.lstsq(B, E, lapack_driver="gelsy")[0]
        K = scipy.linalg.lstsq(C.T, X.T, lapack_driver="gelsy")[0].T
        fit = float(np.linalg.norm(A_hat - (A + B @ K @ C)))
        if fit > thr:
            col_ok = ker_ok = False
            K = None
            col_viol = max(col_viol, fit)
    return ReachabilityVerdict(col_ok, ker_ok, max(col_viol, ker_viol), thr, K)


# ---------------------------------------------------------------------------
# bilinear MIMO equation


@dataclass(frozen=True)
class BilinearResult:
    alpha: np.ndarray
    rho: np.ndarray
    K: np.ndarray
    sigma: np.ndarray
    d_new: np.ndarray
    residual_history: list
    converged: bool
    iterations: int


def mimo_bilinear_solve(sys, b, alpha0=None, max_iters=200, tol=DEFAULT_TOL, *, d=None, rng=None,
                        stall_tol=1e-12, stall_window=5):
    """Alternating least squares for ``rho^T C W(alpha) D = b - d``.

    ``W(alpha) = sum_i alpha_i W_i`` combines the Krylov sequences started at
    the columns of ``B``. Each half-step is an exact least-squares solve, so
    the residual history never increases; a step that would increase it
    (rounding) ends the iteration instead. Iteration also stops when the
    residual drops below ``residual_tol * max(1, ||b||)`` or when the total
    improvement over ``stall_window`` alternations is below ``stall_tol``.

    ``alpha0`` defaults to a seeded random unit vector.
    """
    n, m = sys.n, sys.m
    b = check_monic(b, "b", degree=n)
    rng = np.random.default_rng(rng)
    if alpha0 is None:
        alpha0 = rng.uniform(-1.0, 1.0, m)
    alpha = check_vector(alpha0, "alpha0", size=m).copy()
    if not np.any(alpha):
        raise DomainError("alpha0 must be nonzero")
    alpha /= np.linalg.norm(alpha)
    if d is None:
        d = annihilating_polynomial(sys.A, rng=rng)
    else:
        d = check_monic(d, "d", degree=n)

    Dt = _toeplitz_prefix(d)
    Ws = [krylov_columns(sys.A, sys.B[:, i])[:, :n] for i in range(m)]
    Qs = np.stack([sys.C @ W @ Dt for W in Ws])  # (m, p, n)
    f = b[1:] - d[1:]
    target = tol.residual_tol * max(1.0, float(np.linalg.norm(b)))

    rho = np.zeros(sys.p)
    history = [float(np.linalg.norm(f))]
    converged = history[0] <= target
    it = 0
    while not converged and it < max_iters:
        it += 1
        Qa = np.tensordot(alpha, Qs, axes=1)
        rho_new = least_squares_row(Qa, f, tol).x
        r1 = float(np.linalg.norm(f - rho_new @ Qa))
        if r1 > history[-1]:
            break
        rho = rho_new
        history.append(r1)
        if r1 <= target:
            converged = True
            break
        G = np.einsum("p,mpn->mn", rho, Qs)
        alpha_new = least_squares_row(G, f, tol).x
        r2 = float(np.linalg.norm(f - alpha_new @ G))
        if r2 > history[-1] or not np.any(alpha_new):
            break
        scale = np.linalg.norm(alpha_new)
        alpha, rho = alpha_new / scale, rho * scale
        history.append(r2)
        if r2 <= target:
            converged = True
            break
        if len(history) > 2 * stall_window and history[-1 - 2 * stall_window] - history[-1] < stall_tol:
            break

    W = sum(a * Wi for a, Wi in zip(alpha, Ws))
    scaled, _ = _equilibrate(W)
    if np.any(rho) and numerical_rank(scaled, tol) < n:
        raise DependentPrefixError("B @ alpha does not generate a full Krylov sequence; resample alpha0")
    sigma = np.empty(n + 1)
    sigma[0] = 1.0
    sigma[1:] = rho @ (sys.C @ W)
    return BilinearResult(
        alpha=alpha,
        rho=rho,
        K=-np.outer(alpha, rho),
        sigma=sigma,
        d_new=sigma_mul(sigma, d),
        residual_history=history,
        converged=converged,
        iterations=it,
    )
