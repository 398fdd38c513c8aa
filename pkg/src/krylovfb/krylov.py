"""Full Krylov sequences and the annihilating polynomials they determine."""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConditioningError, DependentPrefixError, DomainError, ShapeError
from .numerics import (
    DEFAULT_TOL,
    check_matrix,
    check_vector,
    condition_number,
    least_squares_row,
    numerical_rank,
)
from .sigma import check_sigma, sigma_inv, sigma_to_toeplitz


@dataclass(frozen=True)
class KrylovSeq:
    """Columns ``(w^0 | A w^0 | ... | A^n w^0)`` of an ``n x n`` matrix.

    ``columns`` has shape ``(n, n + 1)``; the first ``n`` columns are
    numerically independent.
    """

    columns: np.ndarray

    @property
    def n(self):
        return self.columns.shape[0]

    @property
    def initial(self):
        return self.columns[:, 0]

    @property
    def basis(self):
        """The invertible prefix ``(w^0 | ... | w^(n-1))``."""
        return self.columns[:, :-1]

    def condition(self):
        """Condition number of the column-equilibrated prefix."""
        return condition_number(_equilibrate(self.basis)[0])


def _equilibrate(W):
    s = np.linalg.norm(W, axis=0)
    s[s == 0] = 1.0
    return W / s, s


def _check_prefix(W, tol):
    n = W.shape[0]
    scaled, _ = _equilibrate(W[:, :n])
    r = numerical_rank(scaled, tol)
    if r < n:
        raise DependentPrefixError(
            f"Krylov prefix has numerical rank {r} < {n}; resample the initial vector"
        )


def krylov_columns(A, w0):
    """Raw iterates ``(w^0, A w^0, ..., A^n w^0)`` as an ``n x (n+1)`` array."""
    n = A.shape[0]
    W = np.empty((n, n + 1))
    W[:, 0] = w0
    for j in range(n):
        W[:, j + 1] = A @ W[:, j]
    return W


def full_krylov(A, w0, tol=DEFAULT_TOL):
    """Build the full Krylov sequence of ``A`` from ``w0``.

    Raises
    ------
    DependentPrefixError
        If ``w0, ..., A^(n-1) w0`` are numerically dependent.
    """
    A = check_matrix(A, "A", square=True)
    w0 = check_vector(w0, "w0", size=A.shape[0])
    if not np.any(w0):
        raise DomainError("initial vector must be nonzero")
    W = krylov_columns(A, w0)
    _check_prefix(W, tol)
    return KrylovSeq(W)


def annihilating_from_krylov(K, tol=DEFAULT_TOL):
    """Monic ``d`` with ``sum_j d_(n-j) w^j = 0``.

    Fixes ``d_0 = 1`` and solves the remaining system by least squares
    on column-equilibrated iterates.
    """
    W = K.columns
    n = K.n
    scaled, s = _equilibrate(W)
    # row form: x^T (scaled prefix)^T = -(scaled w^n)^T
    sol = least_squares_row(scaled[:, :n].T, -scaled[:, n], tol)
    coef = sol.x / s[:n] * s[n]  # coefficient of w^j, j = 0..n-1
    d = np.empty(n + 1)
    d[0] = 1.0
    d[1:] = coef[::-1]
    return d


def matrix_from_krylov(K, tol=DEFAULT_TOL):
    """Recover ``A = (w^1|...|w^n)(w^0|...|w^(n-1))^(-1)``."""
    n = K.n
    scaled, s = _equilibrate(K.basis)
    cond = condition_number(scaled)
    if cond > 1.0 / tol.rank_threshold((n, n)):
        raise ConditioningError(f"Krylov basis condition estimate {cond:.3e} too large")
    # A V = W1 with V = V_s diag(s)  =>  V_s^T A^T = (W1 diag(1/s))^T
    return np.linalg.solve(scaled.T, (K.columns[:, 1:] / s).T).T


def transform_krylov(K, sigma, tol=DEFAULT_TOL):
    """Return ``V`` with ``V @ T(sigma) = W``, i.e. ``V = W @ T(sigma)^(-1)``."""
    sigma = check_sigma(sigma, "sigma")
    if sigma.shape[0] != K.n + 1:
        raise ShapeError(f"sigma must have length {K.n + 1}, got {sigma.shape[0]}")
    V = K.columns @ sigma_to_toeplitz(sigma_inv(sigma))
    _check_prefix(V, tol)
    return KrylovSeq(V)


def annihilating_polynomial(A, rng=None, tries=4, tol=DEFAULT_TOL):
    """Annihilating polynomial of ``A`` from fresh random initial vectors.

    Several Gaussian start vectors are drawn and the best-conditioned full
    sequence is used. This is the independent path used to verify solver
    claims.
    """
    A = check_matrix(A, "A", square=True)
    rng = np.random.default_rng(rng)
    best = None
    for _ in range(max(1, tries)):
        w0 = rng.standard_normal(A.shape[0])
        try:
            K = full_krylov(A, w0, tol)
        except DependentPrefixError:
            continue
        c = K.condition()
        if best is None or c < best[0]:
            best = (c, K)
    if best is None:
        raise DependentPrefixError("no random initial vector generated a full Krylov sequence")
    return annihilating_from_krylov(best[1], tol)
