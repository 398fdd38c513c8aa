"""Dense real linear-algebra primitives and input validation.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64 and
monic polynomials are 1-D arrays ``(1, d_1, ..., d_n)`` ordered from the
leading coefficient down, i.e. ``d(s) = s^n + d_1 s^(n-1) + ... + d_n``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import DomainError, ShapeError

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Tolerance:
    """Numerical thresholds shared by the solvers.

    Parameters
    ----------
    rank_tol : float or None
        Relative singular-value threshold. ``None`` means
        ``max(rows, cols) * eps`` of the matrix at hand.
    residual_tol : float
        Absolute residual threshold.
    """

    rank_tol: float | None = None
    residual_tol: float = 1e-9

    def __post_init__(self):
        if self.rank_tol is not None and not self.rank_tol > 0:
            raise DomainError("rank_tol must be strictly positive")
        if not self.residual_tol > 0:
            raise DomainError("residual_tol must be strictly positive")

    def rank_threshold(self, shape):
        if self.rank_tol is not None:
            return self.rank_tol
        return max(max(shape), 1) * EPS


DEFAULT_TOL = Tolerance()


# ---------------------------------------------------------------------------
# validation helpers


def check_matrix(x, name="matrix", *, shape=None, square=False):
    """Return ``x`` as a finite float64 2-D array, raising on bad input."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if square and arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"{name} must be square, got {arr.shape}")
    if shape is not None:
        for axis, want in enumerate(shape):
            if want is not None and arr.shape[axis] != want:
                raise ShapeError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def check_vector(x, name="vector", *, size=None):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got ndim={arr.ndim}")
    if size is not None and arr.shape[0] != size:
        raise ShapeError(f"{name} has length {arr.shape[0]}, expected {size}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def check_monic(d, name="polynomial", *, degree=None):
    """Validate a monic coefficient vector ``(1, d_1, ..., d_n)``."""
    arr = check_vector(d, name)
    if arr.shape[0] < 1 or arr[0] != 1.0:
        raise DomainError(f"{name} must be monic (leading coefficient exactly 1)")
    if degree is not None and arr.shape[0] - 1 != degree:
        raise ShapeError(f"{name} has degree {arr.shape[0] - 1}, expected {degree}")
    return arr


# ---------------------------------------------------------------------------
# least squares, rank, kernel


@dataclass(frozen=True)
class LeastSquaresSolution:
    """Minimizer of ``||x^T A - b^T||`` with the orthogonal split ``b = b' + b''``."""

    x: np.ndarray
    projected_rhs: np.ndarray
    residual_norm: float
    relative_residual: float


def least_squares_row(A, b, tol=DEFAULT_TOL):
    """Solve ``x^T A = b^T`` in the least-squares sense.

    The minimum-norm minimizer is returned when ``A`` is rank deficient.
    A complete orthogonal factorization (pivoted QR, LAPACK ``gelsy``) is
    used so the conditioning of ``A`` is not squared.

    Parameters
    ----------
    A : (m, n) array_like
    b : (n,) array_like
    tol : Tolerance

    Returns
    -------
    LeastSquaresSolution
        ``projected_rhs = x^T A`` is the component of ``b`` in ``row(A)``.
    """
    A = check_matrix(A, "A")
    b = check_vector(b, "b", size=A.shape[1])
    m, n = A.shape
    bnorm = float(np.linalg.norm(b))
    if m == 0 or bnorm == 0.0 or not np.any(A):
        x = np.zeros(m)
        proj = np.zeros(n)
    else:
        cond = tol.rank_threshold(A.shape)
        x, _, _, _ = scipy.linalg.lstsq(A.T, b, cond=cond, lapack_driver="gelsy")
        proj = x @ A
    res = float(np.linalg.norm(b - proj))
    rel = res / bnorm if bnorm > 0 else 0.0
    return LeastSquaresSolution(x=x, projected_rhs=proj, residual_norm=res, relative_residual=rel)


def numerical_rank(A, tol=DEFAULT_TOL):
    """Number of singular values above ``rank_tol * sigma_max``."""
    A = check_matrix(A, "A")
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol.rank_threshold(A.shape) * s[0]))


def kernel_basis(A, tol=DEFAULT_TOL):
    """Orthonormal columns spanning the numerical null space of ``A``."""
    A = check_matrix(A, "A")
    n = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(n)
    _, _, vt = np.linalg.svd(A, full_matrices=True)
    r = numerical_rank(A, tol)
    return vt[r:].T.copy()


def condition_number(A):
    """2-norm condition number; ``inf`` for singular input."""
    s = np.linalg.svd(check_matrix(A, "A"), compute_uv=False)
    if s.size == 0:
        return 1.0
    return float(s[0] / s[-1]) if s[-1] > 0 else np.inf


# ---------------------------------------------------------------------------
# polynomials


def companion_matrix(d):
    """Companion matrix with ones on the subdiagonal and ``-d`` reversed in the last column.

    With this layout ``e_1, A e_1, ..., A^(n-1) e_1`` are the standard
    basis vectors, so ``e_1`` always starts a full Krylov sequence.

    >>> companion_matrix([1.0, -3.0, 2.0])
    array([[ 0., -2.],
           [ 1.,  3.]])
    """
    d = check_monic(d, "d")
    n = d.shape[0] - 1
    if n < 1:
        raise DomainError("companion matrix needs degree >= 1")
    A = np.zeros((n, n))
    A[np.arange(1, n), np.arange(n - 1)] = 1.0
    A[:, -1] = -d[:0:-1]
    return A


def poly_eval(d, z):
    """Horner evaluation of a coefficient vector at (complex) points ``z``."""
    z = np.asarray(z)
    acc = np.zeros_like(z, dtype=complex) + d[0]
    for c in d[1:]:
        acc = acc * z + c
    return acc


def _pair_conjugates(roots, tol):
    roots = np.asarray(roots, dtype=complex)
    scale = 1.0 + np.abs(roots)
    is_real = np.abs(roots.imag) <= tol * scale
    real = np.sort(roots[is_real].real)
    upper = roots[~is_real & (roots.imag > 0)]
    lower = list(roots[~is_real & (roots.imag < 0)])
    if len(upper) != len(lower):
        raise DomainError("roots are not closed under conjugation")
    pairs = []
    for z in upper[np.argsort(upper.real)]:
        k = int(np.argmin([abs(z - np.conj(w)) for w in lower]))
        w = lower.pop(k)
        if abs(z - np.conj(w)) > max(tol, 1e-6) * (1.0 + abs(z)):
            raise DomainError("roots are not closed under conjugation")
        pairs.append(0.5 * (z + np.conj(w)))
    return real, np.asarray(pairs, dtype=complex)


def poly_roots(d, tol=DEFAULT_TOL):
    """Roots of a real monic polynomial, with exact conjugate pairs.

    Computed as eigenvalues of the companion matrix. Roots whose imaginary
    part is below ``sqrt(residual_tol)``-scale noise are snapped to the real
    axis; the rest are returned as exact conjugate pairs, upper member first.
    """
    d = check_monic(d, "d")
    if d.shape[0] == 1:
        return np.zeros(0, dtype=complex)
    ev = np.linalg.eigvals(companion_matrix(d))
    real, pairs = _pair_conjugates(ev, np.sqrt(tol.residual_tol) * 1e-2)
    out = list(real.astype(complex))
    for z in pairs:
        out.extend([z, np.conj(z)])
    return np.asarray(out, dtype=complex)


def poly_from_roots(roots, tol=DEFAULT_TOL):
    """Real monic polynomial with the given root multiset.

    Conjugate pairs are multiplied out as real quadratics so the result is
    real by construction.
    """
    roots = np.asarray(roots, dtype=complex).ravel()
    if not np.all(np.isfinite(roots)):
        raise DomainError("roots contain non-finite entries")
    real, pairs = _pair_conjugates(roots, tol.residual_tol)
    d = np.array([1.0])
    for r in real:
        d = np.convolve(d, [1.0, -r])
    for z in pairs:
        d = np.convolve(d, [1.0, -2.0 * z.real, abs(z) ** 2])
    d[0] = 1.0
    return d


def charpoly_eig(A):
    """Characteristic polynomial from eigenvalues (independent of any Krylov path)."""
    A = check_matrix(A, "A", square=True)
    return poly_from_roots(np.linalg.eigvals(A), Tolerance(residual_tol=1e-6))
