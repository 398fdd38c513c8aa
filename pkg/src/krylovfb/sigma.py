"""Unit-leading truncated power series and their Toeplitz realizations.

An element ``a = (1, a_1, ..., a_k)`` stands for ``1 + a_1 s + ... + a_k s^k``
modulo ``s^(k+1)``. Under truncated multiplication these sequences form a
commutative group; ``sigma_to_toeplitz`` is a faithful matrix representation.
"""

import numpy as np

from .exceptions import DomainError, ShapeError
from .numerics import check_vector


def check_sigma(a, name="sigma"):
    a = check_vector(a, name)
    if a.shape[0] < 1 or a[0] != 1.0:
        raise DomainError(f"{name} must have leading entry exactly 1")
    return a


def sigma_identity(length):
    e = np.zeros(length)
    e[0] = 1.0
    return e


def sigma_mul(a, b):
    """Truncated product ``a(s) b(s) mod s^(k+1)`` (direct convolution)."""
    a = check_sigma(a, "a")
    b = check_sigma(b, "b")
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    out = np.convolve(a, b)[: a.shape[0]]
    out[0] = 1.0
    return out


def sigma_inv(a):
    """Inverse under truncated multiplication.

    Forward recurrence ``inv_j = -sum_{i=1..j} a_i inv_{j-i}``.
    """
    a = check_sigma(a, "a")
    k1 = a.shape[0]
    inv = np.zeros(k1)
    inv[0] = 1.0
    for j in range(1, k1):
        inv[j] = -np.dot(a[1 : j + 1], inv[j - 1 :: -1][:j])
    return inv


def sigma_to_toeplitz(a):
    """Upper-triangular Toeplitz matrix with entry ``(i, j) = a_{j-i}``."""
    a = check_sigma(a, "a")
    k1 = a.shape[0]
    T = np.zeros((k1, k1))
    for i in range(k1):
        T[i, i:] = a[: k1 - i]
    return T


def sigma_apply_last_column(a, d):
    """Coefficients ``b`` with ``T(a) @ reversed(d) = reversed(b)``.

    This is the matrix-vector form of ``a * d``; the two must agree.
    """
    a = check_sigma(a, "a")
    d = check_sigma(d, "d")
    if a.shape != d.shape:
        raise ShapeError(f"length mismatch: {a.shape[0]} vs {d.shape[0]}")
    b = (sigma_to_toeplitz(a) @ d[::-1])[::-1].copy()
    b[0] = 1.0
    return b
