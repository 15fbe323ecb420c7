"""Dense LU factorisation with partial pivoting and the helpers built on it.

The elimination is the textbook right-looking variant; each step is a
vectorised rank-1 update so an N x N factorisation costs N numpy calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SingularError

PIVOT_FLOOR = 1e-300


@dataclass(frozen=True)
class LUFactors:
    """``a[perm] == lower @ upper`` with ``lu`` holding both triangles."""

    lu: np.ndarray
    perm: np.ndarray
    sign: float

    @property
    def lower(self) -> np.ndarray:
        return np.tril(self.lu, -1) + np.eye(len(self.lu))

    @property
    def upper(self) -> np.ndarray:
        return np.triu(self.lu)

    @property
    def pivots(self) -> np.ndarray:
        return np.diag(self.lu)

    @property
    def singular(self) -> bool:
        return bool(np.any(self.pivots == 0.0))


def _square(m) -> np.ndarray:
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def lu_factor(m) -> LUFactors:
    """Partial-pivoted LU.  A singular input yields a zero pivot, not an error."""
    a = _square(m)
    n = len(a)
    perm = np.arange(n)
    sign = 1.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if a[p, k] == 0.0:
            # whole column below k is zero: nothing to eliminate
            continue
        if p != k:
            a[[k, p]] = a[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            sign = -sign
        a[k + 1:, k] /= a[k, k]
        a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:])
    return LUFactors(a, perm, sign)


def determinant(m) -> float:
    f = lu_factor(m)
    with np.errstate(over="ignore", under="ignore"):  # +-inf / 0 are the honest answers
        return float(f.sign * np.prod(f.pivots))


def sign_log_determinant(m) -> tuple[float, float]:
    """(sign, log|det|); a singular matrix gives (0.0, -inf)."""
    f = lu_factor(m)
    piv = f.pivots
    if np.any(piv == 0.0):
        return 0.0, -np.inf
    sign = f.sign * float(np.prod(np.sign(piv)))
    return sign, float(np.sum(np.log(np.abs(piv))))


def lu_solve(f: LUFactors, b) -> np.ndarray:
    """Solve ``A x = b`` for the matrix A that produced ``f``."""
    piv = f.pivots
    if np.any(np.abs(piv) <= PIVOT_FLOOR):
        k = int(np.argmax(np.abs(piv) <= PIVOT_FLOOR))
        raise SingularError(f"matrix is singular (pivot {k} = {piv[k]:.3g})")
    lu = f.lu
    x = np.array(b, dtype=float)[f.perm]
    n = len(lu)
    for i in range(1, n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] -= lu[i, i + 1:] @ x[i + 1:]
        x[i] /= lu[i, i]
    return x


def inverse(m) -> np.ndarray:
    a = _square(m)
    return lu_solve(lu_factor(a), np.eye(len(a)))
