"""Dense LU factorization with partial pivoting for the small Newton systems.

The systems are tiny (one row per equation) and factorized once per time
step, so below ``_SCALAR_LIMIT`` rows the elimination runs on Python floats,
where per-call numpy overhead would otherwise dominate.
"""

from __future__ import annotations

import numpy as np

from fracsolve.errors import SingularMatrix

# a pivot smaller than this times ||A||_inf is treated as zero
PIVOT_THRESHOLD = 1e-14
_SCALAR_LIMIT = 12


class LUFactors:
    """Packed ``L\\U`` factors of ``P A = L U`` plus the row permutation."""

    __slots__ = ("lu", "perm", "_rows")

    def __init__(self, lu: np.ndarray, perm: np.ndarray, rows: list | None = None):
        self.lu = lu
        self.perm = perm
        self._rows = rows

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rows = self._rows
        if rows is not None:
            b = [float(v) for v in np.asarray(rhs, dtype=float)]
            x = [b[p] for p in self.perm]
            n = len(x)
            for i in range(1, n):
                ri = rows[i]
                s = x[i]
                for k in range(i):
                    s -= ri[k] * x[k]
                x[i] = s
            for i in range(n - 1, -1, -1):
                ri = rows[i]
                s = x[i]
                for k in range(i + 1, n):
                    s -= ri[k] * x[k]
                x[i] = s / ri[i]
            return np.array(x)
        lu = self.lu
        x = np.asarray(rhs, dtype=float)[self.perm]
        for i in range(1, lu.shape[0]):
            x[i] -= lu[i, :i] @ x[:i]
        for i in range(lu.shape[0] - 1, -1, -1):
            x[i] = (x[i] - lu[i, i + 1 :] @ x[i + 1 :]) / lu[i, i]
        return x


def _factor_scalar(a: np.ndarray) -> LUFactors:
    rows = a.tolist()
    n = len(rows)
    norm = max(sum(abs(v) for v in row) for row in rows)
    if norm != norm or norm == float("inf"):
        raise SingularMatrix("matrix has non-finite entries")
    threshold = PIVOT_THRESHOLD * norm
    perm = list(range(n))
    for k in range(n):
        p = max(range(k, n), key=lambda i: abs(rows[i][k]))
        piv = rows[p][k]
        if abs(piv) <= threshold or piv == 0.0:
            raise SingularMatrix(f"pivot {k} is below {threshold:.3e}")
        if p != k:
            rows[k], rows[p] = rows[p], rows[k]
            perm[k], perm[p] = perm[p], perm[k]
        rk = rows[k]
        for i in range(k + 1, n):
            ri = rows[i]
            m = ri[k] / piv
            ri[k] = m
            if m != 0.0:
                for j in range(k + 1, n):
                    ri[j] -= m * rk[j]
    return LUFactors(np.array(rows), np.array(perm), rows)


def lu_factor(a: np.ndarray) -> LUFactors:
    """Factor a square matrix, raising :class:`SingularMatrix` on a tiny pivot."""
    lu = np.array(a, dtype=float)
    if lu.ndim != 2 or lu.shape[0] != lu.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {lu.shape}")
    n = lu.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    if n <= _SCALAR_LIMIT:
        return _factor_scalar(lu)
    norm = np.abs(lu).sum(axis=1).max()
    if not np.isfinite(norm):
        raise SingularMatrix("matrix has non-finite entries")
    threshold = PIVOT_THRESHOLD * norm
    perm = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) <= threshold or lu[p, k] == 0.0:
            raise SingularMatrix(f"pivot {k} is below {threshold:.3e}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        lu[k + 1 :, k] /= lu[k, k]
        lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    return LUFactors(lu, perm)


def lu_solve(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = rhs`` by LU with partial pivoting."""
    return lu_factor(a).solve(rhs)
