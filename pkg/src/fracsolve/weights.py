"""Product-integration weights on a uniform grid.

On each subinterval ``[t_r, t_{r+1}]`` the integrand of the Volterra form is
replaced by a constant (rectangular rule, predictor) or by the linear
interpolant (trapezoidal rule, corrector); the power-law kernel is then
integrated exactly, which yields the closed-form weights below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fracsolve.special import gamma

__all__ = [
    "PiWeights",
    "build_weights",
    "corrector_weights",
    "first_corrector_weight",
    "predictor_weights",
    "taylor_term",
]


def _check(beta: float, n: int) -> None:
    if not beta > 0:
        raise ValueError(f"order must be positive, got {beta}")
    if n < 1:
        raise ValueError(f"need at least one weight, got {n}")


def predictor_weights(beta: float, n: int) -> np.ndarray:
    """Rectangular-rule weights ``b_r = ((r+1)^beta - r^beta) / Gamma(beta+1)``.

    Returns ``b_0 .. b_{n-1}``.
    """
    _check(beta, n)
    k = np.arange(n + 1, dtype=float) ** beta
    return np.diff(k) / gamma(beta + 1.0)


# below this index the closed forms are evaluated literally; above it the
# differences of large powers cancel and a binomial series is used instead
_SERIES_FROM = 16
_SERIES_TERMS = 24


def _binomials(p: float, k_max: int) -> np.ndarray:
    # generalized binomial coefficients C(p, k), k = 0..k_max
    out = np.empty(k_max + 1)
    out[0] = 1.0
    for k in range(1, k_max + 1):
        out[k] = out[k - 1] * (p - k + 1) / k
    return out


def _second_difference(p: float, r: np.ndarray) -> np.ndarray:
    """``(r-1)^p - 2 r^p + (r+1)^p`` for integer ``r >= 1``."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    small = r < _SERIES_FROM
    rs = r[small]
    out[small] = (rs - 1.0) ** p - 2.0 * rs**p + (rs + 1.0) ** p
    rl = r[~small]
    if rl.size:
        binom = _binomials(p, 2 * _SERIES_TERMS)
        x2 = rl**-2.0
        acc = np.zeros_like(rl)
        # sum from the smallest term down
        for k in range(_SERIES_TERMS, 0, -1):
            acc = acc * x2 + binom[2 * k]
        out[~small] = 2.0 * rl**p * x2 * acc
    return out


def _end_difference(p: float, n: np.ndarray) -> np.ndarray:
    """``(n-1)^p - n^p + p n^(p-1)`` for integer ``n >= 1``."""
    n = np.asarray(n, dtype=float)
    out = np.empty_like(n)
    small = n < _SERIES_FROM
    ns = n[small]
    out[small] = (ns - 1.0) ** p - ns ** (p - 1.0) * (ns - p)
    nl = n[~small]
    if nl.size:
        binom = _binomials(p, 2 * _SERIES_TERMS)
        x = -1.0 / nl
        acc = np.zeros_like(nl)
        for k in range(2 * _SERIES_TERMS, 1, -1):
            acc = acc * x + binom[k]
        out[~small] = nl**p * x * x * acc
    return out


def corrector_weights(beta: float, n: int) -> np.ndarray:
    """Trapezoidal-rule convolution weights ``d_0 .. d_{n-1}``.

    ``d_0 = 1/Gamma(beta+2)`` and, for ``r >= 1``, ``d_r`` is the second
    central difference of ``r^(beta+1)`` over ``Gamma(beta+2)``.
    """
    _check(beta, n)
    d = np.empty(n)
    d[0] = 1.0
    d[1:] = _second_difference(beta + 1.0, np.arange(1, n))
    return d / gamma(beta + 2.0)


def first_corrector_weight(beta: float, n) -> np.ndarray | float:
    """Weight ``c_n`` of the initial node in the trapezoidal rule at step ``n``.

    ``c_n = ((n-1)^(beta+1) - n^beta (n-beta-1)) / Gamma(beta+2)``. Accepts a
    scalar or an array of step indices (all ``>= 1``).
    """
    if not beta > 0:
        raise ValueError(f"order must be positive, got {beta}")
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 1):
        raise ValueError("step index must be >= 1")
    c = _end_difference(beta + 1.0, np.atleast_1d(n_arr)) / gamma(beta + 2.0)
    return float(c[0]) if n_arr.ndim == 0 else c.reshape(n_arr.shape)


def taylor_term(x0: np.ndarray, t0: float, t) -> np.ndarray:
    """Taylor polynomial of the initial data, ``sum_k (t-t0)^k / k! * x0[k]``.

    ``t`` may be a scalar (result shape ``(M,)``) or a vector of times
    (result shape ``(len(t), M)``).
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    dt = np.asarray(t, dtype=float) - t0
    out = np.multiply.outer(np.ones_like(dt), x0[0])
    for k in range(1, x0.shape[0]):
        out = out + np.multiply.outer(dt**k / math.factorial(k), x0[k])
    return out


@dataclass(frozen=True)
class PiWeights:
    """Weight tables for every equation of a system, shape ``(M, ...)``.

    ``c[:, n]`` is defined for ``n >= 1`` (column 0 is unused and set to 0).
    """

    b: np.ndarray
    d: np.ndarray
    c: np.ndarray
    a0: np.ndarray
    h_pow_beta: np.ndarray

    @property
    def n_steps(self) -> int:
        return int(self.b.shape[1])


def build_weights(beta: np.ndarray, h: float, n_steps: int) -> PiWeights:
    """Precompute all weight tables for ``n_steps`` steps of size ``h``."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    n = max(1, int(n_steps))
    m = beta.size
    b = np.empty((m, n))
    d = np.empty((m, n))
    c = np.zeros((m, n + 1))
    steps = np.arange(1, n + 1)
    # identical orders share one table
    cache: dict[float, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    for i, bi in enumerate(beta.tolist()):
        if bi not in cache:
            cache[bi] = (
                predictor_weights(bi, n),
                corrector_weights(bi, n),
                first_corrector_weight(bi, steps),
            )
        b[i], d[i], c[i, 1:] = cache[bi]
    hpow = h**beta
    for arr in (b, d, c):
        arr.setflags(write=False)
    return PiWeights(b=b, d=d, c=c, a0=hpow * d[:, 0], h_pow_beta=hpow)
