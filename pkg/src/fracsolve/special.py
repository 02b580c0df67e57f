"""Gamma and Mittag-Leffler functions.

The Mittag-Leffler function is only needed as a reference solution, so it is
evaluated from its power series in arbitrary precision: for large negative
arguments the alternating terms grow far beyond the final value and any
double-precision summation loses every digit.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import mpmath
import numpy as np

from fracsolve.errors import ConvergenceError, DomainError

__all__ = ["MlSeriesConfig", "gamma", "mittag_leffler", "mittag_leffler_array"]


@dataclass(frozen=True)
class MlSeriesConfig:
    digits: int = 200
    max_terms: int = 10_000
    # stop once a term is below rel_tol * |partial sum|
    rel_tol_exponent: int = -40

    def __post_init__(self) -> None:
        if self.digits < 50:
            raise ValueError("digits must be >= 50")
        if self.max_terms < 1000:
            raise ValueError("max_terms must be >= 1000")


DEFAULT_ML_CONFIG = MlSeriesConfig()


def gamma(x: float) -> float:
    """Gamma function for positive real arguments."""
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"gamma is only defined here for x > 0, got {x}")
    return math.gamma(x)


_COEFF_CACHE: dict[tuple[float, int], list] = {}
_COEFF_LOCK = threading.Lock()


def _series_coefficients(beta: float, dps: int, n_terms: int) -> list:
    # 1/Gamma(beta*k + 1) for k < n_terms, grown on demand and shared
    key = (beta, dps)
    with _COEFF_LOCK:
        coeffs = _COEFF_CACHE.setdefault(key, [])
        if len(coeffs) < n_terms:
            with mpmath.workdps(dps):
                b = mpmath.mpf(beta)
                coeffs.extend(
                    mpmath.rgamma(b * k + 1) for k in range(len(coeffs), n_terms)
                )
        return coeffs


def _working_digits(beta: float, z: float, base: int) -> int:
    # the largest series term is roughly exp(|z|^(1/beta)); carry that many
    # extra digits so the cancellation still leaves ``base`` correct ones.
    # Rounded up to a multiple of 50 so nearby arguments share coefficients.
    az = abs(z)
    extra = 0
    if az > 1.0:
        extra = int(math.ceil(az ** (1.0 / beta) / math.log(10.0)))
    return 50 * int(math.ceil((base + extra) / 50))


def mittag_leffler(
    beta: float, z: float, config: MlSeriesConfig = DEFAULT_ML_CONFIG
) -> float:
    r"""One-parameter Mittag-Leffler function :math:`E_\beta(z)`.

    Sums :math:`\sum_k z^k / \Gamma(\beta k + 1)` in extended precision.

    Raises
    ------
    ConvergenceError
        If the series does not settle within ``config.max_terms`` terms.
    """
    beta = float(beta)
    z = float(z)
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if z == 0.0:
        return 1.0

    # past this index the terms decrease monotonically
    k_peak = abs(z) ** (1.0 / beta)
    if k_peak >= config.max_terms:
        raise ConvergenceError(
            f"Mittag-Leffler series for beta={beta}, z={z} peaks near term "
            f"{k_peak:.3g}, beyond the cap of {config.max_terms}"
        )
    dps = _working_digits(beta, z, config.digits)
    coeffs: list = []
    with mpmath.workdps(dps):
        zz = mpmath.mpf(z)
        eps = mpmath.mpf(10) ** config.rel_tol_exponent
        total = mpmath.mpf(0)
        power = mpmath.mpf(1)
        for k in range(config.max_terms):
            if k >= len(coeffs):
                want = min(config.max_terms, max(64, 2 * len(coeffs)))
                coeffs = _series_coefficients(beta, dps, want)
            term = power * coeffs[k]
            total += term
            if k > k_peak and abs(term) < eps * abs(total):
                return float(total)
            power *= zz
    raise ConvergenceError(
        f"Mittag-Leffler series for beta={beta}, z={z} did not converge "
        f"in {config.max_terms} terms"
    )


def mittag_leffler_array(
    beta: float, z: np.ndarray, config: MlSeriesConfig = DEFAULT_ML_CONFIG
) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.fromiter(
        (mittag_leffler(beta, zi, config) for zi in z.ravel()), float, count=z.size
    )
    return out.reshape(z.shape)
