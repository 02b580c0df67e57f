"""History convolution sums ``S_n = sum_{j=lo}^{n-1} w[n-j] * f[j]``.

Both solvers need, at every step ``n``, a lag-weighted sum over all earlier
right-hand-side evaluations. Summed directly this costs ``O(n)`` per step and
``O(N^2)`` per solve. :class:`HistoryConvolution` instead splits the
lower-triangular weight matrix into power-of-two blocks: history rows are
grouped into blocks ``[a, a+L)`` (in offsets from ``lo``) with ``a`` a multiple
of ``2L``, and each block, once complete, is pushed by a single FFT product to
its ``L`` target steps ``a+L+1 .. a+2L``. Every target then only needs a
direct tail of at most ``base_block`` terms. The first ``base_block`` targets
are summed directly. Total work is ``O(N log^2 N)``.

Weights are passed as a 2-D array ``w[i, k]`` (equation ``i``, lag ``k``) or
a 1-D array shared by every equation; lags past the end count as zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Optional

import numpy as np

from fracsolve.errors import PlanError

__all__ = [
    "ConvPlan",
    "HistoryConvolution",
    "block_schedule",
    "direct_history_sum",
    "fft_block_contribution",
    "history_sum",
]

DIRECT = "direct"
FFT = "fft"


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def _as_weight_matrix(weights: np.ndarray) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    return w[None, :] if w.ndim == 1 else w


@dataclass
class ConvPlan:
    """Evaluation strategy plus the cache of transformed weight slices.

    A plan belongs to one solve; it is mutated as the cache grows.

    Parameters
    ----------
    base_block : int
        Length of the directly summed initial segment and of the smallest FFT
        block; a power of two.
    mode : {"fft", "direct"}
    max_transform : int
        Largest FFT length the plan may create.
    """

    base_block: int = 16
    mode: str = FFT
    max_transform: int = 1 << 24
    weight_transforms: dict = field(default_factory=dict, repr=False)
    # rough multiply-add count, for scaling checks
    work: int = 0

    def __post_init__(self) -> None:
        r = self.base_block
        if r < 2 or r & (r - 1):
            raise PlanError(f"base_block must be a power of two >= 2, got {r}")
        mode = str(self.mode).lower()
        if mode in ("on", "fft", "fftpartitioned", "fft_partitioned"):
            mode = FFT
        elif mode in ("off", "direct"):
            mode = DIRECT
        else:
            raise PlanError(f"unknown convolution mode {self.mode!r}")
        self.mode = mode

    @property
    def is_fft(self) -> bool:
        return self.mode == FFT

    def fresh(self) -> "ConvPlan":
        """Same settings with an empty cache."""
        return ConvPlan(self.base_block, self.mode, self.max_transform)


def direct_history_sum(
    weights: np.ndarray, f_history: np.ndarray, n: int, lo: int, hi: int
) -> np.ndarray:
    """``sum_{j=lo}^{hi} weights[n-j] * f_history[j]`` (``hi`` inclusive)."""
    if not 0 <= lo or hi > n or hi >= len(f_history):
        raise IndexError(f"window [{lo}, {hi}] invalid for n={n}")
    w = _as_weight_matrix(weights)
    f = np.asarray(f_history, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    if hi < lo:
        return np.zeros(max(w.shape[0], f.shape[1]))
    if n - lo >= w.shape[1]:
        raise IndexError(f"lag {n - lo} exceeds the {w.shape[1]} available weights")
    lags = n - np.arange(lo, hi + 1)
    w_win = np.broadcast_to(w[:, lags], (f.shape[1], lags.size))
    return np.einsum("ij,ji->i", w_win, f[lo : hi + 1])


def fft_block_contribution(
    weights: np.ndarray,
    f_history: np.ndarray,
    block_range: tuple[int, int],
    target_range: tuple[int, int],
    plan: Optional[ConvPlan] = None,
    key: Optional[Hashable] = None,
) -> np.ndarray:
    """Contribution of history rows ``[a, b)`` to the sums at steps ``[p, s)``.

    Returns an array of shape ``(s - p, M)`` whose row ``q - p`` is
    ``sum_{j=a}^{b-1} weights[q-j] * f_history[j]``, with negative lags
    contributing nothing. Evaluated as one zero-padded real FFT product.
    When both ``plan`` and ``key`` are given, the transformed weight slice is
    cached under ``(key, lag offset, transform length)``.
    """
    a, b = block_range
    p, s = target_range
    n_block, n_target = b - a, s - p
    f = np.asarray(f_history, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    n_eq = f.shape[1]
    if n_block <= 0 or n_target <= 0:
        return np.zeros((max(n_target, 0), n_eq))

    lag0 = p - (b - 1)
    n_u = n_block + n_target - 1
    n_fft = _next_pow2(n_u)
    limit = plan.max_transform if plan is not None else 1 << 24
    if n_fft > limit:
        raise PlanError(f"transform length {n_fft} exceeds the limit {limit}")

    cache = plan.weight_transforms if (plan is not None and key is not None) else None
    cache_key = (key, lag0, n_fft)
    w_hat = cache.get(cache_key) if cache is not None else None
    if w_hat is None:
        w = _as_weight_matrix(weights)
        lags = lag0 + np.arange(n_u)
        valid = (lags >= 0) & (lags < w.shape[1])
        u = np.zeros((w.shape[0], n_u))
        u[:, valid] = w[:, lags[valid]]
        w_hat = np.fft.rfft(u, n_fft, axis=1)
        if cache is not None:
            cache[cache_key] = w_hat
    g_hat = np.fft.rfft(f[a:b].T, n_fft, axis=1)
    conv = np.fft.irfft(w_hat * g_hat, n_fft, axis=1)
    if plan is not None:
        plan.work += n_eq * (n_fft * (2 * n_fft.bit_length() + 1))
    # circular wrap only touches indices below n_block - 1
    return conv[:, n_block - 1 : n_block - 1 + n_target].T


def block_schedule(n: int, lo: int, base_block: int):
    """Blocks and direct tail that make up the sum at step ``n``.

    Returns ``(blocks, tail)`` where ``blocks`` is a list of
    ``(block_range, target_range)`` pairs in creation order and ``tail`` is
    the half-open row range summed directly.
    """
    q = n - lo
    if q <= 0:
        return [], (n, n)
    r = base_block
    m = (q - 1) // r
    blocks = []
    start = 0
    for bit in range(m.bit_length() - 1, -1, -1):
        if m >> bit & 1:
            length = r << bit
            a = lo + start
            blocks.append(((a, a + length), (a + length + 1, a + 2 * length + 1)))
            start += length
    return blocks, (lo + m * r, n)


def history_sum(
    plan: ConvPlan,
    weights: np.ndarray,
    f_history: np.ndarray,
    n: int,
    lo: int = 0,
) -> np.ndarray:
    """``sum_{j=lo}^{n-1} weights[n-j] * f_history[j]`` following ``plan``.

    Stateless counterpart of :class:`HistoryConvolution`; every block is
    recomputed, so it is meant for checking, not for time stepping.
    """
    if not plan.is_fft:
        return direct_history_sum(weights, f_history, n, lo, n - 1)
    blocks, (t_lo, t_hi) = block_schedule(n, lo, plan.base_block)
    f = np.asarray(f_history, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    n_eq = max(_as_weight_matrix(weights).shape[0], f.shape[1])
    total = np.zeros(n_eq)
    for blk, tgt in blocks:
        contrib = fft_block_contribution(weights, f, blk, tgt, plan)
        total = total + contrib[n - tgt[0]]
    return total + direct_history_sum(weights, f, n, t_lo, t_hi - 1)


class HistoryConvolution:
    """Incremental evaluation of ``S_n`` for ``n = lo, lo+1, ..., n_max``.

    ``f_history`` is read by reference: row ``j`` must be final before the
    first call with ``n > j``. Calls must come with non-decreasing ``n``.

    Parameters
    ----------
    plan : ConvPlan
    weights : (M, K) or (K,) array
        Lag weights, ``K > n_max - lo``.
    f_history : (n_max + 1, M) array
    lo : int
        First history row included in the sum.
    n_max : int
        Last step that will be requested.
    key : hashable
        Name of the weight family in the plan's transform cache.
    """

    def __init__(
        self,
        plan: ConvPlan,
        weights: np.ndarray,
        f_history: np.ndarray,
        lo: int,
        n_max: int,
        key: Hashable = None,
    ) -> None:
        w = _as_weight_matrix(weights)
        if w.shape[1] <= n_max - lo:
            raise IndexError(
                f"need at least {n_max - lo + 1} lag weights, got {w.shape[1]}"
            )
        self.plan = plan
        self.weights = w
        self.f = f_history
        self.lo = lo
        self.n_max = n_max
        self.key = key if key is not None else id(self)
        self._n_lags = w.shape[1]
        # reversed copy so every direct window is a contiguous slice
        self._w_rev = np.ascontiguousarray(w[:, ::-1])
        self._fft = plan.is_fft
        self._r = plan.base_block
        n_eq = max(w.shape[0], f_history.shape[1])
        self._n_eq = n_eq
        self._acc = np.zeros((n_max + 1, n_eq)) if self._fft else None
        self._next_block = lo + self._r + 1
        self._last = lo - 1

    def _window(self, n: int, j0: int) -> np.ndarray:
        # sum_{j=j0}^{n-1} w[n-j] f[j]
        k = self._n_lags - 1 - n
        self.plan.work += (n - j0) * self.f.shape[1]
        return np.einsum("ij,ji->i", self._w_rev[:, k + j0 : k + n], self.f[j0:n])

    def _push_block(self, n: int) -> None:
        # triggered at n = lo + k*r + 1; the completed block ends at row n - 1
        k = (n - self.lo - 1) // self._r
        length = self._r * (k & -k)
        end = n - 1
        contrib = fft_block_contribution(
            self.weights,
            self.f,
            (end - length, end),
            (n, n + length),
            self.plan,
            self.key,
        )
        stop = min(n + length, self.n_max + 1)
        self._acc[n:stop] += contrib[: stop - n]

    def __call__(self, n: int) -> np.ndarray:
        if n < self._last:
            raise ValueError(f"steps must not decrease ({n} after {self._last})")
        self._last = n
        if n <= self.lo:
            return np.zeros(self._n_eq)
        if not self._fft:
            return self._window(n, self.lo)
        while self._next_block <= n:
            self._push_block(self._next_block)
            self._next_block += self._r
        tail = self.lo + self._r * ((n - self.lo - 1) // self._r)
        return self._acc[n] + self._window(n, tail)

