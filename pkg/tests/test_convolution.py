from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracsolve.convolution import (
    ConvPlan,
    HistoryConvolution,
    block_schedule,
    direct_history_sum,
    fft_block_contribution,
    history_sum,
)
from fracsolve.errors import PlanError
from fracsolve.weights import corrector_weights


def test_direct_unit_weights_sum_history():
    # rows 1..3 hold the history (row 0 unused)
    f = np.array([[0.0], [2.0], [3.0], [4.0]])
    assert direct_history_sum(np.ones(4), f, 3, 1, 3)[0] == 9.0


def test_direct_hand_convolution():
    f = np.array([[0.0], [1.0], [1.0], [1.0]])
    w = np.array([3.0, 2.0, 1.0])
    # w[2] f[1] + w[1] f[2] + w[0] f[3]
    assert direct_history_sum(w, f, 3, 1, 3)[0] == 6.0


def test_direct_zero_history():
    out = direct_history_sum(corrector_weights(0.5, 10), np.zeros((10, 2)), 9, 0, 8)
    assert out.tolist() == [0.0, 0.0]


def test_direct_empty_window_and_bad_window():
    f = np.ones((5, 1))
    assert direct_history_sum(np.ones(5), f, 3, 2, 1).tolist() == [0.0]
    with pytest.raises(IndexError):
        direct_history_sum(np.ones(5), f, 3, 0, 4)
    with pytest.raises(IndexError):
        direct_history_sum(np.ones(2), f, 4, 0, 3)


def test_fft_block_of_zeros():
    out = fft_block_contribution(np.arange(1.0, 40.0), np.zeros((40, 3)), (0, 16), (16, 32))
    assert out.shape == (16, 3)
    assert not out.any()


def test_fft_delta_kernel_copies_block():
    rng = np.random.default_rng(0)
    f = rng.standard_normal((32, 2))
    w = np.zeros(40)
    w[0] = 1.0
    out = fft_block_contribution(w, f, (8, 24), (8, 24))
    np.testing.assert_allclose(out, f[8:24], atol=1e-14)


def _direct_block(w, f, block, target):
    a, b = block
    return np.array(
        [sum(w[q - j] * f[j] for j in range(a, b) if q - j >= 0) for q in range(*target)]
    )


@pytest.mark.parametrize("target", [(16, 32), (17, 33), (20, 30), (5, 20)])
def test_fft_block_matches_direct(target):
    rng = np.random.default_rng(1)
    w = rng.uniform(-1, 1, 64)
    f = rng.uniform(-1, 1, (40, 3))
    out = fft_block_contribution(w, f, (0, 16), target)
    np.testing.assert_allclose(out, _direct_block(w, f, (0, 16), target), atol=1e-13)


def test_fft_transform_limit():
    plan = ConvPlan(max_transform=16)
    with pytest.raises(PlanError):
        fft_block_contribution(np.ones(64), np.ones((64, 1)), (0, 16), (16, 32), plan)


def test_fft_weight_transform_cache():
    plan = ConvPlan()
    w = np.linspace(1, 0, 64)
    f = np.ones((64, 1))
    fft_block_contribution(w, f, (0, 16), (17, 33), plan, key="d")
    fft_block_contribution(w, f, (16, 32), (33, 49), plan, key="d")
    assert len(plan.weight_transforms) == 1
    for w_hat in plan.weight_transforms.values():
        n_fft = 2 * (w_hat.shape[1] - 1)
        assert n_fft & (n_fft - 1) == 0


@pytest.mark.parametrize("mode, expected", [("on", "fft"), ("off", "direct"), ("FFT", "fft")])
def test_plan_modes(mode, expected):
    assert ConvPlan(mode=mode).mode == expected


@pytest.mark.parametrize("kwargs", [{"base_block": 12}, {"base_block": 1}, {"mode": "x"}])
def test_plan_validation(kwargs):
    with pytest.raises(PlanError):
        ConvPlan(**kwargs)


def test_block_schedule_doubles():
    # 16 direct values, then one block of 16, then blocks of 32 and 16 ...
    assert block_schedule(16, 0, 16) == ([], (0, 16))
    assert block_schedule(20, 0, 16) == ([((0, 16), (17, 33))], (16, 20))
    assert block_schedule(40, 0, 16) == ([((0, 32), (33, 65))], (32, 40))
    assert block_schedule(60, 0, 16) == (
        [((0, 32), (33, 65)), ((32, 48), (49, 65))],
        (48, 60),
    )
    blocks, tail = block_schedule(100, 1, 16)
    covered = sorted(j for (a, b), _ in blocks for j in range(a, b))
    assert covered + list(range(*tail)) == list(range(1, 100))


def _random_case(seed, n_max, m=2):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1, 1, (m, n_max + 1)), rng.uniform(-1, 1, (n_max + 1, m))


@pytest.mark.parametrize("lo", [0, 1])
def test_history_sum_small_n_is_bitwise_direct(lo):
    w, f = _random_case(2, 40)
    plan = ConvPlan()
    for n in range(lo + 1, lo + 17):
        np.testing.assert_array_equal(
            history_sum(plan, w, f, n, lo), direct_history_sum(w, f, n, lo, n - 1)
        )


@pytest.mark.parametrize("n", [40, 257, 4096])
def test_history_sum_matches_direct(n):
    w, f = _random_case(3, n)
    fft = history_sum(ConvPlan(), w, f, n, 1)
    ref = direct_history_sum(w, f, n, 1, n - 1)
    assert np.abs(fft - ref).max() <= 1e-12 * max(1.0, np.abs(ref).max())


@given(
    beta=st.floats(min_value=0.1, max_value=1.0),
    n_max=st.integers(min_value=1, max_value=600),
    lo=st.sampled_from([0, 1]),
    seed=st.integers(0, 2**31),
)
@settings(max_examples=40, deadline=None)
def test_incremental_matches_direct(beta, n_max, lo, seed):
    rng = np.random.default_rng(seed)
    w = np.vstack([corrector_weights(beta, n_max + 1), rng.uniform(0, 1, n_max + 1)])
    f = rng.uniform(-1, 1, (n_max + 1, 2))
    fft = HistoryConvolution(ConvPlan(), w, f, lo, n_max, key="w")
    direct = HistoryConvolution(ConvPlan(mode="direct"), w, f, lo, n_max)
    for n in range(lo, n_max + 1):
        a, b = fft(n), direct(n)
        scale = max(1.0, np.abs(b).max())
        assert np.abs(a - b).max() <= 1e-12 * scale


def test_incremental_requires_nondecreasing_steps():
    w, f = _random_case(4, 20)
    conv = HistoryConvolution(ConvPlan(), w, f, 0, 20)
    conv(10)
    with pytest.raises(ValueError):
        conv(5)


def test_incremental_is_deterministic():
    w, f = _random_case(5, 300)
    runs = []
    for _ in range(2):
        conv = HistoryConvolution(ConvPlan(), w, f, 1, 300, key="d")
        runs.append(np.array([conv(n) for n in range(1, 301)]))
    np.testing.assert_array_equal(runs[0], runs[1])


def test_work_grows_like_n_log_squared():
    ratios = []
    for k in (8, 10, 12):
        n = 2**k
        w, f = _random_case(6, n, m=1)
        plan = ConvPlan()
        conv = HistoryConvolution(plan, w, f, 1, n, key="d")
        for i in range(1, n + 1):
            conv(i)
        ratios.append(plan.work / (n * k**2))
    # a quadratic method would grow these ratios by ~4x per step
    assert max(ratios) / min(ratios) < 2.0
