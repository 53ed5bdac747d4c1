import numpy as np
import pytest

from pvd.schedule import (
    NoiseSchedule,
    linear_schedule,
    schedule_from_config,
    warmup_schedule,
)


def test_linear_values():
    s = linear_schedule(3, 0.1, 0.3)
    assert np.allclose(s.beta, [0.1, 0.2, 0.3])
    assert np.allclose(s.alpha, [0.9, 0.8, 0.7])
    # cumulative products: 0.9, 0.9*0.8, 0.9*0.8*0.7
    assert np.allclose(s.alpha_bar, [0.9, 0.72, 0.504])
    assert s.T == 3


def test_linear_single_step():
    s = linear_schedule(1, 0.1, 0.3)
    assert s.beta.shape == (1,)
    assert s.beta[0] == 0.1


def test_warmup_values():
    s = warmup_schedule(4, 0.1, 0.2, 0.5)
    # warm = ceil(0.5 * 4) = 2 rising steps, then constant at beta_end
    assert np.allclose(s.beta, [0.1, 0.2, 0.2, 0.2])


def test_warmup_full_fraction_is_linear():
    w = warmup_schedule(6, 1e-4, 0.02, 1.0)
    l = linear_schedule(6, 1e-4, 0.02)
    assert np.array_equal(w.beta, l.beta)


def test_accessors_one_based():
    s = linear_schedule(3, 0.1, 0.3)
    assert s.beta_t(1) == pytest.approx(0.1)
    assert s.beta_t(3) == pytest.approx(0.3)
    assert s.alpha_t(2) == pytest.approx(0.8)
    assert s.alpha_bar_t(3) == pytest.approx(0.504)
    assert s.sigma2_t(2) == pytest.approx(0.2)


def test_alpha_bar_zero_is_one():
    s = linear_schedule(3, 0.1, 0.3)
    assert s.alpha_bar_t(0) == 1.0


def test_t_out_of_range():
    s = linear_schedule(3, 0.1, 0.3)
    for bad in (0, 4, -1):
        with pytest.raises(ValueError):
            s.beta_t(bad)
    with pytest.raises(ValueError):
        s.alpha_bar_t(-1)
    with pytest.raises(ValueError):
        s.alpha_bar_t(4)


def test_beta_bounds_rejected():
    with pytest.raises(ValueError):
        NoiseSchedule(np.array([0.0, 0.1]))
    with pytest.raises(ValueError):
        NoiseSchedule(np.array([0.5, 1.0]))
    with pytest.raises(ValueError):
        NoiseSchedule(np.array([0.3, 0.2]))  # decreasing
    with pytest.raises(ValueError):
        linear_schedule(5, 0.3, 0.1)
    with pytest.raises(ValueError):
        linear_schedule(0, 0.1, 0.3)


def test_arrays_read_only():
    s = linear_schedule(3, 0.1, 0.3)
    for arr in (s.beta, s.alpha, s.alpha_bar):
        assert arr.dtype == np.float64
        with pytest.raises(ValueError):
            arr[0] = 0.5


def test_alpha_bar_monotone_decreasing():
    s = linear_schedule(50, 1e-4, 0.05)
    assert np.all(np.diff(s.alpha_bar) < 0)
    assert 0.0 < s.alpha_bar[-1] < 1.0


def test_from_config():
    s = schedule_from_config({"kind": "linear", "T": 3,
                              "beta_start": 0.1, "beta_end": 0.3})
    assert np.allclose(s.beta, [0.1, 0.2, 0.3])
    w = schedule_from_config({"kind": "warmup", "T": 4, "beta_start": 0.1,
                              "beta_end": 0.2, "warmup_frac": 0.5})
    assert np.allclose(w.beta, [0.1, 0.2, 0.2, 0.2])
    with pytest.raises(ValueError):
        schedule_from_config({"kind": "cosine", "T": 4,
                              "beta_start": 0.1, "beta_end": 0.2})
