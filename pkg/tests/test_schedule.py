import pytest
import torch

from satvae.diffusion import NoiseSchedule, vp_schedule
from satvae.exceptions import ScheduleRangeError


def test_vp_identity_on_dense_grid():
    schedule = NoiseSchedule()
    t = torch.linspace(schedule.t_min, schedule.t_max, 1000, dtype=torch.float64)
    alpha, sigma = schedule.alpha_sigma(t)
    assert torch.allclose(alpha * alpha + sigma * sigma,
                          torch.ones_like(alpha), atol=1e-6)


def test_alpha_strictly_decreasing_sigma_increasing():
    schedule = NoiseSchedule()
    t = torch.linspace(schedule.t_min, schedule.t_max, 1000, dtype=torch.float64)
    alpha, sigma = schedule.alpha_sigma(t)
    assert bool((alpha[1:] < alpha[:-1]).all())
    assert bool((sigma[1:] > sigma[:-1]).all())


def test_clean_end_of_schedule():
    schedule = NoiseSchedule()
    alpha, sigma = schedule.alpha_sigma(schedule.t_min)
    assert float(alpha) == pytest.approx(1.0, abs=1e-3)
    assert float(sigma) == pytest.approx(0.0, abs=0.02)


def test_t_zero_is_exact_identity():
    schedule = NoiseSchedule()
    alpha, sigma = schedule.alpha_sigma(0.0)
    assert float(alpha) == 1.0
    assert float(sigma) == 0.0


def test_range_check():
    schedule = NoiseSchedule()
    with pytest.raises(ScheduleRangeError):
        vp_schedule(0.0, schedule)
    with pytest.raises(ScheduleRangeError):
        vp_schedule(1.5, schedule)
    alpha, sigma = vp_schedule(0.5, schedule)
    assert 0.0 < float(alpha) < 1.0


def test_edm_weight_equals_inverse_sigma_squared():
    schedule = NoiseSchedule()
    t = torch.linspace(schedule.t_min, schedule.t_max, 257, dtype=torch.float64)
    weight = schedule.edm_weight(t)
    sigma = schedule.sigma(t)
    assert torch.allclose(weight, 1.0 / (sigma * sigma), rtol=1e-12, atol=0.0)


def test_uniform_grid_endpoints():
    schedule = NoiseSchedule()
    grid = schedule.uniform_grid(50)
    assert float(grid[0]) == pytest.approx(schedule.t_max)
    assert float(grid[-1]) == pytest.approx(schedule.t_min)
    assert bool((grid[1:] < grid[:-1]).all())
    assert schedule.uniform_grid(1).tolist() == [schedule.t_max]
    with pytest.raises(ValueError):
        schedule.uniform_grid(0)


def test_schedule_validation():
    with pytest.raises(ValueError):
        NoiseSchedule(t_min=0.0)
    with pytest.raises(ValueError):
        NoiseSchedule(t_min=0.9, t_max=0.5)
    with pytest.raises(ValueError):
        NoiseSchedule(beta_min=5.0, beta_max=1.0)


def test_sample_t_within_range():
    schedule = NoiseSchedule()
    gen = torch.Generator().manual_seed(0)
    t = schedule.sample_t(512, gen)
    assert float(t.min()) >= schedule.t_min
    assert float(t.max()) <= schedule.t_max
