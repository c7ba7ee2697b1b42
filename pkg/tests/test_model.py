import numpy as np
import pytest

import nhband as nh
from nhband.model import fold_to_zone


def test_k_grid_spans_zone_and_contains_pi():
    cfg = nh.ModelConfig(l_max=4, n_k=201)
    ks = cfg.k_grid()
    assert len(ks) == 201
    assert ks.max() == pytest.approx(np.pi, abs=1e-15)
    assert ks.min() > -np.pi
    steps = np.diff(ks)
    assert np.allclose(steps, 2 * np.pi / 201)


def test_k_grid_even_contains_zero():
    ks = nh.ModelConfig(l_max=4, n_k=100).k_grid()
    assert np.any(np.abs(ks) < 1e-15)
    ks_odd = nh.ModelConfig(l_max=4, n_k=201).k_grid()
    assert not np.any(np.abs(ks_odd) < 1e-15)


def test_config_validation():
    with pytest.raises(ValueError):
        nh.ModelConfig(l_max=0)
    with pytest.raises(ValueError):
        nh.ModelConfig(l_max=4, n_k=2)
    with pytest.raises(ValueError):
        nh.ModelConfig(l_max=4, n_bands=10)


def test_c_sin_components():
    c = 7.0 + 2.0j
    pot = nh.PotentialSpec.c_sin(c)
    assert pot.scalar_fourier[-1] == 0.5j * c
    assert pot.scalar_fourier[1] == -0.5j * c
    x = np.linspace(0, 1, 7, endpoint=False)
    assert np.allclose(pot.sample(x), c * np.sin(2 * np.pi * x))


def test_b_exp_is_triangular_point_of_b_cos_c_sin():
    # b cos + ib sin collapses to the single-harmonic exponential
    b = 20.0
    combo = nh.PotentialSpec.b_cos_c_sin(b, 1j * b)
    single = nh.PotentialSpec.b_exp(b)
    assert set(combo.scalar_fourier) == set(single.scalar_fourier) == {1}
    assert combo.scalar_fourier[1] == pytest.approx(b)


def test_gauge_reduce_constant():
    a_const, (x, profile) = nh.gauge_reduce({0: 0.3j})
    assert a_const == 0.3j
    assert np.allclose(profile, 1.0)


def test_gauge_reduce_zero():
    a_const, (x, profile) = nh.gauge_reduce({})
    assert a_const == 0
    assert np.allclose(profile, 1.0)


def test_gauge_reduce_oscillating():
    # A(x) = i + 2 cos(2 pi x): profile exp(-i sin(2 pi x)/pi), checked against
    # trapezoidal quadrature of the defining integral
    a_const, (x, profile) = nh.gauge_reduce({0: 1j, 1: 1.0, -1: 1.0}, n_x=512)
    assert a_const == 1j
    expected = np.exp(-1j * np.sin(2 * np.pi * x) / np.pi)
    assert np.abs(profile - expected).max() < 1e-12

    fine = np.linspace(0.0, 1.0, 200001)
    osc = 2.0 * np.cos(2 * np.pi * fine)
    cumulative = np.concatenate(
        [[0.0], np.cumsum(0.5 * (osc[1:] + osc[:-1]) * np.diff(fine))])
    quad = np.exp(-1j * np.interp(x, fine, cumulative))
    assert np.abs(profile - quad).max() < 1e-7


def test_gauge_reduce_profile_is_periodic():
    # the nonconstant part integrates to zero over a period
    rng = np.random.default_rng(7)
    comps = {l: complex(rng.normal(), rng.normal()) for l in (-3, -1, 2)}
    comps[0] = 0.5j
    _, (x, profile) = nh.gauge_reduce(comps, n_x=128)
    assert abs(profile[0] - 1.0) < 1e-12


def test_fold_to_zone():
    assert fold_to_zone(np.pi) == pytest.approx(np.pi)
    assert fold_to_zone(-np.pi) == pytest.approx(np.pi)
    assert fold_to_zone(2 * np.pi) == pytest.approx(0.0, abs=1e-12)
    assert fold_to_zone(3.5 * np.pi) == pytest.approx(-0.5 * np.pi)
