"""Shared fixtures: memoized dispersions so the suite stays fast."""

import numpy as np
import pytest

import nhband as nh


class Workbench:
    """Caches BandSets, phase-fixed copies, trials and projection gauges."""

    def __init__(self):
        self._cache = {}

    @staticmethod
    def config(n_k=64, l_max=40, n_bands=3):
        return nh.ModelConfig(l_max=l_max, n_k=n_k, n_bands=n_bands)

    def bands(self, c=None, A=0.0, form="c_sin", b=None,
              n_k=64, l_max=40, n_bands=3):
        key = ("bands", form, c, b, A, n_k, l_max, n_bands)
        if key not in self._cache:
            if form == "c_sin":
                pot = nh.PotentialSpec.c_sin(c, A)
            elif form == "b_cos_c_sin":
                pot = nh.PotentialSpec.b_cos_c_sin(b, c, A)
            elif form == "b_exp":
                pot = nh.PotentialSpec.b_exp(b, A)
            elif form == "free":
                pot = nh.PotentialSpec.free(A)
            else:
                raise ValueError(form)
            cfg = self.config(n_k=n_k, l_max=l_max, n_bands=n_bands)
            self._cache[key] = nh.dispersion(pot, cfg)
        return self._cache[key]

    def fixed(self, **kwargs):
        key = ("fixed",) + tuple(sorted(kwargs.items()))
        if key not in self._cache:
            bands = self.bands(**kwargs)
            self._cache[key] = nh.fix_phases(bands, band_indices=(0, 1))
        return self._cache[key]

    def trials(self, c=200j, n_k=64):
        key = ("trials", c, n_k)
        if key not in self._cache:
            self._cache[key] = nh.make_trials(c=c, n_k=n_k)
        return self._cache[key]

    def projection(self, c, n_k=64, trial_c=200j, **kwargs):
        key = ("proj", c, n_k, trial_c) + tuple(sorted(kwargs.items()))
        if key not in self._cache:
            fixed, _ = self.fixed(c=c, n_k=n_k, **kwargs)
            self._cache[key] = nh.projection_unitary(
                fixed, self.trials(c=trial_c, n_k=n_k))
        return self._cache[key]

    def hoppings(self, c, n_k=64, gauge="projection", m_max=3, **kwargs):
        key = ("hop", c, n_k, gauge, m_max) + tuple(sorted(kwargs.items()))
        if key not in self._cache:
            fixed, _ = self.fixed(c=c, n_k=n_k, **kwargs)
            if gauge == "projection":
                mix = self.projection(c, n_k=n_k, **kwargs)
            else:
                mix = nh.diagonal_gauge(fixed, check_separation=False)
            self._cache[key] = nh.hoppings_from_bands(fixed, mix, m_max=m_max)
        return self._cache[key]


@pytest.fixture(scope="session")
def wb():
    return Workbench()


@pytest.fixture(scope="session")
def cfg64():
    return Workbench.config(n_k=64)
