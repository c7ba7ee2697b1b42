import numpy as np
import pytest

import nhband as nh
from nhband.errors import MissingGridPointError
from nhband.perturbation import second_order_gap_leading

PI2 = np.pi ** 2


class TestOracles:
    def test_first_order_gap(self):
        assert nh.first_order_gap(5j) == 5j
        assert nh.first_order_gap(0) == 0
        assert nh.first_order_gap(3 + 4j) == 3 + 4j

    def test_second_order_gap_exact_vs_3x3(self):
        # independent route: diagonalize the explicit 3x3 block at k=0
        for c in (5j, 10j, 20j):
            h = np.array([[4 * PI2, 0.5j * c, 0.0],
                          [-0.5j * c, 0.0, 0.5j * c],
                          [0.0, -0.5j * c, 4 * PI2]], dtype=complex)
            vals = np.sort(np.linalg.eigvals(h).real)
            expected = vals[2] - vals[1]
            assert nh.second_order_gap(c) == pytest.approx(expected, abs=1e-12)

    def test_second_order_gap_leading_term(self):
        # |c|^2 / (8 pi^2): 0.31662... at c=5i
        assert second_order_gap_leading(5j) == pytest.approx(25 / (8 * PI2))
        assert abs(second_order_gap_leading(5j) - 0.3166) < 1e-3
        assert second_order_gap_leading(0) == 0
        # exact and leading-order agree to O(c^4)
        assert nh.second_order_gap(5j) == pytest.approx(
            second_order_gap_leading(5j), rel=5e-3)

    def test_ep_response_exact_values(self):
        # b=20, dc=5i: product (b - i dc/2)(i dc/2) = 22.5 * (-2.5) = -56.25
        gap = nh.ep_response_gap(20.0, 5j)
        assert gap == pytest.approx(15j, abs=1e-12)
        gap = nh.ep_response_gap(20.0, -5j)
        assert gap.imag == pytest.approx(0.0, abs=1e-12)
        assert gap.real == pytest.approx(2 * np.sqrt(43.75), abs=1e-12)

    def test_ep_response_jordan_point(self):
        assert nh.ep_response_gap(20.0, 0.0) == 0.0

    def test_ep_response_domain(self):
        with pytest.raises(ValueError):
            nh.ep_response_gap(-1.0, 5j)

    def test_ep_response_sqrt_asymptotics(self):
        # gap(4 dc)/gap(dc) -> 2 as |dc| -> 0
        for dc in (0.01j, -0.01j):
            ratio = abs(nh.ep_response_gap(20.0, 4 * dc)) / \
                abs(nh.ep_response_gap(20.0, dc))
            assert 1.99 < ratio < 2.01


class TestMeasureGaps:
    def test_first_order_agreement(self, wb):
        for c in (2j, 5j):
            bands = wb.bands(c=c, n_k=100)
            rep = nh.measure_gaps(bands)
            assert abs(rep.delta1 - c) / abs(c) < 0.05
            assert rep.analytic_delta1 == c

    def test_second_order_agreement(self, wb):
        for c in (5j, 15j):
            bands = wb.bands(c=c, n_k=100)
            rep = nh.measure_gaps(bands)
            assert abs(rep.delta2.imag) < 1e-6
            assert abs(rep.delta2 - rep.analytic_delta2) / abs(rep.analytic_delta2) < 0.1

    def test_zero_potential(self, wb):
        bands = wb.bands(form="free", n_k=100)
        rep = nh.measure_gaps(bands)
        assert abs(rep.delta1) < 1e-10
        assert abs(rep.delta2) < 0.1  # grid-offset touching at k=0

    def test_complex_c_gap_has_both_parts(self, wb):
        bands = wb.bands(c=20 + 80j, n_k=100)
        rep = nh.measure_gaps(bands)
        assert abs(rep.delta1.real) > 0.1 and abs(rep.delta1.imag) > 0.1

    def test_missing_grid_point(self, wb):
        bands = wb.bands(c=5j, n_k=101)  # odd grid has no k=0
        with pytest.raises(MissingGridPointError):
            nh.measure_gaps(bands)

    def test_needs_three_bands(self, wb):
        bands = wb.bands(c=5j, n_k=100, n_bands=2)
        with pytest.raises(ValueError):
            nh.measure_gaps(bands)

    def test_ep_response_measured(self, wb):
        bands = wb.bands(form="b_cos_c_sin", b=20.0, c=20j + 5j, n_k=100)
        rep = nh.measure_gaps(bands)
        assert abs(rep.delta1.real) < 1e-8          # PT: purely imaginary gap
        assert rep.delta1.imag == pytest.approx(15.0, rel=0.05)
        assert rep.analytic_delta1 == pytest.approx(15j, abs=1e-12)
