"""Small-potential analytic oracles for the gap sizes at the zone edge and center.

These are exact eigenvalue differences of the 2x2 and 3x3 plane-wave blocks,
used as cross-checks for the full solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingGridPointError
from .spectra import BandSet

PI2 = np.pi ** 2
FOUR_PI2 = 4.0 * np.pi ** 2


def first_order_gap(c: complex) -> complex:
    """Gap between the lowest two bands at k=pi for V = c sin(2 pi x).

    The 2x2 block on plane waves l = -1, 0 has eigenvalues pi^2 +- c/2, so the
    gap is exactly c.
    """
    return complex(c)


def second_order_gap(c: complex) -> complex:
    """Gap between bands 2 and 3 at k=0 for V = c sin(2 pi x), from the exact
    3x3 block on l = -1, 0, 1.

    The block eigenvalues are 4 pi^2 and 2 pi^2 +- sqrt(4 pi^4 + c^2/2); the
    second band at k=0 is the upper shifted root, the third stays at 4 pi^2,
    hence delta2 = 2 pi^2 - sqrt(4 pi^4 + c^2/2) ~ -c^2/(8 pi^2).
    """
    c = complex(c)
    return 2.0 * PI2 - np.sqrt(4.0 * PI2 ** 2 + 0.5 * c * c + 0j)


def second_order_gap_leading(c: complex) -> complex:
    """Leading-order form of the k=0 gap, -c^2/(8 pi^2) (= |c|^2/(8 pi^2) for
    purely imaginary c, the plotted single-band shift)."""
    c = complex(c)
    return -c * c / (8.0 * PI2)


def ep_response_gap(b: float, delta_c: complex) -> complex:
    """Exact 2x2 gap at k=pi when delta_c sin(2 pi x) perturbs V = b e^{i 2 pi x}.

    The block is [[pi^2, i dc/2], [b - i dc/2, pi^2]], a Jordan form at dc=0,
    so the gap 2 sqrt((b - i dc/2)(i dc/2)) opens with the square-root
    sensitivity typical of exceptional points: asymptotically
    +-i sqrt(2 b |dc|) for Im(dc) > 0 and +-sqrt(2 b |dc|) for Im(dc) < 0.
    """
    if b <= 0:
        raise ValueError("b must be positive")
    delta_c = complex(delta_c)
    return 2.0 * np.sqrt((b - 0.5j * delta_c) * (0.5j * delta_c) + 0j)


def _block_gap2(pot) -> complex:
    """Exact 3x3 block oracle at k=0 built from the actual Fourier components."""
    h = np.zeros((3, 3), dtype=complex)
    ls = np.array([-1, 0, 1])
    np.fill_diagonal(h, (2.0 * np.pi * ls - pot.vector_A) ** 2)
    for l, v in pot.scalar_fourier.items():
        if abs(l) <= 2:
            h += v * np.eye(3, k=-l)
    vals = np.sort_complex(np.linalg.eigvals(h))
    return vals[2] - vals[1]


@dataclass
class GapReport:
    delta1: complex
    delta2: complex
    analytic_delta1: complex
    analytic_delta2: complex
    parameters: dict
    ordering_log: object = None


def measure_gaps(bands: BandSet) -> GapReport:
    """Measure delta1 = eps2(pi) - eps1(pi) and delta2 = eps3(0) - eps2(0).

    Requires k=0 and k=pi on-grid (even n_k) and at least three bands; the
    analytic fields are filled from the closed-form oracles for the named
    potential forms.
    """
    if bands.n_bands < 3:
        raise ValueError("measure_gaps needs at least three bands")
    i_pi = bands.index_of_k(np.pi)
    if i_pi is None:
        raise MissingGridPointError("k=pi is not on the grid")
    i_0 = bands.index_of_k(0.0)
    if i_0 is None:
        raise MissingGridPointError("k=0 is not on the grid (use even n_k)")

    e = bands.energies
    delta1 = e[i_pi, 1] - e[i_pi, 0]
    delta2 = e[i_0, 2] - e[i_0, 1]

    meta = dict(bands.potential.meta)
    form = meta.get("form")
    params = {"A": bands.potential.vector_A}
    a1 = a2 = complex("nan")
    if form == "c_sin":
        c = meta["c"]
        params.update(c=c, b=0.0, delta_c=c)
        a1 = first_order_gap(c)
        a2 = second_order_gap(c)
    elif form == "b_cos_c_sin":
        b, c = meta["b"], meta["c"]
        delta_c = c - 1j * b  # sine coefficient in excess of the triangular point
        params.update(c=c, b=b, delta_c=delta_c)
        a1 = ep_response_gap(b, delta_c) if b > 0 and delta_c != 0 else first_order_gap(c)
        a2 = _block_gap2(bands.potential)
    elif form in ("free", "b_exp", "fourier"):
        params.update(meta)
        a1 = complex(0.0) if form != "fourier" else a1
        a2 = complex(0.0) if form != "fourier" else a2

    return GapReport(delta1=complex(delta1), delta2=complex(delta2),
                     analytic_delta1=a1, analytic_delta2=a2,
                     parameters=params, ordering_log=bands.ordering_log)
