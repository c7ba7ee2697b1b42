"""Exceptional points: detection on the k-axis, collision-threshold scans,
PT spectral checks and point-gap winding numbers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import BaseOnCurveError
from .spectra import BandSet, solve_k

EP_ENERGY_TOL = 1e-5
EP_DEFECT_TOL = 1e-6
GOLDEN_DEPTH = 60
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class EpCandidate:
    k: float
    band_pair: tuple
    self_orthogonality: float
    energy_gap: float


@dataclass
class EpReport:
    ep_locations: list
    threshold_c: float | None = None
    windings: dict = field(default_factory=dict)
    pt_symmetric: np.ndarray | None = None


def _pair_gap(k, bands, target_mean):
    """Gap and worst raw self-overlap of the two eigenvalues nearest target_mean."""
    sys = solve_k(k, bands.potential, bands.config)
    idx = np.argsort(np.abs(sys.values - target_mean))[:2]
    gap = abs(sys.values[idx[0]] - sys.values[idx[1]])
    s = float(sys.self_overlap[idx].min())
    return gap, s


def _golden_minimize(f, a, b, depth):
    """Golden-section minimization of f on [a, b]; returns (x_min, f(x_min))."""
    lo, hi = a, b
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(depth):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def detect_eps(bands: BandSet, pair=(0, 1),
               ep_energy_tol: float = EP_ENERGY_TOL,
               defect_tol: float = EP_DEFECT_TOL,
               golden_depth: int = GOLDEN_DEPTH) -> list[EpCandidate]:
    """Locate exceptional points of a band pair on the k-axis.

    Grid-level local minima of |eps_n - eps_n'| seed golden-section
    refinements between neighboring grid points; a refined point counts as an
    EP only if the gap closes below ep_energy_tol AND the raw bi-orthogonal
    self-overlap drops below defect_tol (this rules out diabolic touchings,
    where the eigenvectors stay independent).
    """
    n, m = pair
    ks = bands.k_grid
    gap = np.abs(bands.energies[:, n] - bands.energies[:, m])
    n_k = len(ks)

    candidates = []
    for i in range(n_k):
        left = gap[i - 1] if i > 0 else np.inf
        right = gap[i + 1] if i < n_k - 1 else np.inf
        if gap[i] <= left and gap[i] <= right:
            candidates.append(i)

    found = []
    for i in candidates:
        a = ks[max(i - 1, 0)]
        b = ks[min(i + 1, n_k - 1)]
        if a == b:
            continue
        mean = 0.5 * (bands.energies[i, n] + bands.energies[i, m])

        def f(k):
            return _pair_gap(k, bands, mean)[0]

        k_min, g_min = _golden_minimize(f, a, b, golden_depth)
        if g_min >= ep_energy_tol:
            continue
        _, s = _pair_gap(k_min, bands, mean)
        if s >= defect_tol:
            continue
        if any(abs(k_min - c.k) < 1e-6 for c in found):
            continue
        found.append(EpCandidate(k=float(k_min), band_pair=pair,
                                 self_orthogonality=s, energy_gap=float(g_min)))
    found.sort(key=lambda c: c.k)
    return found


def threshold_scan(c_values, builder, cfg, pair=(0, 1),
                   bracket_width: float = 0.1, **detect_kwargs):
    """Bisect the EP-existence transition along a one-parameter family.

    builder maps a real scan value to a PotentialSpec.  The endpoints of
    c_values must straddle the transition (either orientation); returns the
    midpoint of the final bracket, or None when both endpoints agree.
    """
    from .spectra import dispersion

    def has_ep(v):
        bands = dispersion(builder(v), cfg)
        return len(detect_eps(bands, pair, **detect_kwargs)) > 0

    lo, hi = float(c_values[0]), float(c_values[-1])
    p_lo, p_hi = has_ep(lo), has_ep(hi)
    if p_lo == p_hi:
        return None
    while hi - lo >= bracket_width:
        mid = 0.5 * (lo + hi)
        if has_ep(mid) == p_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def pt_check(bands: BandSet, tol: float = 1e-8):
    """Conjugation closure of the full eigenvalue multiset, k by k.

    Returns (flags, max_residual): flags[i] is True when the spectrum at k_i
    is closed under complex conjugation within tol.  Uses the full truncated
    spectrum: a retained band may have its conjugate partner outside the
    retained window.
    """
    n_k = bands.full_energies.shape[0]
    flags = np.zeros(n_k, dtype=bool)
    worst = 0.0
    for i in range(n_k):
        vals = bands.full_energies[i]
        cost = np.abs(vals[:, None] - vals.conj()[None, :])
        rows, cols = linear_sum_assignment(cost)
        residual = float(cost[rows, cols].max())
        flags[i] = residual < tol
        worst = max(worst, residual)
    return flags, worst


def point_gap_winding(bands: BandSet, band: int, base: complex) -> int:
    """Winding number of the closed curve eps_band(k) around a base energy.

    Computed by summing argument increments around the Brillouin-zone loop
    (the k=pi -> k=-pi wrap included).  Raises BaseOnCurveError when the base
    lies on the curve.
    """
    z = bands.energies[:, band] - complex(base)
    if np.abs(z).min() < 1e-8:
        raise BaseOnCurveError("base energy lies on the band curve")
    ratios = np.roll(z, -1) / z
    total = float(np.sum(np.angle(ratios)))
    winding = int(np.rint(total / (2.0 * np.pi)))
    return winding


def band_centroid(bands: BandSet, band: int) -> complex:
    return complex(bands.energies[:, band].mean())
