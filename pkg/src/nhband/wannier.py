"""Bloch phase fixing, unitary band mixing and bi-orthogonal Wannier pairs.

Two gauges are provided: the diagonal gauge diag(e^{ik/4}, e^{-ik/4}) for
separated bands, and the trial-function projection gauge
U(k) = D(k) [D^dag(k) D(k)]^{-1/2}, computed through the SVD of D.
All real-space work happens on a grid of n_x points per cell over the N = n_k
cells of the periodic supercell; cell 0 covers x in [-1/2, 1/2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (BandsNotSeparatedError, SingularProjectionError,
                     UnlabeledKError, ZeroPivotError)
from .model import ModelConfig, PotentialSpec
from .spectra import BandSet

N_X_DEFAULT = 64
UNITARITY_TOL = 1e-10
SINGULAR_TOL = 1e-10


@dataclass
class PhaseConvention:
    """Record of the applied phase rule: theta_n(k) = 0 with u_{l=0} >= 0.

    rotations[i, n] is the unit phase removed from band n at k_i.  The left
    pivot is then fixed up to the residual phase forced by bi-orthonormality;
    left_pivot_phase records it (exactly 0 or pi in the real-spectrum region
    of PT-symmetric potentials, a genuine phase in the conjugate region).
    """

    rule: str
    rotations: np.ndarray
    left_pivot_phase: np.ndarray

    @property
    def max_left_residual(self) -> float:
        return float(np.abs(self.left_pivot_phase).max())


def fix_phases(bands: BandSet, band_indices=None, zero_tol: float = 1e-12):
    """Rotate each Bloch pair so the l=0 right coefficient is real and >= 0.

    Left vectors get the same rotation, which preserves bi-orthonormality
    exactly.  Returns a new BandSet plus the PhaseConvention record.
    Raises ZeroPivotError where |u_{l=0}| < zero_tol (convention undefined);
    band_indices restricts the convention to the bands that will be
    Wannierized (a higher band can have an exactly vanishing pivot, e.g. the
    antisymmetric state at k=0).
    """
    l0 = bands.l0_index
    n_k, nb = bands.energies.shape
    if band_indices is None:
        band_indices = range(nb)
    right = bands.right_vectors.copy()
    left = bands.left_vectors.copy()
    rotations = np.ones((n_k, nb), dtype=complex)
    residual = np.zeros((n_k, nb))
    for i in range(n_k):
        for n in band_indices:
            pivot = right[i, n, l0]
            if abs(pivot) < zero_tol:
                raise ZeroPivotError(
                    f"u_(l=0) vanishes for band {n} at k={bands.k_grid[i]:.6f}")
            phase = pivot / abs(pivot)
            right[i, n] /= phase
            left[i, n] /= phase
            rotations[i, n] = phase
            residual[i, n] = np.angle(left[i, n, l0])
    convention = PhaseConvention(rule="theta-zero + u0 real-positive",
                                 rotations=rotations, left_pivot_phase=residual)
    fixed = BandSet(k_grid=bands.k_grid, energies=bands.energies.copy(),
                    right_vectors=right, left_vectors=left,
                    full_energies=bands.full_energies, self_overlaps=bands.self_overlaps,
                    defective=bands.defective, ordering_log=bands.ordering_log,
                    config=bands.config, potential=bands.potential,
                    phase_convention=convention)
    return fixed, convention


@dataclass
class UnitaryMixing:
    """Band-mixing matrices U(k), one per grid point."""

    k_grid: np.ndarray
    matrices: np.ndarray       # (n_k, nb, nb)
    method: str                # "diagonal" | "projection"
    band_indices: tuple

    @property
    def n_mixed(self) -> int:
        return self.matrices.shape[1]

    def unitarity_residual(self) -> float:
        eye = np.eye(self.n_mixed)
        prod = np.einsum("kij,kil->kjl", self.matrices.conj(), self.matrices)
        return float(np.abs(prod - eye).max())

    def reflection_residual(self) -> float:
        """Deviation from U_{n1}(-k) = e^{-ik/2} U_{n1}(k),
        U_{n2}(-k) = e^{+ik/2} U_{n2}(k) over paired grid points."""
        n_k = len(self.k_grid)
        worst = 0.0
        for i in range(n_k - 1):        # k = pi (last point) has no partner
            j = n_k - i - 2
            if j <= i:
                continue
            k = self.k_grid[j]
            u_minus = self.matrices[i]
            u_plus = self.matrices[j]
            worst = max(worst, float(np.abs(
                u_minus[:, 0] - np.exp(-0.5j * k) * u_plus[:, 0]).max()))
            worst = max(worst, float(np.abs(
                u_minus[:, 1] - np.exp(+0.5j * k) * u_plus[:, 1]).max()))
        return worst


def diagonal_gauge(bands: BandSet, band_indices=(0, 1),
                   check_separation: bool = True) -> UnitaryMixing:
    """U(k) = diag(e^{+ik/4}, e^{-ik/4}): Wannier centers at x = -1/4 and +1/4.

    Valid only when the two bands are separated; raises BandsNotSeparatedError
    if exceptional points are detected for the pair.
    """
    if len(band_indices) != 2:
        raise ValueError("the diagonal gauge is defined for a band pair")
    if check_separation:
        from .ep_analysis import detect_eps
        eps = detect_eps(bands, pair=tuple(band_indices))
        if eps:
            raise BandsNotSeparatedError(
                f"exceptional points at k={[round(c.k, 4) for c in eps]}")
    ks = bands.k_grid
    n_k = len(ks)
    mats = np.zeros((n_k, 2, 2), dtype=complex)
    mats[:, 0, 0] = np.exp(+0.25j * ks)
    mats[:, 1, 1] = np.exp(-0.25j * ks)
    return UnitaryMixing(k_grid=ks, matrices=mats, method="diagonal",
                         band_indices=tuple(band_indices))


@dataclass
class TrialFunctions:
    """Localized trial pairs on a real-space window, seeds for the projection."""

    x: np.ndarray              # flat window grid
    cells: np.ndarray          # window cell indices
    g: np.ndarray              # (2, len(x)) right trials
    g_tilde: np.ndarray        # (2, len(x)) left trials
    n_x: int
    meta: dict = field(default_factory=dict)

    HEADER_KEYS = ("c", "l_max", "n_k", "n_x")

    def save(self, path):
        cols = [self.x.real]
        for fam in (self.g, self.g_tilde):
            for n in range(2):
                cols += [fam[n].real, fam[n].imag]
        data = np.column_stack(cols)
        header_lines = ["nhband trial functions"]
        for key in self.HEADER_KEYS:
            header_lines.append(f"{key} = {self.meta.get(key)}")
        header_lines.append("x,re_w1,im_w1,re_w2,im_w2,re_wt1,im_wt1,re_wt2,im_wt2")
        np.savetxt(path, data, delimiter=",", fmt="%.17g",
                   header="\n".join(header_lines))

    @classmethod
    def load(cls, path) -> "TrialFunctions":
        meta = {}
        with open(path) as fh:
            for line in fh:
                if not line.startswith("#"):
                    break
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    key = key.strip()
                    if key in cls.HEADER_KEYS:
                        meta[key] = complex(val.strip()) if key == "c" else int(val)
        data = np.loadtxt(path, delimiter=",")
        x = data[:, 0]
        g = np.stack([data[:, 1] + 1j * data[:, 2], data[:, 3] + 1j * data[:, 4]])
        gt = np.stack([data[:, 5] + 1j * data[:, 6], data[:, 7] + 1j * data[:, 8]])
        n_x = int(meta.get("n_x", N_X_DEFAULT))
        cells = np.unique(np.floor(x + 0.5 + 1e-9).astype(int))
        return cls(x=x, cells=cells, g=g, g_tilde=gt, n_x=n_x, meta=meta)


def projection_unitary(bands: BandSet, trials: TrialFunctions,
                       band_indices=(0, 1),
                       singular_tol: float = SINGULAR_TOL) -> UnitaryMixing:
    """Trial-projection gauge U(k) = D(k)[D^dag(k) D(k)]^{-1/2}.

    D_{nn'}(k) = <psi~_k^n | g_{n'}> on the trial window; the inverse square
    root is taken through the SVD D = E F G^dag, giving the unitary U = E G^dag.
    The resulting Wannier functions are independent of Bloch phase choices.
    """
    nb = len(band_indices)
    if trials.g.shape[0] < nb:
        raise ValueError("not enough trial functions for the requested bands")
    ls = bands.config.plane_waves
    offs = np.arange(trials.n_x) / trials.n_x - 0.5
    fourier = np.exp(2j * np.pi * np.outer(offs, ls))      # (n_x, dim)
    n_cells = len(trials.cells)
    ks = bands.k_grid
    mats = np.empty((len(ks), nb, nb), dtype=complex)
    for i, k in enumerate(ks):
        ut = bands.left_vectors[i, list(band_indices)]      # (nb, dim)
        ucell = ut @ fourier.T                              # (nb, n_x)
        psi_t = np.tile(ucell, (1, n_cells)) * np.exp(1j * k * trials.x)[None, :]
        d = (psi_t.conj() @ trials.g[:nb].T) / trials.n_x   # (nb, nb)
        e_mat, f, g_dag = np.linalg.svd(d)
        if f.min() < singular_tol:
            raise SingularProjectionError(
                f"projection matrix singular at k={k:.6f} (sigma_min={f.min():.3e})")
        mats[i] = e_mat @ g_dag
    return UnitaryMixing(k_grid=ks, matrices=mats, method="projection",
                         band_indices=tuple(band_indices))


@dataclass
class WannierSet:
    """Bi-orthogonal Wannier pairs sampled on the periodic supercell."""

    x: np.ndarray              # (N*n_x,) flat grid, cell m covers [m-1/2, m+1/2)
    cells: np.ndarray          # built home-cell offsets m
    w: np.ndarray              # (nb, len(cells), N*n_x)
    w_tilde: np.ndarray
    n_x: int
    band_indices: tuple
    meta: dict = field(default_factory=dict)

    def inner(self, bra: np.ndarray, ket: np.ndarray) -> complex:
        """Trapezoidal <bra|ket> on the periodic grid (dx = 1/n_x)."""
        return complex(np.sum(bra.conj() * ket) / self.n_x)

    def cell_index(self, m: int) -> int:
        hits = np.nonzero(self.cells == m)[0]
        if hits.size == 0:
            raise KeyError(f"cell {m} not built")
        return int(hits[0])

    def pair(self, n: int, m: int = 0):
        i = self.cell_index(m)
        return self.w[n, i], self.w_tilde[n, i]

    def gram(self) -> np.ndarray:
        """Full <w~_{n'}^{m'} | w_n^m> overlap table, indexed (n'm', nm)."""
        nb, nm, _ = self.w.shape
        flat_t = self.w_tilde.reshape(nb * nm, -1)
        flat = self.w.reshape(nb * nm, -1)
        return (flat_t.conj() @ flat.T) / self.n_x

    def biorthogonality_residual(self) -> float:
        g = self.gram()
        return float(np.abs(g - np.eye(g.shape[0])).max())

    def reflected(self, samples: np.ndarray, center_sum: float) -> np.ndarray:
        """Samples of f(center_sum - x) for grid-compatible center_sum."""
        npts = len(self.x)
        shift = (center_sum - 2.0 * self.x[0]) * self.n_x
        off = int(round(shift))
        if abs(shift - off) > 1e-9:
            raise ValueError("reflection center not on the sample grid")
        idx = (off - np.arange(npts)) % npts
        return samples[idx]

    def center(self, n: int, m: int = 0) -> float:
        """First moment of |w|^2 (right function)."""
        i = self.cell_index(m)
        weight = np.abs(self.w[n, i]) ** 2
        return float((self.x * weight).sum() / weight.sum())

    def spread(self, n: int, m: int = 0) -> float:
        i = self.cell_index(m)
        weight = np.abs(self.w[n, i]) ** 2
        mean = (self.x * weight).sum() / weight.sum()
        return float((((self.x - mean) ** 2) * weight).sum() / weight.sum())

    def mass_within(self, n: int, center: float, half_width: float, m: int = 0) -> float:
        """Fraction of sum |w|^2 inside |x - center| < half_width."""
        i = self.cell_index(m)
        weight = np.abs(self.w[n, i]) ** 2
        mask = np.abs(self.x - center) < half_width
        return float(weight[mask].sum() / weight.sum())


def build_wannier(bands: BandSet, mixing: UnitaryMixing,
                  cells=range(-3, 4), n_x: int = N_X_DEFAULT) -> WannierSet:
    """Synthesize the bi-orthogonal Wannier pair family from mixed Bloch states.

    w_n^m(x) = (1/N) sum_k e^{ik(x-m)} sum_{n'} U_{n'n}(k) u_k^{n'}(x), and the
    same U applied to the left family.  w_n^m(x) = w_n^0(x-m) holds exactly by
    construction (integer-cell rolls of the sampled function).  The residual
    normalization <w~_n^0|w_n^0> -> 1 is split into equal-magnitude factors on
    w and w~.
    """
    if bands.phase_convention is None:
        raise ValueError("apply fix_phases before building Wannier functions")
    band_idx = list(mixing.band_indices)
    nb = len(band_idx)
    ks = bands.k_grid
    n = len(ks)
    cell0 = -(n // 2)
    cells_full = cell0 + np.arange(n)
    offs = np.arange(n_x) / n_x - 0.5
    x_full = (cells_full[:, None] + offs[None, :]).ravel()
    ls = bands.config.plane_waves
    fourier = np.exp(2j * np.pi * np.outer(offs, ls))      # (n_x, dim)

    w0 = np.zeros((nb, n * n_x), dtype=complex)
    wt0 = np.zeros((nb, n * n_x), dtype=complex)
    for i, k in enumerate(ks):
        ucell = bands.right_vectors[i, band_idx] @ fourier.T
        utcell = bands.left_vectors[i, band_idx] @ fourier.T
        mixed = mixing.matrices[i].T @ ucell
        mixed_t = mixing.matrices[i].T @ utcell
        phase = np.exp(1j * k * x_full)
        w0 += phase[None, :] * np.tile(mixed, (1, n))
        wt0 += phase[None, :] * np.tile(mixed_t, (1, n))
    w0 /= n
    wt0 /= n

    for b in range(nb):
        r = np.sum(wt0[b].conj() * w0[b]) / n_x
        root = np.sqrt(r)
        w0[b] /= root
        wt0[b] /= root.conj()

    cells = np.array(sorted(cells), dtype=int)
    w = np.stack([np.stack([np.roll(w0[b], m * n_x) for m in cells])
                  for b in range(nb)])
    wt = np.stack([np.stack([np.roll(wt0[b], m * n_x) for m in cells])
                   for b in range(nb)])
    meta = dict(bands.potential.meta)
    meta.update(n_k=n, n_x=n_x, l_max=bands.config.l_max,
                A=bands.potential.vector_A, gauge=mixing.method)
    return WannierSet(x=x_full, cells=cells, w=w, w_tilde=wt, n_x=n_x,
                      band_indices=tuple(band_idx), meta=meta)


def trials_from_wannier(wset: WannierSet, window: int | None = None) -> TrialFunctions:
    """Turn the home-cell pair of a WannierSet into a trial set.

    By default the full supercell is kept: the quarter-cell-centered gauge is
    discontinuous at the zone wrap, so Wannier tails decay only algebraically
    and windowing them costs real precision in the projection integrals (over
    the full supercell Bloch orthogonality makes them exact).  A symmetric
    window of whole cells m = -window..window can still be requested."""
    cell_of = np.floor(wset.x + 0.5 + 1e-9).astype(int)
    if window is None:
        mask = np.ones(len(wset.x), dtype=bool)
    else:
        mask = (cell_of >= -window) & (cell_of <= window)
    i0 = wset.cell_index(0)
    meta = {"c": wset.meta.get("c"), "l_max": wset.meta.get("l_max"),
            "n_k": wset.meta.get("n_k"), "n_x": wset.n_x}
    cells = np.unique(cell_of[mask])
    return TrialFunctions(x=wset.x[mask], cells=cells,
                          g=wset.w[:, i0, mask], g_tilde=wset.w_tilde[:, i0, mask],
                          n_x=wset.n_x, meta=meta)


def make_trials(c: complex = 200j, l_max: int = 40, n_k: int = 64,
                n_x: int = N_X_DEFAULT, window: int | None = None,
                check_separation: bool = False) -> TrialFunctions:
    """Regenerate the diagonal-gauge trial set at strong imaginary c.

    n_k must match the supercell of the run the trials will seed."""
    from .spectra import dispersion
    cfg = ModelConfig(l_max=l_max, n_k=n_k, n_bands=3)
    bands = dispersion(PotentialSpec.c_sin(c), cfg)
    fixed, _ = fix_phases(bands, band_indices=(0, 1))
    gauge = diagonal_gauge(fixed, check_separation=check_separation)
    wset = build_wannier(fixed, gauge, cells=(0,), n_x=n_x)
    return trials_from_wannier(wset, window=window)


def trials_for(bands: BandSet, c: complex = 200j,
               n_x: int = N_X_DEFAULT) -> TrialFunctions:
    """Trial set regenerated on the supercell of an existing BandSet."""
    return make_trials(c=c, l_max=bands.config.l_max, n_k=len(bands.k_grid),
                       n_x=n_x)


def default_trials() -> TrialFunctions:
    """The packaged c=200i trial set (see data/trials_c200i.csv)."""
    path = Path(__file__).parent / "data" / "trials_c200i.csv"
    return TrialFunctions.load(path)


def region_decompose(bands: BandSet, pair=(0, 1), tol: float = 1e-8) -> np.ndarray:
    """Label each k as 'alpha' (both band energies real) or 'beta'
    (conjugate pair eps1* = eps2); raises UnlabeledKError otherwise."""
    n, m = pair
    e1 = bands.energies[:, n]
    e2 = bands.energies[:, m]
    labels = np.empty(len(bands.k_grid), dtype=object)
    for i in range(len(labels)):
        if abs(e1[i].imag) < tol and abs(e2[i].imag) < tol:
            labels[i] = "alpha"
        elif abs(e1[i] - e2[i].conjugate()) < tol:
            labels[i] = "beta"
        else:
            raise UnlabeledKError(
                f"k={bands.k_grid[i]:.6f}: spectrum neither real nor conjugate-paired")
    return labels
