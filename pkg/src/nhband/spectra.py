"""Plane-wave Bloch Hamiltonian: construction, diagonalization and band tracking.

The truncated matrix is H_lm(k) = (k + 2 pi m - A)^2 delta_lm + V_{l-m} on the
plane waves l, m = -l_max..l_max.  Left eigenvectors (eigenvectors of the
conjugate transpose) are computed alongside the right ones and rescaled so
that each pair satisfies sum_l conj(u~_l) u_l = 1, except near exceptional
points where the pair is flagged as defective instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .errors import PotentialRepresentationError
from .model import ModelConfig, PotentialSpec, TWO_PI

K_SLACK = 1e-9
DEFECT_TOL = 1e-6
DEGENERACY_TOL = 1e-6
OVERLAP_AMBIGUITY_TOL = 1e-6


@dataclass
class BlochMatrix:
    k: float
    entries: np.ndarray


@dataclass
class EigenSystem:
    """Full eigensystem of H(k): right/left pairs matched index-by-index."""

    k: float
    values: np.ndarray          # (dim,)
    right: np.ndarray           # (dim, dim), column i right eigenvector, unit norm
    left: np.ndarray            # (dim, dim), column i scaled so <left_i|right_i> = 1
    self_overlap: np.ndarray    # (dim,) |<vl_i|vr_i>| for unit-norm vl, vr
    defective: np.ndarray       # (dim,) bool, pair flagged near an exceptional point


def build_bloch_matrix(k: float, pot: PotentialSpec, cfg: ModelConfig) -> BlochMatrix:
    if abs(k) > np.pi + 1e-6:
        raise ValueError(f"k={k} outside the first Brillouin zone")
    dim = cfg.dim
    m = cfg.plane_waves
    h = np.zeros((dim, dim), dtype=complex)
    np.fill_diagonal(h, (k + TWO_PI * m - pot.vector_A) ** 2)
    for l, v in pot.scalar_fourier.items():
        if abs(l) > 2 * cfg.l_max:
            raise PotentialRepresentationError(
                f"V_l with l={l} exceeds the cutoff band |l| <= {2 * cfg.l_max}"
            )
        if abs(l) <= 2 * cfg.l_max and abs(l) < dim:
            # entries[l_row, m_col] with l_row - m_col = l sit on the -l diagonal
            h += v * np.eye(dim, k=-l)
    return BlochMatrix(k=float(k), entries=h)


def solve_k(k: float, pot: PotentialSpec, cfg: ModelConfig,
            defect_tol: float = DEFECT_TOL) -> EigenSystem:
    """Diagonalize H(k), returning matched right/left pairs.

    The left vectors come from the same truncated matrix (LAPACK returns the
    eigenvectors of the conjugate transpose in the same call, so the pairing
    eps~ = conj(eps) is exact by construction).  Pairs whose raw bi-orthogonal
    self-overlap falls below defect_tol are flagged and left unnormalized.
    """
    h = build_bloch_matrix(k, pot, cfg).entries
    if not h.imag.any():
        # real matrix: dgeev keeps PT-symmetric spectra exactly conjugate-closed
        h = h.real
    values, vl, vr = sla.eig(h, left=True, right=True)
    d = np.einsum("li,li->i", vl.conj(), vr)
    s = np.abs(d)
    defective = s < defect_tol
    left = vl.copy()
    good = ~defective
    left[:, good] = left[:, good] / d[good].conj()
    return EigenSystem(k=float(k), values=values, right=vr, left=left,
                       self_overlap=s, defective=defective)


def solve_k_adjoint_pair(k: float, pot: PotentialSpec, cfg: ModelConfig,
                         defect_tol: float = DEFECT_TOL) -> EigenSystem:
    """Reference implementation: solve H and H^dagger separately and match.

    Eigenvalues of the adjoint problem are assigned to the right spectrum by
    minimizing |conj(mu) - eps| globally (collision-free by construction).
    Used to cross-check solve_k; slower, numerically equivalent.
    """
    h = build_bloch_matrix(k, pot, cfg).entries
    values, vr = sla.eig(h)
    mu, vleft = sla.eig(h.conj().T)
    cost = np.abs(mu.conj()[None, :] - values[:, None])
    rows, cols = linear_sum_assignment(cost)
    order = cols[np.argsort(rows)]
    vl = vleft[:, order]
    d = np.einsum("li,li->i", vl.conj(), vr)
    s = np.abs(d)
    defective = s < defect_tol
    left = vl.copy()
    good = ~defective
    left[:, good] = left[:, good] / d[good].conj()
    return EigenSystem(k=float(k), values=values, right=vr, left=left,
                       self_overlap=s, defective=defective)


@dataclass
class OrderingLog:
    """Record of every ordering decision taken while assembling a BandSet."""

    global_order: list = field(default_factory=list)
    rules: list = field(default_factory=list)        # (k_index, lower_band, rule)
    ambiguities: list = field(default_factory=list)  # (k_index, band, score_gap)
    continuity_flags: list = field(default_factory=list)

    def rules_at(self, k_index: int):
        return [r for r in self.rules if r[0] == k_index]

    def rule_names(self):
        return {r[2] for r in self.rules}


@dataclass
class BandSet:
    """Tracked, ordered low-energy bands over the k-grid."""

    k_grid: np.ndarray
    energies: np.ndarray        # (n_k, n_bands) complex
    right_vectors: np.ndarray   # (n_k, n_bands, dim)
    left_vectors: np.ndarray    # (n_k, n_bands, dim)
    full_energies: np.ndarray   # (n_k, dim) untracked full spectrum
    self_overlaps: np.ndarray   # (n_k, n_bands)
    defective: np.ndarray       # (n_k, n_bands) bool
    ordering_log: OrderingLog
    config: ModelConfig
    potential: PotentialSpec
    phase_convention: object = None

    @property
    def n_bands(self) -> int:
        return self.energies.shape[1]

    @property
    def l0_index(self) -> int:
        return self.config.l_max

    def index_of_k(self, k: float):
        hits = np.nonzero(np.abs(self.k_grid - k) < 1e-12)[0]
        if hits.size == 0:
            return None
        return int(hits[0])

    def biorthonormality_residual(self) -> float:
        """max over k of |U~^dag U - I| on the retained bands, skipping flagged k."""
        worst = 0.0
        eye = np.eye(self.n_bands)
        for i in range(len(self.k_grid)):
            if self.defective[i].any():
                continue
            g = self.left_vectors[i].conj() @ self.right_vectors[i].T
            worst = max(worst, float(np.abs(g - eye).max()))
        return worst

    def continuity_check(self) -> float:
        """Largest band step normalized by W_n * sqrt(dk); ~O(1) near EPs."""
        dk = float(self.k_grid[1] - self.k_grid[0])
        worst = 0.0
        for n in range(self.n_bands):
            e = self.energies[:, n]
            width = (e.real.max() - e.real.min()) + (e.imag.max() - e.imag.min()) + 1.0
            step = np.abs(np.diff(e)).max()
            worst = max(worst, step / (width * np.sqrt(dk)))
        return worst


def _initial_order(values: np.ndarray, n_bands: int) -> np.ndarray:
    order = np.lexsort((values.imag, values.real))
    return order[:n_bands]


def _track(systems: list[EigenSystem], n_bands: int, log: OrderingLog) -> np.ndarray:
    """Follow bands across k by maximal bi-orthogonal overlap with the previous k."""
    sel = np.empty((len(systems), n_bands), dtype=int)
    sel[0] = _initial_order(systems[0].values, n_bands)
    for i in range(1, len(systems)):
        prev, cur = systems[i - 1], systems[i]
        lprev = prev.left[:, sel[i - 1]]                     # (dim, nb)
        score = np.abs(lprev.conj().T @ cur.right)           # (nb, dim)
        norm = score.max(axis=1, keepdims=True)
        norm[norm == 0.0] = 1.0
        scaled = score / norm
        rows, cols = linear_sum_assignment(-scaled)
        choice = cols[np.argsort(rows)]
        for n in range(n_bands):
            row = np.sort(scaled[n])[::-1]
            if row.size > 1 and row[0] - row[1] < OVERLAP_AMBIGUITY_TOL:
                log.ambiguities.append((i, n, float(row[0] - row[1])))
        sel[i] = choice
    return sel


def _runs_of_two(mask: np.ndarray) -> np.ndarray:
    """Keep only mask points that belong to a run of >= 2 consecutive points."""
    out = np.zeros_like(mask)
    if mask.size < 2:
        return out
    out[:-1] |= mask[:-1] & mask[1:]
    out[1:] |= mask[1:] & mask[:-1]
    return out


def _apply_degenerate_rules(energies: np.ndarray, sel: np.ndarray, log: OrderingLog,
                            tol: float = DEGENERACY_TOL) -> None:
    """Pointwise ordering inside degenerate regions.

    Where the real parts of an adjacent band pair coincide over a k-region,
    the pair is ordered by imaginary part; where the imaginary parts
    coincide, by real part.  Isolated single-point coincidences (accidental
    curve crossings of separated bands, e.g. with a vector potential) do not
    count as regions and are left to the continuity tracking, which keeps
    point-gap loops intact.  Every active rule is logged.
    """
    n_k, nb = energies.shape
    for _ in range(nb * nb):
        changed = False
        for j in range(nb - 1):
            a = energies[:, j]
            b = energies[:, j + 1]
            re_deg = _runs_of_two(np.abs(a.real - b.real) < tol)
            im_deg = _runs_of_two(np.abs(a.imag - b.imag) < tol) & ~re_deg
            swap = (re_deg & (a.imag > b.imag)) | (im_deg & (a.real > b.real))
            for i in np.nonzero(re_deg)[0]:
                log.rules.append((int(i), j, "im-rule"))
            for i in np.nonzero(im_deg)[0]:
                log.rules.append((int(i), j, "re-rule"))
            if swap.any():
                changed = True
                idx = np.nonzero(swap)[0]
                energies[idx, j], energies[idx, j + 1] = \
                    energies[idx, j + 1].copy(), energies[idx, j].copy()
                sel[idx, j], sel[idx, j + 1] = sel[idx, j + 1].copy(), sel[idx, j].copy()
        if not changed:
            break
    # deduplicate rule records (the stabilization loop revisits pairs)
    log.rules[:] = sorted(set(log.rules))


def order_and_track(systems: list[EigenSystem], cfg: ModelConfig,
                    pot: PotentialSpec) -> BandSet:
    """Assemble a BandSet from per-k eigensystems.

    Bands are continuous-in-k curves found by eigenvector-overlap tracking,
    globally ordered by (min Re, min Im, Re at the second-smallest k), then
    reordered pointwise inside degenerate regions per the ordering rules.
    """
    nb = cfg.n_bands
    log = OrderingLog()
    sel = _track(systems, nb, log)
    energies = np.array([[systems[i].values[sel[i, n]] for n in range(nb)]
                         for i in range(len(systems))])

    min_re = energies.real.min(axis=0)
    min_im = energies.imag.min(axis=0)
    second_k_re = energies.real[1] if energies.shape[0] > 1 else energies.real[0]
    order = np.lexsort((second_k_re, min_im, min_re))
    energies = energies[:, order]
    sel = sel[:, order]
    log.global_order = list(order)

    _apply_degenerate_rules(energies, sel, log)

    n_k = len(systems)
    dim = cfg.dim
    right = np.empty((n_k, nb, dim), dtype=complex)
    left = np.empty((n_k, nb, dim), dtype=complex)
    overlaps = np.empty((n_k, nb))
    defective = np.zeros((n_k, nb), dtype=bool)
    full = np.empty((n_k, dim), dtype=complex)
    for i, sys in enumerate(systems):
        right[i] = sys.right[:, sel[i]].T
        left[i] = sys.left[:, sel[i]].T
        overlaps[i] = sys.self_overlap[sel[i]]
        defective[i] = sys.defective[sel[i]]
        full[i] = sys.values

    k_grid = np.array([s.k for s in systems])
    bands = BandSet(k_grid=k_grid, energies=energies, right_vectors=right,
                    left_vectors=left, full_energies=full, self_overlaps=overlaps,
                    defective=defective, ordering_log=log, config=cfg, potential=pot)

    # continuity sanity flags: a genuine band never jumps by O(bandwidth) per step
    dk = float(k_grid[1] - k_grid[0]) if n_k > 1 else 1.0
    for n in range(nb):
        e = energies[:, n]
        width = (e.real.max() - e.real.min()) + (e.imag.max() - e.imag.min()) + 1.0
        steps = np.abs(np.diff(e))
        bad = np.nonzero(steps > width * np.sqrt(dk))[0]
        for i in bad:
            log.continuity_flags.append((int(i), n, float(steps[i])))
    return bands


def dispersion(pot: PotentialSpec, cfg: ModelConfig,
               defect_tol: float = DEFECT_TOL) -> BandSet:
    """Solve the model on the whole k-grid and return the ordered BandSet."""
    systems = []
    for k in cfg.k_grid():
        try:
            systems.append(solve_k(k, pot, cfg, defect_tol=defect_tol))
        except Exception as exc:
            raise type(exc)(f"{exc} (at k={k})") from exc
    return order_and_track(systems, cfg, pot)


def free_folded_bands(k_grid: np.ndarray, n_bands: int, l_max: int = 40) -> np.ndarray:
    """Oracle: the folded free dispersion, band n = n-th smallest (k + 2 pi m)^2."""
    m = np.arange(-l_max, l_max + 1)
    vals = np.sort((np.asarray(k_grid)[:, None] + TWO_PI * m[None, :]) ** 2, axis=1)
    return vals[:, :n_bands]
