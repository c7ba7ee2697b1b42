"""Hopping extraction, symmetry relation checks and truncated lattice models.

t^{m}_{nn'} = (1/N) sum_k [U^dag(k) diag(eps(k)) U(k)]_{nn'} e^{-ikm}; with a
diagonal U this reduces to the per-band Fourier sums of the dispersion.  The
same amplitudes are recomputed independently as real-space Wannier matrix
elements <w~_n^m | H | w_n'^0> for verification.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .model import ModelConfig, PotentialSpec
from .spectra import BandSet
from .wannier import UnitaryMixing, WannierSet

RELATION_TOL = 1e-8


@dataclass
class HoppingTable:
    """Complex amplitudes t[n, n', m] for the mixed band pair, |m| <= m_max."""

    band_indices: tuple
    m_values: np.ndarray
    t: np.ndarray              # (nb, nb, len(m_values))
    provenance: dict = field(default_factory=dict)

    @property
    def m_max(self) -> int:
        return int(self.m_values.max())

    def value(self, n: int, np_: int, m: int) -> complex:
        idx = np.nonzero(self.m_values == m)[0]
        if idx.size == 0:
            raise KeyError(f"offset m={m} not in table")
        return complex(self.t[n, np_, idx[0]])


def hoppings_from_bands(bands: BandSet, mixing: UnitaryMixing,
                        m_max: int = 3) -> HoppingTable:
    """k-space hopping extraction over the mixed bands.

    t^m_{nn'} = <w~_n^m|H|w_{n'}^0> = (1/N) sum_k [U^dag diag(eps) U]_{nn'}
    e^{+ikm}; the exponent sign is fixed by the bra-ket definition (the bra
    contributes conj(e^{-ikm})), verified against the real-space route.
    """
    band_idx = list(mixing.band_indices)
    nb = len(band_idx)
    ks = bands.k_grid
    n = len(ks)
    ms = np.arange(-m_max, m_max + 1)
    t = np.zeros((nb, nb, len(ms)), dtype=complex)
    for i, k in enumerate(ks):
        u = mixing.matrices[i]
        m_k = u.conj().T @ np.diag(bands.energies[i, band_idx]) @ u
        t += m_k[:, :, None] * np.exp(1j * k * ms)[None, None, :]
    t /= n
    prov = {"gauge": mixing.method, "band_indices": tuple(band_idx),
            "n_k": n, "l_max": bands.config.l_max}
    prov.update({k: v for k, v in bands.potential.meta.items()})
    prov["A"] = bands.potential.vector_A
    return HoppingTable(band_indices=tuple(band_idx), m_values=ms, t=t,
                        provenance=prov)


def hoppings_real_space(wset: WannierSet, pot: PotentialSpec,
                        m_values=None) -> HoppingTable:
    """Independent route: t^{m}_{nn'} = <w~_n^m | H | w_{n'}^0> by direct
    real-space application of H (spectral derivative over the supercell)."""
    nb = wset.w.shape[0]
    if m_values is None:
        m_values = wset.cells
    ms = np.asarray(sorted(m_values), dtype=int)
    npts = len(wset.x)
    length = npts / wset.n_x
    q = 2.0 * np.pi * np.fft.fftfreq(npts, d=1.0 / wset.n_x)
    v_x = pot.sample(wset.x)
    i0 = wset.cell_index(0)

    h_w = np.empty((nb, npts), dtype=complex)
    for b in range(nb):
        w = wset.w[b, i0]
        kinetic = np.fft.ifft((q - pot.vector_A) ** 2 * np.fft.fft(w))
        h_w[b] = kinetic + v_x * w

    t = np.zeros((nb, nb, len(ms)), dtype=complex)
    for j, m in enumerate(ms):
        im = wset.cell_index(m)
        for a in range(nb):
            for b in range(nb):
                t[a, b, j] = np.sum(wset.w_tilde[a, im].conj() * h_w[b]) / wset.n_x
    prov = {"gauge": wset.meta.get("gauge", "?"), "route": "real-space",
            "n_k": wset.meta.get("n_k"), "length": length}
    return HoppingTable(band_indices=wset.band_indices, m_values=ms, t=t,
                        provenance=prov)


@dataclass
class RelationReport:
    context: str
    checks: dict
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values() if c["required"])

    def violations(self):
        return {k: c for k, c in self.checks.items()
                if c["required"] and not c["passed"]}


def verify_relations(table: HoppingTable, context: str,
                     tol: float = RELATION_TOL) -> RelationReport:
    """Check the hopping symmetry relations appropriate to the symmetry class.

    context: 'pt-imaginary' (PT potential, bands joined by EPs),
             'pt-imaginary-separated' (PT, bands split: inter-band must vanish),
             'complex-separated' (complex c: symmetric non-Hermitian chains),
             'vector-potential' (A != 0: asymmetry reported, nothing imposed).
    """
    ms = table.m_values
    m_max = table.m_max
    t = table.t

    def at(n, np_, m):
        return t[n, np_, np.nonzero(ms == m)[0][0]]

    sym_diag = max(abs(at(n, n, m) - at(n, n, -m))
                   for n in range(t.shape[0]) for m in range(1, m_max + 1))
    conj_pair = max(abs(at(0, 0, m) - np.conj(at(1, 1, m)))
                    for m in range(-m_max, m_max + 1)) if t.shape[0] == 2 else 0.0
    inter_herm = max(abs(at(0, 1, m) - np.conj(at(1, 0, -m)))
                     for m in range(-m_max, m_max + 1)) if t.shape[0] == 2 else 0.0
    inter_refl = max(abs(at(0, 1, -m) - at(0, 1, m + 1))
                     for m in range(-m_max, m_max)) if t.shape[0] == 2 else 0.0
    if t.shape[0] == 2:
        inter_mag = float(max(np.abs(t[0, 1]).max(), np.abs(t[1, 0]).max()))
    else:
        inter_mag = 0.0

    asym = {}
    for n in range(t.shape[0]):
        for m in range(1, m_max + 1):
            lo = abs(at(n, n, -m))
            asym[(n, m)] = abs(at(n, n, m)) / lo if lo > 0 else np.inf

    pt_like = context in ("pt-imaginary", "pt-imaginary-separated")
    checks = {
        "diagonal_symmetric": {
            "value": float(sym_diag), "tol": tol,
            "required": context != "vector-potential",
            "passed": sym_diag < tol},
        "diagonal_conjugate_pair": {
            "value": float(conj_pair), "tol": tol,
            "required": pt_like, "passed": conj_pair < tol},
        "interband_hermitian": {
            "value": float(inter_herm), "tol": tol,
            "required": pt_like, "passed": inter_herm < tol},
        "interband_reflection": {
            "value": float(inter_refl), "tol": tol,
            "required": pt_like, "passed": inter_refl < tol},
        "interband_zero": {
            "value": inter_mag, "tol": tol,
            "required": context in ("pt-imaginary-separated", "complex-separated"),
            "passed": inter_mag < tol},
    }
    notes = {"asymmetry_ratios": asym, "interband_magnitude": inter_mag}
    return RelationReport(context=context, checks=checks, notes=notes)


@dataclass
class TbModel:
    """Truncated lattice model with a dispersion evaluator.

    kind 'independent': decoupled per-band chains (diagonal table entries).
    kind 'pt2': the PT two-band form [[t1(k), t2(k)], [t2*(k), t1*(k)]].
    Its diagonal keeps |m| <= m_trunc; the inter-band part keeps the
    reflection-paired offsets m = 1-m_trunc .. m_trunc, so m_trunc=1 is
    exactly the nearest-neighbor triangular ladder t2(k) = t12^0 (1+e^{-ik})
    with the closed-form bands
    eps_n(k) = Re[t1] -+ sqrt(|t2|^2 - Im[t1]^2).
    """

    table: HoppingTable
    m_trunc: int = 1
    kind: str = "independent"

    @property
    def n_bands(self) -> int:
        return self.table.t.shape[0]

    def _t1(self, k):
        """Diagonal Fourier sum gamma + sum_m 2 t11^m cos(km), symmetrized."""
        out = np.full_like(np.asarray(k, dtype=complex), self.table.value(0, 0, 0))
        for m in range(1, self.m_trunc + 1):
            tm = 0.5 * (self.table.value(0, 0, m) + self.table.value(0, 0, -m))
            out = out + 2.0 * tm * np.cos(np.asarray(k) * m)
        return out

    def _t2(self, k):
        """Inter-band sum over the reflection-paired offsets 1-m_trunc..m_trunc."""
        k = np.asarray(k, dtype=float)
        out = np.zeros(k.shape, dtype=complex)
        for m in range(1 - self.m_trunc, self.m_trunc + 1):
            out = out + self.table.value(0, 1, m) * np.exp(-1j * k * m)
        return out

    def bloch_hamiltonian(self, k: float) -> np.ndarray:
        """H_t(k)_{nn'} = sum_m t^m_{nn'} e^{-ikm}: the lattice Bloch state
        sum_m e^{ikm}|w^m> then reproduces [U^dag diag(eps) U](k) exactly when
        the sum is untruncated."""
        if self.kind == "pt2":
            d = complex(self._t1(k))
            off = complex(self._t2(k))
            return np.array([[d, off], [np.conj(off), np.conj(d)]])
        nb = self.n_bands
        h = np.zeros((nb, nb), dtype=complex)
        for m in range(-self.m_trunc, self.m_trunc + 1):
            h += self.table.t[:, :, np.nonzero(self.table.m_values == m)[0][0]] \
                * np.exp(-1j * k * m)
        return h

    def radicand(self, k):
        """|t2(k)|^2 - Im[t1(k)]^2; zeros mark the lattice-model EPs.
        At m_trunc=1 this is exactly 2|t12^0|^2 (1+cos k) - Im[gamma+2t cos k]^2."""
        return np.abs(self._t2(k)) ** 2 - self._t1(k).imag ** 2

    def dispersion(self, k_grid: np.ndarray) -> np.ndarray:
        """Bands of H_t(k) on a k-grid, shape (n_k, nb)."""
        ks = np.asarray(k_grid, dtype=float)
        nb = self.n_bands
        out = np.empty((len(ks), nb), dtype=complex)
        if self.kind == "pt2":
            d = self._t1(ks)
            root = np.sqrt(self.radicand(ks).astype(complex))
            out[:, 0] = d.real - root
            out[:, 1] = d.real + root
            return out
        if self.kind == "independent":
            ms = np.arange(-self.m_trunc, self.m_trunc + 1)
            for n in range(nb):
                coeffs = np.array([self.table.value(n, n, m) for m in ms])
                out[:, n] = (coeffs[None, :] * np.exp(-1j * np.outer(ks, ms))).sum(axis=1)
            return out
        for i, k in enumerate(ks):
            vals = np.linalg.eigvals(self.bloch_hamiltonian(k))
            order = np.lexsort((vals.imag, vals.real))
            out[i] = vals[order]
        return out

    def ep_positions(self, n_scan: int = 4096) -> list[float]:
        """Zeros of the radicand (pt2 models), as k in (-pi, pi]."""
        if self.kind != "pt2":
            raise ValueError("radicand EP positions require the pt2 model")
        from scipy.optimize import brentq
        ks = np.linspace(-np.pi, np.pi, n_scan)
        r = self.radicand(ks)
        out = []
        for i in np.nonzero(np.diff(np.sign(r)) != 0)[0]:
            k0 = brentq(lambda k: float(self.radicand(k)), ks[i], ks[i + 1],
                        xtol=1e-12)
            out.append(float(k0))
        return sorted(out)


@dataclass
class ComparisonReport:
    per_band: dict   # band -> {max_abs, rms, bandwidth, ratio}

    @property
    def worst_ratio(self) -> float:
        return max(v["ratio"] for v in self.per_band.values())


def compare(continuum: BandSet, model: TbModel, band_indices=(0, 1)) -> ComparisonReport:
    """Deviation of the TB dispersion from the continuum bands on the same grid,
    normalized by the continuum band extent (Re width + Im width)."""
    tb = model.dispersion(continuum.k_grid)
    report = {}
    for pos, n in enumerate(band_indices):
        diff = np.abs(continuum.energies[:, n] - tb[:, pos])
        e = continuum.energies[:, n]
        width = (e.real.max() - e.real.min()) + (e.imag.max() - e.imag.min())
        report[n] = {"max_abs": float(diff.max()),
                     "rms": float(np.sqrt((diff ** 2).mean())),
                     "bandwidth": float(width),
                     "ratio": float(diff.max() / width) if width > 0 else np.inf}
    return ComparisonReport(per_band=report)


def hopping_decay_scan(c_values, cfg: ModelConfig, kind: str = "imaginary",
                       trials=None, m_max: int = 3):
    """Hopping-ratio table as a function of potential strength.

    kind 'imaginary': c = i*v, projection gauge (needs trials); columns
    |t11^2/t11^1| and |t12^0/t11^0|.
    kind 'complex': c = v(1 + 4i) (Im/Re = 4), per-band diagonal hoppings;
    columns |t11^2/t11^1| and |t22^2/t22^1|.
    """
    from .spectra import dispersion
    from .wannier import diagonal_gauge, fix_phases, projection_unitary

    rows = []
    for v in c_values:
        v = float(v)
        if kind == "imaginary":
            pot = PotentialSpec.c_sin(1j * v)
        elif kind == "complex":
            pot = PotentialSpec.c_sin(v * (1.0 + 4.0j))
        else:
            raise ValueError(f"unknown scan kind {kind!r}")
        bands = dispersion(pot, cfg)
        fixed, _ = fix_phases(bands)
        if kind == "imaginary":
            if trials is None:
                raise ValueError("imaginary-c scan needs trial functions")
            mix = projection_unitary(fixed, trials)
        else:
            mix = diagonal_gauge(fixed, check_separation=False)
        table = hoppings_from_bands(fixed, mix, m_max=m_max)
        if kind == "imaginary":
            rows.append({"value": v,
                         "ratio_nn": abs(table.value(0, 0, 2) / table.value(0, 0, 1)),
                         "ratio_inter": abs(table.value(0, 1, 0) / table.value(0, 0, 0))})
        else:
            rows.append({"value": v,
                         "ratio_band1": abs(table.value(0, 0, 2) / table.value(0, 0, 1)),
                         "ratio_band2": abs(table.value(1, 1, 2) / table.value(1, 1, 1))})
    return rows


def save_table(path, table: HoppingTable) -> None:
    """Text serialization: provenance header + rows n n' m re im (17 sig digits)."""
    with open(path, "w") as fh:
        prov = {k: repr(v) for k, v in table.provenance.items()}
        fh.write("# nhband hopping table\n")
        fh.write("# provenance: " + json.dumps(prov, sort_keys=True) + "\n")
        fh.write("# columns: n n' m re_t im_t\n")
        nb = table.t.shape[0]
        for n in range(nb):
            for np_ in range(nb):
                for j, m in enumerate(table.m_values):
                    v = table.t[n, np_, j]
                    fh.write(f"{n} {np_} {m} {v.real:.17g} {v.imag:.17g}\n")


def load_table(path) -> HoppingTable:
    provenance = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# provenance:"):
                provenance = {k: v for k, v in
                              json.loads(line.split(":", 1)[1]).items()}
            elif line and not line.startswith("#"):
                n, np_, m, re, im = line.split()
                rows.append((int(n), int(np_), int(m), float(re), float(im)))
    nb = max(r[0] for r in rows) + 1
    ms = np.array(sorted({r[2] for r in rows}))
    t = np.zeros((nb, nb, len(ms)), dtype=complex)
    for n, np_, m, re, im in rows:
        t[n, np_, np.nonzero(ms == m)[0][0]] = re + 1j * im
    return HoppingTable(band_indices=tuple(range(nb)), m_values=ms, t=t,
                        provenance=provenance)
