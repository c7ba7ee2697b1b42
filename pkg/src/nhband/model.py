"""Model definition: plane-wave cutoff, k-grid and complex periodic potentials.

Units: the lattice constant is 1 and the recoil-type energy 1/(2Ma^2) is 1,
so the Hamiltonian reads H = (-i d/dx - A)^2 + V(x) with V, A complex and
V(x+1) = V(x).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ModelConfig:
    """Numerical resolution of the plane-wave diagonalization.

    l_max: Fourier cutoff, plane waves l = -l_max..l_max (matrix dim 2*l_max+1).
    n_k: number of k points, uniform on (-pi, pi] with k=pi always on-grid.
         k=0 is on-grid only for even n_k.
    n_bands: number of low bands retained in a BandSet.
    """

    l_max: int = 40
    n_k: int = 201
    n_bands: int = 3

    def __post_init__(self):
        if self.l_max < 1:
            raise ValueError("l_max must be >= 1")
        if self.n_k < 3:
            raise ValueError("n_k must be >= 3")
        if not 1 <= self.n_bands <= 2 * self.l_max + 1:
            raise ValueError("n_bands must be in [1, 2*l_max+1]")

    @property
    def dim(self) -> int:
        return 2 * self.l_max + 1

    @property
    def plane_waves(self) -> np.ndarray:
        return np.arange(-self.l_max, self.l_max + 1)

    def k_grid(self) -> np.ndarray:
        """Uniform grid on (-pi, pi], ascending, spacing 2*pi/n_k."""
        i = np.arange(1, self.n_k + 1)
        return -np.pi + TWO_PI * i / self.n_k


@dataclass(frozen=True)
class PotentialSpec:
    """Scalar potential as a finite Fourier series plus a constant vector potential.

    scalar_fourier maps the integer harmonic l to V_l in
    V(x) = sum_l V_l exp(i 2 pi l x).
    """

    scalar_fourier: dict[int, complex] = field(default_factory=dict)
    vector_A: complex = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        cleaned = {int(l): complex(v) for l, v in self.scalar_fourier.items() if v != 0}
        object.__setattr__(self, "scalar_fourier", cleaned)
        object.__setattr__(self, "vector_A", complex(self.vector_A))

    @classmethod
    def free(cls, A: complex = 0.0) -> "PotentialSpec":
        return cls({}, A, meta={"form": "free"})

    @classmethod
    def c_sin(cls, c: complex, A: complex = 0.0) -> "PotentialSpec":
        """V(x) = c sin(2 pi x): V_{-1} = ic/2, V_{+1} = -ic/2."""
        c = complex(c)
        return cls({-1: 0.5j * c, 1: -0.5j * c}, A, meta={"form": "c_sin", "c": c})

    @classmethod
    def b_cos_c_sin(cls, b: float, c: complex, A: complex = 0.0) -> "PotentialSpec":
        """V(x) = b cos(2 pi x) + c sin(2 pi x) with real b."""
        b = float(b)
        c = complex(c)
        comps = {-1: 0.5 * b + 0.5j * c, 1: 0.5 * b - 0.5j * c}
        return cls(comps, A, meta={"form": "b_cos_c_sin", "b": b, "c": c})

    @classmethod
    def b_exp(cls, b: float, A: complex = 0.0) -> "PotentialSpec":
        """V(x) = b exp(i 2 pi x): the lower-triangular single-harmonic case."""
        b = float(b)
        return cls({1: b}, A, meta={"form": "b_exp", "b": b})

    @classmethod
    def from_fourier(cls, components: dict[int, complex], A: complex = 0.0) -> "PotentialSpec":
        return cls(dict(components), A, meta={"form": "fourier"})

    def sample(self, x: np.ndarray) -> np.ndarray:
        """V(x) on an array of positions."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for l, v in self.scalar_fourier.items():
            out += v * np.exp(2j * np.pi * l * x)
        return out

    def max_harmonic(self) -> int:
        if not self.scalar_fourier:
            return 0
        return max(abs(l) for l in self.scalar_fourier)


def gauge_reduce(a_fourier: dict[int, complex], n_x: int = 256):
    """Reduce a periodic vector potential to its constant part.

    A(x) = sum_l A_l exp(i 2 pi l x); everything except the l=0 component can
    be absorbed into the wavefunction by the phase
    exp(-i int_0^x [A(x') - A_0] dx'), leaving the spectrum a function of A_0
    alone.

    Returns (A_const, (x, phase_profile)) with the profile sampled on n_x
    points of the unit cell.
    """
    a_fourier = {int(l): complex(v) for l, v in a_fourier.items()}
    a_const = a_fourier.get(0, 0.0 + 0.0j)
    x = np.arange(n_x) / n_x
    integral = np.zeros(n_x, dtype=complex)
    for l, v in a_fourier.items():
        if l == 0:
            continue
        integral += v * (np.exp(2j * np.pi * l * x) - 1.0) / (2j * np.pi * l)
    profile = np.exp(-1j * integral)
    return a_const, (x, profile)


def fold_to_zone(k):
    """Reduce quasimomenta to the first Brillouin zone (-pi, pi]."""
    k = np.asarray(k, dtype=float)
    folded = np.mod(k + np.pi, TWO_PI) - np.pi
    folded = np.where(np.isclose(folded, -np.pi), np.pi, folded)
    if folded.ndim == 0:
        return float(folded)
    return folded
