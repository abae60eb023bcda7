"""Eigendecomposition, band structures, butterflies and three-leg checks."""

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import grid_map
from .lattice import OPEN, LatticeDomainError, build_quasimomentum, build_real_space, hermiticity_residual


class SpectrumValidationError(ValueError):
    """Input matrix or result violates the eigensolver contract."""


HERMITIAN_TOL = 1e-12
DEGENERACY_TOL = 1e-10


def fix_phase(vectors, rel=1e-9):
    """Rotate each column so its largest entry is real and positive.

    Entries within ``rel`` of the column maximum count as tied; the lowest
    index among them wins, so mirror-image amplitudes do not flip the gauge.
    """
    V = np.array(vectors, dtype=np.complex128, copy=True)
    mag = np.abs(V)
    top = mag.max(axis=0, keepdims=True)
    pick = np.argmax(mag >= top * (1 - rel), axis=0)
    ref = V[pick, np.arange(V.shape[1])]
    with np.errstate(invalid="ignore", divide="ignore"):
        rot = np.where(np.abs(ref) > 0, np.conj(ref) / np.abs(ref), 1.0)
    return V * rot[None, :]


@dataclass(frozen=True)
class EigenSystem:
    values: np.ndarray
    vectors: np.ndarray
    degenerate: np.ndarray
    norm: float

    def orthonormality_error(self):
        V = self.vectors
        return float(np.abs(V.conj().T @ V - np.eye(V.shape[1])).max())


def eig_residual(H, eig):
    """max_j ||H v_j - w_j v_j||_2 divided by ||H||_F."""
    H = np.asarray(H)
    r = H @ eig.vectors - eig.vectors * eig.values[None, :]
    nrm = eig.norm if eig.norm > 0 else 1.0
    return float(np.linalg.norm(r, axis=0).max() / nrm)


def degeneracy_flags(values, scale, tol=DEGENERACY_TOL):
    """True for every level within tol*scale of a neighbour."""
    w = np.asarray(values)
    flags = np.zeros(w.size, dtype=bool)
    if w.size > 1:
        close = np.diff(w) <= tol * scale
        flags[:-1] |= close
        flags[1:] |= close
    return flags


def eig_hermitian(H, scale=None, tol=HERMITIAN_TOL):
    """Ascending eigenpairs of a Hermitian matrix with a fixed phase gauge.

    ``scale`` sets the unit for degeneracy detection; it defaults to the
    largest entry magnitude.
    """
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise SpectrumValidationError(f"expected a square matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise SpectrumValidationError("matrix has non-finite entries")
    res = hermiticity_residual(H)
    if res > tol:
        raise SpectrumValidationError(f"matrix is not Hermitian: relative residual {res:.3e}")
    Hs = 0.5 * (H + H.conj().T)
    w, v = np.linalg.eigh(Hs)
    if scale is None:
        scale = float(np.abs(H).max()) if H.size else 1.0
    return EigenSystem(
        values=w,
        vectors=fix_phase(v),
        degenerate=degeneracy_flags(w, scale if scale > 0 else 1.0),
        norm=float(np.linalg.norm(H)),
    )


@dataclass(frozen=True)
class BandStructure:
    k_grid: np.ndarray
    bands: np.ndarray  # (n_k, n_bands)
    edge_weight: np.ndarray  # (n_k, n_bands), mean row position

    @property
    def n_bands(self):
        return self.bands.shape[1]


@dataclass(frozen=True)
class ButterflySpectrum:
    gamma_grid: np.ndarray
    levels: np.ndarray  # (n_gamma, L*W)


def default_k_grid(n=401):
    """n uniform points over (-pi, pi]."""
    return np.linspace(-np.pi, np.pi, n + 1)[1:]


def default_gamma_grid(n=401):
    """n uniform points over [0, 2 pi]."""
    return np.linspace(0.0, 2 * np.pi, n)


def bands_open_column(spec, k_grid=None, threads=None):
    """Bands of the strip that is infinite along rows and open across them."""
    if spec.col_boundary != OPEN:
        raise LatticeDomainError("open-column bands need col_boundary='open'")
    k_grid = default_k_grid() if k_grid is None else np.asarray(k_grid, dtype=float)
    m = spec.m_values.astype(float)

    def one(k):
        w, v = np.linalg.eigh(build_quasimomentum(k, spec))
        return w, m @ np.abs(v) ** 2

    out = grid_map(one, k_grid, threads)
    return BandStructure(
        k_grid=k_grid,
        bands=np.array([o[0] for o in out]),
        edge_weight=np.array([o[1] for o in out]),
    )


def butterfly(spec, gamma_grid=None, threads=None):
    """Real-space spectrum for every flux on the grid."""
    gamma_grid = default_gamma_grid() if gamma_grid is None else np.asarray(gamma_grid, dtype=float)
    levels = grid_map(
        lambda g: np.linalg.eigvalsh(build_real_space(spec.with_(gamma=g))), gamma_grid, threads
    )
    return ButterflySpectrum(gamma_grid=gamma_grid, levels=np.array(levels))


def threeleg_perturbative(gamma, g_x, g_y):
    """Second-order energies of the lowest three-leg levels at k_x = 0 and k_x = gamma.

    Returns (E0', E_gamma') as angular frequencies. The k_x = 0 level is
    pushed down by both neighbouring legs, the k_x = gamma level by one, so
    E_gamma' carries half the shift with the same (downward) sign.
    """
    c = 1 - math.cos(gamma)
    if abs(wrap(gamma)) < 1e-12:
        raise LatticeDomainError("perturbative three-leg energies diverge at gamma = 0")
    if g_x == 0:
        raise LatticeDomainError("perturbative three-leg energies need g_x != 0")
    shift = g_y ** 2 / g_x / c
    return -2 * g_x - shift, -2 * g_x - 0.5 * shift


def wrap(x):
    return math.remainder(x, 2 * math.pi)


def threeleg_bands_zero_flux(k_x, g_x, g_y):
    """Closed-form W=3 bands at gamma=0: -2 g_x cos k + g_y (-sqrt2, 0, sqrt2)."""
    base = -2 * g_x * np.cos(np.asarray(k_x, dtype=float))
    return base[..., None] + g_y * np.array([-math.sqrt(2), 0.0, math.sqrt(2)])


def lowest_two(spec):
    w = np.linalg.eigvalsh(build_real_space(spec))
    return w[0], w[1]


def gap_map(spec, gamma_grid, K_grid, threads=None):
    """omega_2 - omega_1 over (gamma, K) with g_y = K g_x."""
    if not spec.is_open:
        raise LatticeDomainError("gap map is defined for open boundaries")
    cells = [(g, K) for g in gamma_grid for K in K_grid]

    def one(cell):
        g, K = cell
        w1, w2 = lowest_two(spec.with_(gamma=g, g_y=K * spec.g_x))
        return w2 - w1

    vals = grid_map(one, cells, threads)
    return np.array(vals).reshape(len(gamma_grid), len(K_grid))
