"""Berry curvature and Chern numbers on the magnetic Brillouin zone.

Chern integers come from gauge-invariant plaquette products of link
variables on a discretized torus, which are integer-valued by construction.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .lattice import LatticeDomainError, bloch_dk, build_bloch, check_rational

DEFAULT_GRID = 60
MAX_GRID = 480
GAP_TOL = 1e-10
ADMISSIBLE_FIELD = 0.5 * math.pi


class RefinementError(RuntimeError):
    """Grid too coarse, or bands touch so no grid can separate them."""


@dataclass(frozen=True)
class BerryField:
    kx_grid: np.ndarray
    ky_grid: np.ndarray
    F: np.ndarray  # (nx, ny, Q) complex: i * plaquette phase

    @property
    def plaquette_area(self):
        return (self.kx_grid[1] - self.kx_grid[0]) * (self.ky_grid[1] - self.ky_grid[0])

    def density(self):
        """Curvature per unit k-area, for comparison with continuum formulas."""
        return self.F / self.plaquette_area


@dataclass(frozen=True)
class ChernResult:
    chern: tuple
    winding: tuple
    band_energies: np.ndarray  # (nx, ny, Q)
    grid: int
    max_residue: float


def zone_grids(Q, n):
    """Endpoint-free grids k_x in [0, 2 pi/Q), k_y in [0, 2 pi)."""
    return np.arange(n) * (2 * np.pi / Q) / n, np.arange(n) * (2 * np.pi) / n


def bloch_stack(spec, P, Q, kx, ky):
    """Bloch matrices for every (k_x, k_y) pair, shape (nx, ny, Q, Q)."""
    check_rational(spec.gamma, P, Q)
    gamma = 2 * math.pi * P / Q
    KX, KY = np.meshgrid(kx, ky, indexing="ij")
    q = np.arange(Q)
    H = np.zeros(KX.shape + (Q, Q), dtype=np.complex128)
    H[..., q, q] = 2 * spec.g_y * np.cos(KY[..., None] - gamma * q)
    if Q > 1:
        H[..., q[:-1], q[1:]] += -spec.g_x
        H[..., q[1:], q[:-1]] += -spec.g_x
    H[..., 0, Q - 1] += -spec.g_x * np.exp(1j * KX * Q)
    H[..., Q - 1, 0] += -spec.g_x * np.exp(-1j * KX * Q)
    return H


def _solve_grid(spec, P, Q, n):
    kx, ky = zone_grids(Q, n)
    w, U = np.linalg.eigh(bloch_stack(spec, P, Q, kx, ky))
    scale = spec.scale or 1.0
    if Q > 1:
        gap = np.diff(w, axis=-1).min()
        if gap <= GAP_TOL * scale:
            raise RefinementError(
                f"bands touch on the {n}x{n} grid (smallest gap {gap:.3e} rad/s); Chern numbers are undefined"
            )
    return kx, ky, w, U


def _field(U, n):
    if kernels.link_magnitudes(U) <= 1e-12:
        return None
    F = kernels.link_field(U)
    if np.abs(F).max() >= ADMISSIBLE_FIELD:
        return None
    return F


def berry_field(spec, P, Q, grid=DEFAULT_GRID, refine=True):
    """Lattice curvature per plaquette and band; sums to 2 pi i C_j over the zone."""
    n = int(grid)
    if n < 20:
        raise RefinementError("grid must be at least 20 x 20")
    while True:
        kx, ky, w, U = _solve_grid(spec, P, Q, n)
        F = _field(U, n)
        if F is not None:
            return BerryField(kx, ky, 1j * F), w
        if not refine or 2 * n > MAX_GRID:
            raise RefinementError(f"link variables inadmissible on a {n}x{n} grid; try a denser grid")
        n *= 2


def chern_numbers(spec, P, Q, grid=DEFAULT_GRID, refine=True):
    """Per-band Chern integers and gap winding numbers at gamma = 2 pi P / Q."""
    field, w = berry_field(spec, P, Q, grid, refine)
    raw = field.F.imag.sum(axis=(0, 1)) / (2 * np.pi)
    ints = np.rint(raw)
    residue = float(np.abs(raw - ints).max())
    if residue >= 1e-6:
        raise RefinementError(f"Chern sums are not integers (residue {residue:.3e})")
    chern = tuple(int(c) for c in ints)
    if sum(chern) != 0:
        raise RefinementError(f"Chern numbers {chern} do not sum to zero")
    winding = tuple(int(x) for x in np.cumsum(chern))
    return ChernResult(chern=chern, winding=winding, band_energies=w, grid=field.kx_grid.size, max_residue=residue)


def berry_perturbative(k, spec, P, Q, band):
    """Sum-over-states curvature F_xy of one band at k = (k_x, k_y).

    F_xy = sum_{r != j} [<j|dh/dk_x|r><r|dh/dk_y|j> - c.c.] / (E_j - E_r)^2,
    which is purely imaginary.
    """
    kx, ky = k
    h = build_bloch(kx, ky, spec, P, Q)
    w, v = np.linalg.eigh(h)
    if Q == 1:
        return 0j
    gaps = np.abs(w - w[band])
    gaps[band] = np.inf
    if gaps.min() <= GAP_TOL * (spec.scale or 1.0):
        raise LatticeDomainError(f"band {band} is degenerate at k={k}")
    dx, dy = bloch_dk(kx, ky, spec, P, Q)
    X = v.conj().T @ dx @ v
    Y = v.conj().T @ dy @ v
    total = 0j
    for r in range(Q):
        if r == band:
            continue
        t = X[band, r] * Y[r, band]
        total += (t - np.conj(t)) / (w[band] - w[r]) ** 2
    return total


def edge_branch_counts(bands, omega, side):
    """Signed count of strip-band crossings of ``omega`` on one edge.

    ``bands`` is a BandStructure of an open-column strip. A crossing counts
    when the state sits on the requested half of the strip (``side`` = +1
    for m > 0, -1 for m < 0); its sign is the sign of d omega / d k_x.
    A heuristic cross-check of winding numbers, not a definition.
    """
    # close the loop: the default k grid spans one full period
    E = np.vstack([bands.bands, bands.bands[:1]])
    wt = np.vstack([bands.edge_weight, bands.edge_weight[:1]])
    total = 0
    for b in range(E.shape[1]):
        f = E[:, b] - omega
        idx = np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]
        for i in idx:
            where = 0.5 * (wt[i, b] + wt[i + 1, b])
            if np.sign(where) == side:
                total += int(np.sign(E[i + 1, b] - E[i, b]))
    return total


def bulk_gaps(spec, P, Q, grid=DEFAULT_GRID):
    """(top of band j, bottom of band j+1) over the zone for each gap j."""
    kx, ky = zone_grids(Q, grid)
    w = np.linalg.eigvalsh(bloch_stack(spec, P, Q, kx, ky)).reshape(-1, Q)
    return [(w[:, j].max(), w[:, j + 1].min()) for j in range(Q - 1)]
