"""Ground-state currents, vortex counting and the (gamma, K) phase map."""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._parallel import grid_map
from .lattice import LatticeDomainError, build_quasimomentum, build_real_space
from .spectra import default_k_grid, eig_hermitian, fix_phase

DEFAULT_TOL_REL = 1e-3
ZERO_FLOOR = 1e-12


@dataclass(frozen=True)
class GroundState:
    psi: np.ndarray  # flat, normalized
    omega1: float
    degenerate: bool
    antisymmetric: np.ndarray | None = None

    def grid(self, spec):
        return self.psi.reshape(spec.W, spec.L)


@dataclass(frozen=True)
class CurrentPattern:
    """Bond currents in probability per second.

    row[r, c] runs from column c to c+1 along row r; col[r, c] runs from
    row r to r+1 at column c. Row r = 0 is the lowest m.
    """

    row: np.ndarray
    col: np.ndarray
    scale: float = 1.0

    def max_abs(self):
        parts = [np.abs(a).max() for a in (self.row, self.col) if a.size]
        return max(parts) if parts else 0.0

    def divergence(self):
        """Net outflow at each site, shape (W, L)."""
        W = self.row.shape[0]
        L = self.col.shape[1] if self.col.size else self.row.shape[1] + 1
        div = np.zeros((W, L))
        div[:, :-1] += self.row
        div[:, 1:] -= self.row
        if W > 1:
            div[:-1, :] += self.col
            div[1:, :] -= self.col
        return div

    def normalized(self, tol_rel=DEFAULT_TOL_REL):
        """Unit-length arrows with signs kept; bonds under tol_rel*max become zero."""
        mx = self.max_abs()
        if mx == 0:
            return self

        def unit(a):
            return np.where(np.abs(a) > tol_rel * mx, np.sign(a), 0.0)

        return CurrentPattern(unit(self.row), unit(self.col), scale=1.0)


@dataclass
class PhaseMap:
    gamma_grid: np.ndarray
    K_grid: np.ndarray
    vortex_count: np.ndarray  # (n_gamma, n_K) int
    chiral_current: np.ndarray  # (n_gamma, n_K)
    tol_rel: float = DEFAULT_TOL_REL
    meta: dict = field(default_factory=dict)

    @property
    def K_c(self):
        """Largest sampled K with more than one vortex; beyond it every cell has at most one."""
        hit = np.argwhere(self.vortex_count > 1)
        return None if hit.size == 0 else float(self.K_grid[hit[:, 1].max()])

    @property
    def gamma_c(self):
        """Smallest sampled |gamma| with more than one vortex; closer to zero flux there is at most one."""
        hit = np.argwhere(self.vortex_count > 1)
        return None if hit.size == 0 else float(np.abs(self.gamma_grid[hit[:, 0]]).min())


def _require_open(spec):
    if not spec.is_open:
        raise LatticeDomainError("this operation is defined for open boundaries")


def mirror_conjugate(psi, spec):
    """psi*(n, -m) as a flat vector."""
    return np.conj(psi.reshape(spec.W, spec.L)[::-1, :]).ravel()


def _mirror_gauge(psi, spec):
    """Phase a nondegenerate state so that psi*(n, -m) = psi(n, m) holds exactly.

    The exact state has this symmetry up to a global phase; choosing that
    phase and averaging with the mirror image removes rounding noise, so
    the central row of an odd-width lattice is exactly real. The largest
    central-row entry (or the largest entry for even widths) is made positive.
    """
    alpha = np.angle(np.vdot(psi, mirror_conjugate(psi, spec)))
    psi = psi * np.exp(0.5j * alpha)
    psi = 0.5 * (psi + mirror_conjugate(psi, spec))
    psi /= np.linalg.norm(psi)
    if spec.W % 2:
        mid = psi.reshape(spec.W, spec.L)[spec.W // 2]
        ref = mid[np.argmax(np.abs(mid))].real
        return psi if ref >= 0 else -psi
    return fix_phase(psi[:, None])[:, 0]


def ground_state(spec):
    """Lowest eigenstate; a degenerate pair is recombined into the mirror-symmetric combination."""
    _require_open(spec)
    H = build_real_space(spec)
    eig = eig_hermitian(H, scale=spec.scale or 1.0)
    psi = eig.vectors[:, 0]
    if not eig.degenerate[0]:
        return GroundState(psi=_mirror_gauge(psi, spec), omega1=float(eig.values[0]), degenerate=False)
    plus = mirror_conjugate(psi, spec) + psi
    if np.linalg.norm(plus) < 1e-6:
        psi = 1j * psi
        plus = mirror_conjugate(psi, spec) + psi
    minus = 1j * (mirror_conjugate(psi, spec) - psi)
    plus = fix_phase((plus / np.linalg.norm(plus))[:, None])[:, 0]
    anti = None
    if np.linalg.norm(minus) > 1e-6:
        anti = fix_phase((minus / np.linalg.norm(minus))[:, None])[:, 0]
    return GroundState(psi=plus, omega1=float(eig.values[0]), degenerate=True, antisymmetric=anti)


def bond_currents(state, spec):
    """Directed currents of a state: 2 Im(g psi_a conj(psi_b)) for hopping g from a to b."""
    _require_open(spec)
    psi = state.psi if isinstance(state, GroundState) else np.asarray(state)
    row, col = kernels.bond_currents(psi.reshape(spec.W, spec.L), spec.g_x, spec.g_y, spec.gamma, spec.n_values)
    return CurrentPattern(row=row, col=col, scale=spec.scale or 1.0)


def chiral_current(pattern):
    """Top-edge row current minus bottom-edge row current on a three-leg ladder."""
    if pattern.row.shape[0] != 3:
        raise LatticeDomainError("chiral current is defined for width 3 only")
    return float(pattern.row[-1].sum() - pattern.row[0].sum())


def count_vortices(pattern, tol_rel=DEFAULT_TOL_REL):
    """Number of circulation centres in a divergence-free current pattern.

    Plaquettes are nodes and every bond is an edge whose current sets the
    height step of the stream function across it. Bonds below
    tol_rel*max|I| are dropped, which merges the plaquettes on either side;
    a merged region counts when all live bonds around it circulate the same
    way. The exterior never counts. Patterns whose largest current is below
    1e-12 of the coupling scale have no vortices.
    """
    mx = pattern.max_abs()
    if mx <= ZERO_FLOOR * pattern.scale:
        return 0
    return kernels.count_circulating_regions(pattern.row, pattern.col, tol_rel * mx)


def default_vortex_grids():
    """201 gamma points over [-pi, pi] and K = 0, 0.01, ..., 1.9."""
    return np.linspace(-np.pi, np.pi, 201), np.round(np.linspace(0.0, 1.9, 191), 10)


def vortex_map(spec, gamma_grid=None, K_grid=None, tol_rel=DEFAULT_TOL_REL, threads=None):
    """Vortex count and chiral current on a (gamma, K) grid with g_y = K g_x."""
    _require_open(spec)
    dg, dk = default_vortex_grids()
    gamma_grid = dg if gamma_grid is None else np.asarray(gamma_grid, dtype=float)
    K_grid = dk if K_grid is None else np.asarray(K_grid, dtype=float)
    three = spec.W == 3

    def one_row(g):
        counts = np.zeros(K_grid.size, dtype=np.int64)
        chiral = np.full(K_grid.size, np.nan)
        for j, K in enumerate(K_grid):
            s = spec.with_(gamma=g, g_y=K * spec.g_x)
            pat = bond_currents(ground_state(s), s)
            counts[j] = count_vortices(pat, tol_rel)
            if three:
                chiral[j] = chiral_current(pat)
        return counts, chiral

    rows = grid_map(one_row, gamma_grid, threads)
    return PhaseMap(
        gamma_grid=gamma_grid,
        K_grid=K_grid,
        vortex_count=np.array([r[0] for r in rows]),
        chiral_current=np.array([r[1] for r in rows]),
        tol_rel=tol_rel,
        meta={"L": spec.L, "W": spec.W, "g_x": spec.g_x},
    )


def quasimomentum_distribution(state, spec, k_grid=None):
    """psi'(k, m) = sum_n exp(-i (gamma m n + k n)) psi(n, m) / sqrt(L).

    Returns (k_grid, amplitudes) with amplitudes of shape (n_k, W).
    """
    _require_open(spec)
    k_grid = default_k_grid() if k_grid is None else np.asarray(k_grid, dtype=float)
    psi = state.psi if isinstance(state, GroundState) else np.asarray(state)
    grid = psi.reshape(spec.W, spec.L)
    n = spec.n_values.astype(float)
    m = spec.m_values.astype(float)
    phase = np.exp(-1j * (k_grid[:, None, None] + spec.gamma * m[None, :, None]) * n[None, None, :])
    amp = np.einsum("kmn,mn->km", phase, grid) / np.sqrt(spec.L)
    return k_grid, amp


def ground_energy_curve(spec, K_grid, gamma):
    """omega_1 over K with g_y = K g_x at fixed gamma."""
    return np.array([
        np.linalg.eigvalsh(build_real_space(spec.with_(gamma=gamma, g_y=K * spec.g_x)))[0] for K in K_grid
    ])


def ground_energy_derivatives(spec, K_grid, gamma):
    """(d omega_1/dK, d^2 omega_1/dK^2) by second-order finite differences."""
    K_grid = np.asarray(K_grid, dtype=float)
    if K_grid.size < 5:
        raise ValueError("need at least 5 K points")
    if not np.allclose(np.diff(K_grid), K_grid[1] - K_grid[0], rtol=1e-9, atol=1e-12):
        raise ValueError("K grid must be uniform")
    w = ground_energy_curve(spec, K_grid, gamma)
    d1 = np.gradient(w, K_grid, edge_order=2)
    d2 = np.gradient(d1, K_grid, edge_order=2)
    return d1, d2


def jump_ratio(y):
    """Largest adjacent step divided by the mean size of the two neighbouring steps.

    A smooth, well-sampled curve gives values of order one; a jump in the
    data stands out as a large ratio. Steps far below the curve's overall
    step size are floored so flat stretches do not produce spurious ratios.
    """
    d = np.abs(np.diff(np.asarray(y, dtype=float)))
    if d.size < 3:
        return 0.0
    floor = 1e-3 * d.mean() + 1e-300
    local = 0.5 * (np.concatenate([[d[1]], d[:-1]]) + np.concatenate([d[1:], [d[-2]]]))
    return float((d / np.maximum(local, floor)).max())


def edge_current_asymptotic(spec):
    """Long-ladder bottom-edge current -(2 g_x / L) |e_{-1}(0)|^2 sin(gamma)."""
    if spec.W != 3:
        raise LatticeDomainError("edge-current formula is for width 3")
    if spec.L < 101:
        raise LatticeDomainError("edge-current formula needs L >= 101")
    w, v = np.linalg.eigh(build_quasimomentum(0.0, spec))
    e = v[:, 0]
    return float(-(2 * spec.g_x / spec.L) * abs(e[0]) ** 2 * np.sin(spec.gamma))


def quiver_rows(pattern, spec):
    """Rows (x, y, dx, dy, magnitude, tag) at bond midpoints; edge rows are tagged 'edge'."""
    n = spec.n_values
    m = spec.m_values
    out = []
    for r in range(pattern.row.shape[0]):
        tag = "edge" if r in (0, spec.W - 1) else "bulk"
        for c in range(pattern.row.shape[1]):
            v = pattern.row[r, c]
            out.append((n[c] + 0.5, float(m[r]), v, 0.0, abs(v), tag))
    for r in range(pattern.col.shape[0]):
        for c in range(pattern.col.shape[1]):
            v = pattern.col[r, c]
            out.append((float(n[c]), m[r] + 0.5, 0.0, v, abs(v), "bulk"))
    return out
