"""Hot numerical kernels.

Every kernel ships in two forms: an explicit-loop version that numba
compiles, and a vectorized numpy version. The public name dispatches on
``_backend.USE_NUMBA``; both forms stay importable so tests and the
benchmark can compare them directly.
"""

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _backend

__all__ = [
    "bond_currents",
    "plaquette_edges",
    "count_circulating_regions",
    "link_field",
    "feature_sum",
    "windowed_dtft",
]


# bond currents on an open W x L grid --------------------------------------

def _bond_currents_loops(psi, gx, gy, gamma, n_values):
    W, L = psi.shape
    row = np.zeros((W, max(L - 1, 0)))
    col = np.zeros((max(W - 1, 0), L))
    for m in range(W):
        for c in range(L - 1):
            z = -gx * psi[m, c] * np.conj(psi[m, c + 1])
            row[m, c] = 2.0 * z.imag
    for r in range(W - 1):
        for c in range(L):
            ph = np.exp(1j * gamma * n_values[c])
            z = gy * ph * psi[r, c] * np.conj(psi[r + 1, c])
            col[r, c] = 2.0 * z.imag
    return row, col


def _bond_currents_numpy(psi, gx, gy, gamma, n_values):
    phase = np.exp(1j * gamma * n_values)[None, :]
    row = 2.0 * np.imag(-gx * psi[:, :-1] * np.conj(psi[:, 1:]))
    col = 2.0 * np.imag(gy * phase * psi[:-1, :] * np.conj(psi[1:, :]))
    return row, col


_bond_currents_jit = _backend.njit(_bond_currents_loops)


def bond_currents(psi, gx, gy, gamma, n_values):
    """Row (W, L-1) and column (W-1, L) currents of a (W, L) amplitude grid.

    A bond a -> b with hopping g contributes 2 Im(g psi_a conj(psi_b)).
    """
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    n_values = np.ascontiguousarray(n_values, dtype=np.float64)
    fn = _bond_currents_jit if _backend.USE_NUMBA else _bond_currents_numpy
    return fn(psi, float(gx), float(gy), float(gamma), n_values)


# vortex regions ------------------------------------------------------------

def plaquette_edges(row, col):
    """Plaquette adjacency with signed height differences.

    Plaquettes live on a (W-1, L-1) grid and one extra node stands for the
    outside of the lattice. Each bond separates two nodes p, q and its
    current equals the height difference h(p) - h(q) of the stream function.
    Returns (p, q, d, n_nodes).
    """
    W, Lm1 = row.shape
    L = Lm1 + 1
    R, C = W - 1, L - 1
    ext = R * C

    def pid(r, c):
        inside = (r >= 0) & (r < R) & (c >= 0) & (c < C)
        return np.where(inside, r * C + c, ext)

    mm, cc = np.meshgrid(np.arange(W), np.arange(C), indexing="ij")
    p_h, q_h = pid(mm - 1, cc), pid(mm, cc)
    rr, kk = np.meshgrid(np.arange(R), np.arange(L), indexing="ij")
    p_v, q_v = pid(rr, kk - 1), pid(rr, kk)
    p = np.concatenate([p_h.ravel(), p_v.ravel()])
    q = np.concatenate([q_h.ravel(), q_v.ravel()])
    d = np.concatenate([row.ravel(), -col.ravel()])
    return p.astype(np.int64), q.astype(np.int64), d.astype(np.float64), ext + 1


def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


_find_jit = _backend.njit(_find)


def _make_regions_loops(find):
    def regions(p, q, d, n_nodes, eps):
        parent = np.arange(n_nodes)
        for e in range(p.size):
            if abs(d[e]) <= eps:
                a = find(parent, p[e])
                b = find(parent, q[e])
                if a != b:
                    parent[a] = b
        higher = np.zeros(n_nodes, dtype=np.bool_)
        lower = np.zeros(n_nodes, dtype=np.bool_)
        for e in range(p.size):
            if abs(d[e]) <= eps:
                continue
            a = find(parent, p[e])
            b = find(parent, q[e])
            if a == b:
                continue
            hi, lo = (a, b) if d[e] > 0 else (b, a)
            lower[hi] = True
            higher[lo] = True
        outside = find(parent, n_nodes - 1)
        count = 0
        for x in range(n_nodes - 1):
            if find(parent, x) == x and x != outside and higher[x] != lower[x]:
                count += 1
        return count
    return regions


_regions_python = _make_regions_loops(_find)
_regions_jit = _backend.njit(_make_regions_loops(_find_jit))


def _regions_numpy(p, q, d, n_nodes, eps):
    dead = np.abs(d) <= eps
    graph = coo_matrix((np.ones(dead.sum()), (p[dead], q[dead])), shape=(n_nodes, n_nodes))
    _, label = connected_components(graph, directed=False)
    live = ~dead
    a, b = label[p[live]], label[q[live]]
    keep = a != b
    a, b, s = a[keep], b[keep], d[live][keep] > 0
    hi = np.where(s, a, b)
    lo = np.where(s, b, a)
    n_lab = label.max() + 1
    lower = np.bincount(hi, minlength=n_lab) > 0
    higher = np.bincount(lo, minlength=n_lab) > 0
    extreme = lower != higher
    extreme[label[n_nodes - 1]] = False
    return int(extreme.sum())


def count_circulating_regions(row, col, eps):
    """Number of plaquette regions whose whole boundary circulates one way.

    Bonds with |I| <= eps are treated as carrying no current, so plaquettes
    joined by them form one region. A region counts when every live bond on
    its boundary runs in the same rotational sense, which is a strict local
    extremum of the stream function. The region touching the outside never
    counts.
    """
    row = np.ascontiguousarray(row, dtype=np.float64)
    col = np.ascontiguousarray(col, dtype=np.float64)
    if row.shape[0] < 2 or row.shape[1] < 1:
        return 0
    p, q, d, n_nodes = plaquette_edges(row, col)
    if _backend.USE_NUMBA:
        return int(_regions_jit(p, q, d, n_nodes, float(eps)))
    return _regions_numpy(p, q, d, n_nodes, float(eps))


# lattice field strength from band eigenvectors -----------------------------

def _link_field_loops(U):
    nx, ny, dim, nb = U.shape
    F = np.zeros((nx, ny, nb))
    for i in range(nx):
        ip = (i + 1) % nx
        for j in range(ny):
            jp = (j + 1) % ny
            for b in range(nb):
                u1 = 0j
                u2 = 0j
                u3 = 0j
                u4 = 0j
                for a in range(dim):
                    u1 += np.conj(U[i, j, a, b]) * U[ip, j, a, b]
                    u2 += np.conj(U[ip, j, a, b]) * U[ip, jp, a, b]
                    u3 += np.conj(U[i, jp, a, b]) * U[ip, jp, a, b]
                    u4 += np.conj(U[i, j, a, b]) * U[i, jp, a, b]
                loop = (u1 / abs(u1)) * (u2 / abs(u2)) / ((u3 / abs(u3)) * (u4 / abs(u4)))
                F[i, j, b] = np.angle(loop)
    return F


def _link_field_numpy(U):
    def link(axis):
        z = np.einsum("ijab,ijab->ijb", np.conj(U), np.roll(U, -1, axis=axis))
        return z / np.abs(z)

    ux, uy = link(0), link(1)
    loop = ux * np.roll(uy, -1, axis=0) / (np.roll(ux, -1, axis=1) * uy)
    return np.angle(loop)


_link_field_jit = _backend.njit(_link_field_loops)


def link_field(U):
    """Plaquette field strengths in (-pi, pi] from eigenvectors on a torus grid.

    U has shape (nx, ny, dim, n_bands); column b of U[i, j] is band b at
    grid point (i, j). Both axes wrap periodically.
    """
    U = np.ascontiguousarray(U, dtype=np.complex128)
    fn = _link_field_jit if _backend.USE_NUMBA else _link_field_numpy
    return fn(U)


def link_magnitudes(U):
    """Smallest unnormalized overlap modulus over all links and bands."""
    U = np.asarray(U, dtype=np.complex128)
    zx = np.einsum("ijab,ijab->ijb", np.conj(U), np.roll(U, -1, axis=0))
    zy = np.einsum("ijab,ijab->ijb", np.conj(U), np.roll(U, -1, axis=1))
    return min(np.abs(zx).min(), np.abs(zy).min())


# feature function ------------------------------------------------------------

def _sinc2(x):
    if abs(x) < 1e-8:
        return 1.0 - x * x / 3.0
    s = np.sin(x) / x
    return s * s


_sinc2_jit = _backend.njit(_sinc2)


def _make_feature_loops(sinc2):
    def feature(omega, freqs, weights, T):
        out = np.zeros(omega.size)
        for i in range(omega.size):
            acc = 0.0
            for j in range(freqs.size):
                acc += weights[j] * sinc2(0.5 * (omega[i] - freqs[j]) * T)
            out[i] = acc
        return out
    return feature


_feature_jit = _backend.njit(_make_feature_loops(_sinc2_jit))


def _feature_numpy(omega, freqs, weights, T):
    x = 0.5 * (omega[:, None] - freqs[None, :]) * T / np.pi
    return (np.sinc(x) ** 2) @ weights


def feature_sum(omega, freqs, weights, T):
    """sum_j w_j sinc^2((omega - f_j) T / 2) on a frequency grid."""
    omega = np.ascontiguousarray(omega, dtype=np.float64)
    freqs = np.ascontiguousarray(freqs, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    fn = _feature_jit if _backend.USE_NUMBA else _feature_numpy
    return fn(omega, freqs, weights, float(T))


# windowed discrete-time Fourier transform ----------------------------------

def _dtft_loops(t, x, omega):
    out = np.zeros(omega.size, dtype=np.complex128)
    for i in range(omega.size):
        acc = 0j
        for k in range(t.size):
            acc += x[k] * np.exp(-1j * omega[i] * t[k])
        out[i] = acc
    return out


def _dtft_numpy(t, x, omega, chunk=1024):
    # blocks over omega keep the phase matrix small
    out = np.empty(omega.size, dtype=np.complex128)
    for s in range(0, omega.size, chunk):
        out[s:s + chunk] = np.exp(-1j * np.outer(omega[s:s + chunk], t)) @ x
    return out


_dtft_jit = _backend.njit(_dtft_loops)


def windowed_dtft(t, x, window, omega):
    """sum_k w_k x_k exp(-i omega t_k) / sum_k w_k on an arbitrary omega grid."""
    t = np.ascontiguousarray(t, dtype=np.float64)
    w = np.ascontiguousarray(window, dtype=np.float64)
    xw = np.ascontiguousarray(np.asarray(x, dtype=np.complex128) * w)
    omega = np.ascontiguousarray(omega, dtype=np.float64)
    fn = _dtft_jit if _backend.USE_NUMBA else _dtft_numpy
    return fn(t, xw, omega) / w.sum()
