"""Dense single-particle Hamiltonians of the Harper lattice.

Units: hbar = 1, so entries are angular frequencies. Sites are flattened
row-major, ``flat = (m - m_min) * L + (n - n_min)``, with n the column
index along a row and m the row index. Column bonds (n, m) -> (n, m+1)
carry ``g_y exp(i gamma n)``; row bonds carry ``-g_x``.
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

OPEN = "open"
PERIODIC = "periodic"


class LatticeDomainError(ValueError):
    """Lattice request outside the domain of a constructor."""


def wrap_phase(x):
    """Map an angle into (-pi, pi]."""
    y = math.remainder(float(x), 2 * math.pi)
    return math.pi if y == -math.pi else y


def centered_indices(size):
    """Integer coordinates centred on zero: -N..N for odd sizes, -(s/2-1)..s/2 for even."""
    return np.arange(size) - (size - 1) // 2


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice of L columns by W rows with couplings in rad/s.

    gamma is stored wrapped into (-pi, pi]; any gamma + 2 pi k gives the
    same matrix because n is an integer.
    """

    L: int
    W: int
    g_x: float
    g_y: float
    gamma: float = 0.0
    row_boundary: str = OPEN
    col_boundary: str = OPEN

    def __post_init__(self):
        if int(self.L) != self.L or int(self.W) != self.W or self.L < 1 or self.W < 1:
            raise LatticeDomainError(f"L and W must be positive integers, got L={self.L}, W={self.W}")
        for name in ("row_boundary", "col_boundary"):
            if getattr(self, name) not in (OPEN, PERIODIC):
                raise LatticeDomainError(f"{name} must be 'open' or 'periodic'")
        if not (np.isfinite(self.g_x) and np.isfinite(self.g_y) and np.isfinite(self.gamma)):
            raise LatticeDomainError("couplings and gamma must be finite")
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "W", int(self.W))
        object.__setattr__(self, "gamma", wrap_phase(self.gamma))

    @classmethod
    def from_half(cls, N, M_half, g_x, g_y, gamma=0.0, **kw):
        """Build from half-sizes: L = 2N+1, W = 2M+1."""
        if N < 0 or M_half < 0:
            raise LatticeDomainError("half sizes must be non-negative")
        return cls(2 * N + 1, 2 * M_half + 1, g_x, g_y, gamma, **kw)

    @property
    def N(self):
        return (self.L - 1) // 2

    @property
    def M_half(self):
        return (self.W - 1) // 2

    @property
    def K(self):
        if self.g_x == 0:
            raise LatticeDomainError("K = g_y/g_x is undefined for g_x = 0")
        return self.g_y / self.g_x

    @property
    def n_values(self):
        return centered_indices(self.L)

    @property
    def m_values(self):
        return centered_indices(self.W)

    @property
    def dim(self):
        return self.L * self.W

    @property
    def is_open(self):
        return self.row_boundary == OPEN and self.col_boundary == OPEN

    @property
    def scale(self):
        """Largest coupling magnitude, the natural frequency unit."""
        return max(abs(self.g_x), abs(self.g_y))

    def with_(self, **kw):
        return replace(self, **kw)

    def flat_index(self, n, m):
        n0, m0 = self.n_values[0], self.m_values[0]
        if not (n0 <= n <= self.n_values[-1] and m0 <= m <= self.m_values[-1]):
            raise LatticeDomainError(f"site ({n}, {m}) is outside the lattice")
        return (m - m0) * self.L + (n - n0)

    def site(self, flat):
        m, c = divmod(int(flat), self.L)
        return int(self.n_values[c]), int(self.m_values[m])


def build_real_space(spec):
    """Real-space Hamiltonian of dimension L*W."""
    L, W = spec.L, spec.W
    H = np.zeros((L * W, L * W), dtype=np.complex128)
    idx = np.arange(L * W).reshape(W, L)
    n_vals = spec.n_values

    def hop(a, b, amp):
        # amplitude on |b><a| plus its conjugate; += so doubled wraps add up
        np.add.at(H, (b, a), amp)
        np.add.at(H, (a, b), np.conj(amp))

    if L > 1:
        hop(idx[:, :-1].ravel(), idx[:, 1:].ravel(), np.full(W * (L - 1), -spec.g_x, dtype=complex))
        if spec.row_boundary == PERIODIC:
            if L > 2 and abs(wrap_phase(spec.gamma * L)) > 1e-12:
                warnings.warn(
                    "row-periodic lattice with gamma*L not a multiple of 2 pi: the wrap adds extra flux",
                    stacklevel=2,
                )
            hop(idx[:, -1], idx[:, 0], np.full(W, -spec.g_x, dtype=complex))
    if W > 1:
        col_amp = spec.g_y * np.exp(1j * spec.gamma * n_vals)
        hop(idx[:-1, :].ravel(), idx[1:, :].ravel(), np.tile(col_amp, W - 1))
        if spec.col_boundary == PERIODIC:
            hop(idx[-1, :], idx[0, :], col_amp)
    return H


def build_quasimomentum(k_x, spec):
    """W x W matrix at row quasimomentum k_x: diagonal -2 g_x cos(gamma m + k_x), off-diagonal g_y."""
    if spec.col_boundary != OPEN:
        raise LatticeDomainError("quasimomentum Hamiltonian needs open column boundaries")
    m = spec.m_values
    h = np.diag(-2 * spec.g_x * np.cos(spec.gamma * m + k_x)).astype(np.complex128)
    if spec.W > 1:
        off = np.arange(spec.W - 1)
        h[off, off + 1] = spec.g_y
        h[off + 1, off] = spec.g_y
    return h


def check_rational(gamma, P, Q):
    """Raise unless gamma equals 2 pi P / Q (mod 2 pi) with gcd(P, Q) = 1."""
    if Q < 1 or math.gcd(int(P), int(Q)) != 1:
        raise LatticeDomainError(f"P/Q = {P}/{Q} must be a reduced fraction with Q >= 1")
    if abs(wrap_phase(gamma - 2 * math.pi * P / Q)) > 1e-12:
        raise LatticeDomainError(f"gamma={gamma!r} is not 2 pi {P}/{Q}")


def build_bloch(k_x, k_y, spec, P, Q):
    """Q x Q magnetic Bloch Hamiltonian at gamma = 2 pi P / Q."""
    check_rational(spec.gamma, P, Q)
    gamma = 2 * math.pi * P / Q
    q = np.arange(Q)
    h = np.diag(2 * spec.g_y * np.cos(k_y - gamma * q)).astype(np.complex128)
    if Q > 1:
        h[q[:-1], q[1:]] += -spec.g_x
        h[q[1:], q[:-1]] += -spec.g_x
    h[0, Q - 1] += -spec.g_x * np.exp(1j * k_x * Q)
    h[Q - 1, 0] += -spec.g_x * np.exp(-1j * k_x * Q)
    return h


def bloch_dk(k_x, k_y, spec, P, Q):
    """Analytic derivatives (dh/dk_x, dh/dk_y) of the Bloch Hamiltonian."""
    check_rational(spec.gamma, P, Q)
    gamma = 2 * math.pi * P / Q
    q = np.arange(Q)
    dx = np.zeros((Q, Q), dtype=np.complex128)
    dx[0, Q - 1] += -1j * Q * spec.g_x * np.exp(1j * k_x * Q)
    dx[Q - 1, 0] += 1j * Q * spec.g_x * np.exp(-1j * k_x * Q)
    dy = np.diag(-2 * spec.g_y * np.sin(k_y - gamma * q)).astype(np.complex128)
    return dx, dy


def hermiticity_residual(H):
    """||H - H^dagger||_F / ||H||_F (0 for the zero matrix)."""
    H = np.asarray(H)
    nrm = np.linalg.norm(H)
    return 0.0 if nrm == 0 else float(np.linalg.norm(H - H.conj().T) / nrm)


def open_chain_spectrum(L, g_x):
    """Eigenvalues -2 g_x cos(pi j / (L+1)) of an open chain, ascending."""
    return np.sort(-2 * g_x * np.cos(np.pi * np.arange(1, L + 1) / (L + 1)))
