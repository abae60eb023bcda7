"""Circuit values to effective Harper-model couplings.

All quantities are SI: henry, farad, weber, rad/s. Use :func:`to_mhz` or
:func:`to_ghz` to display an angular frequency as an ordinary frequency.
"""

import math
import warnings
from dataclasses import dataclass, fields

import numpy as np
from scipy import constants as _c
from scipy.optimize import brentq

PHI0 = _c.h / (2 * _c.e)
HBAR = _c.hbar
H_PLANCK = _c.h
E_CHARGE = _c.e

# argument of the first maximum of J1
J1_ARGMAX = 1.8411837813406593


class CircuitDomainError(ValueError):
    """Input outside the region where a circuit formula is defined."""


class FluxRangeError(ValueError):
    """Requested coupling cannot be reached by any flux bias."""


def to_mhz(omega):
    return np.asarray(omega) / (2 * np.pi) / 1e6 if np.ndim(omega) else omega / (2 * np.pi) / 1e6


def to_ghz(omega):
    return np.asarray(omega) / (2 * np.pi) / 1e9 if np.ndim(omega) else omega / (2 * np.pi) / 1e9


def mhz(f):
    """Angular frequency of an ordinary frequency given in MHz."""
    return 2 * np.pi * f * 1e6


@dataclass(frozen=True)
class RawCircuitParams:
    L_J_odd: float
    L_J_even: float
    L_T: float
    C: float
    L0: float
    M0: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (np.isfinite(v) and v > 0):
                raise CircuitDomainError(f"{f.name} must be positive and finite, got {v!r}")
        if self.L0 > self.L_T / 4:
            warnings.warn(
                "L0 > L_T/4: the coupler-flux approximation Phi_T ~ Phi may be poor",
                stacklevel=3,
            )

    @classmethod
    def typical(cls):
        """The reference design: 7.9/8.3 nH junctions, 1.3 nH coupler, 91 fF."""
        return cls(L_J_odd=7.9e-9, L_J_even=8.3e-9, L_T=1.3e-9, C=91e-15, L0=210e-12, M0=180e-12)


@dataclass(frozen=True)
class FluxBias:
    phi_bar: float = 0.0
    phi_eff: float = 0.0
    phi_odd: float = 0.0
    phi_even: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("phi_bar", "phi_eff", "phi_odd", "phi_even"):
            v = getattr(self, name)
            if abs(v) > PHI0 / 2 * (1 + 1e-12):
                raise CircuitDomainError(f"{name}={v!r} Wb lies outside [-Phi0/2, Phi0/2]")
        if not (-np.pi < self.gamma <= np.pi + 1e-15):
            raise CircuitDomainError(f"gamma={self.gamma!r} must lie in (-pi, pi]")


@dataclass(frozen=True)
class DerivedCircuitParams:
    E_J_odd: float
    E_J_even: float
    E_C: float
    omega_p_odd: float
    omega_p_even: float
    omega_odd: float
    omega_even: float
    omega_oe: float
    Z_odd: float
    Z_even: float
    t_y: float
    g_y: float
    M_odd: float
    M_even: float
    G_odd: float
    G_even: float

    def as_display(self):
        """Values in the units people quote: GHz*h, GHz, MHz, ohm, pH."""
        ghz_e = lambda e: e / H_PLANCK / 1e9  # noqa: E731
        return {
            "E_J_odd/h [GHz]": ghz_e(self.E_J_odd),
            "E_J_even/h [GHz]": ghz_e(self.E_J_even),
            "E_C/h [GHz]": ghz_e(self.E_C),
            "omega_p_odd/2pi [GHz]": to_ghz(self.omega_p_odd),
            "omega_p_even/2pi [GHz]": to_ghz(self.omega_p_even),
            "omega_odd/2pi [GHz]": to_ghz(self.omega_odd),
            "omega_even/2pi [GHz]": to_ghz(self.omega_even),
            "omega_oe/2pi [MHz]": to_mhz(self.omega_oe),
            "Z_odd [ohm]": self.Z_odd,
            "Z_even [ohm]": self.Z_even,
            "t_y/2pi [MHz]": to_mhz(self.t_y),
            "g_y/2pi [MHz]": to_mhz(self.g_y),
            "M_odd [pH]": self.M_odd * 1e12,
            "M_even [pH]": self.M_even * 1e12,
            "G_odd/2pi [MHz]": to_mhz(self.G_odd),
            "G_even/2pi [MHz]": to_mhz(self.G_even),
        }


# Bessel J1 -------------------------------------------------------------------

def _j1_series(x):
    # sum_k (-1)^k (x/2)^(2k+1) / (k! (k+1)!)
    h = 0.5 * x
    term = h
    total = h
    q = -h * h
    k = 0
    while abs(term) > 1e-18 * max(1.0, abs(total)):
        k += 1
        term *= q / (k * (k + 1))
        total += term
    return total


def _j1_miller(x):
    # backward recurrence J_{n-1} = (2n/x) J_n - J_{n+1}, normalized by
    # J0 + 2 (J2 + J4 + ...) = 1
    ax = abs(x)
    start = 2 * ((int(ax) + 60) // 2)
    j_next, j_cur = 0.0, 1e-300
    norm = 0.0
    j1 = 0.0
    for n in range(start, 0, -1):
        j_prev = (2.0 * n / ax) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if abs(j_cur) > 1e250:
            j_cur *= 1e-250
            j_next *= 1e-250
            norm *= 1e-250
            j1 *= 1e-250
        if (n - 1) % 2 == 0 and n - 1 > 0:
            norm += 2.0 * j_cur
        if n - 1 == 1:
            j1 = j_cur
    norm += j_cur  # J0
    val = j1 / norm
    return val if x > 0 else -val


def bessel_j1(x):
    """Bessel function of the first kind, order one, for |x| <= 50.

    Power series below |x| = 8, normalized backward recurrence above.
    Accepts scalars or arrays.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(np.abs(arr) > 50):
        raise CircuitDomainError("bessel_j1 is defined here only for |x| <= 50")
    flat = arr.ravel()
    out = np.empty_like(flat)
    for i, v in enumerate(flat):
        out[i] = _j1_series(v) if abs(v) < 8 else _j1_miller(v)
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


# circuit relations -----------------------------------------------------------

def _cos_phase(phi):
    return math.cos(2 * math.pi * phi / PHI0)


def mutual_inductance(phi, raw):
    """Flux-tunable mutual inductance between neighbouring qubits."""
    c = _cos_phase(phi)
    den = raw.L_T + 2 * raw.L0 * c
    if abs(den) <= 1e-15 * raw.L_T:
        raise CircuitDomainError(f"mutual inductance is singular at phi={phi!r} Wb")
    return -raw.M0 ** 2 * c / den


def effective_network(phi, raw):
    """(coupler inductance, mutual increment of the loop self-inductance).

    The coupler acts as a linear inductor L_T / cos(2 pi phi / Phi0); at the
    switch-off point the cosine vanishes and the inductance is ``inf``.
    """
    c = _cos_phase(phi)
    coupler = math.inf if abs(c) < 1e-15 else raw.L_T / c
    return coupler, mutual_inductance(phi, raw)


def self_inductance_base(raw):
    """Gradiometer loop inductance before mutual corrections: 4 L0."""
    return 4 * raw.L0


def josephson_energy(L_J):
    return PHI0 ** 2 / (4 * math.pi ** 2 * L_J)


def charging_energy(C):
    return E_CHARGE ** 2 / (2 * C)


def plasma_frequency(L_J, C):
    return 1 / math.sqrt(L_J * C)


def impedance(L_J, C):
    return math.sqrt(L_J / C)


def column_coupling(t_y, bias):
    """g_y = -2 t_y sin(2 pi Phi_bar / Phi0) J1(2 pi Phi_eff / Phi0)."""
    s = math.sin(2 * math.pi * bias.phi_bar / PHI0)
    return -2 * t_y * s * bessel_j1(2 * math.pi * bias.phi_eff / PHI0)


def row_coupling(M, omega_p, Z, omega_p2=None, Z2=None):
    """Row hopping -(M/2) w_p w_p' / sqrt(Z Z'); the second site defaults to the first."""
    wp2 = omega_p if omega_p2 is None else omega_p2
    z2 = Z if Z2 is None else Z2
    return -(M / 2) * omega_p * wp2 / math.sqrt(Z * z2)


def column_tunneling(raw):
    """Bare column tunneling t_y between an odd and an even row."""
    wo = plasma_frequency(raw.L_J_odd, raw.C)
    we = plasma_frequency(raw.L_J_even, raw.C)
    zo = impedance(raw.L_J_odd, raw.C)
    ze = impedance(raw.L_J_even, raw.C)
    return raw.M0 ** 2 * wo * we / (4 * raw.L_T * math.sqrt(zo * ze))


def _check_weak_coupling(raw, M):
    if abs(M) > 0.1 * min(raw.L_J_odd, raw.L_J_even):
        warnings.warn("|M| is not small against L_J; weak-coupling expansion is strained", stacklevel=3)


def derive_params(raw, bias=None):
    """Evaluate every derived quantity at the given bias point."""
    bias = FluxBias() if bias is None else bias
    ej_o, ej_e = josephson_energy(raw.L_J_odd), josephson_energy(raw.L_J_even)
    ec = charging_energy(raw.C)
    wp_o, wp_e = plasma_frequency(raw.L_J_odd, raw.C), plasma_frequency(raw.L_J_even, raw.C)
    w_o, w_e = wp_o - ec / HBAR, wp_e - ec / HBAR
    z_o, z_e = impedance(raw.L_J_odd, raw.C), impedance(raw.L_J_even, raw.C)
    t_y = column_tunneling(raw)
    m_o = mutual_inductance(bias.phi_odd, raw)
    m_e = mutual_inductance(bias.phi_even, raw)
    _check_weak_coupling(raw, max(abs(m_o), abs(m_e)))
    return DerivedCircuitParams(
        E_J_odd=ej_o, E_J_even=ej_e, E_C=ec,
        omega_p_odd=wp_o, omega_p_even=wp_e,
        omega_odd=w_o, omega_even=w_e, omega_oe=w_o - w_e,
        Z_odd=z_o, Z_even=z_e,
        t_y=t_y, g_y=column_coupling(t_y, bias),
        M_odd=m_o, M_even=m_e,
        G_odd=row_coupling(m_o, wp_o, z_o),
        G_even=row_coupling(m_e, wp_e, z_e),
    )


def _row_g(phi, raw, parity):
    L_J = raw.L_J_odd if parity == "odd" else raw.L_J_even
    wp, z = plasma_frequency(L_J, raw.C), impedance(L_J, raw.C)
    return row_coupling(mutual_inductance(phi, raw), wp, z)


def row_coupling_range(raw, parity):
    """(min, max) of the row hopping G over the tunable flux range."""
    ends = (_row_g(0.0, raw, parity), _row_g(PHI0 / 2, raw, parity))
    return min(ends), max(ends)


def solve_parity_flux(target_G, raw, parity):
    """Flux on [0, Phi0/2] giving row hopping G = target_G for one row parity."""
    lo, hi = 0.0, PHI0 / 2
    f = lambda phi: _row_g(phi, raw, parity) - target_G  # noqa: E731
    f_lo, f_hi = f(lo), f(hi)
    scale = max(abs(_row_g(lo, raw, parity)), abs(_row_g(hi, raw, parity)))
    tie = 1e-12 * scale
    if abs(f_lo) <= tie:
        return lo
    if abs(f_hi) <= tie:
        return hi
    if f_lo * f_hi > 0:
        gmin, gmax = row_coupling_range(raw, parity)
        raise FluxRangeError(
            f"{parity}-row coupling G={target_G / (2e6 * math.pi):.6g} MHz*2pi is outside "
            f"the achievable interval [{gmin / (2e6 * math.pi):.6g}, {gmax / (2e6 * math.pi):.6g}] MHz*2pi"
        )
    return brentq(f, lo, hi, xtol=1e-16 * PHI0, rtol=4 * np.finfo(float).eps, maxiter=200)


def solve_row_flux(target_gx, raw):
    """Static biases (phi_odd, phi_even) giving G_odd = G_even = -g_x.

    Searches phi in [0, Phi0/2], where G(phi) falls monotonically.
    """
    target_G = -float(target_gx)
    return solve_parity_flux(target_G, raw, "odd"), solve_parity_flux(target_G, raw, "even")


def flux_drive_phase(n, m, gamma):
    """Drive phase offset: -n*gamma on odd rows, +n*gamma on even rows."""
    return -n * gamma if m % 2 else n * gamma


def flux_drive(n, m, t, bias, omega_oe):
    """Coupler flux Phi_bar + Phi_eff cos(omega_oe t + phase_nm)."""
    return bias.phi_bar + bias.phi_eff * np.cos(omega_oe * t + flux_drive_phase(n, m, bias.gamma))


def table_rows(raw):
    """Rows of the derived-parameter table, in reporting order.

    Each row is (symbol, expression, value) where value is a float or a
    (low, high) pair in display units.
    """
    d = derive_params(raw)
    t_y = d.t_y
    gy_max = abs(column_coupling(t_y, FluxBias(phi_bar=PHI0 / 4, phi_eff=J1_ARGMAX * PHI0 / (2 * np.pi))))
    m_ends = sorted((mutual_inductance(0.0, raw), mutual_inductance(PHI0 / 2, raw)))
    go = row_coupling_range(raw, "odd")
    ge = row_coupling_range(raw, "even")
    disp = d.as_display()
    return [
        ("E_J,o", "Phi0^2/(4 pi^2 L_J,o)", disp["E_J_odd/h [GHz]"], "GHz*h"),
        ("E_J,e", "Phi0^2/(4 pi^2 L_J,e)", disp["E_J_even/h [GHz]"], "GHz*h"),
        ("E_C", "e^2/(2C)", disp["E_C/h [GHz]"], "GHz*h"),
        ("omega_p,o", "1/sqrt(L_J,o C)", disp["omega_p_odd/2pi [GHz]"], "GHz*2pi"),
        ("omega_p,e", "1/sqrt(L_J,e C)", disp["omega_p_even/2pi [GHz]"], "GHz*2pi"),
        ("omega_o", "omega_p,o - E_C/hbar", disp["omega_odd/2pi [GHz]"], "GHz*2pi"),
        ("omega_e", "omega_p,e - E_C/hbar", disp["omega_even/2pi [GHz]"], "GHz*2pi"),
        ("omega_oe", "omega_o - omega_e", disp["omega_oe/2pi [MHz]"], "MHz*2pi"),
        ("Z_o", "sqrt(L_J,o/C)", disp["Z_odd [ohm]"], "ohm"),
        ("Z_e", "sqrt(L_J,e/C)", disp["Z_even [ohm]"], "ohm"),
        ("t_y", "M0^2 w_p,o w_p,e/(4 L_T sqrt(Z_o Z_e))", to_mhz(t_y), "MHz*2pi"),
        ("g_y", "-2 t_y sin(2pi Phi_bar/Phi0) J1(2pi Phi_eff/Phi0)", (-to_mhz(gy_max), to_mhz(gy_max)), "MHz*2pi"),
        ("M_o", "-M0^2 cos/(L_T + 2 L0 cos) at Phi_o", (m_ends[0] * 1e12, m_ends[1] * 1e12), "pH"),
        ("M_e", "-M0^2 cos/(L_T + 2 L0 cos) at Phi_e", (m_ends[0] * 1e12, m_ends[1] * 1e12), "pH"),
        ("G_o", "-(M_o/2) w_p,o^2/Z_o", (to_mhz(go[0]), to_mhz(go[1])), "MHz*2pi"),
        ("G_e", "-(M_e/2) w_p,e^2/Z_e", (to_mhz(ge[0]), to_mhz(ge[1])), "MHz*2pi"),
    ]


def format_table(rows):
    """Aligned plain-text rendering of :func:`table_rows`."""
    lines = []
    w_sym = max(len(r[0]) for r in rows)
    w_exp = max(len(r[1]) for r in rows)
    for sym, expr, val, unit in rows:
        if isinstance(val, tuple):
            txt = f"{val[0]:.3g} to {val[1]:.3g}"
        else:
            txt = f"{val:.3g}"
        lines.append(f"{sym:<{w_sym}}  {expr:<{w_exp}}  {txt:>18} {unit}")
    return "\n".join(lines)
