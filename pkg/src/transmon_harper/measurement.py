"""Closed-form simulations of the readout protocols.

Every pulse sequence here is piecewise-constant, so states are propagated
with exact unitaries on the single-excitation space rather than time-stepped.
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize_scalar
from scipy.signal import find_peaks

from . import kernels
from .lattice import build_real_space
from .spectra import bands_open_column, default_k_grid, eig_hermitian


class FitError(RuntimeError):
    """Least-squares fit did not converge."""


class PathError(RuntimeError):
    """Phase accumulation cannot reach a site."""


class SamplingError(ValueError):
    """Time grid violates the Nyquist condition or is not uniform."""


# state generation --------------------------------------------------------------

@dataclass(frozen=True)
class DriveSpec:
    Omega: float
    nu: float
    site_weights: np.ndarray
    gamma_relax: np.ndarray
    Gamma_dephase: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.gamma_relax) < 0) or np.any(np.asarray(self.Gamma_dephase) < 0):
            raise ValueError("relaxation and dephasing rates must be non-negative")

    @classmethod
    def for_state(cls, psi, omega_j, Omega, gamma_relax, Gamma_dephase):
        """Drive profile Omega_nm = psi_nm Omega resonant with omega_j."""
        psi = np.asarray(psi)
        return cls(Omega, omega_j, psi * Omega, np.broadcast_to(gamma_relax, psi.shape),
                   np.broadcast_to(Gamma_dephase, psi.shape))

    def effective_coupling(self, psi_j):
        """Omega'_j = sum_nm Omega_nm conj(psi_j)."""
        return complex(np.vdot(psi_j, self.site_weights))


def effective_rates(psi, gamma_relax, Gamma_dephase):
    """(gamma_1, Gamma_1) as |psi|^2-weighted averages of the site rates."""
    p = np.abs(np.asarray(psi)) ** 2
    return float(p @ np.broadcast_to(gamma_relax, p.shape)), float(p @ np.broadcast_to(Gamma_dephase, p.shape))


def generation_fidelity(Omega, gamma1, Gamma1, t):
    """<G|rho|G> = (1 - exp(-(gamma1 + Gamma1/2) t / 2) cos(2 Omega t)) / 2."""
    if Omega <= 0:
        raise ValueError("Omega must be positive")
    t = np.asarray(t, dtype=float)
    out = 0.5 * (1 - np.exp(-0.5 * (gamma1 + 0.5 * Gamma1) * t) * np.cos(2 * Omega * t))
    return float(out) if out.ndim == 0 else out


def generation_fidelity_pi2(Omega, gamma1, Gamma1):
    """Fidelity at the end of the pi/2 pulse, Omega t = pi/2."""
    return generation_fidelity(Omega, gamma1, Gamma1, math.pi / (2 * Omega))


# current readout ---------------------------------------------------------------

@dataclass(frozen=True)
class PopulationTrace:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.any(np.abs(self.values) > 1 + 1e-9):
            raise ValueError("population differences must lie in [-1, 1]")


def pair_decay(gamma_a, gamma_b, Gamma_a, Gamma_b):
    """Decay constant (gamma_a + gamma_b + Gamma_a + Gamma_b) / 4 of a two-site trace."""
    return 0.25 * (gamma_a + gamma_b + Gamma_a + Gamma_b)


def rabi_population_difference(t, g, I_G, decay, p0=1.0):
    """exp(-decay t) [p0 cos(2 g t) + sin(2 g t) I_G / g].

    For an isolated pair a -> b joined by hopping -g, the difference is
    |b|^2 - |a|^2 and I_G is the current from a to b; p0 is its value at t=0.
    """
    if g == 0:
        raise ValueError("coupling g must be nonzero")
    t = np.asarray(t, dtype=float)
    return np.exp(-decay * t) * (p0 * np.cos(2 * g * t) + np.sin(2 * g * t) * I_G / g)


@dataclass(frozen=True)
class CurrentFit:
    I_G: float
    decay: float
    rms: float
    I_G_std: float
    decay_std: float


def extract_current_fit(trace, g_known, p0=1.0, guess=(0.0, 0.0)):
    """Least-squares estimate of (I_G, decay) from a population-difference trace."""
    t = np.asarray(trace.times, dtype=float)
    y = np.asarray(trace.values, dtype=float)
    if t.size < 8:
        raise FitError("need at least 8 samples")
    if np.ptp(t) * abs(g_known) < math.pi:
        raise FitError("trace must span at least one Rabi period")

    def resid(x):
        return rabi_population_difference(t, g_known, x[0] * abs(g_known), x[1] * abs(g_known), p0) - y

    x0 = np.array([guess[0] / abs(g_known), guess[1] / abs(g_known)])
    sol = least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    rms = float(np.sqrt(np.mean(sol.fun ** 2)))
    if not sol.success:
        raise FitError(f"fit did not converge: {sol.message}; residual rms {rms:.3e}")
    dof = max(t.size - 2, 1)
    s2 = float(np.sum(sol.fun ** 2) / dof)
    try:
        cov = np.linalg.inv(sol.jac.T @ sol.jac) * s2
        std = np.sqrt(np.clip(np.diag(cov), 0, None)) * abs(g_known)
    except np.linalg.LinAlgError:
        std = np.array([np.inf, np.inf])
    return CurrentFit(
        I_G=float(sol.x[0] * abs(g_known)),
        decay=float(sol.x[1] * abs(g_known)),
        rms=rms,
        I_G_std=float(std[0]),
        decay_std=float(std[1]),
    )


def noisy_traces(trace, sigma, seed, count):
    """``count`` noisy copies of a trace from independent child streams of one seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    out = []
    for ss in children:
        rng = np.random.default_rng(ss)
        out.append(PopulationTrace(trace.times, np.clip(trace.values + rng.normal(0, sigma, trace.values.shape), -1, 1)))
    return out


# special reconstruction --------------------------------------------------------

def x_quarter(a, b):
    """Populations after an X-pi/4 pulse on a site pair: (|a - i b|^2, |b - i a|^2) / 2."""
    return abs(a - 1j * b) ** 2 / 2, abs(b - 1j * a) ** 2 / 2


def z_then_x_quarter(a, b):
    """Populations after a Z-pi/2 rotation followed by the X-pi/4 pulse."""
    a1, b1 = np.exp(-0.25j * np.pi) * a, np.exp(0.25j * np.pi) * b
    return x_quarter(a1, b1)


def swap_into(a, b):
    """Full X-pi/2 transfer on a pair: returns the new (a, b) = (-i b, -i a)."""
    return -1j * b, -1j * a


def pair_relative_phase(a, b):
    """theta_b - theta_a in (-pi, pi] from the two pulse-sequence readouts of site a."""
    base = 0.5 * (abs(a) ** 2 + abs(b) ** 2)
    norm = abs(a) * abs(b)
    s = (x_quarter(a, b)[0] - base) / norm
    c = (z_then_x_quarter(a, b)[0] - base) / norm
    ang = math.atan2(s, c)
    return math.pi if ang == -math.pi else ang


@dataclass
class ReconstructedState:
    amplitudes: np.ndarray
    phases: np.ndarray
    path: str  # "canonical" or "spanning-tree"
    relays: int = 0
    gauge: str = "phase zero at the first bright site of the lowest row"
    meta: dict = field(default_factory=dict)

    def fidelity(self, psi):
        return float(abs(np.vdot(psi, self.amplitudes)))


def _canonical_edges(W, L):
    # left column upward, then along every row
    idx = np.arange(W * L).reshape(W, L)
    edges = [(idx[r, 0], idx[r + 1, 0]) for r in range(W - 1)]
    edges += [(idx[r, c], idx[r, c + 1]) for r in range(W) for c in range(L - 1)]
    return edges


def _neighbours(W, L):
    nb = [[] for _ in range(W * L)]
    for r in range(W):
        for c in range(L):
            i = r * L + c
            if c + 1 < L:
                nb[i].append(i + 1)
                nb[i + 1].append(i)
            if r + 1 < W:
                nb[i].append(i + L)
                nb[i + L].append(i)
    return nb


def reconstruct_from_amplitudes(psi, W, L, route_tol=1e-6):
    """Rebuild a state from populations and simulated pair readouts.

    Phases chain along the left column and then along each row. When a
    dark site (|psi| < route_tol * max) sits on that route, the chain
    instead follows a breadth-first tree over bright sites; bright sites
    separated by a dark one are linked by first swapping the amplitude onto
    the dark site with an X-pi/2 pulse.
    """
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    amp = np.abs(psi)
    bright = amp >= route_tol * amp.max()
    theta = np.zeros(psi.size)
    canon = _canonical_edges(W, L)
    relays = 0
    if all(bright[a] for a, _ in canon):
        path = "canonical"
        for a, b in canon:
            if bright[b]:
                theta[b] = theta[a] + pair_relative_phase(psi[a], psi[b])
    else:
        path = "spanning-tree"
        nb = _neighbours(W, L)
        root = int(np.argmax(bright))
        seen = np.zeros(psi.size, dtype=bool)
        seen[root] = True
        queue = deque([root])
        while queue:
            a = queue.popleft()
            for b in nb[a]:
                if seen[b]:
                    continue
                if bright[b]:
                    theta[b] = theta[a] + pair_relative_phase(psi[a], psi[b])
                    seen[b] = True
                    queue.append(b)
                    continue
                # relay: move a's amplitude onto dark b, then pair b with its bright neighbours
                _, moved = swap_into(psi[a], psi[b])
                for c in nb[b]:
                    if c != a and bright[c] and not seen[c]:
                        # moved carries theta_a - pi/2
                        theta[c] = theta[a] - 0.5 * np.pi + pair_relative_phase(moved, psi[c])
                        seen[c] = True
                        queue.append(c)
                        relays += 1
        if np.any(bright & ~seen):
            raise PathError("some bright sites are unreachable through bright or relay links")
    theta = np.where(bright, np.angle(np.exp(1j * theta)), 0.0)
    rec = amp * np.exp(1j * theta)
    rec /= np.linalg.norm(rec)
    return ReconstructedState(amplitudes=rec, phases=theta, path=path, relays=relays)


def reconstruct_eigenstate_special(spec, j, route_tol=1e-6):
    """Simulated special-method readout of eigenstate j of the real-space lattice."""
    eig = eig_hermitian(build_real_space(spec), scale=spec.scale or 1.0)
    psi = eig.vectors[:, j]
    rec = reconstruct_from_amplitudes(psi, spec.W, spec.L, route_tol)
    rec.meta.update(omega=float(eig.values[j]), j=int(j), fidelity=rec.fidelity(psi))
    return rec


# band points from a reconstructed state -----------------------------------------

def quasimomentum_power(psi, spec, k_grid):
    """P(k) = sum_m |sum_n exp(-i(gamma m n + k n)) psi_nm / sqrt(L)|^2."""
    grid = np.asarray(psi).reshape(spec.W, spec.L)
    n = spec.n_values.astype(float)
    m = spec.m_values.astype(float)
    phase = np.exp(-1j * (k_grid[:, None, None] + spec.gamma * m[None, :, None]) * n[None, None, :])
    amp = np.einsum("kmn,mn->km", phase, grid) / math.sqrt(spec.L)
    return (np.abs(amp) ** 2).sum(axis=1)


def band_points_from_state(psi, omega_j, spec, k_grid=None, threshold_rel=0.5):
    """(k, omega_j) at each periodic local maximum of P(k) above threshold_rel * max."""
    k_grid = default_k_grid(2001) if k_grid is None else np.asarray(k_grid, dtype=float)
    P = quasimomentum_power(psi, spec, k_grid)
    ext = np.concatenate([P[-1:], P, P[:1]])
    peaks, _ = find_peaks(ext, height=threshold_rel * P.max())
    peaks = [p - 1 for p in peaks if 1 <= p <= P.size]
    return [(float(k_grid[p]), float(omega_j)) for p in peaks]


def band_points_special(spec, j, k_grid=None, threshold_rel=0.5, route_tol=1e-6):
    """Band points of eigenstate j read off its special-method reconstruction.

    Returns (points, diagnostic); the diagnostic is empty unless no peak
    clears the threshold.
    """
    rec = reconstruct_eigenstate_special(spec, j, route_tol)
    pts = band_points_from_state(rec.amplitudes, rec.meta["omega"], spec, k_grid, threshold_rel)
    note = "" if pts else f"no peak above {threshold_rel} of the maximum"
    return pts, note


def nearest_band_offset(k, omega, spec, window):
    """Smallest |band(k') - omega| for k' within ``window`` of k, over all strip bands.

    Continuous search: zero when a band crosses omega inside the window,
    otherwise a bounded minimization started from a dense sample.
    """
    from .lattice import build_quasimomentum

    def f(kp, b):
        return np.linalg.eigvalsh(build_quasimomentum(kp, spec))[b] - omega

    ks = np.linspace(k - window, k + window, 257)
    vals = np.array([np.linalg.eigvalsh(build_quasimomentum(kp, spec)) for kp in ks]) - omega
    best = np.inf
    for b in range(spec.W):
        v = vals[:, b]
        if np.any(np.sign(v[:-1]) * np.sign(v[1:]) <= 0):
            return 0.0
        i = int(np.argmin(np.abs(v)))
        lo, hi = ks[max(i - 1, 0)], ks[min(i + 1, ks.size - 1)]
        res = minimize_scalar(lambda kp: abs(f(kp, b)), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        best = min(best, abs(v[i]), float(res.fun))
    return best


def in_band(omega, bands, tol=0.0):
    """True when omega lies inside the range of at least one strip band."""
    lo = bands.bands.min(axis=0) - tol
    hi = bands.bands.max(axis=0) + tol
    return bool(np.any((omega >= lo) & (omega <= hi)))


def measure_bands_special(spec, threshold_rel=0.5, k_grid=None, route_tol=1e-6):
    """Reconstruct every eigenstate, then collect its band points.

    Returns (points, report) where points are (j, k, omega) and the
    report lists reconstruction fidelities and the in-gap states.
    """
    eig = eig_hermitian(build_real_space(spec), scale=spec.scale or 1.0)
    strip = bands_open_column(spec, default_k_grid(801))
    points, fids, gap_states, paths = [], [], [], {"canonical": 0, "spanning-tree": 0}
    for j in range(spec.dim):
        rec = reconstruct_from_amplitudes(eig.vectors[:, j], spec.W, spec.L, route_tol)
        fids.append(rec.fidelity(eig.vectors[:, j]))
        paths[rec.path] += 1
        w = float(eig.values[j])
        if not in_band(w, strip):
            gap_states.append(j)
        for k, om in band_points_from_state(rec.amplitudes, w, spec, k_grid, threshold_rel):
            points.append((j, k, om))
    return points, {"fidelities": fids, "in_gap": gap_states, "paths": paths, "threshold_rel": threshold_rel}


# feature function ----------------------------------------------------------------

@dataclass
class FeatureSpectrum:
    omega_grid: np.ndarray
    F_values: np.ndarray
    peaks: np.ndarray
    amplitudes: np.ndarray
    T: float
    warnings: list = field(default_factory=list)
    fidelities: np.ndarray | None = None


def feature_function(omega, freqs, T, n_sites, vacuum=True):
    """Closed-form feature function summed over all initial sites.

    Each eigenfrequency contributes sinc^2((omega - w_j) T/2) / 2; the
    vacuum component of every initial state adds n_sites/2 sinc^2(omega T/2).
    """
    f = np.asarray(freqs, dtype=float)
    w = np.full(f.size, 0.5)
    if vacuum:
        f = np.append(f, 0.0)
        w = np.append(w, 0.5 * n_sites)
    return kernels.feature_sum(omega, f, w, T)


def default_omega_grid(freqs, T):
    """Spacing 2 pi/(10 T), padded by two main-lobe widths on both sides."""
    lo = min(np.min(freqs), 0.0) - 4 * np.pi / T
    hi = max(np.max(freqs), 0.0) + 4 * np.pi / T
    step = 2 * np.pi / (10 * T)
    return np.arange(lo, hi + step, step)


def transformed_states(eig, omega, T):
    """Single-excitation parts of the windowed transforms at one frequency.

    Column nm of the result is <pq|psi~_nm(omega)> over pq.
    """
    x = 0.5 * (omega - eig.values) * T
    c = np.exp(1j * x) * np.sinc(x / np.pi) / math.sqrt(2)
    V = eig.vectors
    return (V * c[None, :]) @ V.conj().T


def fictitious_eigenstate(eig, omega, T):
    """Phase-aligned, magnitude-weighted sum of the transformed states at omega."""
    A = transformed_states(eig, omega, T)
    ref = int(np.argmax(np.abs(np.diag(A))))
    theta = np.angle(A[ref, :])
    mag = 2 * np.linalg.norm(A, axis=0)
    E = A @ (mag * np.exp(-1j * theta))
    nrm = np.linalg.norm(E)
    return E / nrm if nrm > 0 else E


def feature_spectrum(spec, T, omega_grid=None, height=0.25, reconstruct=False):
    """Feature function, its peaks, and optionally fictitious-state fidelities."""
    eig = eig_hermitian(build_real_space(spec), scale=spec.scale or 1.0)
    freqs = eig.values
    omega_grid = default_omega_grid(freqs, T) if omega_grid is None else np.asarray(omega_grid, dtype=float)
    notes = []
    gaps = np.diff(freqs)
    if gaps.size and T * gaps.min() < 1:
        notes.append(f"T * min gap = {T * gaps.min():.3g} < 1: neighbouring levels will merge")
    if np.diff(omega_grid).max() > np.pi / T:
        notes.append("omega grid is too coarse to resolve sinc main lobes")
    F = feature_function(omega_grid, freqs, T, spec.dim)
    # the vacuum term is known exactly and is removed before the peak search
    F1 = feature_function(omega_grid, freqs, T, spec.dim, vacuum=False)
    idx, props = find_peaks(np.concatenate([[0.0], F1, [0.0]]), height=height)
    idx = idx - 1
    peaks = np.append(omega_grid[idx], 0.0)
    amps = np.append(props["peak_heights"], np.interp(0.0, omega_grid, F))
    order = np.argsort(peaks)
    out = FeatureSpectrum(omega_grid, F, peaks[order], amps[order], T, notes)
    if reconstruct:
        signal_peaks = omega_grid[idx]
        fid = []
        for j, w in enumerate(freqs):
            pk = signal_peaks[np.argmin(np.abs(signal_peaks - w))] if signal_peaks.size else w
            E = fictitious_eigenstate(eig, pk, T)
            fid.append(abs(np.vdot(eig.vectors[:, j], E)))
        out.fidelities = np.array(fid)
    return out


def carrier_readout(components, vacuum, site):
    """Simulate the carrier-process phase readout of one component.

    ``components`` holds the single-excitation amplitudes and ``vacuum``
    the real, non-negative vacuum amplitude. An X-pi/2 pulse couples |0>
    with |1_site> and every other |1_p> with |1_p 1_site>. Returns
    (sin-readout, cos-readout, total norm after the pulse).
    """
    c = np.asarray(components, dtype=np.complex128)

    def pulse(c_site, c_vac, others):
        new_site = (c_site - 1j * c_vac) / math.sqrt(2)
        new_vac = (c_vac - 1j * c_site) / math.sqrt(2)
        # single-occupation amplitudes on other sites halve in weight, the rest moves to doubles
        singles = others / math.sqrt(2)
        doubles = -1j * others / math.sqrt(2)
        return new_site, new_vac, singles, doubles

    others = np.delete(c, site)
    s_site, s_vac, s_single, s_double = pulse(c[site], vacuum, others)
    norm = abs(s_site) ** 2 + abs(s_vac) ** 2 + np.sum(np.abs(s_single) ** 2) + np.sum(np.abs(s_double) ** 2)
    c_site, _, _, _ = pulse(-1j * c[site], vacuum, others)
    return abs(s_site) ** 2, abs(c_site) ** 2, float(norm)


def carrier_phase(components, vacuum, site):
    """Phase of one component relative to the real vacuum amplitude."""
    c = np.asarray(components)
    base = 0.5 * (abs(c[site]) ** 2 + vacuum ** 2)
    norm = abs(c[site]) * vacuum
    p_sin, p_cos, _ = carrier_readout(components, vacuum, site)
    ang = math.atan2(-(p_sin - base) / norm, (p_cos - base) / norm)
    return math.pi if ang == -math.pi else ang


# butterfly signal ----------------------------------------------------------------

@dataclass
class ButterflySignal:
    times: np.ndarray
    chi: np.ndarray
    omega_grid: np.ndarray
    spectrum: np.ndarray
    peaks: np.ndarray
    amplitudes: np.ndarray


def site_averaged_signal(freqs, t):
    """(1/n) sum_j exp(i w_j t)."""
    return np.exp(1j * np.outer(t, freqs)).mean(axis=1)


def butterfly_signal(spec, t_grid=None, T=None, window="hann", omega_grid=None, height_rel=0.3):
    """Site-averaged raising-operator signal and its windowed spectrum."""
    freqs = np.linalg.eigvalsh(build_real_space(spec))
    wmax = max(np.abs(freqs).max(), 1e-300)
    if t_grid is None:
        T = 400.0 / abs(spec.g_x) if T is None else T
        dt = np.pi / (2 * wmax)
        t_grid = np.arange(0.0, T, dt)
    t_grid = np.asarray(t_grid, dtype=float)
    steps = np.diff(t_grid)
    if steps.size == 0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise SamplingError("time grid must be uniform with at least two points")
    if steps[0] >= np.pi / wmax:
        raise SamplingError(f"time step {steps[0]:.3g} violates Nyquist bound pi/max|w| = {np.pi / wmax:.3g}")
    chi = site_averaged_signal(freqs, t_grid)
    span = t_grid[-1] - t_grid[0] + steps[0]
    if window == "hann":
        win = np.hanning(t_grid.size + 2)[1:-1]
    elif window in ("rect", "none", None):
        win = np.ones(t_grid.size)
    else:
        raise ValueError(f"unknown window {window!r}")
    if omega_grid is None:
        step = 2 * np.pi / (16 * span)
        omega_grid = np.arange(freqs.min() - 8 * np.pi / span, freqs.max() + 8 * np.pi / span + step, step)
    # chi carries exp(+i w_j t), so the exp(-i w t) transform peaks at w = w_j
    spectrum = np.abs(kernels.windowed_dtft(t_grid, chi, win, omega_grid))
    idx, props = find_peaks(spectrum, height=height_rel / spec.dim)
    return ButterflySignal(t_grid, chi, omega_grid, spectrum, omega_grid[idx], props["peak_heights"])


def match_peaks(peaks, freqs, tol):
    """(every frequency has a peak within tol, every peak has a frequency within tol)."""
    peaks = np.asarray(peaks)
    freqs = np.asarray(freqs)
    if peaks.size == 0:
        return False, True
    covered = np.all(np.min(np.abs(freqs[:, None] - peaks[None, :]), axis=1) <= tol)
    genuine = np.all(np.min(np.abs(peaks[:, None] - freqs[None, :]), axis=1) <= tol)
    return bool(covered), bool(genuine)
