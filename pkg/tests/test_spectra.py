import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transmon_harper.lattice import LatticeDomainError, LatticeSpec, build_quasimomentum, build_real_space, open_chain_spectrum
from transmon_harper import spectra as sp


def test_two_by_two():
    e = sp.eig_hermitian(np.array([[0, -2.0], [-2.0, 0]]))
    assert np.allclose(e.values, [-2, 2])


def test_three_leg_closed_form():
    h = build_quasimomentum(0.0, LatticeSpec(5, 3, 1.0, 1.0, math.pi / 2))
    e = sp.eig_hermitian(h)
    assert np.allclose(e.values, [-(1 + math.sqrt(3)), 0.0, math.sqrt(3) - 1], atol=1e-13)


def test_diagonal_sorted():
    e = sp.eig_hermitian(np.diag([3.0, -1.0, 2.0]))
    assert np.allclose(e.values, [-1, 2, 3])


def test_rejects_non_hermitian():
    with pytest.raises(sp.SpectrumValidationError):
        sp.eig_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(sp.SpectrumValidationError):
        sp.eig_hermitian(np.array([[np.nan, 0], [0, 0]]))


@settings(max_examples=30, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(0, 2))
def test_residual_and_orthonormality(gamma, K):
    H = build_real_space(LatticeSpec(9, 3, 1.0, K, gamma))
    e = sp.eig_hermitian(H)
    assert sp.eig_residual(H, e) <= 1e-9
    assert e.orthonormality_error() <= 1e-12


def test_phase_gauge():
    e = sp.eig_hermitian(build_real_space(LatticeSpec(7, 3, 1.0, 0.5, 0.9)))
    for j in range(e.vectors.shape[1]):
        v = e.vectors[:, j]
        i = np.argmax(np.abs(v) >= np.abs(v).max() * (1 - 1e-9))
        assert abs(v[i].imag) < 1e-14 and v[i].real > 0


def test_degeneracy_flags():
    e = sp.eig_hermitian(np.diag([0.0, 0.0, 1.0]), scale=1.0)
    assert list(e.degenerate) == [True, True, False]


def test_zero_flux_constant_gaps():
    b = sp.bands_open_column(LatticeSpec(5, 3, 1.0, 0.7, 0.0))
    assert np.allclose(np.diff(b.bands, axis=1), math.sqrt(2) * 0.7, atol=1e-12)
    assert np.allclose(b.bands, sp.threeleg_bands_zero_flux(b.k_grid, 1.0, 0.7), atol=1e-12)


def test_flux_mirror():
    k = sp.default_k_grid(400)[:-1]  # symmetric set without pi
    k = np.concatenate([k[k < 0], [0.0], -k[k < 0][::-1]])
    a = sp.bands_open_column(LatticeSpec(5, 3, 1.0, 1.0, math.pi / 2), k)
    b = sp.bands_open_column(LatticeSpec(5, 3, 1.0, 1.0, -math.pi / 2), k)
    assert np.allclose(a.bands, b.bands[::-1], atol=1e-12)


def test_single_row_band():
    b = sp.bands_open_column(LatticeSpec(5, 1, 1.0, 0.0, 0.3))
    assert np.allclose(b.bands[:, 0], -2 * np.cos(b.k_grid)) and np.allclose(b.edge_weight, 0)


@pytest.mark.parametrize("gamma", [0.3, math.pi / 2, -2.0, 2.9])
@pytest.mark.parametrize("K", [0.1, 0.5, 2.0])
def test_band_minimum_at_zero(gamma, K):
    b = sp.bands_open_column(LatticeSpec(5, 3, 1.0, K, gamma))
    i = np.unravel_index(np.argmin(b.bands), b.bands.shape)[0]
    # the default grid straddles zero, so either of the two nearest points is fine
    assert abs(b.k_grid[i]) == pytest.approx(np.abs(b.k_grid).min(), abs=1e-12)


def test_butterfly_zero_flux_kronecker():
    s = LatticeSpec(6, 3, 1.0, 0.8, 0.0)
    lv = sp.butterfly(s, np.array([0.0])).levels[0]
    want = np.sort(np.add.outer(open_chain_spectrum(6, 1.0), open_chain_spectrum(3, -0.8)).ravel())
    assert np.allclose(lv, want, atol=1e-12)


def test_butterfly_symmetries():
    s = LatticeSpec(17, 3, 1.0, 1.0)
    g = sp.default_gamma_grid(41)
    bf = sp.butterfly(s, g)
    assert np.allclose(bf.levels, bf.levels[::-1], atol=1e-10)
    assert np.allclose(bf.levels, -bf.levels[:, ::-1], atol=1e-10)


def test_butterfly_threads_identical():
    s = LatticeSpec(9, 3, 1.0, 1.0)
    g = sp.default_gamma_grid(21)
    assert np.array_equal(sp.butterfly(s, g, threads=1).levels, sp.butterfly(s, g, threads=3).levels)


def test_perturbative_values():
    e0, eg = sp.threeleg_perturbative(math.pi, 1.0, 0.1)
    assert e0 == pytest.approx(-2.005)
    assert sp.threeleg_perturbative(1.0, 1.0, 0.0) == (-2.0, -2.0)
    with pytest.raises(LatticeDomainError):
        sp.threeleg_perturbative(0.0, 1.0, 0.1)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, math.pi), st.floats(1e-3, 0.3))
def test_perturbative_ordering(gamma, K):
    e0, eg = sp.threeleg_perturbative(gamma, 1.0, K)
    assert e0 < eg


@pytest.mark.parametrize("gamma", [math.pi / 4, math.pi / 2, 3 * math.pi / 4])
@pytest.mark.parametrize("K", [0.02, 0.05])
def test_perturbative_remainder_is_fourth_order(gamma, K):
    # k_x = 0 reduces to a 2x2 problem whose K^4 term is K^4 / (2 (1 - cos gamma)^3)
    s = LatticeSpec(5, 3, 1.0, K, gamma)
    e0, eg = sp.threeleg_perturbative(gamma, 1.0, K)
    exact0 = np.linalg.eigvalsh(build_quasimomentum(0.0, s))[0]
    c = 1 - math.cos(gamma)
    assert abs(exact0 - e0) == pytest.approx(K ** 4 / (2 * c ** 3), rel=0.05)
    exactg = np.linalg.eigvalsh(build_quasimomentum(gamma, s))[0]
    assert abs(exactg - eg) <= K ** 4 / c ** 3


def test_gap_map_positive_and_symmetric():
    s = LatticeSpec(17, 3, 1.0, 1.0)
    g = np.array([-2.5, -1.0, -0.2, 0.2, 1.0, 2.5])
    m = sp.gap_map(s, g, np.array([0.1, 0.5, 1.5]))
    assert np.all(m > 0)
    assert np.allclose(m, m[::-1], atol=1e-12)


def test_gap_map_decoupled_chain():
    s = LatticeSpec(17, 3, 1.0, 0.0)
    m = sp.gap_map(s, np.array([0.0]), np.array([1e-6]))
    w = open_chain_spectrum(17, 1.0)
    assert m[0, 0] <= (w[1] - w[0]) + 1e-5
