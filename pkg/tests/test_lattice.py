import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import real_space_loops
from transmon_harper.lattice import (
    PERIODIC, LatticeDomainError, LatticeSpec, bloch_dk, build_bloch, build_quasimomentum,
    build_real_space, centered_indices, check_rational, hermiticity_residual, open_chain_spectrum, wrap_phase,
)

gammas = st.floats(-math.pi, math.pi, allow_nan=False)


def test_two_site_row():
    H = build_real_space(LatticeSpec(2, 1, 1.5, 0.0))
    assert np.array_equal(H, np.array([[0, -1.5], [-1.5, 0]]))


def test_two_site_column():
    H = build_real_space(LatticeSpec(1, 2, 1.0, 0.7, gamma=1.1))
    assert H[1, 0] == pytest.approx(0.7)


def test_column_phase():
    s = LatticeSpec(3, 2, 1.0, 1.0, gamma=math.pi / 2)
    H = build_real_space(s)
    a, b = s.flat_index(1, 0), s.flat_index(1, 1)
    assert H[b, a] == pytest.approx(1j)


@pytest.mark.parametrize("L,W", [(5, 3), (4, 4), (7, 2)])
@pytest.mark.parametrize("gamma", [0.0, 0.3, -math.pi / 2, math.pi])
def test_matches_loop_oracle(L, W, gamma):
    s = LatticeSpec(L, W, 1.0, 0.6, gamma)
    assert np.allclose(build_real_space(s), real_space_loops(L, W, 1.0, 0.6, s.gamma), atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(gammas, st.floats(0, 3))
def test_hermitian_and_conjugation(gamma, K):
    s = LatticeSpec(7, 3, 1.0, K, gamma)
    H = build_real_space(s)
    assert hermiticity_residual(H) <= 1e-15
    w1 = np.linalg.eigvalsh(H)
    w2 = np.linalg.eigvalsh(build_real_space(s.with_(gamma=-gamma)))
    assert np.allclose(w1, w2, atol=1e-12)


@pytest.mark.parametrize("gamma", [0.0, math.pi])
def test_time_reversal_points_real(gamma):
    H = build_real_space(LatticeSpec(6, 3, 1.0, 0.8, gamma))
    assert np.allclose(H, H.conj(), atol=1e-14)


def test_decoupled_rows():
    s = LatticeSpec(9, 4, 1.3, 0.0, 0.4)
    w = np.linalg.eigvalsh(build_real_space(s))
    assert np.allclose(w, np.sort(np.repeat(open_chain_spectrum(9, 1.3), 4)), atol=1e-12)


def test_quasimomentum_diagonal():
    h = build_quasimomentum(0.0, LatticeSpec(5, 3, 1.0, 0.0, math.pi / 2))
    assert np.allclose(np.diag(h).real, [0, -2, 0], atol=1e-15)


def test_quasimomentum_single_row():
    h = build_quasimomentum(0.3, LatticeSpec(5, 1, 2.0, 1.0, 0.4))
    assert h.shape == (1, 1) and h[0, 0] == pytest.approx(-4 * math.cos(0.3))


@settings(max_examples=30, deadline=None)
@given(gammas, st.floats(-math.pi, math.pi))
def test_quasimomentum_decoupled(gamma, k):
    h = build_quasimomentum(k, LatticeSpec(5, 3, 1.0, 0.0, gamma))
    want = np.sort([-2 * math.cos(k - gamma), -2 * math.cos(k), -2 * math.cos(k + gamma)])
    assert np.allclose(np.linalg.eigvalsh(h), want, atol=1e-12)


@pytest.mark.parametrize("L", [4, 6, 12])
def test_quasimomentum_matches_row_periodic_blocks(L):
    # gamma commensurate with L so the wrap adds no extra flux
    gamma = 2 * math.pi / L
    s = LatticeSpec(L, 3, 1.0, 0.7, gamma, row_boundary=PERIODIC)
    w = np.sort(np.linalg.eigvalsh(build_real_space(s)))
    ks = 2 * math.pi * np.arange(L) / L
    blocks = np.sort(np.concatenate([np.linalg.eigvalsh(build_quasimomentum(k, s)) for k in ks]))
    assert np.allclose(w, blocks, atol=1e-12)


def test_row_periodic_incommensurate_warns():
    with pytest.warns(UserWarning):
        build_real_space(LatticeSpec(5, 3, 1.0, 1.0, 0.3, row_boundary=PERIODIC))


def test_row_periodic_commensurate_silent():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_real_space(LatticeSpec(5, 3, 1.0, 1.0, 2 * math.pi / 5, row_boundary=PERIODIC))


def test_bloch_q1():
    s = LatticeSpec(5, 5, 1.0, 0.5, 0.0)
    h = build_bloch(0.4, 1.1, s, 0, 1)
    assert h[0, 0] == pytest.approx(-2 * math.cos(0.4) + 2 * 0.5 * math.cos(1.1))


def test_bloch_trace_zero():
    s = LatticeSpec(5, 5, 1.0, 1.0, 2 * math.pi / 5)
    assert abs(np.trace(build_bloch(0.0, 0.0, s, 1, 5))) < 1e-14


@settings(max_examples=30, deadline=None)
@given(st.floats(-4, 4), st.floats(-4, 4))
def test_bloch_hermitian_and_periodic(kx, ky):
    s = LatticeSpec(5, 5, 1.0, 0.8, 2 * math.pi / 5)
    h = build_bloch(kx, ky, s, 1, 5)
    assert np.allclose(h, h.conj().T)
    w = np.linalg.eigvalsh(h)
    assert np.allclose(w, np.linalg.eigvalsh(build_bloch(kx + 2 * math.pi / 5, ky, s, 1, 5)), atol=1e-12)
    assert np.allclose(w, np.linalg.eigvalsh(build_bloch(kx, ky + 2 * math.pi, s, 1, 5)), atol=1e-12)


def test_bloch_rejects_wrong_flux():
    with pytest.raises(LatticeDomainError):
        build_bloch(0, 0, LatticeSpec(5, 5, 1.0, 1.0, 0.3), 1, 5)
    with pytest.raises(LatticeDomainError):
        check_rational(4 * math.pi / 10, 2, 10)


def test_bloch_derivatives_fd():
    s = LatticeSpec(5, 5, 1.0, 0.8, 2 * math.pi / 5)
    dx, dy = bloch_dk(0.3, 0.9, s, 1, 5)
    h = 1e-6
    fx = (build_bloch(0.3 + h, 0.9, s, 1, 5) - build_bloch(0.3 - h, 0.9, s, 1, 5)) / (2 * h)
    fy = (build_bloch(0.3, 0.9 + h, s, 1, 5) - build_bloch(0.3, 0.9 - h, s, 1, 5)) / (2 * h)
    assert np.allclose(dx, fx, atol=1e-8) and np.allclose(dy, fy, atol=1e-8)


def test_spec_validation():
    with pytest.raises(LatticeDomainError):
        LatticeSpec(0, 3, 1.0, 1.0)
    with pytest.raises(LatticeDomainError):
        LatticeSpec(3, 3, 1.0, 1.0, row_boundary="twisted")
    with pytest.raises(LatticeDomainError):
        LatticeSpec(3, 3, 0.0, 1.0).K


def test_gamma_wrapping():
    assert LatticeSpec(3, 3, 1, 1, 3 * math.pi).gamma == pytest.approx(math.pi)
    assert wrap_phase(-math.pi) == math.pi


def test_indices_and_flat_roundtrip():
    assert list(centered_indices(5)) == [-2, -1, 0, 1, 2]
    s = LatticeSpec.from_half(3, 1, 1.0, 1.0)
    assert (s.L, s.W) == (7, 3)
    for f in range(s.dim):
        assert s.flat_index(*s.site(f)) == f
    with pytest.raises(LatticeDomainError):
        s.flat_index(4, 0)
