import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transmon_harper import _backend, kernels as kn


def _rng(seed):
    return np.random.default_rng(seed)


def _cplx(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


@pytest.mark.parametrize("W,L", [(1, 1), (1, 6), (3, 5), (6, 11)])
def test_bond_current_parity(W, L):
    rng = _rng(W * L)
    psi = _cplx(rng, W, L)
    n = np.arange(L) - (L - 1) / 2
    ref = kn._bond_currents_numpy(psi, 1.1, 0.4, 0.7, n)
    for fn in (kn._bond_currents_loops, kn._bond_currents_jit):
        got = fn(psi, 1.1, 0.4, 0.7, n)
        for a, b in zip(got, ref):
            assert a.shape == b.shape
            assert np.allclose(a, b, atol=1e-14, rtol=0)


def test_single_plaquette_counts_once():
    row = np.array([[1.0], [-1.0]])
    col = np.array([[-1.0, 1.0]])
    assert kn.count_circulating_regions(row, col, 1e-9) == 1
    assert kn.count_circulating_regions(-row, -col, 1e-9) == 1
    assert kn.count_circulating_regions(0 * row, 0 * col, 1e-9) == 0


def test_below_threshold_is_dead():
    row = np.array([[1e-6], [-1e-6]])
    col = np.array([[-1e-6, 1e-6]])
    assert kn.count_circulating_regions(row, col, 1e-3) == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 7), st.integers(2, 9), st.integers(0, 2**31), st.floats(0.0, 1.5))
def test_region_count_parity(W, L, seed, eps):
    rng = _rng(seed)
    row = rng.normal(size=(W, L - 1))
    col = rng.normal(size=(W - 1, L))
    p, q, d, nn = kn.plaquette_edges(row, col)
    counts = {kn._regions_python(p, q, d, nn, eps), kn._regions_jit(p, q, d, nn, eps),
              kn._regions_numpy(p, q, d, nn, eps)}
    assert len(counts) == 1


@pytest.mark.parametrize("shape", [(4, 4, 6, 1), (5, 3, 8, 3)])
def test_link_field_parity(shape):
    rng = _rng(sum(shape))
    U = _cplx(rng, *shape)
    ref = kn._link_field_numpy(U)
    for fn in (kn._link_field_loops, kn._link_field_jit):
        d = np.angle(np.exp(1j * (fn(U) - ref)))
        assert np.abs(d).max() < 1e-12


def test_link_field_gauge_invariant():
    rng = _rng(3)
    U = _cplx(rng, 4, 5, 6, 2)
    phase = np.exp(1j * rng.uniform(-np.pi, np.pi, size=(4, 5, 1, 2)))
    d = np.angle(np.exp(1j * (kn.link_field(U * phase) - kn.link_field(U))))
    assert np.abs(d).max() < 1e-12


def test_feature_parity():
    rng = _rng(5)
    om = np.linspace(-3, 3, 301)
    f = rng.uniform(-2.5, 2.5, 40)
    w = rng.uniform(0, 1, 40)
    ref = kn._feature_numpy(om, f, w, 37.0)
    for fn in (kn._make_feature_loops(kn._sinc2), kn._feature_jit):
        assert np.allclose(fn(om, f, w, 37.0), ref, atol=1e-13, rtol=0)


def test_feature_exact_on_level():
    assert kn.feature_sum(np.array([0.5]), np.array([0.5]), np.array([2.0]), 10.0)[0] == pytest.approx(2.0)


def test_dtft_parity():
    rng = _rng(9)
    t = np.linspace(0, 20, 500)
    x = _cplx(rng, 500)
    om = np.linspace(-4, 4, 2500)  # crosses a block boundary in the numpy path
    ref = kn._dtft_numpy(t, x, om)
    for fn in (kn._dtft_loops, kn._dtft_jit):
        assert np.allclose(fn(t, x, om), ref, atol=1e-10, rtol=0)


def test_dtft_pure_tone():
    t = np.arange(0, 100, 0.1)
    x = np.exp(-1j * 1.3 * t)
    w = np.hanning(t.size)
    assert abs(kn.windowed_dtft(t, x, w, np.array([-1.3]))[0]) == pytest.approx(1.0)


def _backend_in_subprocess(value):
    env = dict(os.environ)
    if value is None:
        env.pop(_backend.ENV_FLAG, None)
    else:
        env[_backend.ENV_FLAG] = value
    out = subprocess.run([sys.executable, "-c", "from transmon_harper import _backend; print(_backend.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


@pytest.mark.parametrize("value,expected", [("numpy", "numpy"), ("NumPy", "numpy"), ("numba", "numba"),
                                            (None, "numba")])
def test_env_flag_selects_backend(value, expected):
    assert _backend_in_subprocess(value) == expected


def test_numpy_backend_end_to_end():
    code = ("import math; from transmon_harper.lattice import LatticeSpec;"
            "from transmon_harper.chirality import ground_state, bond_currents, count_vortices;"
            "s = LatticeSpec(41, 11, 1.0, 0.3, 0.14 * math.pi); gs = ground_state(s); print(count_vortices(bond_currents(gs, s)))")
    outs = set()
    for v in ("numpy", "numba"):
        env = dict(os.environ, **{_backend.ENV_FLAG: v})
        outs.add(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                                check=True).stdout.strip())
    assert len(outs) == 1


def test_benchmark_runs(capsys):
    sys.path.insert(0, str(__import__("pathlib").Path(__file__).parents[1] / "benchmarks"))
    import bench_kernels

    bench_kernels.main(["--repeat", "1"])
    assert "windowed dtft" in capsys.readouterr().out
