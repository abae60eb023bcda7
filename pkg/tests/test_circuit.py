import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import TABLE_VALUES, j1_mpmath, sig3
from transmon_harper import circuit as cm
from transmon_harper.circuit import PHI0, CircuitDomainError, FluxBias, FluxRangeError, RawCircuitParams


def test_table_has_sixteen_rows(typical):
    assert len(cm.table_rows(typical)) == 16


@pytest.mark.parametrize("sym", list(TABLE_VALUES))
def test_table_value(typical, sym):
    rows = {r[0]: r[2] for r in cm.table_rows(typical)}
    want = TABLE_VALUES[sym]
    got = rows[sym]
    if isinstance(want, tuple):
        assert (sig3(got[0]), sig3(got[1])) == want
    else:
        assert sig3(got) == want


@pytest.mark.parametrize("x", [0.0, 1e-6, 0.5, 1.8411837813406593, 3.0, 7.99, 8.0, 8.01, 15.3, 30.0, 49.9, 50.0])
def test_bessel_against_mpmath(x):
    for s in (1, -1):
        assert cm.bessel_j1(s * x) == pytest.approx(j1_mpmath(s * x), abs=1e-13)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50, allow_nan=False))
def test_bessel_random(x):
    assert abs(cm.bessel_j1(x) - j1_mpmath(x)) <= 1e-13


def test_bessel_domain():
    with pytest.raises(CircuitDomainError):
        cm.bessel_j1(50.5)


def test_bessel_array_matches_scalar():
    xs = np.linspace(-40, 40, 41)
    assert np.allclose(cm.bessel_j1(xs), [cm.bessel_j1(float(x)) for x in xs], atol=0, rtol=0)


def test_j1_argmax_is_stationary():
    h = 1e-5
    d = (cm.bessel_j1(cm.J1_ARGMAX + h) - cm.bessel_j1(cm.J1_ARGMAX - h)) / (2 * h)
    assert abs(d) < 1e-9


def test_mutual_inductance_ends(typical):
    assert cm.mutual_inductance(0.0, typical) * 1e12 == pytest.approx(-18.8, abs=0.05)
    assert cm.mutual_inductance(PHI0 / 2, typical) * 1e12 == pytest.approx(36.8, abs=0.05)


def test_mutual_inductance_zero_at_quarter(typical):
    assert abs(cm.mutual_inductance(PHI0 / 4, typical)) < 1e-25


@pytest.mark.filterwarnings("ignore:L0 > L_T")
def test_singular_network():
    raw = RawCircuitParams(7.9e-9, 8.3e-9, 0.4e-9, 91e-15, 0.2e-9, 180e-12)
    # L_T + 2 L0 cos = 0 at cos = -1
    with pytest.raises(CircuitDomainError):
        cm.mutual_inductance(PHI0 / 2, raw)


def test_raw_params_positive():
    with pytest.raises(CircuitDomainError):
        RawCircuitParams(7.9e-9, 8.3e-9, 1.3e-9, -1.0, 210e-12, 180e-12)


def test_raw_params_warns_large_self_inductance():
    with pytest.warns(UserWarning):
        RawCircuitParams(7.9e-9, 8.3e-9, 1.3e-9, 91e-15, 400e-12, 180e-12)


def test_flux_bias_validation():
    with pytest.raises(CircuitDomainError):
        FluxBias(phi_odd=0.6 * PHI0)
    with pytest.raises(CircuitDomainError):
        FluxBias(gamma=-math.pi)


def test_column_coupling_extremes(typical):
    t_y = cm.column_tunneling(typical)
    top = FluxBias(phi_bar=PHI0 / 4, phi_eff=cm.J1_ARGMAX * PHI0 / (2 * math.pi))
    assert cm.to_mhz(abs(cm.column_coupling(t_y, top))) == pytest.approx(5.25, abs=0.005)
    assert cm.column_coupling(t_y, FluxBias()) == 0.0


def test_omega_oe_is_difference(typical):
    d = cm.derive_params(typical)
    assert d.omega_oe == pytest.approx(d.omega_odd - d.omega_even, rel=1e-15)
    assert d.omega_p_odd == pytest.approx(math.sqrt(8 * d.E_C * d.E_J_odd) / cm.HBAR, rel=1e-12)


def test_solve_row_flux_zero_coupling(typical):
    po, pe = cm.solve_row_flux(0.0, typical)
    assert po == pytest.approx(PHI0 / 4, rel=1e-9)
    assert pe == pytest.approx(PHI0 / 4, rel=1e-9)


@pytest.mark.parametrize("parity", ["odd", "even"])
def test_solve_parity_flux_endpoints(typical, parity):
    lo, hi = cm.row_coupling_range(typical, parity)
    assert cm.solve_parity_flux(cm._row_g(0.0, typical, parity), typical, parity) == 0.0
    assert cm.solve_parity_flux(cm._row_g(PHI0 / 2, typical, parity), typical, parity) == PHI0 / 2
    assert lo < 0 < hi


@settings(max_examples=50, deadline=None)
@given(st.floats(-12.0, 6.5))
def test_solve_row_flux_round_trip(f_mhz):
    typical = RawCircuitParams.typical()
    g_x = -cm.mhz(f_mhz)
    po, pe = cm.solve_row_flux(g_x, typical)
    assert cm._row_g(po, typical, "odd") == pytest.approx(-g_x, abs=1e-6 * cm.mhz(1))
    assert cm._row_g(pe, typical, "even") == pytest.approx(-g_x, abs=1e-6 * cm.mhz(1))


def test_solve_row_flux_out_of_range(typical):
    # the odd-row extreme lies beyond the even-row range
    lo, _ = cm.row_coupling_range(typical, "odd")
    with pytest.raises(FluxRangeError):
        cm.solve_row_flux(-lo, typical)
    with pytest.raises(FluxRangeError):
        cm.solve_row_flux(cm.mhz(50), typical)


def test_target_four_mhz_reachable(typical):
    po, pe = cm.solve_row_flux(cm.mhz(4), typical)
    assert 0 < po < PHI0 / 2 and 0 < pe < PHI0 / 2


@pytest.mark.parametrize("n,m", [(0, 0), (3, 1), (-2, 2), (5, -1)])
def test_flux_drive_phase(n, m):
    g = 0.7
    want = -n * g if m % 2 else n * g
    assert cm.flux_drive_phase(n, m, g) == want


def test_flux_drive_waveform():
    b = FluxBias(phi_bar=0.1 * PHI0, phi_eff=0.2 * PHI0, gamma=0.5)
    t = np.linspace(0, 1e-8, 5)
    w = 2 * math.pi * 145e6
    assert np.allclose(cm.flux_drive(2, 1, t, b, w), b.phi_bar + b.phi_eff * np.cos(w * t - 1.0))


def test_weak_coupling_warning_silent_for_typical(typical):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        cm.derive_params(typical)


def test_format_table_lists_everything(typical):
    txt = cm.format_table(cm.table_rows(typical))
    assert txt.count("\n") == 15 and "5.25" in txt
