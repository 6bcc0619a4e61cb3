import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from nvcavity import cavity, units
from nvcavity.cavity import CavityMode
from nvcavity.errors import DomainError, NoResonanceError, ValidationError

LAM = 1524e-9
OMEGA = units.omega_from_wavelength(LAM)
PE = units.energy_from_wavelength(LAM)


def mode(kappa=1.4e10, r=0.3, g=0.0, **kw):
    return CavityMode(LAM, kappa, r * kappa, g * kappa, **kw)


def test_critical_coupling_two_photons():
    k = 1.4e10
    m = mode(k, 0.5)
    n = cavity.photons_singlet(m, 0.0, k * PE.joules, PE)
    assert n == pytest.approx(2.0, rel=1e-12)


def test_far_detuned_limit():
    m = mode()
    n0 = cavity.photons_singlet(m, 0.0, 1e-3, PE)
    for d in (1e6 * m.kappa, -1e6 * m.kappa):
        assert cavity.photons_singlet(m, d, 1e-3, PE) < 1e-11 * n0


def test_high_q_mode_photon_number():
    # hand evaluation: 4 kex/kappa^2 * P/(hbar omega) with kex = 0.2 kappa
    m = CavityMode(LAM, 1.407e10, 0.2 * 1.407e10)
    n = cavity.photons_singlet(m, 0.0, 1e-3, PE)
    assert n == pytest.approx(4.36e5, rel=2e-3)
    assert n == pytest.approx(0.8 / 1.407e10 * 1e-3 / oracles.photon_energy_J(LAM), rel=1e-12)


def test_doublet_against_travelling_wave_oracle():
    k = 1.4e10
    m = CavityMode(LAM, k, 0.3 * k, 2 * k)
    d = m.gamma_beta / 2
    n = cavity.photons_doublet(m, d, 1e-4, PE)
    ref = oracles.travelling_wave_photons(k, 0.3 * k, 2 * k, d, 1e-4, PE.joules)
    assert n == pytest.approx(ref, rel=1e-12)


@given(st.floats(-20, 20), st.floats(0.01, 0.5), st.floats(0.0, 8.0))
def test_doublet_and_transmission_match_oracle_everywhere(d, r, g):
    k = 1.0e10
    m = CavityMode(LAM, k, r * k, g * k)
    n = cavity.photons_doublet(m, d * k, 1e-3, PE)
    ref = oracles.travelling_wave_photons(k, r * k, g * k, d * k, 1e-3, PE.joules)
    assert n == pytest.approx(ref, rel=1e-10)
    T = cavity.transmission(m, d * k, "doublet")
    assert T == pytest.approx(oracles.travelling_wave_transmission(k, r * k, g * k, d * k), abs=1e-12)
    assert -1e-12 <= T <= 1 + 1e-12


def test_doublet_symmetric_in_detuning():
    m = mode(g=1.7)
    d = np.linspace(-5, 5, 101) * m.kappa
    a = cavity.photons_doublet(m, d, 1e-3, PE)
    b = cavity.photons_doublet(m, -d, 1e-3, PE)
    assert np.allclose(a, b, rtol=1e-13, atol=0)


@given(st.floats(-1e3, 1e3), st.floats(1e-6, 1.0))
def test_doublet_reduces_to_twice_singlet(d, r):
    m = CavityMode(LAM, 1e10, r * 1e10, 0.0)
    n_d = cavity.photons_doublet(m, d * 1e10, 1e-3, PE)
    n_s = cavity.photons_singlet(m, d * 1e10, 1e-3, PE)
    assert n_d == pytest.approx(2 * n_s, rel=1e-12, abs=0)


@given(st.floats(0, 1e-2), st.floats(0.0, 100.0), st.floats(-30, 30))
def test_linear_in_power_and_nonnegative(p, alpha, d):
    m = mode(g=0.7)
    n = cavity.photons_doublet(m, d * m.kappa, p, PE)
    assert n >= 0
    assert cavity.photons_doublet(m, d * m.kappa, alpha * p, PE) == pytest.approx(alpha * n, rel=1e-12, abs=1e-300)


def test_negative_power_rejected():
    with pytest.raises(DomainError):
        cavity.photons_singlet(mode(), 0.0, -1.0, PE)


def test_transmission_limits():
    m = mode(r=0.5)
    assert cavity.transmission(m, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert cavity.transmission(m, 1e8 * m.kappa) == pytest.approx(1.0, abs=1e-12)
    d = mode(r=0.2, g=3.0)
    assert cavity.transmission(d, 1e8 * d.kappa) == pytest.approx(1.0, abs=1e-12)


def test_doublet_minima_near_split_positions():
    from scipy.optimize import minimize_scalar

    m = mode(r=0.2, g=3.0)
    g = m.gamma_beta / 2
    for sign in (1, -1):
        res = minimize_scalar(lambda x: cavity.transmission(m, x * m.kappa),
                              bracket=(sign * 1.2, sign * 1.5, sign * 1.8), tol=1e-12)
        assert res.x * m.kappa == pytest.approx(sign * g, rel=0.05)


def test_mode_invariants():
    with pytest.raises(DomainError):
        CavityMode(LAM, -1.0, 0.0)
    with pytest.raises(DomainError):
        CavityMode(LAM, 1e10, 2e10)
    with pytest.raises(DomainError):
        CavityMode(LAM, 1e10, 1e9, -1.0)
    with pytest.raises(DomainError):
        CavityMode(LAM, mode_volume=1e-18, group_index=0.5)
    with pytest.raises(DomainError):
        cavity.photons_singlet(CavityMode(LAM), 0.0, 1e-3, PE)


def test_mode_json_round_trip(tmp_path):
    m = mode(g=0.4, mode_volume=1e-18, group_index=1.2, label="x")
    d = m.to_dict()
    assert d["Q_loaded"] == pytest.approx(OMEGA / m.kappa)
    p = tmp_path / "m.json"
    p.write_text(json.dumps(d))
    assert cavity.read_mode(p) == m
    with pytest.raises(ValidationError):
        CavityMode.from_dict({**d, "bogus": 1})


# ---------------------------------------------------------------- per photon

def test_reference_mode_intensities():
    assert cavity.intensity_per_photon(cavity.reference_mode("966nm")) == pytest.approx(5.14e6, rel=0.02)
    assert cavity.intensity_per_photon(cavity.reference_mode("1524nm")) == pytest.approx(2.78e6, rel=0.02)


def test_intensity_scaling_and_field_identity():
    m = cavity.reference_mode("966nm")
    big = CavityMode(m.resonance_wavelength, mode_volume=2 * m.mode_volume, group_index=m.group_index)
    assert cavity.intensity_per_photon(big) == pytest.approx(cavity.intensity_per_photon(m) / 2, rel=1e-15)
    quad = CavityMode(m.resonance_wavelength, mode_volume=4 * m.mode_volume, group_index=m.group_index)
    assert cavity.peak_field_per_photon(quad) == pytest.approx(cavity.peak_field_per_photon(m) / 2, rel=1e-15)
    eps = units.dielectric_constant(2.4)
    e = cavity.peak_field_per_photon(m, eps=eps)
    assert 0.5 * units.C / m.group_index * eps * e**2 == pytest.approx(cavity.intensity_per_photon(m), rel=1e-10)


def test_peak_field_hand_value():
    lam = 966e-9
    v = 29 * (lam / 2.4) ** 3
    eps = 8.8541878128e-12 * 2.4**2
    ref = math.sqrt(oracles.photon_energy_J(lam) / (2 * eps * v))
    assert cavity.peak_field_per_photon(cavity.reference_mode("966nm"), eps=eps) == pytest.approx(ref, rel=1e-9)


def test_unknown_table_mode():
    with pytest.raises(DomainError):
        cavity.reference_mode("800nm")


# ---------------------------------------------------------------- scans and fits

def test_scan_csv_round_trip(tmp_path):
    m = mode(g=2.0)
    s = cavity.synthetic_scan(m, 5 * LAM / 1e5, 64, 2e-3, pl_law={"nvm": lambda n: 1 / (1 + n * 1e-6)},
                              taper_efficiency=0.44)
    p = tmp_path / "scan.csv"
    cavity.write_scan(p, s)
    back = cavity.read_scan(p)
    assert np.allclose(back.wavelengths, s.wavelengths, rtol=1e-15, atol=0)
    assert np.array_equal(back.transmission, s.transmission)
    assert np.array_equal(back.pl_counts["nvm"], s.pl_counts["nvm"])
    assert back.input_power == pytest.approx(2e-3, rel=1e-15)
    assert back.taper_efficiency == 0.44


def test_scan_header_validation(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("wavelength_nm,transmision\n" + "\n".join(f"{1524 + i * 1e-3},1.0" for i in range(20)))
    with pytest.raises(ValidationError, match="transmision"):
        cavity.read_scan(p, input_power=1e-3)
    p.write_text("wavelength_nm\n" + "\n".join(f"{1524 + i * 1e-3}" for i in range(20)))
    with pytest.raises(ValidationError, match="transmission"):
        cavity.read_scan(p, input_power=1e-3)


def test_scan_needs_sixteen_points():
    with pytest.raises(ValidationError):
        cavity.DetuningScan(np.linspace(1, 2, 10), np.ones(10), 1e-3)


def test_singlet_fit_round_trip():
    m = CavityMode(LAM, OMEGA / 88000, 0.2 * OMEGA / 88000)
    s = cavity.synthetic_scan(m, 8 * LAM / 88000, 401)
    fit = cavity.fit_lineshape(s, "singlet")
    assert fit.mode.kappa == pytest.approx(m.kappa, rel=1e-3)
    assert fit.mode.kappa_ex == pytest.approx(m.kappa_ex, rel=1e-3)
    assert fit.mode.resonance_wavelength == pytest.approx(LAM, rel=1e-9)
    regen = cavity.transmission(fit.mode, fit.mode.omega - s.omegas)
    assert math.sqrt(np.mean((regen - s.transmission) ** 2)) < 1e-3


def test_doublet_fit_with_noise():
    k = OMEGA / 85000
    m = CavityMode(LAM, k, 0.25 * k, 5 * k)
    s = cavity.synthetic_scan(m, 12 * LAM / 85000, 801, noise=0.01, seed=3)
    fit = cavity.fit_lineshape(s, "doublet")
    assert fit.mode.kappa == pytest.approx(k, rel=0.05)
    assert fit.mode.gamma_beta == pytest.approx(5 * k, rel=0.05)
    assert fit.mode.kappa_ex <= fit.mode.kappa / 2


def test_unresolved_doublet_fit():
    k = OMEGA / 90000
    m = CavityMode(LAM, k, 0.3 * k, 0.5 * k)
    s = cavity.synthetic_scan(m, 8 * LAM / 90000, 401)
    fit = cavity.fit_lineshape(s, "doublet")
    assert fit.mode.kappa == pytest.approx(k, rel=1e-3)
    assert fit.mode.gamma_beta == pytest.approx(0.5 * k, rel=1e-3)


def test_two_lorentzian_fit_reports_two_q():
    k = OMEGA / 85000
    m = CavityMode(LAM, k, 0.2 * k, 6 * k)
    s = cavity.synthetic_scan(m, 12 * LAM / 85000, 801)
    fit = cavity.fit_lineshape(s, "lorentzian2")
    assert len(fit.q_values) == 2
    for q in fit.q_values:
        assert q == pytest.approx(85000, rel=0.05)


def test_flat_scan_has_no_resonance():
    s = cavity.DetuningScan(np.linspace(1.5e-6, 1.6e-6, 50), np.ones(50), 1e-3)
    with pytest.raises(NoResonanceError):
        cavity.fit_lineshape(s)


def test_undercoupled_branch_selected():
    k = OMEGA / 50000
    over = CavityMode(LAM, k, 0.8 * k)
    s = cavity.synthetic_scan(over, 8 * LAM / 50000, 401)
    fit = cavity.fit_lineshape(s, "singlet")
    # the mirror branch gives the same transmission
    assert fit.mode.kappa_ex == pytest.approx(0.2 * k, rel=1e-3)
