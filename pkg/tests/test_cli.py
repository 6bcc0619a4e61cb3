import hashlib
import json

import numpy as np
import pytest

from nvcavity import calib, cavity, interaction, units
from nvcavity.cli import main, read_table

LAM = 1524e-9


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------- cavity

def test_cavity_fit_doublet_round_trip(tmp_path, capsys):
    scan = tmp_path / "scan.csv"
    assert run(capsys, "scan-synth", "--wavelength-nm", 1524, "--q-loaded", 85000, "--split", 4,
               "--coupling", 0.25, "--span-linewidths", 12, "--points", 801, "--out", scan)[0] == 0
    out = tmp_path / "mode.json"
    code, _, err = run(capsys, "cavity-fit", scan, "--model", "doublet", "--out", out)
    assert code == 0
    d = json.loads(out.read_text())
    assert d["mode"]["Q_loaded"] == pytest.approx(85000, rel=0.01)
    assert d["Q_values"][0] == pytest.approx(85000, rel=0.01)
    assert "Q_loaded" in err
    assert d["provenance"]["inputs"]["scan.csv"] == hashlib.sha256(scan.read_bytes()).hexdigest()
    assert cavity.read_mode(out).gamma_beta == pytest.approx(4 * units.omega_from_wavelength(LAM) / 85000, rel=0.01)


def test_cavity_fit_flat_scan(tmp_path, capsys):
    p = tmp_path / "flat.csv"
    p.write_text("wavelength_nm,transmission\n" + "".join(f"{1524 + i * 1e-3!r},1.0\n" for i in range(40)))
    code, _, err = run(capsys, "cavity-fit", p, "--input-power-mW", 1)
    assert code == 2
    assert "resonance" in err


def test_cavity_fit_bad_header(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("wavelength_nm,trans\n" + "".join(f"{1524 + i * 1e-3!r},1.0\n" for i in range(40)))
    code, _, err = run(capsys, "cavity-fit", p, "--input-power-mW", 1)
    assert code == 1
    assert "'trans'" in err


def test_photons_critical_coupling(tmp_path, capsys):
    omega = units.omega_from_wavelength(LAM)
    k = omega / 1e5
    mode = tmp_path / "m.json"
    mode.write_text(json.dumps(cavity.CavityMode(LAM, k, k / 2).to_dict()))
    power = k * units.energy_from_wavelength(LAM).joules
    code, out, _ = run(capsys, "photons", "--mode", mode, "--power", repr(power))
    assert code == 0
    assert float(out) == pytest.approx(2.0, rel=1e-12)


# ---------------------------------------------------------------- kinetics

def test_sweep_deterministic_and_loadable(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run(capsys, "sweep", "--ir-label", "966nm", "--green-power", 4.6, "--points", 41, "--out", p)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    t = read_table(a)
    assert t["N_IR"].size == 41
    assert np.allclose(t["p1"] + t["p2"] + t["p3"] + t["p4"] + t["p5"] + t["p6"] + t["p7"], 1, atol=1e-12)
    i = int(np.argmax(t["pl_nvm_norm"]))
    assert 1e2 <= t["N_IR"][i] <= 1e4 and t["pl_nvm_norm"][-1] < 0.2
    assert set(t["flag"]) == {"ok"}
    assert a.read_text().startswith("# nvcavity ")


def test_sweep_zero_photons_anchor(tmp_path, capsys):
    p = tmp_path / "z.csv"
    assert run(capsys, "sweep", "--n-values", "0", "--out", p)[0] == 0
    t = read_table(p)
    assert t["pl_nvm_norm"][0] == 1.0 and t["pl_nv0_norm"][0] == 1.0


def test_sweep_without_pumping_is_flagged(tmp_path, capsys):
    p = tmp_path / "s.csv"
    code, _, err = run(capsys, "sweep", "--green-power", 0, "--n-values", "0,10", "--out", p)
    assert code == 2
    assert "not unique" in err
    assert set(read_table(p)["flag"]) == {"non-unique"}


def test_sweep_plot(tmp_path, capsys):
    p = tmp_path / "s.csv"
    assert run(capsys, "sweep", "--points", 11, "--out", p, "--plot")[0] == 0
    assert p.with_suffix(".png").read_bytes()[:4] == b"\x89PNG"


def test_contrast_table(tmp_path, capsys):
    p = tmp_path / "c.csv"
    assert run(capsys, "contrast", "--ir-label", "1524nm", "--green-power", 4.1, "--f-eom", "1e5,5e5,1e6",
               "--out", p)[0] == 0
    t = read_table(p)
    assert np.all(np.diff(t["contrast"]) < 0)
    assert np.all(t["settled"] == 1)
    assert t["omega_eom_rad_s"][0] == pytest.approx(2 * np.pi * 1e5)


def test_contrast_zero_extinction(tmp_path, capsys):
    p = tmp_path / "c.csv"
    assert run(capsys, "contrast", "--ir-label", "1524nm", "--green-power", 4.1, "--extinction-db", 0,
               "--f-eom", "1e5", "--out", p)[0] == 0
    assert read_table(p)["contrast"][0] == pytest.approx(0.0, abs=1e-12)


def test_timedomain_trace(tmp_path, capsys):
    p = tmp_path / "t.csv"
    code, _, err = run(capsys, "timedomain", "--ir-label", "1524nm", "--green-power", 4.1, "--f-eom", "1e5",
                       "--periods", 2, "--samples-per-period", 100, "--out", p)
    assert code == 0
    t = read_table(p)
    assert t["t_s"].size == 201 and t["t_s"][-1] == pytest.approx(2e-5)
    high = t["N_IR"] == 1e6
    # PL is lower while the IR field is on
    assert t["pl_nvm_norm"][high].mean() < t["pl_nvm_norm"][~high].mean()
    assert "contrast" in err


# ---------------------------------------------------------------- thresholds and cross sections

def test_thresholds_report(tmp_path, capsys):
    out = tmp_path / "th.json"
    code, text, _ = run(capsys, "thresholds", "--out", out)
    assert code == 0
    d = json.loads(out.read_text())
    th = d["thresholds_eV"]
    assert th["IP(1E->2E)"]["eV"] == pytest.approx(2.27, abs=0.01)
    assert th["IP(3E->2A2)"]["eV"] == pytest.approx(2.86, abs=0.01)
    assert d["delta_0_lower_bound_eV"] == pytest.approx(0.58, abs=0.01)
    assert th["R(4A2->3A2)"] == {"eV": pytest.approx(2.01, abs=0.01), "kind": "upper"}
    assert "K25" in text
    active = {s["process"] for s in d["selection"] if s["active"]}
    assert active == {"K25", "K51", "K74"}


def test_thresholds_bad_ledger(tmp_path, capsys):
    p = tmp_path / "l.json"
    p.write_text(json.dumps({"ip_3A2_2E": 2.65, "nonsense": 1}))
    code, _, err = run(capsys, "thresholds", "--ledger", p, "--out", tmp_path / "o.json")
    assert code == 1 and "nonsense" in err


def test_xsection(tmp_path, capsys):
    out = tmp_path / "s.json"
    assert run(capsys, "xsection", "--ir-label", "1524nm", "--gamma1", "0.38", "--gamma2", "0.20",
               "--out", out)[0] == 0
    cs = json.loads(out.read_text())["cross_sections"]
    assert cs["sigma_1"]["value"] == pytest.approx(1.8e-26, rel=0.05)
    assert cs["sigma_2"]["value"] == pytest.approx(1.1e-57, rel=0.10)


def test_xsection_median_from_file(tmp_path, capsys):
    g = tmp_path / "g.json"
    g.write_text(json.dumps({"gamma_1": [0.11, 0.29, 0.45]}))
    out = tmp_path / "s.json"
    assert run(capsys, "xsection", "--ir-label", "966nm", "--gamma", g, "--out", out)[0] == 0
    d = json.loads(out.read_text())
    assert d["gamma_median"]["1"] == 0.29
    assert d["cross_sections"]["sigma_1"]["value"] == pytest.approx(7.8e-25, rel=0.05)


def test_grid_and_gamma(tmp_path, capsys):
    grid = tmp_path / "g.csv"
    assert run(capsys, "grid", "--r-range", "0,2e-6", "--z-range=-1e-6,1e-6", "--nr", 41, "--nz", 41,
               "--ir", "1e-6,0,3e-7,4e-7", "--nv", "1.1e-6,1e-7,2.5e-7,3.5e-7",
               "--excitation=0.9e-6,1.5e-6,-0.2e-6,0.5e-6", "--out", grid)[0] == 0
    g = interaction.read_grid(grid)
    out = tmp_path / "gamma.json"
    code, text, _ = run(capsys, "gamma", grid, "--p", 1, 2, "--out", out)
    assert code == 0
    d = json.loads(out.read_text())
    assert d["gamma"]["1"] == interaction.confinement_factor(g, 1)
    assert d["gamma"]["2"] <= d["gamma"]["1"]
    assert "Gamma^(2)" in text


# ---------------------------------------------------------------- synthesis and fitting

def test_synth_then_fit(tmp_path, capsys):
    data = tmp_path / "d.csv"
    assert run(capsys, "synth", "--ir-label", "1524nm", "--points", 40, "--out", data)[0] == 0
    ds = calib.read_datasets(data)
    assert sorted(d.green_power for d in ds) == [0.4, 1.3, 4.6]
    out = tmp_path / "fit.json"
    code, _, err = run(capsys, "fit", data, "--out", out)
    assert code == 0, err
    d = json.loads(out.read_text())
    assert d["converged"] and d["residual_rms"] < 1e-8
    assert d["fitted_values"]["K_56"] == pytest.approx(4e3, rel=1e-3)
    assert "d.csv" in d["provenance"]["inputs"]


def test_fit_rank_deficient_exit_code(tmp_path, capsys):
    data = tmp_path / "d.csv"
    assert run(capsys, "synth", "--n-min", 100, "--n-max", 100, "--points", 1, "--green-powers", "4.6",
               "--out", data)[0] == 0
    code, _, err = run(capsys, "fit", data, "--out", tmp_path / "f.json")
    assert code == 3
    assert "rank-deficient" in err


def test_synth_seed_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        run(capsys, "synth", "--noise", 0.02, "--seed", 5, "--points", 10, "--out", p)
    assert a.read_bytes() == b.read_bytes()
    assert "# seed: 5" in a.read_text()


# ---------------------------------------------------------------- configuration

def test_config_rejects_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"green_power_mW": 4.6, "colour": "green"}))
    code, _, err = run(capsys, "sweep", "--config", cfg, "--out", tmp_path / "s.csv")
    assert code == 1 and "colour" in err


def test_config_missing_file_reference(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("coefficients: nowhere.json\n")
    code, _, err = run(capsys, "sweep", "--config", cfg, "--out", tmp_path / "s.csv")
    assert code == 1 and "nowhere.json" in err


def test_config_from_environment(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("ir_label: 1524nm\ngreen_power_mW: 4.1\nsweep:\n  n_values: [0, 1000000]\n")
    monkeypatch.setenv("NVCAVITY_CONFIG", str(cfg))
    out = tmp_path / "s.csv"
    assert run(capsys, "sweep", "--out", out)[0] == 0
    t = read_table(out)
    assert list(t["N_IR"]) == [0.0, 1e6]
    assert "c.yaml" in out.read_text().splitlines()[2]


def test_coefficient_file_round_trip(tmp_path, capsys):
    from nvcavity import kinetics

    c = tmp_path / "coeffs.json"
    c.write_text(json.dumps(kinetics.reference_coefficients().to_dict()))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "sweep", "--points", 5, "--out", a)
    run(capsys, "sweep", "--points", 5, "--coeffs", c, "--out", b)
    ta, tb = read_table(a), read_table(b)
    assert np.array_equal(ta["pl_nvm_norm"], tb["pl_nvm_norm"])
