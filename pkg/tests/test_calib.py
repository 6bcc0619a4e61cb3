import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvcavity import calib, cavity, kinetics as kin, units
from nvcavity.cavity import CavityMode
from nvcavity.errors import ConfigurationError, CoverageError, DomainError, ValidationError
from nvcavity.lm import numeric_jacobian

TABLE = kin.reference_coefficients()
GRID = np.logspace(0, 5, 40)
POWERS = (0.4, 1.3, 4.6)
LAM = 1524e-9
OMEGA = units.omega_from_wavelength(LAM)


def doublet_1524():
    k = OMEGA / 85000
    return CavityMode(LAM, k, 0.2 * k, 1.5 * k, label="1524nm")


def law(n):
    return 1.0 / (1.0 + (n / 3e4) ** 1.5)


# ---------------------------------------------------------------- normalisation

def test_normalize_examples():
    assert calib.normalize_and_correct(0.7, 1.0, 0.0) == pytest.approx(0.7)
    assert calib.normalize_and_correct(0.7, 1.0, 0.65) == pytest.approx(0.143, abs=5e-4)
    for b in (0.0, 0.3, 0.99):
        assert calib.normalize_and_correct(123.0, 123.0, b) == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(DomainError):
        calib.normalize_and_correct(1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        calib.normalize_and_correct(1.0, 0.0)


@given(st.floats(0, 0.95), st.floats(0, 10), st.floats(0, 10))
def test_normalize_monotone_affine(b, x, y):
    lo, hi = sorted((x, y))
    assert calib.normalize_and_correct(lo, 2.0, b) <= calib.normalize_and_correct(hi, 2.0, b)


# ---------------------------------------------------------------- compilation

def test_default_taper_efficiency():
    assert calib.default_taper_efficiency(1524e-9) == 0.44
    assert calib.default_taper_efficiency(966e-9) == 0.52


def test_single_on_resonance_sample():
    m = doublet_1524()
    lam = np.linspace(LAM - 1e-11, LAM + 1e-11, 21)  # sample 10 is on resonance
    scan = cavity.DetuningScan(lam, np.ones(21), 1e-3, {"nvm": np.ones(21)})
    ds = calib.compile_dataset([scan], m, 4.1, taper_efficiency=0.44)
    expected = cavity.photons_doublet(m, 0.0, 0.44e-3, units.energy_from_wavelength(LAM))
    assert np.min(np.abs(ds.n_ir / expected - 1)) < 1e-9


def test_compiled_points_lie_on_generating_law():
    m = doublet_1524()
    scans = [cavity.synthetic_scan(m, 6 * LAM / 85000, 201, p, pl_law={"nvm": law, "nv0": law},
                                   taper_efficiency=0.44) for p in (1e-4, 1e-3, 4e-3)]
    ds = calib.compile_dataset(scans, m, 4.1, reference_pl=1.0)
    assert len(ds) == 2 * 3 * 201
    assert np.max(np.abs(ds.pl_norm - law(ds.n_ir))) < 1e-9


def test_compile_invariant_to_order_and_split():
    m = doublet_1524()
    a = cavity.synthetic_scan(m, 6 * LAM / 85000, 200, 1e-3, pl_law={"nvm": law}, taper_efficiency=0.44)
    b = cavity.synthetic_scan(m, 6 * LAM / 85000, 120, 3e-3, pl_law={"nvm": law}, taper_efficiency=0.44)
    one = calib.compile_dataset([a, b], m, 4.1)
    two = calib.compile_dataset([b, a], m, 4.1)
    half1 = cavity.DetuningScan(a.wavelengths[:90], a.transmission[:90], a.input_power,
                                {"nvm": a.pl_counts["nvm"][:90]}, 0.44)
    half2 = cavity.DetuningScan(a.wavelengths[90:], a.transmission[90:], a.input_power,
                                {"nvm": a.pl_counts["nvm"][90:]}, 0.44)
    three = calib.compile_dataset([half2, b, half1], m, 4.1)
    for other in (two, three):
        assert np.array_equal(one.n_ir, other.n_ir)
        assert np.array_equal(one.pl_norm, other.pl_norm)


def test_coverage_error():
    m = doublet_1524()
    lam = np.linspace(LAM + 1e-10, LAM + 2e-10, 30)
    scan = cavity.DetuningScan(lam, np.ones(30), 1e-3, {"nvm": np.ones(30)})
    with pytest.raises(CoverageError):
        calib.compile_dataset([scan], m, 4.1)


def test_dataset_invariants():
    ds = calib.CompiledDataset("x", 1.0, [3.0, 1.0, 2.0], [0.5, 1.0, 0.7], ["NV-"] * 3)
    assert list(ds.n_ir) == [1.0, 2.0, 3.0]
    with pytest.raises(ValidationError):
        calib.CompiledDataset("x", 1.0, [-1.0], [1.0], ["NV-"])
    with pytest.raises(ValidationError):
        calib.CompiledDataset("x", 1.0, [1.0], [1.0], ["NV+"])
    with pytest.raises(DomainError):
        calib.CompiledDataset("x", 1.0, [1.0], [1.0], ["NV-"], background_fraction=1.0)


def test_dataset_csv_round_trip(tmp_path):
    ds = [calib.synth_dataset(TABLE, p, "966nm", GRID[:5], noise=0.01, seed=1) for p in (0.4, 4.6)]
    path = tmp_path / "d.csv"
    calib.write_datasets(path, ds)
    back = calib.read_datasets(path)
    assert len(back) == 2
    for a, b in zip(sorted(ds, key=lambda d: d.green_power), sorted(back, key=lambda d: d.green_power)):
        assert np.array_equal(a.n_ir, b.n_ir) and np.array_equal(a.pl_norm, b.pl_norm)
        assert a.ir_label == b.ir_label


# ---------------------------------------------------------------- synthesis

def test_synth_noiseless_matches_model():
    ds = calib.synth_dataset(TABLE, 4.6, "966nm", GRID)
    pl = calib.model_pl(TABLE.with_ir("966nm"), 4.6, GRID)
    nvm, nv0, _ = kin.normalized_pl(TABLE.with_ir("966nm"), 4.6, GRID)
    assert np.array_equal(ds.select("NV-")[1], pl["NV-"])
    assert np.allclose(pl["NV-"], nvm, rtol=1e-12)
    assert np.allclose(pl["NV0"], nv0, rtol=1e-12)


def test_synth_deterministic_by_seed():
    a = calib.synth_dataset(TABLE, 4.6, "966nm", GRID, noise=0.02, seed=7)
    b = calib.synth_dataset(TABLE, 4.6, "966nm", GRID, noise=0.02, seed=7)
    c = calib.synth_dataset(TABLE, 4.6, "966nm", GRID, noise=0.02, seed=8)
    assert np.array_equal(a.pl_norm, b.pl_norm)
    assert not np.array_equal(a.pl_norm, c.pl_norm)


def test_synth_shape():
    ds = calib.synth_dataset(TABLE, 4.6, "966nm", np.logspace(0, 5, 101))
    n, y = ds.select("NV-")
    i = int(np.argmax(y))
    assert 1e2 <= n[i] <= 1e4 and y[i] > 1 and y[-1] < 0.2


# ---------------------------------------------------------------- sensitivities

@pytest.mark.parametrize("label, power", [("966nm", 4.6), ("1524nm", 0.4)])
def test_sensitivity_matches_finite_differences(label, power):
    c = TABLE.with_ir(label)
    free = [f"K_25_2IR@{label}", f"K_74_1IR@{label}", *calib.SHARED_FREE]
    theta = np.log([c.get(k) for k in free])
    _, jac = calib.model_pl_sensitivity(c, power, GRID, free)

    def f(t):
        pl = calib.model_pl(c.updated(**dict(zip(free, np.exp(t)))), power, GRID)
        return np.concatenate([pl["NV-"], pl["NV0"]])

    fd = numeric_jacobian(f, theta, step=1e-5)
    an = np.vstack([jac["NV-"], jac["NV0"]])
    assert np.max(np.abs(an - fd)) < 1e-6 * max(1.0, np.abs(fd).max())


# ---------------------------------------------------------------- fitting

def test_noiseless_round_trip_from_perturbed_start():
    ds = [calib.synth_dataset(TABLE, p, "966nm", GRID) for p in POWERS]
    free = calib.default_free(ds)
    rng = np.random.default_rng(1)
    start = {k: TABLE.get(k) * math.exp(rng.uniform(-1, 1)) for k in free}
    res = calib.joint_fit(ds, TABLE, start=start)
    assert res.converged
    for k in free:
        assert res.values[k] == pytest.approx(TABLE.get(k), rel=0.01)
    assert np.all(np.diff(res.history) <= 0)
    assert res.residual_rms < 1e-6


@pytest.mark.slow
def test_round_trip_twenty_random_parameter_sets():
    free = calib.default_free([calib.synth_dataset(TABLE, 1.0, "966nm", [1.0])])
    for trial in range(20):
        rng = np.random.default_rng(100 + trial)
        truth = TABLE.updated(**{k: TABLE.get(k) * 10 ** rng.uniform(-1, 1) for k in free})
        ds = [calib.synth_dataset(truth, p, "966nm", GRID) for p in POWERS]
        res = calib.joint_fit(ds, TABLE)
        for k in free:
            assert res.values[k] == pytest.approx(truth.get(k), rel=0.01), (trial, k)


def test_single_point_is_rank_deficient():
    ds = [calib.synth_dataset(TABLE, 4.6, "966nm", [100.0], channels=("NV-",))]
    res = calib.joint_fit(ds, TABLE)
    assert not res.converged
    assert "rank-deficient" in res.message
    assert res.diagnostics["jacobian_rank"] < len(res.free)


def test_label_without_coefficients_is_configuration_error():
    ds = [calib.synth_dataset(TABLE, 4.6, "966nm", GRID[:5])]
    ds[0].ir_label = "800nm"
    with pytest.raises(ConfigurationError):
        calib.joint_fit(ds, TABLE)
    with pytest.raises(ConfigurationError):
        calib.joint_fit([calib.synth_dataset(TABLE, 4.6, "966nm", GRID[:5])], TABLE, free=["K_25_2IR@1524nm"])
    with pytest.raises(ConfigurationError):
        calib.joint_fit([calib.synth_dataset(TABLE, 4.6, "966nm", GRID[:5])], TABLE, loss="huber")


def test_fit_is_deterministic_and_flags_fitted(tmp_path):
    ds = [calib.synth_dataset(TABLE, p, "1524nm", GRID[::4], noise=0.01, seed=i) for i, p in enumerate(POWERS)]
    a = calib.joint_fit(ds, TABLE, restarts=2, seed=3)
    b = calib.joint_fit(ds, TABLE, restarts=2, seed=3)
    assert a.values == b.values
    d = a.to_dict()
    assert d["fitted"]["K^i_25,2-IR@1524nm"] is True
    assert d["fitted"]["K^i_25,2-IR@966nm"] is False
    assert d["fitted"]["K_f^-"] is False
    assert d["provenance"]["seed"] == 3
    assert set(d["fitted_values"]) >= {"K^i_25,1-G", "K_56", "K^r_74,1-IR@1524nm"}


def test_log_loss_round_trip():
    ds = [calib.synth_dataset(TABLE, p, "1524nm", GRID) for p in POWERS]
    res = calib.joint_fit(ds, TABLE.updated(K_56=8e3, K_75=1e3), loss="log")
    assert res.loss == "log"
    for k in res.free:
        assert res.values[k] == pytest.approx(TABLE.get(k), rel=0.01)
