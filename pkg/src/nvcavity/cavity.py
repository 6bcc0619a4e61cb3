"""Coupled-mode model of a fiber-taper-coupled microdisk resonance.

Detuning convention: ``delta = omega_cav - omega`` (rad/s). Rates are
energy decay rates in rad/s.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks

from . import units
from .errors import DomainError, FitError, NoResonanceError, ValidationError
from .lm import levenberg_marquardt
from .units import PhotonEnergy


@dataclass(frozen=True)
class CavityMode:
    """A whispering-gallery resonance.

    Line parameters (``kappa``, ``kappa_ex``, ``gamma_beta``) and figures of
    merit (``mode_volume``, ``group_index``) are each optional so that a
    mode can come from a lineshape fit alone or from a mode-solver table
    alone. Operations needing a missing group raise ``DomainError``.
    """

    resonance_wavelength: float
    kappa: float | None = None
    kappa_ex: float | None = None
    gamma_beta: float = 0.0
    mode_volume: float | None = None
    group_index: float | None = None
    label: str = ""

    def __post_init__(self):
        if not self.resonance_wavelength > 0:
            raise DomainError("resonance_wavelength must be positive")
        if self.kappa is not None:
            if not self.kappa > 0:
                raise DomainError(f"kappa must be positive, got {self.kappa!r}")
            kex = 0.0 if self.kappa_ex is None else self.kappa_ex
            if not 0 <= kex <= self.kappa:
                raise DomainError("kappa_ex must satisfy 0 <= kappa_ex <= kappa")
        if not self.gamma_beta >= 0:
            raise DomainError("gamma_beta must be >= 0")
        if self.mode_volume is not None and not self.mode_volume > 0:
            raise DomainError("mode_volume must be positive")
        if self.group_index is not None and not self.group_index >= 1:
            raise DomainError("group_index must be >= 1")

    @property
    def omega(self) -> float:
        return units.omega_from_wavelength(self.resonance_wavelength)

    @property
    def photon_energy(self) -> PhotonEnergy:
        return units.energy_from_wavelength(self.resonance_wavelength)

    @property
    def q_loaded(self) -> float:
        self._require_line()
        return self.omega / self.kappa

    def _require_line(self):
        if self.kappa is None or self.kappa_ex is None:
            raise DomainError(f"mode {self.label!r} has no fitted line parameters")

    def _require_fom(self):
        if self.mode_volume is None or self.group_index is None:
            raise DomainError(f"mode {self.label!r} lacks mode_volume/group_index")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["Q_loaded"] = self.q_loaded if self.kappa is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CavityMode":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known - {"Q_loaded"}
        if extra:
            raise ValidationError(f"unknown CavityMode field(s): {sorted(extra)}")
        return cls(**{k: v for k, v in d.items() if k in known})


def reference_mode(label: str, n_dia: float = units.N_DIAMOND, **line) -> CavityMode:
    """Mode-solver figures of merit for the two IR modes used in the experiments.

    Mode volumes are 29 and 12 in units of (lambda/n_dia)**3 with group
    indices 1.58 and 1.14. Line parameters may be passed through ``line``.
    """
    table = {"966nm": (966e-9, 29.0, 1.58), "1524nm": (1524e-9, 12.0, 1.14)}
    try:
        lam, v_units, n_g = table[label]
    except KeyError:
        raise DomainError(f"no tabulated mode {label!r}; choose from {sorted(table)}") from None
    return CavityMode(
        resonance_wavelength=lam,
        mode_volume=v_units * (lam / n_dia) ** 3,
        group_index=n_g,
        label=label,
        **line,
    )


# ---------------------------------------------------------------- photon number

def _photon_flux(power, photon_energy: PhotonEnergy):
    return np.asarray(power, dtype=float) / photon_energy.joules


def photons_singlet(mode: CavityMode, detuning, power, photon_energy: PhotonEnergy):
    """Mean intracavity photon number of a travelling-wave (singlet) mode."""
    mode._require_line()
    if np.any(np.asarray(power) < 0):
        raise DomainError("power must be >= 0")
    d = np.asarray(detuning, dtype=float)
    gain = mode.kappa_ex / ((mode.kappa / 2) ** 2 + d * d)
    return gain * _photon_flux(power, photon_energy)


def photons_doublet(mode: CavityMode, detuning, power, photon_energy: PhotonEnergy):
    """Mean intracavity photon number of a backscatter-split (doublet) mode.

    Coherent sum of the two standing-wave amplitudes, each coupled at
    ``kappa_ex / 2``.
    """
    mode._require_line()
    if np.any(np.asarray(power) < 0):
        raise DomainError("power must be >= 0")
    d = np.asarray(detuning, dtype=float)
    half = mode.kappa / 2
    s = math.sqrt(mode.kappa_ex / 2)
    amp = s / (half - 1j * (d + mode.gamma_beta / 2)) + s / (half - 1j * (d - mode.gamma_beta / 2))
    return (amp.real**2 + amp.imag**2) * _photon_flux(power, photon_energy)


def intracavity_photons(mode: CavityMode, detuning, power, photon_energy, model="auto"):
    if model == "auto":
        model = "doublet" if mode.gamma_beta > 0 else "singlet"
    if model == "singlet":
        return photons_singlet(mode, detuning, power, photon_energy)
    if model == "doublet":
        return photons_doublet(mode, detuning, power, photon_energy)
    raise DomainError(f"unknown mode model {model!r}")


def transmission(mode: CavityMode, detuning, model="auto"):
    """Power transmission past the coupler, |t|**2."""
    mode._require_line()
    if model == "auto":
        model = "doublet" if mode.gamma_beta > 0 else "singlet"
    d = np.asarray(detuning, dtype=float)
    half = mode.kappa / 2
    if model == "singlet":
        t = 1 - mode.kappa_ex / (half - 1j * d)
    elif model == "doublet":
        k = mode.kappa_ex / 2
        g = mode.gamma_beta / 2
        t = 1 - k / (half - 1j * (d + g)) - k / (half - 1j * (d - g))
    else:
        raise DomainError(f"unknown mode model {model!r}")
    return t.real**2 + t.imag**2


# ---------------------------------------------------------------- per photon

def intensity_per_photon(mode: CavityMode, photon_energy: PhotonEnergy | None = None) -> float:
    """Peak single-photon intensity, c*hbar*omega / (4 n_g V_o), in W/m^2."""
    mode._require_fom()
    pe = photon_energy or mode.photon_energy
    return units.C * pe.joules / (4.0 * mode.group_index * mode.mode_volume)


def peak_field_per_photon(mode: CavityMode, photon_energy: PhotonEnergy | None = None,
                          eps: float | None = None) -> float:
    """Peak single-photon field amplitude sqrt(hbar*omega / (2 eps V_o)) in V/m."""
    mode._require_fom()
    pe = photon_energy or mode.photon_energy
    eps = units.CONSTANTS.diamond_permittivity if eps is None else eps
    if not eps > 0:
        raise DomainError("permittivity must be positive")
    return math.sqrt(pe.joules / (2.0 * eps * mode.mode_volume))


# ---------------------------------------------------------------- scans

@dataclass
class DetuningScan:
    wavelengths: np.ndarray
    transmission: np.ndarray
    input_power: float
    pl_counts: dict = field(default_factory=dict)
    taper_efficiency: float | None = None

    MIN_POINTS = 16

    def __post_init__(self):
        self.wavelengths = np.asarray(self.wavelengths, dtype=float)
        self.transmission = np.asarray(self.transmission, dtype=float)
        self.pl_counts = {k: np.asarray(v, dtype=float) for k, v in self.pl_counts.items()}
        n = self.wavelengths.size
        if n < self.MIN_POINTS:
            raise ValidationError(f"scan needs at least {self.MIN_POINTS} points, got {n}")
        if self.transmission.size != n or any(v.size != n for v in self.pl_counts.values()):
            raise ValidationError("scan columns have unequal lengths")
        if np.any(np.diff(self.wavelengths) <= 0):
            order = np.argsort(self.wavelengths, kind="stable")
            self.wavelengths = self.wavelengths[order]
            self.transmission = self.transmission[order]
            self.pl_counts = {k: v[order] for k, v in self.pl_counts.items()}
            if np.any(np.diff(self.wavelengths) <= 0):
                raise ValidationError("scan wavelengths must be distinct")
        if not self.input_power > 0:
            raise ValidationError("input_power must be positive")

    @property
    def omegas(self) -> np.ndarray:
        return units.omega_from_wavelength(self.wavelengths)


SCAN_REQUIRED = ("wavelength_nm", "transmission")
SCAN_OPTIONAL = ("pl_nv0", "pl_nvm")


def _data_lines(fh):
    return (line for line in fh if line.strip() and not line.lstrip().startswith("#"))


def read_scan(path, input_power: float | None = None) -> DetuningScan:
    """Read a scan CSV and its ``.json`` sidecar (``input_power_mW``...)."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(_data_lines(fh))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        for col in header:
            if col not in SCAN_REQUIRED + SCAN_OPTIONAL:
                raise ValidationError(f"{path}: unexpected column {col!r}")
        for col in SCAN_REQUIRED:
            if col not in header:
                raise ValidationError(f"{path}: missing column {col!r}")
        rows = [r for r in reader]
    try:
        data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric or ragged data ({exc})") from None
    cols = {h: data[:, i] for i, h in enumerate(header)}
    side = {}
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        side = json.loads(sidecar.read_text())
    if input_power is None:
        if "input_power_mW" not in side:
            raise ValidationError(f"{path}: input power not given and no sidecar {sidecar.name}")
        input_power = float(side["input_power_mW"]) * 1e-3
    pl = {k[3:]: cols[k] for k in SCAN_OPTIONAL if k in cols}
    return DetuningScan(
        wavelengths=cols["wavelength_nm"] * 1e-9,
        transmission=cols["transmission"],
        input_power=input_power,
        pl_counts=pl,
        taper_efficiency=side.get("taper_transmission_efficiency"),
    )


def write_scan(path, scan: DetuningScan):
    path = Path(path)
    header = ["wavelength_nm", "transmission"] + [f"pl_{k}" for k in sorted(scan.pl_counts)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(scan.wavelengths.size):
            row = [scan.wavelengths[i] * 1e9, scan.transmission[i]]
            row += [scan.pl_counts[k][i] for k in sorted(scan.pl_counts)]
            w.writerow([repr(float(v)) for v in row])
    side = {"input_power_mW": scan.input_power * 1e3}
    if scan.taper_efficiency is not None:
        side["taper_transmission_efficiency"] = scan.taper_efficiency
    path.with_suffix(".json").write_text(json.dumps(side, indent=2) + "\n")


def synthetic_scan(mode: CavityMode, span: float, n: int = 401, input_power=1e-3,
                   model="auto", noise=0.0, seed=0, pl_law=None,
                   taper_efficiency: float = 1.0) -> DetuningScan:
    """Sample ``transmission`` over ``resonance +/- span`` (wavelength, m).

    ``pl_law`` maps a dict ``{channel: f(N)}`` onto PL counts using the
    intracavity photon number at each sample; the power reaching the
    cavity is ``input_power * taper_efficiency``.
    """
    lam = np.linspace(mode.resonance_wavelength - span, mode.resonance_wavelength + span, n)
    delta = mode.omega - units.omega_from_wavelength(lam)
    T = transmission(mode, delta, model)
    if noise:
        T = T + np.random.default_rng(seed).normal(0.0, noise, T.size)
    pl = {}
    if pl_law:
        N = [intracavity_photons(mode, delta[i], input_power * taper_efficiency,
                                 units.energy_from_wavelength(lam[i]), model)
             for i in range(n)]
        pl = {ch: np.array([f(x) for x in N]) for ch, f in pl_law.items()}
    return DetuningScan(lam, T, input_power, pl, taper_efficiency)


# ---------------------------------------------------------------- fitting

@dataclass
class LineshapeFit:
    mode: CavityMode
    model: str
    rms: float
    iterations: int
    converged: bool
    q_values: tuple

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.to_dict(),
            "model": self.model,
            "residual_rms": self.rms,
            "iterations": self.iterations,
            "converged": self.converged,
            "Q_values": list(self.q_values),
        }


def _dip_seed(omega, T):
    """Deterministic seed: dip centres, FWHM and depth from the raw curve."""
    depth = 1.0 - T
    i0 = int(np.argmin(T))
    half = depth[i0] / 2
    # FWHM walking out from the minimum
    lo = i0
    while lo > 0 and depth[lo] > half:
        lo -= 1
    hi = i0
    while hi < T.size - 1 and depth[hi] > half:
        hi += 1
    fwhm = abs(omega[hi] - omega[lo])
    dw = np.median(np.abs(np.diff(omega)))
    fwhm = max(fwhm, 2 * dw)
    prominence = 0.25 * depth[i0]
    peaks, _ = find_peaks(depth, prominence=prominence)
    return i0, fwhm, peaks


def _lorentz2_model(p, omega):
    w1, w2, g1, g2, a1, a2 = p
    return 1 - a1 / (1 + ((omega - w1) / (g1 / 2)) ** 2) - a2 / (1 + ((omega - w2) / (g2 / 2)) ** 2)


def fit_lineshape(scan: DetuningScan, model: str = "singlet", *, min_depth: float = 0.02,
                  max_iter: int = 400, mode_volume=None, group_index=None, label="") -> LineshapeFit:
    """Least-squares fit of a transmission scan.

    ``model`` is ``singlet`` or ``doublet`` (coupled-mode, canonical) or
    ``lorentzian2`` (two independent Lorentzian dips, reports one Q per
    dip). The under-coupled branch ``kappa_ex <= kappa/2`` is selected,
    since transmission alone cannot tell it from its over-coupled mirror.
    """
    T = scan.transmission
    if T.max() - T.min() < min_depth:
        raise NoResonanceError(
            f"no resonance: transmission contrast {T.max() - T.min():.3g} below floor {min_depth}")
    omega = scan.omegas
    i0, fwhm, peaks = _dip_seed(omega, T)
    w_ref = omega[i0]
    scale = fwhm
    x = (omega - w_ref) / scale

    def frac(u):
        return 0.5 / (1.0 + np.exp(-u))

    if model == "lorentzian2":
        return _fit_lorentz2(scan, omega, T, peaks, i0, fwhm, max_iter, mode_volume, group_index, label)

    tmin = max(T[i0], 0.0)
    if model == "singlet":
        r0 = min(max((1 - math.sqrt(tmin)) / 2, 1e-3), 0.499)
        seeds = [np.array([0.0, 0.0, math.log(r0 / (0.5 - r0))])]

        def unpack(p):
            return p[0], scale * math.exp(p[1]), frac(p[2]), 0.0
    elif model == "doublet":
        seeds = []
        if len(peaks) >= 2:
            top = peaks[np.argsort((1 - T)[peaks])[-2:]]
            wa, wb = sorted(omega[top])
            sep = abs(wb - wa)
            centre = ((wa + wb) / 2 - w_ref) / scale
            r0 = min(max(1 - math.sqrt(max(T[top].min(), 0.0)), 1e-3), 0.499)
            seeds.append(np.array([centre, 0.0, math.log(r0 / (0.5 - r0)), math.log(sep / scale)]))
        r0 = min(max((1 - math.sqrt(tmin)) / 2, 1e-3), 0.499)
        for g in (0.3, 1.0):
            seeds.append(np.array([0.0, math.log(0.8), math.log(r0 / (0.5 - r0)), math.log(g)]))

        def unpack(p):
            return p[0], scale * math.exp(p[1]), frac(p[2]), scale * math.exp(p[3])
    else:
        raise DomainError(f"unknown lineshape model {model!r}")

    def build(p):
        c, kappa, r, gb = unpack(p)
        return c, kappa, r * kappa, gb

    def resid(p):
        c, kappa, kex, gb = build(p)
        d = c - x  # detuning in units of `scale`
        half = kappa / scale / 2
        k = kex / scale
        if model == "singlet":
            t = 1 - k / (half - 1j * d)
        else:
            g = gb / scale / 2
            t = 1 - (k / 2) / (half - 1j * (d + g)) - (k / 2) / (half - 1j * (d - g))
        return (t.real**2 + t.imag**2) - T

    best = None
    for s in seeds:
        res = levenberg_marquardt(resid, s, max_iter=max_iter, ftol=1e-15, xtol=1e-13, gtol=1e-16)
        if best is None or res.cost < best.cost:
            best = res
    c, kappa, kex, gb = build(best.x)
    w_cav = w_ref + c * scale
    mode = CavityMode(
        resonance_wavelength=float(units.wavelength_from_omega(w_cav)),
        kappa=float(kappa), kappa_ex=float(min(kex, kappa)), gamma_beta=float(gb),
        mode_volume=mode_volume, group_index=group_index, label=label,
    )
    rms = math.sqrt(2 * best.cost / T.size)
    if not best.converged:
        raise FitError(f"lineshape fit did not converge after {best.iterations} iterations",
                       best=LineshapeFit(mode, model, rms, best.iterations, False, (mode.q_loaded,)))
    q = (mode.q_loaded,) if model == "singlet" else (mode.q_loaded, mode.q_loaded)
    return LineshapeFit(mode, model, rms, best.iterations, True, q)


def _fit_lorentz2(scan, omega, T, peaks, i0, fwhm, max_iter, mode_volume, group_index, label):
    w_ref = omega[i0]
    scale = fwhm
    x = (omega - w_ref) / scale
    if len(peaks) >= 2:
        top = peaks[np.argsort((1 - T)[peaks])[-2:]]
        c1, c2 = sorted(x[top])
        a1, a2 = (1 - T[top])[np.argsort(x[top])]
    else:
        c1, c2, a1, a2 = -0.3, 0.3, (1 - T[i0]) / 2, (1 - T[i0]) / 2
    p0 = np.array([c1, c2, 0.0, 0.0, a1, a2])

    def resid(p):
        q = p.copy()
        q[2:4] = np.exp(p[2:4])
        return _lorentz2_model(q, x) - T

    res = levenberg_marquardt(resid, p0, max_iter=max_iter, ftol=1e-15, xtol=1e-13, gtol=1e-16)
    c1, c2 = res.x[:2]
    g1, g2 = np.exp(res.x[2:4]) * scale
    a1, a2 = res.x[4:6]
    w1, w2 = w_ref + c1 * scale, w_ref + c2 * scale
    kappa = (g1 + g2) / 2
    # each standing-wave dip has depth 1-(1-r)**2 with r = kappa_ex/kappa
    r = 1 - math.sqrt(max(1 - (a1 + a2) / 2, 0.0))
    mode = CavityMode(
        resonance_wavelength=float(units.wavelength_from_omega((w1 + w2) / 2)),
        kappa=float(kappa), kappa_ex=float(min(max(r, 0.0), 1.0) * kappa), gamma_beta=float(abs(w2 - w1)),
        mode_volume=mode_volume, group_index=group_index, label=label,
    )
    rms = math.sqrt(2 * res.cost / T.size)
    q = (float(w1 / g1), float(w2 / g2))
    if not res.converged:
        raise FitError("two-Lorentzian fit did not converge",
                       best=LineshapeFit(mode, "lorentzian2", rms, res.iterations, False, q))
    return LineshapeFit(mode, "lorentzian2", rms, res.iterations, True, q)


def read_mode(path) -> CavityMode:
    d = json.loads(Path(path).read_text())
    if "mode" in d and isinstance(d["mode"], dict):
        d = d["mode"]
    d = {k: v for k, v in d.items() if k != "provenance"}
    return CavityMode.from_dict(d)
