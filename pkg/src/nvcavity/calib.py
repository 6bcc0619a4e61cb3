"""From detuning scans to PL-versus-photon-number data, and back to rates.

``compile_dataset`` converts each scan sample into an intracavity photon
number with the cavity model and pairs it with normalised PL.
``joint_fit`` then adjusts the IR and green coefficients of the seven-level
model against every compiled dataset at once.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import units
from .cavity import CavityMode, DetuningScan, intracavity_photons
from .errors import ConfigurationError, CoverageError, DomainError, ValidationError
from .kinetics import (GREEN_KEYS, INTERNAL_KEYS, IR_KEYS, IRCoefficients, RateCoefficients,
                      _generators_batch, _stationary_batch, stationary)
from .lm import levenberg_marquardt

CHANNELS = ("NV-", "NV0")
SCAN_CHANNEL = {"nvm": "NV-", "nv0": "NV0"}
DATASET_COLUMNS = ("n_ir", "pl_norm", "channel", "green_power_mW", "ir_label")

# fibre-taper transmission at the two IR bands
TAPER_EFFICIENCY = {"1520nm": 0.44, "980nm": 0.52}


def default_taper_efficiency(wavelength: float) -> float:
    return TAPER_EFFICIENCY["980nm"] if wavelength < 1.25e-6 else TAPER_EFFICIENCY["1520nm"]


@dataclass(eq=False)
class CompiledDataset:
    ir_label: str
    green_power: float  # mW
    n_ir: np.ndarray
    pl_norm: np.ndarray
    channel: np.ndarray
    background_fraction: float = 0.0

    def __post_init__(self):
        self.n_ir = np.asarray(self.n_ir, dtype=float)
        self.pl_norm = np.asarray(self.pl_norm, dtype=float)
        self.channel = np.asarray(self.channel, dtype=object)
        n = self.n_ir.size
        if self.pl_norm.size != n or self.channel.size != n:
            raise ValidationError("dataset columns have unequal lengths")
        if n == 0:
            raise ValidationError("dataset is empty")
        if np.any(self.n_ir < 0) or not np.all(np.isfinite(self.n_ir)):
            raise ValidationError("photon numbers must be finite and >= 0")
        if not np.all(np.isfinite(self.pl_norm)):
            raise ValidationError("normalised PL must be finite")
        bad = set(self.channel) - set(CHANNELS)
        if bad:
            raise ValidationError(f"unknown PL channel(s) {sorted(bad)}; expected {CHANNELS}")
        if not self.green_power >= 0:
            raise ValidationError("green power must be >= 0")
        if not 0 <= self.background_fraction < 1:
            raise DomainError("background fraction must lie in [0, 1)")
        order = sorted(range(n), key=lambda i: (CHANNELS.index(self.channel[i]), self.n_ir[i], self.pl_norm[i]))
        self.n_ir = self.n_ir[order]
        self.pl_norm = self.pl_norm[order]
        self.channel = self.channel[order]

    def __len__(self):
        return self.n_ir.size

    def select(self, channel: str):
        m = self.channel == channel
        return self.n_ir[m], self.pl_norm[m]

    @property
    def channels(self) -> tuple:
        return tuple(c for c in CHANNELS if np.any(self.channel == c))


def write_datasets(path, datasets):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASET_COLUMNS)
        for ds in datasets:
            for n, pl, ch in zip(ds.n_ir, ds.pl_norm, ds.channel):
                w.writerow([repr(float(n)), repr(float(pl)), ch, repr(float(ds.green_power)), ds.ir_label])


def read_datasets(path, background_fraction: float = 0.0) -> list:
    """Read a dataset CSV; rows are grouped by (ir_label, green power)."""
    path = Path(path)
    with open(path, newline="") as fh:
        lines = (ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#"))
        reader = csv.reader(lines)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        for col in header:
            if col not in DATASET_COLUMNS:
                raise ValidationError(f"{path}: unexpected column {col!r}")
        for col in DATASET_COLUMNS:
            if col not in header:
                raise ValidationError(f"{path}: missing column {col!r}")
        idx = {h: i for i, h in enumerate(header)}
        groups: dict = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValidationError(f"{path}: row {lineno} has {len(row)} fields")
            try:
                key = (row[idx["ir_label"]].strip(), float(row[idx["green_power_mW"]]))
                rec = (float(row[idx["n_ir"]]), float(row[idx["pl_norm"]]), row[idx["channel"]].strip())
            except ValueError as exc:
                raise ValidationError(f"{path}: row {lineno}: {exc}") from None
            groups.setdefault(key, []).append(rec)
    out = []
    for (label, pg), recs in sorted(groups.items()):
        n, pl, ch = zip(*recs)
        out.append(CompiledDataset(label, pg, n, pl, ch, background_fraction))
    return out


def normalize_and_correct(raw_pl, reference_pl, background_fraction: float = 0.0):
    """Background-corrected PL ratio, (raw/reference - b)/(1 - b).

    ``b`` is the fraction of the no-IR signal from emitters the IR field
    does not reach.
    """
    b = float(background_fraction)
    if not 0 <= b < 1:
        raise DomainError(f"background fraction must lie in [0, 1), got {b!r}")
    ref = np.asarray(reference_pl, dtype=float)
    if np.any(ref <= 0):
        raise DomainError("reference PL must be positive")
    return (np.asarray(raw_pl, dtype=float) / ref - b) / (1 - b)


def compile_dataset(scans, mode: CavityMode, green_power: float, *, taper_efficiency=None,
                    reference_pl=None, background_fraction: float = 0.0, ir_label=None,
                    model: str = "auto") -> CompiledDataset:
    """Merge detuning scans into one PL-versus-N dataset.

    The power reaching the cavity is input power times taper efficiency,
    taken from the argument, the scan sidecar, or the band default, in that
    order. ``reference_pl`` maps channel to the no-IR count level; by
    default the count at the smallest photon number over all scans is used.
    """
    scans = list(scans)
    if not scans:
        raise ValidationError("no scans supplied")
    mode._require_line()
    lam0 = mode.resonance_wavelength
    lo = min(s.wavelengths[0] for s in scans)
    hi = max(s.wavelengths[-1] for s in scans)
    if not lo <= lam0 <= hi:
        raise CoverageError(
            f"scans cover {lo * 1e9:.4f}-{hi * 1e9:.4f} nm but the resonance is at {lam0 * 1e9:.4f} nm")
    n_all, ch_all, raw_all = [], [], []
    for s in scans:
        eff = taper_efficiency if taper_efficiency is not None else s.taper_efficiency
        if eff is None:
            eff = default_taper_efficiency(lam0)
        if not 0 < eff <= 1:
            raise DomainError("taper efficiency must lie in (0, 1]")
        if not s.pl_counts:
            raise ValidationError("scan has no PL columns")
        delta = mode.omega - s.omegas
        pe = units.PhotonEnergy.from_wavelength  # per-sample photon energy
        N = np.array([intracavity_photons(mode, delta[i], s.input_power * eff, pe(s.wavelengths[i]), model)
                      for i in range(s.wavelengths.size)])
        for key, counts in s.pl_counts.items():
            ch = SCAN_CHANNEL.get(key, key)
            n_all.append(N)
            ch_all.append(np.full(N.size, ch, dtype=object))
            raw_all.append(counts)
    n = np.concatenate(n_all)
    ch = np.concatenate(ch_all)
    raw = np.concatenate(raw_all)
    ref = np.empty(n.size)
    for c in set(ch):
        m = ch == c
        if reference_pl is None:
            # ties broken by count so the choice is order independent
            idx = np.flatnonzero(m)
            j = min(idx, key=lambda i: (n[i], raw[i]))
            ref[m] = raw[j]
        elif isinstance(reference_pl, dict):
            ref[m] = reference_pl[c]
        else:
            ref[m] = float(reference_pl)
    pl = normalize_and_correct(raw, ref, background_fraction)
    return CompiledDataset(ir_label or mode.label or "ir", green_power, n, pl, ch, background_fraction)


# ---------------------------------------------------------------- synthesis

def model_pl(coeffs: RateCoefficients, green_power: float, n_ir, channels=CHANNELS) -> dict:
    """Normalised steady-state PL per channel at the given photon numbers."""
    n = np.asarray(n_ir, dtype=float)
    Gs = _generators_batch(coeffs, green_power, np.concatenate([[0.0], n]))
    stationary(Gs[0])  # raises when the steady state is not unique
    p = _stationary_batch(Gs)
    out = {}
    if "NV-" in channels:
        out["NV-"] = p[1:, 1] / p[0, 1]
    if "NV0" in channels:
        out["NV0"] = p[1:, 6] / p[0, 6]
    return out


def _direction(coeffs: RateCoefficients, name: str) -> RateCoefficients:
    """Copy keeping only coefficient ``name``; every other rate is zero.

    Effective rates are linear in the coefficients, so the generator of
    this copy is exactly K * dG/dK.
    """
    zero = {a: 0.0 for a in list(INTERNAL_KEYS.values()) + list(GREEN_KEYS.values())}
    ir = {lab: IRCoefficients(0.0, 0.0, 0.0) for lab in coeffs.ir}
    base = replace(coeffs, ir=ir, **zero)
    return base.updated(**{name: coeffs.get(name)})


def model_pl_sensitivity(coeffs: RateCoefficients, green_power: float, n_ir, free,
                         channels=CHANNELS):
    """Normalised PL and its derivatives with respect to log-coefficients.

    Differentiating G p = 0, sum(p) = 1 gives A dp = -(dG p) with the
    normalisation row of the right-hand side set to zero, where A is the
    generator with its last row replaced by ones.
    Returns ``(pl, jac)`` with ``jac[channel]`` of shape (n, len(free)).
    """
    n = np.asarray(n_ir, dtype=float)
    grid = np.concatenate([[0.0], n])
    Gs = _generators_batch(coeffs, green_power, grid)
    stationary(Gs[0])
    p = _stationary_batch(Gs)
    A = Gs.copy()
    A[:, -1, :] = 1.0
    rhs = np.empty((grid.size, 7, len(free)))
    for k, name in enumerate(free):
        dG = _generators_batch(_direction(coeffs, name), green_power, grid)
        rhs[:, :, k] = -np.einsum("nij,nj->ni", dG, p)
    rhs[:, -1, :] = 0.0
    dp = np.linalg.solve(A, rhs)
    pl, jac = {}, {}
    for ch, lvl in (("NV-", 1), ("NV0", 6)):
        if ch not in channels:
            continue
        y = p[1:, lvl] / p[0, lvl]
        pl[ch] = y
        jac[ch] = (dp[1:, lvl, :] - y[:, None] * dp[0, lvl, :][None, :]) / p[0, lvl]
    return pl, jac


def synth_dataset(coeffs: RateCoefficients, green_power: float, ir_label: str, n_grid, *,
                  noise: float = 0.0, seed: int = 0, channels=CHANNELS,
                  background_fraction: float = 0.0) -> CompiledDataset:
    """Model PL on ``n_grid`` with optional multiplicative Gaussian noise."""
    n = np.asarray(n_grid, dtype=float)
    if n.size == 0:
        raise DomainError("n_grid is empty")
    c = coeffs.with_ir(ir_label)
    pl = model_pl(c, green_power, n, channels)
    rng = np.random.default_rng(seed)
    nn, vals, chs = [], [], []
    for ch in channels:
        v = pl[ch]
        if noise:
            v = v * (1.0 + noise * rng.standard_normal(v.size))
            v = np.maximum(v, 1e-12)
        nn.append(n)
        vals.append(v)
        chs.append(np.full(n.size, ch, dtype=object))
    return CompiledDataset(ir_label, green_power, np.concatenate(nn), np.concatenate(vals),
                           np.concatenate(chs), background_fraction)


# ---------------------------------------------------------------- fitting

SHARED_FREE = ("K_25_1G", "K_51_1G", "K_74_1G", "K_56", "K_75")
IR_FREE = ("K_25_2IR", "K_74_1IR")

_ATTR_TO_KEY = {a: k for k, a in {**INTERNAL_KEYS, **GREEN_KEYS, **IR_KEYS}.items()}


def table_key(name: str) -> str:
    """Rate-table key for a parameter name such as ``K_25_2IR@966nm``."""
    attr, _, label = name.partition("@")
    key = _ATTR_TO_KEY.get(attr, attr)
    return f"{key}@{label}" if label else key


def default_free(datasets) -> list:
    labels = sorted({d.ir_label for d in datasets})
    return [f"{a}@{lab}" for lab in labels for a in IR_FREE] + list(SHARED_FREE)


@dataclass
class FitResult:
    coefficients: RateCoefficients
    free: list
    values: dict
    confidence: dict  # relative 1-sigma scale from the curvature
    residual_rms: float
    cost: float
    iterations: int
    converged: bool
    message: str
    loss: str
    history: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        coeffs = self.coefficients.to_dict()
        fitted = {}
        for k in INTERNAL_KEYS:
            fitted[k] = False
        for k, a in GREEN_KEYS.items():
            fitted[k] = a in self.free
        for label in self.coefficients.ir:
            for k, a in IR_KEYS.items():
                fitted[f"{k}@{label}"] = f"{a}@{label}" in self.free
        return {
            "coefficients": coeffs,
            "fitted": fitted,
            "fitted_values": {table_key(k): v for k, v in self.values.items()},
            "confidence_scale": {table_key(k): v for k, v in self.confidence.items()},
            "residual_rms": self.residual_rms,
            "iterations": self.iterations,
            "converged": self.converged,
            "message": self.message,
            "loss": self.loss,
            "diagnostics": self.diagnostics,
            "provenance": self.provenance,
        }


def _check_config(datasets, coeffs: RateCoefficients, free):
    if not datasets:
        raise ConfigurationError("no datasets to fit")
    labels = {d.ir_label for d in datasets}
    missing = labels - set(coeffs.ir)
    if missing:
        raise ConfigurationError(f"dataset IR label(s) {sorted(missing)} have no coefficient entry")
    for name in free:
        attr, _, label = name.partition("@")
        if label:
            if attr not in IR_FREE + ("K_43_s",):
                raise ConfigurationError(f"{attr!r} is not a per-wavelength coefficient")
            if label not in labels:
                raise ConfigurationError(f"free parameter {name!r} refers to a label absent from the data")
        elif attr not in SHARED_FREE + tuple(GREEN_KEYS.values()) + tuple(INTERNAL_KEYS.values()):
            raise ConfigurationError(f"unknown free parameter {name!r}")
        if coeffs.get(name) <= 0:
            raise ConfigurationError(f"free parameter {name!r} needs a positive starting value")


def joint_fit(datasets, coeffs0: RateCoefficients | None = None, free=None, *, loss: str = "linear",
              weights=None, restarts: int = 0, spread: float = 1.0, seed: int = 0, max_iter: int = 500,
              start: dict | None = None) -> FitResult:
    """Fit the free coefficients to all datasets simultaneously.

    Parameters are fitted as natural logarithms. ``start`` overrides
    initial values; ``restarts`` adds starts drawn log-uniformly within
    ``spread`` decades of the initial point (seeded), keeping the best.
    """
    from .kinetics import reference_coefficients

    datasets = list(datasets)
    coeffs0 = coeffs0 or reference_coefficients()
    free = list(free) if free is not None else default_free(datasets)
    if start:
        coeffs0 = coeffs0.updated(**start)
    _check_config(datasets, coeffs0, free)
    if loss not in ("linear", "log"):
        raise ConfigurationError(f"loss must be 'linear' or 'log', got {loss!r}")
    w = np.ones(len(datasets)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (len(datasets),) or np.any(w <= 0):
        raise ConfigurationError("weights must be positive, one per dataset")
    sw = np.sqrt(w)

    def predict(theta, with_jac=False):
        c = coeffs0.updated(**dict(zip(free, np.exp(theta))))
        preds, jacs = [], []
        for d in datasets:
            cd = c.with_ir(d.ir_label)
            if with_jac:
                pl, dpl = model_pl_sensitivity(cd, d.green_power, d.n_ir, free, d.channels)
            else:
                pl = model_pl(cd, d.green_power, d.n_ir, d.channels)
            pred = np.empty(len(d))
            jac = np.empty((len(d), len(free)))
            for ch in d.channels:
                m = d.channel == ch
                pred[m] = pl[ch][m]
                if with_jac:
                    jac[m] = dpl[ch][m]
            preds.append(pred)
            jacs.append(jac)
        return (preds, jacs) if with_jac else preds

    def resid(theta):
        parts = []
        for d, s, pred in zip(datasets, sw, predict(theta)):
            if loss == "log":
                parts.append(s * (np.log(np.maximum(pred, 1e-300)) - np.log(np.maximum(d.pl_norm, 1e-300))))
            else:
                parts.append(s * (pred - d.pl_norm))
        return np.concatenate(parts)

    def jacobian(theta):
        preds, jacs = predict(theta, with_jac=True)
        parts = []
        for s, pred, jac in zip(sw, preds, jacs):
            if loss == "log":
                jac = jac / np.maximum(pred, 1e-300)[:, None]
            parts.append(s * jac)
        return np.vstack(parts)

    theta0 = np.log([coeffs0.get(k) for k in free])
    starts = [theta0]
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        starts.append(theta0 + rng.uniform(-spread, spread, theta0.size) * math.log(10))

    best = None
    for th in starts:
        try:
            res = levenberg_marquardt(resid, th, jacobian, max_iter=max_iter, ftol=1e-15, xtol=1e-12,
                                      gtol=1e-14)
        except (ValueError, np.linalg.LinAlgError):
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        raise DomainError("no start produced finite residuals")

    m, k = best.jac.shape
    sv = np.linalg.svd(best.jac, compute_uv=False)
    rank = int(np.sum(sv > sv[0] * 1e-9)) if sv.size and sv[0] > 0 else 0
    diagnostics = {"n_points": int(m), "n_free": int(k), "jacobian_rank": rank,
                   "singular_values": [float(v) for v in sv],
                   "starts": len(starts)}
    converged = best.converged
    message = best.message
    if rank < k:
        converged = False
        message = f"rank-deficient Jacobian: rank {rank} < {k} free parameters ({m} residuals)"
        diagnostics["rank_deficient"] = True
    dof = max(m - k, 1)
    s2 = 2 * best.cost / dof
    cov = np.linalg.pinv(best.jac.T @ best.jac) * s2
    conf = {name: float(math.sqrt(max(cov[i, i], 0.0))) for i, name in enumerate(free)}

    fitted = coeffs0.updated(**dict(zip(free, np.exp(best.x))))
    lin = np.concatenate([p - d.pl_norm for d, p in zip(datasets, predict(best.x))])
    return FitResult(
        coefficients=fitted,
        free=free,
        values={name: float(v) for name, v in zip(free, np.exp(best.x))},
        confidence=conf,
        residual_rms=float(math.sqrt(np.mean(lin**2))),
        cost=float(best.cost),
        iterations=best.iterations,
        converged=bool(converged),
        message=message,
        loss=loss,
        history=[float(h) for h in best.history],
        diagnostics=diagnostics,
        provenance={"seed": seed, "restarts": restarts, "spread_decades": spread, "loss": loss,
                    "max_iter": max_iter, "weights": [float(x) for x in w]},
    )
