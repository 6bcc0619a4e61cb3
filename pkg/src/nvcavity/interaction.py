"""Light-matter overlap bookkeeping on axisymmetric field grids.

A ``FieldGrid`` is a flat list of sample nodes with volume weights, as
exported from a mode solver. All integrals are plain weighted sums over
the nodes in their stored order, so results are bit-reproducible.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import units
from .cavity import CavityMode
from .errors import DegenerateError, DomainError, ValidationError

GRID_COLUMNS = ("r_m", "z_m", "weight_m3", "e2_ir", "e2_nv", "eps", "in_excitation")


@dataclass(frozen=True, eq=False)
class FieldGrid:
    r: np.ndarray
    z: np.ndarray
    weight: np.ndarray
    e2_ir: np.ndarray
    e2_nv: np.ndarray
    eps: np.ndarray
    in_excitation: np.ndarray
    e2_green: np.ndarray | None = None

    def __post_init__(self):
        arrays = {}
        for name in ("r", "z", "weight", "e2_ir", "e2_nv", "eps"):
            arrays[name] = np.asarray(getattr(self, name), dtype=float)
        arrays["in_excitation"] = np.asarray(self.in_excitation, dtype=bool)
        if self.e2_green is not None:
            arrays["e2_green"] = np.asarray(self.e2_green, dtype=float)
        n = arrays["r"].size
        if any(a.shape != (n,) for a in arrays.values()):
            raise ValidationError("field grid columns must be 1-D and of equal length")
        for name in ("weight", "e2_ir", "e2_nv", "eps", "e2_green"):
            if name in arrays and np.any(arrays[name] < 0):
                raise ValidationError(f"field grid column {name!r} has negative entries")
        for k, v in arrays.items():
            object.__setattr__(self, k, v)

    def __len__(self):
        return self.r.size

    @property
    def green_weight(self) -> np.ndarray:
        g = self.in_excitation.astype(float)
        if self.e2_green is not None:
            g = g * self.e2_green
        return g

    def permuted(self, order) -> "FieldGrid":
        order = np.asarray(order)
        return FieldGrid(
            self.r[order], self.z[order], self.weight[order], self.e2_ir[order],
            self.e2_nv[order], self.eps[order], self.in_excitation[order],
            None if self.e2_green is None else self.e2_green[order],
        )


def mode_volume(grid: FieldGrid) -> float:
    """Peak-energy-density mode volume, sum(eps|E|^2 w) / max(eps|E|^2)."""
    u = grid.eps * grid.e2_ir
    peak = u.max(initial=0.0)
    if not peak > 0:
        raise DegenerateError("mode volume undefined: IR energy density is zero everywhere")
    return float(np.sum(u * grid.weight) / peak)


def confinement_factor(grid: FieldGrid, p: int = 1) -> float:
    """Overlap of the p-th power of the normalised IR intensity with the
    excitation region, weighted by the collection-mode intensity.

    The IR maximum is taken over the whole grid, not just the region.
    """
    if int(p) != p or p < 1:
        raise DomainError(f"photon order must be a positive integer, got {p!r}")
    peak = grid.e2_ir.max(initial=0.0)
    if not peak > 0:
        raise DegenerateError("IR field is zero everywhere")
    w = grid.e2_nv * grid.green_weight * grid.weight
    norm = np.sum(w)
    if not norm > 0:
        raise DegenerateError("excitation region is empty or has no collection-mode overlap")
    f = grid.e2_ir / peak
    return float(np.sum(f**p * w) / norm)


def median_gamma(values) -> float:
    """Median of candidate confinement factors (one per plausible NV mode)."""
    v = np.atleast_1d(np.asarray(values, dtype=float))
    if v.size == 0:
        raise DomainError("no confinement factors supplied")
    if np.any((v < 0) | (v > 1)):
        raise DomainError("confinement factors must lie in [0, 1]")
    return float(np.median(v))


# ---------------------------------------------------------------- cross sections

@dataclass(frozen=True)
class CrossSection:
    """p-photon cross section; units m^(2p) s^(p-1)."""

    order: int
    value: float

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise DomainError("cross-section order must be a positive integer")
        if not self.value > 0:
            raise DomainError("cross-section value must be positive")

    @property
    def unit(self) -> str:
        p = self.order
        return "m^2" if p == 1 else f"m^{2 * p} s^{p - 1}"


def _photon_density_rate(mode: CavityMode) -> float:
    """(c/n_g)/V_o: converts photon number into photon flux density."""
    mode._require_fom()
    return units.C / mode.group_index / mode.mode_volume


def rate_from_cross_section(sigma: CrossSection, n_photons, mode: CavityMode, gamma_p: float):
    """Ensemble-averaged p-photon rate sigma * ((c/n_g) N / V_o)**p * Gamma_p, in Hz."""
    if not 0 <= gamma_p <= 1:
        raise DomainError("confinement factor must lie in [0, 1]")
    n = np.asarray(n_photons, dtype=float)
    if np.any(n < 0):
        raise DomainError("photon number must be >= 0")
    return sigma.value * (_photon_density_rate(mode) * n) ** sigma.order * gamma_p


def cross_section_from_rate(k_coeff: float, p: int, mode: CavityMode, gamma_p: float) -> CrossSection:
    """Invert a fitted per-photon^p rate coefficient into a cross section."""
    if gamma_p == 0:
        raise DegenerateError("confinement factor is zero; cross section undefined")
    if not 0 < gamma_p <= 1:
        raise DomainError("confinement factor must lie in (0, 1]")
    if not k_coeff > 0:
        raise DomainError("rate coefficient must be positive")
    return CrossSection(p, k_coeff / (_photon_density_rate(mode) ** p * gamma_p))


# ---------------------------------------------------------------- grid IO

def read_grid(path) -> FieldGrid:
    path = Path(path)
    with open(path, newline="") as fh:
        lines = (ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#"))
        reader = csv.reader(lines)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        allowed = set(GRID_COLUMNS) | {"e2_green"}
        for col in header:
            if col not in allowed:
                raise ValidationError(f"{path}: unexpected column {col!r}")
        for col in GRID_COLUMNS:
            if col not in header:
                raise ValidationError(f"{path}: missing column {col!r}")
        rows = list(reader)
    try:
        data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric or ragged data ({exc})") from None
    c = {h: data[:, i] for i, h in enumerate(header)}
    if not np.all(np.isin(c["in_excitation"], (0.0, 1.0))):
        raise ValidationError(f"{path}: in_excitation must be 0 or 1")
    return FieldGrid(c["r_m"], c["z_m"], c["weight_m3"], c["e2_ir"], c["e2_nv"], c["eps"],
                     c["in_excitation"] > 0.5, c.get("e2_green"))


def write_grid(path, grid: FieldGrid):
    cols = list(GRID_COLUMNS) + (["e2_green"] if grid.e2_green is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(len(grid)):
            row = [grid.r[i], grid.z[i], grid.weight[i], grid.e2_ir[i], grid.e2_nv[i], grid.eps[i]]
            row = [repr(float(v)) for v in row] + [str(int(grid.in_excitation[i]))]
            if grid.e2_green is not None:
                row.append(repr(float(grid.e2_green[i])))
            w.writerow(row)


# ---------------------------------------------------------------- analytic grids

@dataclass(frozen=True)
class GaussianRing:
    """|E|^2 = exp(-((r-r0)/wr)^2 - ((z-z0)/wz)^2), unit peak at (r0, z0)."""

    r0: float
    z0: float
    wr: float
    wz: float

    def __call__(self, r, z):
        return np.exp(-(((r - self.r0) / self.wr) ** 2) - ((z - self.z0) / self.wz) ** 2)


def snap_window(r_range, z_range, nr, nz, excitation):
    """Move an (r_lo, r_hi, z_lo, z_hi) window onto the nearest cell edges."""
    (r_a, r_b), (z_a, z_b) = r_range, z_range
    dr = (r_b - r_a) / nr
    dz = (z_b - z_a) / nz
    lo_r, hi_r, lo_z, hi_z = excitation
    return (r_a + round((lo_r - r_a) / dr) * dr, r_a + round((hi_r - r_a) / dr) * dr,
            z_a + round((lo_z - z_a) / dz) * dz, z_a + round((hi_z - z_a) / dz) * dz)


def gaussian_ring_grid(r_range, z_range, nr, nz, ir: GaussianRing, nv: GaussianRing,
                       excitation, n_index: float = units.N_DIAMOND, refine: int = 1) -> FieldGrid:
    """Midpoint-rule grid over ``r_range x z_range`` with analytic ring fields.

    ``excitation`` is an (r_lo, r_hi, z_lo, z_hi) window. Its edges are
    snapped to the coarse cell edges, so the indicator is identical at
    every ``refine`` level and refinement only sharpens the smooth part.
    """
    r_a, r_b = r_range
    z_a, z_b = z_range
    if not (r_b > r_a >= 0 and z_b > z_a and nr >= 1 and nz >= 1 and refine >= 1):
        raise DomainError("bad grid extent or resolution")
    snap = snap_window(r_range, z_range, nr, nz, excitation)
    mr, mz = nr * refine, nz * refine
    dr = (r_b - r_a) / mr
    dz = (z_b - z_a) / mz
    rc = r_a + (np.arange(mr) + 0.5) * dr
    zc = z_a + (np.arange(mz) + 0.5) * dz
    R, Z = np.meshgrid(rc, zc, indexing="ij")
    R = R.ravel()
    Z = Z.ravel()
    inside = (R > snap[0]) & (R < snap[1]) & (Z > snap[2]) & (Z < snap[3])
    return FieldGrid(
        r=R, z=Z, weight=2 * math.pi * R * dr * dz,
        e2_ir=ir(R, Z), e2_nv=nv(R, Z),
        eps=np.full(R.size, units.dielectric_constant(n_index)),
        in_excitation=inside,
    )
