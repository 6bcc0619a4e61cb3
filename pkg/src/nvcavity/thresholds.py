"""Energy-threshold bookkeeping for NV charge-conversion processes.

Level energetics live in an ``EnergyLedger``; thresholds are derived from
it with interval arithmetic so that uncertain splittings propagate to
bounds. ``select_processes`` keeps a process only if some photon order
reaches its threshold at every IR wavelength in use.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import DomainError, ValidationError
from .units import PhotonEnergy


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise DomainError(f"interval lower bound {self.lo} exceeds upper bound {self.hi}")

    @classmethod
    def of(cls, v) -> "Interval":
        if isinstance(v, Interval):
            return v
        if isinstance(v, (list, tuple)):
            return cls(float(v[0]), float(v[1]))
        return cls(float(v), float(v))

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def __add__(self, o):
        o = Interval.of(o)
        return Interval(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __sub__(self, o):
        o = Interval.of(o)
        return Interval(self.lo - o.hi, self.hi - o.lo)

    def __rsub__(self, o):
        return Interval.of(o) - self

    def to_json(self):
        return self.lo if self.is_point else [self.lo, self.hi]


@dataclass(frozen=True)
class Threshold:
    """Threshold energy in eV.

    ``kind`` is "value" for a determined energy or range, "upper"/"lower"
    for a one-sided bound; ``value`` then holds the bound on both ends.
    """

    value: Interval
    kind: str = "value"

    def to_dict(self) -> dict:
        return {"eV": self.value.to_json(), "kind": self.kind}


_PROVENANCE = {
    "ip_3A2_2E": "3A2 -> 2E photoionization threshold, measured (Aslam 2013, Bourgeois 2017)",
    "E_zpl_minus": "NV- zero-phonon line E(3E) - E(3A2) (Doherty 2011)",
    "E_zpl_0": "NV0 zero-phonon line E(2A2) - E(2E) (Doherty 2013)",
    "delta_minus": "singlet offset E(1E) - E(3A2), theory estimate (Bhandari 2021)",
    "delta_0": "quartet offset E(4A2) - E(2E), theory range (Razinkovas 2021, Ranjbar 2011)",
    "r_2A2_1E": "2A2 -> 1E recombination threshold, upper bound from one-photon access at 1524 nm",
    "singlet_gap": "singlet splitting E(1A1) - E(1E)",
}


@dataclass(frozen=True)
class EnergyLedger:
    ip_3A2_2E: Interval = Interval(2.65, 2.65)
    E_zpl_minus: Interval = Interval(1.946, 1.946)
    E_zpl_0: Interval = Interval(2.16, 2.16)
    delta_minus: Interval = Interval(0.38, 0.38)
    delta_0: Interval = Interval(0.48, 0.68)
    r_2A2_1E: float = 0.81  # upper bound only
    singlet_gap: Interval = Interval(1.19, 1.19)
    provenance: dict = field(default_factory=lambda: dict(_PROVENANCE), compare=False)

    def __post_init__(self):
        for f in fields(self):
            if f.name in ("provenance", "r_2A2_1E"):
                continue
            v = Interval.of(getattr(self, f.name))
            if not v.lo > 0:
                raise DomainError(f"ledger entry {f.name} must be > 0")
            object.__setattr__(self, f.name, v)
        if not self.r_2A2_1E > 0:
            raise DomainError("ledger entry r_2A2_1E must be > 0")
        object.__setattr__(self, "r_2A2_1E", float(self.r_2A2_1E))

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "provenance"}
        out = {k: (v.to_json() if isinstance(v, Interval) else v) for k, v in d.items()}
        out["provenance"] = dict(self.provenance)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "EnergyLedger":
        names = {f.name for f in fields(cls)}
        extra = set(d) - names
        if extra:
            raise ValidationError(f"unknown ledger key(s): {sorted(extra)}")
        kw = {}
        for k, v in d.items():
            if k == "provenance":
                kw[k] = {**_PROVENANCE, **v}
            elif k == "r_2A2_1E":
                kw[k] = float(v)
            else:
                try:
                    kw[k] = Interval.of(v)
                except (TypeError, ValueError, IndexError):
                    raise ValidationError(f"ledger entry {k!r} must be a number or [lo, hi]") from None
        return cls(**kw)


def read_ledger(path) -> EnergyLedger:
    return EnergyLedger.from_dict(json.loads(Path(path).read_text()))


# photon energy of the 966 nm mode, used to bound the quartet offset
IR_966_PHOTON = PhotonEnergy(1.283)


def min_photons(threshold: float, photon: PhotonEnergy | float) -> int:
    """Smallest n with n * E_photon >= threshold; equality counts as reachable."""
    e = photon.eV if isinstance(photon, PhotonEnergy) else float(photon)
    if not threshold > 0 or not e > 0:
        raise DomainError("threshold and photon energy must be positive")
    n = math.ceil(threshold / e)
    # guard the ceil against one-ulp quotient error in either direction
    if (n - 1) >= 1 and (n - 1) * e >= threshold:
        n -= 1
    elif n * e < threshold:
        n += 1
    return max(int(n), 1)


def constrain_delta0(ledger: EnergyLedger, ir_photon: PhotonEnergy = IR_966_PHOTON) -> float:
    """Lower bound on E(4A2) - E(2E) from requiring two IR photons for 3E -> 4A2.

    One photon must fall short: IP(3E->4A2) = IP(3E->2E) + delta_0 > hbar*omega.
    """
    ip_3e_2e = ledger.ip_3A2_2E - ledger.E_zpl_minus
    return ir_photon.eV - ip_3e_2e.lo


def derived_thresholds(ledger: EnergyLedger | None = None,
                       ir_photon: PhotonEnergy | None = IR_966_PHOTON) -> dict:
    """All process thresholds implied by the ledger, keyed "IP(a->b)" / "R(a->b)".

    With ``ir_photon`` given, the quartet offset lower bound is raised to
    ``constrain_delta0`` (two-photon access at that wavelength). Pass None
    to use the ledger range as is.
    """
    L = ledger or EnergyLedger()
    d0 = L.delta_0
    if ir_photon is not None:
        lo = max(d0.lo, constrain_delta0(L, ir_photon))
        d0 = Interval(lo, max(lo, d0.hi))
    ip_3e_2e = L.ip_3A2_2E - L.E_zpl_minus
    ip_1e_2e = L.ip_3A2_2E - L.delta_minus
    r = Interval(L.r_2A2_1E, L.r_2A2_1E)
    r_4a2_3a2 = r - L.delta_minus + L.E_zpl_0 - d0
    out = {
        "IP(3A2->2E)": Threshold(L.ip_3A2_2E),
        "IP(1E->2E)": Threshold(ip_1e_2e),
        "IP(1A1->2E)": Threshold(ip_1e_2e - L.singlet_gap),
        "IP(3E->2E)": Threshold(ip_3e_2e),
        "IP(3E->2A2)": Threshold(ip_3e_2e + L.E_zpl_0),
        "IP(3E->4A2)": Threshold(ip_3e_2e + d0),
        "R(2A2->1E)": Threshold(r, "upper"),
        "R(2A2->1A1)": Threshold(r + L.singlet_gap, "upper"),
        "R(2A2->3A2)": Threshold(r - L.delta_minus, "upper"),
        # largest value over the ledger ranges: the bound that holds for all of them
        "R(4A2->3A2)": Threshold(Interval.of(r_4a2_3a2.hi), "upper"),
        "delta_0": Threshold(Interval.of(d0.lo), "lower"),
    }
    return out


# ---------------------------------------------------------------- processes

@dataclass(frozen=True)
class Process:
    name: str
    initial: str
    final: str
    direction: str  # "ionization" | "recombination"
    threshold: str  # key into derived_thresholds
    green_only: bool = False  # may be kept on green access alone
    veto: str | None = None  # rejected on grounds other than energetics

    def __post_init__(self):
        from .kinetics import LEVEL_TERMS
        terms = set(LEVEL_TERMS.values())
        if self.initial not in terms or self.final not in terms:
            raise ValidationError(f"process {self.name}: unknown level name")
        if self.direction not in ("ionization", "recombination"):
            raise ValidationError(f"process {self.name}: bad direction {self.direction!r}")


def default_catalog() -> list:
    return [
        Process("K16", "3A2", "2E", "ionization", "IP(3A2->2E)"),
        Process("K46", "1E", "2E", "ionization", "IP(1E->2E)"),
        Process("K27", "3E", "2A2", "ionization", "IP(3E->2A2)"),
        Process("K25", "3E", "4A2", "ionization", "IP(3E->4A2)"),
        Process("K36", "1A1", "2E", "ionization", "IP(1A1->2E)",
                veto="fast 1A1 decay outcompetes ionization"),
        Process("K74", "2A2", "1E", "recombination", "R(2A2->1E)"),
        Process("K73", "2A2", "1A1", "recombination", "R(2A2->1A1)"),
        Process("K71", "2A2", "3A2", "recombination", "R(2A2->3A2)",
                veto="including it does not change the fit"),
        Process("K51", "4A2", "3A2", "recombination", "R(4A2->3A2)", green_only=True),
    ]


def read_catalog(path) -> list:
    data = json.loads(Path(path).read_text())
    out = []
    for entry in data:
        try:
            out.append(Process(**entry))
        except TypeError as exc:
            raise ValidationError(f"bad catalog entry {entry!r}: {exc}") from None
    return out


@dataclass(frozen=True)
class Verdict:
    process: str
    active: bool
    orders: dict  # source label -> photon order (only channels that qualify)
    reason: str = ""

    def to_dict(self) -> dict:
        return {"process": self.process, "active": self.active, "orders": dict(self.orders),
                "reason": self.reason}


def _label(e: float) -> str:
    return f"{e:.3f} eV"


def _order_range(t: Threshold, e: float):
    return min_photons(t.value.lo, e), min_photons(t.value.hi, e)


def select_processes(catalog, ledger: EnergyLedger | None, sources, max_order: int = 2) -> list:
    """Classify catalogued processes as active or rejected.

    ``sources`` holds photon energies; entries at or above the NV- ZPL are
    treated as the (shared) excitation laser, the rest as IR sources. A
    process is active when one photon order no larger than ``max_order``
    reaches its threshold at every IR source, or, for green-only entries,
    when the excitation laser reaches it within ``max_order``.
    """
    L = ledger or EnergyLedger()
    energies = sorted({(s.eV if isinstance(s, PhotonEnergy) else float(s)) for s in sources})
    if not energies:
        raise DomainError("at least one light source is required")
    green = [e for e in energies if e >= L.E_zpl_minus.lo]
    ir = [e for e in energies if e < L.E_zpl_minus.lo]
    th = derived_thresholds(L, PhotonEnergy(max(ir)) if ir else None)
    verdicts = []
    for proc in sorted(catalog, key=lambda p: p.name):
        t = th[proc.threshold]
        green_orders = {}
        for e in green:
            n = _order_range(t, e)[0]
            if n <= max_order:
                green_orders[_label(e)] = n
        if proc.veto:
            verdicts.append(Verdict(proc.name, False, {}, proc.veto))
            continue
        if proc.green_only:
            if green_orders:
                verdicts.append(Verdict(proc.name, True, green_orders, "green only"))
            else:
                verdicts.append(Verdict(proc.name, False, {}, f"order > {max_order}"))
            continue
        if not ir:
            verdicts.append(Verdict(proc.name, False, {}, "no IR source"))
            continue
        ranges = [_order_range(t, e) for e in ir]
        lo = max(r[0] for r in ranges)
        hi = min(r[1] for r in ranges)
        reasons = []
        if any(r[0] > max_order for r in ranges):
            reasons.append(f"order > {max_order}")
        if lo > hi:
            reasons.append("mismatched")
        elif lo > max_order and not reasons:
            reasons.append(f"order > {max_order}")
        if reasons:
            verdicts.append(Verdict(proc.name, False, {}, " and ".join(reasons)))
            continue
        orders = {_label(e): lo for e in ir}
        orders.update(green_orders)
        verdicts.append(Verdict(proc.name, True, dict(sorted(orders.items())), ""))
    return verdicts


def active_set(verdicts) -> set:
    return {v.process for v in verdicts if v.active}


def report(ledger: EnergyLedger | None = None, ir_photon: PhotonEnergy = IR_966_PHOTON,
           catalog=None, sources=None, max_order: int = 2) -> dict:
    """Machine-readable threshold report with per-process verdicts."""
    L = ledger or EnergyLedger()
    th = derived_thresholds(L, ir_photon)
    catalog = default_catalog() if catalog is None else catalog
    source_sets = sources or [[2.330, 1.283], [2.330, 0.813]]
    out = {
        "ledger": L.to_dict(),
        "thresholds_eV": {k: v.to_dict() for k, v in th.items()},
        "delta_0_lower_bound_eV": constrain_delta0(L, ir_photon),
        "min_photons_IP(3A2->2E)": {
            _label(e): min_photons(L.ip_3A2_2E.lo, e) for e in (2.330, 1.283, 0.813)},
    }
    flat = sorted({e for s in source_sets for e in s})
    out["selection"] = [v.to_dict() for v in select_processes(catalog, L, flat, max_order)]
    return out


def format_report(rep: dict) -> str:
    lines = ["threshold                 kind     eV"]
    for k, v in rep["thresholds_eV"].items():
        e = v["eV"]
        val = f"{e:.3f}" if not isinstance(e, list) else f"{e[0]:.3f}..{e[1]:.3f}"
        lines.append(f"{k:<25} {v['kind']:<8} {val}")
    lines.append("")
    lines.append("process  active  orders / reason")
    for s in rep["selection"]:
        detail = ", ".join(f"{k}: {n}" for k, n in s["orders"].items()) if s["active"] else s["reason"]
        if s["active"] and s["reason"]:
            detail += f" ({s['reason']})"
        lines.append(f"{s['process']:<8} {'yes' if s['active'] else 'no':<7} {detail}")
    return "\n".join(lines)


def with_entry(ledger: EnergyLedger, **changes) -> EnergyLedger:
    return replace(ledger, **changes)
