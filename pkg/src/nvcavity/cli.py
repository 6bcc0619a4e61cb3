"""Command-line front end: ``nvcavity <subcommand> ...``.

Every output carries a provenance block (tool version, SHA-256 of each
input file, seed). CSV outputs put it in leading ``#`` lines, JSON outputs
under a ``provenance`` key. Exit codes: 0 success, 1 bad input, 2 no
solution or degenerate problem, 3 non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, calib, cavity, interaction, kinetics, thresholds, units
from .config import load_config
from .errors import DegenerateError, FitError, NonUniqueSteadyStateError, NVCavityError, ValidationError

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_NOCONV = 0, 1, 2, 3

STATE_COLUMNS = [f"p{i}" for i in range(1, 8)] + ["pl_nvm_norm", "pl_nv0_norm"]


# ---------------------------------------------------------------- provenance

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Provenance:
    def __init__(self, command: str, seed=None):
        self.command = command
        self.seed = seed
        self.inputs = []

    def add(self, path):
        if path is not None:
            p = Path(path)
            self.inputs.append((p.name, sha256_file(p)))
        return path

    def as_dict(self) -> dict:
        d = {"tool": f"nvcavity {__version__}", "command": self.command,
             "inputs": {name: digest for name, digest in self.inputs}}
        if self.seed is not None:
            d["seed"] = self.seed
        return d

    def header(self) -> list:
        lines = [f"# nvcavity {__version__}", f"# command: {self.command}"]
        lines += [f"# input {name} sha256={digest}" for name, digest in self.inputs]
        if self.seed is not None:
            lines.append(f"# seed: {self.seed}")
        return lines


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, prov: Provenance, header, rows):
    with open(path, "w", newline="") as fh:
        for line in prov.header():
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def read_table(path) -> dict:
    """Load any CSV written by this tool into ``{column: array}``."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(header):
        col = [r[j] for r in body]
        try:
            out[name] = np.array([float(x) for x in col])
        except ValueError:
            out[name] = np.array(col, dtype=object)
    return out


def write_json(path, data, prov: Provenance):
    data = dict(data)
    data["provenance"] = prov.as_dict()
    text = json.dumps(data, indent=2, sort_keys=False) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _floats(text):
    return [float(x) for x in str(text).replace(",", " ").split()]


# ---------------------------------------------------------------- shared loaders

def _coefficients(args, cfg, prov):
    path = getattr(args, "coeffs", None) or cfg.coefficients
    if path:
        prov.add(path)
        return kinetics.read_coefficients(path)
    return kinetics.reference_coefficients()


def _normalizer(coeffs, green_power):
    p0 = kinetics.steady_state(coeffs, kinetics.Drive(green_power, 0.0)).p
    return coeffs.K_f_minus * p0[1], coeffs.K_f_0 * p0[6]


def _state_row(p, coeffs, ref):
    return list(p) + [coeffs.K_f_minus * p[1] / ref[0], coeffs.K_f_0 * p[6] / ref[1]]


def _plot_path(out):
    return Path(out).with_suffix(".png")


# ---------------------------------------------------------------- commands

def cmd_cavity_fit(args):
    prov = Provenance("cavity-fit")
    prov.add(args.scan)
    power = args.input_power_mW * 1e-3 if args.input_power_mW else None
    try:
        scan = cavity.read_scan(args.scan, input_power=power)
    except ValidationError as exc:
        if "input power" in str(exc):
            scan = cavity.read_scan(args.scan, input_power=1e-3)
        else:
            raise
    fom = {}
    if args.reference_mode:
        ref = cavity.reference_mode(args.reference_mode)
        fom = {"mode_volume": ref.mode_volume, "group_index": ref.group_index}
    fit = cavity.fit_lineshape(scan, args.model, mode_volume=fom.get("mode_volume"),
                               group_index=fom.get("group_index"), label=args.label or args.reference_mode or "")
    write_json(args.out, fit.to_dict(), prov)
    qs = ", ".join(f"{q:.6g}" for q in fit.q_values)
    print(f"{args.model} fit: Q_loaded = {qs}; rms = {fit.rms:.3g}", file=sys.stderr)
    return EXIT_OK


def cmd_scan_synth(args):
    prov = Provenance("scan-synth", seed=args.seed)
    lam = args.wavelength_nm * 1e-9
    omega = units.omega_from_wavelength(lam)
    kappa = omega / args.q_loaded
    mode = cavity.CavityMode(lam, kappa, args.coupling * kappa, args.split * kappa, label=args.label)
    span = args.span_linewidths * lam / args.q_loaded
    scan = cavity.synthetic_scan(mode, span, args.points, args.input_power_mW * 1e-3,
                                 noise=args.noise, seed=args.seed)
    cavity.write_scan(args.out, scan)
    text = Path(args.out).read_text()
    Path(args.out).write_text("\n".join(prov.header()) + "\n" + text)
    return EXIT_OK


def cmd_sweep(args):
    cfg, cfg_path = load_config(args.config)
    prov = Provenance("sweep")
    prov.add(cfg_path)
    coeffs = _coefficients(args, cfg, prov).with_ir(args.ir_label or cfg.ir_label)
    pg = cfg.green_power_mW if args.green_power is None else args.green_power
    spec = cfg.sweep
    if args.n_values is not None:
        grid = np.asarray(_floats(args.n_values))
    elif any(v is not None for v in (args.n_min, args.n_max, args.points)):
        spec = spec.model_copy(update={k: v for k, v in (("n_min", args.n_min), ("n_max", args.n_max),
                                                           ("points", args.points)) if v is not None})
        grid = spec.grid()
    else:
        grid = spec.grid()
    out = args.out or cfg.output or "sweep.csv"
    rows, bad = [], 0
    try:
        ref = _normalizer(coeffs, pg)
    except NonUniqueSteadyStateError as exc:
        ref = None
        reason = str(exc)
    for n in grid:
        try:
            if ref is None:
                raise NonUniqueSteadyStateError(reason)
            p = kinetics.steady_state(coeffs, kinetics.Drive(pg, float(n))).p
            rows.append([n] + _state_row(p, coeffs, ref) + ["ok"])
        except NonUniqueSteadyStateError:
            bad += 1
            rows.append([n] + [math.nan] * 9 + ["non-unique"])
    write_csv(out, prov, ["N_IR"] + STATE_COLUMNS + ["flag"], rows)
    if args.plot and ref is not None:
        from .plots import plot_sweep

        arr = np.array([r[:10] for r in rows], dtype=float)
        plot_sweep(_plot_path(out), arr[:, 0], arr[:, 8], arr[:, 9],
                   f"{coeffs.active_ir}, P_G = {pg:g} mW")
    if bad:
        print(f"error: steady state not unique at {bad} grid point(s)", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


def _modulation_args(args, cfg):
    m = cfg.modulation
    upd = {}
    for key in ("n_high", "extinction_db", "duty", "periods", "samples_per_period"):
        v = getattr(args, key, None)
        if v is not None:
            upd[key] = v
    if getattr(args, "f_eom", None) is not None:
        upd["f_eom_Hz"] = _floats(args.f_eom)
    if getattr(args, "omega_eom", None) is not None:
        upd["f_eom_Hz"] = [w / (2 * math.pi) for w in _floats(args.omega_eom)]
    return m.model_copy(update=upd)


def cmd_timedomain(args):
    cfg, cfg_path = load_config(args.config)
    prov = Provenance("timedomain")
    prov.add(cfg_path)
    coeffs = _coefficients(args, cfg, prov).with_ir(args.ir_label or cfg.ir_label)
    pg = cfg.green_power_mW if args.green_power is None else args.green_power
    m = _modulation_args(args, cfg)
    f = m.f_eom_Hz[0]
    omega = 2 * math.pi * f
    segs = kinetics.square_wave(m.n_high, m.extinction_db, omega, m.duty)
    ref = _normalizer(coeffs, pg)
    res = kinetics.modulation_contrast(coeffs, pg, m.n_high, m.extinction_db, omega, m.duty,
                                       samples_per_period=m.samples_per_period, detail=True)
    T = 1 / f
    ts = np.linspace(0.0, m.periods * T, m.periods * m.samples_per_period + 1)
    p_start = kinetics.periodic_state(coeffs, pg, segs)
    _, pops = kinetics.propagate(coeffs, pg, segs * m.periods, p_start, ts)
    phase = np.mod(ts, T)
    n_t = np.where(phase < m.duty * T, segs[0][1], segs[1][1])
    out = args.out or cfg.output or "trace.csv"
    rows = [[t, n] + _state_row(p, coeffs, ref) + [res.settled] for t, n, p in zip(ts, n_t, pops)]
    write_csv(out, prov, ["t_s", "N_IR"] + STATE_COLUMNS + ["settled"], rows)
    if args.plot:
        from .plots import plot_trace

        arr = np.array([r[:11] for r in rows], dtype=float)
        plot_trace(_plot_path(out), arr[:, 0], arr[:, 9], arr[:, 1])
    print(f"contrast at {f:g} Hz: {res.contrast:.6g}" + ("" if res.settled else " (not settled)"),
          file=sys.stderr)
    return EXIT_OK


def cmd_contrast(args):
    cfg, cfg_path = load_config(args.config)
    prov = Provenance("contrast")
    prov.add(cfg_path)
    coeffs = _coefficients(args, cfg, prov).with_ir(args.ir_label or cfg.ir_label)
    pg = cfg.green_power_mW if args.green_power is None else args.green_power
    m = _modulation_args(args, cfg)
    dc = kinetics.dc_contrast(coeffs, pg, m.n_high, m.extinction_db)
    rows = []
    for f in m.f_eom_Hz:
        r = kinetics.modulation_contrast(coeffs, pg, m.n_high, m.extinction_db, 2 * math.pi * f, m.duty,
                                         samples_per_period=m.samples_per_period, detail=True)
        rows.append([f, 2 * math.pi * f, r.contrast, dc, r.period_change, r.settled])
    out = args.out or cfg.output or "contrast.csv"
    write_csv(out, prov, ["f_eom_Hz", "omega_eom_rad_s", "contrast", "dc_contrast", "period_change",
                          "settled"], rows)
    if args.plot:
        from .plots import plot_contrast

        plot_contrast(_plot_path(out), [r[0] for r in rows], [r[2] for r in rows], dc)
    return EXIT_OK


def cmd_thresholds(args):
    cfg, cfg_path = load_config(args.config)
    prov = Provenance("thresholds")
    prov.add(cfg_path)
    ledger_path = args.ledger or cfg.ledger
    ledger = thresholds.read_ledger(prov.add(ledger_path)) if ledger_path else thresholds.EnergyLedger()
    catalog = thresholds.read_catalog(prov.add(args.catalog)) if args.catalog else None
    rep = thresholds.report(ledger, units.PhotonEnergy(args.ir_photon_eV), catalog,
                            max_order=args.max_order)
    print(thresholds.format_report(rep))
    write_json(args.out, rep, prov)
    return EXIT_OK


def _gamma_values(args, prov):
    g = {}
    if args.gamma:
        prov.add(args.gamma)
        d = json.loads(Path(args.gamma).read_text())
        for p in (1, 2):
            for key in (f"gamma_{p}", f"Gamma{p}", str(p)):
                if key in d:
                    g[p] = interaction.median_gamma(d[key])
    if args.gamma1 is not None:
        g[1] = interaction.median_gamma(_floats(args.gamma1))
    if args.gamma2 is not None:
        g[2] = interaction.median_gamma(_floats(args.gamma2))
    if not g:
        raise ValidationError("no confinement factors given (use --gamma FILE or --gamma1/--gamma2)")
    return g


def cmd_xsection(args):
    prov = Provenance("xsection")
    if args.fit:
        prov.add(args.fit)
        coeffs = kinetics.read_coefficients(args.fit)
    else:
        coeffs = kinetics.reference_coefficients()
    label = args.ir_label
    if args.mode:
        mode = cavity.read_mode(prov.add(args.mode))
    else:
        mode = cavity.reference_mode(args.reference_mode or label.rstrip("*"))
    gam = _gamma_values(args, prov)
    ir = coeffs.with_ir(label).ir_active
    out = {"ir_label": label, "gamma_median": {str(p): v for p, v in gam.items()}, "cross_sections": {}}
    for p, k in ((1, ir.K_74_1IR), (2, ir.K_25_2IR)):
        if p in gam:
            s = interaction.cross_section_from_rate(k, p, mode, gam[p])
            out["cross_sections"][f"sigma_{p}"] = {"value": s.value, "unit": s.unit, "K_coeff": k}
            print(f"sigma^({p}) = {s.value:.4g} {s.unit}", file=sys.stderr)
    write_json(args.out, out, prov)
    return EXIT_OK


def cmd_gamma(args):
    prov = Provenance("gamma")
    grid = interaction.read_grid(prov.add(args.grid))
    res = {"mode_volume_m3": interaction.mode_volume(grid),
           "gamma": {str(p): interaction.confinement_factor(grid, p) for p in args.p}}
    for p, v in res["gamma"].items():
        print(f"Gamma^({p}) = {v!r}")
    if args.out:
        write_json(args.out, res, prov)
    return EXIT_OK


def cmd_fit(args):
    cfg, cfg_path = load_config(args.config)
    prov = Provenance("fit", seed=args.seed if args.seed is not None else cfg.seed)
    prov.add(cfg_path)
    coeffs = _coefficients(args, cfg, prov)
    fs = cfg.fit
    paths = list(args.datasets) or list(fs.datasets)
    if not paths:
        raise ValidationError("no dataset files given")
    datasets = []
    for p in paths:
        datasets += calib.read_datasets(prov.add(p), fs.background_fraction)
    free = args.free.split(",") if args.free else fs.free
    res = calib.joint_fit(datasets, coeffs, free, loss=args.loss or fs.loss,
                          restarts=fs.restarts if args.restarts is None else args.restarts,
                          spread=fs.spread_decades, seed=prov.seed, max_iter=fs.max_iter)
    d = res.to_dict()
    d["provenance_options"] = d.pop("provenance")
    write_json(args.out or cfg.output or "fit.json", d, prov)
    print(f"fit: converged={res.converged} rms={res.residual_rms:.4g} ({res.message})", file=sys.stderr)
    return EXIT_OK if res.converged else EXIT_NOCONV


def cmd_synth(args):
    cfg, cfg_path = load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seed
    prov = Provenance("synth", seed=seed)
    prov.add(cfg_path)
    coeffs = _coefficients(args, cfg, prov)
    label = args.ir_label or cfg.ir_label
    powers = _floats(args.green_powers) if args.green_powers else cfg.synth.green_powers_mW
    spec = cfg.sweep
    if any(v is not None for v in (args.n_min, args.n_max, args.points)):
        spec = spec.model_copy(update={k: v for k, v in (("n_min", args.n_min), ("n_max", args.n_max),
                                                           ("points", args.points)) if v is not None})
    grid = spec.grid()
    noise = cfg.synth.noise if args.noise is None else args.noise
    ds = [calib.synth_dataset(coeffs, pg, label, grid, noise=noise, seed=seed + i,
                              channels=tuple(cfg.synth.channels))
          for i, pg in enumerate(powers)]
    out = args.out or cfg.output or "dataset.csv"
    rows = [[n, pl, ch, d.green_power, d.ir_label] for d in ds for n, pl, ch in zip(d.n_ir, d.pl_norm, d.channel)]
    write_csv(out, prov, list(calib.DATASET_COLUMNS), rows)
    return EXIT_OK


def cmd_photons(args):
    prov = Provenance("photons")
    mode = cavity.read_mode(prov.add(args.mode))
    pe = mode.photon_energy if args.detuning == 0 else units.PhotonEnergy.from_omega(mode.omega - args.detuning)
    n = cavity.intracavity_photons(mode, args.detuning, args.power, pe, args.model)
    print(repr(float(n)))
    if args.out:
        write_json(args.out, {"N_IR": float(n), "power_W": args.power, "detuning_rad_s": args.detuning}, prov)
    return EXIT_OK


def cmd_grid(args):
    prov = Provenance("grid")
    ring = lambda s: interaction.GaussianRing(*_floats(s))  # noqa: E731
    g = interaction.gaussian_ring_grid(tuple(_floats(args.r_range)), tuple(_floats(args.z_range)),
                                       args.nr, args.nz, ring(args.ir), ring(args.nv),
                                       tuple(_floats(args.excitation)), refine=args.refine)
    interaction.write_grid(args.out, g)
    text = Path(args.out).read_text()
    Path(args.out).write_text("\n".join(prov.header()) + "\n" + text)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nvcavity", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"nvcavity {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def kinetic_opts(p):
        p.add_argument("--config", help="run configuration (JSON/YAML); default $NVCAVITY_CONFIG")
        p.add_argument("--coeffs", help="rate-coefficient JSON (default: built-in rate table)")
        p.add_argument("--ir-label", help="IR coefficient entry, e.g. 966nm, 1524nm, 966nm*")
        p.add_argument("--green-power", type=float, help="green power in mW")
        p.add_argument("--out")
        p.add_argument("--plot", action="store_true", help="also write a PNG next to the CSV")

    p = sub.add_parser("cavity-fit", help="fit a transmission scan")
    p.add_argument("scan")
    p.add_argument("--model", choices=["singlet", "doublet", "lorentzian2"], default="singlet")
    p.add_argument("--input-power-mW", type=float)
    p.add_argument("--reference-mode", choices=["966nm", "1524nm"], help="attach tabulated V_o and n_g")
    p.add_argument("--label", default="")
    p.add_argument("--out", default="mode.json")
    p.set_defaults(func=cmd_cavity_fit)

    p = sub.add_parser("scan-synth", help="write a synthetic transmission scan")
    p.add_argument("--wavelength-nm", type=float, required=True)
    p.add_argument("--q-loaded", type=float, required=True)
    p.add_argument("--coupling", type=float, default=0.3, help="kappa_ex / kappa")
    p.add_argument("--split", type=float, default=0.0, help="gamma_beta / kappa")
    p.add_argument("--span-linewidths", type=float, default=10.0)
    p.add_argument("--points", type=int, default=401)
    p.add_argument("--input-power-mW", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label", default="")
    p.add_argument("--out", default="scan.csv")
    p.set_defaults(func=cmd_scan_synth)

    p = sub.add_parser("sweep", help="steady state versus photon number")
    kinetic_opts(p)
    p.add_argument("--n-min", type=float)
    p.add_argument("--n-max", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--n-values", help="explicit comma-separated photon numbers")
    p.set_defaults(func=cmd_sweep)

    for name, func, helptext in (("timedomain", cmd_timedomain, "settled square-wave response"),
                                 ("contrast", cmd_contrast, "PL contrast versus modulation frequency")):
        p = sub.add_parser(name, help=helptext)
        kinetic_opts(p)
        p.add_argument("--n-high", type=float)
        p.add_argument("--extinction-db", type=float)
        p.add_argument("--duty", type=float)
        p.add_argument("--f-eom", help="modulation frequency/frequencies in Hz")
        p.add_argument("--omega-eom", help="modulation angular frequency/frequencies in rad/s")
        p.add_argument("--samples-per-period", type=int)
        if name == "timedomain":
            p.add_argument("--periods", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("thresholds", help="energy thresholds and process selection")
    p.add_argument("--config")
    p.add_argument("--ledger")
    p.add_argument("--catalog")
    p.add_argument("--ir-photon-eV", type=float, default=1.283)
    p.add_argument("--max-order", type=int, default=2)
    p.add_argument("--out", default="thresholds.json")
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("xsection", help="cross sections from fitted IR coefficients")
    p.add_argument("--fit", help="fit or coefficient JSON (default: built-in rate table)")
    p.add_argument("--mode", help="mode JSON with mode_volume and group_index")
    p.add_argument("--reference-mode", choices=["966nm", "1524nm"])
    p.add_argument("--gamma", help="JSON with gamma_1 / gamma_2 values or lists")
    p.add_argument("--gamma1")
    p.add_argument("--gamma2")
    p.add_argument("--ir-label", default="1524nm")
    p.add_argument("--out", default="sigma.json")
    p.set_defaults(func=cmd_xsection)

    p = sub.add_parser("gamma", help="confinement factors of a field grid")
    p.add_argument("grid")
    p.add_argument("--p", type=int, nargs="+", default=[1])
    p.add_argument("--out")
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("fit", help="joint fit of compiled datasets")
    p.add_argument("datasets", nargs="*")
    p.add_argument("--config")
    p.add_argument("--coeffs")
    p.add_argument("--free", help="comma-separated parameter names, e.g. K_25_2IR@966nm,K_56")
    p.add_argument("--loss", choices=["linear", "log"])
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", help="synthetic compiled datasets from the model")
    p.add_argument("--config")
    p.add_argument("--coeffs")
    p.add_argument("--ir-label")
    p.add_argument("--green-powers", help="comma-separated mW")
    p.add_argument("--n-min", type=float)
    p.add_argument("--n-max", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("photons", help="mean intracavity photon number")
    p.add_argument("--mode", required=True)
    p.add_argument("--power", type=float, required=True, help="power at the cavity, W")
    p.add_argument("--detuning", type=float, default=0.0, help="omega_cav - omega, rad/s")
    p.add_argument("--model", choices=["auto", "singlet", "doublet"], default="auto")
    p.add_argument("--out")
    p.set_defaults(func=cmd_photons)

    p = sub.add_parser("grid", help="write an analytic Gaussian-ring field grid")
    p.add_argument("--r-range", required=True, help="r_min,r_max in m")
    p.add_argument("--z-range", required=True, help="z_min,z_max in m")
    p.add_argument("--nr", type=int, default=101)
    p.add_argument("--nz", type=int, default=101)
    p.add_argument("--ir", required=True, help="r0,z0,wr,wz of the IR ring")
    p.add_argument("--nv", required=True, help="r0,z0,wr,wz of the collection-mode ring")
    p.add_argument("--excitation", required=True, help="r_lo,r_hi,z_lo,z_hi")
    p.add_argument("--refine", type=int, default=1)
    p.add_argument("--out", default="grid.csv")
    p.set_defaults(func=cmd_grid)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except DegenerateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except NVCavityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return getattr(exc, "exit_code", EXIT_INPUT)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
