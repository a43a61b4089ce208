"""Command-line interface.

Usage::

    ccqed [--config FILE] [--set key=value ...] [--out DIR] [--seed N]
          [--format csv|json-lines] <command> [input]

Commands: geometry, budget, spectrum, fit, simulate, detect, sweep.
Exit status: 0 success, 2 configuration error, 3 data error, 4 fit did not converge.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .budget import LossBudget, budget_with_uncertainty, cooperativity
from .errors import CavityQEDError, DataError, InputError
from .fitting import fit_coupled_reflection, fit_coupled_transmission, fit_exponential_decay, fit_lorentzian
from .geometry import (
    AtomModel,
    CavityGeometry,
    concentric_sweep,
    distance_for_ratio,
    ideal_coupling,
    length_from_dual_resonance,
    length_from_mode_spacing,
    mode_properties,
)
from .plot import line_plot
from .spectra import CoupledSystem, sample_spectrum, shot_noise
from .trace import TraceConfig, detect_events, match_events, simulate_trace, survival_experiment
from .units import MHZ, MM, MS, NM, SPEED_OF_LIGHT, UM

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NOT_CONVERGED = 0, 2, 3, 4


class ConfigError(InputError):
    pass


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float_list(text):
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    parse.__name__ = "choice"
    return parse


# key -> (parser, default); a default of None means "unset / derived"
KEYS = {
    "geometry.radius_of_curvature_mm": (float, 5.5),
    "geometry.distance_to_concentric_um": (float, 1.65),
    "geometry.cavity_length_mm": (float, None),
    "geometry.wavelength_nm": (float, None),
    "geometry.measured_spacing_mhz": (float, None),
    "geometry.dual_nu_a_thz": (float, None),
    "geometry.dual_nu_b_thz": (float, None),
    "geometry.dual_delta_n": (int, None),
    "atom.linewidth_mhz": (float, 6.07),
    "atom.wavelength_nm": (float, 780.241),
    "budget.mirror_transmission": (float, 0.005),
    "budget.finesse": (float, None),
    "budget.linewidth_mhz": (float, 99.0),
    "budget.linewidth_sigma_mhz": (float, 0.0),
    "budget.g0_mhz": (float, None),
    "system.g0_mhz": (float, 5.0),
    "system.offset_mhz": (float, 3.4),
    "system.kappa_mhz": (float, None),
    "system.kappa_t_mhz": (float, None),
    "system.gamma_mhz": (float, None),
    "spectrum.which": (_choice("transmission", "reflection"), "transmission"),
    "spectrum.start_mhz": (float, -150.0),
    "spectrum.stop_mhz": (float, 150.0),
    "spectrum.points": (int, 301),
    "spectrum.noise_counts": (float, 0.0),
    "spectrum.plot": (_bool, False),
    "fit.model": (_choice("lorentzian", "coupled_transmission", "coupled_reflection", "exp_decay"), "lorentzian"),
    "fit.t_max": (float, None),
    "trace.background_rate_hz": (float, 2.0e3),
    "trace.atom_rate_hz": (float, 5.0e4),
    "trace.bin_width_ms": (float, 1.0),
    "trace.duration_s": (float, 10.0),
    "trace.loading_rate_hz": (float, 1.0),
    "trace.lifetime_ms": (float, 230.0),
    "trace.seed": (int, 0),
    "simulate.mode": (_choice("trace", "survival"), "trace"),
    "survival.tau_ms": (_float_list, (50.0, 150.0, 250.0, 350.0, 450.0, 550.0, 650.0, 800.0)),
    "survival.trials": (int, 100),
    "detect.threshold_sigma": (float, 5.0),
    "detect.min_bins": (int, 2),
    "sweep.d_min_nm": (float, 10.0),
    "sweep.d_max_nm": (float, 2000.0),
    "sweep.points": (int, 50),
    "sweep.calibration": (_choice("ideal", "measured"), "measured"),
    "sweep.target_ratio": (float, None),
    "sweep.finesse": (float, 1000.0),
}


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def load(cls, path=None, overrides=()):
        raw = {}
        if path is not None:
            try:
                text = Path(path).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
            for lineno, line in enumerate(text.splitlines(), start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, value = (s.strip() for s in line.split("=", 1))
                raw[key] = (value, f"{path}:{lineno}")
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            key, value = (s.strip() for s in item.split("=", 1))
            raw[key] = (value, "--set")
        values = {k: default for k, (_, default) in KEYS.items()}
        for key, (value, origin) in raw.items():
            if key not in KEYS:
                raise ConfigError(f"{origin}: unknown key {key!r}")
            parser = KEYS[key][0]
            if value.lower() in ("", "none"):
                values[key] = None
                continue
            try:
                values[key] = parser(value)
            except ValueError as exc:
                raise ConfigError(f"{origin}: bad value for {key}: {exc}") from None
        return cls(values)

    def dump(self):
        """Resolved config as text; feeding it back reproduces the run."""
        lines = [f"{k} = {_format_value(v)}" for k, v in sorted(self.values.items()) if v is not None]
        return "\n".join(lines) + "\n"

    def require(self, key):
        value = self.values[key]
        if value is None:
            raise ConfigError(f"missing required key {key}")
        return value


# ---------------------------------------------------------------------------
# Derived objects


def atom_from(cfg: RunConfig) -> AtomModel:
    return AtomModel(cfg.require("atom.linewidth_mhz") * MHZ / 2.0, cfg.require("atom.wavelength_nm") * NM)


def geometry_from(cfg: RunConfig) -> CavityGeometry:
    radius = cfg.require("geometry.radius_of_curvature_mm") * MM
    wavelength = (cfg["geometry.wavelength_nm"] or cfg.require("atom.wavelength_nm")) * NM
    if cfg["geometry.cavity_length_mm"] is not None:
        return CavityGeometry(radius, cfg["geometry.cavity_length_mm"] * MM, wavelength)
    return CavityGeometry.near_concentric(radius, cfg.require("geometry.distance_to_concentric_um") * UM, wavelength)


def budget_from(cfg: RunConfig) -> LossBudget:
    length = geometry_from(cfg).cavity_length
    transmission = cfg.require("budget.mirror_transmission")
    if cfg["budget.finesse"] is not None:
        return LossBudget.from_finesse(cfg["budget.finesse"], transmission, length)
    return LossBudget.from_linewidth(cfg.require("budget.linewidth_mhz") * MHZ, transmission, length)


def system_from(cfg: RunConfig, coupling=None) -> CoupledSystem:
    budget = None
    if cfg["system.kappa_mhz"] is None or cfg["system.kappa_t_mhz"] is None:
        budget = budget_from(cfg)
    kappa = cfg["system.kappa_mhz"] * MHZ if cfg["system.kappa_mhz"] is not None else budget.cavity_field_decay
    kappa_t = cfg["system.kappa_t_mhz"] * MHZ if cfg["system.kappa_t_mhz"] is not None else budget.mirror_field_decay
    gamma = cfg["system.gamma_mhz"] * MHZ if cfg["system.gamma_mhz"] is not None else atom_from(cfg).dipole_decay_rate
    g0 = cfg.require("system.g0_mhz") * MHZ if coupling is None else coupling
    return CoupledSystem.with_offset(g0, kappa, kappa_t, gamma, cfg.require("system.offset_mhz") * MHZ)


def trace_config_from(cfg: RunConfig) -> TraceConfig:
    return TraceConfig(
        background_rate=cfg.require("trace.background_rate_hz"),
        atom_rate=cfg.require("trace.atom_rate_hz"),
        bin_width=cfg.require("trace.bin_width_ms") * MS,
        duration=cfg.require("trace.duration_s"),
        loading_rate=cfg.require("trace.loading_rate_hz"),
        lifetime_t0=cfg.require("trace.lifetime_ms") * MS,
        seed=cfg.require("trace.seed"),
    )


# ---------------------------------------------------------------------------
# Commands. Each returns (report rows, exit status) and writes its data files to ``out``.


def cmd_geometry(cfg, out):
    geom = geometry_from(cfg)
    atom = atom_from(cfg)
    props = mode_properties(geom)
    rows = [
        ("radius_of_curvature_mm", geom.radius_of_curvature / MM),
        ("cavity_length_mm", geom.cavity_length / MM),
        ("distance_to_concentric_um", props.distance_to_concentric / UM),
        ("stability_g", props.stability_g),
        ("free_spectral_range_mhz", props.free_spectral_range / 1e6),
        ("transverse_mode_spacing_mhz", props.transverse_mode_spacing / 1e6),
        ("waist_um", props.waist / UM),
        ("mode_volume_m3", props.mode_volume),
        ("g0_ideal_mhz", ideal_coupling(geom, atom) / MHZ),
        ("g0_ideal_over_gamma", ideal_coupling(geom, atom) / atom.dipole_decay_rate),
    ]
    radius = geom.radius_of_curvature
    if cfg["geometry.measured_spacing_mhz"] is not None:
        length = length_from_mode_spacing(cfg["geometry.measured_spacing_mhz"] * 1e6, radius)
        rows += [("length_from_spacing_mm", length / MM),
                 ("distance_from_spacing_um", (2 * radius - length) / UM),
                 ("stability_g_from_spacing", 1 - length / radius)]
    dual = [cfg[k] for k in ("geometry.dual_nu_a_thz", "geometry.dual_nu_b_thz", "geometry.dual_delta_n")]
    if any(v is not None for v in dual):
        if any(v is None for v in dual):
            raise ConfigError("dual-resonance length needs dual_nu_a_thz, dual_nu_b_thz and dual_delta_n")
        length = length_from_dual_resonance(dual[0] * 1e12, dual[1] * 1e12, dual[2])
        rows += [("length_from_dual_mm", length / MM),
                 ("distance_from_dual_um", (2 * radius - length) / UM),
                 ("stability_g_from_dual", 1 - length / radius)]
    return rows, EXIT_OK


def cmd_budget(cfg, out):
    geom = geometry_from(cfg)
    transmission = cfg.require("budget.mirror_transmission")
    rows = []
    if cfg["budget.finesse"] is None:
        width = cfg.require("budget.linewidth_mhz") * MHZ
        entries = budget_with_uncertainty(width, transmission, geom.cavity_length,
                                          linewidth_sigma=cfg["budget.linewidth_sigma_mhz"] * MHZ)
        budget = LossBudget.from_linewidth(width, transmission, geom.cavity_length)
    else:
        budget = LossBudget.from_finesse(cfg["budget.finesse"], transmission, geom.cavity_length)
        entries = {name: (getattr(budget, name), 0.0) for name in (
            "finesse", "round_trip_absorption", "incoupling_efficiency", "resonant_transmission",
            "cavity_field_decay", "mirror_field_decay")}
    scale = {"round_trip_absorption": 100.0, "incoupling_efficiency": 100.0, "resonant_transmission": 100.0,
             "cavity_field_decay": 1 / MHZ, "mirror_field_decay": 1 / MHZ}
    label = {"finesse": "finesse", "round_trip_absorption": "absorption_loss_pct",
             "incoupling_efficiency": "incoupling_efficiency_pct", "resonant_transmission": "resonant_transmission_pct",
             "cavity_field_decay": "kappa_mhz", "mirror_field_decay": "kappa_t_mhz"}
    for name, (value, sigma) in entries.items():
        f = scale.get(name, 1.0)
        rows.append((label[name], value * f))
        if sigma:
            rows.append((label[name] + "_sigma", sigma * f))
    rows.append(("full_linewidth_mhz", 2 * budget.cavity_field_decay / MHZ))
    if cfg["budget.g0_mhz"] is not None:
        gamma = atom_from(cfg).dipole_decay_rate
        rows.append(("cooperativity", cooperativity(cfg["budget.g0_mhz"] * MHZ, budget.cavity_field_decay, gamma)))
    return rows, EXIT_OK


def cmd_spectrum(cfg, out):
    sys_ = system_from(cfg)
    n = cfg.require("spectrum.points")
    if n < 1:
        raise ConfigError("spectrum.points must be >= 1")
    grid = np.linspace(cfg["spectrum.start_mhz"], cfg["spectrum.stop_mhz"], n) * MHZ
    which = cfg["spectrum.which"]
    coupled = sample_spectrum(sys_, grid, which)
    empty = sample_spectrum(sys_.empty(), grid, which)
    data = coupled
    if cfg["spectrum.noise_counts"]:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg["trace.seed"])))
        data = shot_noise(coupled, cfg["spectrum.noise_counts"], rng)
    path = io.write_spectrum(out / "spectrum.csv", data)
    rows = [("spectrum_file", str(path)), ("points", n),
            ("min_value", float(data.value.min())), ("max_value", float(data.value.max()))]
    if cfg["spectrum.plot"]:
        f = grid / MHZ
        plot = line_plot(out / "spectrum.svg",
                         [(f, empty.value, "gray", "empty cavity"), (f, coupled.value, "red", "with atom")],
                         xlabel="probe detuning (MHz)", ylabel=which)
        rows.append(("plot_file", str(plot)))
    return rows, EXIT_OK


def cmd_fit(cfg, out, input_path):
    if input_path is None:
        raise ConfigError("fit needs an input CSV")
    model = cfg["fit.model"]
    if model == "exp_decay":
        result = fit_exponential_decay(io.read_survival(input_path))
        scales = {"t0": ("t0_ms", 1 / MS), "p0": ("p0", 1.0)}
    else:
        data = io.read_spectrum(input_path)
        if model == "lorentzian":
            result = fit_lorentzian(data)
            scales = {"amplitude": ("amplitude", 1.0), "center": ("center_mhz", 1 / MHZ),
                      "fwhm": ("fwhm_mhz", 1 / MHZ), "offset": ("baseline", 1.0)}
        else:
            s = system_from(cfg, coupling=0.0)
            if model == "coupled_transmission":
                result = fit_coupled_transmission(data, s.cavity_decay_kappa, s.mirror_decay_kappaT,
                                                  s.atom_decay_gamma, t_max=cfg["fit.t_max"])
            else:
                result = fit_coupled_reflection(data, s.cavity_decay_kappa, s.mirror_decay_kappaT,
                                                s.atom_decay_gamma)
            scales = {"g0": ("g0_mhz", 1 / MHZ), "offset": ("offset_mhz", 1 / MHZ),
                      "far_reflection": ("far_reflection", 1.0)}
    rows = [("model", model)]
    for name in result.names:
        label, f = scales[name]
        rows.append((label, result[name] * f))
        if result.converged:
            rows.append((label + "_sigma", result.sigma(name) * f))
    rows += [("residual_norm", result.residual_norm), ("chi2", result.chi2), ("dof", result.dof),
             ("iterations", result.iterations), ("converged", result.converged)]
    return rows, EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_simulate(cfg, out):
    tcfg = trace_config_from(cfg)
    if cfg["simulate.mode"] == "survival":
        taus = [t * MS for t in cfg.require("survival.tau_ms")]
        result = survival_experiment(tcfg, taus, cfg.require("survival.trials"))
        path = io.write_survival(out / "survival.csv", result)
        return [("survival_file", str(path)), ("delays", len(result))], EXIT_OK
    trace = simulate_trace(tcfg)
    path = io.write_trace(out / "trace.csv", trace)
    truth = io.write_truth(io.truth_path(path), trace.truth_intervals)
    return [("trace_file", str(path)), ("truth_file", str(truth)), ("bins", trace.counts.size),
            ("total_counts", int(trace.counts.sum())), ("atom_events", len(trace.truth_intervals))], EXIT_OK


def cmd_detect(cfg, out, input_path):
    if input_path is None:
        raise ConfigError("detect needs an input trace CSV")
    trace = io.read_trace(input_path, truth=io.truth_path(input_path))
    events = detect_events(trace, cfg.require("detect.threshold_sigma"), cfg.require("detect.min_bins"))
    path = io.write_truth(out / "detections.csv", events)
    rows = [("detections_file", str(path)), ("events", len(events))]
    rows += [(f"event_{k}", f"{a:.10g}..{b:.10g}") for k, (a, b) in enumerate(events)]
    if trace.truth_intervals is not None:
        truth = trace.truth_intervals
        matched, within = match_events(events, truth, 2 * trace.bin_width)
        rows += [("truth_events", len(truth)),
                 ("precision", matched / len(events) if events else 1.0),
                 ("recall", matched / len(truth) if truth else 1.0),
                 ("boundaries_within_2_bins", within / len(truth) if truth else 1.0)]
    return rows, EXIT_OK


def cmd_sweep(cfg, out):
    geom = geometry_from(cfg)
    atom = atom_from(cfg)
    radius, wavelength = geom.radius_of_curvature, geom.wavelength
    d_range = (cfg.require("sweep.d_min_nm") * NM, cfg.require("sweep.d_max_nm") * NM)
    calibration = cfg["sweep.calibration"]
    table = concentric_sweep(radius, wavelength, atom, d_range, cfg.require("sweep.points"), calibration)
    finesse = cfg.require("sweep.finesse")
    target = cfg["sweep.target_ratio"]

    def row(d, g0, ratio, w0, marker):
        kappa = math.pi * SPEED_OF_LIGHT / (2.0 * finesse * (2 * radius - d))
        return (d / NM, g0 / MHZ, ratio, w0 / UM, cooperativity(g0, kappa, atom.dipole_decay_rate), marker)

    rows = [row(*r, 0) for r in zip(table.distance, table.coupling, table.ratio, table.waist)]
    report = [("calibration", calibration), ("points", len(rows))]
    if target is not None:
        d_star = distance_for_ratio(target, radius, wavelength, atom, d_range, calibration)
        point = concentric_sweep(radius, wavelength, atom, (d_star, d_star), 1, calibration)
        rows.append(row(d_star, point.coupling[0], point.ratio[0], point.waist[0], 1))
        rows.sort(key=lambda r: (r[0], r[5]))
        report += [("target_ratio", target), ("target_distance_nm", d_star / NM),
                   ("target_length_mm", (2 * radius - d_star) / MM)]
    path = io.write_table(out / "sweep.csv",
                          ("d_nm", "g0_mhz", "g0_over_gamma", "waist_um", "c0_fixed_finesse", "is_target"), rows)
    report.insert(0, ("sweep_file", str(path)))
    return report, EXIT_OK


COMMANDS = {
    "geometry": cmd_geometry,
    "budget": cmd_budget,
    "spectrum": cmd_spectrum,
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "detect": cmd_detect,
    "sweep": cmd_sweep,
}


def format_report(rows, fmt):
    def plain(v):
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (float, np.floating)):
            return format(float(v), ".10g")
        return str(v)

    if fmt == "json-lines":
        out = []
        for key, value in rows:
            if isinstance(value, (np.floating, np.integer, np.bool_)):
                value = value.item()
            out.append(json.dumps({"key": key, "value": value}))
        return "\n".join(out) + "\n"
    return "key,value\n" + "".join(f"{k},{plain(v)}\n" for k, v in rows)


def build_parser():
    parser = argparse.ArgumentParser(prog="ccqed", description="Near-concentric cavity QED toolkit")
    parser.add_argument("--config", help="plain-text 'key = value' config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable; wins over --config)")
    parser.add_argument("--out", default=None, help="output directory for data files (default: .)")
    parser.add_argument("--seed", type=int, default=None, help="shorthand for --set trace.seed=N")
    parser.add_argument("--format", choices=("csv", "json-lines"), default="csv", help="report format")
    parser.add_argument("--dump-config", action="store_true", help="also write the resolved config to OUT/config.txt")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("input", nargs="?", help="input file for fit/detect")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    overrides = list(args.set)
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
            return EXIT_CONFIG
        overrides.append(f"trace.seed={args.seed}")
    out = Path(args.out or ".")
    try:
        cfg = RunConfig.load(args.config, overrides)
        out.mkdir(parents=True, exist_ok=True)
        func = COMMANDS[args.command]
        if args.command in ("fit", "detect"):
            rows, status = func(cfg, out, args.input)
        else:
            rows, status = func(cfg, out)
        if args.dump_config:
            (out / "config.txt").write_text(cfg.dump(), encoding="utf-8")
    except (InputError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CavityQEDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    sys.stdout.write(format_report(rows, args.format))
    if status == EXIT_NOT_CONVERGED:
        print("error: fit did not converge", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
