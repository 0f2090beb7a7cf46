"""``fibersieve`` command-line front end.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as fio
from .config import (
    analysis_from,
    beams_from,
    fiber_from,
    load_config,
    particle_from,
    particle_kwargs,
    render_from,
    sim_from,
    sweep_from,
)
from .errors import ConfigError, NumericalError
from .modes import find_crossover, surface_intensity_curve
from .particles import size_sweep
from .pipeline import analyze, run_point, sweep
from .taper import TaperGeometry, balance_power, find_traps, force_profile, potential, touch_points

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _wl_tag(wl):
    return f"{wl:g}"


def _emit(args, name, fig_fn, *fig_args):
    """Render a PNG next to the data when ``--plot`` was requested."""
    if args.plot:
        from . import plotting

        getattr(plotting, fig_fn)(*fig_args, args.out / name)


def cmd_modes(args, config):
    fiber = fiber_from(config)
    wls = (config["beams.wavelength1_nm"], config["beams.wavelength2_nm"])
    curve = surface_intensity_curve(
        fiber, wls, config["modes.d_min_nm"], config["modes.d_max_nm"], config["modes.step_nm"]
    )
    comments = {f"cutoff_{_wl_tag(wl)}_nm": d for wl, d in curve.cutoff_nm.items()}
    comments["truncated_below_cutoff"] = "yes" if curve.cutoff_nm else "no"
    brackets = curve.crossings() if len(set(wls)) == 2 else []
    if brackets:
        comments["crossover_nm"] = repr(find_crossover(fiber, *brackets[0], wls))
    columns = ["diameter_nm"] + [f"I_{_wl_tag(wl)}_per_W" for wl in wls]
    if wls[0] == wls[1]:
        columns[2] += "_b"
    fio.write_csv(args.out / "surface_intensity.csv", columns, np.column_stack([curve.diameters_nm, *curve.intensity]),
                  comments)
    _emit(args, "surface_intensity.png", "plot_surface_intensity", curve)
    for key, value in comments.items():
        print(f"{key}: {value}")


def cmd_forces(args, config):
    fiber = fiber_from(config)
    wls = (config["beams.wavelength1_nm"], config["beams.wavelength2_nm"])
    sizes = np.arange(config["forces.d_min_nm"], config["forces.d_max_nm"] + config["forces.step_nm"] / 2,
                      config["forces.step_nm"])
    table = size_sweep(fiber, sizes, wavelengths_nm=wls, **particle_kwargs(config))
    columns = ["D_nm", f"F{_wl_tag(wls[0])}_pN_per_mW", f"F{_wl_tag(wls[1])}_pN_per_mW", "R"]
    fio.write_csv(args.out / "forces.csv", columns, table, {"waist_diameter_nm": fiber.waist_diameter_nm})
    _emit(args, "forces.png", "plot_forces", table)
    for row in table:
        print(f"D={row[0]:g} nm  R={row[3]:.4g}")


def cmd_trap(args, config):
    fiber = fiber_from(config)
    particle = particle_from(config)
    beams = beams_from(config)
    balance = None
    if beams.p2_mW > 0:
        balance = balance_power(particle, fiber, beams.p2_mW, beams)
    factor = config["beams.p1_balance_factor"]
    if factor is not None:
        if balance is None:
            raise ConfigError("beams.p1_balance_factor needs beams.p2_mW > 0")
        beams = beams_from(config, p1_mW=factor * balance)
    geometry = TaperGeometry.uniform(fiber, config["geometry.z_max_um"], config["geometry.dz_um"])
    profile = force_profile(geometry, particle, beams)
    report = find_traps(profile)
    pot = potential(profile)
    flats = touch_points(profile, z_min_um=0.0)
    minima = pot.local_minima((0.0, np.inf))
    if report.traps:
        status = "trap"
    elif flats and not minima:
        status = "inflection"
    else:
        status = "none"

    wl1, wl2 = _wl_tag(beams.wavelength1_nm), _wl_tag(beams.wavelength2_nm)
    rows = np.column_stack([profile.z_um, profile.diameter_nm, profile.f1_pN, profile.f2_pN, profile.delta_pN,
                            pot.u_kBT])
    fio.write_csv(args.out / "trap_profile.csv", ["z_um", "d_nm", f"F{wl1}_pN", f"F{wl2}_pN", "dF_pN", "U_kBT"], rows,
                  {"particle_diameter_nm": particle.diameter_nm, "p1_mW": beams.p1_mW, "p2_mW": beams.p2_mW})
    summary = report.to_dict()
    summary.update(
        status=status,
        p1_mW=beams.p1_mW,
        p2_mW=beams.p2_mW,
        balance_p1_mW=balance,
        particle_diameter_nm=particle.diameter_nm,
        inflection_intervals_um=[list(iv) for iv in flats],
        minima_z_positive_um=minima,
    )
    (args.out / "trap_report.json").write_text(json.dumps(summary, indent=2))
    _emit(args, "trap.png", "plot_trap", profile, pot, report)
    print(f"status: {status}")
    for c in report.crossings:
        print(f"{c.kind} at z = {c.z_um:.2f} um, stiffness {c.stiffness_pN_per_um:.3g} pN/um")
    if report.depth_kBT is not None:
        print(f"depth: {report.depth_kBT:.1f} kBT")


def _write_analysis(out, result, kymo, args, prefix=""):
    fio.write_peaks(out / f"{prefix}peaks.csv", result.peaks)
    fio.write_lines(out / f"{prefix}lines.csv", result.lines)
    fio.write_trajectories(out / f"{prefix}trajectories.json", result.trajectories)
    mean_v, std_v = result.velocity_summary()
    summary = {
        "theta_deg": result.theta_deg,
        "num_peaks": len(result.peaks),
        "num_trajectories": len(result.trajectories),
        "mean_velocity_um_s": None if np.isnan(mean_v) else mean_v,
        "std_velocity_um_s": None if np.isnan(std_v) else std_v,
    }
    (out / f"{prefix}analysis.json").write_text(json.dumps(summary, indent=2))
    if args.plot:
        from . import plotting

        with np.errstate(divide="ignore", invalid="ignore"):
            plotting.plot_kymograph(kymo, result, out / f"{prefix}kymograph.png")
    return summary


def cmd_simulate(args, config):
    from .pipeline import simulate_point

    fiber = fiber_from(config)
    sim = sim_from(config, args.seed)
    beams = beams_from(config)
    result, profiles, kymo = simulate_point(fiber, sim, beams, render_from(config), config["geometry.z_max_um"],
                                            config["geometry.dz_um"])
    fio.write_kymograph_csv(args.out / "kymograph.csv", kymo)
    fio.write_pgm(args.out / "kymograph.pgm", kymo)
    fio.write_truth(args.out / "truth.csv", result)
    if args.plot:
        from . import plotting

        plotting.plot_kymograph(kymo, None, args.out / "kymograph.png")
    print(f"injected: {result.injected}")
    print(f"frames: {kymo.num_frames}, pixels: {kymo.num_pixels}")


def cmd_analyze(args, config):
    calibration = {
        "pixel_pitch_um": config["analysis.pixel_pitch_um"],
        "frame_period_s": config["analysis.frame_period_s"],
    }
    path = Path(args.input)
    if not path.exists():
        raise ConfigError(f"input file {path} does not exist")
    kymo = fio.read_kymograph(path, **calibration)
    result = analyze(kymo, analysis_from(config))
    summary = _write_analysis(args.out, result, kymo, args)
    for key, value in summary.items():
        print(f"{key}: {value}")
    return {str(path): fio.sha256(path)}


def cmd_sweep(args, config):
    spec = sweep_from(config)
    workers = args.workers if args.workers is not None else config["sweep.workers"]
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    points = sweep(spec, fiber_from(config), sim_from(config, args.seed), render_from(config), analysis_from(config),
                   seed=args.seed, workers=workers, z_max_um=config["geometry.z_max_um"], dz_um=config["geometry.dz_um"],
                   beams=beams_from(config), particle_kwargs=particle_kwargs(config))
    rows = []
    for i, pt in enumerate(points):
        point_dir = args.out / f"point_{i:02d}_p1_{pt.p1_mW:g}mW"
        point_dir.mkdir(parents=True, exist_ok=True)
        fio.write_pgm(point_dir / "kymograph.pgm", pt.kymograph)
        _write_analysis(point_dir, pt.analysis, pt.kymograph, args)
        row = pt.summary_row()
        n = max(row["n_trajectories"], 1)
        row["sem_velocity_um_s"] = row["std_velocity_um_s"] / np.sqrt(n)
        rows.append(row)
    columns = ["P1_mW", "P2_mW", "seed", "theta_deg", "votes", "mean_velocity_um_s", "std_velocity_um_s",
               "sem_velocity_um_s", "n_trajectories", "n_injected"]
    fio.write_csv(args.out / "sweep_summary.csv", columns,
                  [[np.nan if r[c] is None else r[c] for c in columns] for r in rows],
                  {"scenario": spec.scenario})
    _emit(args, "sweep.png", "plot_sweep", points)
    for r in rows:
        print(f"P1={r['P1_mW']:g} mW  theta={r['theta_deg']}  v={r['mean_velocity_um_s']:.3g} um/s  "
              f"tracks={r['n_trajectories']}")


COMMANDS = {
    "modes": (cmd_modes, "surface intensity versus fiber diameter"),
    "forces": (cmd_forces, "per-mW axial forces and their ratio versus particle size"),
    "trap": (cmd_trap, "net force, potential and trap report along the taper"),
    "simulate": (cmd_simulate, "Brownian transport and a rendered kymograph"),
    "analyze": (cmd_analyze, "peaks, Hough lines and trajectories of a kymograph file"),
    "sweep": (cmd_sweep, "simulate and analyse over a list of beam-1 powers"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="fibersieve", description="Two-color nanofiber taper trap model.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="YAML config with flat namespaced keys")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--seed", type=int, default=0, help="master random seed (non-negative)")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--plot", action="store_true", help="also write PNG figures")
        if name == "sweep":
            p.add_argument("--workers", type=int, default=None, help="parallel sweep points")
        if name == "analyze":
            p.add_argument("input", help="kymograph file (.csv or .pgm)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        config = load_config(args.config, args.overrides)
        args.out.mkdir(parents=True, exist_ok=True)
        inputs = COMMANDS[args.command][0](args, config)
        fio.write_manifest(args.out, config, args.seed, args.command, __version__, inputs)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
