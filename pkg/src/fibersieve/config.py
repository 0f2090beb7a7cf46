"""Flat, namespaced run configuration loaded from YAML with command-line overrides.

Keys look like ``fiber.waist_diameter_nm`` and always carry their unit. A
config file may use the dotted form directly or nest the sections; both are
flattened to the same dictionary.
"""

from __future__ import annotations

import yaml

from .errors import ConfigError
from .modes import FiberSpec
from .particles import ParticleSpec
from .pipeline import AnalysisConfig, SweepSpec, scenario_species
from .taper import BeamConfig
from .transport import RenderConfig, SimConfig

DEFAULTS = {
    "fiber.core_index": 1.45,
    "fiber.medium_index": 1.33,
    "fiber.waist_diameter_nm": 550.0,
    "fiber.waist_length_um": 200.0,
    "fiber.taper_slope_nm_per_um": 2.0,
    "particle.diameter_nm": 100.0,
    "particle.permittivity_model": "drude-lorentz",
    "particle.polarizability_model": "mie-a1",
    "beams.p1_mW": 0.0,
    "beams.p2_mW": 12.0,
    # when set, P1 becomes this multiple of the balance power of the particle
    "beams.p1_balance_factor": None,
    "beams.wavelength1_nm": 640.0,
    "beams.wavelength2_nm": 785.0,
    "beams.polarization_angle_rad": 0.0,
    "beams.swapped": False,
    "geometry.z_max_um": 400.0,
    "geometry.dz_um": 1.0,
    "modes.d_min_nm": 400.0,
    "modes.d_max_nm": 1500.0,
    "modes.step_nm": 5.0,
    "forces.d_min_nm": 80.0,
    "forces.d_max_nm": 200.0,
    "forces.step_nm": 5.0,
    "sim.scenario": "150-only",
    "sim.duration_s": 20.0,
    "sim.dt_s": 0.005,
    "sim.temperature_K": 293.0,
    "sim.viscosity_Pa_s": 1.0e-3,
    "sim.wall_factor": 3.0,
    "sim.injection_rate_per_s": 1.0,
    "sim.burn_in_s": 20.0,
    "sim.frame_period_s": 0.05,
    "sim.pixel_pitch_um": 0.5,
    "sim.detachment_rate_per_s": 0.0,
    "render.psf_sigma_um": 1.0,
    "render.gain_counts_per_mW": 1000.0,
    "render.background": 20.0,
    "render.read_noise": 2.0,
    "render.shot_factor": 0.2,
    "analysis.min_prominence": None,
    "analysis.min_separation_px": 3,
    "analysis.smooth_px": 2.0,
    "analysis.min_height": None,
    "analysis.theta_step_deg": 1.0,
    "analysis.rho_step": 1.0,
    "analysis.nms_window": 5,
    "analysis.max_shared_votes": 0.5,
    "analysis.num_lines": 5,
    "analysis.max_gap_frames": 2,
    "analysis.max_jump_px": 80.0,
    "analysis.min_length": 5,
    "analysis.exclude_stuck": True,
    "analysis.pixel_pitch_um": None,
    "analysis.frame_period_s": None,
    "sweep.p1_mW": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
    "sweep.workers": 1,
}

# keys whose default is None but whose values must be numeric
_NUMERIC_OPTIONAL = {
    "beams.p1_balance_factor",
    "analysis.min_prominence",
    "analysis.min_height",
    "analysis.pixel_pitch_um",
    "analysis.frame_period_s",
}


def flatten(mapping, prefix=""):
    out = {}
    for key, value in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(flatten(value, name + "."))
        else:
            out[name] = value
    return out


def _coerce(key, value):
    default = DEFAULTS[key]
    if value is None:
        if default is None:
            return None
        raise ConfigError(f"{key} must not be empty")
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ValueError("expected true or false")
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or float(value) != int(value):
                raise ValueError("expected an integer")
            return int(value)
        if isinstance(default, float) or key in _NUMERIC_OPTIONAL:
            if isinstance(value, bool):
                raise ValueError("expected a number")
            return float(value)
        if isinstance(default, list):
            if not isinstance(value, (list, tuple)):
                value = [value]
            return [float(v) for v in value]
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: invalid value {value!r} ({exc})") from None


def _apply(config, updates, origin):
    for key, value in updates.items():
        if key not in DEFAULTS:
            raise ConfigError(f"{origin}: unknown key {key!r}")
        config[key] = _coerce(key, value)


def parse_override(text):
    """``key=value`` with the value parsed as a YAML scalar or list."""
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {text!r} is not of the form key=value")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {text!r}: {exc}") from None
    return key.strip(), value


def load_config(path=None, overrides=()):
    """Defaults, then the YAML file at ``path``, then ``key=value`` overrides."""
    config = dict(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        _apply(config, flatten(data), str(path))
    _apply(config, dict(parse_override(o) for o in overrides), "override")
    return config


# -- builders -----------------------------------------------------------------


def fiber_from(config):
    return FiberSpec(
        config["fiber.core_index"],
        config["fiber.medium_index"],
        config["fiber.waist_diameter_nm"],
        config["fiber.waist_length_um"],
        config["fiber.taper_slope_nm_per_um"],
    )


def particle_kwargs(config):
    return {
        "permittivity_model": config["particle.permittivity_model"],
        "medium_index": config["fiber.medium_index"],
        "polarizability_model": config["particle.polarizability_model"],
    }


def particle_from(config, diameter_nm=None):
    d = config["particle.diameter_nm"] if diameter_nm is None else diameter_nm
    return ParticleSpec(d, **particle_kwargs(config))


def beams_from(config, p1_mW=None):
    return BeamConfig(
        config["beams.p1_mW"] if p1_mW is None else p1_mW,
        config["beams.p2_mW"],
        config["beams.polarization_angle_rad"],
        config["beams.wavelength1_nm"],
        config["beams.wavelength2_nm"],
        config["beams.swapped"],
    )


def sim_from(config, seed):
    species = scenario_species(config["sim.scenario"], **particle_kwargs(config))
    return SimConfig(
        species,
        duration_s=config["sim.duration_s"],
        dt_s=config["sim.dt_s"],
        temperature_K=config["sim.temperature_K"],
        viscosity_Pa_s=config["sim.viscosity_Pa_s"],
        wall_factor=config["sim.wall_factor"],
        injection_rate_per_s=config["sim.injection_rate_per_s"],
        burn_in_s=config["sim.burn_in_s"],
        frame_period_s=config["sim.frame_period_s"],
        pixel_pitch_um=config["sim.pixel_pitch_um"],
        detachment_rate_per_s=config["sim.detachment_rate_per_s"],
        seed=seed,
    )


def render_from(config):
    return RenderConfig(
        config["render.psf_sigma_um"],
        config["render.gain_counts_per_mW"],
        config["render.background"],
        config["render.read_noise"],
        config["render.shot_factor"],
    )


def analysis_from(config):
    return AnalysisConfig(
        min_prominence=config["analysis.min_prominence"],
        min_separation=config["analysis.min_separation_px"],
        smooth_px=config["analysis.smooth_px"],
        min_height=config["analysis.min_height"],
        theta_step_deg=config["analysis.theta_step_deg"],
        rho_step=config["analysis.rho_step"],
        nms_window=config["analysis.nms_window"],
        max_shared_votes=config["analysis.max_shared_votes"],
        num_lines=config["analysis.num_lines"],
        max_gap_frames=config["analysis.max_gap_frames"],
        max_jump_pixels=config["analysis.max_jump_px"],
        min_length=config["analysis.min_length"],
        exclude_stuck=config["analysis.exclude_stuck"],
    )


def sweep_from(config):
    return SweepSpec(tuple(config["sweep.p1_mW"]), config["beams.p2_mW"], config["sim.scenario"])

