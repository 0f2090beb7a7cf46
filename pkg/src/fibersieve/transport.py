"""Overdamped Brownian transport along the fiber and synthetic kymographs.

Particles are held on the fiber surface by the gradient force, so only the
axial coordinate is integrated (Euler-Maruyama)::

    z += dF(z) / gamma * dt + sqrt(2 D dt) * xi,   D = kB T / gamma

with Stokes drag ``gamma = 6 pi eta a`` multiplied by a near-wall factor.
Every particle draws its noise from its own seed sequence keyed by
``(master seed, species, particle index)``, so results do not depend on how
particles are batched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import constants

from .errors import ConfigError
from .particles import polarizability

STABILITY_LIMIT = 0.1


def drag_coefficient(particle, viscosity_Pa_s=1.0e-3, wall_factor=3.0):
    """Translational drag [pN s/um] of a sphere, times the near-wall factor."""
    return 6 * np.pi * viscosity_Pa_s * particle.radius_nm * 1e-9 * wall_factor * 1e6


def thermal_energy(temperature_K):
    """kB T in pN um."""
    return constants.k * temperature_K * 1e18


def step(z_um, force_pN, dt_s, drag, kbt, noise=None):
    """Advance positions by one Euler-Maruyama step.

    ``noise`` is either a ``numpy.random.Generator`` or an array of standard
    normal deviates matching ``z_um``; it is ignored when ``kbt`` is zero.
    """
    z = np.asarray(z_um, dtype=float)
    drift = np.asarray(force_pN, dtype=float) / drag * dt_s
    if kbt == 0 or noise is None:
        return z + drift
    xi = noise.standard_normal(z.shape) if isinstance(noise, np.random.Generator) else np.asarray(noise)
    return z + drift + np.sqrt(2 * kbt / drag * dt_s) * xi


def max_restoring_stiffness(profile):
    """Largest ``-d(dF)/dz`` [pN/um] on a force profile (0 if nowhere restoring)."""
    delta = profile.delta_pN
    ok = np.isfinite(delta)
    if ok.sum() < 2:
        return 0.0
    slope = np.gradient(delta[ok], profile.z_um[ok])
    return float(max(0.0, np.max(-slope)))


def check_timestep(profile, drag, dt_s):
    """Raise :class:`ConfigError` unless ``kappa dt / gamma < 0.1`` on ``profile``."""
    kappa = max_restoring_stiffness(profile)
    if kappa * dt_s / drag >= STABILITY_LIMIT:
        raise ConfigError(
            f"timestep {dt_s} s unstable: kappa*dt/gamma = {kappa * dt_s / drag:.3g} >= {STABILITY_LIMIT}"
        )


@dataclass(frozen=True)
class Species:
    """One particle population; ``weight`` is its concentration in 1e5 particles/uL."""

    particle: object
    weight: float = 1.0

    def __post_init__(self):
        if self.weight < 0:
            raise ConfigError("species weight must be non-negative")


@dataclass(frozen=True)
class SimConfig:
    """Simulation and camera settings. Frame timing and calibration are assumptions."""

    species: tuple
    duration_s: float = 20.0
    dt_s: float = 0.005
    temperature_K: float = 293.0
    viscosity_Pa_s: float = 1.0e-3
    wall_factor: float = 3.0
    injection_rate_per_s: float = 1.0  # per unit species weight
    burn_in_s: float = 20.0
    frame_period_s: float = 0.05
    pixel_pitch_um: float = 0.5
    detachment_rate_per_s: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.dt_s <= 0 or self.duration_s < self.dt_s:
            raise ConfigError("need dt_s > 0 and duration_s >= dt_s")
        if self.frame_period_s <= 0 or self.pixel_pitch_um <= 0:
            raise ConfigError("frame_period_s and pixel_pitch_um must be positive")
        ratio = self.frame_period_s / self.dt_s
        if abs(ratio - round(ratio)) > 1e-6:
            raise ConfigError("frame_period_s must be an integer multiple of dt_s")
        if self.burn_in_s < 0 or self.injection_rate_per_s < 0 or self.detachment_rate_per_s < 0:
            raise ConfigError("burn_in_s, injection and detachment rates must be >= 0")
        if not self.species:
            raise ConfigError("at least one species is required")

    @property
    def num_frames(self):
        return int(round(self.duration_s / self.frame_period_s))


@dataclass
class TrajectoryTruth:
    """Ground-truth path of one particle, sampled at frame times ``t >= 0``."""

    particle_id: int
    species: str
    species_index: int
    entry_time_s: float
    exit_time_s: float | None
    t_s: np.ndarray
    z_um: np.ndarray


@dataclass
class SimulationResult:
    truths: list
    config: SimConfig
    z_range_um: tuple
    injected: dict = field(default_factory=dict)

    @property
    def num_injected(self):
        return sum(self.injected.values())


def _particle_rng(seed, species_index, k):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, species_index, k)))


def run(config, profiles):
    """Simulate all species of ``config`` under their force ``profiles``.

    Particles arrive as a Poisson process (rate ``injection_rate_per_s *
    weight``) at uniform positions across the profile window, from
    ``-burn_in_s`` on, and are removed when they leave the window.
    """
    if len(profiles) != len(config.species):
        raise ConfigError("one force profile per species is required")
    z_lo = max(p.z_um[0] for p in profiles)
    z_hi = min(p.z_um[-1] for p in profiles)
    dt = config.dt_s
    n_steps = int(round((config.burn_in_s + config.duration_s) / dt))
    frame_every = int(round(config.frame_period_s / dt))
    first_frame_step = int(round(config.burn_in_s / dt))
    kbt = thermal_energy(config.temperature_K)

    drags = []
    for sp, prof in zip(config.species, profiles):
        drag = drag_coefficient(sp.particle, config.viscosity_Pa_s, config.wall_factor)
        check_timestep(prof, drag, dt)
        drags.append(drag)

    # arrivals
    t0 = -config.burn_in_s
    total = config.burn_in_s + config.duration_s
    arrivals = []  # (step, species, k, z0)
    injected = {}
    for s, sp in enumerate(config.species):
        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(0, s)))
        n = rng.poisson(config.injection_rate_per_s * sp.weight * total)
        times = np.sort(rng.uniform(0.0, total, n))
        z0 = rng.uniform(z_lo, z_hi, n)
        injected[sp.particle.label()] = injected.get(sp.particle.label(), 0) + int(n)
        for k in range(n):
            arrivals.append((min(int(np.ceil(times[k] / dt)), n_steps - 1), s, k, z0[k]))
    arrivals.sort(key=lambda a: (a[0], a[1], a[2]))

    n_p = len(arrivals)
    start = np.array([a[0] for a in arrivals], dtype=int)
    spec_idx = np.array([a[1] for a in arrivals], dtype=int)
    z = np.array([a[3] for a in arrivals], dtype=float)
    noise = np.zeros((n_p, n_steps))
    detach = np.full(n_p, n_steps + 1)
    for i, (st, s, k, _) in enumerate(arrivals):
        rng = _particle_rng(config.seed, s, k)
        noise[i, : n_steps - st] = rng.standard_normal(n_steps - st)
        if config.detachment_rate_per_s > 0:
            detach[i] = st + int(np.ceil(rng.exponential(1 / config.detachment_rate_per_s) / dt))

    active = np.zeros(n_p, dtype=bool)
    alive = np.ones(n_p, dtype=bool)
    exit_step = np.full(n_p, -1)
    samples_t = [[] for _ in range(n_p)]
    samples_z = [[] for _ in range(n_p)]
    drag_arr = np.array([drags[s] for s in spec_idx]) if n_p else np.zeros(0)
    sqrt_term = np.sqrt(2 * kbt / drag_arr * dt) if n_p else np.zeros(0)

    for n in range(n_steps + 1):
        if n_p:
            active |= (start == n) & alive
            gone = active & (detach <= n)
            if gone.any():
                active &= ~gone
                alive &= ~gone
                exit_step[gone] = n
        if n >= first_frame_step and (n - first_frame_step) % frame_every == 0 and n < n_steps:
            t = (n - first_frame_step) * dt
            for i in np.flatnonzero(active):
                samples_t[i].append(t)
                samples_z[i].append(z[i])
        if n == n_steps or not active.any():
            continue
        idx = np.flatnonzero(active)
        force = np.empty(idx.size)
        for s, prof in enumerate(profiles):
            sel = spec_idx[idx] == s
            if sel.any():
                force[sel] = np.interp(z[idx[sel]], prof.z_um, prof.delta_pN)
        xi = noise[idx, n - start[idx]]
        z[idx] = z[idx] + force / drag_arr[idx] * dt + sqrt_term[idx] * xi
        out = (z[idx] < z_lo) | (z[idx] > z_hi)
        if out.any():
            leaving = idx[out]
            active[leaving] = False
            alive[leaving] = False
            exit_step[leaving] = n + 1

    truths = []
    for i, (st, s, k, _) in enumerate(arrivals):
        ex = None if exit_step[i] < 0 else (exit_step[i] - first_frame_step) * dt
        truths.append(
            TrajectoryTruth(
                i, config.species[s].particle.label(), s, (st - first_frame_step) * dt, ex,
                np.array(samples_t[i]), np.array(samples_z[i]),
            )
        )
    return SimulationResult(truths, config, (float(z_lo), float(z_hi)), injected)


@dataclass(frozen=True)
class Kymograph:
    """Intensity matrix ``I[f, p]`` (frame, pixel) with calibration.

    Pixel ``p`` is centred at ``z_origin_um + p * pixel_pitch_um``.
    """

    intensity: np.ndarray
    pixel_pitch_um: float
    frame_period_s: float
    z_origin_um: float = 0.0

    def __post_init__(self):
        if self.intensity.ndim != 2:
            raise ConfigError("kymograph must be two-dimensional")
        if self.pixel_pitch_um <= 0 or self.frame_period_s <= 0:
            raise ConfigError("pixel_pitch_um and frame_period_s must be positive")

    @property
    def num_frames(self):
        return self.intensity.shape[0]

    @property
    def num_pixels(self):
        return self.intensity.shape[1]

    def pixel_of(self, z_um):
        return (np.asarray(z_um) - self.z_origin_um) / self.pixel_pitch_um


@dataclass(frozen=True)
class RenderConfig:
    """Camera model: Gaussian PSF, constant background, read and shot noise.

    ``gain`` converts scattered power [mW] into counts; the shot-noise
    variance is ``shot_factor`` times the noiseless counts.
    """

    psf_sigma_um: float = 1.0
    gain_counts_per_mW: float = 1000.0
    background: float = 20.0
    read_noise: float = 2.0
    shot_factor: float = 0.2


def scattering_brightness(particle, profile, beams):
    """Scattered power [mW] of ``particle`` at each z of ``profile``.

    ``sigma_scat * I_local * P`` summed over both beams, with ``I_local`` the
    per-watt intensity at the particle centre.
    """
    s1 = polarizability(particle, beams.wavelength1_nm).sigma_scat * 1e-6
    s2 = polarizability(particle, beams.wavelength2_nm).sigma_scat * 1e-6
    return s1 * profile.intensity1 * beams.p1_mW + s2 * profile.intensity2 * beams.p2_mW


def render_kymograph(result, profiles, render=None, seed=None, noise=True):
    """Render the ensemble of ``result`` into a :class:`Kymograph`.

    Each particle present in a frame adds a Gaussian spot whose amplitude is
    its scattered power times ``render.gain_counts_per_mW``.
    """
    render = render or RenderConfig()
    cfg = result.config
    z_lo, z_hi = result.z_range_um
    pitch = cfg.pixel_pitch_um
    n_pix = int(np.floor((z_hi - z_lo) / pitch)) + 1
    pixel_z = z_lo + pitch * np.arange(n_pix)
    image = np.full((cfg.num_frames, n_pix), 0.0)
    brightness = [
        scattering_brightness(sp.particle, prof, prof.beams) for sp, prof in zip(cfg.species, profiles)
    ]
    half = 5 * render.psf_sigma_um
    for tr in result.truths:
        if tr.t_s.size == 0:
            continue
        frames = np.rint(tr.t_s / cfg.frame_period_s).astype(int)
        prof = profiles[tr.species_index]
        amp = render.gain_counts_per_mW * np.interp(tr.z_um, prof.z_um, brightness[tr.species_index])
        for f, zc, a in zip(frames, tr.z_um, amp):
            lo = np.searchsorted(pixel_z, zc - half)
            hi = np.searchsorted(pixel_z, zc + half)
            image[f, lo:hi] += a * np.exp(-0.5 * ((pixel_z[lo:hi] - zc) / render.psf_sigma_um) ** 2)
    image += render.background
    if noise:
        seed = cfg.seed if seed is None else seed
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
        sd = np.sqrt(render.read_noise**2 + render.shot_factor * image)
        image = image + sd * rng.standard_normal(image.shape)
    np.clip(image, 0.0, None, out=image)
    return Kymograph(image, pitch, cfg.frame_period_s, float(z_lo))
