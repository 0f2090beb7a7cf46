"""Axial force landscape, zero crossings and trapping potential along a taper."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import constants
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from .errors import ConfigError, ModeCutoffError, NumericalError
from .particles import local_intensity, unit_axial_force

TEMPERATURE_K = 293.0


def kbt_pn_um(temperature_K=TEMPERATURE_K):
    """Thermal energy in pN um."""
    return constants.k * temperature_K * 1e18


@dataclass(frozen=True)
class BeamConfig:
    """Counter-propagating guided powers.

    By default beam 1 (640 nm) travels toward +z and beam 2 (785 nm) toward
    -z; ``swapped=True`` reverses both directions.
    """

    p1_mW: float = 0.0
    p2_mW: float = 12.0
    polarization_angle: float = 0.0
    wavelength1_nm: float = 640.0
    wavelength2_nm: float = 785.0
    swapped: bool = False

    def __post_init__(self):
        if self.p1_mW < 0 or self.p2_mW < 0:
            raise ConfigError("beam powers must be non-negative")

    def with_p1(self, p1_mW):
        return BeamConfig(p1_mW, self.p2_mW, self.polarization_angle, self.wavelength1_nm, self.wavelength2_nm, self.swapped)


@dataclass(frozen=True)
class TaperGeometry:
    """Axial sampling of a :class:`FiberSpec` taper, z = 0 at the waist centre."""

    fiber: object
    z_um: np.ndarray = field(repr=False)

    @classmethod
    def uniform(cls, fiber, z_max_um=400.0, dz_um=1.0):
        n = int(round(2 * z_max_um / dz_um))
        return cls(fiber, np.linspace(-z_max_um, z_max_um, n + 1))

    @property
    def diameter_nm(self):
        return self.fiber.diameter_at(self.z_um)

    def mirrored(self):
        return TaperGeometry(self.fiber, np.sort(-self.z_um))


def _unit_forces(particle, fiber, beams, diameters):
    """Per-mW force magnitudes and intensities at each diameter; NaN beyond cutoff."""
    out = np.full((4, len(diameters)), np.nan)
    for j, d in enumerate(diameters):
        try:
            for i, wl in enumerate((beams.wavelength1_nm, beams.wavelength2_nm)):
                out[i, j] = unit_axial_force(particle, fiber, wl, d, polarization_angle=beams.polarization_angle)
                out[2 + i, j] = local_intensity(particle, fiber, wl, d, polarization_angle=beams.polarization_angle)
        except ModeCutoffError:
            out[:, j] = np.nan
    return out


@dataclass(frozen=True)
class ForceProfile:
    """Axial forces [pN] along z for one particle species and beam setting.

    ``f1_pN`` and ``f2_pN`` are force magnitudes from beams 1 and 2;
    ``delta_pN = f1 - f2`` is the net force along +z (sign reversed when the
    beams are swapped). ``intensity1``/``intensity2`` are per-watt
    intensities [1/um^2] at the particle centre, kept for rendering.
    """

    z_um: np.ndarray
    diameter_nm: np.ndarray
    f1_pN: np.ndarray
    f2_pN: np.ndarray
    beams: BeamConfig
    particle: object = None
    fiber: object = None
    intensity1: np.ndarray | None = None
    intensity2: np.ndarray | None = None
    delta_override: np.ndarray | None = None

    @classmethod
    def from_delta(cls, z_um, delta_pN):
        """Profile from a given net force, e.g. analytic test landscapes."""
        z = np.asarray(z_um, dtype=float)
        d = np.asarray(delta_pN, dtype=float)
        zeros = np.zeros_like(z)
        return cls(z, zeros, np.maximum(d, 0), np.maximum(-d, 0), BeamConfig(0.0, 0.0), delta_override=d)

    @property
    def delta_pN(self):
        if self.delta_override is not None:
            return self.delta_override
        sign = -1.0 if self.beams.swapped else 1.0
        return sign * (self.f1_pN - self.f2_pN)

    @property
    def valid(self):
        return np.isfinite(self.delta_pN)

    def delta_at(self, z_um):
        """Net force at arbitrary z; re-solves the modes when the physics is attached."""
        z = np.atleast_1d(np.asarray(z_um, dtype=float))
        if self.particle is None or self.fiber is None:
            out = np.interp(z, self.z_um, self.delta_pN)
        else:
            u = _unit_forces(self.particle, self.fiber, self.beams, self.fiber.diameter_at(z))
            sign = -1.0 if self.beams.swapped else 1.0
            out = sign * (self.beams.p1_mW * u[0] - self.beams.p2_mW * u[1])
        return out if np.ndim(z_um) else float(out[0])


def force_profile(geometry, particle, beams):
    """Forces on ``particle`` at every z of ``geometry`` for powers ``beams``."""
    d = geometry.diameter_nm
    uniq, inverse = np.unique(np.round(d, 9), return_inverse=True)
    u = _unit_forces(particle, geometry.fiber, beams, uniq)[:, inverse]
    return ForceProfile(
        geometry.z_um.copy(), d, beams.p1_mW * u[0], beams.p2_mW * u[1], beams, particle, geometry.fiber, u[2], u[3]
    )


def balance_power(particle, fiber, p2_mW, beams=None):
    """Beam-1 power [mW] that cancels the axial force at the waist."""
    if p2_mW <= 0:
        raise ConfigError("p2_mW must be positive")
    beams = beams or BeamConfig()
    d = fiber.waist_diameter_nm
    f1 = unit_axial_force(particle, fiber, beams.wavelength1_nm, d, polarization_angle=beams.polarization_angle)
    f2 = unit_axial_force(particle, fiber, beams.wavelength2_nm, d, polarization_angle=beams.polarization_angle)
    if f1 == 0:
        raise NumericalError("beam 1 exerts no force; no balance power exists")
    return p2_mW * f2 / f1


@dataclass(frozen=True)
class Crossing:
    z_um: float
    kind: str  # "trap" or "anti-trap"
    stiffness_pN_per_um: float


@dataclass(frozen=True)
class TrapReport:
    """Zero crossings of the net force and the principal trap, if any."""

    crossings: tuple
    z_trap_um: float | None = None
    stiffness_pN_per_um: float | None = None
    depth_kBT: float | None = None
    open_trap: bool = False

    @property
    def traps(self):
        return [c for c in self.crossings if c.kind == "trap"]

    @property
    def anti_traps(self):
        return [c for c in self.crossings if c.kind == "anti-trap"]

    def to_dict(self):
        return {
            "crossings": [
                {"z_um": c.z_um, "kind": c.kind, "stiffness_pN_per_um": c.stiffness_pN_per_um} for c in self.crossings
            ],
            "z_trap_um": self.z_trap_um,
            "stiffness_pN_per_um": self.stiffness_pN_per_um,
            "depth_kBT": self.depth_kBT,
            "open_trap": self.open_trap,
        }


def _zero_tolerance(delta):
    finite = np.abs(delta[np.isfinite(delta)])
    scale = finite.max() if finite.size else 0.0
    return 1e-9 * scale + 1e-15


def find_traps(profile, xtol_um=0.01, zero_tol=None):
    """Locate and classify sign changes of the net force.

    Values with ``|dF| <= zero_tol`` (default: 1e-9 of the largest force)
    count as zero, so a balanced plateau produces no crossing. A change from
    + to - with increasing z is a restoring trap; - to + is an anti-trap.
    Each crossing is refined by Brent bisection on :meth:`ForceProfile.delta_at`.
    """
    z = profile.z_um
    delta = profile.delta_pN
    tol = _zero_tolerance(delta) if zero_tol is None else zero_tol
    sign = np.where(np.isfinite(delta), np.sign(delta) * (np.abs(delta) > tol), np.nan)

    crossings = []
    last = None
    for i, s in enumerate(sign):
        if np.isnan(s):
            last = None  # crossings are not tracked through invalid gaps
            continue
        if s == 0:
            continue
        if last is not None and sign[last] != s:
            lo, hi = z[last], z[i]
            try:
                zc = brentq(profile.delta_at, lo, hi, xtol=xtol_um)
            except ValueError:
                zc = lo + (hi - lo) * delta[last] / (delta[last] - delta[i])
            h = min(0.5, (hi - lo) / 2)
            slope = (profile.delta_at(zc + h) - profile.delta_at(zc - h)) / (2 * h)
            kind = "trap" if sign[last] > 0 else "anti-trap"
            crossings.append(Crossing(float(zc), kind, float(-slope)))
        last = i

    traps = [c for c in crossings if c.kind == "trap"]
    if not traps:
        return TrapReport(tuple(crossings))
    positive = [c for c in traps if c.z_um > 0]
    main = positive[0] if positive else traps[0]
    depth, is_open = trap_depth(potential(profile), main.z_um)
    return TrapReport(tuple(crossings), main.z_um, main.stiffness_pN_per_um, depth, is_open)


def touch_points(profile, z_min_um=-np.inf, z_max_um=np.inf, rel_tol=1e-6):
    """Intervals where the net force vanishes without changing sign.

    Such a stretch is a flat step (inflection) of the potential rather than a
    well. Returns ``(z_start, z_end)`` pairs of the runs with
    ``|dF| <= rel_tol * max|dF|`` whose neighbours on both sides share a sign.
    """
    z, delta = profile.z_um, profile.delta_pN
    finite = np.isfinite(delta)
    scale = np.abs(delta[finite]).max() if finite.any() else 0.0
    if scale == 0:
        return []
    small = finite & (np.abs(delta) <= rel_tol * scale)
    edges = np.flatnonzero(np.diff(np.r_[0, small.astype(int), 0]))
    out = []
    for start, stop in zip(edges[::2], edges[1::2]):
        if start == 0 or stop == len(z) or not (finite[start - 1] and finite[stop]):
            continue
        if np.sign(delta[start - 1]) != np.sign(delta[stop]):
            continue
        lo, hi = float(z[start]), float(z[stop - 1])
        if hi >= z_min_um and lo <= z_max_um:
            out.append((lo, hi))
    return out


@dataclass(frozen=True)
class PotentialProfile:
    """Potential energy [kBT] with the minimum of each valid segment at zero."""

    z_um: np.ndarray
    u_kBT: np.ndarray
    temperature_K: float = TEMPERATURE_K

    def local_minima(self, z_range=None, tol=1e-9):
        """Interior strict minima, ignoring plateaus flatter than ``tol`` kBT."""
        z, u = self.z_um, self.u_kBT
        found = []
        for i in range(1, len(z) - 1):
            if not np.isfinite(u[i]):
                continue
            left = i - 1
            while left > 0 and abs(u[left] - u[i]) <= tol:
                left -= 1
            right = i + 1
            while right < len(z) - 1 and abs(u[right] - u[i]) <= tol:
                right += 1
            if u[left] - u[i] > tol and u[right] - u[i] > tol:
                if z_range is None or z_range[0] < z[i] < z_range[1]:
                    found.append(float(z[i]))
        return found


def potential(profile, temperature_K=TEMPERATURE_K):
    """Integrate ``dF = -dU/dz`` by the cumulative trapezoid rule.

    Invalid samples split the integration into contiguous segments, each
    shifted so that its minimum is zero.
    """
    z = profile.z_um
    delta = profile.delta_pN
    u = np.full(z.shape, np.nan)
    valid = np.isfinite(delta)
    edges = np.flatnonzero(np.diff(np.r_[0, valid.astype(int), 0]))
    for start, stop in zip(edges[::2], edges[1::2]):
        seg = slice(start, stop)
        energy = -cumulative_trapezoid(delta[seg], z[seg], initial=0.0) / kbt_pn_um(temperature_K)
        u[seg] = energy - energy.min()
    return PotentialProfile(z.copy(), u, temperature_K)


def trap_depth(potential_profile, z_trap_um):
    """Smaller of the two barriers around the well at ``z_trap_um``.

    Returns ``(depth_kBT, open_flag)``; ``open_flag`` is True when the
    potential does not rise on at least one side within the valid range.
    """
    z, u = potential_profile.z_um, potential_profile.u_kBT
    i = int(np.argmin(np.abs(z - z_trap_um)))
    if not np.isfinite(u[i]):
        raise ConfigError("trap position lies in an invalid region")
    lo = i
    while lo > 0 and np.isfinite(u[lo - 1]):
        lo -= 1
    hi = i
    while hi < len(u) - 1 and np.isfinite(u[hi + 1]):
        hi += 1
    # the well bottom may sit between samples; use the local minimum nearby
    j0, j1 = max(lo, i - 1), min(hi, i + 1)
    bottom = np.min(u[j0 : j1 + 1])
    left = np.max(u[lo : i + 1]) - bottom
    right = np.max(u[i : hi + 1]) - bottom
    depth = min(left, right)
    if depth <= 0:
        return 0.0, True
    return float(depth), False
