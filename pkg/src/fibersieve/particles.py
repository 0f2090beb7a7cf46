"""Optical response of gold nanospheres and the evanescent-field forces on them."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import constants
from scipy.special import spherical_jn, spherical_yn

from .errors import ConfigError, GeometryError, ResonanceError
from .modes import C, EPS0, field_intensity, field_squared, solve_he11

WAVELENGTH_RANGE_NM = (400.0, 1000.0)

# Johnson & Christy, Phys. Rev. B 6, 4370 (1972): photon energy [eV], n, k
JC_ENERGY_EV = np.array(
    [1.14, 1.26, 1.39, 1.51, 1.64, 1.76, 1.88, 2.01, 2.13, 2.26, 2.38, 2.50, 2.63, 2.75, 2.88, 3.00, 3.12]
)
JC_N = np.array([0.27, 0.22, 0.17, 0.16, 0.14, 0.13, 0.14, 0.21, 0.29, 0.43, 0.62, 1.04, 1.31, 1.38, 1.45, 1.46, 1.47])
JC_K = np.array(
    [7.150, 6.350, 5.663, 5.083, 4.542, 4.103, 3.697, 3.272, 2.863, 2.455, 2.081, 1.833, 1.849, 1.914, 1.948, 1.958, 1.952]
)

# Drude term plus two critical-point oscillators (phase -pi/4), least-squares
# fitted to the table above over 400-1000 nm. Wavelength-type parameters in nm.
DRUDE_LORENTZ = {
    "eps_inf": 3.0598,
    "lambda_p": 141.473,
    "gamma_p": 16369.4,
    "oscillators": ((0.14577, 478.589, 5382.30), (1.84880, 430.692, 1246.15)),
}

POLARIZABILITY_MODELS = ("mie-a1", "dipole", "quasistatic")


def _check_wavelength(wavelength_nm):
    lo, hi = WAVELENGTH_RANGE_NM
    if not np.all((np.asarray(wavelength_nm) >= lo) & (np.asarray(wavelength_nm) <= hi)):
        raise ConfigError(f"gold permittivity only valid for {lo:g}-{hi:g} nm")


def gold_permittivity(wavelength_nm, model="drude-lorentz"):
    """Complex relative permittivity of gold.

    Parameters
    ----------
    wavelength_nm : float or array_like
        Vacuum wavelength, 400-1000 nm.
    model : {"drude-lorentz", "tabulated"}
        Analytic fit (default) or linear interpolation of ``n`` and ``k``
        from the Johnson & Christy table.
    """
    _check_wavelength(wavelength_nm)
    lam = np.asarray(wavelength_nm, dtype=float)
    if model == "tabulated":
        table_nm = constants.h * constants.c / (constants.e * JC_ENERGY_EV) * 1e9
        order = np.argsort(table_nm)
        n = np.interp(lam, table_nm[order], JC_N[order])
        k = np.interp(lam, table_nm[order], JC_K[order])
        eps = (n + 1j * k) ** 2
    elif model == "drude-lorentz":
        p = DRUDE_LORENTZ
        eps = p["eps_inf"] - 1.0 / (p["lambda_p"] ** 2 * (1 / lam**2 + 1j / (p["gamma_p"] * lam)))
        phase = np.exp(-1j * np.pi / 4)
        for amp, lam_i, gamma_i in p["oscillators"]:
            eps = eps + amp / lam_i * (
                phase / (1 / lam_i - 1 / lam - 1j / gamma_i) + np.conj(phase) / (1 / lam_i + 1 / lam + 1j / gamma_i)
            )
    else:
        raise ConfigError(f"unknown permittivity model {model!r}")
    return complex(eps) if eps.ndim == 0 else eps


@dataclass(frozen=True)
class ParticleSpec:
    """Gold nanosphere suspended in the surrounding medium."""

    diameter_nm: float
    permittivity_model: str = "drude-lorentz"
    medium_index: float = 1.33
    polarizability_model: str = "mie-a1"

    def __post_init__(self):
        if self.diameter_nm <= 0:
            raise ConfigError("particle diameter must be positive")
        if self.polarizability_model not in POLARIZABILITY_MODELS:
            raise ConfigError(f"polarizability_model must be one of {POLARIZABILITY_MODELS}")

    @property
    def radius_nm(self):
        return self.diameter_nm / 2

    @property
    def medium_permittivity(self):
        return self.medium_index**2

    def label(self):
        return f"{self.diameter_nm:g}nm"


@dataclass(frozen=True)
class OpticalResponse:
    """Polarizability [nm^3, eps0 * eps_m factored out] and cross-sections [nm^2]."""

    wavelength_nm: float
    alpha: complex
    sigma_abs: float
    sigma_scat: float

    @property
    def sigma_ext(self):
        return self.sigma_abs + self.sigma_scat


def _mie_a1(m, x):
    """First electric Mie coefficient for relative index ``m`` and size parameter ``x``."""
    mx = m * x

    def psi(z):
        return z * spherical_jn(1, z)

    def dpsi(z):
        return spherical_jn(1, z) + z * spherical_jn(1, z, derivative=True)

    def xi(z):
        return z * (spherical_jn(1, z) + 1j * spherical_yn(1, z))

    def dxi(z):
        h = spherical_jn(1, z) + 1j * spherical_yn(1, z)
        dh = spherical_jn(1, z, derivative=True) + 1j * spherical_yn(1, z, derivative=True)
        return h + z * dh

    return (m * psi(mx) * dpsi(x) - psi(x) * dpsi(mx)) / (m * psi(mx) * dxi(x) - xi(x) * dpsi(mx))


def polarizability(particle, wavelength_nm, model=None, eps_particle=None):
    """Dipole polarizability and cross-sections of ``particle``.

    Branches
    --------
    ``"mie-a1"``
        ``alpha = 6 pi i a1 / k^3`` from the first electric partial wave.
    ``"dipole"``
        Quasi-static ``alpha0 = 4 pi a^3 (eps_p - eps_m) / (eps_p + 2 eps_m)``
        with the radiative reaction correction
        ``alpha = alpha0 / (1 - i k^3 alpha0 / (6 pi))``.
    ``"quasistatic"``
        ``alpha0`` alone; raises :class:`ResonanceError` at its pole.

    ``k`` is the wavenumber in the medium. ``eps_particle`` overrides the gold
    permittivity (used for index-matched checks).
    """
    model = model or particle.polarizability_model
    eps_m = particle.medium_permittivity
    eps_p = gold_permittivity(wavelength_nm, particle.permittivity_model) if eps_particle is None else eps_particle
    a = particle.radius_nm
    k = 2 * np.pi * particle.medium_index / wavelength_nm
    volume = 4 / 3 * np.pi * a**3

    if model == "mie-a1":
        m = np.sqrt(complex(eps_p)) / particle.medium_index
        a1 = complex(_mie_a1(m, k * a))
        alpha = 6j * np.pi * a1 / k**3
        sigma_scat = 6 * np.pi / k**2 * abs(a1) ** 2
        sigma_abs = 6 * np.pi / k**2 * (a1.real - abs(a1) ** 2)
        return OpticalResponse(float(wavelength_nm), alpha, max(sigma_abs, 0.0), sigma_scat)

    denom = eps_p + 2 * eps_m
    if model == "quasistatic":
        if abs(denom) < 1e-9 * abs(eps_m):
            raise ResonanceError("eps_p + 2 eps_m vanishes; use the radiative-corrected branch")
        alpha = 3 * volume * (eps_p - eps_m) / denom
        drive = 1.0
    elif model == "dipole":
        if abs(denom) < 1e-12 * abs(eps_m):
            # limit of alpha0 -> infinity
            alpha = 6j * np.pi / k**3
            drive = 0.0
        else:
            alpha0 = 3 * volume * (eps_p - eps_m) / denom
            alpha = alpha0 / (1 - 1j * k**3 * alpha0 / (6 * np.pi))
            drive = abs(1 - 1j * k**3 * alpha0 / (6 * np.pi)) ** -2
    else:
        raise ConfigError(f"unknown polarizability model {model!r}")
    sigma_scat = k**4 * abs(alpha) ** 2 / (6 * np.pi)
    # absorbed power from the uniform internal field, including the radiative drive factor
    if drive == 0.0:
        sigma_abs = k * alpha.imag - sigma_scat
    else:
        sigma_abs = k * volume * complex(eps_p).imag / eps_m * abs(3 * eps_m / denom) ** 2 * drive
    return OpticalResponse(float(wavelength_nm), complex(alpha), float(sigma_abs), float(sigma_scat))


def extinction_from_alpha(response, medium_index):
    """Optical-theorem extinction ``k Im(alpha)`` [nm^2]."""
    k = 2 * np.pi * medium_index / response.wavelength_nm
    return k * response.alpha.imag


@dataclass(frozen=True)
class ForceComponents:
    """Optical force on a particle resting on the fiber surface.

    ``axial_pN`` is signed along z; ``gradient_pN`` is the magnitude of the
    radial pull toward the fiber (positive when attractive).
    """

    wavelength_nm: float
    direction: int
    power_mW: float
    axial_pN: float
    gradient_pN: float

    @property
    def axial_per_mW(self):
        return self.axial_pN / self.power_mW if self.power_mW else 0.0


def particle_center_nm(particle, mode, gap_nm=0.0):
    """Radial position of the particle centre; raises if it lies inside the fiber."""
    r = mode.radius_nm + particle.radius_nm + gap_nm
    if r <= mode.radius_nm:
        raise GeometryError("particle centre lies inside the fiber")
    return r


def axial_force(particle, mode, power_mW, direction=+1, gap_nm=0.0, polarization_angle=0.0):
    """Axial push and radial gradient force from one guided mode.

    The particle touches the fiber (plus ``gap_nm``) on the polarization
    axis. The axial force is ``n sigma_ext I P / c`` with ``I`` the local
    intensity per watt at the particle centre; the gradient force is
    ``Re(alpha) eps0 eps_m d|E|^2/dr / 4``.
    """
    if direction not in (+1, -1):
        raise ConfigError("direction must be +1 or -1")
    response = polarizability(particle, mode.wavelength_nm)
    r = particle_center_nm(particle, mode, gap_nm)
    intensity = field_intensity(mode, r, polarization_angle, 1.0, polarization_angle)  # W/um^2 per W
    power_W = power_mW * 1e-3
    axial = particle.medium_index * response.sigma_ext * 1e-18 * intensity * 1e12 * power_W / C
    dr = 1e-2
    e2_plus = field_squared(mode, r + dr, polarization_angle, polarization_angle)
    e2_minus = field_squared(mode, r - dr, polarization_angle, polarization_angle)
    grad_e2 = (e2_plus - e2_minus) / (2 * dr * 1e-9) * power_W
    alpha_si = EPS0 * particle.medium_permittivity * response.alpha.real * 1e-27
    gradient = -0.25 * alpha_si * grad_e2
    return ForceComponents(float(mode.wavelength_nm), direction, float(power_mW), direction * axial * 1e12, gradient * 1e12)


@lru_cache(maxsize=65536)
def _unit_force(particle, core_index, medium_index, wavelength_nm, diameter_nm, gap_nm, polarization_angle):
    from .modes import FiberSpec

    fiber = FiberSpec(core_index=core_index, medium_index=medium_index, waist_diameter_nm=diameter_nm)
    mode = solve_he11(fiber, wavelength_nm, diameter_nm)
    f = axial_force(particle, mode, 1.0, +1, gap_nm, polarization_angle)
    r = particle_center_nm(particle, mode, gap_nm)
    intensity = field_intensity(mode, r, polarization_angle, 1.0, polarization_angle)
    return f.axial_pN, float(intensity)


def unit_axial_force(particle, fiber, wavelength_nm, diameter_nm, gap_nm=0.0, polarization_angle=0.0):
    """Magnitude of the axial force [pN] for 1 mW guided at ``diameter_nm``."""
    return _unit_force(
        particle, fiber.core_index, fiber.medium_index, float(wavelength_nm), float(diameter_nm), float(gap_nm),
        float(polarization_angle),
    )[0]


def local_intensity(particle, fiber, wavelength_nm, diameter_nm, gap_nm=0.0, polarization_angle=0.0):
    """Intensity per watt [1/um^2] at the particle centre."""
    return _unit_force(
        particle, fiber.core_index, fiber.medium_index, float(wavelength_nm), float(diameter_nm), float(gap_nm),
        float(polarization_angle),
    )[1]


def force_ratio(particle, fiber, diameter_nm=None, wavelengths_nm=(640.0, 785.0), **kwargs):
    """``R = F(lambda_1) / F(lambda_2)`` at equal guided powers."""
    d = fiber.waist_diameter_nm if diameter_nm is None else diameter_nm
    f1 = unit_axial_force(particle, fiber, wavelengths_nm[0], d, **kwargs)
    f2 = unit_axial_force(particle, fiber, wavelengths_nm[1], d, **kwargs)
    return f1 / f2


def size_sweep(fiber, diameters_nm, diameter_nm=None, wavelengths_nm=(640.0, 785.0), **particle_kwargs):
    """Per-mW axial forces and ratio for a range of particle sizes.

    Returns an array with columns ``D_nm, F1_pN_per_mW, F2_pN_per_mW, R``.
    """
    d = fiber.waist_diameter_nm if diameter_nm is None else diameter_nm
    rows = []
    for size in diameters_nm:
        p = ParticleSpec(float(size), **particle_kwargs)
        f1 = unit_axial_force(p, fiber, wavelengths_nm[0], d)
        f2 = unit_axial_force(p, fiber, wavelengths_nm[1], d)
        rows.append((size, f1, f2, f1 / f2))
    return np.array(rows, dtype=float)
