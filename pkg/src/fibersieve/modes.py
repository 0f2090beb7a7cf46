"""Fundamental HE11 mode of a step-index (nano)fiber.

The exact hybrid-mode eigenvalue equation is solved for the fundamental
branch and the mode is normalized to one watt of guided power. Field
expressions follow the standard circular-basis representation of the HE11
mode (Bessel J inside the core, modified Bessel K in the cladding), e.g.

    Le Kien, Liang, Hakuta & Balykin, Opt. Commun. 242, 445 (2004).

Lengths are in nanometres unless a name says otherwise. Intensities are
returned as local plane-wave-equivalent intensity ``n c eps0 |E|^2 / 2`` in
W/um^2 per watt of guided power, i.e. in 1/um^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import constants
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import j0, j1, jv, kve

from .errors import ConfigError, ModeCutoffError, SolverError

C = constants.c
EPS0 = constants.epsilon_0
MU0 = constants.mu_0

J01 = 2.404825557695773  # first zero of J0; HE11 has u = h*a below it

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class FiberSpec:
    """Silica nanofiber in water with a symmetric linear taper.

    Parameters
    ----------
    core_index, medium_index : float
        Refractive indices of the fiber and the surrounding medium.
    waist_diameter_nm : float
        Diameter of the uniform waist.
    waist_length_um : float
        Length of the uniform waist, centred on z = 0.
    taper_slope_nm_per_um : float
        Diameter growth per micrometre of axial distance outside the waist.
    """

    core_index: float = 1.45
    medium_index: float = 1.33
    waist_diameter_nm: float = 550.0
    waist_length_um: float = 200.0
    taper_slope_nm_per_um: float = 2.0

    def __post_init__(self):
        if not self.core_index > self.medium_index > 1.0:
            raise ConfigError("require core_index > medium_index > 1")
        if self.waist_diameter_nm <= 0:
            raise ConfigError("waist_diameter_nm must be positive")
        if self.waist_length_um < 0 or self.taper_slope_nm_per_um < 0:
            raise ConfigError("waist_length_um and taper_slope_nm_per_um must be >= 0")

    def diameter_at(self, z_um):
        """Local fiber diameter [nm] at axial position(s) ``z_um``."""
        excess = np.maximum(np.abs(np.asarray(z_um, dtype=float)) - self.waist_length_um / 2, 0.0)
        return self.waist_diameter_nm + self.taper_slope_nm_per_um * excess

    def v_number(self, wavelength_nm, diameter_nm=None):
        d = self.waist_diameter_nm if diameter_nm is None else diameter_nm
        return np.pi * d * np.sqrt(self.core_index**2 - self.medium_index**2) / wavelength_nm


def _kprime_ratio(w):
    # K1'(w) / (w K1(w)), overflow-safe via exponentially scaled K
    return -(kve(0, w) + kve(2, w)) / (2.0 * w * kve(1, w))


def characteristic(u, v, n1, n2):
    """HE11 eigenvalue function in normalized transverse wavenumbers.

    ``u = h a`` and ``w = q a`` with ``u**2 + w**2 = v**2``. The root of this
    dimensionless function on ``0 < u < min(v, J01)`` is the HE11 mode.
    """
    u = np.asarray(u, dtype=float)
    w = np.sqrt(v**2 - u**2)
    kr = _kprime_ratio(w)
    # beta^2 / (n1^2 k^2) = 1 - (u / (n1 k a))^2 and (k a)^2 = v^2 / (n1^2 - n2^2)
    b2 = 1.0 - u**2 * (n1**2 - n2**2) / (n1**2 * v**2)
    lhs = j0(u) / (u * j1(u))
    root = np.sqrt(((n1**2 - n2**2) / (2 * n1**2)) ** 2 * kr**2 + b2 * (1 / w**2 + 1 / u**2) ** 2)
    rhs = -(n1**2 + n2**2) / (2 * n1**2) * kr + 1 / u**2 - root
    return lhs - rhs


@dataclass(frozen=True)
class ModeSolution:
    """Solved HE11 mode at one wavelength and diameter.

    ``amplitude`` scales the circular-basis fields to one watt of guided
    power; it is ``None`` for an unnormalized solution.
    """

    wavelength_nm: float
    diameter_nm: float
    core_index: float
    medium_index: float
    effective_index: float
    residual: float
    amplitude: float | None = None

    @property
    def radius_nm(self):
        return self.diameter_nm / 2

    @property
    def k0(self):
        """Vacuum wavenumber [rad/nm]."""
        return 2 * np.pi / self.wavelength_nm

    @property
    def propagation_constant(self):
        """beta [rad/nm]."""
        return self.k0 * self.effective_index

    @property
    def transverse_wavenumber(self):
        """h [1/nm] inside the core."""
        return self.k0 * np.sqrt(self.core_index**2 - self.effective_index**2)

    @property
    def exterior_decay(self):
        """q [1/nm] of the evanescent tail."""
        return self.k0 * np.sqrt(self.effective_index**2 - self.medium_index**2)

    @property
    def v_number(self):
        return self.k0 * self.radius_nm * np.sqrt(self.core_index**2 - self.medium_index**2)

    @property
    def normalized(self):
        return self.amplitude is not None

    @property
    def _s(self):
        u = self.transverse_wavenumber * self.radius_nm
        w = self.exterior_decay * self.radius_nm
        jr = (j0(u) - jv(2, u)) / (2 * u * j1(u))
        return (1 / u**2 + 1 / w**2) / (jr + _kprime_ratio(w))

    def components(self, r_nm):
        """Circular-basis field components at radius ``r_nm``.

        Returns ``(e_r, e_phi, e_z, h_r, h_phi, h_z)`` in V/m and A/m for one
        watt of guided power (unit amplitude if unnormalized). The azimuthal
        factor ``exp(i phi)`` is omitted.
        """
        r = np.atleast_1d(np.asarray(r_nm, dtype=float))
        a = self.radius_nm
        n1, n2 = self.core_index, self.medium_index
        amp = 1.0 if self.amplitude is None else self.amplitude
        k = self.k0 * 1e9
        beta = self.propagation_constant * 1e9
        h = self.transverse_wavenumber * 1e9
        q = self.exterior_decay * 1e9
        omega = C * k
        s = self._s
        s1 = beta**2 * s / (k**2 * n1**2)
        s2 = beta**2 * s / (k**2 * n2**2)
        u = h * a * 1e-9
        w = q * a * 1e-9

        out = [np.zeros(r.shape, dtype=complex) for _ in range(6)]
        inside = r < a
        if np.any(inside):
            x = h * r[inside] * 1e-9
            J0, J1, J2 = j0(x), j1(x), jv(2, x)
            pe = beta / (2 * h)
            ph = omega * EPS0 * n1**2 / (2 * h)
            out[0][inside] = 1j * pe * ((1 - s) * J0 - (1 + s) * J2)
            out[1][inside] = -pe * ((1 - s) * J0 + (1 + s) * J2)
            out[2][inside] = J1
            out[3][inside] = ph * ((1 - s1) * J0 + (1 + s1) * J2)
            out[4][inside] = 1j * ph * ((1 - s1) * J0 - (1 + s1) * J2)
            out[5][inside] = 1j * beta * s / (omega * MU0) * J1
        outside = ~inside
        if np.any(outside):
            x = q * r[outside] * 1e-9
            # J1(u)/K1(w) * K_n(x) written with scaled Bessel functions
            scale = j1(u) * np.exp(w - x) / kve(1, w)
            K0, K1, K2 = kve(0, x) * scale, kve(1, x) * scale, kve(2, x) * scale
            pe = beta / (2 * q)
            ph = omega * EPS0 * n2**2 / (2 * q)
            out[0][outside] = 1j * pe * ((1 - s) * K0 + (1 + s) * K2)
            out[1][outside] = -pe * ((1 - s) * K0 - (1 + s) * K2)
            out[2][outside] = K1
            out[3][outside] = ph * ((1 - s2) * K0 - (1 + s2) * K2)
            out[4][outside] = 1j * ph * ((1 - s2) * K0 + (1 + s2) * K2)
            out[5][outside] = 1j * beta * s / (omega * MU0) * K1
        return tuple(amp * c for c in out)

    def poynting_z(self, r_nm):
        """Axial Poynting flux [W/m^2] of the circular mode at ``r_nm``."""
        er, ep, _, hr, hp, _ = self.components(r_nm)
        return 0.5 * np.real(er * np.conj(hp) - ep * np.conj(hr))


def _guided_power(mode):
    """Guided power [W] of ``mode`` by adaptive quadrature over the cross-section."""
    a = mode.radius_nm
    decay = 1.0 / mode.exterior_decay

    def integrand(r):
        return mode.poynting_z(r)[0] * r * 1e-18

    inner, _ = quad(integrand, 0.0, a, epsrel=1e-8, limit=200)
    outer, _ = quad(integrand, a, a + 10 * decay, epsrel=1e-8, limit=200)
    tail, _ = quad(integrand, a + 10 * decay, np.inf, epsrel=1e-8, limit=200)
    return 2 * np.pi * (inner + outer + tail)


@lru_cache(maxsize=8192)
def _solve_cached(wavelength_nm, diameter_nm, n1, n2, n_scan, normalize):
    if wavelength_nm <= 0 or diameter_nm <= 0:
        raise ConfigError("wavelength and diameter must be positive")
    v = np.pi * diameter_nm * np.sqrt(n1**2 - n2**2) / wavelength_nm
    u_max = min(v, J01)
    u = u_max * np.arange(1, n_scan + 1) / (n_scan + 1)
    f = characteristic(u, v, n1, n2)
    finite = np.isfinite(f)
    change = np.nonzero(finite[:-1] & finite[1:] & (np.sign(f[:-1]) != np.sign(f[1:])))[0]
    if change.size == 0:
        raise ModeCutoffError(
            f"no HE11 root bracketed for d={diameter_nm} nm, wavelength={wavelength_nm} nm"
        )
    i = change[0]  # smallest u is the fundamental (largest n_eff) branch
    try:
        u0 = brentq(characteristic, u[i], u[i + 1], args=(v, n1, n2), xtol=1e-15, rtol=1e-15, maxiter=200)
    except RuntimeError as exc:
        raise SolverError(f"HE11 root did not converge: {exc}") from exc
    residual = float(abs(characteristic(u0, v, n1, n2)))
    if not residual < RESIDUAL_TOL:
        raise SolverError(f"HE11 residual {residual:.3e} exceeds {RESIDUAL_TOL}", residual)
    ka = v / np.sqrt(n1**2 - n2**2)
    n_eff = float(np.sqrt(n1**2 - (u0 / ka) ** 2))
    mode = ModeSolution(wavelength_nm, diameter_nm, n1, n2, n_eff, residual)
    if normalize:
        power = _guided_power(mode)
        mode = ModeSolution(wavelength_nm, diameter_nm, n1, n2, n_eff, residual, float(1 / np.sqrt(power)))
    return mode


def solve_he11(fiber, wavelength_nm, diameter_nm=None, n_scan=2000, normalize=True):
    """Solve the HE11 dispersion relation at one wavelength and diameter.

    The normalized transverse wavenumber ``u = h a`` is scanned on a fixed
    grid of ``n_scan`` points in ``(0, min(V, 2.405))``, the first sign change
    is refined with Brent's method, and the mode is normalized to 1 W.

    Raises
    ------
    ModeCutoffError
        If no root is bracketed (deep-subwavelength fiber).
    SolverError
        If the refined root has residual above 1e-10.
    """
    d = fiber.waist_diameter_nm if diameter_nm is None else diameter_nm
    return _solve_cached(
        float(wavelength_nm), float(d), float(fiber.core_index), float(fiber.medium_index), int(n_scan), bool(normalize)
    )


def field_intensity(mode, r_nm, phi=0.0, power_W=1.0, polarization_angle=0.0):
    """Intensity of the quasi-linearly polarized HE11 mode [W/um^2].

    ``|E|^2 = 2 (|e_r|^2 cos^2 + |e_phi|^2 sin^2 + |e_z|^2 cos^2)`` of
    ``phi - polarization_angle``, converted to intensity with the local
    refractive index and scaled by ``power_W``.
    """
    if not mode.normalized:
        raise ValueError("field_intensity requires a power-normalized mode")
    r = np.asarray(r_nm, dtype=float)
    er, ep, ez, _, _, _ = mode.components(r.ravel())
    ang = np.broadcast_to(np.asarray(phi, dtype=float) - polarization_angle, r.shape).ravel()
    cos2, sin2 = np.cos(ang) ** 2, np.sin(ang) ** 2
    e2 = 2 * ((np.abs(er) ** 2 + np.abs(ez) ** 2) * cos2 + np.abs(ep) ** 2 * sin2)
    n = np.where(r.ravel() < mode.radius_nm, mode.core_index, mode.medium_index)
    intensity = 0.5 * C * EPS0 * n * e2 * 1e-12 * power_W
    return intensity.reshape(r.shape) if r.shape else float(intensity[0])


def field_squared(mode, r_nm, phi=0.0, polarization_angle=0.0):
    """``|E|^2`` [V^2/m^2] per watt, quasi-linear polarization."""
    intensity = field_intensity(mode, r_nm, phi, 1.0, polarization_angle)
    n = np.where(np.asarray(r_nm) < mode.radius_nm, mode.core_index, mode.medium_index)
    return intensity * 1e12 / (0.5 * C * EPS0 * n)


def surface_intensity(mode, polarization_angle=0.0):
    """Intensity per watt just outside the surface on the polarization axis."""
    return field_intensity(mode, mode.radius_nm, polarization_angle, 1.0, polarization_angle)


@dataclass(frozen=True)
class SurfaceIntensityCurve:
    """Surface intensity per watt versus fiber diameter for several wavelengths.

    ``intensity[i, j]`` belongs to ``wavelengths_nm[i]`` and
    ``diameters_nm[j]``; points below a wavelength's cutoff are NaN and the
    largest failing diameter is recorded in ``cutoff_nm``.
    """

    diameters_nm: np.ndarray
    wavelengths_nm: tuple
    intensity: np.ndarray
    cutoff_nm: dict

    def curve(self, wavelength_nm):
        return self.intensity[self.wavelengths_nm.index(wavelength_nm)]

    def crossings(self, i=0, j=1):
        """Grid brackets ``(d_lo, d_hi)`` where curves ``i`` and ``j`` swap order."""
        diff = self.intensity[i] - self.intensity[j]
        ok = np.isfinite(diff)
        sign = np.sign(diff)
        idx = np.nonzero(ok[:-1] & ok[1:] & (sign[:-1] * sign[1:] < 0))[0]
        return [(self.diameters_nm[k], self.diameters_nm[k + 1]) for k in idx]


def surface_intensity_curve(fiber, wavelengths_nm=(640.0, 785.0), d_min_nm=400.0, d_max_nm=1500.0, step_nm=5.0):
    """Tabulate :func:`surface_intensity` on a uniform diameter grid."""
    if d_max_nm <= d_min_nm or step_nm <= 0:
        raise ConfigError("need d_max_nm > d_min_nm and step_nm > 0")
    diameters = np.arange(d_min_nm, d_max_nm + step_nm / 2, step_nm)
    wavelengths = tuple(float(w) for w in wavelengths_nm)
    table = np.full((len(wavelengths), diameters.size), np.nan)
    cutoff = {}
    for i, wl in enumerate(wavelengths):
        for j, d in enumerate(diameters):
            try:
                table[i, j] = surface_intensity(solve_he11(fiber, wl, d))
            except ModeCutoffError:
                cutoff[wl] = float(d)
    return SurfaceIntensityCurve(diameters, wavelengths, table, cutoff)


def find_crossover(fiber, d_lo_nm, d_hi_nm, wavelengths_nm=(640.0, 785.0), xtol_nm=1e-3):
    """Diameter where the two surface intensities are equal, by bisection."""

    def diff(d):
        a, b = (surface_intensity(solve_he11(fiber, wl, d)) for wl in wavelengths_nm)
        return a - b

    return brentq(diff, d_lo_nm, d_hi_nm, xtol=xtol_nm)
