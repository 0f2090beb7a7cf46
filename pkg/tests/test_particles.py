import numpy as np
import pytest

from fibersieve.errors import ConfigError, GeometryError, ModeCutoffError, ResonanceError
from fibersieve.modes import solve_he11
from fibersieve.particles import (
    ParticleSpec,
    axial_force,
    extinction_from_alpha,
    force_ratio,
    gold_permittivity,
    polarizability,
    size_sweep,
)
from oracles import JC_GOLD_640NM, mie_series, mie_sigma_ext_nm2


def test_gold_is_metallic_and_lossy():
    assert gold_permittivity(640.0).real < 0
    assert gold_permittivity(785.0).imag > 0


def test_fit_within_five_percent_of_tabulated_constants():
    eps = gold_permittivity(640.0)
    assert abs(eps - JC_GOLD_640NM) / abs(JC_GOLD_640NM) < 0.05


def test_tabulated_branch_reproduces_hand_interpolation():
    assert gold_permittivity(640.0, "tabulated") == pytest.approx(JC_GOLD_640NM, abs=2e-3)


def test_permittivity_is_continuous():
    lam = np.linspace(400.0, 1000.0, 6001)
    eps = gold_permittivity(lam)
    assert np.max(np.abs(np.diff(eps))) < 0.05


@pytest.mark.parametrize("wl", [399.0, 1001.0])
def test_permittivity_range_enforced(wl):
    with pytest.raises(ConfigError):
        gold_permittivity(wl)


def test_unknown_permittivity_model_rejected():
    with pytest.raises(ConfigError):
        gold_permittivity(640.0, "nonsense")


@pytest.mark.parametrize("model", ["mie-a1", "dipole", "quasistatic"])
def test_index_matched_sphere_is_invisible(model):
    r = polarizability(ParticleSpec(100.0), 640.0, model=model, eps_particle=1.33**2 + 0j)
    assert abs(r.alpha) < 1e-9
    assert r.sigma_abs == pytest.approx(0.0, abs=1e-9)
    assert r.sigma_scat == pytest.approx(0.0, abs=1e-9)


def test_quasistatic_polarizability_follows_cube_law():
    a100 = polarizability(ParticleSpec(100.0), 640.0, model="quasistatic").alpha
    a150 = polarizability(ParticleSpec(150.0), 640.0, model="quasistatic").alpha
    assert abs(a150 / a100) == pytest.approx(3.375, rel=1e-12)


@pytest.mark.parametrize("model", ["mie-a1", "dipole"])
@pytest.mark.parametrize("d", [80.0, 100.0, 150.0, 200.0])
@pytest.mark.parametrize("wl", [640.0, 785.0])
def test_optical_theorem_and_passivity(model, d, wl):
    p = ParticleSpec(d)
    r = polarizability(p, wl, model=model)
    assert r.alpha.imag >= 0 and r.sigma_abs >= 0 and r.sigma_scat >= 0
    assert extinction_from_alpha(r, p.medium_index) == pytest.approx(r.sigma_abs + r.sigma_scat, rel=1e-6)


@pytest.mark.parametrize("d,wl", [(100.0, 640.0), (100.0, 785.0), (150.0, 640.0), (150.0, 785.0)])
def test_extinction_within_fifteen_percent_of_full_mie_series(d, wl):
    eps = gold_permittivity(wl)
    ours = polarizability(ParticleSpec(d), wl).sigma_ext
    assert ours == pytest.approx(mie_sigma_ext_nm2(d, wl, eps), rel=0.15)


def test_first_partial_wave_matches_independent_recurrence():
    p = ParticleSpec(150.0)
    eps = gold_permittivity(640.0)
    k = 2 * np.pi * 1.33 / 640.0
    _, _, a1 = mie_series(k * p.radius_nm, np.sqrt(eps) / 1.33)
    alpha = polarizability(p, 640.0).alpha
    assert alpha == pytest.approx(6j * np.pi * a1 / k**3, rel=1e-10)


def test_uncorrected_branch_raises_at_pole_while_corrected_stays_finite():
    p = ParticleSpec(100.0)
    pole = -2 * 1.33**2 + 0j
    with pytest.raises(ResonanceError):
        polarizability(p, 640.0, model="quasistatic", eps_particle=pole)
    r = polarizability(p, 640.0, model="dipole", eps_particle=pole)
    assert np.isfinite(r.alpha) and np.isfinite(r.sigma_ext)


def test_unknown_polarizability_model_rejected():
    with pytest.raises(ConfigError):
        ParticleSpec(100.0, polarizability_model="tmatrix")
    with pytest.raises(ConfigError):
        ParticleSpec(-5.0)


@pytest.fixture(scope="module")
def mode640(fiber):
    return solve_he11(fiber, 640.0, 550.0)


def test_zero_power_gives_zero_force(gns100, mode640):
    f = axial_force(gns100, mode640, 0.0)
    assert f.axial_pN == 0.0 and f.gradient_pN == 0.0


def test_force_exactly_linear_in_power(gns100, mode640):
    one = axial_force(gns100, mode640, 1.0)
    two = axial_force(gns100, mode640, 2.0)
    assert two.axial_pN == 2 * one.axial_pN
    assert two.gradient_pN == 2 * one.gradient_pN


def test_gradient_force_attractive_for_positive_real_polarizability(gns100, mode640):
    assert polarizability(gns100, 640.0).alpha.real > 0
    assert axial_force(gns100, mode640, 1.0).gradient_pN > 0


@pytest.mark.parametrize("d_fiber", [550.0, 700.0, 1000.0])
def test_force_signs_follow_propagation_directions(fiber, d_fiber):
    m640 = solve_he11(fiber, 640.0, d_fiber)
    m785 = solve_he11(fiber, 785.0, d_fiber)
    for size in np.arange(80.0, 201.0, 20.0):
        p = ParticleSpec(size)
        assert axial_force(p, m640, 1.0, +1).axial_pN > 0
        assert axial_force(p, m785, 1.0, -1).axial_pN < 0


def test_particle_inside_fiber_rejected(gns100, mode640):
    with pytest.raises(GeometryError):
        axial_force(gns100, mode640, 1.0, gap_nm=-60.0)


def test_identical_wavelengths_give_unit_ratio(gns100, fiber):
    assert force_ratio(gns100, fiber, 550.0, (785.0, 785.0)) == 1.0


def test_ratio_decreases_with_particle_size(fiber):
    table = size_sweep(fiber, np.arange(80.0, 201.0, 5.0))
    assert np.all(np.diff(table[:, 3]) < 0)
    assert np.all(table[:, 1:] > 0)


def test_small_particle_ratio_about_five_times_larger(gns100, gns150, fiber):
    ratio = force_ratio(gns100, fiber) / force_ratio(gns150, fiber)
    assert 2.5 <= ratio <= 10.0


def test_ratio_needs_both_modes_guided(gns100, fiber):
    with pytest.raises(ModeCutoffError):
        force_ratio(gns100, fiber, 150.0)
