import numpy as np
import pytest

from fibersieve import taper
from fibersieve.errors import ConfigError, NumericalError
from fibersieve.modes import FiberSpec
from fibersieve.particles import ParticleSpec
from fibersieve.taper import (
    BeamConfig,
    ForceProfile,
    TaperGeometry,
    balance_power,
    find_traps,
    force_profile,
    kbt_pn_um,
    potential,
    touch_points,
    trap_depth,
)


def test_no_light_no_force(geometry, gns100):
    prof = force_profile(geometry, gns100, BeamConfig(0.0, 0.0))
    assert np.all(prof.delta_pN == 0.0)
    assert find_traps(prof).crossings == ()


def test_balanced_waist_is_force_free(profile_factory, gns100, balance100, fiber):
    prof = profile_factory(gns100, balance100)
    waist = np.abs(prof.z_um) <= fiber.waist_length_um / 2
    assert np.max(np.abs(prof.delta_pN[waist])) < 1e-12 * np.max(np.abs(prof.f2_pN))


def test_swapping_powers_with_equal_wavelengths_flips_sign(geometry, gns100):
    a = force_profile(geometry, gns100, BeamConfig(3.0, 7.0, wavelength1_nm=785.0, wavelength2_nm=785.0))
    b = force_profile(geometry, gns100, BeamConfig(7.0, 3.0, wavelength1_nm=785.0, wavelength2_nm=785.0))
    np.testing.assert_array_equal(a.delta_pN, -b.delta_pN)


def test_balance_power_values_and_linearity(gns100, gns150, fiber):
    p100 = balance_power(gns100, fiber, 12.0)
    p150 = balance_power(gns150, fiber, 12.0)
    assert 1.7 / 2 <= p100 <= 1.7 * 2
    assert 8.0 / 2 <= p150 <= 8.0 * 2
    assert 3.0 <= p150 / p100 <= 8.0
    assert balance_power(gns100, fiber, 24.0) == 2 * p100


def test_balance_needs_positive_p2(gns100, fiber):
    with pytest.raises(ConfigError):
        balance_power(gns100, fiber, 0.0)


def test_balance_undefined_without_beam_one_force(gns100, fiber, monkeypatch):
    monkeypatch.setattr(taper, "unit_axial_force", lambda p, f, wl, d, **kw: 0.0 if wl == 640.0 else 1.0)
    with pytest.raises(NumericalError):
        balance_power(gns100, fiber, 12.0)


def test_negative_power_rejected():
    with pytest.raises(ConfigError):
        BeamConfig(-1.0, 12.0)


def test_analytic_sine_crossing():
    z0 = 20.0
    z = np.arange(-50.3, 50.0, 1.0)
    report = find_traps(ForceProfile.from_delta(z, -np.sin(z / z0)))
    assert [c.kind for c in report.crossings] == ["trap"]
    assert report.z_trap_um == pytest.approx(0.0, abs=0.01)
    assert report.stiffness_pN_per_um == pytest.approx(1 / z0, rel=1e-3)


def test_grid_exact_zero_classified_by_neighbours():
    z = np.arange(-10.0, 11.0, 1.0)
    report = find_traps(ForceProfile.from_delta(z, 0.5 * z))
    assert [(c.z_um, c.kind) for c in report.crossings] == [(0.0, "anti-trap")]


@pytest.mark.parametrize("factor", [1.18, 1.32])
def test_above_balance_one_trap_right_one_anti_trap_left(profile_factory, gns100, balance100, factor):
    report = find_traps(profile_factory(gns100, factor * balance100))
    assert len(report.traps) == 1 and len(report.anti_traps) == 1
    assert report.traps[0].z_um > 100.0  # on the rising-diameter taper
    assert report.anti_traps[0].z_um < -100.0
    assert report.stiffness_pN_per_um > 0


def test_trap_moves_outward_with_power(profile_factory, gns100, balance100):
    z = [find_traps(profile_factory(gns100, f * balance100)).z_trap_um for f in (1.18, 1.32)]
    assert z[1] > z[0]


@pytest.mark.parametrize("size", [100.0, 150.0])
def test_trap_position_non_decreasing_in_power(geometry, fiber, size):
    particle = ParticleSpec(size)
    p_bal = balance_power(particle, fiber, 12.0)
    positions = []
    for f in np.linspace(1.05, 1.6, 8):
        report = find_traps(force_profile(geometry, particle, BeamConfig(f * p_bal, 12.0)))
        if report.z_trap_um is None:
            break
        positions.append(report.z_trap_um)
    assert len(positions) >= 3
    assert np.all(np.diff(positions) >= 0)


def test_classification_is_sound(profile_factory, gns100, balance100):
    prof = profile_factory(gns100, 1.25 * balance100)
    for c in find_traps(prof).crossings:
        left, right = prof.delta_at(c.z_um - 1.0), prof.delta_at(c.z_um + 1.0)
        if c.kind == "trap":
            assert left > 0 > right
        else:
            assert left < 0 < right


def test_mirror_and_swap_exchanges_traps_and_anti_traps(geometry, gns100, balance100):
    beams = BeamConfig(1.25 * balance100, 12.0)
    plain = find_traps(force_profile(geometry, gns100, beams))
    swapped = find_traps(force_profile(geometry.mirrored(), gns100, BeamConfig(beams.p1_mW, 12.0, swapped=True)))
    assert len(plain.crossings) == len(swapped.crossings)
    for c in plain.crossings:
        match = [s for s in swapped.crossings if abs(s.z_um + c.z_um) < 0.05]
        assert len(match) == 1 and match[0].kind == c.kind
    # traps stay traps at the mirrored position, so the anti-trap of one is where the other traps
    assert swapped.traps[0].z_um == pytest.approx(plain.anti_traps[0].z_um, abs=0.05)


def test_profile_beyond_cutoff_marked_invalid():
    thin = FiberSpec(waist_diameter_nm=250.0)
    prof = force_profile(TaperGeometry.uniform(thin, 200.0, 2.0), ParticleSpec(100.0), BeamConfig(1.0, 12.0))
    assert not np.all(prof.valid)
    assert np.all(~prof.valid[np.abs(prof.z_um) <= 100.0])
    assert np.all(prof.valid[np.abs(prof.z_um) >= 150.0])


def test_harmonic_force_integrates_to_parabola():
    k, z0 = 0.3, 4.2
    z = np.linspace(-30, 30, 601)
    pot = potential(ForceProfile.from_delta(z, -k * (z - z0)))
    expected = 0.5 * k * (z - z0) ** 2 / kbt_pn_um()
    expected -= expected.min()
    # the discrete minimum sits on the grid point nearest z0
    np.testing.assert_allclose(pot.u_kBT - pot.u_kBT.min(), expected - expected.min(), atol=0.5 * k * 0.01 / kbt_pn_um())
    assert pot.u_kBT.min() == 0.0


def test_constant_force_gives_linear_potential():
    z = np.linspace(0, 10, 11)
    pot = potential(ForceProfile.from_delta(z, np.full_like(z, 0.02)))
    np.testing.assert_allclose(np.diff(pot.u_kBT), -0.02 / kbt_pn_um(), rtol=1e-12)


def test_potential_split_at_invalid_gap():
    z = np.linspace(0, 10, 11)
    delta = np.full_like(z, -1.0)
    delta[5] = np.nan
    pot = potential(ForceProfile.from_delta(z, delta))
    assert np.isnan(pot.u_kBT[5])
    assert pot.u_kBT[:5].min() == 0.0 and pot.u_kBT[6:].min() == 0.0


def test_potential_gradient_reproduces_force(profile_factory, gns100, balance100):
    prof = profile_factory(gns100, 1.25 * balance100)
    pot = potential(prof)
    force = -np.gradient(pot.u_kBT * kbt_pn_um(), prof.z_um)
    inner = slice(1, -1)
    rms = np.sqrt(np.mean((force[inner] - prof.delta_pN[inner]) ** 2))
    assert rms / np.sqrt(np.mean(prof.delta_pN[inner] ** 2)) < 0.01


def test_balance_gives_inflection_without_minimum(profile_factory, gns100, balance100):
    prof = profile_factory(gns100, balance100)
    assert find_traps(prof).traps == []
    assert touch_points(prof, z_min_um=0.0)
    assert potential(prof).local_minima((0.0, np.inf)) == []


def test_quadratic_well_depth_is_nearer_edge_height():
    z = np.linspace(-10, 30, 401)
    pot = potential(ForceProfile.from_delta(z, -0.01 * z))
    depth, is_open = trap_depth(pot, 0.0)
    assert not is_open
    assert depth == pytest.approx(pot.u_kBT[0], rel=1e-12)


def test_flat_potential_has_zero_depth_and_is_open():
    z = np.linspace(0, 10, 11)
    depth, is_open = trap_depth(potential(ForceProfile.from_delta(z, np.zeros_like(z))), 5.0)
    assert depth == 0.0 and is_open


def test_well_depth_against_power_by_direct_integration(profile_factory, gns100, balance100):
    # trapezoid integration of each profile, independent of potential(); the
    # outer barrier -int_{z_trap}^{z_max} dF dz falls with P1 because dF rises
    # everywhere (d dF / d P1 = F1 > 0), while the waist-side barrier grows
    barriers = []
    for factor in (1.18, 1.32):
        prof = profile_factory(gns100, factor * balance100)
        z, df = prof.z_um, prof.delta_pN
        z_trap = find_traps(prof).z_trap_um
        inner = (z >= 0.0) & (z <= z_trap)
        outer = z >= z_trap
        waist_side = np.trapezoid(df[inner], z[inner]) / kbt_pn_um()
        outward = -np.trapezoid(df[outer], z[outer]) / kbt_pn_um()
        barriers.append((waist_side, outward))
        report = find_traps(prof)
        assert report.depth_kBT == pytest.approx(min(waist_side, outward), rel=0.02)
    (w18, o18), (w32, o32) = barriers
    assert w32 > w18
    assert o32 < o18
    assert (o18, o32) == pytest.approx((1253.0, 600.0), rel=0.01)
