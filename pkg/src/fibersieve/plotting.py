"""PNG figures written next to the CSV outputs when ``--plot`` is given."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_surface_intensity(curve, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for i, wl in enumerate(curve.wavelengths_nm):
        ax.plot(curve.diameters_nm, curve.intensity[i], label=f"{wl:g} nm")
    for wl, d in curve.cutoff_nm.items():
        ax.axvline(d, ls=":", c="grey")
    ax.set_xlabel("fiber diameter [nm]")
    ax.set_ylabel(r"surface intensity [W/$\mu$m$^2$ per W]")
    ax.legend()
    return _save(fig, path)


def plot_forces(table, path):
    """``table`` columns: diameter, F1, F2, ratio."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(table[:, 0], table[:, 1], label="beam 1")
    ax.plot(table[:, 0], table[:, 2], label="beam 2")
    ax.set_xlabel("particle diameter [nm]")
    ax.set_ylabel("axial force [pN/mW]")
    ax.legend(loc="upper left")
    ratio_ax = ax.twinx()
    ratio_ax.plot(table[:, 0], table[:, 3], "k--", label="ratio")
    ratio_ax.set_ylabel("F1/F2")
    return _save(fig, path)


def plot_trap(profile, pot, report, path):
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(5, 5))
    top.plot(profile.z_um, profile.delta_pN, "k")
    top.axhline(0, c="grey", lw=0.5)
    for c in report.crossings:
        marker = "o" if c.kind == "trap" else "x"
        top.plot(c.z_um, 0, marker, c="C3")
    top.set_ylabel("net force [pN]")
    bottom.plot(pot.z_um, pot.u_kBT, "C0")
    bottom.set_xlabel(r"z [$\mu$m]")
    bottom.set_ylabel(r"U [$k_BT$]")
    return _save(fig, path)


def plot_kymograph(kymo, analysis, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    extent = (
        kymo.z_origin_um,
        kymo.z_origin_um + kymo.pixel_pitch_um * kymo.num_pixels,
        kymo.frame_period_s * kymo.num_frames,
        0,
    )
    ax.imshow(kymo.intensity, aspect="auto", cmap="gray", extent=extent)
    if analysis is not None:
        peaks = analysis.peaks
        z = kymo.z_origin_um + peaks.pixel * kymo.pixel_pitch_um
        ax.plot(z, peaks.frame * kymo.frame_period_s, ",", c="C1")
        frames = np.array([0, kymo.num_frames - 1])
        for line in analysis.lines:
            px = line.pixel_at(frames)
            if np.all(np.isfinite(px)):
                ax.plot(kymo.z_origin_um + px * kymo.pixel_pitch_um, frames * kymo.frame_period_s, c="C3", lw=0.8)
        ax.set_xlim(extent[0], extent[1])
        ax.set_ylim(extent[2], extent[3])
    ax.set_xlabel(r"z [$\mu$m]")
    ax.set_ylabel("t [s]")
    return _save(fig, path)


def plot_sweep(points, path):
    p1 = [pt.p1_mW for pt in points]
    theta = [np.nan if pt.theta_deg is None else pt.theta_deg for pt in points]
    fig, (left, right) = plt.subplots(1, 2, figsize=(8, 3.5))
    left.plot(p1, theta, "o-")
    left.axhline(90, c="grey", ls=":")
    left.set_xlabel("P1 [mW]")
    left.set_ylabel(r"$\Theta$ [deg]")
    right.errorbar(p1, [pt.mean_velocity_um_s for pt in points], yerr=[pt.std_velocity_um_s for pt in points], fmt="o-")
    right.axhline(0, c="grey", lw=0.5)
    right.set_xlabel("P1 [mW]")
    right.set_ylabel(r"mean velocity [$\mu$m/s]")
    return _save(fig, path)
