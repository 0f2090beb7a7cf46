"""Trajectory analysis of kymographs: peaks, Hough lines and linked tracks.

Axis convention: a peak is the point ``(l, m)`` with the frame index ``l``
on the horizontal axis and the pixel index ``m`` on the vertical axis. A line
is ``rho = l cos(theta) + m sin(theta)``, so a particle at a constant pixel
(trapped) gives ``theta = 90`` degrees and a particle moving ``v`` pixels per
frame gives ``cot(theta) = -v``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.signal import find_peaks

from .errors import ConfigError


@dataclass(frozen=True)
class PeakSet:
    """Detected peaks ``(frame, pixel, intensity)`` with kymograph calibration."""

    frame: np.ndarray
    pixel: np.ndarray
    intensity: np.ndarray
    pixel_pitch_um: float = 1.0
    frame_period_s: float = 1.0
    z_origin_um: float = 0.0
    num_frames: int | None = None
    num_pixels: int | None = None

    def __len__(self):
        return len(self.frame)

    @classmethod
    def from_points(cls, frames, pixels, intensity=None, **calibration):
        frames = np.asarray(frames, dtype=float)
        pixels = np.asarray(pixels, dtype=float)
        intensity = np.ones_like(frames) if intensity is None else np.asarray(intensity, dtype=float)
        order = np.lexsort((pixels, frames))
        return cls(frames[order], pixels[order], intensity[order], **calibration)

    def without(self, trajectories):
        """Copy lacking every peak that belongs to one of ``trajectories``."""
        drop = {(f, m) for tr in trajectories for f, m in zip(tr.frames, tr.pixels)}
        keep = np.array([(f, m) not in drop for f, m in zip(self.frame, self.pixel)], dtype=bool)
        return PeakSet(
            self.frame[keep], self.pixel[keep], self.intensity[keep], self.pixel_pitch_um, self.frame_period_s,
            self.z_origin_um, self.num_frames, self.num_pixels,
        )

    def shifted(self, d_pixel):
        return PeakSet(
            self.frame, self.pixel + d_pixel, self.intensity, self.pixel_pitch_um, self.frame_period_s,
            self.z_origin_um, self.num_frames, self.num_pixels,
        )


def background_rms(image):
    """Robust noise estimate: scaled median absolute deviation of the image."""
    image = np.asarray(image, dtype=float)
    return float(1.4826 * np.median(np.abs(image - np.median(image))))


def extract_peaks(kymo, min_prominence=None, min_separation=3, smooth_px=None, min_height=None):
    """Per-frame local maxima of a kymograph.

    Parameters
    ----------
    kymo : Kymograph
    min_prominence : float, optional
        Required prominence in counts. Defaults to 3x the robust background
        RMS of the (optionally smoothed) image.
    min_separation : int
        Minimum distance between peaks in one frame, in pixels.
    smooth_px : float, optional
        Width of a Gaussian smoothing applied along each frame before peak
        finding (matched to the spot size). Positions and intensities are
        reported from the smoothed rows.
    min_height : float, optional
        Absolute height above the image median. Defaults to 5x the RMS.
    """
    image = np.asarray(kymo.intensity, dtype=float)
    if image.size == 0:
        raise ConfigError("empty kymograph")
    work = gaussian_filter1d(image, smooth_px, axis=1, mode="nearest") if smooth_px else image
    rms = background_rms(work)
    base = float(np.median(work))
    prominence = 3 * rms if min_prominence is None else min_prominence
    height = base + (5 * rms if min_height is None else min_height)
    frames, pixels, values = [], [], []
    for f, row in enumerate(work):
        idx, _ = find_peaks(row, prominence=max(prominence, 1e-12), distance=max(int(min_separation), 1), height=height)
        frames.append(np.full(idx.size, f))
        pixels.append(idx)
        values.append(row[idx])
    return PeakSet(
        np.concatenate(frames).astype(float), np.concatenate(pixels).astype(float), np.concatenate(values),
        kymo.pixel_pitch_um, kymo.frame_period_s, kymo.z_origin_um, kymo.num_frames, kymo.num_pixels,
    )


@dataclass(frozen=True)
class HoughLine:
    rho: float
    theta_deg: float
    votes: int

    def pixel_at(self, frame):
        """Pixel coordinate of the line at ``frame`` (undefined for theta = 0)."""
        t = np.deg2rad(self.theta_deg)
        return (self.rho - np.asarray(frame) * np.cos(t)) / np.sin(t)

    @property
    def slope_px_per_frame(self):
        t = np.deg2rad(self.theta_deg)
        return -np.cos(t) / np.sin(t) if np.sin(t) != 0 else np.inf


@dataclass(frozen=True)
class HoughSpectrum:
    """Vote accumulator ``A[rho_index, theta_index]``.

    Rho bins are centred on integer multiples of ``rho_step``, independent of
    the data, and theta spans ``[0, 180)`` degrees.
    """

    accumulator: np.ndarray
    theta_deg: np.ndarray
    rho: np.ndarray
    rho_step: float = 1.0

    @property
    def dominant(self):
        return _argmax_line(self.accumulator, self.theta_deg, self.rho)

    @property
    def theta_dominant(self):
        return self.dominant.theta_deg


def _argmax_line(acc, theta_deg, rho):
    best = acc.max()
    r_idx, t_idx = np.nonzero(acc == best)
    # ties go to the angle closest to 90 degrees, then to the smallest rho
    key = np.lexsort((rho[r_idx], np.abs(theta_deg[t_idx] - 90.0)))
    k = key[0]
    return HoughLine(float(rho[r_idx[k]]), float(theta_deg[t_idx[k]]), int(best))


def hough(peaks, theta_step_deg=1.0, rho_step=1.0):
    """Hough spectrum of the peak positions.

    Every peak ``(l, m)`` votes once in each theta column for the bin of
    ``rho = l cos(theta) + m sin(theta)``.
    """
    if len(peaks) < 2:
        raise ValueError("Hough spectrum needs at least two peaks")
    theta = np.arange(0.0, 180.0, theta_step_deg)
    t = np.deg2rad(theta)
    rho = np.outer(peaks.frame, np.cos(t)) + np.outer(peaks.pixel, np.sin(t))
    index = np.rint(rho / rho_step).astype(np.int64)
    offset = index.min()
    n_rho = int(index.max() - offset + 1)
    acc = np.zeros((n_rho, theta.size), dtype=np.int64)
    cols = np.broadcast_to(np.arange(theta.size), index.shape)
    np.add.at(acc, (index - offset, cols), 1)
    rho_centres = (np.arange(n_rho) + offset) * rho_step
    return HoughSpectrum(acc, theta, rho_centres, float(rho_step))


def line_support(peaks, line, rho_step=1.0, half_width=0):
    """Indices of the peaks voting within ``half_width`` rho bins of ``line``'s cell."""
    t = np.deg2rad(line.theta_deg)
    bins = np.rint((peaks.frame * np.cos(t) + peaks.pixel * np.sin(t)) / rho_step)
    return np.flatnonzero(np.abs(bins - np.rint(line.rho / rho_step)) <= half_width)


def dominant_lines(spectrum, k=1, window=5, peaks=None, max_shared=0.5):
    """The ``k`` strongest lines after non-maximum suppression.

    After each pick a ``window x window`` neighbourhood (in rho and theta bins)
    is cleared. When ``peaks`` is given, every peak voting inside the cleared
    rho range of a chosen line is marked as explained, and a later candidate is
    discarded if more than ``max_shared`` of its voters are already explained:
    a long track far from the origin leaves secondary maxima in neighbouring
    theta columns whose rho lies outside the window. Fewer lines than
    requested are returned with a warning when no cell with at least two votes
    remains.
    """
    acc = spectrum.accumulator
    theta, rho = spectrum.theta_deg, spectrum.rho
    half = window // 2
    # visiting cells in the argmax order once is equivalent to repeatedly
    # taking the argmax of the accumulator with cleared cells zeroed
    r_idx, t_idx = np.nonzero(acc >= 2)
    votes = acc[r_idx, t_idx]
    order = np.lexsort((rho[r_idx], np.abs(theta[t_idx] - 90.0), -votes))
    cleared = np.zeros(acc.shape, dtype=bool)
    claimed = np.zeros(len(peaks), dtype=bool) if peaks is not None else None
    lines = []
    for i in order:
        if len(lines) == k:
            break
        r, t = r_idx[i], t_idx[i]
        if cleared[r, t]:
            continue
        line = HoughLine(float(rho[r]), float(theta[t]), int(votes[i]))
        if peaks is not None:
            voters = line_support(peaks, line, spectrum.rho_step)
            if voters.size and claimed[voters].mean() > max_shared:
                continue
            claimed[line_support(peaks, line, spectrum.rho_step, half)] = True
        lines.append(line)
        cleared[max(r - half, 0) : r + half + 1, max(t - half, 0) : t + half + 1] = True
    if len(lines) < k:
        warnings.warn(f"only {len(lines)} distinct Hough lines available (requested {k})", stacklevel=2)
    return lines


@dataclass
class Trajectory:
    """Linked peaks of one particle, with calibrated velocity estimates."""

    frames: np.ndarray
    pixels: np.ndarray
    intensity: np.ndarray
    pixel_pitch_um: float
    frame_period_s: float
    z_origin_um: float = 0.0
    stuck: bool = False

    def __len__(self):
        return len(self.frames)

    @property
    def t_s(self):
        return self.frames * self.frame_period_s

    @property
    def z_um(self):
        return self.z_origin_um + self.pixels * self.pixel_pitch_um

    @property
    def duration_s(self):
        return float((self.frames[-1] - self.frames[0]) * self.frame_period_s)

    @property
    def mean_velocity(self):
        """Slope [um/s] of a straight-line fit of position against time."""
        if len(self) < 2:
            return 0.0
        t = self.t_s - self.t_s.mean()
        return float(np.dot(t, self.z_um - self.z_um.mean()) / np.dot(t, t))

    @property
    def velocity_std(self):
        """Standard deviation [um/s] of the frame-to-frame velocities."""
        if len(self) < 3:
            return 0.0
        v = np.diff(self.z_um) / np.diff(self.t_s)
        return float(np.std(v, ddof=1))


def link_trajectories(peaks, max_gap_frames=2, max_jump_pixels=80.0, min_length=5):
    """Greedy frame-by-frame nearest-peak linking.

    A track ending at pixel ``m`` with velocity ``v`` (pixels per frame,
    from its last two peaks, zero for a single peak) predicts ``m + v * gap``
    for a frame ``gap`` frames later. Candidate links must satisfy
    ``|jump| <= max_jump_pixels * gap`` and are accepted in order of distance
    to the predicted position, i.e. of the velocity change they imply; exact
    ties fall to the smaller raw jump. Tracks unmatched for more than
    ``max_gap_frames`` frames are closed. Tracks shorter than ``min_length``
    peaks are discarded.
    """
    frames = np.asarray(peaks.frame)
    order = np.lexsort((peaks.pixel, frames))
    f_sorted = frames[order]
    open_tracks = []  # each: list of peak indices
    closed = []
    for f in np.unique(f_sorted):
        here = order[f_sorted == f]
        still_open = []
        for tr in open_tracks:
            if f - frames[tr[-1]] > max_gap_frames + 1:
                closed.append(tr)
            else:
                still_open.append(tr)
        open_tracks = still_open
        candidates = []
        for ti, tr in enumerate(open_tracks):
            last = tr[-1]
            gap = f - frames[last]
            v = 0.0
            if len(tr) > 1:
                prev = tr[-2]
                v = (peaks.pixel[last] - peaks.pixel[prev]) / (frames[last] - frames[prev])
            for pi in here:
                jump = peaks.pixel[pi] - peaks.pixel[last]
                if abs(jump) <= max_jump_pixels * gap:
                    candidates.append((abs(jump - v * gap), abs(jump), ti, pi))
        candidates.sort()
        used_t, used_p = set(), set()
        for _, _, ti, pi in candidates:
            if ti in used_t or pi in used_p:
                continue
            open_tracks[ti].append(pi)
            used_t.add(ti)
            used_p.add(pi)
        for pi in here:
            if pi not in used_p:
                open_tracks.append([pi])
    closed.extend(open_tracks)
    closed.sort(key=lambda tr: (frames[tr[0]], peaks.pixel[tr[0]]))
    return [
        Trajectory(
            frames[tr].copy(), peaks.pixel[tr].copy(), peaks.intensity[tr].copy(), peaks.pixel_pitch_um,
            peaks.frame_period_s, peaks.z_origin_um,
        )
        for tr in closed
        if len(tr) >= min_length
    ]


def flag_stuck(trajectories, min_duration_s=10.0, position_tol_px=0.5, intensity_rel_tol=0.05):
    """Mark long tracks with constant position and intensity as stuck particles.

    Returns the trajectories that are not stuck; flagged ones get
    ``stuck = True``.
    """
    kept = []
    for tr in trajectories:
        steady_pos = np.ptp(tr.pixels) <= position_tol_px
        mean_i = np.mean(tr.intensity)
        steady_int = mean_i > 0 and np.std(tr.intensity) <= intensity_rel_tol * mean_i
        if tr.duration_s >= min_duration_s and steady_pos and steady_int:
            tr.stuck = True
        else:
            kept.append(tr)
    return kept


def velocity_stats(trajectories):
    """Mean and sample standard deviation of per-trajectory mean velocities."""
    if not trajectories:
        raise ValueError("velocity statistics need at least one trajectory")
    v = np.array([tr.mean_velocity for tr in trajectories])
    std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return float(np.mean(v)), std


def match_truth(trajectory, truths, max_distance_um=5.0):
    """Ground-truth particle that a linked track follows, or ``None``.

    The match minimises the median position error over shared frames and
    must share at least half of the track's frames.
    """
    best, best_err = None, np.inf
    t = trajectory.t_s
    for truth in truths:
        if truth.t_s.size == 0:
            continue
        common, it, iu = np.intersect1d(np.round(t, 9), np.round(truth.t_s, 9), return_indices=True)
        if common.size < max(2, len(trajectory) // 2):
            continue
        err = float(np.median(np.abs(trajectory.z_um[it] - truth.z_um[iu])))
        if err < best_err:
            best, best_err = truth, err
    return best if best_err <= max_distance_um else None
