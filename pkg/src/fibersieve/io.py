"""Delimited-text, graymap and manifest I/O."""

from __future__ import annotations

import csv
import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .transport import Kymograph


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x)) if np.isfinite(x) else "nan"
    return str(x)


def write_csv(path, columns, rows, comments=None):
    """Write ``rows`` under a header of ``columns``; ``comments`` become ``# key=value`` lines."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        for key, value in (comments or {}).items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    return path


def read_csv(path):
    """Read a file written by :func:`write_csv`.

    Returns ``(columns, data, comments)`` with ``data`` a float array. Raises
    :class:`ConfigError` naming the offending line on malformed input.
    """
    path = Path(path)
    comments, columns, rows = {}, None, []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                key, _, value = text[1:].strip().partition("=")
                comments[key.strip()] = value.strip()
                continue
            fields = next(csv.reader([text]))
            if columns is None:
                columns = [f.strip() for f in fields]
                continue
            if len(fields) != len(columns):
                raise ConfigError(f"{path}:{lineno}: expected {len(columns)} fields, got {len(fields)}")
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    if columns is None:
        raise ConfigError(f"{path}: no header row")
    data = np.array(rows, dtype=float).reshape(-1, len(columns))
    return columns, data, comments


def _calibration(kymo):
    return {
        "pixel_pitch_um": repr(kymo.pixel_pitch_um),
        "frame_period_s": repr(kymo.frame_period_s),
        "z_origin_um": repr(kymo.z_origin_um),
    }


def write_kymograph_csv(path, kymo):
    """One row per frame, one column per pixel, full float precision."""
    path = Path(path)
    with path.open("w") as fh:
        for key, value in _calibration(kymo).items():
            fh.write(f"# {key}={value}\n")
        np.savetxt(fh, kymo.intensity, delimiter=",", fmt="%.17g")
    return path


def _parse_float(value, what, path):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: bad or missing {what}") from None


def read_kymograph_csv(path, pixel_pitch_um=None, frame_period_s=None, z_origin_um=None):
    """Read a kymograph CSV; calibration comes from ``# key=value`` lines unless given."""
    path = Path(path)
    meta, rows, width = {}, [], None
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                key, _, value = text[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
                continue
            fields = text.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise ConfigError(f"{path}:{lineno}: expected {width} values, got {len(fields)}")
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ConfigError(f"{path}: no kymograph rows")
    data = np.array(rows)
    if np.any(data < 0):
        raise ConfigError(f"{path}: negative intensities")
    pitch = pixel_pitch_um if pixel_pitch_um is not None else _parse_float(meta.get("pixel_pitch_um", 1.0), "pixel_pitch_um", path)
    period = frame_period_s if frame_period_s is not None else _parse_float(meta.get("frame_period_s", 1.0), "frame_period_s", path)
    origin = z_origin_um if z_origin_um is not None else _parse_float(meta.get("z_origin_um", 0.0), "z_origin_um", path)
    return Kymograph(data, pitch, period, origin)


def write_pgm(path, kymo):
    """Binary 8-bit graymap; the count corresponding to 255 is stored as ``scale``."""
    path = Path(path)
    image = kymo.intensity
    scale = float(image.max()) if image.size and image.max() > 0 else 1.0
    pixels = np.clip(np.rint(image / scale * 255), 0, 255).astype(np.uint8)
    header = [f"P5", f"# scale={scale!r}"] + [f"# {k}={v}" for k, v in _calibration(kymo).items()]
    header.append(f"{pixels.shape[1]} {pixels.shape[0]}")
    header.append("255")
    with path.open("wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(pixels.tobytes())
    return path


def read_pgm(path, pixel_pitch_um=None, frame_period_s=None, z_origin_um=None):
    """Read a binary 8-bit graymap written by :func:`write_pgm` (or any P5 file)."""
    path = Path(path)
    raw = path.read_bytes()
    pos, tokens, meta = 0, [], {}
    while len(tokens) < 4:
        end = raw.index(b"\n", pos)
        line = raw[pos:end].decode("ascii", errors="replace").strip()
        pos = end + 1
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
            continue
        tokens.extend(line.split())
    if tokens[0] != "P5":
        raise ConfigError(f"{path}: not a binary graymap (P5)")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ConfigError(f"{path}: only 8-bit graymaps are supported")
    body = np.frombuffer(raw[pos:], dtype=np.uint8)
    if body.size != width * height:
        raise ConfigError(f"{path}: expected {width * height} pixels, found {body.size}")
    scale = _parse_float(meta.get("scale", maxval), "scale", path)
    image = body.reshape(height, width).astype(float) / maxval * scale
    pitch = pixel_pitch_um if pixel_pitch_um is not None else _parse_float(meta.get("pixel_pitch_um", 1.0), "pixel_pitch_um", path)
    period = frame_period_s if frame_period_s is not None else _parse_float(meta.get("frame_period_s", 1.0), "frame_period_s", path)
    origin = z_origin_um if z_origin_um is not None else _parse_float(meta.get("z_origin_um", 0.0), "z_origin_um", path)
    return Kymograph(image, pitch, period, origin)


def read_kymograph(path, **calibration):
    """Dispatch on extension: ``.pgm`` graymap, anything else CSV."""
    if str(path).lower().endswith(".pgm"):
        return read_pgm(path, **calibration)
    return read_kymograph_csv(path, **calibration)


def write_truth(path, result):
    rows = []
    for tr in result.truths:
        rows.extend((tr.particle_id, tr.species, t, z) for t, z in zip(tr.t_s, tr.z_um))
    return write_csv(path, ["particle_id", "species", "t_s", "z_um"], rows)


def write_peaks(path, peaks):
    return write_csv(path, ["frame", "pixel", "intensity"], zip(peaks.frame.astype(int), peaks.pixel, peaks.intensity))


def write_lines(path, lines):
    return write_csv(path, ["rho", "theta_deg", "votes"], [(ln.rho, ln.theta_deg, ln.votes) for ln in lines])


def write_trajectories(path, trajectories):
    records = [
        {
            "id": i,
            "frames": tr.frames.astype(int).tolist(),
            "pixels": tr.pixels.tolist(),
            "velocity_um_s": tr.mean_velocity,
            "velocity_std_um_s": tr.velocity_std,
            "duration_s": tr.duration_s,
        }
        for i, tr in enumerate(trajectories)
    ]
    path = Path(path)
    path.write_text(json.dumps(records, indent=1))
    return path


def sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, config, seed, command, version, inputs=None):
    """List every file under ``out_dir`` with its SHA-256 digest.

    ``inputs`` maps external input paths to their digests.
    """
    out_dir = Path(out_dir)
    files = {}
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            files[p.relative_to(out_dir).as_posix()] = sha256(p)
    manifest = {"command": command, "version": version, "seed": seed, "config": config, "inputs": inputs or {},
                "files": files}
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def verify_manifest(out_dir):
    """True when every listed file exists and matches its digest."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    return all(
        os.path.exists(out_dir / name) and sha256(out_dir / name) == digest for name, digest in manifest["files"].items()
    )
