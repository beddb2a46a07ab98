"""Time-sampled fields and their on-disk form.

A Trajectory is a uniform time grid plus one array of snapshots per named
channel ("v" exact linear flow, "w" stepped remainder; "u" is derived as v+w
on demand and never stored). Snapshot files use a fixed little-endian binary
layout so runs can be consumed by other tools:

    header: magic 'RNLS' | version u32 | d u32 | M u32 | L f64 | t f64 | tag u8
    data:   M^d complex values as (real f64, imag f64) pairs, row-major,
            axis 0 slowest.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grids import GridSpec, SpectralField

__all__ = [
    "Trajectory",
    "write_snapshot",
    "read_snapshot",
    "save_trajectory",
    "load_trajectory",
    "SNAPSHOT_MAGIC",
    "SNAPSHOT_VERSION",
]

SNAPSHOT_MAGIC = b"RNLS"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIIddB")

CHANNEL_TAGS = {"u": 0, "v": 1, "w": 2}
_TAG_CHANNELS = {v: k for k, v in CHANNEL_TAGS.items()}
_OTHER_TAG = 255


@dataclass
class Trajectory:
    """Uniformly strided snapshots of one or more field channels."""

    grid: GridSpec
    times: np.ndarray
    channels: dict[str, np.ndarray]
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size == 0:
            raise ValueError("times must be a non-empty 1d array")
        if self.times.size > 1:
            steps = np.diff(self.times)
            h = steps[0]
            if h <= 0 or np.any(np.abs(steps - h) > 1e-12 * max(abs(h), 1.0)):
                raise ValueError("snapshot times must be uniformly strided and increasing")
        want = (self.times.size,) + self.grid.shape
        for name, arr in self.channels.items():
            if arr.shape != want:
                raise ValueError(f"channel {name!r} has shape {arr.shape}, expected {want}")

    @property
    def n_snapshots(self) -> int:
        return self.times.size

    def channel(self, name: str) -> np.ndarray:
        """Snapshot stack for a channel; 'u' is synthesized as v + w if absent."""
        if name in self.channels:
            return self.channels[name]
        if name == "u" and "v" in self.channels and "w" in self.channels:
            return self.channels["v"] + self.channels["w"]
        raise KeyError(f"trajectory has no channel {name!r} (have {sorted(self.channels)})")

    def snapshot(self, name: str, k: int) -> SpectralField:
        return SpectralField(self.grid, self.channel(name)[k], "physical")


def write_snapshot(path: str | Path, field: SpectralField, t: float, channel: str = "u") -> None:
    """Write one physical-representation snapshot in the binary layout above."""
    g = field.grid
    tag = CHANNEL_TAGS.get(channel, _OTHER_TAG)
    header = _HEADER.pack(
        SNAPSHOT_MAGIC, SNAPSHOT_VERSION, g.dim, g.points, g.half_width, float(t), tag
    )
    data = np.ascontiguousarray(field.as_physical().values.astype("<c16"))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_snapshot(path: str | Path) -> tuple[SpectralField, float, str]:
    """Read a snapshot file; returns (field, t, channel name)."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ConfigError(f"{path}: truncated snapshot header")
        magic, version, dim, m, half_width, t, tag = _HEADER.unpack(raw)
        if magic != SNAPSHOT_MAGIC:
            raise ConfigError(f"{path}: bad magic {magic!r}")
        if version != SNAPSHOT_VERSION:
            raise ConfigError(f"{path}: unsupported snapshot version {version}")
        grid = GridSpec(dim, m, half_width)
        count = grid.n_points
        buf = fh.read(16 * count)
        if len(buf) != 16 * count:
            raise ConfigError(f"{path}: truncated snapshot data")
    values = np.frombuffer(buf, dtype="<c16").astype(np.complex128).reshape(grid.shape)
    return SpectralField(grid, values, "physical"), t, _TAG_CHANNELS.get(tag, "other")


def save_trajectory(traj: Trajectory, out_dir: str | Path) -> Path:
    """Persist a trajectory as a directory of snapshots plus manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, list[str]] = {}
    for name, arr in traj.channels.items():
        files[name] = []
        for k, t in enumerate(traj.times):
            fname = f"{name}_{k:06d}.rnls"
            write_snapshot(out / fname, SpectralField(traj.grid, arr[k], "physical"), t, name)
            files[name].append(fname)
    manifest = {
        "format": "rough-nls trajectory",
        "version": SNAPSHOT_VERSION,
        "grid": {"dim": traj.grid.dim, "points": traj.grid.points, "half_width": traj.grid.half_width},
        "times": [float(t) for t in traj.times],
        "channels": files,
        "meta": traj.meta,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out


def load_trajectory(in_dir: str | Path) -> Trajectory:
    src = Path(in_dir)
    manifest_path = src / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"{src}: not a trajectory directory (no manifest.json)")
    manifest = json.loads(manifest_path.read_text())
    gs = manifest["grid"]
    grid = GridSpec(gs["dim"], gs["points"], gs["half_width"])
    times = np.asarray(manifest["times"], dtype=float)
    channels = {}
    for name, files in manifest["channels"].items():
        stack = np.empty((len(files),) + grid.shape, dtype=np.complex128)
        for k, fname in enumerate(files):
            fld, t, _ = read_snapshot(src / fname)
            if fld.grid != grid:
                raise ConfigError(f"{fname}: grid mismatch inside trajectory directory")
            if abs(t - times[k]) > 1e-12 * max(1.0, abs(times[k])):
                raise ConfigError(f"{fname}: snapshot time {t} disagrees with manifest")
            stack[k] = fld.values
        channels[name] = stack
    return Trajectory(grid, times, channels, manifest.get("meta", {}))
