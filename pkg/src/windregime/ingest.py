"""Dataset file format and synthetic regime-weather generation.

On-disk format, chosen so any language can read it without NetCDF:

* ``manifest.json`` with keys exactly
  ``{"format_version", "grid", "channels", "times", "data_file", "dtype",
  "layout"}``,
* ``data.bin``: raw little-endian float32, no header, row-major in the
  declared layout ``"time,channel,lat,lon"``.

The synthetic generator emits one field per day (1200 UTC snapshots) whose
regime follows a sticky Markov chain, providing ground-truth labels for
desk-scale validation of the clustering and aggregation pipeline. All
randomness comes from numpy's default PCG64 generator seeded explicitly,
so equal seeds give bit-identical output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .datamodel import GridSpec, WeatherDataset
from .errors import CorruptionError, ValidationError, VersionError

FORMAT_VERSION = 1
DTYPE = "f32le"
LAYOUT = "time,channel,lat,lon"
MANIFEST_KEYS = {"format_version", "grid", "channels", "times", "data_file", "dtype", "layout"}


@dataclass(frozen=True)
class DatasetManifest:
    format_version: int
    grid: GridSpec
    channels: tuple[tuple[str, str], ...]  # (name, units)
    times: tuple[str, ...]  # ISO-8601 UTC
    data_file: str
    dtype: str = DTYPE
    layout: str = LAYOUT

    def element_count(self) -> int:
        return len(self.times) * len(self.channels) * self.grid.n_lat * self.grid.n_lon


def _iso_utc(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_iso_utc(s: str) -> datetime:
    return datetime.fromisoformat(s.replace("Z", "+00:00")).astimezone(timezone.utc)


def write_dataset(ds: WeatherDataset, dir_path) -> DatasetManifest:
    """Write ``manifest.json`` + ``data.bin`` into ``dir_path``.

    Deterministic: writing the same dataset twice produces byte-identical
    files. ``read_dataset`` inverts this exactly.
    """
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest(
        format_version=FORMAT_VERSION,
        grid=ds.grid,
        channels=tuple(zip(ds.channels, ds.channel_units)),
        times=tuple(_iso_utc(t) for t in ds.times),
        data_file="data.bin",
    )
    raw = np.ascontiguousarray(ds.values, dtype="<f4").tobytes()
    (dir_path / manifest.data_file).write_bytes(raw)
    (dir_path / "manifest.json").write_text(manifest_to_json(manifest))
    return manifest


def manifest_to_json(m: DatasetManifest) -> str:
    doc = {
        "format_version": m.format_version,
        "grid": {
            "lat_min": m.grid.lat_min,
            "lat_max": m.grid.lat_max,
            "lon_min": m.grid.lon_min,
            "lon_max": m.grid.lon_max,
            "n_lat": m.grid.n_lat,
            "n_lon": m.grid.n_lon,
        },
        "channels": [{"name": n, "units": u} for n, u in m.channels],
        "times": list(m.times),
        "data_file": m.data_file,
        "dtype": m.dtype,
        "layout": m.layout,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def read_manifest(manifest_path) -> DatasetManifest:
    manifest_path = Path(manifest_path)
    doc = json.loads(manifest_path.read_text())
    if set(doc) != MANIFEST_KEYS:
        raise ValidationError(
            f"manifest keys {sorted(doc)} != expected {sorted(MANIFEST_KEYS)}"
        )
    if doc["format_version"] != FORMAT_VERSION:
        raise VersionError(f"unsupported format_version {doc['format_version']!r}")
    if doc["dtype"] != DTYPE:
        raise ValidationError(f"unsupported dtype {doc['dtype']!r}")
    if doc["layout"] != LAYOUT:
        raise ValidationError(f"unsupported layout {doc['layout']!r}")
    g = doc["grid"]
    grid = GridSpec(
        lat_min=float(g["lat_min"]),
        lat_max=float(g["lat_max"]),
        lon_min=float(g["lon_min"]),
        lon_max=float(g["lon_max"]),
        n_lat=int(g["n_lat"]),
        n_lon=int(g["n_lon"]),
    )
    return DatasetManifest(
        format_version=int(doc["format_version"]),
        grid=grid,
        channels=tuple((c["name"], c.get("units", "")) for c in doc["channels"]),
        times=tuple(doc["times"]),
        data_file=doc["data_file"],
        dtype=doc["dtype"],
        layout=doc["layout"],
    )


def read_dataset(manifest_path) -> WeatherDataset:
    """Load a dataset; raises on any mismatch between manifest and data."""
    manifest_path = Path(manifest_path)
    m = read_manifest(manifest_path)
    data_path = manifest_path.parent / m.data_file
    if not data_path.exists():
        raise CorruptionError(f"data file {data_path} missing")
    raw = data_path.read_bytes()
    expected_bytes = m.element_count() * 4
    if len(raw) != expected_bytes:
        raise CorruptionError(
            f"data file has {len(raw)} bytes, manifest declares {expected_bytes}"
        )
    values = np.frombuffer(raw, dtype="<f4").reshape(
        len(m.times), len(m.channels), m.grid.n_lat, m.grid.n_lon
    )
    times = tuple(_parse_iso_utc(s) for s in m.times)
    return WeatherDataset(
        grid=m.grid,
        times=times,
        channels=tuple(n for n, _ in m.channels),
        values=values,
        channel_units=tuple(u for _, u in m.channels),
    )


@dataclass(frozen=True)
class RegimeParams:
    """One synthetic weather regime: a uniform flow plus a fixed smooth
    spatial perturbation pattern."""

    speed: float  # m/s, uniform-flow magnitude
    direction: float  # rad, blowing-toward angle
    perturbation_amplitude: float  # m/s
    probability: float  # occurrence probability


@dataclass(frozen=True)
class SyntheticRegimeSpec:
    """Parameters of the regime-switching synthetic weather generator.

    ``speed_jitter_std`` / ``direction_jitter_std`` add a day-coherent
    perturbation of the regime's uniform flow (one draw per day applied to
    the whole field) on top of the per-cell i.i.d. noise; with the default
    of 0 each day is exactly regime mean + cell noise. The day-coherent
    terms are what make the speed-ratio and rotation corrections of the
    aggregation stage carry real signal.
    """

    regimes: tuple[RegimeParams, ...]
    noise_std: float  # m/s, i.i.d. per cell and channel
    p_stay: float  # persistence probability of the regime Markov chain
    seed: int
    speed_jitter_std: float = 0.0  # m/s, day-coherent
    direction_jitter_std: float = 0.0  # rad, day-coherent

    def __post_init__(self) -> None:
        if len(self.regimes) < 1:
            raise ValidationError("at least one regime is required")
        total = sum(r.probability for r in self.regimes)
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"regime probabilities sum to {total}, expected 1")
        if any(r.probability < 0 for r in self.regimes):
            raise ValidationError("regime probabilities must be >= 0")
        if self.noise_std < 0 or self.speed_jitter_std < 0 or self.direction_jitter_std < 0:
            raise ValidationError("noise/jitter stds must be >= 0")
        if not 0.0 <= self.p_stay <= 1.0:
            raise ValidationError(f"p_stay must be in [0, 1], got {self.p_stay}")

    @property
    def k_true(self) -> int:
        return len(self.regimes)


def regime_mean_field(spec: SyntheticRegimeSpec, regime: int, grid: GridSpec) -> np.ndarray:
    """(2, n_lat, n_lon) float64 mean (u, v) field of one regime."""
    r = spec.regimes[regime]
    pert_u, pert_v = _perturbation(r.perturbation_amplitude, regime, grid)
    u = r.speed * math.cos(r.direction) + pert_u
    v = r.speed * math.sin(r.direction) + pert_v
    return np.stack([u, v])


def _perturbation(amplitude: float, regime: int, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    # Fixed low-frequency sinusoidal texture, phase-shifted per regime so
    # regimes differ in spatial pattern as well as bulk flow.
    ny, nx = grid.shape
    y = np.linspace(0.0, 1.0, ny)[:, None]
    x = np.linspace(0.0, 1.0, nx)[None, :]
    pu = amplitude * np.sin(2 * np.pi * (x + 0.37 * regime)) * np.cos(np.pi * y + 0.61 * regime)
    pv = amplitude * np.cos(2 * np.pi * (y + 0.53 * regime)) * np.sin(np.pi * x + 0.29 * regime)
    return pu, pv


def generate_synthetic(
    spec: SyntheticRegimeSpec,
    n_days: int,
    grid: GridSpec,
    start: datetime = datetime(2007, 1, 1, 12, tzinfo=timezone.utc),
) -> tuple[WeatherDataset, list[int]]:
    """Generate daily (u100, v100) fields plus ground-truth regime labels.

    Day t's regime follows a sticky Markov chain: with probability
    ``p_stay`` it repeats day t-1's regime, otherwise it is redrawn from
    the occurrence probabilities (so the effective no-transition
    probability for regime k is ``p_stay + (1 - p_stay) * p_k``). Fields
    are regime mean + day-coherent flow jitter + i.i.d. cell noise. Fully
    determined by ``spec.seed``; the draw order (labels, then per day:
    jitters, then noise) is part of the contract.
    """
    if n_days < 1:
        raise ValidationError(f"n_days must be >= 1, got {n_days}")
    rng = np.random.default_rng(spec.seed)
    probs = np.array([r.probability for r in spec.regimes])
    k = spec.k_true

    labels = np.empty(n_days, dtype=np.int64)
    labels[0] = rng.choice(k, p=probs)
    for t in range(1, n_days):
        if rng.random() < spec.p_stay:
            labels[t] = labels[t - 1]
        else:
            labels[t] = rng.choice(k, p=probs)

    means = [regime_mean_field(spec, r, grid) for r in range(k)]
    perts = [_perturbation(spec.regimes[r].perturbation_amplitude, r, grid) for r in range(k)]

    values = np.empty((n_days, 2) + grid.shape, dtype=np.float64)
    for t in range(n_days):
        r = int(labels[t])
        params = spec.regimes[r]
        if spec.speed_jitter_std > 0.0 or spec.direction_jitter_std > 0.0:
            speed = max(params.speed + rng.normal(0.0, spec.speed_jitter_std), 0.0) \
                if spec.speed_jitter_std > 0.0 else params.speed
            direction = params.direction + rng.normal(0.0, spec.direction_jitter_std) \
                if spec.direction_jitter_std > 0.0 else params.direction
            pu, pv = perts[r]
            day_u = speed * math.cos(direction) + pu
            day_v = speed * math.sin(direction) + pv
        else:
            day_u, day_v = means[r][0], means[r][1]
        if spec.noise_std > 0.0:
            noise = rng.normal(0.0, spec.noise_std, size=(2,) + grid.shape)
            values[t, 0] = day_u + noise[0]
            values[t, 1] = day_v + noise[1]
        else:
            values[t, 0] = day_u
            values[t, 1] = day_v

    times = tuple(start + timedelta(days=t) for t in range(n_days))
    ds = WeatherDataset(
        grid=grid,
        times=times,
        channels=("u100", "v100"),
        values=values.astype(np.float32),
        channel_units=("m/s", "m/s"),
    )
    return ds, [int(x) for x in labels]
