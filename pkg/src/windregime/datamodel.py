"""Core grid, field, and dataset types shared by every pipeline stage.

Conventions:

* Grids are regular in degrees (plate carree). Node ``(i, j)`` sits at
  ``(lat_min + i * lat_step, lon_min + j * lon_step)``; latitude index 0 is
  the southern edge and longitude index 0 the western edge.
* Meter distances are derived from per-degree scale factors evaluated at
  the grid center latitude (domains are small or coarse, so spherical
  metrics are deliberately out of scope).
* Wind components (u, v) are eastward/northward in m/s. Angles are the
  mathematical "blowing toward" direction ``atan2(v, u)`` in (-pi, pi].
* Field values are stored as float32 (the on-disk dtype) and are frozen
  after construction, so instances are safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import ValidationError

EARTH_RADIUS_M = 6_371_000.0
METERS_PER_DEG_LAT = math.pi * EARTH_RADIUS_M / 180.0


def _frozen(values: np.ndarray, dtype=None) -> np.ndarray:
    """Read-only contiguous float array.

    With ``dtype=None`` float32/float64 inputs keep their precision and
    anything else is promoted to float64; datasets pass float32 explicitly
    (the on-disk dtype) so file round-trips stay bit-exact.
    """
    arr = np.asarray(values)
    if dtype is None:
        dtype = arr.dtype if arr.dtype in (np.float32, np.float64) else np.float64
    out = np.ascontiguousarray(arr, dtype=dtype)
    if out is arr:
        out = out.copy()
    out.setflags(write=False)
    return out


def _as_utc(t: datetime) -> datetime:
    if t.tzinfo is None:
        return t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


@dataclass(frozen=True)
class GridSpec:
    """Regular node-registered lat/lon grid.

    Spacing per axis is ``(max - min) / (n - 1)``. A degenerate single-node
    axis (``n == 1`` with ``min == max``) is permitted so that windowing can
    produce 1x1 views; the spacing on such an axis is 0.
    """

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    n_lat: int
    n_lon: int

    def __post_init__(self) -> None:
        for n, lo, hi, axis in (
            (self.n_lat, self.lat_min, self.lat_max, "lat"),
            (self.n_lon, self.lon_min, self.lon_max, "lon"),
        ):
            if not isinstance(n, (int, np.integer)) or n < 1:
                raise ValidationError(f"n_{axis} must be a positive integer, got {n!r}")
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValidationError(f"{axis} bounds must be finite")
            if n == 1:
                if lo != hi:
                    raise ValidationError(
                        f"{axis} bounds must coincide on a single-node axis, got [{lo}, {hi}]"
                    )
            elif not lo < hi:
                raise ValidationError(f"{axis}_min must be < {axis}_max, got [{lo}, {hi}]")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_lat, self.n_lon)

    @property
    def lat_step(self) -> float:
        if self.n_lat == 1:
            return 0.0
        return (self.lat_max - self.lat_min) / (self.n_lat - 1)

    @property
    def lon_step(self) -> float:
        if self.n_lon == 1:
            return 0.0
        return (self.lon_max - self.lon_min) / (self.n_lon - 1)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.lat_min + self.lat_max), 0.5 * (self.lon_min + self.lon_max))

    def lats(self) -> np.ndarray:
        return np.linspace(self.lat_min, self.lat_max, self.n_lat)

    def lons(self) -> np.ndarray:
        return np.linspace(self.lon_min, self.lon_max, self.n_lon)

    def meters_per_degree(self) -> tuple[float, float]:
        """(meters per degree latitude, meters per degree longitude).

        The longitude factor uses the grid center latitude.
        """
        return (METERS_PER_DEG_LAT, METERS_PER_DEG_LAT * math.cos(math.radians(self.center[0])))

    def meter_coords(self, center: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
        """Node positions in meters relative to ``center`` = (lat, lon).

        Returns (x, y) 2D arrays of shape (n_lat, n_lon); x is eastward,
        y northward.
        """
        m_lat, m_lon = self.meters_per_degree()
        x = (self.lons()[None, :] - center[1]) * m_lon
        y = (self.lats()[:, None] - center[0]) * m_lat
        return np.broadcast_to(x, self.shape).copy(), np.broadcast_to(y, self.shape).copy()

    def latlon_from_meters(
        self, x: np.ndarray, y: np.ndarray, center: tuple[float, float]
    ) -> tuple[np.ndarray, np.ndarray]:
        """Inverse of :meth:`meter_coords` for arbitrary points."""
        m_lat, m_lon = self.meters_per_degree()
        return center[0] + np.asarray(y) / m_lat, center[1] + np.asarray(x) / m_lon

    def contains(self, lat: float, lon: float) -> bool:
        return self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max


def _check_channels(channels) -> tuple[str, ...]:
    channels = tuple(channels)
    if not channels:
        raise ValidationError("at least one channel is required")
    if len(set(channels)) != len(channels):
        raise ValidationError(f"channel names must be unique, got {channels}")
    if not all(isinstance(c, str) and c for c in channels):
        raise ValidationError("channel names must be non-empty strings")
    return channels


@dataclass(frozen=True, eq=False)
class GriddedField:
    """One multi-channel 2D field on a grid at one timestamp (a "datapoint").

    ``values`` has shape (n_channels, n_lat, n_lon), stored float32 and
    read-only. All entries must be finite.
    """

    grid: GridSpec
    timestamp: datetime
    channels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        channels = _check_channels(self.channels)
        values = _frozen(self.values)  # float32 or float64, preserved
        if values.shape != (len(channels),) + self.grid.shape:
            raise ValidationError(
                f"values shape {values.shape} does not match "
                f"{(len(channels),) + self.grid.shape}"
            )
        if not np.isfinite(values).all():
            raise ValidationError("field values must all be finite")
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "timestamp", _as_utc(self.timestamp))

    def channel(self, name: str) -> np.ndarray:
        """2D (n_lat, n_lon) view of the named channel."""
        try:
            idx = self.channels.index(name)
        except ValueError:
            raise KeyError(f"channel {name!r} not in {self.channels}") from None
        return self.values[idx]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GriddedField):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.timestamp == other.timestamp
            and self.channels == other.channels
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class WeatherDataset:
    """Time-ordered stack of fields sharing one grid and channel set.

    ``values`` has shape (n_times, n_channels, n_lat, n_lon), float32,
    read-only. Times are strictly increasing UTC datetimes.
    """

    grid: GridSpec
    times: tuple[datetime, ...]
    channels: tuple[str, ...]
    values: np.ndarray
    channel_units: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        channels = _check_channels(self.channels)
        times = tuple(_as_utc(t) for t in self.times)
        if not times:
            raise ValidationError("dataset must contain at least one time")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("times must be strictly increasing")
        values = _frozen(self.values, dtype=np.float32)
        expected = (len(times), len(channels)) + self.grid.shape
        if values.shape != expected:
            raise ValidationError(f"values shape {values.shape} != expected {expected}")
        if not np.isfinite(values).all():
            raise ValidationError("dataset values must all be finite")
        units = tuple(self.channel_units) if self.channel_units else ("",) * len(channels)
        if len(units) != len(channels):
            raise ValidationError("channel_units length must match channels")
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channel_units", units)

    @property
    def n_times(self) -> int:
        return len(self.times)

    def field(self, t_index: int) -> GriddedField:
        if not -self.n_times <= t_index < self.n_times:
            raise ValidationError(f"time index {t_index} out of range [0, {self.n_times})")
        return GriddedField(
            grid=self.grid,
            timestamp=self.times[t_index],
            channels=self.channels,
            values=self.values[t_index],
        )

    def channel_index(self, name: str) -> int:
        try:
            return self.channels.index(name)
        except ValueError:
            raise KeyError(f"channel {name!r} not in {self.channels}") from None

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeatherDataset):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.times == other.times
            and self.channels == other.channels
            and self.channel_units == other.channel_units
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class DomainWindow:
    """Half-open index window [lat_start, lat_stop) x [lon_start, lon_stop)."""

    lat_start: int
    lat_stop: int
    lon_start: int
    lon_stop: int

    def __post_init__(self) -> None:
        if self.lat_start < 0 or self.lon_start < 0:
            raise ValidationError("window start indices must be >= 0")
        if self.lat_stop <= self.lat_start or self.lon_stop <= self.lon_start:
            raise ValidationError("window must be non-empty")

    def validate_against(self, grid: GridSpec) -> None:
        if self.lat_stop > grid.n_lat or self.lon_stop > grid.n_lon:
            raise ValidationError(
                f"window {self} exceeds grid shape {grid.shape}"
            )


def window_from_degrees(
    grid: GridSpec, lat_min: float, lat_max: float, lon_min: float, lon_max: float
) -> DomainWindow:
    """Index window of all nodes inside the inclusive degree box."""
    lats, lons = grid.lats(), grid.lons()
    lat_idx = np.nonzero((lats >= lat_min) & (lats <= lat_max))[0]
    lon_idx = np.nonzero((lons >= lon_min) & (lons <= lon_max))[0]
    if lat_idx.size == 0 or lon_idx.size == 0:
        raise ValidationError("degree window contains no grid nodes")
    return DomainWindow(int(lat_idx[0]), int(lat_idx[-1]) + 1, int(lon_idx[0]), int(lon_idx[-1]) + 1)


def extract_window(ds: WeatherDataset, w: DomainWindow) -> WeatherDataset:
    """Copy the sub-dataset covered by ``w``; the parent is unchanged."""
    w.validate_against(ds.grid)
    lats, lons = ds.grid.lats(), ds.grid.lons()
    sub_grid = GridSpec(
        lat_min=float(lats[w.lat_start]),
        lat_max=float(lats[w.lat_stop - 1]),
        lon_min=float(lons[w.lon_start]),
        lon_max=float(lons[w.lon_stop - 1]),
        n_lat=w.lat_stop - w.lat_start,
        n_lon=w.lon_stop - w.lon_start,
    )
    values = ds.values[:, :, w.lat_start : w.lat_stop, w.lon_start : w.lon_stop].copy()
    return WeatherDataset(
        grid=sub_grid,
        times=ds.times,
        channels=ds.channels,
        values=values,
        channel_units=ds.channel_units,
    )


def field_vectorize(f: GriddedField, channels) -> np.ndarray:
    """Concatenate the requested channels into one float64 feature vector.

    Layout: channel blocks in the requested order, each row-major by
    (lat, lon). This is the feature construction used for clustering.
    """
    channels = tuple(channels)
    parts = [f.channel(c).ravel() for c in channels]
    return np.concatenate(parts).astype(np.float64)


def vector_to_field(
    vec: np.ndarray, grid: GridSpec, channels, timestamp: datetime
) -> GriddedField:
    """Inverse of :func:`field_vectorize` for the same grid and channels."""
    channels = tuple(channels)
    vec = np.asarray(vec)
    expected = len(channels) * grid.n_lat * grid.n_lon
    if vec.size != expected:
        raise ValidationError(f"vector length {vec.size} != expected {expected}")
    values = vec.reshape(len(channels), grid.n_lat, grid.n_lon)
    return GriddedField(grid=grid, timestamp=timestamp, channels=channels, values=values)


def dataset_features(ds: WeatherDataset, channels) -> np.ndarray:
    """Feature matrix (n_times, n_channels*n_lat*n_lon), float64.

    Row t equals ``field_vectorize(ds.field(t), channels)``.
    """
    idx = [ds.channel_index(c) for c in tuple(channels)]
    sel = ds.values[:, idx, :, :]
    return sel.reshape(ds.n_times, -1).astype(np.float64)


def wind_speed_direction(u, v):
    """(speed, theta) from wind components.

    speed = sqrt(u^2 + v^2); theta = atan2(v, u) in (-pi, pi], the
    "blowing toward" angle. theta is defined as 0 where speed is 0.
    Accepts scalars or arrays.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    v_arr = np.asarray(v, dtype=np.float64)
    speed = np.hypot(u_arr, v_arr)
    theta = np.arctan2(v_arr, u_arr)
    theta = np.where(theta == -np.pi, np.pi, theta)
    theta = np.where(speed == 0.0, 0.0, theta)
    if np.isscalar(u) and np.isscalar(v):
        return float(speed), float(theta)
    return speed, theta


def bilinear_sample(
    values: np.ndarray,
    grid: GridSpec,
    lat,
    lon,
    fill: float = 0.0,
) -> np.ndarray:
    """Bilinear sample of a 2D (n_lat, n_lon) array at lat/lon points.

    Points outside the grid get ``fill``. Degenerate single-node axes are
    sampled as constant along that axis.
    """
    values = np.asarray(values, dtype=np.float64)
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)

    if grid.n_lat > 1:
        fi = (lat - grid.lat_min) / grid.lat_step
    else:
        fi = np.zeros_like(lat)
    if grid.n_lon > 1:
        fj = (lon - grid.lon_min) / grid.lon_step
    else:
        fj = np.zeros_like(lon)

    eps = 1e-9
    inside = (fi >= -eps) & (fi <= grid.n_lat - 1 + eps) & (fj >= -eps) & (fj <= grid.n_lon - 1 + eps)
    fi = np.clip(fi, 0.0, grid.n_lat - 1)
    fj = np.clip(fj, 0.0, grid.n_lon - 1)

    i0 = np.clip(np.floor(fi).astype(np.intp), 0, max(grid.n_lat - 2, 0))
    j0 = np.clip(np.floor(fj).astype(np.intp), 0, max(grid.n_lon - 2, 0))
    i1 = np.minimum(i0 + 1, grid.n_lat - 1)
    j1 = np.minimum(j0 + 1, grid.n_lon - 1)
    wi = fi - i0
    wj = fj - j0

    out = (
        values[i0, j0] * (1 - wi) * (1 - wj)
        + values[i1, j0] * wi * (1 - wj)
        + values[i0, j1] * (1 - wi) * wj
        + values[i1, j1] * wi * wj
    )
    return np.where(inside, out, fill)
