"""Combine per-cluster wake results into long-term predictions.

Two aggregation routes over a prediction period of n days:

* simple: occupancy-weighted sum, total = sum_i N_i * P_i and
  wake = sum_i N_i * W_i;
* complex: per-datapoint correction of the cluster result by the ratio of
  farm-center wind speeds, with the wake raster additionally rotated by
  the difference between the datapoint's and the representative's wind
  angle, and each power term capped at the rated farm power.

The farm-center speeds and angles on both sides of the correction come
from the farm-absent input dataset (sampled at the grid node nearest the
farm center), never from simulator output. Aggregation arithmetic is
float64 throughout; rasters are cast to the storage dtype only on export.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ingest
from .clustering import ClusterModel
from .datamodel import GriddedField, GridSpec, WeatherDataset, bilinear_sample, wind_speed_direction
from .errors import ValidationError
from .farm import FarmSpec
from .flowsim import WakeResult

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AggregationInputs:
    """Everything the weighted sums consume, for one prediction period.

    ``labels``, ``day_speed``, ``day_theta`` are per datapoint of the
    period; ``rep_speed``, ``rep_theta`` are per cluster, sampled at the
    representative datapoint. Winds are farm-center values from the
    farm-absent dataset.
    """

    k: int
    labels: np.ndarray  # (n,) cluster index per datapoint
    counts: np.ndarray  # (k,) datapoints per cluster within the period
    cluster_wakes: tuple[WakeResult, ...]
    rep_speed: np.ndarray  # (k,) m/s
    rep_theta: np.ndarray  # (k,) rad
    day_speed: np.ndarray  # (n,) m/s
    day_theta: np.ndarray  # (n,) rad
    rated_power_w: float
    center: tuple[float, float]  # (lat, lon) rotation pivot = farm center
    period_start: object  # datetime label for derived rasters

    def __post_init__(self) -> None:
        if len(self.cluster_wakes) != self.k:
            raise ValidationError("need exactly one WakeResult per cluster")
        grids = {w.deficit.grid for w in self.cluster_wakes}
        if len(grids) != 1:
            raise ValidationError("cluster wake rasters must share one grid")
        for name in ("labels", "counts", "rep_speed", "rep_theta", "day_speed", "day_theta"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.labels.size != self.day_speed.size or self.labels.size != self.day_theta.size:
            raise ValidationError("labels and day winds must have equal length")
        if not (np.isfinite(self.day_speed).all() and np.isfinite(self.rep_speed).all()):
            raise ValidationError("wind speeds must be finite")
        if int(self.counts.sum()) != self.labels.size:
            raise ValidationError("counts must sum to the number of datapoints")

    @property
    def n_days(self) -> int:
        return int(self.labels.size)

    @property
    def grid(self) -> GridSpec:
        return self.cluster_wakes[0].deficit.grid


def build_aggregation_inputs(
    ds: WeatherDataset,
    model: ClusterModel,
    wakes,
    farm: FarmSpec,
    period=None,
) -> AggregationInputs:
    """Sample farm-center winds and package the aggregation inputs.

    ``period`` is an optional sequence of time indices into ``ds`` (default
    all); the cluster model must have been fit on ``ds``.
    """
    wakes = tuple(wakes)
    if model.labels.size != ds.n_times:
        raise ValidationError("cluster model was not fit on this dataset")
    period = np.arange(ds.n_times) if period is None else np.asarray(period, dtype=np.intp)
    if period.size == 0 or period.min() < 0 or period.max() >= ds.n_times:
        raise ValidationError("period indices out of range")

    i, j = _nearest_node(ds.grid, farm.farm_center)
    u_all = ds.values[:, ds.channel_index("u100"), i, j].astype(np.float64)
    v_all = ds.values[:, ds.channel_index("v100"), i, j].astype(np.float64)
    speed_all, theta_all = wind_speed_direction(u_all, v_all)

    rep = model.representative_idx
    return AggregationInputs(
        k=model.k,
        labels=model.labels[period],
        counts=np.bincount(model.labels[period], minlength=model.k),
        cluster_wakes=wakes,
        rep_speed=speed_all[rep],
        rep_theta=theta_all[rep],
        day_speed=speed_all[period],
        day_theta=theta_all[period],
        rated_power_w=farm.rated_farm_power,
        center=farm.farm_center,
        period_start=ds.times[int(period[0])],
    )


def _nearest_node(grid: GridSpec, center: tuple[float, float]) -> tuple[int, int]:
    if not grid.contains(*center):
        raise ValidationError(f"farm center {center} outside dataset grid")
    i = 0 if grid.n_lat == 1 else int(round((center[0] - grid.lat_min) / grid.lat_step))
    j = 0 if grid.n_lon == 1 else int(round((center[1] - grid.lon_min) / grid.lon_step))
    return min(max(i, 0), grid.n_lat - 1), min(max(j, 0), grid.n_lon - 1)


@dataclass(frozen=True, eq=False)
class LongTermPrediction:
    """Aggregated long-term power and/or wake prediction.

    Totals are sums over the period's datapoints (units W*days for power);
    means divide by the day count. Power-only or wake-only predictions
    leave the other side as None. ``degenerate_clusters`` lists clusters
    whose representative had zero farm-center speed (their members fall
    back to the uncorrected cluster result).
    """

    method: str
    n_days: int
    total_power_w_days: float | None
    per_cluster_power_w_days: tuple[float, ...] | None
    wake_sum: GriddedField | None
    mean_wake: GriddedField | None
    per_cluster_mean_wake: tuple[GriddedField, ...] | None
    degenerate_clusters: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.total_power_w_days is not None:
            if not math.isfinite(self.total_power_w_days) or self.total_power_w_days < 0:
                raise ValidationError("total power must be finite and >= 0")
        if self.mean_wake is not None and (self.mean_wake.values < 0).any():
            raise ValidationError("mean wake must be >= 0 cellwise")


def simple_sum(inputs: AggregationInputs) -> LongTermPrediction:
    """Occupancy-weighted sum of the cluster results."""
    powers = np.array([w.farm_power for w in inputs.cluster_wakes])
    counts = inputs.counts.astype(np.float64)
    per_cluster_power = counts * powers
    total = float(per_cluster_power.sum())

    rasters = np.stack([w.deficit.values[0].astype(np.float64) for w in inputs.cluster_wakes])
    wake_sum = (counts[:, None, None] * rasters).sum(axis=0)
    n = inputs.n_days
    make = lambda a: _raster(inputs, a)
    return LongTermPrediction(
        method="simple",
        n_days=n,
        total_power_w_days=total,
        per_cluster_power_w_days=tuple(float(p) for p in per_cluster_power),
        wake_sum=make(wake_sum),
        mean_wake=make(wake_sum / n),
        per_cluster_mean_wake=tuple(make(r) for r in rasters),
    )


def _raster(inputs: AggregationInputs, values: np.ndarray) -> GriddedField:
    return GriddedField(
        grid=inputs.grid,
        timestamp=inputs.period_start,
        channels=("deficit",),
        values=values[None, :, :],
    )


def _degenerate_clusters(inputs: AggregationInputs) -> tuple[int, ...]:
    flagged = []
    for i in range(inputs.k):
        if inputs.rep_speed[i] == 0.0 and inputs.counts[i] > 0:
            members = inputs.labels == i
            if (inputs.day_speed[members] > 0.0).any():
                flagged.append(i)
    if flagged:
        logger.warning(
            "clusters %s have zero-speed representatives; their members use "
            "the uncorrected cluster result",
            flagged,
        )
    return tuple(flagged)


def complex_power(inputs: AggregationInputs) -> LongTermPrediction:
    """Per-datapoint speed-ratio correction of the cluster powers.

    total = sum_i sum_{j in i} min((|u_j| / |u_i|) * P_i, rated farm power);
    the rated cap applies to each datapoint term individually.
    """
    degenerate = _degenerate_clusters(inputs)
    per_cluster = np.zeros(inputs.k)
    for i in range(inputs.k):
        members = inputs.labels == i
        if not members.any():
            continue
        p_i = inputs.cluster_wakes[i].farm_power
        if i in degenerate:
            terms = np.full(int(members.sum()), min(p_i, inputs.rated_power_w))
        else:
            ratios = inputs.day_speed[members] / inputs.rep_speed[i]
            terms = np.minimum(ratios * p_i, inputs.rated_power_w)
        per_cluster[i] = terms.sum()
    return LongTermPrediction(
        method="complex",
        n_days=inputs.n_days,
        total_power_w_days=float(per_cluster.sum()),
        per_cluster_power_w_days=tuple(float(p) for p in per_cluster),
        wake_sum=None,
        mean_wake=None,
        per_cluster_mean_wake=None,
        degenerate_clusters=degenerate,
    )


def rotate_wake(W: GriddedField, dtheta: float, center: tuple[float, float]) -> GriddedField:
    """Rotate a wake raster by ``dtheta`` about ``center`` (lat, lon).

    Each output node takes the bilinear sample of ``W`` at its position
    rotated by ``-dtheta`` about the center (in local meter coordinates);
    source points outside the grid contribute 0. ``dtheta == 0`` returns
    the input unchanged.
    """
    if not W.grid.contains(*center):
        raise ValidationError(f"rotation center {center} outside the raster grid")
    if dtheta == 0.0:
        return W
    out = _rotate_many(W.values[0].astype(np.float64), W.grid, np.array([dtheta]), center)[0]
    return GriddedField(grid=W.grid, timestamp=W.timestamp, channels=W.channels, values=out[None])


def _rotate_many(
    values: np.ndarray, grid: GridSpec, dthetas: np.ndarray, center: tuple[float, float]
) -> np.ndarray:
    """(m, n_lat, n_lon) stack of rotations of one raster; exact for 0."""
    x, y = grid.meter_coords(center)
    cos = np.cos(dthetas)[:, None, None]
    sin = np.sin(dthetas)[:, None, None]
    src_x = cos * x + sin * y
    src_y = -sin * x + cos * y
    lat, lon = grid.latlon_from_meters(src_x, src_y, center)
    out = bilinear_sample(values, grid, lat, lon, fill=0.0)
    zero = dthetas == 0.0
    if zero.any():
        out[zero] = values
    return out


def complex_wake(inputs: AggregationInputs) -> LongTermPrediction:
    """Ratio-scaled, rotation-corrected wake sum.

    wake = sum_i sum_{j in i} (|u_j| / |u_i|) * rotate(W_i, theta_j -
    theta_i). Zero-speed datapoints contribute nothing (ratio 0, rotation
    skipped); clusters with a zero-speed representative fall back to the
    uncorrected W_i for their members.
    """
    degenerate = _degenerate_clusters(inputs)
    grid = inputs.grid
    total = np.zeros(grid.shape, dtype=np.float64)
    per_cluster_mean = []
    for i in range(inputs.k):
        members = np.nonzero(inputs.labels == i)[0]
        w_i = inputs.cluster_wakes[i].deficit.values[0].astype(np.float64)
        acc = np.zeros_like(total)
        if members.size:
            if i in degenerate:
                acc = members.size * w_i
            else:
                speeds = inputs.day_speed[members]
                live = speeds > 0.0
                if live.any():
                    ratios = speeds[live] / inputs.rep_speed[i]
                    dthetas = inputs.day_theta[members][live] - inputs.rep_theta[i]
                    rotated = _rotate_many(w_i, grid, dthetas, inputs.center)
                    acc = (ratios[:, None, None] * rotated).sum(axis=0)
        total += acc
        per_cluster_mean.append(acc / max(members.size, 1))
    n = inputs.n_days
    make = lambda a: _raster(inputs, a)
    return LongTermPrediction(
        method="complex",
        n_days=n,
        total_power_w_days=None,
        per_cluster_power_w_days=None,
        wake_sum=make(total),
        mean_wake=make(total / n),
        per_cluster_mean_wake=tuple(make(r) for r in per_cluster_mean),
        degenerate_clusters=degenerate,
    )


def complex_prediction(inputs: AggregationInputs) -> LongTermPrediction:
    """Combined ratio-corrected power and rotation-corrected wake."""
    p = complex_power(inputs)
    w = complex_wake(inputs)
    return LongTermPrediction(
        method="complex",
        n_days=p.n_days,
        total_power_w_days=p.total_power_w_days,
        per_cluster_power_w_days=p.per_cluster_power_w_days,
        wake_sum=w.wake_sum,
        mean_wake=w.mean_wake,
        per_cluster_mean_wake=w.per_cluster_mean_wake,
        degenerate_clusters=tuple(sorted(set(p.degenerate_clusters) | set(w.degenerate_clusters))),
    )


def prediction_summary(pred: LongTermPrediction) -> dict:
    doc = {
        "method": pred.method,
        "n_days": pred.n_days,
        "total_power_w_days": pred.total_power_w_days,
        "degenerate_clusters": list(pred.degenerate_clusters),
    }
    if pred.per_cluster_power_w_days is not None:
        doc["per_cluster"] = [{"power_w_days": p} for p in pred.per_cluster_power_w_days]
    if pred.wake_sum is not None:
        doc["wake_sum_total"] = float(pred.wake_sum.values.sum())
    return doc


def export_prediction(pred: LongTermPrediction, dir_path) -> None:
    """Write summary JSON plus mean-wake rasters in the dataset format."""
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    (dir_path / "summary.json").write_text(
        json.dumps(prediction_summary(pred), sort_keys=True, indent=2) + "\n"
    )
    if pred.mean_wake is not None:
        _write_raster(pred.mean_wake, dir_path / "mean_wake")
        for i, raster in enumerate(pred.per_cluster_mean_wake):
            _write_raster(raster, dir_path / f"cluster_{i}_mean_wake")


def _write_raster(field: GriddedField, dir_path) -> None:
    ds = WeatherDataset(
        grid=field.grid,
        times=(field.timestamp,),
        channels=field.channels,
        values=field.values[None].astype(np.float32),
        channel_units=("m/s",),
    )
    ingest.write_dataset(ds, dir_path)
