"""Fast engineering wake surrogate standing in for a mesoscale solver.

``jensen_simulate`` computes, for one inflow condition, the hub-height
velocity-deficit raster and the farm power using the classic top-hat
expanding-cone wake with root-sum-square superposition. The surrogate is
steady-state and intentionally simple; everything downstream only needs a
directional, speed-dependent wake and a per-condition farm power.

A ``FlowSolver`` is anything with ``simulate(inflow, farm) -> WakeResult``
that is deterministic for identical inputs; externally computed fields
(e.g. from a full NWP run) can be wrapped into ``WakeResult`` via
``import_external_result`` and used in place of the surrogate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from . import ingest
from .datamodel import GriddedField, WeatherDataset, bilinear_sample
from .errors import ValidationError
from .farm import FarmSpec, fitch_drag, power_curve, thrust_coefficient

DEFAULT_K_WAKE = 0.05  # offshore wake expansion coefficient


@dataclass(frozen=True, eq=False)
class InflowCondition:
    """Farm-absent hub-height wind over the simulation domain."""

    field: GriddedField

    def __post_init__(self) -> None:
        for name in ("u100", "v100"):
            if name not in self.field.channels:
                raise ValidationError(f"inflow field lacks channel {name!r}")

    @property
    def grid(self):
        return self.field.grid

    @property
    def timestamp(self):
        return self.field.timestamp

    def u(self) -> np.ndarray:
        return self.field.channel("u100").astype(np.float64)

    def v(self) -> np.ndarray:
        return self.field.channel("v100").astype(np.float64)


@dataclass(frozen=True, eq=False)
class WakeResult:
    """Deficit raster (free-stream speed minus waked speed, m/s, >= 0) plus
    farm power for one simulated condition.

    ``per_turbine_power`` is None for externally imported results, where
    only the farm total is known. ``momentum_sink`` is the per-turbine
    drag-force magnitude [N] diagnostic.
    """

    deficit: GriddedField
    farm_power: float  # W
    inflow: InflowCondition
    per_turbine_power: tuple[float, ...] | None = None
    momentum_sink: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.deficit.channels != ("deficit",):
            raise ValidationError("deficit field must have the single channel 'deficit'")
        if (self.deficit.values < 0).any():
            raise ValidationError("deficit must be >= 0 everywhere")
        if not math.isfinite(self.farm_power) or self.farm_power < 0:
            raise ValidationError(f"farm_power must be finite and >= 0, got {self.farm_power}")
        if self.deficit.grid != self.inflow.grid:
            raise ValidationError("deficit grid does not match inflow grid")
        if self.per_turbine_power is not None:
            total = sum(self.per_turbine_power)
            if abs(total - self.farm_power) > 1e-6 * max(self.farm_power, 1.0):
                raise ValidationError("farm_power must equal the sum of per-turbine powers")


class FlowSolver(Protocol):
    def simulate(self, inflow: InflowCondition, farm: FarmSpec) -> WakeResult: ...


def _turbine_inflow(inflow: InflowCondition, farm: FarmSpec):
    """Local (u, v) at each turbine via bilinear interpolation; validates
    that every turbine lies inside the domain."""
    grid = inflow.grid
    pos = farm.positions_array()
    lat, lon = grid.latlon_from_meters(pos[:, 0], pos[:, 1], farm.farm_center)
    eps = 1e-9
    inside = (
        (lat >= grid.lat_min - eps)
        & (lat <= grid.lat_max + eps)
        & (lon >= grid.lon_min - eps)
        & (lon <= grid.lon_max + eps)
    )
    if not inside.all():
        raise ValidationError("farm extends outside the simulation domain")
    u = bilinear_sample(inflow.u(), grid, lat, lon)
    v = bilinear_sample(inflow.v(), grid, lat, lon)
    return u, v


def jensen_simulate(
    inflow: InflowCondition, farm: FarmSpec, k_wake: float = DEFAULT_K_WAKE
) -> WakeResult:
    """Top-hat wake simulation of one inflow condition.

    Per-turbine effective speeds are computed most-upstream first (ordered
    by each turbine's position projected on its local flow direction), with
    the single-wake deficit fraction

        delta = (1 - sqrt(1 - C_T)) / (1 + k_wake * x / r0)^2

    inside the cone of radius r0 + k_wake * x at downstream distance x > 0
    and zero elsewhere; overlapping wakes combine root-sum-square. Wake
    geometry is always evaluated in the receiving point's local flow frame,
    and C_T is taken at the emitting turbine's effective speed. Turbines
    whose free-stream speed reaches cut-out are shut down (zero power);
    their drag follows the decayed thrust table.

    The deficit raster holds ``combined_fraction * local free-stream
    speed`` at every grid node, using the node's own flow direction.
    """
    if k_wake <= 0:
        raise ValidationError(f"k_wake must be > 0, got {k_wake}")
    spec = farm.turbine
    r0 = spec.rotor_diameter / 2.0
    pos = farm.positions_array()
    n = farm.n_turbines

    u_t, v_t = _turbine_inflow(inflow, farm)
    s0 = np.hypot(u_t, v_t)
    with np.errstate(invalid="ignore"):
        dirs = np.where(s0[:, None] > 0.0, np.stack([u_t, v_t], axis=1) / s0[:, None], 0.0)

    order = np.argsort((pos * dirs).sum(axis=1), kind="stable")
    s_eff = np.zeros(n)
    a_coef = np.zeros(n)  # 1 - sqrt(1 - C_T(s_eff)) per processed turbine
    for rank, t in enumerate(order):
        prev = order[:rank]
        if rank > 0:
            rel = pos[t] - pos[prev]
            d = dirs[t]
            dx = rel @ d
            latd = np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0])
            cone = (dx > 0.0) & (latd <= r0 + k_wake * dx)
            with np.errstate(divide="ignore", invalid="ignore"):
                delta = np.where(cone, a_coef[prev] / (1.0 + k_wake * dx / r0) ** 2, 0.0)
            frac = min(math.sqrt(float((delta**2).sum())), 1.0)
        else:
            frac = 0.0
        s_eff[t] = s0[t] * (1.0 - frac)
        a_coef[t] = 1.0 - math.sqrt(1.0 - thrust_coefficient(spec, s_eff[t]))

    operating = s0 < spec.cut_out
    per_power = np.where(operating, power_curve(spec, s_eff), 0.0)
    farm_power = float(per_power.sum())

    sink = fitch_drag(spec, dirs * s_eff[:, None])
    sink_mag = np.hypot(sink[:, 0], sink[:, 1])

    deficit = _deficit_raster(inflow, farm, a_coef, r0, k_wake)
    deficit_field = GriddedField(
        grid=inflow.grid,
        timestamp=inflow.timestamp,
        channels=("deficit",),
        # stored at the on-disk precision so export/import round-trips exactly
        values=deficit[None, :, :].astype(np.float32),
    )
    return WakeResult(
        deficit=deficit_field,
        farm_power=farm_power,
        inflow=inflow,
        per_turbine_power=tuple(float(p) for p in per_power),
        momentum_sink=tuple(float(m) for m in sink_mag),
    )


def _deficit_raster(inflow, farm, a_coef, r0, k_wake) -> np.ndarray:
    grid = inflow.grid
    u = inflow.u()
    v = inflow.v()
    speed = np.hypot(u, v)
    cx, cy = grid.meter_coords(farm.farm_center)
    flat_speed = speed.ravel()
    with np.errstate(invalid="ignore"):
        dcx = np.where(flat_speed > 0.0, u.ravel() / flat_speed, 0.0)
        dcy = np.where(flat_speed > 0.0, v.ravel() / flat_speed, 0.0)

    pos = farm.positions_array()
    rel_x = cx.ravel()[:, None] - pos[None, :, 0]
    rel_y = cy.ravel()[:, None] - pos[None, :, 1]
    dx = rel_x * dcx[:, None] + rel_y * dcy[:, None]
    latd = np.abs(rel_x * dcy[:, None] - rel_y * dcx[:, None])
    cone = (dx > 0.0) & (latd <= r0 + k_wake * dx)
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(cone, a_coef[None, :] / (1.0 + k_wake * dx / r0) ** 2, 0.0)
    frac = np.minimum(np.sqrt((delta**2).sum(axis=1)), 1.0)
    return (frac * flat_speed).reshape(grid.shape)


@dataclass(frozen=True)
class JensenSolver:
    """Default FlowSolver backed by :func:`jensen_simulate`."""

    k_wake: float = DEFAULT_K_WAKE

    def simulate(self, inflow: InflowCondition, farm: FarmSpec) -> WakeResult:
        return jensen_simulate(inflow, farm, k_wake=self.k_wake)


def simulate_day(
    ds: WeatherDataset, t_index: int, farm: FarmSpec, solver: FlowSolver
) -> WakeResult:
    """Build the inflow condition for day ``t_index`` and run the solver."""
    return solver.simulate(InflowCondition(ds.field(t_index)), farm)


def export_wake_result(result: WakeResult, dir_path) -> None:
    """Write the deficit raster in the dataset format plus a power sidecar.

    Layout: ``manifest.json`` + ``data.bin`` (single time, single channel
    'deficit') and ``power.json`` = {"farm_power_w": <number>}.
    """
    dir_path = Path(dir_path)
    ds = WeatherDataset(
        grid=result.deficit.grid,
        times=(result.deficit.timestamp,),
        channels=("deficit",),
        values=result.deficit.values[None, :, :, :],
        channel_units=("m/s",),
    )
    ingest.write_dataset(ds, dir_path)
    sidecar = json.dumps({"farm_power_w": result.farm_power}, sort_keys=True) + "\n"
    (dir_path / "power.json").write_text(sidecar)


def import_external_result(manifest_path, farm_power_w: float, inflow: InflowCondition) -> WakeResult:
    """Wrap an externally computed deficit raster as a WakeResult.

    The raster must live on the inflow grid, be a single 'deficit' channel,
    and be nonnegative; per-turbine powers are unknown for external data.
    """
    ds = ingest.read_dataset(manifest_path)
    if ds.channels != ("deficit",):
        raise ValidationError(f"external result must have the single channel 'deficit', got {ds.channels}")
    if ds.n_times != 1:
        raise ValidationError("external result must contain exactly one time")
    if ds.grid != inflow.grid:
        raise ValidationError("external deficit grid does not match the simulation domain")
    field = GriddedField(
        grid=ds.grid, timestamp=ds.times[0], channels=("deficit",), values=ds.values[0]
    )
    return WakeResult(deficit=field, farm_power=float(farm_power_w), inflow=inflow)


def load_wake_result(dir_path, inflow: InflowCondition) -> WakeResult:
    """Read a wake result previously written by :func:`export_wake_result`."""
    dir_path = Path(dir_path)
    sidecar = json.loads((dir_path / "power.json").read_text())
    return import_external_result(dir_path / "manifest.json", float(sidecar["farm_power_w"]), inflow)
