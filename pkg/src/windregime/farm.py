"""Turbine and wind-farm description: power curve, thrust curve, drag.

The default turbine pins the one number the study fixes (5 MW rating) and
fills the rest with a standard offshore reference design: D = 126 m, hub
100 m, cut-in 3 m/s, rated 11.4 m/s, cut-out 25 m/s, C_T 0.8 below rated
decaying linearly to 0.1 at cut-out, air density 1.225 kg/m3. The default
farm is a 10x10 array at 7 rotor diameters spacing (882 m).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class TurbineSpec:
    """One turbine type. SI units throughout.

    ``thrust_curve`` is a ((speed [m/s], C_T), ...) table with strictly
    increasing speeds and 0 < C_T < 1; lookups interpolate linearly and
    clamp at the table ends.
    """

    rated_power: float  # W
    rotor_diameter: float  # m
    hub_height: float  # m
    cut_in: float  # m/s
    rated_speed: float  # m/s
    cut_out: float  # m/s
    thrust_curve: tuple[tuple[float, float], ...]
    air_density: float = 1.225  # kg/m3

    def __post_init__(self) -> None:
        if not 0.0 < self.cut_in < self.rated_speed < self.cut_out:
            raise ValidationError(
                f"need 0 < cut_in < rated_speed < cut_out, got "
                f"({self.cut_in}, {self.rated_speed}, {self.cut_out})"
            )
        if self.rated_power <= 0:
            raise ValidationError(f"rated_power must be > 0, got {self.rated_power}")
        if self.rotor_diameter <= 0 or self.hub_height <= 0 or self.air_density <= 0:
            raise ValidationError("rotor_diameter, hub_height, air_density must be > 0")
        curve = tuple((float(s), float(ct)) for s, ct in self.thrust_curve)
        if len(curve) < 1:
            raise ValidationError("thrust_curve must have at least one entry")
        speeds = [s for s, _ in curve]
        if any(b <= a for a, b in zip(speeds, speeds[1:])):
            raise ValidationError("thrust_curve speeds must be strictly increasing")
        if any(not 0.0 < ct < 1.0 for _, ct in curve):
            raise ValidationError("thrust coefficients must lie strictly in (0, 1)")
        object.__setattr__(self, "thrust_curve", curve)

    @property
    def rotor_area(self) -> float:
        return math.pi * (self.rotor_diameter / 2.0) ** 2


@dataclass(frozen=True)
class FarmSpec:
    """Turbine positions in meters relative to the farm center (x east,
    y north) plus the shared turbine type and the center's (lat, lon)."""

    turbines: tuple[tuple[float, float], ...]
    turbine: TurbineSpec
    farm_center: tuple[float, float]  # (lat, lon) degrees

    def __post_init__(self) -> None:
        positions = tuple((float(x), float(y)) for x, y in self.turbines)
        if len(positions) < 1:
            raise ValidationError("a farm needs at least one turbine")
        if len(set(positions)) != len(positions):
            raise ValidationError("duplicate turbine positions")
        object.__setattr__(self, "turbines", positions)
        object.__setattr__(self, "farm_center", (float(self.farm_center[0]), float(self.farm_center[1])))

    @property
    def n_turbines(self) -> int:
        return len(self.turbines)

    @property
    def rated_farm_power(self) -> float:
        return self.n_turbines * self.turbine.rated_power

    def positions_array(self) -> np.ndarray:
        return np.array(self.turbines, dtype=np.float64)


def power_curve(spec: TurbineSpec, speed):
    """Electrical power [W] at hub-height wind speed [m/s].

    0 below cut-in and at/above cut-out, rated on [rated_speed, cut_out),
    and the cubic ramp rated * (v^3 - v_ci^3) / (v_r^3 - v_ci^3) between
    cut-in and rated. Accepts scalars or arrays.
    """
    v = np.asarray(speed, dtype=np.float64)
    if (v < 0).any():
        raise ValidationError("wind speed must be >= 0")
    ramp = spec.rated_power * (v**3 - spec.cut_in**3) / (spec.rated_speed**3 - spec.cut_in**3)
    p = np.where(
        v < spec.cut_in,
        0.0,
        np.where(v < spec.rated_speed, ramp, np.where(v < spec.cut_out, spec.rated_power, 0.0)),
    )
    if np.isscalar(speed):
        return float(p)
    return p


def thrust_coefficient(spec: TurbineSpec, speed):
    """C_T at the given speed, linearly interpolated, clamped at the table
    ends."""
    table = np.array(spec.thrust_curve)
    ct = np.interp(np.asarray(speed, dtype=np.float64), table[:, 0], table[:, 1])
    if np.isscalar(speed):
        return float(ct)
    return ct


def fitch_drag(spec: TurbineSpec, V) -> np.ndarray:
    """Drag force [N] the turbine exerts on the flow: anti-parallel to V
    with magnitude 0.5 * C_T(|V|) * rho * A * |V|^2.

    ``V`` is an (..., 2) velocity vector array in m/s; the force acts on
    the flow (F . V <= 0).
    """
    V = np.asarray(V, dtype=np.float64)
    if V.shape[-1] != 2:
        raise ValidationError(f"V must have a trailing dimension of 2, got shape {V.shape}")
    speed = np.hypot(V[..., 0], V[..., 1])
    ct = thrust_coefficient(spec, speed)
    factor = -0.5 * ct * spec.air_density * spec.rotor_area * speed
    return factor[..., None] * V


def default_turbine() -> TurbineSpec:
    """Reference 5 MW offshore turbine (see module docstring)."""
    return TurbineSpec(
        rated_power=5.0e6,
        rotor_diameter=126.0,
        hub_height=100.0,
        cut_in=3.0,
        rated_speed=11.4,
        cut_out=25.0,
        thrust_curve=((0.0, 0.8), (11.4, 0.8), (25.0, 0.1)),
    )


def default_farm(farm_center: tuple[float, float] = (55.0, 5.0)) -> FarmSpec:
    """100-turbine 10x10 array, 7 rotor diameters (882 m) spacing."""
    turbine = default_turbine()
    spacing = 7.0 * turbine.rotor_diameter
    offsets = (np.arange(10) - 4.5) * spacing
    positions = tuple((float(x), float(y)) for y in offsets for x in offsets)
    return FarmSpec(turbines=positions, turbine=turbine, farm_center=farm_center)


def farm_to_json(spec: FarmSpec) -> str:
    doc = {
        "farm_center": list(spec.farm_center),
        "turbine": {
            "rated_power": spec.turbine.rated_power,
            "rotor_diameter": spec.turbine.rotor_diameter,
            "hub_height": spec.turbine.hub_height,
            "cut_in": spec.turbine.cut_in,
            "rated_speed": spec.turbine.rated_speed,
            "cut_out": spec.turbine.cut_out,
            "thrust_curve": [list(row) for row in spec.turbine.thrust_curve],
            "air_density": spec.turbine.air_density,
        },
        "turbines": [list(p) for p in spec.turbines],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def farm_from_json(text: str) -> FarmSpec:
    doc = json.loads(text)
    t = doc["turbine"]
    turbine = TurbineSpec(
        rated_power=float(t["rated_power"]),
        rotor_diameter=float(t["rotor_diameter"]),
        hub_height=float(t["hub_height"]),
        cut_in=float(t["cut_in"]),
        rated_speed=float(t["rated_speed"]),
        cut_out=float(t["cut_out"]),
        thrust_curve=tuple((float(s), float(ct)) for s, ct in t["thrust_curve"]),
        air_density=float(t.get("air_density", 1.225)),
    )
    return FarmSpec(
        turbines=tuple((float(x), float(y)) for x, y in doc["turbines"]),
        turbine=turbine,
        farm_center=(float(doc["farm_center"][0]), float(doc["farm_center"][1])),
    )


def load_farm(path) -> FarmSpec:
    return farm_from_json(Path(path).read_text())
