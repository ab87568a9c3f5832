"""Bundled synthetic scenarios and the on-disk scenario spec format.

The reference scenario is a 365-day year of six well-separated flow
regimes on a 40x40 domain (~17 km across) with a 100-turbine farm at the
center. It is sized so that regime recovery, the elbow diagnostics, and
the aggregation-versus-oracle comparisons all have clear signal at desk
scale. The tiny scenario is a fast three-regime variant for CLI tests.
"""

from __future__ import annotations

import json
import math
from datetime import datetime, timezone
from pathlib import Path

from .datamodel import GridSpec
from .errors import ConfigError
from .farm import FarmSpec, default_farm
from .ingest import RegimeParams, SyntheticRegimeSpec

REFERENCE_CENTER = (55.0, 5.0)
REFERENCE_START = datetime(2007, 1, 1, 12, tzinfo=timezone.utc)


def reference_grid() -> GridSpec:
    # ~445 m cells; the farm (7.9 km across) sits centered with a few km of
    # downstream room before wakes leave the domain
    return GridSpec(
        lat_min=54.922, lat_max=55.078, lon_min=4.8635, lon_max=5.1365, n_lat=40, n_lon=40
    )


def reference_spec(seed: int = 20070) -> SyntheticRegimeSpec:
    directions = [math.radians(d) for d in (0, 60, 120, 180, 240, 300)]
    speeds = (7.0, 9.5, 8.0, 12.0, 10.5, 13.5)
    probs = (0.22, 0.17, 0.16, 0.18, 0.13, 0.14)
    regimes = tuple(
        RegimeParams(speed=s, direction=d, perturbation_amplitude=0.6, probability=p)
        for s, d, p in zip(speeds, directions, probs)
    )
    return SyntheticRegimeSpec(
        regimes=regimes,
        noise_std=0.35,
        p_stay=0.8,
        seed=seed,
        speed_jitter_std=1.2,
        direction_jitter_std=math.radians(10.0),
    )


def reference_farm() -> FarmSpec:
    return default_farm(REFERENCE_CENTER)


def reference_n_days() -> int:
    return 365


def tiny_grid() -> GridSpec:
    return GridSpec(
        lat_min=54.97, lat_max=55.03, lon_min=4.9475, lon_max=5.0525, n_lat=16, n_lon=16
    )


def tiny_spec(seed: int = 7) -> SyntheticRegimeSpec:
    regimes = tuple(
        RegimeParams(
            speed=s, direction=math.radians(d), perturbation_amplitude=0.3, probability=p
        )
        for s, d, p in ((8.0, 0, 0.4), (11.0, 120, 0.35), (9.0, 240, 0.25))
    )
    return SyntheticRegimeSpec(
        regimes=regimes,
        noise_std=0.3,
        p_stay=0.7,
        seed=seed,
        speed_jitter_std=0.8,
        direction_jitter_std=math.radians(8.0),
    )


def scenario_to_json(
    spec: SyntheticRegimeSpec, grid: GridSpec, n_days: int, start: datetime = REFERENCE_START
) -> str:
    doc = {
        "grid": {
            "lat_min": grid.lat_min,
            "lat_max": grid.lat_max,
            "lon_min": grid.lon_min,
            "lon_max": grid.lon_max,
            "n_lat": grid.n_lat,
            "n_lon": grid.n_lon,
        },
        "n_days": n_days,
        "start": start.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "regimes": [
            {
                "speed": r.speed,
                "direction": r.direction,
                "perturbation_amplitude": r.perturbation_amplitude,
                "probability": r.probability,
            }
            for r in spec.regimes
        ],
        "noise_std": spec.noise_std,
        "p_stay": spec.p_stay,
        "seed": spec.seed,
        "speed_jitter_std": spec.speed_jitter_std,
        "direction_jitter_std": spec.direction_jitter_std,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def scenario_from_json(text: str):
    """Parse a scenario file; returns (spec, grid, n_days, start)."""
    try:
        doc = json.loads(text)
        grid = GridSpec(
            lat_min=float(doc["grid"]["lat_min"]),
            lat_max=float(doc["grid"]["lat_max"]),
            lon_min=float(doc["grid"]["lon_min"]),
            lon_max=float(doc["grid"]["lon_max"]),
            n_lat=int(doc["grid"]["n_lat"]),
            n_lon=int(doc["grid"]["n_lon"]),
        )
        regimes = tuple(
            RegimeParams(
                speed=float(r["speed"]),
                direction=float(r["direction"]),
                perturbation_amplitude=float(r["perturbation_amplitude"]),
                probability=float(r["probability"]),
            )
            for r in doc["regimes"]
        )
        spec = SyntheticRegimeSpec(
            regimes=regimes,
            noise_std=float(doc["noise_std"]),
            p_stay=float(doc["p_stay"]),
            seed=int(doc["seed"]),
            speed_jitter_std=float(doc.get("speed_jitter_std", 0.0)),
            direction_jitter_std=float(doc.get("direction_jitter_std", 0.0)),
        )
        n_days = int(doc["n_days"])
        start = datetime.fromisoformat(doc["start"].replace("Z", "+00:00"))
        return spec, grid, n_days, start
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid scenario file: {exc}") from exc


def write_scenario(path, spec: SyntheticRegimeSpec, grid: GridSpec, n_days: int) -> None:
    Path(path).write_text(scenario_to_json(spec, grid, n_days))
