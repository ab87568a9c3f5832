"""Brute-force oracle, error metrics, baselines, and experiments.

The oracle simulates every day of a validation period and is the reference
the cluster-based predictions are scored against. Also here: the
power-curve-only baseline, the random-sampling benchmark (take 6 random
days, scale up, repeat), and the farm-feedback experiment that re-clusters
solver-output wind fields with and without the farm and counts label
changes under an optimal matching of the two cluster sets.
"""

from __future__ import annotations

import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .aggregate import LongTermPrediction, _nearest_node
from .clustering import ClusterModel, kmeans_fit
from .datamodel import GriddedField, WeatherDataset, wind_speed_direction
from .errors import ValidationError
from .farm import FarmSpec, power_curve
from .flowsim import FlowSolver, InflowCondition, WakeResult, simulate_day

logger = logging.getLogger(__name__)


class CountingSolver:
    """FlowSolver wrapper that counts simulate() calls (compute budget)."""

    def __init__(self, inner: FlowSolver):
        self.inner = inner
        self.calls = 0

    def simulate(self, inflow: InflowCondition, farm: FarmSpec) -> WakeResult:
        self.calls += 1
        return self.inner.simulate(inflow, farm)


@dataclass(frozen=True, eq=False)
class OracleResult:
    """One solver run per day of the validation period."""

    indices: np.ndarray  # time indices simulated
    day_results: tuple[WakeResult, ...]
    day_powers: np.ndarray  # (n,) W
    total_power_w_days: float
    mean_wake: GriddedField

    @property
    def n_days(self) -> int:
        return len(self.day_results)


def run_oracle(
    ds: WeatherDataset,
    farm: FarmSpec,
    solver: FlowSolver,
    period=None,
    threads: int = 1,
) -> OracleResult:
    """Simulate every day in ``period`` (default: the whole dataset)."""
    period = np.arange(ds.n_times) if period is None else np.asarray(period, dtype=np.intp)
    if period.size == 0 or period.min() < 0 or period.max() >= ds.n_times:
        raise ValidationError("period indices out of range")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda t: simulate_day(ds, int(t), farm, solver), period))
    else:
        results = [simulate_day(ds, int(t), farm, solver) for t in period]
    powers = np.array([r.farm_power for r in results])
    stack = np.stack([r.deficit.values[0].astype(np.float64) for r in results])
    mean_wake = GriddedField(
        grid=results[0].deficit.grid,
        timestamp=ds.times[int(period[0])],
        channels=("deficit",),
        values=stack.mean(axis=0)[None],
    )
    return OracleResult(
        indices=period.copy(),
        day_results=tuple(results),
        day_powers=powers,
        total_power_w_days=float(powers.sum()),
        mean_wake=mean_wake,
    )


def oracle_cluster_mean_wakes(oracle: OracleResult, labels, k: int) -> tuple[GriddedField, ...]:
    """Mean oracle wake raster per cluster under the given labeling."""
    labels = np.asarray(labels)
    if labels.size != oracle.n_days:
        raise ValidationError("labeling length must match the oracle period")
    out = []
    for i in range(k):
        members = np.nonzero(labels == i)[0]
        if members.size:
            stack = np.stack(
                [oracle.day_results[m].deficit.values[0].astype(np.float64) for m in members]
            )
            values = stack.mean(axis=0)
        else:
            values = np.zeros(oracle.mean_wake.grid.shape)
        out.append(
            GriddedField(
                grid=oracle.mean_wake.grid,
                timestamp=oracle.mean_wake.timestamp,
                channels=("deficit",),
                values=values[None],
            )
        )
    return tuple(out)


def power_curve_baseline(ds: WeatherDataset, farm: FarmSpec, period=None) -> float:
    """Wake-free estimate: sum over days of n_turbines * power_curve(speed
    at the farm-center node)."""
    period = np.arange(ds.n_times) if period is None else np.asarray(period, dtype=np.intp)
    i, j = _nearest_node(ds.grid, farm.farm_center)
    u = ds.values[period, ds.channel_index("u100"), i, j].astype(np.float64)
    v = ds.values[period, ds.channel_index("v100"), i, j].astype(np.float64)
    speed, _ = wind_speed_direction(u, v)
    return float(farm.n_turbines * power_curve(farm.turbine, speed).sum())


def random_sample_benchmark(
    oracle: OracleResult,
    n_draws: int = 365,
    sample_size: int = 6,
    seed: int = 0,
) -> np.ndarray:
    """Totals estimated from random small samples of the oracle days.

    Each draw picks ``sample_size`` distinct days and scales their summed
    power by ``n_days / sample_size``. Reuses the cached oracle powers, so
    no additional solver runs happen.
    """
    n = oracle.n_days
    if sample_size < 1 or sample_size > n:
        raise ValidationError(f"sample_size must be in [1, {n}], got {sample_size}")
    rng = np.random.default_rng(seed)
    scale = n / sample_size
    out = np.empty(n_draws)
    for d in range(n_draws):
        picks = rng.choice(n, size=sample_size, replace=False)
        out[d] = scale * oracle.day_powers[picks].sum()
    return out


def raster_pearson(a: np.ndarray, b: np.ndarray) -> tuple[float, bool]:
    """Pearson correlation over all cells, mean-centered per raster.

    Returns (correlation, degenerate) where degenerate marks a raster with
    zero variance; the correlation is then reported as 0.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    ac = a - a.mean()
    bc = b - b.mean()
    na = np.sqrt((ac**2).sum())
    nb = np.sqrt((bc**2).sum())
    if na == 0.0 or nb == 0.0:
        return 0.0, True
    return float(np.clip((ac * bc).sum() / (na * nb), -1.0, 1.0)), False


@dataclass(frozen=True)
class MethodComparison:
    """Errors of one prediction against the oracle."""

    method: str
    total_power_w_days: float | None
    power_abs_error_w_days: float | None
    power_rel_error: float | None
    overall_wake_mae: float | None
    overall_wake_corr: float | None
    per_cluster_wake_mae: tuple[float, ...] | None
    per_cluster_wake_corr: tuple[float, ...] | None
    degenerate_corr_clusters: tuple[int, ...] = ()


def compare(pred: LongTermPrediction, oracle: OracleResult, labels) -> MethodComparison:
    """Score a prediction against the oracle under the given labeling.

    Power errors compare totals; wake errors compare per-cluster and
    overall mean rasters (MAE in m/s, Pearson over mean-centered cells,
    degenerate zero-variance rasters reported as correlation 0 with a
    flag).
    """
    power_abs = power_rel = None
    if pred.total_power_w_days is not None:
        power_abs = abs(pred.total_power_w_days - oracle.total_power_w_days)
        power_rel = power_abs / oracle.total_power_w_days if oracle.total_power_w_days else None

    overall_mae = overall_corr = None
    mae_t = corr_t = None
    flagged: list[int] = []
    if pred.mean_wake is not None:
        if pred.mean_wake.grid != oracle.mean_wake.grid:
            raise ValidationError("prediction and oracle rasters live on different grids")
        k = len(pred.per_cluster_mean_wake)
        labels = np.asarray(labels)
        oracle_means = oracle_cluster_mean_wakes(oracle, labels, k)
        mae, corr = [], []
        for i in range(k):
            p = pred.per_cluster_mean_wake[i].values[0]
            o = oracle_means[i].values[0]
            mae.append(float(np.abs(p - o).mean()))
            c, degen = raster_pearson(p, o)
            corr.append(c)
            if degen:
                flagged.append(i)
        mae_t, corr_t = tuple(mae), tuple(corr)
        overall_mae = float(np.abs(pred.mean_wake.values[0] - oracle.mean_wake.values[0]).mean())
        overall_corr, degen = raster_pearson(pred.mean_wake.values[0], oracle.mean_wake.values[0])
        if degen:
            flagged.append(-1)  # -1 marks the overall raster
    return MethodComparison(
        method=pred.method,
        total_power_w_days=pred.total_power_w_days,
        power_abs_error_w_days=power_abs,
        power_rel_error=power_rel,
        overall_wake_mae=overall_mae,
        overall_wake_corr=overall_corr,
        per_cluster_wake_mae=mae_t,
        per_cluster_wake_corr=corr_t,
        degenerate_corr_clusters=tuple(flagged),
    )


@dataclass(frozen=True)
class ValidationReport:
    """Full scorecard: per-method comparisons plus benchmarks and budget."""

    oracle_total_w_days: float
    comparisons: dict
    solver_runs: dict
    baseline_w_days: float
    random_benchmark: dict

    def to_json(self) -> str:
        doc = {
            "oracle_total_w_days": self.oracle_total_w_days,
            "solver_runs": self.solver_runs,
            "power_curve_baseline_w_days": self.baseline_w_days,
            "random_benchmark": self.random_benchmark,
            "methods": {
                name: {
                    "total_power_w_days": c.total_power_w_days,
                    "power_abs_error_w_days": c.power_abs_error_w_days,
                    "power_rel_error": c.power_rel_error,
                    "overall_wake_mae": c.overall_wake_mae,
                    "overall_wake_corr": c.overall_wake_corr,
                    "per_cluster_wake_mae": list(c.per_cluster_wake_mae or ()),
                    "per_cluster_wake_corr": list(c.per_cluster_wake_corr or ()),
                    "degenerate_corr_clusters": list(c.degenerate_corr_clusters),
                }
                for name, c in self.comparisons.items()
            },
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def summarize_benchmark(estimates: np.ndarray) -> dict:
    q1, q3 = np.percentile(estimates, [25, 75])
    return {
        "n_draws": int(estimates.size),
        "min": float(estimates.min()),
        "median": float(np.median(estimates)),
        "max": float(estimates.max()),
        "iqr_half_width": float((q3 - q1) / 2.0),
    }


def build_validation_report(
    oracle: OracleResult,
    comparisons,
    baseline_w_days: float,
    benchmark_estimates: np.ndarray,
    solver_runs: dict,
) -> ValidationReport:
    return ValidationReport(
        oracle_total_w_days=oracle.total_power_w_days,
        comparisons={c.method: c for c in comparisons},
        solver_runs=dict(solver_runs),
        baseline_w_days=baseline_w_days,
        random_benchmark=summarize_benchmark(np.asarray(benchmark_estimates)),
    )


@dataclass(frozen=True, eq=False)
class FarmFeedbackReport:
    """Outcome of re-clustering solver winds with and without the farm.

    ``matching[i]`` is the with-farm cluster matched to no-farm cluster i
    by the minimal total squared centroid distance over all permutations;
    ``n_changed`` counts days whose matched labels differ.
    """

    n_days: int
    n_changed: int
    matching: tuple[int, ...]
    matching_cost: float
    labels_no_farm: np.ndarray
    labels_with_farm: np.ndarray
    centroid_diff: tuple[GriddedField, ...]  # speed difference, with - without


def _waked_dataset(ds: WeatherDataset, oracle: OracleResult) -> WeatherDataset:
    """Wind fields with the farm: free-stream scaled down by the deficit."""
    u_idx, v_idx = ds.channel_index("u100"), ds.channel_index("v100")
    values = ds.values[oracle.indices].astype(np.float64)
    u, v = values[:, u_idx], values[:, v_idx]
    speed = np.hypot(u, v)
    deficit = np.stack([r.deficit.values[0].astype(np.float64) for r in oracle.day_results])
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(speed > 0.0, np.maximum(speed - deficit, 0.0) / speed, 1.0)
    values[:, u_idx] = u * scale
    values[:, v_idx] = v * scale
    return WeatherDataset(
        grid=ds.grid,
        times=tuple(ds.times[int(t)] for t in oracle.indices),
        channels=ds.channels,
        values=values.astype(np.float32),
        channel_units=ds.channel_units,
    )


def match_clusters(centroids_a: np.ndarray, centroids_b: np.ndarray) -> tuple[tuple[int, ...], float]:
    """Permutation of b-clusters minimizing total squared centroid distance
    to a-clusters (exhaustive; k! permutations, fine for the k used here)."""
    k = centroids_a.shape[0]
    cost = ((centroids_a[:, None, :] - centroids_b[None, :, :]) ** 2).sum(axis=2)
    best_perm, best_cost = None, np.inf
    for perm in itertools.permutations(range(k)):
        c = cost[np.arange(k), perm].sum()
        if c < best_cost:
            best_perm, best_cost = perm, c
    return tuple(best_perm), float(best_cost)


def farm_feedback_recluster(
    ds: WeatherDataset,
    farm: FarmSpec,
    solver: FlowSolver,
    k: int,
    seed: int = 0,
    channels=("u100", "v100"),
    oracle: OracleResult | None = None,
) -> FarmFeedbackReport:
    """Re-cluster solver-output winds with and without the farm.

    The no-farm dataset is the free-stream input itself (the surrogate is
    steady-state, so its farm-free output equals its input); the with-farm
    dataset scales each day's wind down by that day's deficit raster. Both
    are clustered with identical (k, seed) and the cluster sets matched by
    optimal permutation; the report counts days whose matched label
    differs and includes centroid speed-difference rasters.
    """
    if oracle is None:
        oracle = run_oracle(ds, farm, solver)
    no_farm = WeatherDataset(
        grid=ds.grid,
        times=tuple(ds.times[int(t)] for t in oracle.indices),
        channels=ds.channels,
        values=ds.values[oracle.indices],
        channel_units=ds.channel_units,
    )
    with_farm = _waked_dataset(ds, oracle)
    model_a = kmeans_fit(no_farm, channels, k, seed=seed)
    model_b = kmeans_fit(with_farm, channels, k, seed=seed)
    perm, cost = match_clusters(model_a.centroids, model_b.centroids)
    # map with-farm labels into no-farm cluster ids: cluster perm[i] of b
    # corresponds to cluster i of a
    inverse = np.empty(k, dtype=np.int64)
    for i, p in enumerate(perm):
        inverse[p] = i
    mapped_b = inverse[model_b.labels]
    n_changed = int((mapped_b != model_a.labels).sum())

    diffs = []
    grid = ds.grid
    n_cells = grid.n_lat * grid.n_lon
    for i in range(k):
        ca = model_a.centroids[i].reshape(len(channels), grid.n_lat, grid.n_lon)
        cb = model_b.centroids[perm[i]].reshape(len(channels), grid.n_lat, grid.n_lon)
        speed_a = np.hypot(ca[0], ca[1])
        speed_b = np.hypot(cb[0], cb[1])
        diffs.append(
            GriddedField(
                grid=grid,
                timestamp=no_farm.times[0],
                channels=("dspeed",),
                values=(speed_b - speed_a)[None],
            )
        )
    assert model_a.centroids.shape[1] == len(channels) * n_cells
    return FarmFeedbackReport(
        n_days=no_farm.n_times,
        n_changed=n_changed,
        matching=perm,
        matching_cost=cost,
        labels_no_farm=model_a.labels,
        labels_with_farm=mapped_b,
        centroid_diff=tuple(diffs),
    )
