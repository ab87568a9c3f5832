"""Weather-pattern clustering and wake-aware long-term wind farm prediction.

Workflow: discover recurring flow patterns in daily gridded wind data with
k-means, simulate the farm's wake and power once per pattern, then combine
the handful of per-pattern results into long-term predictions, either as a
plain occupancy-weighted sum or with per-day speed-ratio and wake-rotation
corrections. A brute-force every-day oracle validates the shortcut.
"""

from .aggregate import (
    AggregationInputs,
    LongTermPrediction,
    build_aggregation_inputs,
    complex_power,
    complex_prediction,
    complex_wake,
    rotate_wake,
    simple_sum,
)
from .clustering import (
    ClusterModel,
    ElbowReport,
    TransitionMatrix,
    assign_labels,
    elbow_scan,
    kmeans_fit,
    nearest_datapoint,
    transition_matrix,
)
from .datamodel import (
    DomainWindow,
    GriddedField,
    GridSpec,
    WeatherDataset,
    extract_window,
    field_vectorize,
    vector_to_field,
    wind_speed_direction,
)
from .errors import (
    ConfigError,
    CorruptionError,
    DependencyError,
    ValidationError,
    VersionError,
    WindregimeError,
)
from .farm import (
    FarmSpec,
    TurbineSpec,
    default_farm,
    default_turbine,
    fitch_drag,
    power_curve,
    thrust_coefficient,
)
from .flowsim import (
    FlowSolver,
    InflowCondition,
    JensenSolver,
    WakeResult,
    export_wake_result,
    import_external_result,
    jensen_simulate,
    simulate_day,
)
from .ingest import (
    DatasetManifest,
    RegimeParams,
    SyntheticRegimeSpec,
    generate_synthetic,
    read_dataset,
    write_dataset,
)
from .validate import (
    CountingSolver,
    FarmFeedbackReport,
    MethodComparison,
    OracleResult,
    ValidationReport,
    compare,
    farm_feedback_recluster,
    power_curve_baseline,
    random_sample_benchmark,
    run_oracle,
)

__version__ = "0.1.0"
