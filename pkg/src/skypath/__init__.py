"""Channel-gain radio maps and gain-constrained UAV path planning on urban grids."""

from .environment import (
    EnvConfig,
    Environment,
    Gbs,
    Obstacle,
    Region,
    cell_of,
    environment_from_json,
    environment_to_json,
    generate_environment,
    grid_point,
    los_blocked,
)
from .errors import (
    ConfigurationError,
    EndpointInfeasibleError,
    PlanInfeasibleError,
    ProblemInfeasibleError,
)
from .feasibility import (
    BitGrid,
    FeasibleMap,
    QuantizedFeasibleMap,
    build_feasible_map,
    build_quantized_feasible_map,
    neighbor_set,
    quantized_grid_point,
)
from .planner import (
    Path,
    PlanGraph,
    build_graph_fine,
    build_graph_quantized,
    dijkstra,
    path_metrics,
    plan_optimal,
    plan_quantized,
    validate_path,
)
from .radiomap import (
    NEGLIGIBLE,
    LinkBudget,
    RadioMap,
    RadioMapSet,
    build_radio_map,
    build_radio_map_set,
    channel_gain,
    expected_sinr,
    superpose,
)

__version__ = "0.1.0"

__all__ = [
    "BitGrid",
    "ConfigurationError",
    "EndpointInfeasibleError",
    "EnvConfig",
    "Environment",
    "FeasibleMap",
    "Gbs",
    "LinkBudget",
    "NEGLIGIBLE",
    "Obstacle",
    "Path",
    "PlanGraph",
    "PlanInfeasibleError",
    "ProblemInfeasibleError",
    "QuantizedFeasibleMap",
    "RadioMap",
    "RadioMapSet",
    "Region",
    "build_feasible_map",
    "build_graph_fine",
    "build_graph_quantized",
    "build_quantized_feasible_map",
    "build_radio_map",
    "build_radio_map_set",
    "cell_of",
    "channel_gain",
    "dijkstra",
    "environment_from_json",
    "environment_to_json",
    "expected_sinr",
    "generate_environment",
    "grid_point",
    "los_blocked",
    "neighbor_set",
    "path_metrics",
    "plan_optimal",
    "plan_quantized",
    "quantized_grid_point",
    "superpose",
    "validate_path",
]
