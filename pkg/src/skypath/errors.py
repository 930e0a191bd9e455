"""Exception types shared across the toolkit.

The CLI maps these onto its exit-code contract: configuration problems
exit 2, problem-level infeasibility exits 3, infeasible endpoints exit 4.
"""


class ConfigurationError(ValueError):
    """Invalid scenario, grid, or quantization configuration."""


class PlanInfeasibleError(RuntimeError):
    """Base class for planning failures (no valid path exists)."""


class ProblemInfeasibleError(PlanInfeasibleError):
    """No feasible route connects the endpoints (or nothing is feasible at all)."""


class EndpointInfeasibleError(PlanInfeasibleError):
    """A start or end cell fails the gain constraint while other cells pass."""
