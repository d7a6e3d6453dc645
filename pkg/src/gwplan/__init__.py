"""Joint gateway placement, routing, and flow planning for LEO constellations.

The pipeline: a Scenario describes the constellation, candidate gateway
sites, traffic demands, capacities, and cost weights.  The constellation is
propagated over the time grid, a typed link graph is built per step, the
planning problem is assembled as a mixed-integer linear program, and the
built-in branch-and-bound solver (or an external one, via MPS export)
produces gateway selections, routes, and latency/flow metrics.
"""

from gwplan.scenario import (
    Scenario,
    ScenarioError,
    default_scenario,
    load_scenario,
    reduce_scenario,
    save_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "Scenario",
    "ScenarioError",
    "default_scenario",
    "load_scenario",
    "reduce_scenario",
    "save_scenario",
    "__version__",
]
