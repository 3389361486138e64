"""Active preference learning for robot traffic-rule specifications.

Plan constraint-aware shortest paths on occupancy-grid multigraphs, learn
hidden rule weights from pairwise path choices by refining a feasible weight
polytope, and score specifications with entropy and time ratios.
"""

from .environment import (
    Environment,
    ParsedEnvironment,
    SchemaError,
    Zone,
    build_graph,
    compile_zones,
    load_facility_small,
    parse_environment,
    resolve_tasks,
    serialize_environment,
)
from .graph import (
    Constraint,
    Multigraph,
    Path,
    PlanningError,
    Router,
    Specification,
    SpecificationError,
    Task,
    combined_edge_cost,
    path_cost,
    path_features,
    shortest_path,
    validate_specification,
)
from .learning import (
    Session,
    SessionConfig,
    SessionStateError,
    StaleQueryError,
    initial_weights,
    min_vertex_search,
    vertex_search,
)
from .metrics import (
    MetricReport,
    acceptance_rates,
    entropy_ratio,
    graph_entropy,
    metric_report,
    time_ratio,
    vertex_entropy,
)
from .polytope import (
    FeasibleSpace,
    InfeasibleError,
    PolytopeVertex,
    add_preference,
    adjacent_vertices,
    init_feasible_space,
    max_sum_vertex,
    solve_lp,
    weights_equivalent,
)
from .users import SimulatedUser, random_user, simulate_choice

__version__ = "0.1.0"
