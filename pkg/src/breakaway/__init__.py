"""Breakaway strategy toolkit.

Dimensionless race model for road-cycling breakaways: drafting drag,
backward-propagating crash risk, closed-form flat-course optimization,
fatigue-limited attacks, terrain simulation and attack-onset diagnostics.
"""

from .crash import (
    CrashModel,
    PositionTrace,
    exposure,
    exposure_general,
    exposure_simple_attack,
    involvement_given_crash,
    monte_carlo_exposure,
    propagation_probability,
)
from .fatigue import (
    FatigueParams,
    FatigueResult,
    optimize_fatigue,
    p_max_from_budget,
    total_energy,
)
from .flat import (
    Branch,
    StrategyProblem,
    StrategyResult,
    attack_power,
    critical_risk,
    earliest_attack_position,
    interior_optimum,
    min_attack_position,
    min_energy_to_win,
    min_risk_to_win,
    objective,
    optimal_attack,
    time_gap_from_position,
    time_gap_from_power,
    win_frontier,
)
from .model import (
    DragParams,
    PelotonConfig,
    PhysicalParams,
    PowerProfile,
    ScaleSet,
    drafting_drag,
    drag_at_depth,
    peloton_average_drag,
    quasi_steady_speed,
    scale_factors,
)
from .terrain import (
    BreakawayRun,
    CourseProfile,
    Trajectory,
    demo_profile,
    load_course_table,
    lurking_power,
    simulate_breakaway,
    simulate_peloton,
    steepness,
)

__version__ = "0.1.0"
