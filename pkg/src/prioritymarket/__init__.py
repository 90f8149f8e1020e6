"""Market mechanism simulator for intersection discharge priority.

Connected vehicles inside an intersection's control zone trade discharge
priority: whenever a controller proposes a better discharge schedule, the
vehicles that gain time compensate the vehicles that lose time through a
two-group transferable-utility game.  The package bundles the game solver,
the grouping/settlement mechanism, three compatible controllers
(phase-switching, reservation-based, max-weight), a deterministic seeded
traffic simulator, and experiment drivers with a CLI.
"""

from prioritymarket.mechanism import (
    DischargeSchedule,
    GroupAssignment,
    ScheduleMismatchError,
    Settlement,
    Vehicle,
    build_payoff_matrices,
    group_gains,
    group_vehicles,
    second_price_auction,
    settle,
)
from prioritymarket.tugame import (
    SidePaymentMismatchError,
    ThreatPoint,
    TuSolution,
    best_joint_action,
    solve_minimax_2x2,
    solve_tu_game,
    threat_strategy,
)

__version__ = "0.1.0"

__all__ = [
    "DischargeSchedule",
    "GroupAssignment",
    "ScheduleMismatchError",
    "Settlement",
    "SidePaymentMismatchError",
    "ThreatPoint",
    "TuSolution",
    "Vehicle",
    "best_joint_action",
    "build_payoff_matrices",
    "group_gains",
    "group_vehicles",
    "second_price_auction",
    "settle",
    "solve_minimax_2x2",
    "solve_tu_game",
    "threat_strategy",
    "__version__",
]
