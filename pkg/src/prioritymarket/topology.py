"""Intersection topology: movements, lanes, conflicts, and signal phases.

Movements are (approach, turn) pairs indexed densely for fast array access
in the schedulers.  Two movements are compatible when they come from the
same approach (a through and its adjacent left) or from opposing approaches
with the same turn; every other pair conflicts.  Each signal phase serves
one maximal compatible set, giving the classic eight two-movement phases on
a four-leg layout, split into two signal groups that each cover every
movement once per cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Movement",
    "Phase",
    "Topology",
    "make_isolated",
    "make_obstruction",
    "make_arterial_junction",
]

APPROACHES = ("NB", "SB", "EB", "WB")
_OPPOSING = {"NB": "SB", "SB": "NB", "EB": "WB", "WB": "EB"}
_AXIS = {"NB": "NS", "SB": "NS", "EB": "EW", "WB": "EW"}

# One queued vehicle occupies 7.5 m of lane, so a control zone of radius r
# holds r / 7.5 vehicles per lane (75 m -> 10, 150 m -> 20).
VEHICLE_SPACING_M = 7.5


@dataclass(frozen=True)
class Movement:
    """A served traffic stream: vehicles from ``approach`` doing ``turn``."""

    index: int
    approach: str
    turn: str  # "T" (through) or "L" (left)

    @property
    def label(self) -> str:
        return f"{self.approach}-{self.turn}"


@dataclass(frozen=True)
class Phase:
    """A set of mutually non-conflicting movements served together."""

    id: str
    movements: frozenset[int]


@dataclass
class Topology:
    """A single junction's movements, lanes, conflicts, and phases."""

    movements: list[Movement]
    lane_movement: list[int]  # lane index -> movement index
    conflict: np.ndarray  # bool, NxN, symmetric, False on the diagonal
    phases: list[Phase]
    signal_groups: list[list[int]] = field(default_factory=list)  # phase indices
    zone_radius_m: float = 150.0

    @property
    def n_lanes(self) -> int:
        return len(self.lane_movement)

    @property
    def n_movements(self) -> int:
        return len(self.movements)

    @property
    def lane_capacity(self) -> int:
        return int(round(self.zone_radius_m / VEHICLE_SPACING_M))

    def lanes_of(self, movement: int) -> list[int]:
        return [l for l, m in enumerate(self.lane_movement) if m == movement]

    def movement_index(self, approach: str, turn: str) -> int:
        for m in self.movements:
            if m.approach == approach and m.turn == turn:
                return m.index
        raise KeyError(f"no movement {approach}-{turn}")


def _compatible(m1: Movement, m2: Movement) -> bool:
    if m1.index == m2.index:
        return True
    if m1.approach == m2.approach:
        return True
    if _OPPOSING[m1.approach] == m2.approach and m1.turn == m2.turn:
        return True
    return False


def _conflict_matrix(movements: list[Movement]) -> np.ndarray:
    n = len(movements)
    conflict = np.zeros((n, n), dtype=bool)
    for m1 in movements:
        for m2 in movements:
            if m1.index != m2.index and not _compatible(m1, m2):
                conflict[m1.index, m2.index] = True
    return conflict


def _eight_movements() -> list[Movement]:
    movements = []
    for approach in APPROACHES:
        for turn in ("T", "L"):
            movements.append(Movement(index=len(movements), approach=approach, turn=turn))
    return movements


def _eight_phases(movements: list[Movement]) -> tuple[list[Phase], list[list[int]]]:
    by_label = {m.label: m.index for m in movements}
    pairs = [
        ("I", ("NB-T", "SB-T")),
        ("II", ("NB-L", "SB-L")),
        ("III", ("EB-T", "WB-T")),
        ("IV", ("EB-L", "WB-L")),
        ("V", ("NB-T", "NB-L")),
        ("VI", ("SB-T", "SB-L")),
        ("VII", ("EB-T", "EB-L")),
        ("VIII", ("WB-T", "WB-L")),
    ]
    phases = [Phase(pid, frozenset(by_label[l] for l in labels)) for pid, labels in pairs]
    return phases, [[0, 1, 2, 3], [4, 5, 6, 7]]


def make_isolated(zone_radius_m: float = 150.0) -> Topology:
    """Three-lane four-leg intersection: per approach one left lane and two
    through lanes, eight movements, eight two-movement phases."""
    movements = _eight_movements()
    lane_movement: list[int] = []
    for approach in APPROACHES:
        left = next(m.index for m in movements if m.approach == approach and m.turn == "L")
        through = next(m.index for m in movements if m.approach == approach and m.turn == "T")
        lane_movement.extend([left, through, through])
    phases, groups = _eight_phases(movements)
    return Topology(
        movements=movements,
        lane_movement=lane_movement,
        conflict=_conflict_matrix(movements),
        phases=phases,
        signal_groups=groups,
        zone_radius_m=zone_radius_m,
    )


def make_obstruction(zone_radius_m: float = 150.0) -> Topology:
    """Two conflicting through movements with two lanes each (the lane-
    blocking scenario layout); one single-movement phase per movement."""
    movements = [
        Movement(index=0, approach="EB", turn="T"),
        Movement(index=1, approach="NB", turn="T"),
    ]
    lane_movement = [0, 0, 1, 1]
    phases = [Phase("EB", frozenset({0})), Phase("NB", frozenset({1}))]
    return Topology(
        movements=movements,
        lane_movement=lane_movement,
        conflict=_conflict_matrix(movements),
        phases=phases,
        signal_groups=[[0, 1]],
        zone_radius_m=zone_radius_m,
    )


def make_arterial_junction(zone_radius_m: float = 150.0) -> Topology:
    """Arterial junction: eight movements with one lane per movement."""
    movements = _eight_movements()
    lane_movement = list(range(8))
    phases, groups = _eight_phases(movements)
    return Topology(
        movements=movements,
        lane_movement=lane_movement,
        conflict=_conflict_matrix(movements),
        phases=phases,
        signal_groups=groups,
        zone_radius_m=zone_radius_m,
    )
