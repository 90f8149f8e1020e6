"""Grouping, payoff construction, and settlement for schedule switches.

When a controller proposes replacing the status-quo discharge schedule with
a new one, every scheduled vehicle gains or loses time.  Vehicles whose
valuated time change is positive form the payer group, negative the payee
group, zero the indifferent group.  The two groups play a 2x2 TU game whose
side payment is split pro rata to individual valuated gains; the result is a
budget-balanced settlement.  A second-price auction is provided as a
baseline mechanism in which the winning group pays the losing group's bid
to the operator instead.

Currency is cents throughout; VOT enters in currency units per hour and is
converted to cents per second at ingestion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from prioritymarket.tugame import TuSolution, solve_tu_game

__all__ = [
    "CENTS_PER_CURRENCY",
    "ScheduleMismatchError",
    "Vehicle",
    "DischargeSchedule",
    "GroupAssignment",
    "Settlement",
    "vot_cents_per_second",
    "group_vehicles",
    "group_gains",
    "build_payoff_matrices",
    "settle",
    "second_price_auction",
]

CENTS_PER_CURRENCY = 100.0
_SECONDS_PER_HOUR = 3600.0


class ScheduleMismatchError(ValueError):
    """Old and new schedules do not cover the same vehicle ids."""


def vot_cents_per_second(vot_per_hour: float) -> float:
    """Convert a VOT in currency/h to cents/s."""
    return vot_per_hour * CENTS_PER_CURRENCY / _SECONDS_PER_HOUR


@dataclass
class Vehicle:
    """A vehicle known to the simulation.

    ``vot_true`` and ``vot_declared`` are in currency per hour; the declared
    value drives grouping and payments, the true value enters only the
    benefit/loss metrics.  Non-connected vehicles participate with an
    effective declared VOT of zero and always land in the indifferent group.
    """

    id: int
    approach: str
    lane: int
    movement: int
    arrival_time: float
    vot_true: float
    vot_declared: float = -1.0
    connected: bool = True

    def __post_init__(self):
        if self.vot_true < 0:
            raise ValueError(f"vehicle {self.id}: vot_true must be >= 0")
        if self.vot_declared < 0:
            self.vot_declared = self.vot_true

    @property
    def weight(self) -> float:
        """Declared VOT in cents/s; zero for non-connected vehicles."""
        if not self.connected:
            return 0.0
        return vot_cents_per_second(self.vot_declared)

    @property
    def weight_true(self) -> float:
        """True VOT in cents/s (metric computation only)."""
        return vot_cents_per_second(self.vot_true)


@dataclass
class DischargeSchedule:
    """Per-vehicle stop-line crossing times under a named strategy."""

    strategy_id: str
    times: dict[int, float]


@dataclass
class GroupAssignment:
    """Partition of scheduled vehicles into payers/payees/indifferent.

    ``delta_tau[v]`` is the time gain of vehicle ``v``: old discharge time
    minus new discharge time, in seconds.
    """

    payers: set[int]
    payees: set[int]
    indifferent: set[int]
    delta_tau: dict[int, float]


@dataclass
class Settlement:
    """Outcome of one mechanism invocation.

    ``payments[v]`` is signed: positive means vehicle ``v`` pays.  Direct
    transactions are budget balanced (payments sum to zero); the auction
    baseline instead collects ``operator_revenue`` out of the system.
    """

    gain_a: float
    gain_b: float
    sigma: float
    payments: dict[int, float]
    adopted: bool
    operator_revenue: float = 0.0
    tu_solution: TuSolution | None = field(default=None, repr=False)

    @property
    def total_transfer(self) -> float:
        """Sum of positive payments (money that changed hands)."""
        return sum(p for p in self.payments.values() if p > 0)


def group_vehicles(
    old: DischargeSchedule, new: DischargeSchedule, vehicles: list[Vehicle]
) -> GroupAssignment:
    """Partition vehicles by the sign of their valuated time gain.

    Uses declared VOT (zero for non-connected vehicles), so a vehicle with
    zero weight is indifferent regardless of its time change.
    """
    if set(old.times) != set(new.times):
        raise ScheduleMismatchError(
            "old and new schedules must cover the same vehicle ids"
        )
    payers: set[int] = set()
    payees: set[int] = set()
    indifferent: set[int] = set()
    delta_tau: dict[int, float] = {}
    for v in vehicles:
        if v.id not in old.times:
            continue
        d = old.times[v.id] - new.times[v.id]
        delta_tau[v.id] = d
        valuated = v.weight * d
        if valuated > 0:
            payers.add(v.id)
        elif valuated < 0:
            payees.add(v.id)
        else:
            indifferent.add(v.id)
    missing = set(old.times) - set(delta_tau)
    if missing:
        raise ScheduleMismatchError(f"schedules cover unknown vehicle ids {sorted(missing)}")
    return GroupAssignment(payers=payers, payees=payees, indifferent=indifferent, delta_tau=delta_tau)


def group_gains(g: GroupAssignment, vehicles: list[Vehicle]) -> tuple[float, float]:
    """Aggregate valuated gains (G_A > 0) and losses (G_B < 0), in cents."""
    by_id = {v.id: v for v in vehicles}
    gain_a = sum(by_id[i].weight * g.delta_tau[i] for i in sorted(g.payers))
    gain_b = sum(by_id[i].weight * g.delta_tau[i] for i in sorted(g.payees))
    return gain_a, gain_b


def build_payoff_matrices(gain_a: float, gain_b: float) -> tuple[np.ndarray, np.ndarray]:
    """Payoff matrices of the two-group game.

    Off-diagonal entries are the groups' half-gains; the diagonal entries
    are zero because a conflict is resolved by a fair coin between the two
    strategies, making the expected payoff of either conflict action zero.
    """
    if not gain_a > 0:
        raise ValueError(f"gain_a must be > 0, got {gain_a!r}")
    if not gain_b < 0:
        raise ValueError(f"gain_b must be < 0, got {gain_b!r}")
    a = np.array([[0.0, gain_a / 2.0], [-gain_a / 2.0, 0.0]])
    b = np.array([[0.0, gain_b / 2.0], [-gain_b / 2.0, 0.0]])
    return a, b


def _pro_rata(
    g: GroupAssignment, vehicles: list[Vehicle], members: set[int], group_gain: float, total: float
) -> dict[int, float]:
    """Split ``total`` across ``members`` in proportion to valuated gains."""
    by_id = {v.id: v for v in vehicles}
    return {
        i: (by_id[i].weight * g.delta_tau[i] / group_gain) * total
        for i in sorted(members)
    }


def settle(g: GroupAssignment, vehicles: list[Vehicle]) -> Settlement:
    """Direct-transaction settlement: solve the TU game, split pro rata.

    With an empty payer or payee side there is no game; the settlement is
    all zeros and the caller's adoption decision stands.  Otherwise requires
    a strictly beneficial switch (G_A + G_B > 0).
    """
    gain_a, gain_b = group_gains(g, vehicles)
    zero = {i: 0.0 for i in g.delta_tau}
    if not g.payers or not g.payees:
        return Settlement(gain_a=gain_a, gain_b=gain_b, sigma=0.0, payments=zero, adopted=True)
    if not gain_a + gain_b > 0:
        raise ValueError(
            f"settle requires a strictly beneficial switch, got G_A={gain_a!r}, G_B={gain_b!r}"
        )
    a, b = build_payoff_matrices(gain_a, gain_b)
    solution = solve_tu_game(a, b)
    sigma = solution.sigma
    payments = zero
    payments.update(_pro_rata(g, vehicles, g.payers, gain_a, sigma))
    # Payees: sigma_v = (-1/G_B) * weight * delta_tau * sigma, which is
    # negative (they receive money).
    payments.update(_pro_rata(g, vehicles, g.payees, -gain_b, sigma))
    return Settlement(
        gain_a=gain_a,
        gain_b=gain_b,
        sigma=sigma,
        payments=payments,
        adopted=True,
        tu_solution=solution,
    )


def second_price_auction(
    old: DischargeSchedule, new: DischargeSchedule, vehicles: list[Vehicle]
) -> Settlement:
    """Second-price auction baseline between the two groups.

    Each group bids its aggregate valuated gain from its preferred strategy;
    the higher bidder wins and its members pay the losing bid to the
    operator, pro rata to their individual gains.  Losers receive nothing.
    Tie bids retain the status quo with zero payments.
    """
    g = group_vehicles(old, new, vehicles)
    gain_a, gain_b = group_gains(g, vehicles)
    bid_a = gain_a
    bid_b = -gain_b
    zero = {i: 0.0 for i in g.delta_tau}
    if bid_a == bid_b:
        return Settlement(gain_a=gain_a, gain_b=gain_b, sigma=0.0, payments=zero, adopted=False)
    if bid_a > bid_b:
        winners, winner_gain, price, adopted = g.payers, gain_a, bid_b, True
    else:
        winners, winner_gain, price, adopted = g.payees, gain_b, bid_a, False
    payments = zero
    if winners and price > 0:
        # Winner gains are positive for payers and negative for payees; the
        # shares weight * delta_tau / winner_gain are positive either way.
        payments.update(_pro_rata(g, vehicles, winners, winner_gain, price))
    return Settlement(
        gain_a=gain_a,
        gain_b=gain_b,
        sigma=price if winners else 0.0,
        payments=payments,
        adopted=adopted,
        operator_revenue=sum(payments.values()),
    )
