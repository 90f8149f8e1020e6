"""Deterministic seeded traffic simulation at the queue/discharge level.

Vehicles spawn at the control-zone boundary of an approach lane, enter the
zone if their lane has a free slot (otherwise they wait, invisible to the
controller, in an overflow queue), and are discharged across the stop line
by the active controller.  Motion below that granularity is not modeled:
every reported quantity depends only on arrival, zone entry, and discharge
times.

Runs are pure functions of (topology, vehicle list, run parameters); the
same inputs always produce bit-identical outputs.  Paired runs reuse one
vehicle list so per-vehicle time savings can be computed by id.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from prioritymarket.control import (
    CLEARANCE_S,
    SATURATION_HEADWAY_S,
    PhasePlan,
    SequenceContext,
    build_phase_plan,
    optimize_sequence,
    plan_windows,
    proportional_greens,
    sequence_times,
    signal_times,
)
from prioritymarket.mechanism import (
    DischargeSchedule,
    Settlement,
    Vehicle,
    group_gains,
    group_vehicles,
    second_price_auction,
    settle,
)
from prioritymarket.topology import Topology

__all__ = [
    "FREE_FLOW_SPEED_MS",
    "VotSampler",
    "sample_vot",
    "spawn_arrivals",
    "DemandStream",
    "generate_vehicles",
    "isolated_demand",
    "obstruction_demand",
    "inject_probes",
    "RunResult",
    "run_isolated",
    "run_paired",
    "ObstructionResult",
    "run_obstruction",
]

FREE_FLOW_SPEED_KMH = 60.0
FREE_FLOW_SPEED_MS = FREE_FLOW_SPEED_KMH / 3.6

CONTROLLERS = ("reservation", "min-delay", "fcfs")
MECHANISMS = ("direct", "second-price", "none")


# ---------------------------------------------------------------------------
# Demand generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VotSampler:
    """Log-normal VOT sampler in currency/h, parameterized by moments.

    The underlying normal parameters are matched to the requested mean ``m``
    and standard deviation ``d``: mu = ln(m^2 / sqrt(d^2 + m^2)) and
    s^2 = ln(1 + d^2 / m^2).
    """

    mean: float = 14.1
    sd: float = 9.0

    def lognormal_params(self) -> tuple[float, float]:
        if self.sd == 0.0:
            return math.log(self.mean), 0.0
        mu = math.log(self.mean**2 / math.sqrt(self.sd**2 + self.mean**2))
        s = math.sqrt(math.log(1.0 + self.sd**2 / self.mean**2))
        return mu, s

    def sample(self, rng: np.random.Generator, size=None):
        mu, s = self.lognormal_params()
        if s == 0.0:
            return np.full(size, self.mean) if size is not None else self.mean
        return rng.lognormal(mu, s, size)


def sample_vot(sampler: VotSampler, rng: np.random.Generator) -> float:
    """One VOT draw in currency/h (always strictly positive)."""
    return float(sampler.sample(rng))


def spawn_arrivals(rate_vph: float, horizon_s: float, rng: np.random.Generator) -> np.ndarray:
    """Poisson arrival instants over [0, horizon): exponential inter-arrivals."""
    if horizon_s <= 0:
        raise ValueError("horizon must be positive")
    if rate_vph <= 0:
        return np.array([])
    mean_gap = 3600.0 / rate_vph
    times = []
    t = rng.exponential(mean_gap)
    while t < horizon_s:
        times.append(t)
        t += rng.exponential(mean_gap)
    return np.array(times)


@dataclass(frozen=True)
class DemandStream:
    approach: str
    turn: str
    rate_vph: float


def isolated_demand(volume_vph: float, left_fraction: float = 0.25) -> list[DemandStream]:
    """Total intersection volume split evenly over the four approaches."""
    per_approach = volume_vph / 4.0
    streams = []
    for approach in ("NB", "SB", "EB", "WB"):
        streams.append(DemandStream(approach, "L", per_approach * left_fraction))
        streams.append(DemandStream(approach, "T", per_approach * (1 - left_fraction)))
    return streams


def obstruction_demand(rate_per_lane_vph: float) -> list[DemandStream]:
    """Two-movement layout with two lanes per movement."""
    return [
        DemandStream("EB", "T", 2 * rate_per_lane_vph),
        DemandStream("NB", "T", 2 * rate_per_lane_vph),
    ]


def generate_vehicles(
    topology: Topology,
    streams: list[DemandStream],
    seed: int,
    n_arrivals: int | None = None,
    horizon_s: float | None = None,
    penetration: float = 1.0,
    vot: VotSampler = VotSampler(),
    start_id: int = 0,
) -> list[Vehicle]:
    """Superposed Poisson traffic over the given demand streams.

    Stops after ``n_arrivals`` vehicles or at ``horizon_s`` seconds
    (exactly one must be given).  Identical seeds yield identical fleets.
    """
    if (n_arrivals is None) == (horizon_s is None):
        raise ValueError("give exactly one of n_arrivals / horizon_s")
    rates = np.array([s.rate_vph for s in streams], dtype=float)
    total = rates.sum()
    vehicles: list[Vehicle] = []
    if total <= 0:
        return vehicles
    probs = rates / total
    mean_gap = 3600.0 / total
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    movement_lanes = {
        m.index: topology.lanes_of(m.index) for m in topology.movements
    }
    t = 0.0
    vid = start_id
    while True:
        t += rng.exponential(mean_gap)
        if horizon_s is not None and t >= horizon_s:
            break
        stream = streams[int(rng.choice(len(streams), p=probs))]
        movement = topology.movement_index(stream.approach, stream.turn)
        lanes = movement_lanes[movement]
        lane = lanes[int(rng.integers(len(lanes)))] if len(lanes) > 1 else lanes[0]
        vot_true = sample_vot(vot, rng)
        connected = bool(rng.random() < penetration)
        vehicles.append(
            Vehicle(
                id=vid,
                approach=stream.approach,
                lane=lane,
                movement=movement,
                arrival_time=float(t),
                vot_true=vot_true,
                connected=connected,
            )
        )
        vid += 1
        if n_arrivals is not None and len(vehicles) >= n_arrivals:
            break
    return vehicles


def inject_probes(
    vehicles: list[Vehicle],
    topology: Topology,
    vot_true: float,
    vot_declared: float,
    interval_s: float,
    start_s: float,
    end_s: float,
    seed: int,
) -> tuple[list[Vehicle], list[int]]:
    """Insert probe vehicles every ``interval_s`` seconds.

    Probes rotate deterministically over approaches/lanes using their own
    RNG stream so the background traffic is untouched; only the declared
    VOT differs between a paired honest run and a misreporting run.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xB0BE)))
    next_id = max((v.id for v in vehicles), default=-1) + 1
    probes = []
    t = start_s
    through = [m for m in topology.movements if m.turn == "T"]
    while t < end_s:
        m = through[int(rng.integers(len(through)))]
        lanes = topology.lanes_of(m.index)
        lane = lanes[int(rng.integers(len(lanes)))]
        probes.append(
            Vehicle(
                id=next_id,
                approach=m.approach,
                lane=lane,
                movement=m.index,
                arrival_time=float(t),
                vot_true=vot_true,
                vot_declared=vot_declared,
                connected=True,
            )
        )
        next_id += 1
        t += interval_s
    merged = sorted(vehicles + probes, key=lambda v: (v.arrival_time, v.id))
    return merged, [p.id for p in probes]


# ---------------------------------------------------------------------------
# Isolated-intersection engine (reservation / min-delay / fcfs)
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    """Per-vehicle outcomes of one run plus the settlement ledger."""

    controller: str
    mechanism: str
    discharge: dict[int, float]
    zone_entry: dict[int, float]
    payments: dict[int, float]
    settlements: list[tuple[float, Settlement]]
    free_flow_s: float
    operator_revenue: float = 0.0

    def travel_time(self, v: Vehicle) -> float:
        return self.discharge[v.id] - v.arrival_time

    def delay(self, v: Vehicle) -> float:
        return self.travel_time(v) - self.free_flow_s


class _IsolatedEngine:
    def __init__(self, topology: Topology, vehicles: list[Vehicle],
                 controller: str, mechanism: str):
        if controller not in CONTROLLERS:
            raise ValueError(f"unknown controller {controller!r}")
        if mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {mechanism!r}")
        if controller in ("min-delay", "fcfs") and mechanism != "none":
            raise ValueError(f"{controller} runs do not use a mechanism")
        self.topology = topology
        self.vehicles = sorted(vehicles, key=lambda v: (v.arrival_time, v.id))
        self.by_id = {v.id: v for v in self.vehicles}
        self.controller = controller
        self.mechanism = mechanism
        self.traversal_s = topology.zone_radius_m / FREE_FLOW_SPEED_MS
        self.cap = topology.lane_capacity

        self.zone: list[list[int]] = [[] for _ in range(topology.n_lanes)]
        self.overflow: list[deque[int]] = [deque() for _ in range(topology.n_lanes)]
        self.order: list[int] = []
        self.times: dict[int, float] = {}
        self.earliest: dict[int, float] = {}
        self.lane_free = np.full(topology.n_lanes, -math.inf)
        self.movement_free = np.full(topology.n_movements, -math.inf)

        self.discharged: dict[int, float] = {}
        self.zone_entry: dict[int, float] = {}
        self.payments: dict[int, float] = {v.id: 0.0 for v in self.vehicles}
        self.settlements: list[tuple[float, Settlement]] = []

    def run(self) -> RunResult:
        pending = self.vehicles
        i = 0
        while True:
            t_arr = pending[i].arrival_time if i < len(pending) else math.inf
            vid_dis, t_dis = self._next_discharge()
            if math.isinf(t_dis) and math.isinf(t_arr):
                break
            if t_dis <= t_arr:
                self._discharge(vid_dis, t_dis)
            else:
                self._spawn(pending[i])
                i += 1
        return RunResult(
            controller=self.controller,
            mechanism=self.mechanism,
            discharge=self.discharged,
            zone_entry=self.zone_entry,
            payments=self.payments,
            settlements=self.settlements,
            free_flow_s=self.traversal_s,
            operator_revenue=sum(s.operator_revenue for _, s in self.settlements),
        )

    def _next_discharge(self) -> tuple[int, float]:
        if not self.times:
            return -1, math.inf
        vid = min(self.times, key=lambda k: (self.times[k], k))
        return vid, self.times[vid]

    def _spawn(self, v: Vehicle):
        if len(self.zone[v.lane]) < self.cap:
            self._enter_zone(v.id, v.arrival_time)
        else:
            self.overflow[v.lane].append(v.id)

    def _enter_zone(self, vid: int, t: float):
        v = self.by_id[vid]
        self.zone_entry[vid] = t
        self.earliest[vid] = t + self.traversal_s
        self.zone[v.lane].append(vid)
        self._control_update(t, vid)

    def _discharge(self, vid: int, tau: float):
        v = self.by_id[vid]
        assert self.zone[v.lane][0] == vid, "discharge must come from the lane head"
        self.zone[v.lane].pop(0)
        self.order.remove(vid)
        del self.times[vid]
        del self.earliest[vid]
        self.lane_free[v.lane] = max(self.lane_free[v.lane], tau + SATURATION_HEADWAY_S)
        self.movement_free[v.movement] = max(
            self.movement_free[v.movement], tau + CLEARANCE_S
        )
        self.discharged[vid] = tau
        if self.overflow[v.lane]:
            self._enter_zone(self.overflow[v.lane].popleft(), tau)

    def _context(self, order_ids: list[int], t: float) -> SequenceContext:
        n = len(order_ids)
        earliest = np.empty(n)
        lane = np.empty(n, dtype=np.int64)
        movement = np.empty(n, dtype=np.int64)
        weights = np.empty(n)
        unit = self.controller == "min-delay"
        for k, vid in enumerate(order_ids):
            v = self.by_id[vid]
            earliest[k] = self.earliest[vid]
            lane[k] = v.lane
            movement[k] = v.movement
            weights[k] = 1.0 if unit else v.weight
        return SequenceContext(
            earliest=earliest, lane=lane, movement=movement, weights=weights,
            conflict=self.topology.conflict, lane_free=self.lane_free,
            movement_free=self.movement_free, t_now=t,
        )

    def _control_update(self, t: float, new_vid: int):
        order_ids = self.order + [new_vid]
        ctx = self._context(order_ids, t)
        incumbent = np.arange(len(order_ids), dtype=np.int64)
        inc_times = sequence_times(ctx, incumbent)
        if self.controller == "fcfs":
            self._commit(order_ids, inc_times)
            return
        if self.mechanism == "second-price":
            self._auction_update(t, order_ids, ctx, inc_times)
            return
        best = optimize_sequence(ctx, incumbent)
        if np.array_equal(best, incumbent):
            self._commit(order_ids, inc_times)
            return
        new_times = sequence_times(ctx, best)
        old_sched = DischargeSchedule("incumbent", {order_ids[k]: float(inc_times[k]) for k in range(len(order_ids))})
        new_sched = DischargeSchedule("proposed", {order_ids[best[k]]: float(new_times[k]) for k in range(len(order_ids))})
        vehicles_in = [self.by_id[i] for i in order_ids]
        improvement = sum(
            ctx.weights[k] * (old_sched.times[order_ids[k]] - new_sched.times[order_ids[k]])
            for k in range(len(order_ids))
        )

        adopt = improvement > 0
        if adopt and self.mechanism == "direct":
            g = group_vehicles(old_sched, new_sched, vehicles_in)
            gain_a, gain_b = group_gains(g, vehicles_in)
            if g.payers and g.payees and gain_a + gain_b > 0:
                self._record(t, settle(g, vehicles_in))

        if adopt:
            self._commit([order_ids[k] for k in best], new_times)
        else:
            self._commit(order_ids, inc_times)

    def _auction_update(self, t: float, order_ids: list[int], ctx: SequenceContext,
                        inc_times: np.ndarray):
        """Request-based second-price auction coupling.

        The arriving vehicle requests the earliest admissible slot it can
        actually use (the insertion position minimizing its own discharge
        time, breaking ties toward least displacement); the group preferring
        the incumbent order may defend by outbidding.  Either way the winners
        pay the losing bid to the operator.
        """
        n = len(order_ids)
        new_vid = order_ids[-1]
        if self.by_id[new_vid].weight <= 0 or n == 1:
            self._commit(order_ids, inc_times)
            return
        lane_new = self.by_id[new_vid].lane
        lo = 0
        for k in range(n - 2, -1, -1):
            if self.by_id[order_ids[k]].lane == lane_new:
                lo = k + 1
                break
        best_k, best_tau, best_times = n - 1, inc_times[n - 1], inc_times
        for k in range(n - 2, lo - 1, -1):
            cand = np.concatenate(
                (np.arange(k), [n - 1], np.arange(k, n - 1))
            ).astype(np.int64)
            times = sequence_times(ctx, cand)
            if times[k] < best_tau:
                best_k, best_tau, best_times = k, times[k], times
        if best_k == n - 1:
            self._commit(order_ids, inc_times)
            return
        proposal = [order_ids[k] for k in range(best_k)] + [new_vid] + \
            [order_ids[k] for k in range(best_k, n - 1)]
        old_sched = DischargeSchedule("incumbent", {order_ids[k]: float(inc_times[k]) for k in range(n)})
        new_sched = DischargeSchedule("requested", {proposal[k]: float(best_times[k]) for k in range(n)})
        vehicles_in = [self.by_id[i] for i in order_ids]
        settlement = second_price_auction(old_sched, new_sched, vehicles_in)
        self._record(t, settlement)
        if settlement.adopted:
            self._commit(proposal, best_times)
        else:
            self._commit(order_ids, inc_times)

    def _record(self, t: float, settlement: Settlement):
        self.settlements.append((t, settlement))
        for vid, amount in settlement.payments.items():
            if amount:
                self.payments[vid] += amount

    def _commit(self, order_ids: list[int], times: np.ndarray):
        self.order = list(order_ids)
        self.times = {vid: float(tau) for vid, tau in zip(order_ids, times)}


def run_isolated(topology: Topology, vehicles: list[Vehicle], controller: str,
                 mechanism: str = "none") -> RunResult:
    """Simulate one run to completion (all vehicles discharged)."""
    return _IsolatedEngine(topology, vehicles, controller, mechanism).run()


def run_paired(topology: Topology, vehicles: list[Vehicle], controller: str,
               mechanism: str, baseline: str = "fcfs") -> tuple[RunResult, RunResult]:
    """Mechanism run and baseline run over the same fleet and seeds."""
    result = run_isolated(topology, vehicles, controller, mechanism)
    base = run_isolated(topology, vehicles, baseline, "none")
    return result, base


# ---------------------------------------------------------------------------
# Obstruction scenario (phase-switching control, lane blocking actor)
# ---------------------------------------------------------------------------

@dataclass
class ObstructionResult:
    actor_id: int
    actor_vot: float
    start_s: float
    end_s: float
    actor_payments: float  # signed, positive = actor paid in total
    settlements: list[tuple[float, Settlement]]
    discharge: dict[int, float]

    @property
    def minutes(self) -> float:
        return (self.end_s - self.start_s) / 60.0

    @property
    def income_cents(self) -> float:
        return -self.actor_payments

    @property
    def benefit_per_minute(self) -> float:
        """Valuated minute wasted plus income earned per obstructed minute."""
        vot_cents_per_minute = self.actor_vot * 100.0 / 60.0
        return -vot_cents_per_minute + self.income_cents / self.minutes


class _ObstructionEngine:
    """Two-movement phase-switching intersection with one lane-blocking actor.

    The controller re-plans once per cycle.  The status quo is the neutral
    pretimed pattern, which alternates the leading phase every cycle so
    neither approach owns priority; any reordering of the upcoming cycle is
    bought fresh through the direct-transaction game (priority is rented per
    cycle, never owned).  Greens are proportional to queue counts with a
    minimum green.  The actor is scheduled like any other vehicle but never
    physically discharges; its followers change to the adjacent lane when a
    gap opens (at twice the saturation headway).
    """

    MERGE_GAP_S = 2 * 1.8

    def __init__(self, topology: Topology, vehicles: list[Vehicle], actor: Vehicle,
                 horizon_s: float, cycle_s: float = 40.0, payments: bool = True):
        self.topology = topology
        self.all_vehicles = sorted(vehicles + [actor], key=lambda v: (v.arrival_time, v.id))
        self.by_id = {v.id: v for v in self.all_vehicles}
        self.actor = actor
        self.horizon_s = horizon_s
        self.cycle_s = cycle_s
        self.payments_on = payments
        self.traversal_s = topology.zone_radius_m / FREE_FLOW_SPEED_MS
        self.cap = topology.lane_capacity

        self.zone: list[list[int]] = [[] for _ in range(topology.n_lanes)]
        self.overflow: list[deque[int]] = [deque() for _ in range(topology.n_lanes)]
        self.earliest: dict[int, float] = {}
        self.lane_free: dict[int, float] = {}
        self.zone_entry: dict[int, float] = {}
        self.discharged: dict[int, float] = {}
        self.payments: dict[int, float] = {v.id: 0.0 for v in self.all_vehicles}
        self.settlements: list[tuple[float, Settlement]] = []

        self.times: dict[int, float] = {}
        self.cur_lane: dict[int, int] = {}  # merged followers change lanes
        self.cycle_index = 0
        self.committed: list[tuple[int, float, float]] = []  # this cycle's greens
        self.last_merge = -math.inf
        self.actor_blocking = False
        # Stalled-lane detection: a lane whose head sat through two full
        # cycles of green without moving stops registering demand for the
        # neutral default plan (its detector sees no flow).
        self.head_seen: dict[int, int | None] = {l: None for l in range(topology.n_lanes)}
        self.missed_greens: dict[int, int] = {l: 0 for l in range(topology.n_lanes)}

    # -- scheduling ---------------------------------------------------------

    def _adjacent_lane(self, lane: int) -> int:
        mov = self.topology.lane_movement[lane]
        lanes = self.topology.lanes_of(mov)
        return lanes[1] if lane == lanes[0] else lanes[0]

    def _queue_counts(self) -> np.ndarray:
        counts = np.zeros(len(self.topology.phases))
        for p, phase in enumerate(self.topology.phases):
            counts[p] = sum(
                len(self.zone[l]) for l in range(self.topology.n_lanes)
                if self.topology.lane_movement[l] in phase.movements
            )
        return counts

    def _update_stalls(self):
        for lane in range(self.topology.n_lanes):
            head = self.zone[lane][0] if self.zone[lane] else None
            if head is not None and head == self.head_seen[lane]:
                self.missed_greens[lane] += 1
            else:
                self.missed_greens[lane] = 0
            self.head_seen[lane] = head

    def _detected_counts(self) -> np.ndarray:
        """Per-phase demand as a flow detector sees it: stalled lanes
        (head unmoved through two green cycles) register nothing."""
        counts = np.zeros(len(self.topology.phases))
        for p, phase in enumerate(self.topology.phases):
            for lane in range(self.topology.n_lanes):
                if self.topology.lane_movement[lane] not in phase.movements:
                    continue
                if self.missed_greens[lane] >= 2:
                    continue
                counts[p] += len(self.zone[lane])
        return counts

    def _default_order(self, cycle_index: int) -> list[int]:
        """Neutral default: the heavier detected demand leads, as a
        traditional actuated signal would order phases; VOT and stalled
        lanes never enter the default."""
        counts = self._detected_counts()
        return sorted(range(len(self.topology.phases)), key=lambda p: (-counts[p], p))

    def _tiled_plan(self, first_order: list[int], start: float) -> PhasePlan:
        """One cycle in ``first_order``, then the neutral pattern, long
        enough for every queued vehicle; greens are projected from the
        current queue counts."""
        n_zone = sum(len(q) for q in self.zone)
        n_cycles = max(2, n_zone // 2 + 4)
        counts = self._queue_counts()
        intervals = []
        t = start
        for k in range(n_cycles):
            order = first_order if k == 0 else self._default_order(self.cycle_index + k)
            greens = proportional_greens(np.array([counts[p] for p in order]),
                                         self.cycle_s, len(order))
            seg = build_phase_plan(order, greens, t)
            intervals.extend(seg.intervals)
            t = seg.intervals[-1][2] + CLEARANCE_S
        return PhasePlan(intervals)

    def _predict(self, plan: PhasePlan, t: float) -> dict[int, float]:
        windows = plan_windows(plan, self.topology)
        queues = {l: list(self.zone[l]) for l in range(self.topology.n_lanes) if self.zone[l]}
        return signal_times(queues, self.earliest, self.topology.lane_movement,
                            windows, dict(self.lane_free), t)

    def _decide(self, t: float):
        phases = list(range(len(self.topology.phases)))
        self._update_stalls()
        default = self._default_order(self.cycle_index)
        incumbent_plan = self._tiled_plan(default, t + CLEARANCE_S)
        incumbent_times = self._predict(incumbent_plan, t)
        zone_ids = sorted(incumbent_times)

        best_plan, best_times, best_gain = incumbent_plan, incumbent_times, 0.0
        if zone_ids:
            for order in itertools.permutations(phases):
                order = list(order)
                if order == default:
                    continue
                plan = self._tiled_plan(order, t + CLEARANCE_S)
                times = self._predict(plan, t)
                gain = sum(
                    self.by_id[i].weight * (incumbent_times[i] - times[i]) for i in zone_ids
                )
                if gain > best_gain:
                    best_plan, best_times, best_gain = plan, times, gain

        if best_gain > 0 and zone_ids:
            old = DischargeSchedule("incumbent", incumbent_times)
            new = DischargeSchedule("proposed", best_times)
            vehicles_in = [self.by_id[i] for i in zone_ids]
            g = group_vehicles(old, new, vehicles_in)
            gain_a, gain_b = group_gains(g, vehicles_in)
            if self.payments_on and g.payers and g.payees and gain_a + gain_b > 0:
                settlement = settle(g, vehicles_in)
                self.settlements.append((t, settlement))
                for vid, amount in settlement.payments.items():
                    if amount:
                        self.payments[vid] += amount
        self.times = best_times
        n_phases = len(phases)
        self.committed = list(best_plan.intervals[:n_phases])
        self.cycle_index += 1

    def _reschedule(self, t: float):
        if not self.committed:
            return
        remaining = [iv for iv in self.committed if iv[2] > t]
        tail_start = self.committed[-1][2] + CLEARANCE_S
        tail = self._tiled_plan(self._default_order(self.cycle_index), tail_start)
        plan = PhasePlan(remaining + tail.intervals)
        self.times = self._predict(plan, t)

    # -- physics ------------------------------------------------------------

    def _spawn(self, v: Vehicle, t: float):
        if v.id == self.actor.id:
            # The actor pulls up to the stop line and stops there.
            self.zone_entry[v.id] = t
            self.earliest[v.id] = t
            self.zone[v.lane].insert(0, v.id)
            self.cur_lane[v.id] = v.lane
            self.actor_blocking = True
            self.last_merge = t
            self._reschedule(t)
            return
        if len(self.zone[v.lane]) < self.cap:
            self._enter_zone(v.id, t)
        else:
            self.overflow[v.lane].append(v.id)

    def _enter_zone(self, vid: int, t: float):
        v = self.by_id[vid]
        self.zone_entry[vid] = t
        self.earliest[vid] = t + self.traversal_s
        self.zone[v.lane].append(vid)
        self.cur_lane[vid] = v.lane
        self._reschedule(t)

    def _merge_due(self) -> float:
        if not self.actor_blocking:
            return math.inf
        lane = self.actor.lane
        if len(self.zone[lane]) <= 1 or self.zone[lane][0] != self.actor.id:
            return math.inf
        # A follower needs a two-headway gap in the adjacent lane; once that
        # lane's queue packs more than half the zone, no such gap exists.
        if len(self.zone[self._adjacent_lane(lane)]) > self.cap // 3:
            return math.inf
        return self.last_merge + self.MERGE_GAP_S

    def _merge(self, t: float):
        lane = self.actor.lane
        vid = self.zone[lane].pop(1)
        adjacent = self._adjacent_lane(lane)
        self.zone[adjacent].append(vid)
        self.cur_lane[vid] = adjacent
        self.last_merge = t
        self._refill(lane, t)
        self._reschedule(t)

    def _refill(self, lane: int, t: float):
        while self.overflow[lane] and len(self.zone[lane]) < self.cap:
            self._enter_zone(self.overflow[lane].popleft(), t)

    def _next_discharge(self) -> tuple[int, float]:
        best_vid, best_t = -1, math.inf
        for lane in range(self.topology.n_lanes):
            if not self.zone[lane]:
                continue
            head = self.zone[lane][0]
            if head == self.actor.id:
                continue
            tau = self.times.get(head, math.inf)
            if tau < best_t or (tau == best_t and head < best_vid):
                best_vid, best_t = head, tau
        return best_vid, best_t

    def _discharge(self, vid: int, tau: float):
        lane = self.cur_lane.pop(vid)
        assert self.zone[lane][0] == vid
        self.zone[lane].pop(0)
        self.lane_free[lane] = tau + SATURATION_HEADWAY_S
        self.discharged[vid] = tau
        del self.earliest[vid]
        self.times.pop(vid, None)
        self._refill(lane, tau)
        self._reschedule(tau)

    # -- main loop ----------------------------------------------------------

    def run(self) -> ObstructionResult:
        self._decide(0.0)
        pending = [v for v in self.all_vehicles]
        i = 0
        t = 0.0
        while t < self.horizon_s:
            t_arr = pending[i].arrival_time if i < len(pending) else math.inf
            vid_dis, t_dis = self._next_discharge()
            t_merge = self._merge_due()
            t_decision = self.committed[-1][2] if self.committed else math.inf
            t_next = min(t_arr, t_dis, t_merge, t_decision, self.horizon_s)
            if t_next >= self.horizon_s:
                break
            if t_dis == t_next:
                self._discharge(vid_dis, t_dis)
            elif t_arr == t_next:
                self._spawn(pending[i], t_arr)
                i += 1
            elif t_merge == t_next:
                self._merge(t_merge)
            else:
                self._decide(t_decision)
            t = t_next
        return ObstructionResult(
            actor_id=self.actor.id,
            actor_vot=self.actor.vot_true,
            start_s=self.actor.arrival_time,
            end_s=self.horizon_s,
            actor_payments=self.payments[self.actor.id],
            settlements=self.settlements,
            discharge=self.discharged,
        )


def run_obstruction(topology: Topology, vehicles: list[Vehicle], actor: Vehicle,
                    horizon_s: float, cycle_s: float = 40.0,
                    payments: bool = True) -> ObstructionResult:
    """Simulate the lane-blocking actor scenario under phase switching."""
    return _ObstructionEngine(topology, vehicles, actor, horizon_s, cycle_s, payments).run()
