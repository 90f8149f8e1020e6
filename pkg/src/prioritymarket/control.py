"""Discharge-time prediction and the candidate-schedule controllers.

Two service models share the same physical constants (1.8 s saturation
headway within a lane, 1.8 s clearance between conflicting movements, 2.0 s
startup after a green onset):

* sequence mode (reservation-style): a total discharge order over the
  vehicles in the zone; each vehicle crosses as soon as its own earliest
  stop-line arrival, its lane predecessor's headway, and the clearance
  behind every conflicting movement allow.
* signal mode (phase-switching / max-weight): movements discharge only
  inside their green windows; conflict separation is built into the plan
  through yellow gaps.

The reservation optimizer minimizes the weighted sum of discharge times over
admissible (lane-FIFO) orders.  Small instances are enumerated exhaustively
with pruning; larger ones use best-insertion of the newest arrival followed
by adjacent-swap improvement.  The hot paths are numba-compiled.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from prioritymarket.topology import Topology

__all__ = [
    "SATURATION_HEADWAY_S",
    "CLEARANCE_S",
    "STARTUP_LOSS_S",
    "ENUMERATION_LIMIT",
    "UnschedulableError",
    "ServiceModel",
    "SequenceContext",
    "FluxParams",
    "PhasePlan",
    "sequence_times",
    "optimize_sequence",
    "fcfs_order",
    "reservation_control",
    "fcfs_schedule",
    "min_delay_schedule",
    "phase_switching",
    "build_phase_plan",
    "proportional_greens",
    "plan_windows",
    "signal_times",
    "predict_discharge",
    "newell_flux",
    "movement_weight",
    "max_weight_scores",
    "max_weight_select",
    "lyapunov",
]

SATURATION_HEADWAY_S = 1.8
CLEARANCE_S = 1.8
STARTUP_LOSS_S = 2.0

# Exhaustive search is used when the number of admissible lane interleavings
# is at most this; the bound keeps the worst-case cost of one controller
# update small while still enumerating every two-movement game exactly.
ENUMERATION_LIMIT = 2000

_MAX_SWAP_PASSES = 200


class UnschedulableError(RuntimeError):
    """A vehicle's movement is never served by the given signal plan."""


@dataclass(frozen=True)
class ServiceModel:
    headway: float = SATURATION_HEADWAY_S
    clearance: float = CLEARANCE_S
    startup: float = STARTUP_LOSS_S


@dataclass
class SequenceContext:
    """Array view of the schedulable vehicles for the sequence kernels.

    ``lane_free[l]`` / ``movement_free[m]`` are the earliest instants lane
    ``l`` / movement ``m`` may discharge again, carrying the headway and
    clearance owed to already-discharged vehicles.
    """

    earliest: np.ndarray  # float64[n], earliest stop-line arrival
    lane: np.ndarray  # int64[n]
    movement: np.ndarray  # int64[n]
    weights: np.ndarray  # float64[n], objective weights in cents/s
    conflict: np.ndarray  # bool[M, M]
    lane_free: np.ndarray  # float64[L]
    movement_free: np.ndarray  # float64[M]
    t_now: float
    model: ServiceModel = field(default_factory=ServiceModel)


@numba.njit(cache=True)
def _times_kernel(order, earliest, lane, movement, conflict, lane_free, movement_free,
                  t_now, headway, clearance, out):
    lf = lane_free.copy()
    mf = movement_free.copy()
    n_mov = mf.shape[0]
    for k in range(order.shape[0]):
        v = order[k]
        t = earliest[v]
        if t < t_now:
            t = t_now
        if lf[lane[v]] > t:
            t = lf[lane[v]]
        mv = movement[v]
        for m in range(n_mov):
            if conflict[mv, m] and mf[m] > t:
                t = mf[m]
        out[k] = t
        if t + headway > lf[lane[v]]:
            lf[lane[v]] = t + headway
        # Anchors must stay monotone: a same-movement vehicle in another
        # lane may discharge earlier than one already placed.
        if t + clearance > mf[mv]:
            mf[mv] = t + clearance
    return out


@numba.njit(cache=True)
def _objective(order, times, weights):
    total = 0.0
    for k in range(order.shape[0]):
        total += weights[order[k]] * times[k]
    return total


@numba.njit(cache=True)
def _interleaving_count(lane_counts, limit):
    total = 1.0
    placed = 0
    for l in range(lane_counts.shape[0]):
        for i in range(1, lane_counts[l] + 1):
            placed += 1
            total = total * placed / i
            if total > limit:
                return total
    return total


@numba.njit(cache=True)
def _enumerate_kernel(order0, earliest, lane, movement, weights, conflict,
                      lane_free, movement_free, t_now, headway, clearance,
                      best_obj0, best_order):
    n = order0.shape[0]
    n_lane = lane_free.shape[0]
    n_mov = movement_free.shape[0]

    # Per-lane FIFO vehicle lists in incumbent order.
    lane_counts = np.zeros(n_lane, dtype=np.int64)
    for k in range(n):
        lane_counts[lane[order0[k]]] += 1
    lane_seq = np.full((n_lane, n), -1, dtype=np.int64)
    fill = np.zeros(n_lane, dtype=np.int64)
    for k in range(n):
        v = order0[k]
        lane_seq[lane[v], fill[lane[v]]] = v
        fill[lane[v]] += 1

    base = np.empty(n, dtype=np.float64)
    total_base = 0.0
    for v in range(n):
        e = earliest[v]
        if e < t_now:
            e = t_now
        base[v] = weights[v] * e
        total_base += base[v]

    lf_stack = np.empty((n + 1, n_lane), dtype=np.float64)
    mf_stack = np.empty((n + 1, n_mov), dtype=np.float64)
    partial = np.zeros(n + 1, dtype=np.float64)
    rem = np.zeros(n + 1, dtype=np.float64)
    cand = np.zeros(n + 1, dtype=np.int64)
    chosen = np.empty(n, dtype=np.int64)
    ptr = np.zeros(n_lane, dtype=np.int64)

    lf_stack[0] = lane_free
    mf_stack[0] = movement_free
    rem[0] = total_base
    best_obj = best_obj0
    found = False

    d = 0
    while d >= 0:
        if d == n:
            if partial[d] < best_obj:
                best_obj = partial[d]
                for k in range(n):
                    best_order[k] = chosen[k]
                found = True
            d -= 1
            if d >= 0:
                ptr[cand[d]] -= 1
                cand[d] += 1
            continue
        advanced = False
        l = cand[d]
        while l < n_lane:
            if ptr[l] < lane_counts[l]:
                v = lane_seq[l, ptr[l]]
                t = earliest[v]
                if t < t_now:
                    t = t_now
                if lf_stack[d, l] > t:
                    t = lf_stack[d, l]
                mv = movement[v]
                for m in range(n_mov):
                    if conflict[mv, m] and mf_stack[d, m] > t:
                        t = mf_stack[d, m]
                new_partial = partial[d] + weights[v] * t
                new_rem = rem[d] - base[v]
                if new_partial + new_rem < best_obj:
                    cand[d] = l
                    chosen[d] = v
                    ptr[l] += 1
                    lf_stack[d + 1] = lf_stack[d]
                    mf_stack[d + 1] = mf_stack[d]
                    if t + headway > lf_stack[d + 1, l]:
                        lf_stack[d + 1, l] = t + headway
                    if t + clearance > mf_stack[d + 1, mv]:
                        mf_stack[d + 1, mv] = t + clearance
                    partial[d + 1] = new_partial
                    rem[d + 1] = new_rem
                    cand[d + 1] = 0
                    d += 1
                    advanced = True
                    break
            l += 1
        if not advanced:
            d -= 1
            if d >= 0:
                ptr[cand[d]] -= 1
                cand[d] += 1
    return found


@numba.njit(cache=True)
def _local_search_kernel(order0, earliest, lane, movement, weights, conflict,
                         lane_free, movement_free, t_now, headway, clearance,
                         max_passes, work, scratch):
    n = order0.shape[0]
    for k in range(n):
        work[k] = order0[k]
    times = np.empty(n, dtype=np.float64)
    obj = _objective(work, _times_kernel(work, earliest, lane, movement, conflict,
                                         lane_free, movement_free, t_now, headway,
                                         clearance, times), weights)

    # Best admissible insertion position for the newest arrival (last in the
    # incumbent): anywhere after its own lane predecessor.
    v = work[n - 1]
    lo = 0
    for k in range(n - 2, -1, -1):
        if lane[work[k]] == lane[v]:
            lo = k + 1
            break
    best_k = n - 1
    best_obj = obj
    for k in range(n - 2, lo - 1, -1):
        for i in range(k):
            scratch[i] = work[i]
        scratch[k] = v
        for i in range(k, n - 1):
            scratch[i + 1] = work[i]
        o = _objective(scratch, _times_kernel(scratch, earliest, lane, movement, conflict,
                                              lane_free, movement_free, t_now, headway,
                                              clearance, times), weights)
        if o < best_obj:
            best_obj = o
            best_k = k
    if best_k != n - 1:
        for i in range(n - 1, best_k, -1):
            work[i] = work[i - 1]
        work[best_k] = v
        obj = best_obj

    # Adjacent-swap improvement until no admissible swap strictly helps.
    for _ in range(max_passes):
        improved = False
        for k in range(n - 1):
            a = work[k]
            b = work[k + 1]
            if lane[a] == lane[b]:
                continue
            work[k] = b
            work[k + 1] = a
            o = _objective(work, _times_kernel(work, earliest, lane, movement, conflict,
                                               lane_free, movement_free, t_now, headway,
                                               clearance, times), weights)
            if o < obj:
                obj = o
                improved = True
            else:
                work[k] = a
                work[k + 1] = b
        if not improved:
            break
    return obj


def sequence_times(ctx: SequenceContext, order: np.ndarray) -> np.ndarray:
    """Discharge times of the vehicles taken in ``order`` (index array)."""
    out = np.empty(len(order), dtype=np.float64)
    _times_kernel(
        np.asarray(order, dtype=np.int64), ctx.earliest, ctx.lane, ctx.movement,
        ctx.conflict, ctx.lane_free, ctx.movement_free, ctx.t_now,
        ctx.model.headway, ctx.model.clearance, out,
    )
    return out


def optimize_sequence(ctx: SequenceContext, incumbent: np.ndarray,
                      enum_limit: int = ENUMERATION_LIMIT) -> np.ndarray:
    """Best admissible order found, or the incumbent if nothing beats it.

    The objective is the weighted sum of discharge times (lower is better);
    only strictly better orders replace the incumbent, so ties always keep
    the status quo.
    """
    incumbent = np.asarray(incumbent, dtype=np.int64)
    n = len(incumbent)
    if n <= 1:
        return incumbent.copy()
    inc_times = sequence_times(ctx, incumbent)
    inc_obj = float(np.dot(ctx.weights[incumbent], inc_times))

    lane_counts = np.bincount(ctx.lane, minlength=len(ctx.lane_free)).astype(np.int64)
    count = _interleaving_count(lane_counts, float(enum_limit))
    best_order = incumbent.copy()
    if count <= enum_limit:
        found = _enumerate_kernel(
            incumbent, ctx.earliest, ctx.lane, ctx.movement, ctx.weights, ctx.conflict,
            ctx.lane_free, ctx.movement_free, ctx.t_now,
            ctx.model.headway, ctx.model.clearance, inc_obj, best_order,
        )
        return best_order if found else incumbent.copy()

    work = np.empty(n, dtype=np.int64)
    scratch = np.empty(n, dtype=np.int64)
    obj = _local_search_kernel(
        incumbent, ctx.earliest, ctx.lane, ctx.movement, ctx.weights, ctx.conflict,
        ctx.lane_free, ctx.movement_free, ctx.t_now,
        ctx.model.headway, ctx.model.clearance, _MAX_SWAP_PASSES, work, scratch,
    )
    return work.copy() if obj < inc_obj else incumbent.copy()


def fcfs_order(arrival_times: np.ndarray) -> np.ndarray:
    """Stable first-come-first-served index order."""
    return np.argsort(np.asarray(arrival_times), kind="stable").astype(np.int64)


# ---------------------------------------------------------------------------
# Signal-mode service
# ---------------------------------------------------------------------------

@dataclass
class PhasePlan:
    """Committed green intervals: (phase index, green start, green end)."""

    intervals: list[tuple[int, float, float]]

    def extended(self, until: float, cycle: float) -> "PhasePlan":
        """Repeat the plan pattern cyclically until it covers ``until``."""
        if not self.intervals:
            return self
        intervals = list(self.intervals)
        shift = cycle
        while intervals[-1][2] < until:
            intervals.extend((p, s + shift, e + shift) for p, s, e in self.intervals)
            shift += cycle
        return PhasePlan(intervals)


def proportional_greens(queue_counts: np.ndarray, cycle: float, n_phases: int,
                        yellow: float = CLEARANCE_S, min_green: float = 5.0) -> np.ndarray:
    """Green durations proportional to queue share, floored at the minimum
    green, rescaled to fill the cycle net of yellows."""
    available = cycle - n_phases * yellow
    if available <= n_phases * min_green:
        return np.full(n_phases, available / n_phases)
    counts = np.asarray(queue_counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        return np.full(n_phases, available / n_phases)
    greens = np.maximum(min_green, counts / total * available)
    # Rescale the slack above the floor so the durations sum to available.
    excess = greens - min_green
    target = available - n_phases * min_green
    if excess.sum() > 0:
        greens = min_green + excess * (target / excess.sum())
    return greens


def build_phase_plan(phase_order: list[int], greens: np.ndarray, start: float,
                     yellow: float = CLEARANCE_S) -> PhasePlan:
    """Sequential plan: each phase green, then a yellow gap, repeating."""
    intervals = []
    t = start
    for phase, green in zip(phase_order, greens):
        intervals.append((phase, t, t + green))
        t += green + yellow
    return PhasePlan(intervals)


def plan_windows(plan: PhasePlan, topology: Topology) -> dict[int, list[tuple[float, float]]]:
    """Per-movement green windows implied by a plan."""
    windows: dict[int, list[tuple[float, float]]] = {m.index: [] for m in topology.movements}
    for phase_idx, s, e in plan.intervals:
        for m in topology.phases[phase_idx].movements:
            windows[m].append((s, e))
    for w in windows.values():
        w.sort()
    return windows


def signal_times(lane_queues: dict[int, list[int]], earliest: dict[int, float],
                 lane_movement: list[int], windows: dict[int, list[tuple[float, float]]],
                 lane_free: dict[int, float], t_now: float,
                 model: ServiceModel = ServiceModel()) -> dict[int, float]:
    """Discharge times under green windows, lanes served FIFO.

    The first vehicle a lane discharges in a window waits the startup loss
    after the green onset; followers need only the saturation headway.
    Raises :class:`UnschedulableError` when a queued movement has no window.
    """
    times: dict[int, float] = {}
    for lane_idx, queue in lane_queues.items():
        if not queue:
            continue
        wins = windows[lane_movement[lane_idx]]
        if not wins:
            raise UnschedulableError(f"movement of lane {lane_idx} is never served")
        prev = lane_free.get(lane_idx, -math.inf)
        wi = 0
        last_window = -1
        for v in queue:
            t = max(earliest[v], t_now, prev)
            while True:
                if wi >= len(wins):
                    raise UnschedulableError(
                        f"plan horizon too short for vehicle {v} in lane {lane_idx}"
                    )
                g0, g1 = wins[wi]
                cand = t
                if wi != last_window:
                    cand = max(cand, g0 + model.startup)
                if cand < g1:
                    times[v] = cand
                    prev = cand + model.headway
                    last_window = wi
                    break
                wi += 1
        lane_free[lane_idx] = prev
    return times


def predict_discharge(order, topology: Topology, t_now: float, *, earliest,
                      signal: PhasePlan | None = None,
                      lane_free=None, movement_free=None,
                      weights=None, model: ServiceModel = ServiceModel()):
    """Discharge times for vehicles in ``order`` (spec-level convenience).

    ``order`` is a sequence of objects with ``id``, ``lane`` and ``movement``
    attributes; ``earliest`` maps vehicle id to its earliest stop-line
    arrival.  Without a ``signal`` plan the vehicles discharge in exactly the
    given total order (sequence mode); with one, lanes are served FIFO inside
    the plan's green windows.
    """
    ids = [v.id for v in order]
    if signal is None:
        n = len(ids)
        ctx = SequenceContext(
            earliest=np.array([earliest[v.id] for v in order]),
            lane=np.array([v.lane for v in order], dtype=np.int64),
            movement=np.array([v.movement for v in order], dtype=np.int64),
            weights=np.zeros(n) if weights is None else np.asarray(weights, dtype=float),
            conflict=topology.conflict,
            lane_free=(np.full(topology.n_lanes, -math.inf) if lane_free is None
                       else np.asarray(lane_free, dtype=float)),
            movement_free=(np.full(topology.n_movements, -math.inf) if movement_free is None
                           else np.asarray(movement_free, dtype=float)),
            t_now=t_now,
            model=model,
        )
        times = sequence_times(ctx, np.arange(n, dtype=np.int64))
        return {vid: float(t) for vid, t in zip(ids, times)}
    lane_queues: dict[int, list[int]] = {}
    for v in order:
        lane_queues.setdefault(v.lane, []).append(v.id)
    windows = plan_windows(signal, topology)
    return signal_times(
        lane_queues, earliest, topology.lane_movement, windows,
        {} if lane_free is None else dict(lane_free), t_now, model,
    )


# ---------------------------------------------------------------------------
# Controller entry points over vehicle lists
# ---------------------------------------------------------------------------

def _sequence_ctx(vehicles, topology: Topology, t_now: float, earliest,
                  weights, model: ServiceModel) -> SequenceContext:
    n = len(vehicles)
    return SequenceContext(
        earliest=np.array([earliest[v.id] for v in vehicles]),
        lane=np.array([v.lane for v in vehicles], dtype=np.int64),
        movement=np.array([v.movement for v in vehicles], dtype=np.int64),
        weights=np.asarray(weights, dtype=float),
        conflict=topology.conflict,
        lane_free=np.full(topology.n_lanes, -math.inf),
        movement_free=np.full(topology.n_movements, -math.inf),
        t_now=t_now,
        model=model,
    )


def reservation_control(incumbent, new_vehicle, topology: Topology, t_now: float,
                        *, earliest, model: ServiceModel = ServiceModel()):
    """Reservation update: the new request is appended last, then the
    VOT-weighted best admissible reordering is adopted (ties keep the
    incumbent).  Returns the resulting discharge schedule as an id->time map."""
    vehicles = list(incumbent) + [new_vehicle]
    weights = [v.weight for v in vehicles]
    ctx = _sequence_ctx(vehicles, topology, t_now, earliest, weights, model)
    best = optimize_sequence(ctx, np.arange(len(vehicles), dtype=np.int64))
    times = sequence_times(ctx, best)
    return {vehicles[k].id: float(t) for k, t in zip(best, times)}


def fcfs_schedule(vehicles, topology: Topology, t_now: float, *, earliest,
                  model: ServiceModel = ServiceModel()):
    """First-come-first-served discharge times (arrival order, admissible)."""
    ordered = sorted(vehicles, key=lambda v: (v.arrival_time, v.id))
    ctx = _sequence_ctx(ordered, topology, t_now, earliest,
                        np.zeros(len(ordered)), model)
    times = sequence_times(ctx, np.arange(len(ordered), dtype=np.int64))
    return {v.id: float(t) for v, t in zip(ordered, times)}


def min_delay_schedule(vehicles, topology: Topology, t_now: float, *, earliest,
                       model: ServiceModel = ServiceModel()):
    """Total-delay-minimizing schedule: the reservation optimizer with every
    vehicle's weight replaced by one."""
    ordered = sorted(vehicles, key=lambda v: (v.arrival_time, v.id))
    ctx = _sequence_ctx(ordered, topology, t_now, earliest,
                        np.ones(len(ordered)), model)
    best = optimize_sequence(ctx, np.arange(len(ordered), dtype=np.int64))
    times = sequence_times(ctx, best)
    return {ordered[k].id: float(t) for k, t in zip(best, times)}


def phase_switching(topology: Topology, group: int, lane_queues, t_now: float, *,
                    earliest, weights, cycle_s: float = 40.0,
                    incumbent: list[int] | None = None,
                    model: ServiceModel = ServiceModel()) -> list[int]:
    """Best permutation of a signal group's phases by VOT-weighted gains.

    Candidate cycles order the group's phases with greens proportional to
    queue counts; the permutation maximizing the total valuated time gain
    against the incumbent order wins, and ties retain the incumbent.
    """
    phases = topology.signal_groups[group]
    incumbent = list(phases) if incumbent is None else list(incumbent)
    counts = {
        p: sum(len(lane_queues.get(l, [])) for l in range(topology.n_lanes)
               if topology.lane_movement[l] in topology.phases[p].movements)
        for p in phases
    }
    n_zone = sum(len(q) for q in lane_queues.values())

    def plan_times(order):
        greens = proportional_greens(np.array([counts[p] for p in order]),
                                     cycle_s, len(order), model.clearance)
        intervals = []
        start = t_now + model.clearance
        for _ in range(n_zone // 2 + 3):
            seg = build_phase_plan(order, greens, start, model.clearance)
            intervals.extend(seg.intervals)
            start = seg.intervals[-1][2] + model.clearance
        windows = plan_windows(PhasePlan(intervals), topology)
        return signal_times(lane_queues, earliest, topology.lane_movement,
                            windows, {}, t_now, model)

    incumbent_times = plan_times(incumbent)
    best_order, best_gain = incumbent, 0.0
    for order in itertools.permutations(phases):
        order = list(order)
        if order == incumbent:
            continue
        times = plan_times(order)
        gain = sum(weights[v] * (incumbent_times[v] - times[v]) for v in incumbent_times)
        if gain > best_gain:
            best_order, best_gain = order, gain
    return best_order


# ---------------------------------------------------------------------------
# Max-weight ingredients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FluxParams:
    """Newell flow-density parameters (speeds in km/h, density in veh/(km*lane))."""

    v_f: float = 60.0
    w: float = 25.0
    rho_jam: float = 133.0

    def __post_init__(self):
        if not (self.v_f > 0 and self.w > 0 and self.rho_jam > 0):
            raise ValueError("flux parameters must be strictly positive")
        if not self.v_f > self.w:
            raise ValueError("free-flow speed must exceed the backward wave speed")


def newell_flux(rho: float, params: FluxParams = FluxParams()) -> float:
    """Newell's nonlinear flow-density relation, veh/h.

    ``phi = v_f rho - v_f rho exp((w / v_f)(1 - rho_jam / rho))``, with the
    removable singularity at zero density filled by continuity (phi -> 0).
    """
    if rho < 0 or rho > params.rho_jam:
        raise ValueError(f"density {rho!r} outside [0, {params.rho_jam}]")
    if rho == 0:
        return 0.0
    return params.v_f * rho * (1.0 - math.exp((params.w / params.v_f) * (1.0 - params.rho_jam / rho)))


def movement_weight(weights, delta_tau) -> float:
    """VOT-weighted time gain of a movement's queue: sum of w_v * dtau_v."""
    return float(np.dot(np.asarray(weights, dtype=float), np.asarray(delta_tau, dtype=float)))


def max_weight_scores(big_w: np.ndarray, phi: np.ndarray, phases, allowed) -> np.ndarray:
    """Score each allowed phase: sum over its movements of W * phi."""
    scores = np.full(len(phases), -np.inf)
    for p in allowed:
        scores[p] = sum(big_w[m] * phi[m] for m in phases[p].movements)
    return scores


def max_weight_select(big_w: np.ndarray, phi: np.ndarray, phases, allowed, incumbent: int) -> int:
    """Argmax phase by W*phi score; ties (within float equality) keep the
    incumbent when it is allowed."""
    scores = max_weight_scores(big_w, phi, phases, allowed)
    best = int(np.argmax(scores))
    if incumbent in allowed and scores[incumbent] >= scores[best]:
        return incumbent
    return best


def downstream_pressure(w_down: np.ndarray, r_down: np.ndarray, q_down: np.ndarray) -> float:
    """Weighted downstream occupancy term of the movement weight."""
    return float(np.sum(w_down * r_down * q_down))


def pressure_weight(w: float, q: float, downstream: float) -> float:
    """W = [w*Q - downstream]^+ (clipped at zero)."""
    return max(0.0, w * q - downstream)


def lyapunov(movement_weights: np.ndarray, queue_sizes: np.ndarray) -> float:
    """Diagnostic quadratic queue potential: 0.5 * sum([w]^+ * Q^2).

    Logged per decision for inspection; the controllers never act on it.
    """
    w = np.maximum(0.0, np.asarray(movement_weights, dtype=float))
    q = np.asarray(queue_sizes, dtype=float)
    return float(0.5 * np.sum(w * q * q))
