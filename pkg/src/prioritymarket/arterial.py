"""Four-junction arterial with decentralized max-weight phase control.

The arterial runs east-west; every junction also serves two cross streams
and left turns.  Signals share a common 40 s cycle made of four 10 s slots.
Under coordination the first half-cycle is reserved for east-west phases and
the second for north-south, with 20 s offsets between adjacent junctions and
link lengths chosen so a discharged platoon reaches the next stop line in
exactly 20 s (good two-way progression).  In isolated mode every slot is an
unconstrained max-weight decision.

At each slot a junction scores the allowed phases by the pressure form
``sum over phase movements of W * phi`` where ``W = [w Q - downstream]^+``,
``w`` is the queue's VOT-weighted gain from being served now rather than at
its next default opportunity, and ``phi`` is the Newell flux of the upstream
link.  With payments enabled, a deviation from the incumbent phase is
vetted and settled through the direct-transaction game using the junction's
zone vehicles.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from prioritymarket.control import (
    CLEARANCE_S,
    SATURATION_HEADWAY_S,
    STARTUP_LOSS_S,
    FluxParams,
    lyapunov,
    max_weight_select,
    newell_flux,
)
from prioritymarket.mechanism import (
    DischargeSchedule,
    Settlement,
    Vehicle,
    group_gains,
    group_vehicles,
    settle,
)
from prioritymarket.sim import FREE_FLOW_SPEED_MS, VotSampler, sample_vot
from prioritymarket.topology import Topology, make_arterial_junction

__all__ = [
    "ArterialParams",
    "ArterialResult",
    "generate_arterial_vehicles",
    "run_arterial",
    "SCENARIOS",
]

SCENARIOS = ("coor-pay", "iso-pay", "coor-tv")

# Stop line to stop line in exactly 20 s at free flow, matching the offsets.
LINK_M = 20.0 * FREE_FLOW_SPEED_MS


@dataclass(frozen=True)
class ArterialParams:
    n_junctions: int = 4
    volume_vph: float = 600.0  # per arterial direction
    cross_fraction: float = 0.5  # cross-street rate as a share of arterial rate
    arterial_left_prob: float = 0.1
    cross_left_prob: float = 0.25
    zone_radius_m: float = 150.0
    cycle_s: float = 40.0
    slot_s: float = 10.0
    offset_s: float = 20.0
    yellow_s: float = 1.8
    flux: FluxParams = field(default_factory=FluxParams)

    @property
    def slots_per_cycle(self) -> int:
        return int(round(self.cycle_s / self.slot_s))


def generate_arterial_vehicles(
    params: ArterialParams,
    seed: int,
    n_arrivals: int,
    vot: VotSampler = VotSampler(),
    penetration: float = 1.0,
) -> tuple[list[Vehicle], dict[int, list[tuple[int, int]]]]:
    """Fleet plus per-vehicle routes (lists of (junction, movement) hops).

    Streams: eastbound and westbound arterial entries, and a north- and
    southbound cross stream at every junction.  Left turns exit the network
    after discharging.
    """
    topo = make_arterial_junction(params.zone_radius_m)
    nj = params.n_junctions
    streams: list[tuple[str, int]] = [("EB", 0), ("WB", nj - 1)]
    rates = [params.volume_vph, params.volume_vph]
    for j in range(nj):
        for approach in ("NB", "SB"):
            streams.append((approach, j))
            rates.append(params.volume_vph * params.cross_fraction)
    rates = np.array(rates)
    probs = rates / rates.sum()
    mean_gap = 3600.0 / rates.sum()

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    vehicles: list[Vehicle] = []
    routes: dict[int, list[tuple[int, int]]] = {}
    t = 0.0
    for vid in range(n_arrivals):
        t += rng.exponential(mean_gap)
        approach, j0 = streams[int(rng.choice(len(streams), p=probs))]
        if approach in ("EB", "WB"):
            step = 1 if approach == "EB" else -1
            path = [j0 + step * k for k in range(nj - (j0 if approach == "EB" else nj - 1 - j0))]
            path = [j for j in path if 0 <= j < nj]
            if rng.random() < params.arterial_left_prob:
                turn_at = int(rng.integers(len(path)))
                hops = [(j, topo.movement_index(approach, "T")) for j in path[:turn_at]]
                hops.append((path[turn_at], topo.movement_index(approach, "L")))
            else:
                hops = [(j, topo.movement_index(approach, "T")) for j in path]
        else:
            turn = "L" if rng.random() < params.cross_left_prob else "T"
            hops = [(j0, topo.movement_index(approach, turn))]
        vot_true = sample_vot(vot, rng)
        connected = bool(rng.random() < penetration)
        vehicles.append(
            Vehicle(
                id=vid,
                approach=approach,
                lane=hops[0][1],
                movement=hops[0][1],
                arrival_time=float(t),
                vot_true=vot_true,
                connected=connected,
            )
        )
        routes[vid] = hops
    return vehicles, routes


@dataclass
class ArterialResult:
    scenario: str
    exit_time: dict[int, float]
    free_flow_s: dict[int, float]
    payments: dict[int, float]
    settlements: list[tuple[float, int, Settlement]]  # (time, junction, settlement)
    lyapunov_log: list[tuple[float, int, float]]

    def delay(self, v: Vehicle) -> float:
        return (self.exit_time[v.id] - v.arrival_time) - self.free_flow_s[v.id]

    def loss(self, v: Vehicle) -> float:
        return self.delay(v) * v.weight_true + self.payments[v.id]

    def benefit(self, v: Vehicle) -> float:
        """Benefit against free-flow passing (the loss baseline, negated)."""
        return -self.loss(v)


class _ArterialEngine:
    def __init__(self, params: ArterialParams, vehicles: list[Vehicle],
                 routes: dict[int, list[tuple[int, int]]], scenario: str):
        if scenario not in SCENARIOS:
            raise ValueError(f"unknown arterial scenario {scenario!r}")
        self.params = params
        self.topology: Topology = make_arterial_junction(params.zone_radius_m)
        self.scenario = scenario
        self.coordinated = scenario in ("coor-pay", "coor-tv")
        self.payments_on = scenario in ("coor-pay", "iso-pay")
        self.tv_mode = scenario == "coor-tv"
        self.vehicles = vehicles
        self.by_id = {v.id: v for v in vehicles}
        self.routes = routes
        nj = params.n_junctions
        # All junctions share the cycle structure; coordination is the
        # progression offset between adjacent junctions, isolation is its
        # absence (all clocks aligned).
        if self.coordinated:
            self.offsets = [params.offset_s * (j % 2) for j in range(nj)]
        else:
            self.offsets = [0.0] * nj

        self.zone = [[[] for _ in range(8)] for _ in range(nj)]  # [junction][movement]
        self.overflow = [[[] for _ in range(8)] for _ in range(nj)]
        self.lane_free = [[-math.inf] * 8 for _ in range(nj)]
        self.gate = [[math.inf] * 8 for _ in range(nj)]  # per-movement service gate
        self.green_until = [[-math.inf] * 8 for _ in range(nj)]
        self.prev_phase = [-1] * nj
        self.earliest: dict[int, float] = {}
        self.hop_index: dict[int, int] = {vid: 0 for vid in routes}

        self.traversal_s = params.zone_radius_m / FREE_FLOW_SPEED_MS
        self.inter_zone_s = (LINK_M - params.zone_radius_m) / FREE_FLOW_SPEED_MS
        self.cap = self.topology.lane_capacity

        self.events: list[tuple[float, int, int, int]] = []  # (time, vid, junction, movement)
        for v in vehicles:
            j, m = routes[v.id][0]
            heapq.heappush(self.events, (v.arrival_time, v.id, j, m))

        self.exit_time: dict[int, float] = {}
        self.free_flow_s = {
            vid: self.traversal_s + 20.0 * (len(hops) - 1) for vid, hops in routes.items()
        }
        self.payments = {v.id: 0.0 for v in vehicles}
        self.settlements: list[tuple[float, int, Settlement]] = []
        self.lyapunov_log: list[tuple[float, int, float]] = []

        # Pretimed default plan per cycle: EW throughs, EW lefts, NS
        # throughs, NS lefts.  With no connected vehicles every max-weight
        # score is zero and this plan runs unchanged; pressure claims slots
        # away from it otherwise.
        self.phase_idx = {p.id: i for i, p in enumerate(self.topology.phases)}
        self.ew_phases = [self.phase_idx[i] for i in ("III", "IV", "VII", "VIII")]
        self.ns_phases = [self.phase_idx[i] for i in ("I", "II", "V", "VI")]
        self.default_plan = [self.phase_idx[i] for i in ("III", "IV", "I", "II")]

        # Static turn shares per (junction, movement) for the flux split.
        self.turn_share = self._turn_shares()

    def _turn_shares(self) -> list[list[float]]:
        p = self.params
        shares = []
        for _ in range(p.n_junctions):
            row = [0.0] * 8
            for m in self.topology.movements:
                if m.approach in ("EB", "WB"):
                    row[m.index] = (
                        p.arterial_left_prob if m.turn == "L" else 1 - p.arterial_left_prob
                    )
                else:
                    row[m.index] = (
                        p.cross_left_prob if m.turn == "L" else 1 - p.cross_left_prob
                    )
            shares.append(row)
        return shares

    # -- demand-side helpers --------------------------------------------

    def _weight(self, vid: int) -> float:
        # Traditional vehicles carry no usable VOT: their weight is zero,
        # which collapses max-weight onto the pretimed default plan.
        return 0.0 if self.tv_mode else self.by_id[vid].weight

    def _enter_zone(self, vid: int, j: int, m: int, t: float):
        if len(self.zone[j][m]) < self.cap:
            self.earliest[vid] = t + self.traversal_s
            self.zone[j][m].append(vid)
        else:
            self.overflow[j][m].append(vid)

    def _refill(self, j: int, m: int, t: float):
        while self.overflow[j][m] and len(self.zone[j][m]) < self.cap:
            vid = self.overflow[j][m].pop(0)
            self.earliest[vid] = t + self.traversal_s
            self.zone[j][m].append(vid)

    # -- slot decisions ---------------------------------------------------

    def _default_phase_at(self, j: int, t: float) -> int:
        local = (t - self.offsets[j]) % self.params.cycle_s
        return self.default_plan[int(local // self.params.slot_s)]

    def _allowed(self, j: int, t: float) -> tuple[list[int], int]:
        """Allowed phases this slot and the incumbent (default-plan) phase."""
        local = (t - self.offsets[j]) % self.params.cycle_s
        window = self.ew_phases if local < self.params.cycle_s / 2 else self.ns_phases
        return window, self._default_phase_at(j, t)

    def _movement_windows(self, j: int, m: int, t: float, first_phase: int,
                          n_cycles: int) -> list[tuple[float, float]]:
        """Green windows of movement m at junction j over a prediction
        horizon: the decided slot, then the default plan."""
        p = self.params
        windows = []
        if m in self.topology.phases[first_phase].movements:
            windows.append((t, t + p.slot_s - p.yellow_s))
        slot = t + p.slot_s
        for _ in range(n_cycles * p.slots_per_cycle):
            phase = self._default_phase_at(j, slot)
            if m in self.topology.phases[phase].movements:
                windows.append((slot, slot + p.slot_s - p.yellow_s))
            slot += p.slot_s
        return windows

    def _serve_queue(self, queue: list[int], windows: list[tuple[float, float]],
                     lane_free: float, t: float) -> dict[int, float]:
        """FIFO service of one movement queue through its green windows."""
        times = {}
        prev = lane_free
        wi = 0
        last_window = -1
        horizon_end = windows[-1][1] if windows else t + self.params.cycle_s
        for vid in queue:
            cand = max(self.earliest[vid], t, prev)
            while True:
                if wi >= len(windows):
                    # Prediction horizon exhausted: park remaining vehicles
                    # one headway apart beyond the last window.
                    cand = max(cand, prev, horizon_end)
                    times[vid] = cand
                    prev = cand + SATURATION_HEADWAY_S
                    break
                g0, g1 = windows[wi]
                c = max(cand, g0 + STARTUP_LOSS_S) if wi != last_window else cand
                if c < g1:
                    times[vid] = c
                    prev = c + SATURATION_HEADWAY_S
                    last_window = wi
                    break
                wi += 1
        return times

    def _predict_times(self, j: int, t: float, first_phase: int) -> dict[int, float]:
        n_zone = sum(len(q) for q in self.zone[j])
        n_cycles = n_zone // 2 + 3
        out = {}
        for m in range(8):
            if not self.zone[j][m]:
                continue
            windows = self._movement_windows(j, m, t, first_phase, n_cycles)
            out.update(self._serve_queue(self.zone[j][m], windows, self.lane_free[j][m], t))
        return out

    def _movement_pressure(self, j: int, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-movement VOT-weighted service gains w and queue sizes Q."""
        w = np.zeros(8)
        q = np.zeros(8)
        n_cycles_base = max(len(self.zone[j][m]) for m in range(8)) // 2 + 3
        for m in range(8):
            queue = self.zone[j][m]
            q[m] = len(queue)
            if not queue:
                continue
            served_w = self._movement_windows(j, m, t, self._first_phase_with(m), n_cycles_base)
            unserved_w = [win for win in served_w if win[0] > t]
            served = self._serve_queue(queue, served_w, self.lane_free[j][m], t)
            unserved = self._serve_queue(queue, unserved_w, self.lane_free[j][m], t)
            w[m] = sum(self._weight(v) * (unserved[v] - served[v]) for v in queue)
        return w, q

    def _first_phase_with(self, m: int) -> int:
        for i, phase in enumerate(self.topology.phases):
            if m in phase.movements:
                return i
        raise KeyError(m)

    def _downstream_of(self, j: int, m: int) -> tuple[int, list[int]] | None:
        """Downstream junction and movement indices fed by (j, m)'s out-link."""
        mv = self.topology.movements[m]
        if mv.turn != "T" or mv.approach not in ("EB", "WB"):
            return None
        j2 = j + 1 if mv.approach == "EB" else j - 1
        if not (0 <= j2 < self.params.n_junctions):
            return None
        t_idx = self.topology.movement_index(mv.approach, "T")
        l_idx = self.topology.movement_index(mv.approach, "L")
        return j2, [t_idx, l_idx]

    def _decide_all(self, t: float):
        nj = self.params.n_junctions
        pressures = [self._movement_pressure(j, t) for j in range(nj)]
        p = self.params
        zone_km = p.zone_radius_m / 1000.0
        for j in range(nj):
            w, q = pressures[j]
            big_w = np.zeros(8)
            phi = np.zeros(8)
            for m in range(8):
                downstream = 0.0
                down = self._downstream_of(j, m)
                if down is not None:
                    j2, movements = down
                    w2, q2 = pressures[j2]
                    downstream = sum(
                        w2[m2] * self.turn_share[j2][m2] * q2[m2] for m2 in movements
                    )
                big_w[m] = max(0.0, w[m] * q[m] - downstream)
                approach = self.topology.movements[m].approach
                occupancy = sum(
                    q[m2] for m2 in range(8)
                    if self.topology.movements[m2].approach == approach
                )
                rho = min(occupancy / (zone_km * 2.0), p.flux.rho_jam)
                phi[m] = newell_flux(rho, p.flux) * self.turn_share[j][m]

            allowed, incumbent = self._allowed(j, t)
            selected = max_weight_select(big_w, phi, self.topology.phases, allowed, incumbent)
            self.lyapunov_log.append((t, j, lyapunov(w, q)))

            adopted = selected
            if selected != incumbent:
                adopted = self._vet_switch(j, t, incumbent, selected)
            self._commit(j, t, adopted)

    def _vet_switch(self, j: int, t: float, incumbent: int, selected: int) -> int:
        inc_times = self._predict_times(j, t, incumbent)
        new_times = self._predict_times(j, t, selected)
        if not inc_times:
            return selected
        ids = sorted(inc_times)
        vehicles_in = [self.by_id[i] for i in ids]
        old = DischargeSchedule("incumbent", inc_times)
        new = DischargeSchedule("selected", new_times)
        g = group_vehicles(old, new, vehicles_in)
        gain_a, gain_b = group_gains(g, vehicles_in)
        if gain_a + gain_b > 0:
            if self.payments_on and g.payers and g.payees:
                settlement = settle(g, vehicles_in)
                self.settlements.append((t, j, settlement))
                for vid, amount in settlement.payments.items():
                    if amount:
                        self.payments[vid] += amount
            return selected
        return incumbent

    def _commit(self, j: int, t: float, phase: int):
        p = self.params
        continuing = phase == self.prev_phase[j]
        for m in range(8):
            if m in self.topology.phases[phase].movements:
                self.gate[j][m] = t if continuing else t + STARTUP_LOSS_S
                self.green_until[j][m] = t + p.slot_s - p.yellow_s
            else:
                self.green_until[j][m] = -math.inf
        self.prev_phase[j] = phase

    # -- execution --------------------------------------------------------

    def _next_discharge(self) -> tuple[float, int, int]:
        best = (math.inf, -1, -1)
        for j in range(self.params.n_junctions):
            for m in range(8):
                if not self.zone[j][m]:
                    continue
                g1 = self.green_until[j][m]
                if g1 == -math.inf:
                    continue
                head = self.zone[j][m][0]
                tau = max(self.earliest[head], self.lane_free[j][m], self.gate[j][m])
                if tau < g1 and tau < best[0]:
                    best = (tau, j, m)
        return best

    def _discharge(self, j: int, m: int, tau: float):
        vid = self.zone[j][m].pop(0)
        del self.earliest[vid]
        self.lane_free[j][m] = tau + SATURATION_HEADWAY_S
        self._refill(j, m, tau)
        hops = self.routes[vid]
        self.hop_index[vid] += 1
        if self.hop_index[vid] >= len(hops):
            self.exit_time[vid] = tau
        else:
            j2, m2 = hops[self.hop_index[vid]]
            heapq.heappush(self.events, (tau + self.inter_zone_s, vid, j2, m2))

    def run(self) -> ArterialResult:
        t_slot = 0.0
        n_total = len(self.vehicles)
        self._decide_all(0.0)
        t_slot = self.params.slot_s
        while len(self.exit_time) < n_total:
            t_event = self.events[0][0] if self.events else math.inf
            t_dis, j_dis, m_dis = self._next_discharge()
            t_next = min(t_event, t_dis, t_slot)
            if t_dis <= min(t_event, t_slot):
                self._discharge(j_dis, m_dis, t_dis)
            elif t_event <= t_slot:
                _, vid, j, m = heapq.heappop(self.events)
                self._enter_zone(vid, j, m, t_event)
            else:
                self._decide_all(t_slot)
                t_slot += self.params.slot_s
        return ArterialResult(
            scenario=self.scenario,
            exit_time=self.exit_time,
            free_flow_s=self.free_flow_s,
            payments=self.payments,
            settlements=self.settlements,
            lyapunov_log=self.lyapunov_log,
        )


def run_arterial(params: ArterialParams, vehicles: list[Vehicle],
                 routes: dict[int, list[tuple[int, int]]], scenario: str) -> ArterialResult:
    """Simulate one arterial scenario over a shared fleet."""
    return _ArterialEngine(params, vehicles, routes, scenario).run()
