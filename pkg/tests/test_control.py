"""Tests for discharge prediction, the sequence optimizer, and max-weight parts."""

import itertools
import math

import numpy as np
import pytest

from prioritymarket.control import (
    CLEARANCE_S,
    FluxParams,
    PhasePlan,
    SequenceContext,
    ServiceModel,
    UnschedulableError,
    build_phase_plan,
    fcfs_order,
    lyapunov,
    max_weight_select,
    movement_weight,
    newell_flux,
    optimize_sequence,
    plan_windows,
    predict_discharge,
    proportional_greens,
    sequence_times,
    signal_times,
)
from prioritymarket.topology import make_isolated, make_obstruction


# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------

def oracle_times(order, earliest, lane, movement, conflict, t_now=0.0,
                 headway=1.8, clearance=1.8):
    """Direct transliteration of the sequence service rules (pure python)."""
    lane_free, mov_free = {}, {}
    out = []
    for v in order:
        t = max(earliest[v], t_now, lane_free.get(lane[v], -math.inf))
        for m in range(len(conflict)):
            if conflict[movement[v]][m]:
                t = max(t, mov_free.get(m, -math.inf))
        out.append(t)
        lane_free[lane[v]] = max(lane_free.get(lane[v], -math.inf), t + headway)
        mov_free[movement[v]] = max(mov_free.get(movement[v], -math.inf), t + clearance)
    return out


def oracle_best_order(earliest, lane, movement, weights, conflict, t_now=0.0):
    """Exhaustive minimum of sum(w * tau) over all lane-FIFO interleavings."""
    n = len(earliest)
    by_lane = {}
    for v in range(n):
        by_lane.setdefault(lane[v], []).append(v)
    for vs in by_lane.values():
        vs.sort(key=lambda v: (earliest[v], v))
    lanes = sorted(by_lane)
    pattern = []
    for l in lanes:
        pattern.extend([l] * len(by_lane[l]))
    best_obj, best = math.inf, None
    for perm in set(itertools.permutations(pattern)):
        ptr = {l: 0 for l in lanes}
        order = []
        for l in perm:
            order.append(by_lane[l][ptr[l]])
            ptr[l] += 1
        times = oracle_times(order, earliest, lane, movement, conflict, t_now)
        obj = sum(weights[v] * t for v, t in zip(order, times))
        if obj < best_obj:
            best_obj, best = obj, order
    return best, best_obj


def make_ctx(earliest, lane, movement, weights, conflict, n_lanes, n_movs, t_now=0.0):
    return SequenceContext(
        earliest=np.asarray(earliest, dtype=float),
        lane=np.asarray(lane, dtype=np.int64),
        movement=np.asarray(movement, dtype=np.int64),
        weights=np.asarray(weights, dtype=float),
        conflict=np.asarray(conflict, dtype=bool),
        lane_free=np.full(n_lanes, -math.inf),
        movement_free=np.full(n_movs, -math.inf),
        t_now=t_now,
    )


CONFLICT_2 = [[False, True], [True, False]]


class TestSequenceTimes:
    def test_unobstructed_vehicle_crosses_at_earliest(self):
        ctx = make_ctx([12.3], [0], [0], [1.0], CONFLICT_2, 2, 2)
        times = sequence_times(ctx, np.array([0]))
        assert times[0] == pytest.approx(12.3)

    def test_same_lane_headway(self):
        ctx = make_ctx([5.0, 5.0], [0, 0], [0, 0], [1, 1], CONFLICT_2, 2, 2)
        times = sequence_times(ctx, np.array([0, 1]))
        assert times[0] == pytest.approx(5.0)
        assert times[1] == pytest.approx(5.0 + 1.8)

    def test_conflicting_movements_cleared(self):
        ctx = make_ctx([5.0, 5.0], [0, 1], [0, 1], [1, 1], CONFLICT_2, 2, 2)
        times = sequence_times(ctx, np.array([0, 1]))
        assert times[1] - times[0] >= CLEARANCE_S - 1e-12

    def test_compatible_movements_discharge_together(self):
        conflict = [[False, False], [False, False]]
        ctx = make_ctx([5.0, 5.0], [0, 1], [0, 1], [1, 1], conflict, 2, 2)
        times = sequence_times(ctx, np.array([0, 1]))
        assert times[0] == times[1] == pytest.approx(5.0)

    def test_now_clamp(self):
        ctx = make_ctx([2.0], [0], [0], [1.0], CONFLICT_2, 2, 2, t_now=50.0)
        assert sequence_times(ctx, np.array([0]))[0] == pytest.approx(50.0)

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(8)
        topo = make_isolated()
        for _ in range(100):
            n = int(rng.integers(1, 12))
            earliest = rng.uniform(0, 40, n)
            lane = rng.integers(0, topo.n_lanes, n)
            mov = np.array([topo.lane_movement[l] for l in lane])
            order = np.arange(n)[np.lexsort((np.arange(n), earliest))]
            ctx = make_ctx(earliest, lane, mov, np.ones(n), topo.conflict,
                           topo.n_lanes, topo.n_movements)
            got = sequence_times(ctx, order)
            want = oracle_times(list(order), earliest, lane, mov, topo.conflict)
            assert np.allclose(got, want)


class TestOptimizer:
    def test_single_lane_is_fcfs(self):
        ctx = make_ctx([1.0, 2.0, 3.0], [0, 0, 0], [0, 0, 0], [1, 5, 9],
                       CONFLICT_2, 2, 2)
        best = optimize_sequence(ctx, np.array([0, 1, 2]))
        assert list(best) == [0, 1, 2]

    def test_high_vot_vehicle_goes_first(self):
        # Two conflicting one-vehicle movements, VOTs 40 vs 5, equal arrival.
        ctx = make_ctx([5.0, 5.0], [0, 1], [0, 1], [5.0, 40.0], CONFLICT_2, 2, 2)
        best = optimize_sequence(ctx, np.array([0, 1]))
        assert list(best) == [1, 0]

    def test_matches_brute_force_small_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            n = int(rng.integers(2, 9))
            lane = rng.integers(0, 2, n)
            movement = lane.copy()
            earliest = np.sort(rng.uniform(0, 20, n))
            weights = rng.uniform(0, 1.5, n)
            order0 = np.arange(n)
            ctx = make_ctx(earliest, lane, movement, weights, CONFLICT_2, 2, 2)
            best = optimize_sequence(ctx, order0)
            got_obj = float(np.dot(weights[best], sequence_times(ctx, best)))
            _, want_obj = oracle_best_order(earliest, lane, movement, weights, CONFLICT_2)
            assert got_obj == pytest.approx(want_obj, abs=1e-9)

    def test_large_instance_uses_local_search_and_stays_admissible(self):
        rng = np.random.default_rng(1)
        topo = make_isolated()
        n = 60
        lane = rng.integers(0, topo.n_lanes, n)
        movement = np.array([topo.lane_movement[l] for l in lane])
        earliest = np.sort(rng.uniform(0, 120, n))
        weights = rng.uniform(0, 1.5, n)
        order0 = np.arange(n)
        ctx = make_ctx(earliest, lane, movement, weights, topo.conflict,
                       topo.n_lanes, topo.n_movements)
        best = optimize_sequence(ctx, order0)
        assert sorted(best) == list(range(n))
        # Lane FIFO preserved.
        for l in range(topo.n_lanes):
            in_lane = [v for v in best if lane[v] == l]
            assert in_lane == sorted(in_lane)
        # Objective never worse than incumbent.
        obj = float(np.dot(weights[best], sequence_times(ctx, best)))
        inc = float(np.dot(weights[order0], sequence_times(ctx, order0)))
        assert obj <= inc + 1e-9
        # Emitted schedule keeps clearance between conflicting discharges.
        times = sequence_times(ctx, best)
        for i in range(n):
            for j in range(i + 1, n):
                a, b = best[i], best[j]
                if topo.conflict[movement[a], movement[b]]:
                    assert abs(times[i] - times[j]) >= CLEARANCE_S - 1e-9

    def test_no_improvement_keeps_incumbent(self):
        ctx = make_ctx([1.0, 10.0], [0, 1], [0, 1], [1.0, 1.0], CONFLICT_2, 2, 2)
        best = optimize_sequence(ctx, np.array([0, 1]))
        assert list(best) == [0, 1]


def test_fcfs_order_sorts_by_arrival():
    assert list(fcfs_order(np.array([3.0, 1.0, 2.0]))) == [1, 2, 0]


class TestSignalService:
    def test_red_then_startup_then_headway(self):
        # Green for movement 0 opens at t0 = 10: tau1 = 12, tau2 = 13.8.
        plan = PhasePlan([(0, 10.0, 30.0)])
        topo = make_obstruction()
        windows = plan_windows(plan, topo)
        times = signal_times({0: [1, 2]}, {1: 0.0, 2: 0.0}, topo.lane_movement,
                             windows, {}, t_now=0.0)
        assert times[1] == pytest.approx(12.0)
        assert times[2] == pytest.approx(13.8)

    def test_all_discharges_inside_green(self):
        plan = PhasePlan([(0, 0.0, 10.0), (1, 11.8, 21.8), (0, 23.6, 33.6)])
        topo = make_obstruction()
        windows = plan_windows(plan, topo)
        queue = {0: [1, 2, 3, 4, 5], 2: [6, 7]}
        earliest = {i: 0.0 for i in range(1, 8)}
        times = signal_times(queue, earliest, topo.lane_movement, windows, {}, 0.0)
        for lane_idx, vehs in queue.items():
            mov = topo.lane_movement[lane_idx]
            for v in vehs:
                assert any(g0 <= times[v] < g1 for g0, g1 in windows[mov])

    def test_unserved_movement_raises(self):
        plan = PhasePlan([(0, 0.0, 10.0)])
        topo = make_obstruction()
        windows = plan_windows(plan, topo)
        with pytest.raises(UnschedulableError):
            signal_times({2: [1]}, {1: 0.0}, topo.lane_movement, windows, {}, 0.0)

    def test_plan_extension_covers_horizon(self):
        plan = PhasePlan([(0, 0.0, 10.0), (1, 11.8, 21.8)])
        extended = plan.extended(until=100.0, cycle=23.6)
        assert extended.intervals[-1][2] >= 100.0
        # Pattern repeats with the cycle shift.
        assert extended.intervals[2][1] == pytest.approx(23.6)


class TestPhasePlanHelpers:
    def test_proportional_greens_respect_minimum(self):
        greens = proportional_greens(np.array([30, 1]), cycle=40.0, n_phases=2)
        assert greens.min() >= 5.0 - 1e-12
        assert greens.sum() == pytest.approx(40.0 - 2 * CLEARANCE_S)

    def test_equal_queues_equal_greens(self):
        greens = proportional_greens(np.array([4, 4]), cycle=40.0, n_phases=2)
        assert greens[0] == pytest.approx(greens[1])

    def test_build_phase_plan_inserts_yellow(self):
        plan = build_phase_plan([0, 1], np.array([10.0, 8.0]), start=5.0)
        assert plan.intervals[0] == (0, 5.0, 15.0)
        assert plan.intervals[1][1] == pytest.approx(15.0 + CLEARANCE_S)


class TestNewellFlux:
    def test_zero_at_jam_density_exactly(self):
        p = FluxParams()
        assert newell_flux(p.rho_jam, p) == 0.0

    def test_zero_at_zero_density(self):
        assert newell_flux(0.0) == 0.0

    def test_value_matches_direct_evaluation(self):
        # Direct evaluation at rho = 50 with the arterial parameters.
        p = FluxParams(v_f=60.0, w=25.0, rho_jam=133.0)
        rho = 50.0
        want = 60 * rho - 60 * rho * math.exp((25 / 60) * (1 - 133 / rho))
        assert newell_flux(rho, p) == pytest.approx(want, rel=1e-12)

    def test_positive_on_interior(self):
        p = FluxParams()
        for rho in np.linspace(1.0, 132.0, 50):
            assert newell_flux(float(rho), p) > 0

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            newell_flux(-1.0)
        with pytest.raises(ValueError):
            newell_flux(200.0)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            FluxParams(v_f=20.0, w=25.0)
        with pytest.raises(ValueError):
            FluxParams(rho_jam=-1.0)


class TestMaxWeight:
    def setup_method(self):
        self.topo = make_obstruction()

    def test_empty_queues_retain_current_phase(self):
        w = np.zeros(2)
        phi = np.zeros(2)
        choice = max_weight_select(w, phi, self.topo.phases, [0, 1], incumbent=1)
        assert choice == 1

    def test_congested_movement_selected(self):
        w = np.array([50.0, 0.0])
        phi = np.array([800.0, 800.0])
        choice = max_weight_select(w, phi, self.topo.phases, [0, 1], incumbent=1)
        assert choice == 0

    def test_scaling_weights_preserves_argmax(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            w = rng.uniform(0, 100, 2)
            phi = rng.uniform(1, 1000, 2)
            base = max_weight_select(w, phi, self.topo.phases, [0, 1], incumbent=0)
            scaled = max_weight_select(w * 7.3, phi, self.topo.phases, [0, 1], incumbent=0)
            assert base == scaled

    def test_movement_weight_sums(self):
        assert movement_weight([], []) == 0.0
        assert movement_weight([0.0, 0.0], [4.0, 9.0]) == 0.0
        assert movement_weight([1.5, 1.0], [2.0, 2.0]) == pytest.approx(5.0)


def test_lyapunov_clips_negative_weights():
    assert lyapunov(np.array([-1.0, 2.0]), np.array([10.0, 3.0])) == pytest.approx(0.5 * 2 * 9)


def test_predict_discharge_wrapper_modes():
    topo = make_obstruction()

    class V:
        def __init__(self, vid, lane, movement):
            self.id, self.lane, self.movement = vid, lane, movement

    vehicles = [V(1, 0, 0), V(2, 2, 1)]
    seq = predict_discharge(vehicles, topo, 0.0, earliest={1: 4.0, 2: 4.0})
    assert seq[1] == pytest.approx(4.0)
    assert seq[2] == pytest.approx(4.0 + CLEARANCE_S)

    plan = PhasePlan([(0, 0.0, 10.0), (1, 11.8, 21.8)])
    sig = predict_discharge(vehicles, topo, 0.0, earliest={1: 0.0, 2: 0.0}, signal=plan)
    assert sig[1] == pytest.approx(2.0)
    assert sig[2] == pytest.approx(13.8)


class TestControllerEntryPoints:
    """Spec-level controller functions over vehicle lists."""

    def _vehicle(self, vid, lane, movement, arrival, vot, connected=True):
        from prioritymarket.mechanism import Vehicle

        return Vehicle(id=vid, approach="EB", lane=lane, movement=movement,
                       arrival_time=arrival, vot_true=vot, connected=connected)

    def test_reservation_control_single_lane_is_fcfs(self):
        topo = make_obstruction()
        a = self._vehicle(1, 0, 0, 0.0, 5.0)
        b = self._vehicle(2, 0, 0, 1.0, 40.0)
        new = self._vehicle(3, 0, 0, 2.0, 99.0)
        from prioritymarket.control import reservation_control

        times = reservation_control([a, b], new, topo, 0.0,
                                    earliest={1: 5.0, 2: 6.0, 3: 7.0})
        assert times[1] < times[2] < times[3]

    def test_reservation_control_high_vot_first(self):
        topo = make_obstruction()
        low = self._vehicle(1, 0, 0, 0.0, 5.0)
        high = self._vehicle(2, 2, 1, 0.0, 40.0)
        from prioritymarket.control import reservation_control

        times = reservation_control([low], high, topo, 0.0,
                                    earliest={1: 5.0, 2: 5.0})
        assert times[2] < times[1]

    def test_fcfs_schedule_orders_by_arrival(self):
        topo = make_obstruction()
        vehicles = [
            self._vehicle(1, 0, 0, 3.0, 30.0),
            self._vehicle(2, 2, 1, 1.0, 1.0),
            self._vehicle(3, 1, 0, 2.0, 10.0),
        ]
        from prioritymarket.control import fcfs_schedule

        times = fcfs_schedule(vehicles, topo, 0.0,
                              earliest={1: 5.0, 2: 5.0, 3: 5.0})
        assert times[2] <= times[3] <= times[1]

    def test_min_delay_matches_brute_force_small(self):
        from prioritymarket.control import min_delay_schedule

        topo = make_obstruction()
        rng = np.random.default_rng(77)
        for _ in range(20):
            n = int(rng.integers(2, 7))
            vehicles, earliest = [], {}
            for vid in range(n):
                mov = int(rng.integers(2))
                vehicles.append(self._vehicle(vid, 2 * mov, mov, float(vid), 10.0))
                earliest[vid] = float(np.sort(rng.uniform(0, 15, n))[vid])
            times = min_delay_schedule(vehicles, topo, 0.0, earliest=earliest)
            got = sum(times.values())
            lane = [v.lane for v in sorted(vehicles, key=lambda v: v.id)]
            mov = [v.movement for v in sorted(vehicles, key=lambda v: v.id)]
            _, want = oracle_best_order(
                [earliest[v] for v in range(n)], lane, mov, [1.0] * n, topo.conflict
            )
            assert got == pytest.approx(want, abs=1e-9)

    def test_phase_switching_dominant_movement_first(self):
        from prioritymarket.control import phase_switching

        topo = make_obstruction()
        # Every waiting vehicle is on movement 1 (phase index 1).
        queues = {2: [1, 2, 3], 3: [4, 5]}
        earliest = {i: 0.0 for i in range(1, 6)}
        weights = {i: 1.0 for i in range(1, 6)}
        order = phase_switching(topo, 0, queues, 0.0, earliest=earliest,
                                weights=weights, incumbent=[0, 1])
        assert order[0] == 1

    def test_phase_switching_tie_retains_incumbent(self):
        from prioritymarket.control import phase_switching

        topo = make_obstruction()
        order = phase_switching(topo, 0, {}, 0.0, earliest={}, weights={},
                                incumbent=[1, 0])
        assert order == [1, 0]

    def test_phase_switching_weighted_gains_decide(self):
        from prioritymarket.control import phase_switching

        topo = make_obstruction()
        # One heavy vehicle on movement 1, two light ones on movement 0.
        queues = {0: [1, 2], 2: [3]}
        earliest = {1: 0.0, 2: 0.0, 3: 0.0}
        weights = {1: 0.1, 2: 0.1, 3: 5.0}
        order = phase_switching(topo, 0, queues, 0.0, earliest=earliest,
                                weights=weights, incumbent=[0, 1])
        assert order[0] == 1
