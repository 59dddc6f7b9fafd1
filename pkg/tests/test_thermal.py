import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smartstat import benchmarks as bench
from smartstat.errors import (
    CoverageError,
    InvalidParameter,
    InvalidTopology,
    StateOutOfRange,
    UnknownZone,
    UnstableStep,
)
from smartstat.series import TimeSeries
from smartstat.thermal import (
    ACUnit,
    CompressorState,
    HysteresisConfig,
    NoiseModel,
    RCNetwork,
    ThermalState,
    ZonePreset,
    build_room_model,
    initial_compressor,
    simulate,
    stable_dt,
    step,
    thermostat_transition,
)


def one_zone_network(c=1e5, r=0.01):
    return RCNetwork(
        zones=(("node", c),),
        boundaries=("ambient",),
        edges=(("node", "ambient", r),),
        ac_coupling={"node": 1.0},
    )


def make_ac(**kw):
    kw.setdefault("rated_cooling_power", 3500.0)
    kw.setdefault("rated_electrical_power", 1200.0)
    kw.setdefault("fan_power", 50.0)
    return ACUnit(**kw)


class TestNetworkValidation:
    def test_three_region_preset_builds_expected_edges(self):
        net = bench.three_region_network()
        pairs = {tuple(sorted((a, b))) for a, b, _ in net.edges}
        assert ("hir", "mir") in pairs
        assert ("lir", "mir") in pairs
        assert ("hir", "lir") not in pairs
        assert all(tuple(sorted((z, "wall"))) in pairs for z in ("hir", "mir", "lir"))
        assert ("ambient", "wall") in pairs
        assert len(pairs) == 6

    def test_single_zone_preset_has_two_capacitive_nodes(self):
        net = bench.single_zone_network()
        assert net.zone_ids == ("room", "wall")
        assert net.boundaries == ("ambient",)

    def test_fractions_must_sum_to_one(self):
        caps = {z: v for z, v in zip(("hir", "mir", "lir", "wall"), (2e5, 4e5, 2e5, 8e5))}
        res = {p: 0.03 for p in ZonePreset.THREE_REGION.edge_pairs}
        with pytest.raises(InvalidTopology):
            build_room_model(
                ZonePreset.THREE_REGION, caps, res,
                {"hir": 0.5, "mir": 0.5, "lir": 0.5},
            )

    def test_primary_zone_must_get_largest_fraction(self):
        caps = {"room": 6e5, "wall": 8e5}
        res = {("room", "wall"): 0.004, ("wall", "ambient"): 0.004}
        with pytest.raises(InvalidTopology):
            build_room_model(
                ZonePreset.SINGLE_ZONE, caps, res, {"room": 0.2, "wall": 0.8}
            )

    def test_forbidden_hir_lir_edge_rejected(self):
        caps = dict(zip(("hir", "mir", "lir", "wall"), (2e5, 4e5, 2e5, 8e5)))
        res = {p: 0.03 for p in ZonePreset.THREE_REGION.edge_pairs}
        res[("hir", "lir")] = 0.03
        with pytest.raises(InvalidTopology):
            build_room_model(
                ZonePreset.THREE_REGION, caps, res,
                ZonePreset.THREE_REGION.default_ac_fractions,
            )

    def test_nonpositive_capacitance_rejected(self):
        with pytest.raises(InvalidParameter):
            one_zone_network(c=0.0)

    def test_nonpositive_resistance_rejected(self):
        with pytest.raises(InvalidParameter):
            one_zone_network(r=-0.01)

    def test_disconnected_network_rejected(self):
        with pytest.raises(InvalidTopology):
            RCNetwork(
                zones=(("a", 1e5), ("b", 1e5)),
                boundaries=("ambient",),
                edges=(("a", "ambient", 0.01),),
                ac_coupling={"a": 1.0},
            )

    def test_self_edge_rejected(self):
        with pytest.raises(InvalidTopology):
            RCNetwork(
                zones=(("a", 1e5),),
                boundaries=("ambient",),
                edges=(("a", "a", 0.01),),
                ac_coupling={"a": 1.0},
            )

    def test_duplicate_edge_rejected(self):
        with pytest.raises(InvalidTopology):
            RCNetwork(
                zones=(("a", 1e5),),
                boundaries=("ambient",),
                edges=(("a", "ambient", 0.01), ("ambient", "a", 0.02)),
                ac_coupling={"a": 1.0},
            )

    def test_coupling_to_unknown_zone_rejected(self):
        with pytest.raises(InvalidTopology):
            RCNetwork(
                zones=(("a", 1e5),),
                boundaries=("ambient",),
                edges=(("a", "ambient", 0.01),),
                ac_coupling={"ghost": 1.0},
            )


class TestStableDt:
    def test_single_edge_formula(self):
        # 0.5 * 1e5 / (1 / 0.01) = 500 s, by hand
        assert stable_dt(one_zone_network()) == pytest.approx(500.0)

    def test_second_edge_halves_the_bound(self):
        net = RCNetwork(
            zones=(("node", 1e5),),
            boundaries=("ambient", "ground"),
            edges=(("node", "ambient", 0.01), ("node", "ground", 0.01)),
            ac_coupling={"node": 1.0},
        )
        assert stable_dt(net) == pytest.approx(250.0)

    def test_benchmark_admits_the_default_minute_step(self):
        assert stable_dt(bench.three_region_network()) >= 60.0
        assert stable_dt(bench.single_zone_network()) >= 60.0


class TestStep:
    def test_equilibrium_is_a_fixed_point(self):
        net = bench.three_region_network()
        state = bench.uniform_state(net, 0.0, 25.0)
        out = step(net, state, 25.0, False, make_ac(), dt=60.0)
        for z in net.zone_ids:
            assert out.temperatures[z] == 25.0

    def test_one_step_cooling_by_hand(self):
        # q = (30-30)/0.01 - 1000 W; dT = 60 * (-1000) / 1e5 = -0.6
        net = one_zone_network(c=1e5, r=0.01)
        state = ThermalState(0.0, {"node": 30.0})
        ac = make_ac(rated_cooling_power=1000.0)
        out = step(net, state, 30.0, True, ac, dt=60.0)
        assert out.temperatures["node"] == pytest.approx(29.4)
        assert out.time == 60.0

    def test_rejects_unstable_dt(self):
        net = one_zone_network()
        state = ThermalState(0.0, {"node": 25.0})
        with pytest.raises(UnstableStep):
            step(net, state, 25.0, False, make_ac(), dt=2 * stable_dt(net))

    def test_detects_runaway_state(self):
        net = bench.single_zone_network()
        state = bench.uniform_state(net, 0.0, 25.0)
        ac = make_ac(rated_cooling_power=20000.0)
        with pytest.raises(StateOutOfRange):
            for _ in range(400):
                state = step(net, state, 25.0, True, ac, dt=60.0)

    def test_noise_enters_as_power(self):
        net = one_zone_network(c=1e5, r=0.01)
        state = ThermalState(0.0, {"node": 25.0})
        out = step(net, state, 25.0, False, make_ac(), noise_w=[500.0], dt=60.0)
        assert out.temperatures["node"] == pytest.approx(25.0 + 60 * 500 / 1e5)

    def test_state_missing_a_zone_fails(self):
        net = bench.single_zone_network()
        with pytest.raises(UnknownZone):
            step(net, ThermalState(0.0, {"room": 25.0}), 25.0, False, make_ac())


class TestThermostat:
    CFG = HysteresisConfig(delta_high=0.5, delta_low=0.5, sensing_zone="room")

    def test_turns_on_above_upper_threshold(self):
        prev = CompressorState(on=False, since=-1000.0)
        out = thermostat_transition(prev, 27.6, 27.0, self.CFG, make_ac(), 0.0)
        assert out.on and out.since == 0.0

    def test_turns_off_below_lower_threshold(self):
        prev = CompressorState(on=True, since=-1000.0)
        out = thermostat_transition(prev, 26.4, 27.0, self.CFG, make_ac(), 0.0)
        assert not out.on

    def test_holds_inside_the_band(self):
        prev = CompressorState(on=True, since=-1000.0)
        out = thermostat_transition(prev, 27.0, 27.0, self.CFG, make_ac(), 0.0)
        assert out.on and out.since == -1000.0

    def test_min_off_defers_turn_on(self):
        ac = make_ac(min_off_s=180.0)
        prev = CompressorState(on=False, since=0.0)
        mid = thermostat_transition(prev, 30.0, 25.0, self.CFG, ac, 100.0)
        assert not mid.on
        late = thermostat_transition(mid, 30.0, 25.0, self.CFG, ac, 200.0)
        assert late.on

    def test_min_on_defers_turn_off(self):
        ac = make_ac(min_on_s=180.0)
        prev = CompressorState(on=True, since=0.0)
        mid = thermostat_transition(prev, 20.0, 25.0, self.CFG, ac, 100.0)
        assert mid.on
        late = thermostat_transition(mid, 20.0, 25.0, self.CFG, ac, 240.0)
        assert not late.on

    def test_cumulative_on_accrues_without_double_counting(self):
        ac = make_ac()
        s = CompressorState(on=True, since=0.0)
        s = thermostat_transition(s, 27.0, 27.0, self.CFG, ac, 100.0)
        assert s.cumulative_on == pytest.approx(100.0)
        s = thermostat_transition(s, 27.0, 27.0, self.CFG, ac, 250.0)
        assert s.cumulative_on == pytest.approx(250.0)
        s = thermostat_transition(s, 20.0, 27.0, self.CFG, ac, 400.0)
        assert not s.on
        assert s.cumulative_on == pytest.approx(400.0)
        s = thermostat_transition(s, 20.0, 27.0, self.CFG, ac, 900.0)
        assert s.cumulative_on == pytest.approx(400.0)

    def test_zero_width_band_rejected(self):
        with pytest.raises(InvalidParameter):
            HysteresisConfig(delta_high=0.0, delta_low=0.0)


class TestSimulate:
    def test_analytic_exponential_within_one_percent_at_tau(self):
        # T(t) = amb + (T0 - amb) e^{-t/RC}; RC = 1000 s, dt = RC/100
        net = one_zone_network(c=1e5, r=0.01)
        rc = 1e5 * 0.01
        dt = rc / 100
        tr = simulate(
            net,
            ThermalState(0.0, {"node": 40.0}),
            20.0,
            None,
            make_ac(),
            HysteresisConfig(sensing_zone="node"),
            None,
            horizon_s=rc,
            dt=dt,
        )
        exact = 20.0 + 20.0 * math.exp(-1.0)
        sim = tr.zone("node")[-1]
        assert abs((sim - 20.0) - (exact - 20.0)) / (exact - 20.0) < 0.01

    def test_idle_schedule_never_runs_compressor(self):
        net = bench.single_zone_network()
        tr = simulate(
            net,
            bench.uniform_state(net, 0.0, 24.0),
            30.0,
            None,
            make_ac(),
            bench.default_hysteresis(),
            None,
            horizon_s=6 * 3600,
        )
        assert tr.compressor.sum() == 0
        room = tr.zone("room")
        assert abs(room[-1] - 30.0) < abs(room[0] - 30.0)
        assert np.isnan(tr.set_temps).all()

    def test_high_setpoint_never_triggers(self):
        net = bench.single_zone_network()
        tr = simulate(
            net,
            bench.uniform_state(net, 0.0, 24.0),
            30.0,
            40.0,
            make_ac(),
            bench.default_hysteresis(),
            None,
            horizon_s=6 * 3600,
        )
        assert tr.compressor.sum() == 0

    def test_sensed_zone_stays_in_band_without_lockouts(self):
        # with min_on = min_off = 0 the only excursion is one Euler step
        net = bench.three_region_network()
        ac = make_ac(min_on_s=0.0, min_off_s=0.0)
        tr = simulate(
            net,
            bench.uniform_state(net, 0.0, 30.0),
            35.0,
            25.0,
            ac,
            bench.default_hysteresis(),
            None,
            horizon_s=4 * 3600,
        )
        hir = tr.zone("hir")
        # one-step excursion bound: full cooling into hir plus conduction
        eps = 60.0 * (3500.0 * 0.7 + 1000.0) / 2e5
        settled = hir[np.flatnonzero(hir <= 25.5)[0]:]
        assert settled.min() >= 25.0 - 0.5 - eps
        assert settled.max() <= 25.0 + 0.5 + eps

    def test_lockouts_bound_the_overshoot(self):
        net = bench.three_region_network()
        ac = make_ac()
        tr = simulate(
            net,
            bench.uniform_state(net, 0.0, 30.0),
            35.0,
            25.0,
            ac,
            bench.default_hysteresis(),
            None,
            horizon_s=4 * 3600,
        )
        hir = tr.zone("hir")
        # lockout can hold the compressor up to min_on past the threshold
        eps = (ac.min_on_s / 60.0 + 1.0) * 60.0 * (3500.0 * 0.7 + 1000.0) / 2e5
        settled = hir[np.flatnonzero(hir <= 25.5)[0]:]
        assert settled.min() >= 25.0 - 0.5 - eps

    def test_hysteresis_transitions_are_sound(self):
        net = bench.single_zone_network()
        ac = make_ac()
        cfg = bench.default_hysteresis()
        tr = simulate(
            net,
            bench.uniform_state(net, 0.0, 29.0),
            38.0,
            26.0,
            ac,
            cfg,
            NoiseModel(seed=7),
            horizon_s=24 * 3600,
        )
        room = tr.zone("room")
        flags = tr.compressor.astype(int)
        prev = 0
        last_change = None
        for s in range(tr.steps):
            if flags[s] != prev:
                if flags[s] == 1:
                    assert room[s] >= 26.0 + cfg.delta_high
                    if last_change is not None:
                        assert tr.times[s] - last_change >= ac.min_off_s
                else:
                    assert room[s] <= 26.0 - cfg.delta_low
                    if last_change is not None:
                        assert tr.times[s] - last_change >= ac.min_on_s
                last_change = tr.times[s]
                prev = flags[s]

    def test_monotone_cooling(self):
        net = bench.single_zone_network()
        forced = np.ones(120, dtype=np.int8)
        kw = dict(
            outdoor=35.0,
            schedule=None,
            cfg=bench.default_hysteresis(),
            noise_model=None,
            horizon_s=120 * 60.0,
            forced_compressor=forced,
        )
        init = bench.uniform_state(net, 0.0, 30.0)
        weak = simulate(net, init, ac=make_ac(rated_cooling_power=3000.0), **kw)
        strong = simulate(net, init, ac=make_ac(rated_cooling_power=3600.0), **kw)
        assert (strong.temps <= weak.temps + 1e-12).all()

    def test_identical_seeds_are_bit_identical(self):
        net = bench.three_region_network()
        args = (
            net,
            bench.uniform_state(net, 0.0, 29.0),
            34.0,
            26.0,
            make_ac(),
            bench.default_hysteresis(),
            NoiseModel(seed=42),
        )
        a = simulate(*args, horizon_s=12 * 3600)
        b = simulate(*args, horizon_s=12 * 3600)
        assert (a.temps == b.temps).all()
        assert (a.compressor == b.compressor).all()

    def test_step_replays_simulate_exactly(self):
        net = bench.three_region_network()
        ac = make_ac()
        noise = NoiseModel(seed=3).sample(30, len(net.zones), 60.0)
        tr = simulate(
            net,
            bench.uniform_state(net, 0.0, 29.0),
            34.0,
            26.0,
            ac,
            bench.default_hysteresis(),
            noise,
            horizon_s=30 * 60.0,
        )
        state = bench.uniform_state(net, 0.0, 29.0)
        for s in range(tr.steps):
            state = step(net, state, 34.0, bool(tr.compressor[s]), ac, noise[s], dt=60.0)
            assert state.array(net.zone_ids).tolist() == tr.temps[s + 1].tolist()

    def test_outdoor_series_must_cover_horizon(self):
        net = bench.single_zone_network()
        outdoor = TimeSeries([0.0, 3600.0], [30.0, 32.0])
        with pytest.raises(CoverageError):
            simulate(
                net,
                bench.uniform_state(net, 0.0, 25.0),
                outdoor,
                26.0,
                make_ac(),
                bench.default_hysteresis(),
                None,
                horizon_s=8 * 3600,
            )

    def test_trace_bookkeeping(self):
        net = bench.single_zone_network()
        tr = simulate(
            net,
            bench.uniform_state(net, 0.0, 29.0),
            38.0,
            26.0,
            make_ac(),
            bench.default_hysteresis(),
            None,
            horizon_s=3600.0,
        )
        assert len(tr.times) == 61
        assert tr.temps.shape == (61, 2)
        assert len(tr.compressor) == 60
        assert np.diff(tr.times).tolist() == [60.0] * 60
        assert tr.final_compressor.cumulative_on == pytest.approx(tr.on_seconds)
        assert tr.final_state.time == 3600.0

    def test_forced_flags_override_thermostat(self):
        net = bench.single_zone_network()
        forced = np.zeros(60, dtype=np.int8)
        forced[10:20] = 1
        tr = simulate(
            net,
            bench.uniform_state(net, 0.0, 35.0),
            38.0,
            20.0,  # thermostat alone would run continuously
            make_ac(),
            bench.default_hysteresis(),
            None,
            horizon_s=3600.0,
            forced_compressor=forced,
        )
        assert tr.compressor.astype(int).tolist() == forced.tolist()


class TestMaximumPrinciple:
    @given(
        temps=st.lists(
            st.floats(min_value=-10.0, max_value=45.0), min_size=4, max_size=4
        ),
        amb=st.floats(min_value=-10.0, max_value=45.0),
        dt_frac=st.floats(min_value=0.05, max_value=1.0),
    )
    @settings(max_examples=40, deadline=None)
    def test_passive_temps_stay_inside_the_envelope(self, temps, amb, dt_frac):
        net = bench.three_region_network()
        init = ThermalState(0.0, dict(zip(net.zone_ids, temps)))
        dt = dt_frac * stable_dt(net)
        tr = simulate(
            net,
            init,
            amb,
            None,
            make_ac(),
            bench.default_hysteresis(),
            None,
            horizon_s=50 * dt,
            dt=dt,
        )
        lo = min(min(temps), amb) - 1e-9
        hi = max(max(temps), amb) + 1e-9
        assert (tr.temps >= lo).all()
        assert (tr.temps <= hi).all()


class TestNoiseModel:
    def test_block_structure(self):
        noise = NoiseModel(sigma_w=50.0, block_s=900.0, seed=1).sample(30, 2, 60.0)
        assert noise.shape == (30, 2)
        # 15 min blocks at 1 min steps: rows constant within each block of 15
        assert (noise[:15] == noise[0]).all()
        assert (noise[15:30] == noise[15]).all()
        assert not (noise[0] == noise[15]).all()

    def test_seed_determinism(self):
        a = NoiseModel(seed=5).sample(100, 3, 60.0)
        b = NoiseModel(seed=5).sample(100, 3, 60.0)
        assert (a == b).all()

    def test_zero_sigma_is_silent(self):
        assert (NoiseModel(sigma_w=0.0).sample(10, 2, 60.0) == 0).all()
