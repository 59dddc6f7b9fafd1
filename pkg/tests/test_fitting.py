import numpy as np
import pytest

from smartstat import benchmarks as bench
from smartstat.errors import (
    CoverageError,
    IllConditioned,
    InvalidParameter,
    MissingDrive,
)
from smartstat.fitting import (
    COOLING_PARAM,
    FitOptions,
    ObservationRecord,
    ObservationSeries,
    ParamBound,
    ParamSpec,
    default_param_spec,
    emulated_flags,
    fit_params,
    is_expired,
    network_from_params,
    objective,
    refit,
    refit_cooling_power,
    residual_series,
)
from smartstat.thermal import ZonePreset

P3 = ZonePreset.THREE_REGION
P1 = ZonePreset.SINGLE_ZONE


def truth_params(preset=P3, q=3500.0):
    p = bench.benchmark_params(preset)
    p[COOLING_PARAM] = q
    return p


@pytest.fixture(scope="module")
def noiseless_obs():
    return bench.synthesize_observations(P3, obs_sigma_c=0.0, seed=0)


@pytest.fixture(scope="module")
def noisy_obs():
    return bench.synthesize_observations(P3, obs_sigma_c=0.05, seed=5)


class TestObjective:
    def test_generating_params_score_zero_on_noiseless_trace(self, noiseless_obs):
        assert objective(truth_params(), P3, noiseless_obs) <= 1e-6

    def test_perturbed_params_score_strictly_worse(self, noiseless_obs):
        base = objective(truth_params(), P3, noiseless_obs)
        bad = truth_params()
        bad["r_wall_ambient"] *= 2.0
        assert objective(bad, P3, noiseless_obs) > base

    def test_empty_observations_rejected(self):
        with pytest.raises(CoverageError):
            objective(truth_params(), P3, ObservationSeries([]))

    def test_missing_outdoor_rejected(self):
        recs = [
            ObservationRecord(60.0 * i, {"hir": 25.0 + i * 0.1}, None)
            for i in range(60)
        ]
        with pytest.raises(MissingDrive):
            objective(truth_params(), P3, ObservationSeries(recs))

    def test_gap_in_observations_rejected(self):
        recs = [
            ObservationRecord(t, {"hir": 25.0}, 30.0)
            for t in [0.0, 60.0, 7200.0, 7260.0]
        ]
        with pytest.raises(CoverageError):
            objective(truth_params(), P3, ObservationSeries(recs))

    def test_door_open_samples_are_excluded(self, noiseless_obs):
        # corrupt the temps wherever the door is open; score must not move
        spoiled = []
        for i, r in enumerate(noiseless_obs):
            if 500 <= i < 700:
                temps = {z: v + 5.0 for z, v in r.sensed_temps.items()}
                spoiled.append(
                    ObservationRecord(
                        r.timestamp, temps, r.outdoor_temp, r.set_temp,
                        door_open=True, compressor_on=r.compressor_on,
                    )
                )
            else:
                spoiled.append(r)
        base = objective(truth_params(), P3, noiseless_obs)
        with_door = objective(truth_params(), P3, ObservationSeries(spoiled))
        assert with_door == pytest.approx(base, abs=1e-9)


class TestEmulatedFlags:
    def test_reconstructs_true_flags_from_noiseless_temps(self):
        obs_with = bench.synthesize_observations(P3, obs_sigma_c=0.0, seed=0)
        obs_without = ObservationSeries(
            [
                ObservationRecord(
                    r.timestamp, r.sensed_temps, r.outdoor_temp, r.set_temp,
                    r.door_open, compressor_on=None,
                )
                for r in obs_with
            ]
        )
        grid_t = obs_with.to_grid(60.0)
        grid_e = obs_without.to_grid(60.0)
        truth = emulated_flags(grid_t, "hir")
        guessed = emulated_flags(grid_e, "hir")
        assert (guessed == truth).all()


class TestFitParams:
    def test_noiseless_oracle_recovery(self, noiseless_obs):
        fit = fit_params(
            P3, noiseless_obs, rated_cooling_power=3500.0, opts=FitOptions(seed=0)
        )
        assert fit.rmse <= 0.01
        # truth scores exactly 0 here, so "no worse than truth" means
        # numerically zero (1e-9 degC^2 is rmse 3e-5 degC)
        assert fit.objective_value <= objective(truth_params(), P3, noiseless_obs) + 1e-9

    def test_noisy_recovery_within_fifteen_percent(self, noisy_obs):
        fit = fit_params(
            P3, noisy_obs, rated_cooling_power=3500.0, opts=FitOptions(seed=5)
        )
        assert fit.rmse <= 0.1
        for name, value in fit.params.items():
            true = bench.THREE_REGION_PARAMS[name]
            assert abs(value - true) / true <= 0.15, name

    def test_every_parameter_strictly_inside_bounds(self, noisy_obs):
        spec = default_param_spec(P3)
        fit = fit_params(
            P3, noisy_obs, spec, rated_cooling_power=3500.0, opts=FitOptions(seed=5)
        )
        for e in spec.entries:
            assert e.lower < fit.params[e.name] < e.upper

    def test_more_starts_never_score_worse(self, noisy_obs):
        j = {
            k: fit_params(
                P3, noisy_obs, rated_cooling_power=3500.0,
                opts=FitOptions(multi_start=k, seed=0),
            ).objective_value
            for k in (1, 4)
        }
        assert j[4] <= j[1] + 1e-15

    def test_constant_trace_is_ill_conditioned(self):
        recs = [
            ObservationRecord(60.0 * i, {"hir": 25.0, "mir": 25.0, "lir": 25.0}, 25.0)
            for i in range(12 * 60)
        ]
        with pytest.raises(IllConditioned):
            fit_params(P3, ObservationSeries(recs), rated_cooling_power=3500.0)

    def test_passive_drift_alone_is_enough_excitation(self):
        obs = bench.synthesize_observations(
            P3, set_temp=None, init_temp=24.0, outdoor_mean=34.0,
            duration_s=12 * 3600.0, obs_sigma_c=0.02, seed=2,
        )
        fit = fit_params(
            P3, obs, rated_cooling_power=3500.0,
            opts=FitOptions(multi_start=2, seed=2),
        )
        assert np.isfinite(fit.rmse)

    def test_short_window_is_ill_conditioned(self):
        obs = bench.synthesize_observations(P3, duration_s=3 * 3600.0, seed=0)
        with pytest.raises(IllConditioned):
            fit_params(P3, obs, rated_cooling_power=3500.0)

    def test_joint_cooling_power_fit_lands_in_range(self):
        obs = bench.synthesize_observations(P3, obs_sigma_c=0.05, seed=3)
        fit = fit_params(P3, obs, opts=FitOptions(seed=3))
        assert 500.0 < fit.cooling_power < 10000.0
        assert abs(fit.cooling_power - 3500.0) / 3500.0 < 0.25
        assert fit.rmse <= 0.1


class TestRefit:
    def test_steady_room_refit_accepted(self):
        obs1 = bench.synthesize_observations(P3, t0=0.0, obs_sigma_c=0.05, seed=1)
        fit1 = fit_params(
            P3, obs1, rated_cooling_power=3500.0, opts=FitOptions(seed=1),
            now=obs1.end,
        )
        obs2 = bench.synthesize_observations(
            P3, t0=48 * 3600.0, obs_sigma_c=0.05, seed=2
        )
        out = refit(fit1, P3, obs2, rated_cooling_power=3500.0, now=obs2.end)
        assert out.accepted
        for name, value in out.result.params.items():
            true = bench.THREE_REGION_PARAMS[name]
            assert abs(value - true) / true <= 0.15, name

    def test_short_window_keeps_previous_with_flag(self):
        obs = bench.synthesize_observations(P3, obs_sigma_c=0.05, seed=1)
        fit1 = fit_params(P3, obs, rated_cooling_power=3500.0, opts=FitOptions(seed=1))
        short = obs.window(obs.start, obs.start + 3 * 3600.0)
        out = refit(fit1, P3, short, rated_cooling_power=3500.0)
        assert not out.accepted
        assert out.result is fit1

    def test_never_publishes_a_worse_window_score(self):
        obs = bench.synthesize_observations(P3, obs_sigma_c=0.05, seed=4)
        incumbent = fit_params(
            P3, obs, rated_cooling_power=3500.0, opts=FitOptions(seed=4)
        )
        # a crippled candidate search cannot beat the incumbent on its window
        out = refit(
            incumbent, P3, obs, rated_cooling_power=3500.0,
            opts=FitOptions(multi_start=1, max_iter=1, seed=99),
        )
        prev_all = dict(incumbent.params)
        prev_all[COOLING_PARAM] = incumbent.cooling_power
        prev_score = objective(prev_all, P3, obs)
        assert out.result.objective_value <= prev_score + 1e-15

    def test_tracks_a_changed_envelope_within_daily_refits(self):
        obs1 = bench.synthesize_observations(P3, t0=0.0, obs_sigma_c=0.05, seed=1)
        cur = fit_params(
            P3, obs1, rated_cooling_power=3500.0, opts=FitOptions(seed=1),
            now=obs1.end,
        )
        changed = dict(bench.THREE_REGION_PARAMS)
        changed["r_wall_ambient"] = 0.01  # window left open: envelope leaks 2x
        leaky = bench.three_region_network(changed)
        for day in range(2):
            t0 = (48 + 24 * day) * 3600.0
            obsd = bench.synthesize_observations(
                P3, t0=t0, duration_s=24 * 3600.0, obs_sigma_c=0.05,
                seed=10 + day, network=leaky,
            )
            cur = refit(
                cur, P3, obsd, rated_cooling_power=3500.0,
                opts=FitOptions(seed=day), now=obsd.end,
            ).result
        assert abs(cur.params["r_wall_ambient"] - 0.01) / 0.01 <= 0.2


class TestResiduals:
    def test_noiseless_self_consistency(self, noiseless_obs):
        res = residual_series(truth_params(), P3, noiseless_obs)
        assert res
        assert max(abs(r[2]) for r in res) <= 1e-6

    def test_degraded_cooling_shows_positive_on_residuals(self):
        weak_ac = bench.ACUnit(
            rated_cooling_power=2800.0, rated_electrical_power=1200.0, fan_power=50.0
        )
        obs = bench.synthesize_observations(P3, obs_sigma_c=0.0, seed=0, ac=weak_ac)
        res = residual_series(truth_params(q=3500.0), P3, obs)
        grid = obs.to_grid(60.0)
        flags = emulated_flags(grid, "hir")
        on_times = {float(t) for t, f in zip(grid.times[:-1], flags) if f == 1}
        on_res = [r[2] for r in res if r[0] in on_times and r[1] == "hir"]
        assert np.mean(on_res) > 0.01

    def test_passive_night_residuals_match_noise_floor(self):
        obs = bench.synthesize_observations(
            P3, set_temp=None, init_temp=28.0, duration_s=8 * 3600.0,
            obs_sigma_c=0.05, seed=6,
        )
        res = residual_series(truth_params(), P3, obs)
        assert abs(np.mean([r[2] for r in res])) <= 2 * 0.05


class TestCoolingPowerRefit:
    def test_recovers_degraded_capacity_with_frozen_rc(self):
        weak_ac = bench.ACUnit(
            rated_cooling_power=2800.0, rated_electrical_power=1200.0, fan_power=50.0
        )
        obs = bench.synthesize_observations(
            P3, duration_s=24 * 3600.0, obs_sigma_c=0.05, seed=7, ac=weak_ac
        )
        q = refit_cooling_power(bench.THREE_REGION_PARAMS, P3, obs)
        assert abs(q - 2800.0) / 2800.0 < 0.1

    def test_idle_day_cannot_estimate_capacity(self):
        obs = bench.synthesize_observations(
            P3, set_temp=None, init_temp=26.0, duration_s=24 * 3600.0, seed=8
        )
        with pytest.raises(IllConditioned):
            refit_cooling_power(bench.THREE_REGION_PARAMS, P3, obs)


class TestParamSpec:
    def test_log_transform_roundtrip(self):
        spec = default_param_spec(P1, fit_cooling=True)
        values = {e.name: e.initial for e in spec.entries}
        back = spec.from_internal(spec.to_internal(values))
        for k, v in values.items():
            assert back[k] == pytest.approx(v, rel=1e-12)

    def test_bad_bounds_rejected(self):
        with pytest.raises(InvalidParameter):
            ParamBound("c_room", 10.0, 5.0, 7.0)
        with pytest.raises(InvalidParameter):
            ParamBound("c_room", 1.0, 5.0, 9.0)

    def test_network_from_params_builds_presets(self):
        net = network_from_params(P1, bench.SINGLE_ZONE_PARAMS)
        assert net.zone_ids == ("room", "wall")
        with pytest.raises(InvalidParameter):
            network_from_params(P1, {"what_is_this": 1.0})


class TestStaleness:
    def test_expiry_boundary(self):
        obs = bench.synthesize_observations(
            P3, duration_s=7 * 3600.0, obs_sigma_c=0.0, seed=0
        )
        fit = fit_params(
            P3, obs, rated_cooling_power=3500.0,
            opts=FitOptions(multi_start=1, seed=0), now=0.0,
        )
        assert not is_expired(fit, 13 * 86400.0)
        assert is_expired(fit, 15 * 86400.0)
