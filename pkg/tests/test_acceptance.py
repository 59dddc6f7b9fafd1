"""Acceptance gate: runs every verification campaign and prints one line each.

Each campaign is a self-checking scenario in ``smartstat.campaigns``; the
assertions here only relay the verdict. Run with ``-s`` to see the per-line
report as it happens:

    pytest tests/test_acceptance.py -v -s
"""

import pytest

from smartstat.campaigns import CAMPAIGNS, run_campaign

# Campaign keys in report order, one per acceptance criterion.
_ORDER = (
    "analytic_rc",
    "hysteresis_soundness",
    "parameter_recovery",
    "planner_optimality",
    "knob_tradeoff",
    "decode_exactness",
    "prediction_monotonicity",
    "fault_detection",
    "persistence",
)


def _check(name):
    result = run_campaign(name)
    verdict = "PASS" if result.passed else "FAIL"
    index = _ORDER.index(name) + 1
    print(f"criterion {index} {verdict}  {name:<24s} {result.detail}")
    assert result.passed, f"{name}: {result.detail}"


def test_campaign_order_is_complete():
    assert _ORDER == tuple(CAMPAIGNS)


def test_criterion_1_single_node_matches_analytic_response():
    _check("analytic_rc")


def test_criterion_2_thermostat_rules_hold_on_random_days():
    _check("hysteresis_soundness")


def test_criterion_3_fit_recovers_synthetic_parameters():
    _check("parameter_recovery")


def test_criterion_4_planner_matches_exhaustive_search():
    _check("planner_optimality")


def test_criterion_5_knob_trades_energy_for_comfort():
    _check("knob_tradeoff")


def test_criterion_6_decode_matches_brute_force_and_recovers_energy():
    _check("decode_exactness")


def test_criterion_7_predicted_energy_monotone_in_setpoint():
    _check("prediction_monotonicity")


def test_criterion_8_fleet_faults_caught_early_without_false_alarms():
    _check("fault_detection")


def test_criterion_9_persistence_round_trips_and_deduplicates():
    _check("persistence")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
