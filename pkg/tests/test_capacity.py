from __future__ import annotations

import pytest

from aitrail.capacity import load_estimate
from aitrail.errors import BadInput

REFERENCE_TPS = 15_500_000
PLATFORMS = [("deepseek", 22_000_000), ("openai", 120_000_000)]


def test_reproduces_published_demand_figures():
    estimate = load_estimate(PLATFORMS, per_capita=100, reference_tps=REFERENCE_TPS)
    by_name = {p.name: p for p in estimate.per_platform}
    assert by_name["deepseek"].daily_requests == 2_200_000_000
    assert by_name["openai"].daily_requests == 12_000_000_000
    assert by_name["deepseek"].required_tps == 25_463
    assert by_name["openai"].required_tps == 138_889
    assert estimate.required_tps_range == (25_463, 138_889)


def test_redundancy_bracket_floors_to_tens():
    estimate = load_estimate(PLATFORMS, per_capita=100, reference_tps=REFERENCE_TPS)
    by_name = {p.name: p for p in estimate.per_platform}
    assert round(by_name["deepseek"].redundancy, 1) == 608.7
    assert round(by_name["openai"].redundancy, 1) == 111.6
    assert by_name["deepseek"].redundancy_reported == 600
    assert by_name["openai"].redundancy_reported == 110
    assert estimate.redundancy_reported_range == (110, 600)


def test_unit_case():
    estimate = load_estimate([("one", 86_400)], per_capita=1, reference_tps=10)
    platform = estimate.per_platform[0]
    assert platform.required_tps == 1
    assert platform.redundancy == 10.0


def test_requests_are_users_times_per_capita():
    estimate = load_estimate([("x", 7)], per_capita=3, reference_tps=1)
    assert estimate.per_platform[0].daily_requests == 21


def test_bad_inputs_rejected():
    with pytest.raises(BadInput):
        load_estimate([], per_capita=100, reference_tps=1)
    with pytest.raises(BadInput):
        load_estimate([("x", 0)], per_capita=100, reference_tps=1)
    with pytest.raises(BadInput):
        load_estimate([("x", 5)], per_capita=0, reference_tps=1)
    with pytest.raises(BadInput):
        load_estimate([("x", 5)], per_capita=1, reference_tps=-2)


def test_json_shape():
    estimate = load_estimate(PLATFORMS, per_capita=100, reference_tps=REFERENCE_TPS)
    obj = estimate.to_json_obj()
    assert obj["requiredTpsRange"] == [25_463, 138_889]
    assert obj["redundancyReportedRange"] == [110, 600]
    assert len(obj["perPlatform"]) == 2
