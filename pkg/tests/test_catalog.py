import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from crate_trust.catalog import (
    DEFAULT_COSTS,
    CostConfig,
    Polarity,
    check_consistency,
    conclusion,
    config_from_dict,
    config_to_dict,
    default_config,
    instantiate,
    load_config,
    parameterized_cost,
    round_half_up,
)
from crate_trust.errors import InvalidAnchors, InvalidConfig
from crate_trust.model import MIRI, SIDE_EFFECT_TOOL, Advisory, Audit, CrateRecord, ToolResult, graph_from_records
from crate_trust.solver import solve_horn
from crate_trust.verdict import build_query


def record(name="demo", version="1.2.0", **kw):
    kw.setdefault("tool_results", (ToolResult(SIDE_EFFECT_TOOL, side_effect_count=5),))
    return CrateRecord(name=name, version=version, **kw)


def ids(instances):
    return {i.provenance for i in instances}


def by_template(instances, template):
    return [i for i in instances if i.provenance == template]


@pytest.mark.parametrize("value,expected", [
    (1_000, 100),          # at the low anchor
    (500, 100),            # clamped below
    (10_000_000, 25),      # at the high anchor
    (10**9, 25),           # clamped above
    (100_000, 63),         # halfway in log space: 100 - 0.5 * 75 = 62.5, rounded up
    (1_057_000, 43),
    (2_290_000, 37),
    (21_544, 75),
])
def test_download_cost_curve(value, expected):
    assert parameterized_cost(value, 25, 100, 1_000, 10_000_000) == expected


@pytest.mark.parametrize("count,expected", [(19, 70), (14, 73), (7, 80), (50, 60), (1, 100)])
def test_side_effect_cost_curve(count, expected):
    assert parameterized_cost(count, 60, 100, 1, 50) == expected


def test_increasing_direction_mirrors_curve():
    assert parameterized_cost(10, 0, 100, 1, 100, "increasing") == 50
    assert parameterized_cost(1, 0, 100, 1, 100, "increasing") == 0
    assert parameterized_cost(100, 0, 100, 1, 100, "increasing") == 100


@pytest.mark.parametrize("anchors", [(0, 10), (10, 10), (10, 1)])
def test_bad_anchors_are_rejected(anchors):
    with pytest.raises(InvalidAnchors):
        parameterized_cost(5, 25, 100, *anchors)


@given(st.floats(0, 1e9, allow_nan=False), st.floats(0, 1e9, allow_nan=False))
def test_cost_curve_is_monotone(x, y):
    lo, hi = sorted((x, y))
    assert parameterized_cost(lo, 25, 100, 1e3, 1e7) >= parameterized_cost(hi, 25, 100, 1e3, 1e7)


def test_round_half_up():
    assert [round_half_up(x) for x in (0.5, 1.5, 2.5, 2.49)] == [1, 2, 3, 2]


def test_default_config_is_consistent():
    assert check_consistency(default_config()) == []


def test_config_round_trip(tmp_path):
    cfg = config_from_dict({"trusted_authors": ["alice"], "costs": {"trusted_author": 6, "downloads": [20, 90]}})
    again = config_from_dict(json.loads(json.dumps(config_to_dict(cfg))))
    assert again.trusted_authors == {"alice"}
    assert again.costs == cfg.costs
    path = tmp_path / "a.json"
    path.write_text(json.dumps(config_to_dict(cfg)))
    assert load_config(path).cost("downloads") == (20, 90)


@pytest.mark.parametrize("data,message", [
    ({"costs": {"audit_passed": 150}}, "exceeds the base cost"),
    ({"costs": {"audit_passed": -1}}, "negative"),
    ({"costs": {"downloads": [90, 20]}}, "low < high"),
    ({"costs": {"downloads": 30}}, "range"),
    ({"costs": {"nonsense": 3}}, "unknown template"),
    ({"anchors": {"downloads": [100, 10]}}, "anchors"),
    ({"trusted_authors": []}, "trusted_authors is empty"),
])
def test_inconsistent_configs_list_violations(data, message):
    with pytest.raises(InvalidConfig) as err:
        instantiate(record(), None, config_from_dict(data), Polarity.TRUST)
    assert any(message in v for v in err.value.violations)


def test_base_assumptions_always_present():
    cfg = default_config().without(*DEFAULT_COSTS)
    trust = instantiate(record(), None, cfg, Polarity.TRUST)
    distrust = instantiate(record(), None, cfg, Polarity.DISTRUST)
    assert [i.cost for i in trust] == [100] and [i.cost for i in distrust] == [100]
    assert trust[0].encoding == conclusion(("demo", "1.2.0"), Polarity.TRUST)


def test_reputation_templates():
    rec = record(downloads=2_290_000, stars=400, forks=100, authors=("alice",))
    cfg = config_from_dict({"trusted_authors": ["alice"]})
    out = instantiate(rec, None, cfg, Polarity.TRUST)
    assert ids(out) == {"crate_safe", "downloads", "stars_forks", "trusted_author"}
    assert by_template(out, "downloads")[0].cost == 37
    assert by_template(out, "stars_forks")[0].cost == round_half_up(100 - 80 * (math.log10(500) - 1) / 3)


def test_metrics_below_low_anchor_emit_nothing():
    rec = record(downloads=171, stars=3, forks=2)
    assert ids(instantiate(rec, None, default_config(), Polarity.TRUST)) == {"crate_safe"}


def test_audits_only_count_from_trusted_organizations():
    current = Audit("google", "safe-to-deploy", "1.2.0")
    stranger = Audit("someone", "safe-to-deploy", "1.2.0")
    assert ids(instantiate(record(audits=(current,)), None, default_config(), Polarity.TRUST)) >= {"audit_passed"}
    assert "audit_passed" not in ids(instantiate(record(audits=(stranger,)), None, default_config(), Polarity.TRUST))


def test_past_audit_applies_only_without_current_audit():
    past = Audit("mozilla", "safe-to-deploy", "1.0.0..1.1.0")
    failed = Audit("mozilla", "safe-to-deploy", "1.1.5", passed=False)
    out = instantiate(record(audits=(past, failed)), None, default_config(), Polarity.TRUST)
    assert by_template(out, "past_audit_passed")[0].cost == 20
    both = instantiate(record(audits=(past, Audit("google", "x", "1.2.0"))), None, default_config(), Polarity.TRUST)
    assert "past_audit_passed" not in ids(both)


def test_distrust_templates():
    rec = record(
        advisories=(Advisory("RUSTSEC-1", "high"), Advisory("RUSTSEC-2", "critical"),
                    Advisory("RUSTSEC-3", "low", patched_in_queried_version=True)),
        tool_results=(ToolResult(SIDE_EFFECT_TOOL, side_effect_count=19), ToolResult(MIRI, flagged=True)),
    )
    out = instantiate(rec, None, default_config(), Polarity.DISTRUST)
    costs = {i.provenance: i.cost for i in out}
    assert costs == {"crate_unsafe": 100, "rustsec_high": 20, "rustsec_critical": 5, "rustsec_patched": 90,
                     "miri_flagged": 30, "side_effects": 70}


def test_miri_threshold():
    rec = record(tool_results=(ToolResult(MIRI, flagged=True),))
    cfg = CostConfig(miri_flag_threshold=2)
    assert "miri_flagged" not in ids(instantiate(rec, None, cfg, Polarity.DISTRUST))


def test_composition_needs_observed_zero_side_effects():
    dep = record("dep", "1.0.0", downloads=10_000_000)
    clean = record(dependencies=(("dep", "=1.0.0"),), tool_results=(ToolResult(SIDE_EFFECT_TOOL, side_effect_count=0),))
    graph = graph_from_records([clean, dep], clean.key)
    out = instantiate(clean, graph, default_config(), Polarity.TRUST)
    assert by_template(out, "no_side_effects_safe_deps")[-1].cost == 10
    # 10 for the rule plus 25 for the dependency's downloads
    assert solve_horn(build_query(graph, default_config(), Polarity.TRUST)).min_cost == 35

    unknown = record(tool_results=())
    assert "no_side_effects_safe_deps" not in ids(instantiate(unknown, None, default_config(), Polarity.TRUST))


def test_unsafe_dependency_propagates_distrust():
    bad = record("bad", "0.1.0", advisories=(Advisory("RUSTSEC-9", "critical"),))
    top = record(dependencies=(("bad", "0.1.0"),))
    graph = graph_from_records([top, bad], top.key)
    assert solve_horn(build_query(graph, default_config(), Polarity.DISTRUST)).min_cost == 15
