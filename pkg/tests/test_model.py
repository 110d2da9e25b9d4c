import json
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crate_trust.errors import CyclicDependency, NetworkUnavailable, NotFound, ParseError, SchemaVersionMismatch
from crate_trust.model import (
    CACHE_ENV,
    MIRI,
    SIDE_EFFECT_TOOL,
    Advisory,
    Audit,
    CrateRecord,
    RecordCache,
    ToolResult,
    fetch_record,
    graph_from_records,
    load_record,
    merge_documents,
    pinned_version,
    store_record,
)

versions = st.tuples(st.integers(0, 30), st.integers(0, 30), st.integers(0, 30)).map(lambda t: "%d.%d.%d" % t)
idents = st.from_regex(r"[a-z][a-z0-9_-]{0,12}", fullmatch=True)

records = st.builds(
    CrateRecord,
    name=idents,
    version=versions,
    downloads=st.integers(0, 10**9),
    authors=st.lists(idents, max_size=3).map(tuple),
    stars=st.integers(0, 10**5),
    forks=st.integers(0, 10**4),
    dependencies=st.lists(st.tuples(idents, versions.map(lambda v: "=" + v)), max_size=4).map(tuple),
    audits=st.lists(st.builds(Audit, st.sampled_from(["google", "mozilla", "x"]), st.just("safe-to-deploy"),
                              versions, st.booleans()), max_size=2).map(tuple),
    tool_results=st.lists(
        st.one_of(
            st.builds(ToolResult, st.just(SIDE_EFFECT_TOOL), st.just(False), st.integers(0, 99)),
            st.builds(ToolResult, st.just(MIRI), st.booleans()),
        ),
        max_size=2,
    ).map(tuple),
    advisories=st.lists(
        st.builds(Advisory, st.from_regex(r"RUSTSEC-20\d\d-\d{4}", fullmatch=True),
                  st.sampled_from(["critical", "high", "medium", "low", "informational"]), st.booleans()),
        max_size=3, unique_by=lambda a: a.id,
    ).map(tuple),
)


def demo(name="demo", version="1.0.0", **kw):
    return CrateRecord(name=name, version=version, **kw)


@settings(max_examples=100, deadline=None)
@given(records)
def test_record_dict_round_trip(rec):
    assert CrateRecord.from_dict(json.loads(json.dumps(rec.to_dict()))) == rec


@settings(max_examples=50, deadline=None)
@given(records)
def test_cache_round_trip(tmp_path_factory, rec):
    root = tmp_path_factory.mktemp("cache")
    store_record(root, rec)
    assert load_record(root, rec.name, rec.version) == rec


def test_unknown_fields_are_ignored_and_newer_schema_rejected():
    data = demo().to_dict()
    data["future_field"] = 1
    data["audits"] = [{"organization": "google", "version": "1.0.0", "extra": True}]
    assert CrateRecord.from_dict(data).audits[0].organization == "google"
    data["schema"] = 99
    with pytest.raises(SchemaVersionMismatch):
        CrateRecord.from_dict(data)


@pytest.mark.parametrize("bad", [
    {"name": "x", "version": "not-a-version"},
    {"name": "", "version": "1.0.0"},
    {"name": "x", "version": "1.0.0", "downloads": -5},
    {"name": "x", "version": "1.0.0", "tool_results": [{"tool": "miri", "side_effect_count": 3}]},
    {"name": "x", "version": "1.0.0", "advisories": [{"id": "A", "severity": "spicy"}]},
    {"name": "x", "version": "1.0.0", "advisories": [{"id": "A"}, {"id": "A"}]},
    {"version": "1.0.0"},
])
def test_malformed_records_raise_parse_error(bad):
    with pytest.raises(ParseError):
        CrateRecord.from_dict(bad)


def test_audit_version_spans():
    exact = Audit("google", version="1.2.3")
    span = Audit("google", version="1.0.0..2.0.0")
    assert exact.covers("1.2.3") and not exact.covers("1.2.4")
    assert span.covers("1.9.9") and not span.covers("2.0.0")
    assert exact.precedes("1.3.0") and not exact.precedes("1.2.3")
    with pytest.raises(ParseError):
        Audit("google", version="2.0.0..1.0.0")


def test_side_effect_count_takes_the_maximum():
    rec = demo(tool_results=(ToolResult(SIDE_EFFECT_TOOL, side_effect_count=2),
                             ToolResult(SIDE_EFFECT_TOOL, side_effect_count=7), ToolResult(MIRI, flagged=True)))
    assert rec.side_effect_count == 7
    assert demo().side_effect_count is None


def test_pinned_versions():
    assert pinned_version("=1.2.3") == "1.2.3"
    assert pinned_version("^0.4.21") == "0.4.21"
    with pytest.raises(ParseError):
        pinned_version("^1.2")


def test_cache_misses_and_corruption(tmp_path):
    cache = RecordCache(tmp_path)
    assert cache.get("x", "1.0.0") is None
    with pytest.raises(NotFound):
        cache.load("x", "1.0.0")
    path = cache.path("x", "1.0.0")
    path.parent.mkdir(parents=True)
    path.write_text("{not json")
    with pytest.raises(ParseError):
        cache.load("x", "1.0.0")


def test_cache_versions_sort_semantically(tmp_path):
    cache = RecordCache(tmp_path)
    for v in ("1.10.0", "1.9.0", "1.2.0"):
        cache.store(demo(version=v))
    assert cache.versions("demo") == ["1.2.0", "1.9.0", "1.10.0"]
    assert cache.latest("demo") == "1.10.0"
    assert cache.latest("other") is None


def test_cache_writes_leave_no_temp_files(tmp_path):
    cache = RecordCache(tmp_path)
    threads = [threading.Thread(target=cache.store, args=(demo(downloads=i),)) for i in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert [p.name for p in (tmp_path / "demo").iterdir()] == ["1.0.0.json"]
    assert cache.load("demo", "1.0.0").downloads in range(16)


def test_default_cache_honours_environment(monkeypatch, tmp_path):
    monkeypatch.setenv(CACHE_ENV, str(tmp_path))
    assert RecordCache.default().root == tmp_path


class StubFetcher:
    def __init__(self, source, doc):
        self.source = source
        self.doc = doc
        self.calls = 0

    def fetch(self, name, version):
        self.calls += 1
        return self.doc


def test_merge_prefers_registry_and_records_provenance():
    rec = merge_documents("x", "1.0.0", {
        "fixtures": {"downloads": 5, "tool_results": [{"tool": MIRI, "flagged": True}]},
        "registry": {"downloads": 100, "authors": ["a"]},
    })
    assert rec.downloads == 100
    assert dict(rec.provenance) == {"downloads": "registry", "authors": "registry", "tool_results": "fixtures"}


def test_fetch_writes_through_and_then_hits_cache(tmp_path):
    cache = RecordCache(tmp_path)
    reg = StubFetcher("registry", {"downloads": 10})
    first = fetch_record("x", "1.0.0", [reg, StubFetcher("advisories", None)], cache)
    second = fetch_record("x", "1.0.0", [reg], cache)
    assert first == second and reg.calls == 1
    assert cache.get("x", "1.0.0").downloads == 10


def test_fetch_offline_and_unknown(tmp_path):
    cache = RecordCache(tmp_path)
    with pytest.raises(NetworkUnavailable):
        fetch_record("x", "1.0.0", [StubFetcher("registry", {})], cache, offline=True)
    with pytest.raises(NotFound):
        fetch_record("x", "1.0.0", [StubFetcher("registry", None)], cache)


def diamond():
    leaf = demo("leaf", "0.1.0")
    left = demo("left", "1.0.0", dependencies=(("leaf", "=0.1.0"),))
    right = demo("right", "1.0.0", dependencies=(("leaf", "0.1.0"),))
    top = demo("top", "2.0.0", dependencies=(("left", "=1.0.0"), ("right", "=1.0.0")))
    return [top, left, right, leaf]


def test_graph_resolution_deduplicates_shared_dependencies():
    graph = graph_from_records(diamond(), ("top", "2.0.0"))
    assert len(graph) == 4 and graph.edge_count == 4
    order = graph.topological_order()
    assert order.index(("leaf", "0.1.0")) < order.index(("left", "1.0.0")) < order.index(("top", "2.0.0"))


def test_graph_resolution_reports_missing_and_cyclic_records():
    recs = diamond()[:3]
    with pytest.raises(NotFound):
        graph_from_records(recs, ("top", "2.0.0"))
    a = demo("a", dependencies=(("b", "=1.0.0"),))
    b = demo("b", dependencies=(("a", "=1.0.0"),))
    with pytest.raises(CyclicDependency) as err:
        graph_from_records([a, b], a.key)
    assert err.value.path[0] == err.value.path[-1]
    assert "a@1.0.0" in str(err.value)


def test_self_dependency_is_a_cycle():
    a = demo("a", dependencies=(("a", "=1.0.0"),))
    with pytest.raises(CyclicDependency):
        graph_from_records([a], a.key)
