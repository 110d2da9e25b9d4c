"""Crate records, the on-disk record cache, and dependency-graph resolution."""

from __future__ import annotations

import graphlib
import json
import os
import tempfile
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import semver

from .errors import CyclicDependency, NetworkUnavailable, NotFound, ParseError, SchemaVersionMismatch

SCHEMA_VERSION = 1
CACHE_ENV = "CRATE_TRUST_CACHE"

SEVERITIES = ("critical", "high", "medium", "low", "informational")
SIDE_EFFECT_TOOL = "cargo-scan"
MIRI = "miri"

# Lower number wins when two sources disagree on a field.
SOURCE_PRIORITY = {"registry": 0, "repository": 1, "audits": 2, "advisories": 3, "fixtures": 4}

Key = tuple[str, str]


def parse_version(text: str) -> semver.Version:
    try:
        return semver.Version.parse(text)
    except (ValueError, TypeError) as exc:
        raise ParseError(f"bad version {text!r}") from exc


def pinned_version(requirement: str) -> str:
    """Exact version recorded in a lockfile-style requirement (``=1.2.3``, ``^1.2.3``, ``1.2.3``)."""
    req = requirement.strip().lstrip("=^~ ")
    parse_version(req)
    return req


@dataclass(frozen=True)
class Audit:
    organization: str
    criteria: str = "safe-to-deploy"
    version: str = ""
    passed: bool = True

    def __post_init__(self):
        self.bounds()

    def bounds(self) -> tuple[semver.Version, semver.Version | None]:
        """``(low, high)``: an exact version has ``high = None``; ranges are ``low..high`` (high exclusive)."""
        if ".." in self.version:
            lo, hi = (parse_version(p.strip()) for p in self.version.split("..", 1))
            if not lo < hi:
                raise ParseError(f"empty audit range {self.version!r}")
            return lo, hi
        return parse_version(self.version), None

    def covers(self, version: str) -> bool:
        v = parse_version(version)
        lo, hi = self.bounds()
        return v == lo if hi is None else lo <= v < hi

    def precedes(self, version: str) -> bool:
        """Whether the audit covers some version strictly older than ``version``."""
        return self.bounds()[0] < parse_version(version)


@dataclass(frozen=True)
class ToolResult:
    tool: str
    flagged: bool = False
    side_effect_count: int | None = None

    def __post_init__(self):
        if self.side_effect_count is not None:
            if self.tool != SIDE_EFFECT_TOOL:
                raise ParseError(f"side_effect_count only applies to {SIDE_EFFECT_TOOL}, not {self.tool}")
            if self.side_effect_count < 0:
                raise ParseError("side_effect_count must be >= 0")


@dataclass(frozen=True)
class Advisory:
    id: str
    severity: str = "informational"
    patched_in_queried_version: bool = False

    def __post_init__(self):
        if self.severity not in SEVERITIES:
            raise ParseError(f"unknown advisory severity {self.severity!r}")


@dataclass(frozen=True)
class CrateRecord:
    name: str
    version: str
    downloads: int = 0
    authors: tuple[str, ...] = ()
    stars: int = 0
    forks: int = 0
    dependencies: tuple[tuple[str, str], ...] = ()
    audits: tuple[Audit, ...] = ()
    tool_results: tuple[ToolResult, ...] = ()
    advisories: tuple[Advisory, ...] = ()
    provenance: tuple[tuple[str, str], ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not self.name:
            raise ParseError("crate name must be non-empty")
        parse_version(self.version)
        for attr in ("downloads", "stars", "forks"):
            if getattr(self, attr) < 0:
                raise ParseError(f"{attr} must be >= 0")
        ids = [a.id for a in self.advisories]
        if len(set(ids)) != len(ids):
            raise ParseError(f"{self.name}: duplicate advisory ids")

    @property
    def key(self) -> Key:
        return (self.name, self.version)

    @property
    def side_effect_count(self) -> int | None:
        counts = [t.side_effect_count for t in self.tool_results if t.side_effect_count is not None]
        return max(counts) if counts else None

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "name": self.name,
            "version": self.version,
            "downloads": self.downloads,
            "authors": list(self.authors),
            "stars": self.stars,
            "forks": self.forks,
            "dependencies": [{"name": n, "req": r} for n, r in self.dependencies],
            "audits": [vars_of(a) for a in self.audits],
            "tool_results": [vars_of(t) for t in self.tool_results],
            "advisories": [vars_of(a) for a in self.advisories],
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> CrateRecord:
        schema = data.get("schema", SCHEMA_VERSION)
        if not isinstance(schema, int) or schema > SCHEMA_VERSION:
            raise SchemaVersionMismatch(f"record schema {schema!r} is newer than supported {SCHEMA_VERSION}")
        try:
            return cls(
                name=str(data["name"]),
                version=str(data["version"]),
                downloads=int(data.get("downloads", 0)),
                authors=tuple(data.get("authors", ())),
                stars=int(data.get("stars", 0)),
                forks=int(data.get("forks", 0)),
                dependencies=tuple(_dependency(d) for d in data.get("dependencies", ())),
                audits=tuple(_known(Audit, a) for a in data.get("audits", ())),
                tool_results=tuple(_known(ToolResult, t) for t in data.get("tool_results", ())),
                advisories=tuple(_known(Advisory, a) for a in data.get("advisories", ())),
                provenance=tuple(sorted(dict(data.get("provenance", {})).items())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed crate record: {exc}") from exc


def vars_of(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


def _known(cls, data: Mapping):
    names = {f.name for f in fields(cls)}
    return cls(**{k: v for k, v in data.items() if k in names})


def _dependency(entry) -> tuple[str, str]:
    if isinstance(entry, Mapping):
        return (str(entry["name"]), str(entry["req"]))
    name, req = entry
    return (str(name), str(req))


# --------------------------------------------------------------------- cache


class RecordCache:
    """One JSON document per crate version under ``<root>/<name>/<version>.json``."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    @classmethod
    def default(cls) -> RecordCache:
        env = os.environ.get(CACHE_ENV)
        return cls(env if env else Path.home() / ".cache" / "crate-trust")

    def path(self, name: str, version: str) -> Path:
        return self.root / name / f"{version}.json"

    def store(self, record: CrateRecord) -> Path:
        target = self.path(record.name, record.version)
        target.parent.mkdir(parents=True, exist_ok=True)
        text = json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n"
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{record.version}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            os.replace(tmp, target)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        return target

    def load(self, name: str, version: str) -> CrateRecord:
        path = self.path(name, version)
        try:
            text = path.read_text()
        except FileNotFoundError:
            raise NotFound(f"{name}@{version} is not cached") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ParseError(f"{path}: expected a JSON object")
        return CrateRecord.from_dict(data)

    def get(self, name: str, version: str) -> CrateRecord | None:
        try:
            return self.load(name, version)
        except NotFound:
            return None

    def versions(self, name: str) -> list[str]:
        folder = self.root / name
        if not folder.is_dir():
            return []
        found = []
        for p in folder.glob("*.json"):
            try:
                found.append((parse_version(p.stem), p.stem))
            except ParseError:
                continue
        return [v for _, v in sorted(found)]

    def latest(self, name: str) -> str | None:
        versions = self.versions(name)
        return versions[-1] if versions else None

    def records(self) -> list[CrateRecord]:
        return [self.load(p.parent.name, p.stem) for p in sorted(self.root.glob("*/*.json"))]


def store_record(cache_dir: str | os.PathLike, record: CrateRecord) -> Path:
    return RecordCache(cache_dir).store(record)


def load_record(cache_dir: str | os.PathLike, name: str, version: str) -> CrateRecord:
    return RecordCache(cache_dir).load(name, version)


# ------------------------------------------------------------------ fetching


class Fetcher(Protocol):
    source: str

    def fetch(self, name: str, version: str) -> Mapping | None:
        """Partial record document for ``name@version``, or None if unknown to this source."""


def merge_documents(name: str, version: str, docs: Mapping[str, Mapping]) -> CrateRecord:
    """Merge partial documents; a field comes from the highest-priority source that has it."""
    merged: dict = {"name": name, "version": version}
    provenance: dict[str, str] = {}
    order = sorted(docs, key=lambda s: (SOURCE_PRIORITY.get(s, len(SOURCE_PRIORITY)), s))
    for source in order:
        for key, value in docs[source].items():
            if key in ("name", "version", "schema", "provenance") or key in provenance:
                continue
            merged[key] = value
            provenance[key] = source
    merged["provenance"] = provenance
    return CrateRecord.from_dict(merged)


def fetch_record(
    name: str,
    version: str,
    fetchers: Sequence[Fetcher] = (),
    cache: RecordCache | None = None,
    offline: bool = False,
) -> CrateRecord:
    if cache is not None:
        hit = cache.get(name, version)
        if hit is not None:
            return hit
    if offline:
        raise NetworkUnavailable(f"{name}@{version} is not cached and network access is disabled")
    if not fetchers:
        raise NotFound(f"{name}@{version}: no fetchers configured")

    def run(fetcher):
        try:
            return fetcher.source, fetcher.fetch(name, version)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{fetcher.source}: {exc}") from exc

    with ThreadPoolExecutor(max_workers=len(fetchers)) as pool:
        results = list(pool.map(run, fetchers))
    docs = {source: doc for source, doc in results if doc is not None}
    if not docs:
        raise NotFound(f"{name}@{version} not found in any source")
    record = merge_documents(name, version, docs)
    if cache is not None:
        cache.store(record)
    return record


# ------------------------------------------------------------------- graphs


@dataclass(frozen=True)
class DependencyGraph:
    root: Key
    records: Mapping[Key, CrateRecord]
    edges: Mapping[Key, tuple[Key, ...]]

    def __post_init__(self):
        if self.root not in self.records:
            raise ValueError("root missing from graph")
        order = _topological(self.edges)
        if order is None:
            raise CyclicDependency(find_cycle(self.edges))
        seen = {self.root}
        queue = deque([self.root])
        while queue:
            for dep in self.edges.get(queue.popleft(), ()):
                if dep not in seen:
                    seen.add(dep)
                    queue.append(dep)
        if seen != set(self.records):
            raise ValueError("every node must be reachable from the root")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def nodes(self) -> list[Key]:
        return list(self.records)

    def record(self, key: Key) -> CrateRecord:
        return self.records[key]

    def dependencies(self, key: Key) -> tuple[Key, ...]:
        return self.edges.get(key, ())

    @property
    def edge_count(self) -> int:
        return sum(len(v) for v in self.edges.values())

    def topological_order(self) -> list[Key]:
        """Dependencies before dependents."""
        return _topological(self.edges) or []


def _topological(edges: Mapping[Key, Iterable[Key]]) -> list[Key] | None:
    try:
        return list(graphlib.TopologicalSorter({k: set(v) for k, v in edges.items()}).static_order())
    except graphlib.CycleError:
        return None


def find_cycle(edges: Mapping[Key, Iterable[Key]]) -> list[Key]:
    try:
        graphlib.TopologicalSorter({k: set(v) for k, v in edges.items()}).prepare()
    except graphlib.CycleError as exc:
        # graphlib lists the cycle from the dependency side; flip it so it reads parent -> child.
        return list(reversed(exc.args[1]))
    return []


def resolve_graph(root: CrateRecord, fetch: Callable[[str, str], CrateRecord]) -> DependencyGraph:
    """Breadth-first resolution of all transitive dependencies at their pinned versions."""
    records: dict[Key, CrateRecord] = {root.key: root}
    edges: dict[Key, tuple[Key, ...]] = {}
    queue = deque([root])
    while queue:
        rec = queue.popleft()
        children = []
        for dep_name, req in rec.dependencies:
            key = (dep_name, pinned_version(req))
            if key not in children:
                children.append(key)
            if key not in records:
                records[key] = fetch(*key)
                queue.append(records[key])
        edges[rec.key] = tuple(children)
    if _topological(edges) is None:
        raise CyclicDependency(find_cycle(edges))
    return DependencyGraph(root.key, records, edges)


def graph_from_records(records: Iterable[CrateRecord], root: Key) -> DependencyGraph:
    """Resolve ``root`` against an in-memory set of records."""
    index = {r.key: r for r in records}

    def fetch(name: str, version: str) -> CrateRecord:
        try:
            return index[(name, version)]
        except KeyError:
            raise NotFound(f"{name}@{version} is not in the record set") from None

    try:
        start = index[root]
    except KeyError:
        raise NotFound(f"{root[0]}@{root[1]} is not in the record set") from None
    return resolve_graph(start, fetch)


def with_changes(record: CrateRecord, **changes) -> CrateRecord:
    return replace(record, **changes)
