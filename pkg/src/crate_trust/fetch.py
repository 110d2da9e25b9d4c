"""Live metadata sources.

Every fetcher turns raw documents into a partial crate-record dict.  The
HTTP layer is a single ``Transport`` callable so tests can inject canned
responses; retries and backoff live here and nowhere else.
"""

from __future__ import annotations

import json
import logging
import re
import sys
import time
from pathlib import Path
from typing import Any, Callable, Mapping

import semver

from .errors import NetworkUnavailable, NotFound, ParseError
from .model import SEVERITIES, SIDE_EFFECT_TOOL, parse_version

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

CRATES_IO = "https://crates.io/api/v1"
OSV_QUERY = "https://api.osv.dev/v1/query"
USER_AGENT = "crate-trust (https://github.com/)"

# (method, url, json body or None) -> (status code, response text)
Transport = Callable[[str, str, Any], tuple[int, str]]


def httpx_transport(timeout: float = 30.0) -> Transport:
    import httpx

    client = httpx.Client(timeout=timeout, headers={"User-Agent": USER_AGENT}, follow_redirects=True)

    def send(method: str, url: str, body: Any = None) -> tuple[int, str]:
        try:
            resp = client.request(method, url, json=body)
        except httpx.TransportError as exc:
            raise NetworkUnavailable(f"{method} {url}: {exc}") from exc
        return resp.status_code, resp.text

    return send


class HttpSource:
    attempts = 3
    backoff = 0.5

    def __init__(self, transport: Transport | None = None, sleep: Callable[[float], None] = time.sleep):
        self._transport = transport
        self._sleep = sleep

    @property
    def transport(self) -> Transport:
        if self._transport is None:
            self._transport = httpx_transport()
        return self._transport

    def request(self, method: str, url: str, body: Any = None) -> Any | None:
        """JSON body of a 2xx response, None on 404; retries 429/5xx and transport errors."""
        delay = self.backoff
        for attempt in range(1, self.attempts + 1):
            try:
                status, text = self.transport(method, url, body)
            except NetworkUnavailable:
                if attempt == self.attempts:
                    raise
                status, text = None, ""
            if status == 404:
                return None
            if status is not None and 200 <= status < 300:
                try:
                    return json.loads(text)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"{url}: {exc}") from exc
            if status is not None and status < 500 and status != 429:
                raise ParseError(f"{url}: HTTP {status}")
            if attempt == self.attempts:
                raise NetworkUnavailable(f"{url}: HTTP {status} after {attempt} attempts")
            log.info("retrying %s in %.1fs (attempt %d)", url, delay, attempt)
            self._sleep(delay)
            delay *= 2
        return None


class RegistryFetcher(HttpSource):
    """crates.io: downloads, owners, dependencies and repository stats."""

    source = "registry"

    def __init__(self, transport: Transport | None = None, base: str = CRATES_IO, **kw):
        super().__init__(transport, **kw)
        self.base = base.rstrip("/")

    def latest_version(self, name: str) -> str:
        data = self.request("GET", f"{self.base}/crates/{name}")
        if data is None:
            raise NotFound(f"{name} is not on the registry")
        crate = data["crate"]
        return crate.get("max_stable_version") or crate["max_version"]

    def versions(self, name: str) -> list[str]:
        data = self.request("GET", f"{self.base}/crates/{name}/versions")
        if data is None:
            raise NotFound(f"{name} is not on the registry")
        return [v["num"] for v in data.get("versions", []) if not v.get("yanked", False)]

    def repository(self, name: str) -> str | None:
        data = self.request("GET", f"{self.base}/crates/{name}")
        return (data or {}).get("crate", {}).get("repository")

    def resolve(self, name: str, requirement: str) -> str:
        """Newest published version of ``name`` satisfying a Cargo requirement."""
        best = highest_matching(self.versions(name), requirement)
        if best is None:
            raise NotFound(f"no version of {name} matches {requirement!r}")
        return best

    def fetch(self, name: str, version: str) -> dict | None:
        info = self.request("GET", f"{self.base}/crates/{name}/{version}")
        if info is None:
            return None
        deps = self.request("GET", f"{self.base}/crates/{name}/{version}/dependencies") or {}
        owners = self.request("GET", f"{self.base}/crates/{name}/owners") or {}
        doc: dict = {
            "downloads": int(info["version"].get("downloads", 0)),
            "authors": sorted(u["login"] for u in owners.get("users", [])),
            # pin each requirement so the graph is reproducible from the cache alone
            "dependencies": [
                {"name": d["crate_id"], "req": "=" + self.resolve(d["crate_id"], d["req"])}
                for d in deps.get("dependencies", [])
                if d.get("kind", "normal") == "normal" and not d.get("optional", False)
            ],
        }
        return doc


def github_slug(url: str | None) -> str | None:
    m = re.match(r"https?://github\.com/([^/]+)/([^/#?]+?)(?:\.git)?/?$", url or "")
    return f"{m.group(1)}/{m.group(2)}" if m else None


def _comparators(requirement: str) -> list[tuple[str, semver.Version]]:
    """Cargo requirement syntax as a list of plain comparisons."""
    out = []
    for part in requirement.split(","):
        part = part.strip()
        if part in ("", "*"):
            continue
        m = re.fullmatch(r"(\^|~|=|>=|<=|>|<)?\s*(\d+)(?:\.(\d+|\*))?(?:\.(\d+|\*))?(-[0-9A-Za-z.-]+)?", part)
        if not m:
            raise ParseError(f"bad version requirement {requirement!r}")
        op, major, minor, patch, pre = m.groups()
        minor = None if minor in (None, "*") else int(minor)
        patch = None if patch in (None, "*") else int(patch)
        major = int(major)
        low = semver.Version(major, minor or 0, patch or 0, pre[1:] if pre else None)
        if op in (">=", "<=", ">", "<"):
            out.append((op, low))
            continue
        if op == "=" and minor is not None and patch is not None:
            out.append(("==", low))
            continue
        if op in ("~", "=") or "*" in part:
            high = semver.Version(major + 1, 0, 0) if minor is None else semver.Version(major, minor + 1, 0)
        elif minor is None or major > 0:
            high = semver.Version(major + 1, 0, 0)
        elif minor > 0 or patch is None:
            high = semver.Version(0, minor + 1, 0)
        else:
            high = semver.Version(0, 0, patch + 1)
        out += [(">=", low), ("<", high)]
    return out


_OPS = {
    "==": lambda c: c == 0, ">=": lambda c: c >= 0, "<=": lambda c: c <= 0,
    ">": lambda c: c > 0, "<": lambda c: c < 0,
}


def matches(version: str, requirement: str) -> bool:
    v = parse_version(version)
    return all(_OPS[op](v.compare(bound)) for op, bound in _comparators(requirement))


def highest_matching(versions, requirement: str) -> str | None:
    comparators = _comparators(requirement)
    pool = []
    for text in versions:
        try:
            v = parse_version(text)
        except ParseError:
            continue
        if v.prerelease and not any(b.prerelease for _, b in comparators):
            continue
        if all(_OPS[op](v.compare(bound)) for op, bound in comparators):
            pool.append(v)
    return str(max(pool)) if pool else None


class RepositoryStatsFetcher(HttpSource):
    """Stars and forks from a GitHub-style repository API."""

    source = "repository"

    def __init__(self, repository_of: Callable[[str], str | None], transport: Transport | None = None,
                 base: str = "https://api.github.com/repos", **kw):
        super().__init__(transport, **kw)
        self.repository_of = repository_of
        self.base = base.rstrip("/")

    def fetch(self, name: str, version: str) -> dict | None:
        slug = self.repository_of(name)
        if not slug:
            return None
        repo = self.request("GET", f"{self.base}/{slug}")
        if repo is None:
            return None
        return {"stars": int(repo.get("stargazers_count", 0)), "forks": int(repo.get("forks_count", 0))}


def _osv_severity(vuln: Mapping) -> str:
    db = vuln.get("database_specific") or {}
    if db.get("informational"):
        return "informational"
    label = str(db.get("severity") or "").lower()
    if label in SEVERITIES:
        return label
    if label == "moderate":
        return "medium"
    return "informational"


class AdvisoryFetcher(HttpSource):
    """RustSec advisories through the OSV query API.

    An advisory listed for the crate but not for the queried version is
    reported with ``patched_in_queried_version`` set.
    """

    source = "advisories"

    def __init__(self, transport: Transport | None = None, url: str = OSV_QUERY, **kw):
        super().__init__(transport, **kw)
        self.url = url

    def fetch(self, name: str, version: str) -> dict | None:
        package = {"name": name, "ecosystem": "crates.io"}
        everything = self.request("POST", self.url, {"package": package}) or {}
        affecting = self.request("POST", self.url, {"package": package, "version": version}) or {}
        hit = {v["id"] for v in affecting.get("vulns", [])}
        advisories = [
            {"id": v["id"], "severity": _osv_severity(v), "patched_in_queried_version": v["id"] not in hit}
            for v in sorted(everything.get("vulns", []), key=lambda v: v["id"])
        ]
        return {"advisories": advisories}


def parse_vet_audits(text: str, organization: str, name: str) -> list[dict]:
    """Audits for ``name`` from a cargo-vet ``audits.toml`` document."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"audits.toml from {organization}: {exc}") from exc
    out = []
    for entry in data.get("audits", {}).get(name, []):
        criteria = entry.get("criteria", "safe-to-deploy")
        if isinstance(criteria, list):
            criteria = ",".join(criteria)
        if "version" in entry:
            span = entry["version"]
        elif "delta" in entry:
            # a delta audit vouches for the target version
            span = entry["delta"].split("->")[-1].strip()
        else:
            continue
        parse_version(span)
        out.append({"organization": organization, "criteria": criteria, "version": span, "passed": True})
    return out


class AuditFetcher(HttpSource):
    """cargo-vet audit files published by auditing organizations."""

    source = "audits"

    def __init__(self, feeds: Mapping[str, str], get_text: Callable[[str], str] | None = None, **kw):
        super().__init__(**kw)
        self.feeds = dict(feeds)
        self._get_text = get_text
        self._cache: dict[str, str] = {}

    def _text(self, url: str) -> str:
        if url not in self._cache:
            if self._get_text is not None:
                self._cache[url] = self._get_text(url)
            else:
                status, text = self.transport("GET", url, None)
                if status != 200:
                    raise NetworkUnavailable(f"{url}: HTTP {status}")
                self._cache[url] = text
        return self._cache[url]

    def fetch(self, name: str, version: str) -> dict | None:
        audits = []
        for org, url in sorted(self.feeds.items()):
            audits.extend(parse_vet_audits(self._text(url), org, name))
        return {"audits": audits}


class FixtureFetcher:
    """Partial records read from ``<root>/<name>/<version>.json`` (tool results and the like)."""

    source = "fixtures"

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def fetch(self, name: str, version: str) -> dict | None:
        path = self.root / name / f"{version}.json"
        if not path.exists():
            return None
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        if "tool_results" in data:
            for t in data["tool_results"]:
                if t.get("side_effect_count") is not None and t.get("tool") != SIDE_EFFECT_TOOL:
                    raise ParseError(f"{path}: side_effect_count on tool {t.get('tool')!r}")
        return data
