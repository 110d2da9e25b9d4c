"""Candidate trust and distrust assumptions derived from crate metadata.

Each template looks at one crate record and emits zero or more
assumption instances.  Costs come from :class:`CostConfig`, which the
user can override from a JSON file.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .errors import InvalidAnchors, InvalidConfig
from .logic import Var, conj_all, fact, implies
from .model import MIRI, SIDE_EFFECT_TOOL, CrateRecord, DependencyGraph, Key
from .solver import AssumptionInstance

BASE_COST = 100


class Polarity(str, enum.Enum):
    TRUST = "positive"
    DISTRUST = "negative"


def node_id(key: Key) -> str:
    return f"{key[0]}@{key[1]}"


def safe(key: Key) -> Var:
    return fact(f"safe({node_id(key)})")


def unsafe(key: Key) -> Var:
    return fact(f"unsafe({node_id(key)})")


def no_side_effects(key: Key) -> Var:
    return fact(f"no_side_effects({node_id(key)})")


def conclusion(key: Key, polarity: Polarity) -> Var:
    return safe(key) if polarity is Polarity.TRUST else unsafe(key)


# ------------------------------------------------------------------ costs


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def parameterized_cost(
    value: float,
    lo_cost: int,
    hi_cost: int,
    v_low: float,
    v_high: float,
    direction: str = "decreasing",
) -> int:
    """Log-linear interpolation between ``hi_cost`` at ``v_low`` and ``lo_cost`` at ``v_high``.

    Outside the anchors the cost is clamped.  ``direction="increasing"``
    mirrors the curve so the cost grows with the metric instead.
    """
    if not (0 < v_low < v_high):
        raise InvalidAnchors([f"anchors must satisfy 0 < v_low < v_high, got {v_low}, {v_high}"])
    if not lo_cost < hi_cost:
        raise InvalidAnchors([f"cost range must satisfy lo < hi, got {lo_cost}, {hi_cost}"])
    if value < 0:
        raise ValueError("metric value must be non-negative")
    if value <= v_low:
        t = 0.0
    elif value >= v_high:
        t = 1.0
    else:
        t = (math.log10(value) - math.log10(v_low)) / (math.log10(v_high) - math.log10(v_low))
    if direction == "increasing":
        t = 1.0 - t
    elif direction != "decreasing":
        raise ValueError(f"unknown direction {direction!r}")
    return round_half_up(hi_cost - t * (hi_cost - lo_cost))


# ----------------------------------------------------------------- config

DEFAULT_COSTS: dict[str, int | tuple[int, int]] = {
    "crate_safe": 100,
    "downloads": (25, 100),
    "audit_passed": 5,
    "past_audit_passed": 20,
    "stars_forks": (20, 100),
    "no_side_effects_safe_deps": 10,
    "trusted_author": 5,
    "crate_unsafe": 100,
    "rustsec_critical": 5,
    "rustsec_high": 20,
    "rustsec_medium": 40,
    "rustsec_low": 60,
    "rustsec_informational": 60,
    "rustsec_patched": 90,
    "miri_flagged": 30,
    "side_effects": (60, 100),
    "unsafe_dependency": 10,
}

DEFAULT_ANCHORS: dict[str, tuple[float, float]] = {
    "downloads": (1_000, 10_000_000),
    "stars_forks": (10, 10_000),
    "side_effects": (1, 50),
}

DEFAULT_AUDIT_ORGS = frozenset({"google", "mozilla", "bytecode-alliance"})


@dataclass(frozen=True)
class CostConfig:
    costs: Mapping[str, int | tuple[int, int]] = field(default_factory=lambda: dict(DEFAULT_COSTS))
    trusted_authors: frozenset[str] = frozenset()
    trusted_audit_orgs: frozenset[str] = DEFAULT_AUDIT_ORGS
    anchors: Mapping[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_ANCHORS))
    enabled: Mapping[str, bool] = field(default_factory=dict)
    miri_flag_threshold: int = 1
    bands: tuple[tuple[str, int, int], ...] | None = None
    # set when a config file explicitly lists trusted authors
    trusted_authors_overridden: bool = False

    def cost(self, template_id: str):
        return self.costs[template_id]

    def is_enabled(self, template_id: str) -> bool:
        return self.enabled.get(template_id, True)

    def without(self, *template_ids: str) -> CostConfig:
        enabled = dict(self.enabled)
        enabled.update({t: False for t in template_ids})
        return replace(self, enabled=enabled)


def default_config() -> CostConfig:
    return CostConfig()


def config_from_dict(data: Mapping) -> CostConfig:
    unknown_costs = set(data.get("costs", {})) - set(DEFAULT_COSTS)
    unknown = unknown_costs | (set(data.get("enabled", {})) - set(DEFAULT_COSTS))
    if unknown:
        raise InvalidConfig([f"unknown template {t!r}" for t in sorted(unknown)])
    costs = dict(DEFAULT_COSTS)
    for key, value in data.get("costs", {}).items():
        costs[key] = tuple(value) if isinstance(value, (list, tuple)) else value
    anchors = dict(DEFAULT_ANCHORS)
    anchors.update({k: tuple(v) for k, v in data.get("anchors", {}).items()})
    cfg = CostConfig(
        costs=costs,
        trusted_authors=frozenset(data.get("trusted_authors", ())),
        trusted_audit_orgs=frozenset(data.get("trusted_audit_orgs", DEFAULT_AUDIT_ORGS)),
        anchors=anchors,
        enabled=dict(data.get("enabled", {})),
        miri_flag_threshold=int(data.get("miri_flag_threshold", 1)),
        bands=tuple(tuple(b) for b in data["bands"]) if "bands" in data else None,
        trusted_authors_overridden="trusted_authors" in data,
    )
    return cfg


def config_to_dict(cfg: CostConfig) -> dict:
    out = {
        "costs": {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.costs.items()},
        "trusted_authors": sorted(cfg.trusted_authors),
        "trusted_audit_orgs": sorted(cfg.trusted_audit_orgs),
        "anchors": {k: list(v) for k, v in cfg.anchors.items()},
        "enabled": dict(cfg.enabled),
        "miri_flag_threshold": cfg.miri_flag_threshold,
    }
    if cfg.bands is not None:
        out["bands"] = [list(b) for b in cfg.bands]
    return out


def load_config(path: str | Path | None) -> CostConfig:
    if path is None:
        return default_config()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidConfig([f"{path}: {exc}"]) from exc
    return config_from_dict(data)


# -------------------------------------------------------------- templates

Emit = Callable[[CrateRecord, tuple[Key, ...], CostConfig, "AssumptionTemplate"], list[AssumptionInstance]]


@dataclass(frozen=True)
class AssumptionTemplate:
    id: str
    polarity: Polarity
    description: str
    emit: Emit
    parameterized: bool = False


def _inst(template: AssumptionTemplate, rec: CrateRecord, encoding, cost: int, label: str, suffix: str = ""):
    ident = f"{template.id}({node_id(rec.key)}{suffix})"
    return AssumptionInstance.make(ident, encoding, cost, label, provenance=template.id)


def _base(t, rec, deps, cfg):
    head = conclusion(rec.key, t.polarity)
    verb = "safe" if t.polarity is Polarity.TRUST else "not safe"
    return [_inst(t, rec, head, cfg.cost(t.id), f"{node_id(rec.key)} is {verb}.")]


def _param(t: AssumptionTemplate, cfg: CostConfig, value: float) -> int | None:
    lo, hi = cfg.cost(t.id)
    v_low, v_high = cfg.anchors[t.id]
    if value <= v_low:
        return None
    return parameterized_cost(value, lo, hi, v_low, v_high)


def _downloads(t, rec, deps, cfg):
    cost = _param(t, cfg, rec.downloads)
    if cost is None:
        return []
    label = f"{node_id(rec.key)} has many downloads ({rec.downloads:,}), so it is safe."
    return [_inst(t, rec, safe(rec.key), cost, label)]


def _stars(t, rec, deps, cfg):
    value = rec.stars + rec.forks
    cost = _param(t, cfg, value)
    if cost is None:
        return []
    label = f"The repository of {node_id(rec.key)} has many stars and forks ({value:,}), so it is safe."
    return [_inst(t, rec, safe(rec.key), cost, label)]


def _trusted_audits(rec: CrateRecord, cfg: CostConfig):
    return [a for a in rec.audits if a.passed and a.organization in cfg.trusted_audit_orgs]


def _audit(t, rec, deps, cfg):
    hits = [a for a in _trusted_audits(rec, cfg) if a.covers(rec.version)]
    if not hits:
        return []
    orgs = ", ".join(sorted({a.organization for a in hits}))
    label = f"{node_id(rec.key)} has a passed audit ({orgs}), so it is safe."
    return [_inst(t, rec, safe(rec.key), cfg.cost(t.id), label)]


def _past_audit(t, rec, deps, cfg):
    audits = _trusted_audits(rec, cfg)
    if any(a.covers(rec.version) for a in audits):
        return []
    past = [a for a in audits if a.precedes(rec.version)]
    if not past:
        return []
    newest = max(past, key=lambda a: a.bounds()[0])
    label = f"A past version of {rec.name} ({newest.version}) passed an audit, so {node_id(rec.key)} is safe."
    return [_inst(t, rec, safe(rec.key), cfg.cost(t.id), label)]


def _author(t, rec, deps, cfg):
    trusted = sorted(set(rec.authors) & cfg.trusted_authors)
    if not trusted:
        return []
    label = f"The author of {node_id(rec.key)} ({', '.join(trusted)}) is trusted, so it is safe."
    return [_inst(t, rec, safe(rec.key), cfg.cost(t.id), label)]


def _composition(t, rec, deps, cfg):
    if rec.side_effect_count != 0:
        return []
    nse = no_side_effects(rec.key)
    body = conj_all([nse] + [safe(d) for d in deps])
    observed = AssumptionInstance.make(
        f"observed_no_side_effects({node_id(rec.key)})",
        nse,
        0,
        f"{SIDE_EFFECT_TOOL} found no side effects in {node_id(rec.key)}.",
        provenance=t.id,
    )
    label = (f"If {node_id(rec.key)} has no side effects and all {len(deps)} dependencies are safe, it is safe."
             if deps else f"If {node_id(rec.key)} has no side effects, it is safe.")
    return [observed, _inst(t, rec, implies(body, safe(rec.key)), cfg.cost(t.id), label)]


def _rustsec_for(severity: str):
    def emit(t, rec, deps, cfg):
        out = []
        for adv in sorted(rec.advisories, key=lambda a: a.id):
            if adv.patched_in_queried_version or adv.severity != severity:
                continue
            label = f"{node_id(rec.key)} appears on RustSec ({adv.id}, {severity}), so it is not safe."
            out.append(_inst(t, rec, unsafe(rec.key), cfg.cost(t.id), label, f":{adv.id}"))
        return out

    return emit


def _rustsec_patched(t, rec, deps, cfg):
    out = []
    for adv in sorted(rec.advisories, key=lambda a: a.id):
        if adv.patched_in_queried_version:
            label = f"{rec.name} appears on RustSec ({adv.id}) though {rec.version} is patched, so it is not safe."
            out.append(_inst(t, rec, unsafe(rec.key), cfg.cost(t.id), label, f":{adv.id}"))
    return out


def _miri(t, rec, deps, cfg):
    flagged = sum(1 for r in rec.tool_results if r.tool == MIRI and r.flagged)
    if flagged < cfg.miri_flag_threshold:
        return []
    label = f"{node_id(rec.key)} is flagged by Miri, so it is not safe."
    return [_inst(t, rec, unsafe(rec.key), cfg.cost(t.id), label)]


def _side_effects(t, rec, deps, cfg):
    count = rec.side_effect_count
    if not count:
        return []
    cost = _param(t, cfg, count)
    if cost is None:
        return []
    label = f"{node_id(rec.key)} has many side effects ({count}), so it is not safe."
    return [_inst(t, rec, unsafe(rec.key), cost, label)]


def _unsafe_dependency(t, rec, deps, cfg):
    return [
        _inst(t, rec, implies(unsafe(d), unsafe(rec.key)), cfg.cost(t.id),
              f"If dependency {node_id(d)} is not safe, {node_id(rec.key)} is not safe.", f"<-{node_id(d)}")
        for d in deps
    ]


_P, _N = Polarity.TRUST, Polarity.DISTRUST

TEMPLATES: tuple[AssumptionTemplate, ...] = (
    AssumptionTemplate("crate_safe", _P, "The crate is safe.", lambda r, d, c, t: _base(t, r, d, c)),
    AssumptionTemplate("downloads", _P, "If the crate has many downloads, it is safe.",
                       lambda r, d, c, t: _downloads(t, r, d, c), parameterized=True),
    AssumptionTemplate("audit_passed", _P, "If the crate version has a passed audit, it is safe.",
                       lambda r, d, c, t: _audit(t, r, d, c)),
    AssumptionTemplate("past_audit_passed", _P, "If a past version has a passed audit, it is safe.",
                       lambda r, d, c, t: _past_audit(t, r, d, c)),
    AssumptionTemplate("stars_forks", _P, "If the repository has many stars/forks, it is safe.",
                       lambda r, d, c, t: _stars(t, r, d, c), parameterized=True),
    AssumptionTemplate("no_side_effects_safe_deps", _P,
                       "If the crate has no side effects and all dependencies are safe, it is safe.",
                       lambda r, d, c, t: _composition(t, r, d, c)),
    AssumptionTemplate("trusted_author", _P, "If the author of the crate is trusted, it is safe.",
                       lambda r, d, c, t: _author(t, r, d, c)),
    AssumptionTemplate("crate_unsafe", _N, "The crate is not safe.", lambda r, d, c, t: _base(t, r, d, c)),
    *(
        AssumptionTemplate(f"rustsec_{sev}", _N, f"If the crate appears on RustSec with a {sev} label, it is not safe.",
                           (lambda emit: lambda r, d, c, t: emit(t, r, d, c))(_rustsec_for(sev)))
        for sev in ("critical", "high", "medium", "low", "informational")
    ),
    AssumptionTemplate("rustsec_patched", _N,
                       "If the crate appears on RustSec and the provided version is patched, it is not safe.",
                       lambda r, d, c, t: _rustsec_patched(t, r, d, c)),
    AssumptionTemplate("miri_flagged", _N, "If the crate is flagged by Miri, it is not safe.",
                       lambda r, d, c, t: _miri(t, r, d, c)),
    AssumptionTemplate("side_effects", _N, "If the crate has many side effects, it is not safe.",
                       lambda r, d, c, t: _side_effects(t, r, d, c), parameterized=True),
    AssumptionTemplate("unsafe_dependency", _N, "If the crate has an unsafe dependency, it is not safe.",
                       lambda r, d, c, t: _unsafe_dependency(t, r, d, c)),
)

TEMPLATE_BY_ID = {t.id: t for t in TEMPLATES}


def check_consistency(cfg: CostConfig, templates: Iterable[AssumptionTemplate] = TEMPLATES) -> list[str]:
    """Human-readable violations; an empty list means the config is usable."""
    problems: list[str] = []
    for t in templates:
        cost = cfg.costs.get(t.id)
        if cost is None:
            problems.append(f"{t.id}: no cost configured")
            continue
        if t.parameterized:
            if not (isinstance(cost, tuple) and len(cost) == 2):
                problems.append(f"{t.id}: parameterized cost must be a [low, high] range")
                continue
            lo, hi = cost
            if not (0 <= lo < hi <= BASE_COST):
                problems.append(f"{t.id}: cost range {lo}-{hi} must lie within [0, {BASE_COST}] with low < high")
            anchors = cfg.anchors.get(t.id)
            if anchors is None or not (0 < anchors[0] < anchors[1]):
                problems.append(f"{t.id}: anchors must satisfy 0 < low < high, got {anchors}")
        elif isinstance(cost, tuple) or not isinstance(cost, int):
            problems.append(f"{t.id}: cost must be an integer")
        elif not 0 <= cost <= BASE_COST:
            problems.append(f"{t.id}: cost {cost} exceeds the base cost of {BASE_COST}" if cost > BASE_COST
                            else f"{t.id}: cost {cost} is negative")
    if cfg.trusted_authors_overridden and not cfg.trusted_authors and cfg.is_enabled("trusted_author"):
        problems.append("trusted_author: trusted_authors is empty; disable the template instead")
    if cfg.miri_flag_threshold < 1:
        problems.append("miri_flag_threshold must be at least 1")
    return problems


def instantiate(
    crate: CrateRecord,
    graph: DependencyGraph | None,
    cfg: CostConfig,
    polarity: Polarity,
) -> list[AssumptionInstance]:
    """Every applicable assumption for ``crate``, base assumption first."""
    problems = check_consistency(cfg)
    if problems:
        raise InvalidConfig(problems)
    deps = graph.dependencies(crate.key) if graph is not None else ()
    out: list[AssumptionInstance] = []
    for t in TEMPLATES:
        if t.polarity is polarity and (cfg.is_enabled(t.id) or t.id in ("crate_safe", "crate_unsafe")):
            out.extend(t.emit(crate, deps, cfg, t))
    return out
