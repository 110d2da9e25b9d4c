"""Fixture bundles, synthetic dependency trees and typosquat variants.

A bundle is a record-cache directory plus ``manifest.json``::

    {"roots": [{"name": ..., "version": ...}], "assumptions": "assumptions.json",
     "pairs": [[{"name", "version"}, {"name", "version"}], ...]}
"""

from __future__ import annotations

import json
import random
import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path

from .model import SIDE_EFFECT_TOOL, MIRI, Advisory, Audit, CrateRecord, Key, RecordCache, ToolResult

TYPOSQUAT_DOWNLOADS = 171
MANIFEST = "manifest.json"


@dataclass
class Bundle:
    root: Path
    roots: list[Key]
    assumptions: Path | None = None
    pairs: list[tuple[Key, Key]] = field(default_factory=list)

    @property
    def cache(self) -> RecordCache:
        return RecordCache(self.root)


def _key(entry) -> Key:
    return (entry["name"], entry["version"])


def _entry(key: Key) -> dict:
    return {"name": key[0], "version": key[1]}


def load_bundle(path: str | Path) -> Bundle:
    root = Path(path)
    manifest = json.loads((root / MANIFEST).read_text())
    assumptions = root / manifest["assumptions"] if manifest.get("assumptions") else None
    return Bundle(
        root,
        [_key(e) for e in manifest.get("roots", [])],
        assumptions,
        [(_key(a), _key(b)) for a, b in manifest.get("pairs", [])],
    )


def write_bundle(
    path: str | Path,
    records: list[CrateRecord],
    roots: list[Key],
    assumptions: dict | None = None,
    pairs: list[tuple[Key, Key]] = (),
) -> Bundle:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    cache = RecordCache(root)
    for rec in records:
        cache.store(rec)
    manifest: dict = {"roots": [_entry(k) for k in roots]}
    if assumptions is not None:
        (root / "assumptions.json").write_text(json.dumps(assumptions, indent=2, sort_keys=True) + "\n")
        manifest["assumptions"] = "assumptions.json"
    if pairs:
        manifest["pairs"] = [[_entry(a), _entry(b)] for a, b in pairs]
    (root / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")
    return load_bundle(root)


# ---------------------------------------------------------- synthetic trees


def synthetic_tree(n_deps: int, seed: int = 0, prefix: str = "synth") -> tuple[list[CrateRecord], Key]:
    """A random dependency tree with exactly ``n_deps`` transitive dependencies.

    Each new crate hangs off a uniformly chosen earlier one, so the trees
    mix deep chains with wide fan-out.
    """
    rng = random.Random(f"{seed}:{n_deps}")
    names = [f"{prefix}-{seed}-{n_deps}-{i}" for i in range(n_deps + 1)]
    children: list[list[int]] = [[] for _ in names]
    for i in range(1, n_deps + 1):
        children[rng.randrange(i)].append(i)
    records = []
    for i, name in enumerate(names):
        side_effects = 0 if rng.random() < 0.6 else rng.randint(1, 60)
        tools = [ToolResult(SIDE_EFFECT_TOOL, side_effect_count=side_effects)]
        if rng.random() < 0.05:
            tools.append(ToolResult(MIRI, flagged=True))
        audits = (Audit("google", "safe-to-deploy", "1.0.0"),) if rng.random() < 0.1 else ()
        advisories = (Advisory(f"RUSTSEC-0000-{i:04d}", rng.choice(["high", "low", "informational"])),) \
            if rng.random() < 0.05 else ()
        records.append(CrateRecord(
            name=name,
            version="1.0.0",
            downloads=int(10 ** rng.uniform(2, 7.5)),
            authors=(f"dev{rng.randrange(40)}",),
            stars=rng.randrange(0, 3000),
            forks=rng.randrange(0, 300),
            dependencies=tuple((names[j], "=1.0.0") for j in children[i]),
            audits=audits,
            tool_results=tuple(tools),
            advisories=advisories,
        ))
    return records, records[0].key


# --------------------------------------------------------------- typosquats

_VOWELS = "aeiou"


def typosquat_name(name: str, taken: set[str]) -> str:
    """A near-miss of ``name``: drop the last inner vowel, else double a letter, else append ``s``."""
    candidates = []
    for i in range(len(name) - 1, 0, -1):
        if name[i] in _VOWELS and name[i - 1] not in "-_":
            candidates.append(name[:i] + name[i + 1:])
            break
    for i in range(len(name) - 1, 0, -1):
        if name[i].isalpha():
            candidates.append(name[: i + 1] + name[i] + name[i + 1:])
            break
    candidates.append(name + "s")
    for cand in candidates:
        if cand not in taken:
            return cand
    n = 2
    while f"{name}{n}" in taken:
        n += 1
    return f"{name}{n}"


def typosquat_variant(record: CrateRecord, taken: set[str]) -> CrateRecord:
    """Same code and dependencies under a new name, a fresh author and no reputation."""
    new_name = typosquat_name(record.name, taken)
    return replace(
        record,
        name=new_name,
        authors=(f"new-author-{new_name}",),
        downloads=TYPOSQUAT_DOWNLOADS,
        stars=0,
        forks=0,
        audits=(),
        provenance=(("typosquat_of", f"{record.name}@{record.version}"),),
    )


def generate_typosquats(base: str | Path, out: str | Path) -> Bundle:
    """Copy a base bundle and add one typosquat variant per root crate."""
    bundle = load_bundle(base)
    records = bundle.cache.records()
    taken = {r.name for r in records}
    pairs = []
    variants = []
    for key in bundle.roots:
        original = bundle.cache.load(*key)
        variant = typosquat_variant(original, taken)
        taken.add(variant.name)
        variants.append(variant)
        pairs.append((key, variant.key))
    out = Path(out)
    if out.exists():
        if not (out / MANIFEST).exists() and any(out.iterdir()):
            raise FileExistsError(f"{out} exists and is not a fixture bundle")
        shutil.rmtree(out)
    assumptions = json.loads(bundle.assumptions.read_text()) if bundle.assumptions else None
    return write_bundle(out, records + variants, [v.key for v in variants], assumptions, pairs)
