"""Regenerate the bundled fixtures under src/crate_trust/fixtures.

    python3 scripts/build_fixtures.py

The records are hand-written stand-ins for registry data: metadata is
chosen so the default cost curves land on known trust and distrust costs.
"""

from __future__ import annotations

import json
import shutil
from pathlib import Path

from crate_trust.model import MIRI, SIDE_EFFECT_TOOL, Advisory, Audit, CrateRecord, ToolResult
from crate_trust.synthetic import generate_typosquats, write_bundle

OUT = Path(__file__).resolve().parent.parent / "src" / "crate_trust" / "fixtures"

TABLE1 = {
    "conclusion": "c",
    "assumptions": [
        {"id": "1", "body": [], "head": "c", "cost": 100, "label": "aho_corasick is safe."},
        {"id": "2", "body": [], "head": "m", "cost": 100, "label": "memchr is safe."},
        {"id": "3", "body": [], "head": "d", "cost": 30, "label": "aho_corasick has many downloads."},
        {"id": "4", "body": ["d"], "head": "c", "cost": 20,
         "label": "If aho_corasick has many downloads, then it is safe."},
        {"id": "5", "body": [], "head": "a", "cost": 20, "label": "Alice is trustworthy."},
        {"id": "6", "body": [], "head": "b", "cost": 5, "label": "Bob is trustworthy."},
        {"id": "7", "body": ["a", "m"], "head": "c", "cost": 10,
         "label": "If Alice is trustworthy and memchr is safe, then aho_corasick is safe."},
        {"id": "8", "body": ["b"], "head": "m", "cost": 10, "label": "If Bob is trustworthy, then memchr is safe."},
    ],
}


def scan(count: int, *extra: ToolResult) -> tuple[ToolResult, ...]:
    return (ToolResult(SIDE_EFFECT_TOOL, side_effect_count=count), *extra)


def crate(name, version, downloads, authors, stars=0, forks=0, deps=(), audits=(), tools=None, advisories=()):
    return CrateRecord(
        name=name,
        version=version,
        downloads=downloads,
        authors=tuple(authors),
        stars=stars,
        forks=forks,
        dependencies=tuple((d.name, f"={d.version}") for d in deps),
        audits=tuple(audits),
        tool_results=scan(0) if tools is None else tools,
        advisories=tuple(advisories),
    )


def leaf(name, version, downloads, author, stars=0):
    return crate(name, version, downloads, [author], stars=stars)


def fig3b() -> None:
    """Two typosquatting incidents: serde_yaml/serde_yml and fast_log/faster_log."""
    indexmap = leaf("indexmap", "2.2.6", 300_000_000, "bluss", 1_600)
    itoa = leaf("itoa", "1.0.11", 250_000_000, "dtolnay", 400)
    ryu = leaf("ryu", "1.0.18", 240_000_000, "dtolnay", 500)
    serde = leaf("serde", "1.0.203", 350_000_000, "dtolnay", 9_000)
    unsafe_libyaml = leaf("unsafe-libyaml", "0.2.11", 60_000_000, "dtolnay", 150)
    libyml = leaf("libyml", "0.0.3", 900_000, "sebastienrousseau", 30)
    log = leaf("log", "0.4.21", 320_000_000, "rust-lang-owner", 2_100)
    memchr = leaf("memchr", "2.7.4", 330_000_000, "BurntSushi", 1_100)
    fastdate = leaf("fastdate", "0.3.28", 600_000, "zhuxiujia", 20)
    crossbeam = leaf("crossbeam-channel", "0.5.13", 200_000_000, "taiki-e", 7_000)
    parking_lot = leaf("parking_lot", "0.12.3", 250_000_000, "Amanieu", 2_700)

    serde_yaml = crate(
        "serde_yaml", "0.9.33", 120_000_000, ["dtolnay"], 950, 160,
        deps=[indexmap, itoa, ryu, serde, unsafe_libyaml], tools=scan(19),
    )
    serde_yml = crate(
        "serde_yml", "0.0.12", 1_057_000, ["sebastienrousseau"], 3_500, 48,
        deps=[indexmap, itoa, libyml, log, memchr, ryu, serde], tools=scan(19),
    )
    fast_log = crate(
        "fast_log", "1.7.7", 2_290_000, ["zhuxiujia"], 470, 40,
        deps=[log, fastdate, crossbeam, parking_lot], tools=scan(14),
    )
    faster_log = crate(
        "faster_log", "1.7.8", 21_544, ["unknown"], 0, 0,
        deps=[log, fastdate, crossbeam, parking_lot], tools=scan(7),
    )
    records = [indexmap, itoa, ryu, serde, unsafe_libyaml, libyml, log, memchr, fastdate, crossbeam,
               parking_lot, serde_yaml, serde_yml, fast_log, faster_log]
    roots = [serde_yaml.key, serde_yml.key, fast_log.key, faster_log.key]
    assumptions = {"trusted_authors": ["dtolnay"], "costs": {"trusted_author": 6}}
    write_bundle(OUT / "fig3b", records, roots, assumptions, [(serde_yaml.key, serde_yml.key),
                                                              (fast_log.key, faster_log.key)])


def typosquat_base() -> None:
    """Ten popular crates whose reputation the typosquat generator strips away."""
    google = Audit("google", "safe-to-deploy", "1.0.0..2.0.0")
    mozilla = Audit("mozilla", "safe-to-deploy", "0.4.20")
    cfg_if = leaf("cfg-if", "1.0.0", 400_000_000, "alexcrichton", 500)
    libc = crate("libc", "0.2.155", 450_000_000, ["rust-lang-owner"], 2_000, 900, tools=scan(3))
    memchr = crate("memchr", "2.7.4", 330_000_000, ["BurntSushi"], 1_100, 100, audits=[Audit("google", "safe-to-deploy", "2.7.4")])
    aho = crate("aho-corasick", "1.1.3", 240_000_000, ["BurntSushi"], 1_000, 90, deps=[memchr])
    syntax = leaf("regex-syntax", "0.8.4", 260_000_000, "BurntSushi", 3_400)
    itoa = leaf("itoa", "1.0.11", 250_000_000, "dtolnay", 400)
    ryu = leaf("ryu", "1.0.18", 240_000_000, "dtolnay", 500)
    serde = crate("serde", "1.0.203", 350_000_000, ["dtolnay"], 9_000, 750, tools=scan(2))
    getrandom = crate("getrandom", "0.2.15", 300_000_000, ["newpavlov"], 250, 180, deps=[cfg_if, libc], tools=scan(4))
    rand_core = crate("rand_core", "0.6.4", 280_000_000, ["dhardy"], 1_500, 400, deps=[getrandom])
    bytes_ = crate("bytes", "1.6.0", 250_000_000, ["carllerche"], 1_800, 280, tools=scan(1))
    pin = leaf("pin-project-lite", "0.2.14", 230_000_000, "taiki-e", 200)

    originals = [
        crate("anyhow", "1.0.86", 250_000_000, ["dtolnay"], 5_000, 150, tools=scan(2)),
        crate("serde_json", "1.0.117", 330_000_000, ["dtolnay"], 4_700, 540, deps=[itoa, ryu, serde], tools=scan(6),
              audits=[google]),
        crate("regex", "1.10.5", 310_000_000, ["BurntSushi"], 3_400, 430, deps=[aho, memchr, syntax], tools=scan(5)),
        crate("rand", "0.8.5", 320_000_000, ["dhardy"], 1_600, 420, deps=[libc, rand_core], tools=scan(9),
              advisories=[Advisory("RUSTSEC-2026-0007", "informational", patched_in_queried_version=True)]),
        crate("log", "0.4.21", 320_000_000, ["rust-lang-owner"], 2_100, 250, deps=[cfg_if], tools=scan(12),
              audits=[mozilla]),
        crate("clap", "4.5.7", 260_000_000, ["epage"], 13_000, 1_000, tools=scan(21)),
        crate("tokio", "1.38.0", 210_000_000, ["carllerche"], 25_000, 2_300, deps=[bytes_, pin, libc],
              tools=scan(48, ToolResult(MIRI, flagged=False))),
        crate("hashbrown", "0.14.5", 280_000_000, ["Amanieu"], 2_300, 270, tools=scan(1)),
        itoa,
        crate("once_cell", "1.19.0", 340_000_000, ["matklad"], 1_800, 110),
    ]
    deps = [cfg_if, libc, memchr, aho, syntax, ryu, serde, getrandom, rand_core, bytes_, pin]
    assumptions = {"trusted_authors": ["dtolnay", "BurntSushi", "rust-lang-owner"]}
    write_bundle(OUT / "typosquat_base", deps + originals, [r.key for r in originals], assumptions)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "table1.json").write_text(json.dumps(TABLE1, indent=2) + "\n")
    for name in ("fig3b", "typosquat_base"):
        shutil.rmtree(OUT / name, ignore_errors=True)
    fig3b()
    typosquat_base()
    generate_typosquats(OUT / "typosquat_base", OUT / "typosquats")


if __name__ == "__main__":
    main()
