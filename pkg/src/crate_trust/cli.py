"""Command-line entry point: ``crate-trust {logs,trust,bench,gen-fixtures}``.

Exit codes:
    0  success
    1  ``--fail-on`` threshold reached (or the verdict is incomplete)
    2  crate or version not found
    3  network unavailable (including cache misses under ``--offline``)
    4  solver resource limit with no partial verdict
    5  invalid input: configuration, record, instance or dependency cycle
"""

from __future__ import annotations

import csv
import functools
import json
import logging
import sys
import time

import click

from .catalog import load_config
from .errors import (
    CyclicClauses,
    CyclicDependency,
    InvalidConfig,
    NetworkUnavailable,
    NonHornShape,
    NotFound,
    ParseError,
)
from .fetch import AdvisoryFetcher, AuditFetcher, RegistryFetcher, RepositoryStatsFetcher, github_slug
from .fixtures import ROOT as FIXTURES
from .model import CACHE_ENV, DependencyGraph, RecordCache, fetch_record, graph_from_records, resolve_graph
from .sat import Budget
from .solver import SOLVERS, load_query
from .synthetic import generate_typosquats, load_bundle, synthetic_tree
from .verdict import SeverityLabel, Verdict, evaluate, render_report

EXIT_OK = 0
EXIT_FAIL_ON = 1
EXIT_NOT_FOUND = 2
EXIT_NETWORK = 3
EXIT_RESOURCE = 4
EXIT_INVALID = 5

AUDIT_FEEDS = {
    "google": "https://raw.githubusercontent.com/google/supply-chain/main/audits.toml",
    "mozilla": "https://raw.githubusercontent.com/mozilla/supply-chain/main/audits.toml",
    "bytecode-alliance": "https://raw.githubusercontent.com/bytecodealliance/wasmtime/main/supply-chain/audits.toml",
}

BENCH_FIELDS = ("run_id", "crate", "n_dependencies", "algorithm", "status", "wall_ms")


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def handle_errors(fn):
    """Map library errors onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NotFound as exc:
            _fail(EXIT_NOT_FOUND, str(exc))
        except NetworkUnavailable as exc:
            _fail(EXIT_NETWORK, str(exc))
        except InvalidConfig as exc:
            _fail(EXIT_INVALID, "invalid configuration: " + "; ".join(exc.violations))
        except CyclicDependency as exc:
            _fail(EXIT_INVALID, str(exc))
        except (ParseError, NonHornShape, CyclicClauses) as exc:
            _fail(EXIT_INVALID, str(exc))

    return wrapper


class Session:
    """Where records come from for one invocation."""

    def __init__(self, cache_dir: str | None, offline: bool, fixture: str | None):
        self.offline = offline or fixture is not None
        if fixture is not None:
            self.bundle = load_bundle(FIXTURES / fixture)
            self.cache = self.bundle.cache
        else:
            self.bundle = None
            self.cache = RecordCache(cache_dir) if cache_dir else RecordCache.default()
        self._registry: RegistryFetcher | None = None

    @property
    def registry(self) -> RegistryFetcher:
        if self._registry is None:
            self._registry = RegistryFetcher()
        return self._registry

    def fetchers(self):
        registry = self.registry
        return [
            registry,
            RepositoryStatsFetcher(lambda name: github_slug(registry.repository(name)), registry.transport),
            AdvisoryFetcher(registry.transport),
            AuditFetcher(AUDIT_FEEDS, transport=registry.transport),
        ]

    def version(self, name: str, version: str | None) -> str:
        if version:
            return version
        cached = self.cache.latest(name)
        if self.offline:
            if cached is None:
                raise NetworkUnavailable(f"{name} is not cached and network access is disabled")
            return cached
        return self.registry.latest_version(name)

    def fetch(self, name: str, version: str):
        fetchers = () if self.offline else self.fetchers()
        return fetch_record(name, version, fetchers, self.cache, self.offline)

    def graph(self, name: str, version: str | None) -> DependencyGraph:
        root = self.fetch(name, self.version(name, version))
        return resolve_graph(root, self.fetch)

    def config(self, path: str | None):
        if path is None and self.bundle is not None and self.bundle.assumptions is not None:
            path = self.bundle.assumptions
        return load_config(path)


def source_options(fn):
    fn = click.option("--fixture", type=click.Choice(["fig3b", "typosquat_base", "typosquats"]),
                      help="Use a bundled offline fixture bundle as the cache (implies --offline).")(fn)
    fn = click.option("--cache", "cache_dir", envvar=CACHE_ENV, type=click.Path(file_okay=False),
                      help=f"Record cache directory [env: {CACHE_ENV}].")(fn)
    fn = click.option("--offline", is_flag=True, help="Never touch the network; cache misses fail.")(fn)
    fn = click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text", show_default=True)(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", count=True, help="Log fetch and solver progress to stderr.")
def cli(verbose: int):
    """Score how much trust a Rust crate and its dependencies require."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")


# ------------------------------------------------------------------- logs


def _logs_text(graph: DependencyGraph) -> str:
    rec = graph.record(graph.root)
    rows = [
        ("crate", f"{rec.name}@{rec.version}"),
        ("downloads", f"{rec.downloads:,}"),
        ("authors", ", ".join(rec.authors) or "-"),
        ("stars", str(rec.stars)),
        ("forks", str(rec.forks)),
        ("side_effects", "-" if rec.side_effect_count is None else str(rec.side_effect_count)),
    ]
    for a in rec.audits:
        rows.append(("audit", f"{a.organization} {a.criteria} {a.version} {'passed' if a.passed else 'failed'}"))
    for t in rec.tool_results:
        detail = f"side_effects={t.side_effect_count}" if t.side_effect_count is not None else \
            ("flagged" if t.flagged else "clean")
        rows.append(("tool", f"{t.tool} {detail}"))
    for adv in rec.advisories:
        rows.append(("advisory", f"{adv.id} {adv.severity}" + (" (patched)" if adv.patched_in_queried_version else "")))
    width = max(len(k) for k, _ in rows)
    lines = [f"{k + ':':<{width + 1}} {v}" for k, v in rows]
    direct = graph.dependencies(graph.root)
    lines.append(f"dependencies: {len(direct)} direct, {len(graph) - 1} transitive")
    for key in direct:
        lines.append(f"  - {key[0]}@{key[1]}")
    return "\n".join(lines) + "\n"


def _logs_json(graph: DependencyGraph) -> str:
    data = graph.record(graph.root).to_dict()
    data["resolved_dependencies"] = [f"{n}@{v}" for n, v in graph.dependencies(graph.root)]
    data["transitive_dependencies"] = sorted(f"{n}@{v}" for n, v in graph.nodes if (n, v) != graph.root)
    return json.dumps(data, indent=2) + "\n"


@cli.command()
@click.argument("crate")
@click.argument("version", required=False)
@source_options
@handle_errors
def logs(crate, version, fmt, offline, cache_dir, fixture):
    """Show the collected metadata for CRATE and its resolved dependencies."""
    session = Session(cache_dir, offline, fixture)
    graph = session.graph(crate, version)
    click.echo(_logs_json(graph) if fmt == "json" else _logs_text(graph), nl=False)


# ------------------------------------------------------------------ trust


def _instance_report(path: str, algorithm: str, timeout: float, fmt: str) -> int:
    query = load_query(path, Budget(seconds=timeout))
    solution = SOLVERS[algorithm](query)
    by_id = query.by_id()
    chosen = [by_id[i] for i in solution.chosen]
    if fmt == "json":
        click.echo(json.dumps({
            "instance": str(path),
            "status": solution.status.value,
            "trust_cost": solution.min_cost,
            "trust_assumptions": [{"id": a.id, "label": a.label, "cost": a.cost} for a in chosen],
        }, indent=2))
    else:
        click.echo(f"instance: {path}")
        click.echo(f"trust_cost: {solution.min_cost if solution.solved else solution.status.value}")
        click.echo("Assumptions for Trusting:")
        for a in chosen:
            click.echo(f"  - [{a.cost}] {a.label or a.id}")
    return EXIT_OK if solution.solved or solution.status.value == "infeasible" else EXIT_RESOURCE


def _trust_exit(verdict: Verdict, fail_on: str | None) -> int:
    if verdict.trust_cost is None and verdict.distrust_cost is None:
        return EXIT_RESOURCE
    if fail_on is None:
        return EXIT_OK
    if verdict.label is None:
        # a partial verdict cannot show the crate is below the gate
        return EXIT_FAIL_ON
    return EXIT_FAIL_ON if verdict.label >= SeverityLabel[fail_on] else EXIT_OK


@cli.command()
@click.argument("crate", required=False)
@click.argument("version", required=False)
@source_options
@click.option("--assumptions", "assumptions_path", type=click.Path(dir_okay=False, exists=True),
              help="JSON cost configuration (costs, trusted authors, anchors, bands).")
@click.option("--algorithm", type=click.Choice(sorted(SOLVERS)), default="horn", show_default=True)
@click.option("--timeout", type=click.FloatRange(min=0, min_open=True), default=600.0, show_default=True,
              help="Seconds allowed per query (trust and distrust are timed separately).")
@click.option("--fail-on", type=click.Choice([s.name for s in SeverityLabel]),
              help="Exit 1 when the label is at least this severe.")
@click.option("--instance", "instance_path", type=click.Path(dir_okay=False, exists=True),
              help="Solve a raw minimum-trust instance (JSON) instead of a crate.")
@handle_errors
def trust(crate, version, fmt, offline, cache_dir, fixture, assumptions_path, algorithm, timeout, fail_on,
          instance_path):
    """Compute trust and distrust costs and the severity label for CRATE."""
    if instance_path is not None:
        sys.exit(_instance_report(instance_path, algorithm, timeout, fmt))
    if crate is None:
        raise click.UsageError("CRATE is required unless --instance is given")
    session = Session(cache_dir, offline, fixture)
    cfg = session.config(assumptions_path)
    graph = session.graph(crate, version)
    verdict = evaluate(graph.record(graph.root), graph, cfg, algorithm, Budget(seconds=timeout))
    color = fmt == "text" and sys.stdout.isatty()
    click.echo(render_report(verdict, fmt, color=color), nl=False)
    sys.exit(_trust_exit(verdict, fail_on))


# ------------------------------------------------------------------ bench


def _int_list(ctx, param, value: str) -> list[int]:
    try:
        out = []
        for part in value.split(","):
            if "-" in part:
                lo, hi = part.split("-")
                out += range(int(lo), int(hi) + 1)
            elif part:
                out.append(int(part))
        return out
    except ValueError:
        raise click.BadParameter("expected numbers like 1,5,10 or 1-10") from None


def bench_rows(sizes, algorithms, seed: int, timeout: float, repeat: int = 1):
    """One row per (tree size, algorithm, repetition) on deterministic synthetic trees."""
    run = 0
    for n in sizes:
        records, root = synthetic_tree(n, seed)
        graph = graph_from_records(records, root)
        for algorithm in algorithms:
            for _ in range(repeat):
                run += 1
                started = time.perf_counter()
                try:
                    verdict = evaluate(graph.record(root), graph, load_config(None), algorithm,
                                       Budget(seconds=timeout))
                    status = "solved" if verdict.complete else "timeout"
                except Exception:  # noqa: BLE001 - a failed run is reported, not fatal
                    logging.getLogger(__name__).exception("bench run %d failed", run)
                    status = "error"
                wall_ms = (time.perf_counter() - started) * 1000
                yield {
                    "run_id": run,
                    "crate": root[0],
                    "n_dependencies": n,
                    "algorithm": algorithm,
                    "status": status,
                    "wall_ms": f"{wall_ms:.1f}",
                }


@cli.command()
@click.option("--sizes", default="1-10", callback=_int_list, show_default=True,
              help="Dependency counts of the generated trees.")
@click.option("--algorithms", default="naive,horn", show_default=True,
              help="Comma-separated solvers to time.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--timeout", type=click.FloatRange(min=0, min_open=True), default=600.0, show_default=True)
@click.option("--repeat", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--out", type=click.File("w"), default="-", help="CSV destination (default stdout).")
def bench(sizes, algorithms, seed, timeout, repeat, out):
    """Time the solvers on synthetic dependency trees and print CSV."""
    names = [a.strip() for a in algorithms.split(",") if a.strip()]
    unknown = [a for a in names if a not in SOLVERS]
    if unknown:
        raise click.BadParameter(f"unknown algorithm(s): {', '.join(unknown)}", param_hint="--algorithms")
    writer = csv.DictWriter(out, fieldnames=BENCH_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in bench_rows(sizes, names, seed, timeout, repeat):
        writer.writerow(row)
        out.flush()


# ----------------------------------------------------------- gen-fixtures


@cli.command("gen-fixtures")
@click.option("--base", type=click.Path(file_okay=False, exists=True), default=str(FIXTURES / "typosquat_base"),
              show_default="bundled typosquat_base", help="Base fixture bundle.")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Directory for the new bundle.")
def gen_fixtures(base, out):
    """Write a bundle with one typosquat variant per crate of the base bundle."""
    try:
        bundle = generate_typosquats(base, out)
    except (OSError, FileExistsError) as exc:
        _fail(EXIT_INVALID, str(exc))
    for original, variant in bundle.pairs:
        click.echo(f"{original[0]}@{original[1]} -> {variant[0]}@{variant[1]}")


def main():  # pragma: no cover
    cli()


if __name__ == "__main__":  # pragma: no cover
    main()
