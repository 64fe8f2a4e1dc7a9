"""Batch generation and the four-way strategy x protocol runs."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .constraints import SendPolicy
from .model import AgentProfile, Protocol, StrategyKind
from .protocol import SessionConfig, derive_agent_seed, run_session
from .scenario import (
    Configuration,
    Scenario,
    batch_size,
    build_batch,
    count_solutions,
    dump_scenario,
    load_scenario,
)

log = logging.getLogger(__name__)

CSV_HEADER = (
    "config_id",
    "strategy",
    "protocol",
    "success",
    "message_count",
    "utility_a",
    "utility_b",
    "termination_reason",
    "n_constraints_injected",
    "rho_a",
    "rho_b",
    "n_solutions",
    "seed",
)

PAIRINGS = tuple((s, p) for s in StrategyKind for p in Protocol)


@dataclass(frozen=True)
class ResultRow:
    config_id: str
    strategy: str
    protocol: str
    success: bool
    message_count: int
    utility_a: float
    utility_b: float
    termination_reason: str
    n_constraints_injected: int
    rho_a: float
    rho_b: float
    n_solutions: int
    seed: int

    def cells(self) -> list[str]:
        return [
            self.config_id,
            self.strategy,
            self.protocol,
            "true" if self.success else "false",
            str(self.message_count),
            repr(self.utility_a),
            repr(self.utility_b),
            self.termination_reason,
            str(self.n_constraints_injected),
            repr(self.rho_a),
            repr(self.rho_b),
            str(self.n_solutions),
            str(self.seed),
        ]

    @classmethod
    def from_cells(cls, row: dict[str, str]) -> ResultRow:
        return cls(
            config_id=row["config_id"],
            strategy=row["strategy"],
            protocol=row["protocol"],
            success=row["success"] == "true",
            message_count=int(row["message_count"]),
            utility_a=float(row["utility_a"]),
            utility_b=float(row["utility_b"]),
            termination_reason=row["termination_reason"],
            n_constraints_injected=int(row["n_constraints_injected"]),
            rho_a=float(row["rho_a"]),
            rho_b=float(row["rho_b"]),
            n_solutions=int(row["n_solutions"]),
            seed=int(row["seed"]),
        )


def session_seed(master_seed: int, config_index: int) -> int:
    return derive_agent_seed(master_seed, config_index, 0)


def session_config(
    config: Configuration,
    strategy: StrategyKind,
    protocol: Protocol,
    seed: int,
    policy: SendPolicy = SendPolicy.REACTIVE,
) -> SessionConfig:
    sc = config.scenario
    return SessionConfig(
        space=sc.space,
        profile_a=AgentProfile(sc.utility_a, config.rho_a, strategy, protocol),
        profile_b=AgentProfile(sc.utility_b, config.rho_b, strategy, protocol),
        protocol=protocol,
        seed=seed,
        policy=policy,
    )


def run_configuration(
    config: Configuration,
    config_index: int,
    master_seed: int,
    policy: SendPolicy = SendPolicy.REACTIVE,
    n_solutions: int | None = None,
) -> list[ResultRow]:
    """The four sessions of one configuration; all four share one seed."""
    seed = session_seed(master_seed, config_index)
    if n_solutions is None:
        n_solutions = count_solutions(config)
    rows = []
    for strategy, protocol in PAIRINGS:
        record = run_session(session_config(config, strategy, protocol, seed, policy), keep_transcript=False)
        rows.append(
            ResultRow(
                config_id=config.id,
                strategy=strategy.value,
                protocol=protocol.value,
                success=record.success,
                message_count=record.message_count,
                utility_a=record.utility_a,
                utility_b=record.utility_b,
                termination_reason=record.termination_reason.value,
                n_constraints_injected=int(config.scenario.provenance.get("injected", 0)),
                rho_a=config.rho_a,
                rho_b=config.rho_b,
                n_solutions=n_solutions,
                seed=seed,
            )
        )
    return rows


def sort_rows(rows: Iterable[ResultRow]) -> list[ResultRow]:
    return sorted(rows, key=lambda r: (r.config_id, r.strategy, r.protocol))


def _run_chunk(args) -> list[ResultRow]:
    configs, indices, master_seed, policy = args
    cache: dict = {}
    out = []
    for config, index in zip(configs, indices):
        out.extend(run_configuration(config, index, master_seed, policy, count_solutions(config, cache)))
    return out


def run_batch(
    configs: Sequence[Configuration],
    master_seed: int,
    policy: SendPolicy = SendPolicy.REACTIVE,
    workers: int = 1,
    indices: Sequence[int] | None = None,
    journal: Path | None = None,
) -> list[ResultRow]:
    """Run every configuration; output order and seeds ignore ``workers``.

    With ``journal`` set, finished configurations are appended to that file
    as they complete and skipped on a later call.
    """
    if indices is None:
        indices = range(len(configs))
    done: dict[str, list[ResultRow]] = _read_journal(journal) if journal else {}
    todo = [(c, i) for c, i in zip(configs, indices) if c.id not in done]
    chunks = [todo[k : k + 50] for k in range(0, len(todo), 50)]
    jobs = [([c for c, _ in ch], [i for _, i in ch], master_seed, policy) for ch in chunks]
    rows = [r for rs in done.values() for r in rs]
    sink = open(journal, "a", encoding="utf-8") if journal else None
    try:
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                results = pool.map(_run_chunk, jobs)
                for chunk_rows in results:
                    rows.extend(chunk_rows)
                    _append_journal(sink, chunk_rows)
        else:
            for job in jobs:
                chunk_rows = _run_chunk(job)
                rows.extend(chunk_rows)
                _append_journal(sink, chunk_rows)
    finally:
        if sink:
            sink.close()
    return sort_rows(rows)


def _append_journal(sink, rows: list[ResultRow]) -> None:
    if sink is None:
        return
    for row in rows:
        sink.write(json.dumps(row.cells()) + "\n")
    sink.flush()


def _read_journal(journal: Path) -> dict[str, list[ResultRow]]:
    done: dict[str, list[ResultRow]] = {}
    if not journal or not os.path.exists(journal):
        return done
    with open(journal, encoding="utf-8") as fh:
        for line in fh:
            try:
                cells = json.loads(line)
            except ValueError:
                break  # torn final line from an interrupted run
            row = ResultRow.from_cells(dict(zip(CSV_HEADER, cells)))
            done.setdefault(row.config_id, []).append(row)
    return {cid: rows for cid, rows in done.items() if len(rows) == len(PAIRINGS)}


def rows_to_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.cells())
    return buf.getvalue()


def write_results(path, rows: Iterable[ResultRow]) -> None:
    Path(path).write_text(rows_to_csv(rows), encoding="utf-8")


def read_results(path) -> list[ResultRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [ResultRow.from_cells(r) for r in reader]


# --------------------------------------------------------------------------
# manifests


def generate(
    out_dir,
    *,
    seed: int,
    n_base: int,
    ranges: Sequence[int],
    constraint_counts: Sequence[int],
    grids: Sequence[str],
) -> dict:
    """Build a batch and write ``manifest.json`` plus one scenario file per variant."""
    out = Path(out_dir)
    (out / "scenarios").mkdir(parents=True, exist_ok=True)
    configs = build_batch(n_base, ranges, constraint_counts, grids, seed)
    variants: dict[str, Scenario] = {}
    entries = []
    for config in configs:
        sid = config.scenario.provenance["id"]
        variants.setdefault(sid, config.scenario)
        entries.append({"id": config.id, "scenario": sid, "rho_a": config.rho_a, "rho_b": config.rho_b})
    scenarios = []
    for sid in sorted(variants):
        sc = variants[sid]
        rel = f"scenarios/{sid}.json"
        dump_scenario(out / rel, sc)
        scenarios.append(
            {"id": sid, "file": rel, "base": sc.provenance["base"], "range": sc.provenance["range"],
             "n_constraints": sc.provenance["injected"]}
        )
    manifest = {
        "master_seed": seed,
        "params": {
            "n_base": n_base,
            "ranges": list(ranges),
            "constraint_counts": sorted(set(constraint_counts)),
            "grids": list(grids),
            "space": [5] * 5,
        },
        "n_configurations": len(entries),
        "scenarios": scenarios,
        "configurations": entries,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return manifest


def planned_size(n_base: int, constraint_counts: Sequence[int], grids: Sequence[str]) -> int:
    return batch_size(n_base, constraint_counts, grids)


def load_manifest(path) -> tuple[dict, list[Configuration]]:
    path = Path(path)
    root = path.parent
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    variants = {}
    for entry in manifest["scenarios"]:
        file = root / entry["file"]
        if not file.exists():
            raise FileNotFoundError(f"scenario file {file} listed in the manifest is missing")
        scenario, _, _ = load_scenario(file)
        scenario.provenance.update(id=entry["id"], injected=entry["n_constraints"], range=entry["range"])
        variants[entry["id"]] = scenario
    configs = [
        Configuration(e["id"], variants[e["scenario"]], float(e["rho_a"]), float(e["rho_b"]))
        for e in manifest["configurations"]
    ]
    return manifest, configs
