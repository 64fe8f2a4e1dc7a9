"""Command line: ``acop generate | run | analyze | peer``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import kernels
from .analysis import format_summary, write_report
from .constraints import SendPolicy
from .experiment import generate, load_manifest, planned_size, read_results, run_batch, write_results
from .model import AgentProfile, Protocol, StrategyKind
from .protocol import SessionConfig, write_transcript
from .scenario import load_scenario
from .wire import DecodeError, dial_session, listen, serve_session

log = logging.getLogger("acop")

GRIDS = {"lin": ["lin"], "log": ["log"], "both": ["lin", "log"]}
RANGES = {"100": [100], "25": [25], "both": [100, 25]}


def parse_counts(text: str) -> list[int]:
    """``"0-12"`` or ``"0,3,5"`` or a mix such as ``"0,2-4"``."""
    out: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-")
            out.update(range(int(lo), int(hi) + 1))
        elif part:
            out.add(int(part))
    return sorted(out)


def cmd_generate(args) -> int:
    if args.paper_scale:
        args.scenarios, args.range, args.grid, args.constraint_counts = 300, "both", "both", "0-12"
    counts = parse_counts(args.constraint_counts)
    grids = GRIDS[args.grid]
    n = planned_size(args.scenarios, counts, grids)
    if args.dry_run:
        print(f"configurations: {n}")
        print(f"negotiations:   {4 * n}")
        return 0
    manifest = generate(
        args.out,
        seed=args.seed,
        n_base=args.scenarios,
        ranges=RANGES[args.range],
        constraint_counts=counts,
        grids=grids,
    )
    print(f"wrote {manifest['n_configurations']} configurations to {Path(args.out) / 'manifest.json'}")
    return 0


def cmd_run(args) -> int:
    manifest, configs = load_manifest(args.manifest)
    seed = manifest["master_seed"] if args.seed is None else args.seed
    indexed = list(enumerate(configs))
    if args.filter:
        indexed = [(i, c) for i, c in indexed if c.id.startswith(args.filter)]
    out = Path(args.out)
    journal = out.with_name(out.name + ".journal")
    started = time.perf_counter()
    rows = run_batch(
        [c for _, c in indexed],
        seed,
        SendPolicy(args.policy),
        workers=args.workers,
        indices=[i for i, _ in indexed],
        journal=journal,
    )
    write_results(out, rows)
    journal.unlink(missing_ok=True)
    print(
        f"{len(rows)} sessions over {len(indexed)} configurations in "
        f"{time.perf_counter() - started:.1f}s ({kernels.backend()} kernels) -> {out}"
    )
    return 0


def cmd_analyze(args) -> int:
    rows = read_results(args.results)
    summary = write_report(args.out, rows, per_agent=args.per_agent)
    if summary["orphans"]:
        print(f"excluded {len(summary['orphans'])} rows without an AOP/ACOP counterpart", file=sys.stderr)
    print(format_summary(summary))
    return 0


def cmd_peer(args) -> int:
    scenario, rho_a, rho_b = load_scenario(args.scenario)
    rho_a = args.rho_a if args.rho_a is not None else rho_a
    rho_b = args.rho_b if args.rho_b is not None else rho_b
    if rho_a is None or rho_b is None:
        print("reservation values missing: pass --rho-a/--rho-b", file=sys.stderr)
        return 2
    strategy = StrategyKind(args.strategy)
    protocol = Protocol(args.protocol)
    config = SessionConfig(
        space=scenario.space,
        profile_a=AgentProfile(scenario.utility_a, rho_a, strategy, protocol),
        profile_b=AgentProfile(scenario.utility_b, rho_b, strategy, protocol),
        protocol=protocol,
        seed=args.seed,
        policy=SendPolicy(args.policy),
    )
    listening = args.listen if args.listen is not None else args.role == "B"
    try:
        if listening:
            with listen(args.address) as server:
                result = serve_session(server, args.role, config, args.sid)
        else:
            result = dial_session(args.address, args.role, config, args.sid)
    except DecodeError as exc:
        print(f"decode error [{exc.code}]: {exc.detail}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"connection failed: {exc}", file=sys.stderr)
        return 4
    record = result.record
    if args.transcript:
        write_transcript(record, args.transcript)
    print(
        json.dumps(
            {
                "role": args.role,
                "success": record.success,
                "message_count": record.message_count,
                "utility_a": record.utility_a,
                "utility_b": record.utility_b,
                "termination_reason": record.termination_reason.value,
                "bytes_sent": result.bytes_sent,
                "bytes_received": result.bytes_received,
            }
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acop", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build a batch of configurations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenarios", type=int, default=50, help="number of base scenarios")
    p.add_argument("--constraint-counts", default="0-12")
    p.add_argument("--grid", choices=sorted(GRIDS), default="lin")
    p.add_argument("--range", choices=sorted(RANGES), default="100")
    p.add_argument("--out", default="batch")
    p.add_argument("--paper-scale", action="store_true", help="300 bases, both ranges and grids, 0-12 constraints")
    p.add_argument("--dry-run", action="store_true", help="print the configuration count only")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run the four strategy/protocol sessions per configuration")
    p.add_argument("manifest")
    p.add_argument("--out", default="results.csv")
    p.add_argument("--seed", type=int, default=None, help="override the manifest's master seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--policy", choices=[s.value for s in SendPolicy], default="reactive")
    p.add_argument("--filter", default="", help="only configuration ids with this prefix")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="summarise a results CSV")
    p.add_argument("results")
    p.add_argument("--out", default="analysis")
    p.add_argument("--per-agent", action="store_true", help="categorise each agent's utility separately")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("peer", help="play one side of a session over TCP")
    p.add_argument("--role", choices=["A", "B"], required=True)
    p.add_argument("--address", default="127.0.0.1:7878")
    p.add_argument("--scenario", required=True)
    p.add_argument("--listen", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--protocol", choices=[x.value for x in Protocol], default="acop")
    p.add_argument("--strategy", choices=[x.value for x in StrategyKind], default="concession")
    p.add_argument("--policy", choices=[s.value for s in SendPolicy], default="reactive")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sid", default="session")
    p.add_argument("--rho-a", type=float, default=None)
    p.add_argument("--rho-b", type=float, default=None)
    p.add_argument("--transcript", default=None, help="write the JSONL transcript here")
    p.set_defaults(func=cmd_peer)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
