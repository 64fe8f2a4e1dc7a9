import csv
import json
import shutil
from dataclasses import replace

import pytest

from acop import SendPolicy, cli
from acop import experiment as ex
from acop.analysis import Category, analyze, box_stats, categorize, pair_rows, write_report
from acop.experiment import CSV_HEADER, ResultRow, load_manifest, read_results, rows_to_csv, run_batch
from acop.scenario import count_solutions


@pytest.fixture(scope="module")
def tiny(tmp_path_factory):
    out = tmp_path_factory.mktemp("batch")
    assert cli.main(["generate", "--seed", "5", "--scenarios", "2", "--constraint-counts", "0,1", "--grid", "lin", "--out", str(out)]) == 0
    return out


def small_manifest(src, dst, n=4):
    shutil.copytree(src, dst)
    data = json.loads((dst / "manifest.json").read_text())
    data["configurations"] = data["configurations"][:n]
    data["n_configurations"] = n
    (dst / "manifest.json").write_text(json.dumps(data, indent=1) + "\n")
    return dst / "manifest.json"


# --- generate --------------------------------------------------------------


def test_generate_tiny_batch(tiny):
    manifest = json.loads((tiny / "manifest.json").read_text())
    assert manifest["n_configurations"] == 400 == len(manifest["configurations"])
    assert len(list((tiny / "scenarios").glob("*.json"))) == 4
    ids = [c["id"] for c in manifest["configurations"]]
    assert ids == sorted(ids) and len(set(ids)) == 400


def test_generate_rerun_is_byte_identical(tiny, tmp_path):
    cli.main(["generate", "--seed", "5", "--scenarios", "2", "--constraint-counts", "0,1", "--out", str(tmp_path)])
    assert (tmp_path / "manifest.json").read_bytes() == (tiny / "manifest.json").read_bytes()
    for f in (tiny / "scenarios").iterdir():
        assert (tmp_path / "scenarios" / f.name).read_bytes() == f.read_bytes()


def test_generate_dry_run(tmp_path, capsys):
    out = tmp_path / "never"
    assert cli.main(["generate", "--paper-scale", "--dry-run", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "configurations: 776100" in text
    assert "negotiations:   3104400" in text
    assert not out.exists()


def test_parse_counts():
    assert cli.parse_counts("0-12") == list(range(13))
    assert cli.parse_counts("0,2-4, 9") == [0, 2, 3, 4, 9]


def test_load_manifest_missing_scenario(tiny, tmp_path):
    path = small_manifest(tiny, tmp_path / "m")
    next((tmp_path / "m" / "scenarios").iterdir()).unlink()
    with pytest.raises(FileNotFoundError):
        load_manifest(path)


# --- run -------------------------------------------------------------------


def test_run_four_configs(tiny, tmp_path):
    manifest = small_manifest(tiny, tmp_path / "m")
    out = tmp_path / "r.csv"
    assert cli.main(["run", str(manifest), "--out", str(out)]) == 0
    rows = read_results(out)
    assert len(rows) == 16
    assert [(r.config_id, r.strategy, r.protocol) for r in rows] == sorted((r.config_id, r.strategy, r.protocol) for r in rows)
    with open(out, newline="") as fh:
        assert tuple(next(csv.reader(fh))) == CSV_HEADER
    for cid in {r.config_id for r in rows}:
        mine = [r for r in rows if r.config_id == cid]
        assert {(r.strategy, r.protocol) for r in mine} == {(s.value, p.value) for s, p in ex.PAIRINGS}
        assert len({r.seed for r in mine}) == 1
    first = out.read_bytes()
    cli.main(["run", str(manifest), "--out", str(out)])
    assert out.read_bytes() == first
    assert not (tmp_path / "r.csv.journal").exists()


def test_run_filter_keeps_global_seeds(tiny, tmp_path):
    manifest = tiny / "manifest.json"
    _, configs = load_manifest(manifest)
    target = configs[7].id
    out = tmp_path / "one.csv"
    cli.main(["run", str(manifest), "--out", str(out), "--filter", target])
    rows = read_results(out)
    assert {r.config_id for r in rows} == {target}
    assert rows == ex.sort_rows(ex.run_configuration(configs[7], 7, 5))


def test_impossible_config_never_succeeds(tiny):
    _, configs = load_manifest(tiny / "manifest.json")
    impossible = [(i, c) for i, c in enumerate(configs) if count_solutions(c) == 0]
    assert impossible
    for i, c in impossible[:5]:
        for row in ex.run_configuration(c, i, 5):
            assert not row.success and row.utility_a == row.utility_b == 0
            assert row.n_solutions == 0


def test_workers_do_not_change_output(tiny):
    _, configs = load_manifest(tiny / "manifest.json")
    subset = configs[:60]
    assert rows_to_csv(run_batch(subset, 5, workers=2)) == rows_to_csv(run_batch(subset, 5, workers=1))


def test_journal_resume(tiny, tmp_path, monkeypatch):
    _, configs = load_manifest(tiny / "manifest.json")
    subset = configs[:60]
    full = run_batch(subset, 5)
    journal = tmp_path / "j"
    # a finished first chunk plus a torn line from an interrupted run
    lines = [json.dumps(r.cells()) for r in full if r.config_id in {c.id for c in subset[:10]}]
    journal.write_text("\n".join(lines) + '\n["s000-n0', encoding="utf-8")
    calls = []
    real = ex.run_configuration
    monkeypatch.setattr(ex, "run_configuration", lambda c, *a, **k: calls.append(c.id) or real(c, *a, **k))
    resumed = run_batch(subset, 5, journal=journal)
    assert len(calls) == 50 and not set(calls) & {c.id for c in subset[:10]}
    assert resumed == full


def test_policy_is_passed_through(tiny):
    _, configs = load_manifest(tiny / "manifest.json")
    for policy in SendPolicy:
        for s, p in ex.PAIRINGS:
            assert ex.session_config(configs[0], s, p, 1, policy).policy is policy


def test_row_cells_roundtrip():
    row = ResultRow("c", "random", "acop", True, 12, 61.2, 0.1 + 0.2, "accepted", 3, 0.55, 0.6000000000000001, 17, 2**63 + 5)
    assert ResultRow.from_cells(dict(zip(CSV_HEADER, row.cells()))) == row
    assert row.cells()[3] == "true"


# --- analyze ---------------------------------------------------------------


def _row(cid, protocol, count, ua, ub, n_solutions=5, strategy="concession"):
    return ResultRow(cid, strategy, protocol, ua > 0, count, ua, ub, "accepted", 0, 0.5, 0.5, n_solutions, 1)


def test_two_row_fixture():
    rows = [_row("c", "aop", 10, 70.0, 60.0), _row("c", "acop", 4, 70.0, 60.0)]
    pairs, orphans = pair_rows(rows)
    assert not orphans and pairs[0].saved == 6
    assert categorize(pairs[0].acop, pairs[0].aop) is Category.EQUAL


def test_identity_input(tiny):
    _, configs = load_manifest(tiny / "manifest.json")
    aop = [r for r in run_batch(configs[:20], 5) if r.protocol == "aop"]
    rows = aop + [replace(r, protocol="acop") for r in aop]
    summary = analyze(rows)
    for strategy in ("random", "concession"):
        stats = summary["messages_saved"][strategy]["all"]
        assert all(stats[k] == 0 for k in ("mean", "median", "q1", "q3", "min", "max"))
        assert summary["categories"][strategy]["equal"] == 100.0


def test_ten_row_recomputation():
    # hand-computed in a spreadsheet: saved = [6, 0, -2, 388, 4]
    rows = [
        _row("c1", "aop", 10, 70.0, 60.0), _row("c1", "acop", 4, 70.0, 60.0),
        _row("c2", "aop", 20, 55.0, 60.0), _row("c2", "acop", 20, 60.0, 60.0),
        _row("c3", "aop", 5, 50.0, 50.0), _row("c3", "acop", 7, 0.0, 0.0),
        _row("c4", "aop", 400, 50.0, 70.0, 0), _row("c4", "acop", 12, 70.0, 50.0, 0),
        _row("c5", "aop", 7, 70.0, 70.0, 0), _row("c5", "acop", 3, 80.0, 80.0, 0),
    ]
    summary = analyze(rows)
    saved = summary["messages_saved"]["concession"]
    assert saved["all"]["mean"] == pytest.approx(79.2)
    assert (saved["all"]["median"], saved["all"]["q1"], saved["all"]["q3"]) == (4, 0, 6)
    assert (saved["all"]["whisker_low"], saved["all"]["whisker_high"], saved["all"]["max"]) == (-2, 6, 388)
    assert saved["possible"]["mean"] == pytest.approx(4 / 3)
    assert saved["impossible"]["mean"] == 196
    assert summary["possible_fraction"] == 0.6
    assert summary["categories"]["concession"] == {
        "much_better": 20.0, "better": 20.0, "equal": 40.0, "worse": 0.0, "much_worse": 20.0,
    }
    per_agent = analyze(rows, per_agent=True)["categories"]["concession"]
    # per agent: c1 =,= c2 +5,= c3 -50,-50 c4 +20,-20 c5 +10,+10
    assert per_agent == {"much_better": 10.0, "better": 30.0, "equal": 30.0, "worse": 0.0, "much_worse": 30.0}


def test_much_needs_more_than_ten():
    a = _row("c", "aop", 5, 50.0, 50.0)
    assert categorize(_row("c", "acop", 5, 60.0, 50.0), a) is Category.BETTER
    assert categorize(_row("c", "acop", 5, 60.5, 50.0), a) is Category.MUCH_BETTER
    assert categorize(_row("c", "acop", 5, 40.0, 50.0), a) is Category.WORSE
    assert categorize(_row("c", "acop", 5, 39.0, 50.0), a) is Category.MUCH_WORSE


def test_orphans_reported_and_excluded():
    rows = [_row("c", "aop", 10, 70.0, 60.0), _row("c", "acop", 4, 70.0, 60.0), _row("d", "aop", 3, 1.0, 1.0)]
    summary = analyze(rows)
    assert summary["orphans"] == [["d", "concession"]] and summary["n_pairs"] == 1


def test_box_stats_whiskers():
    s = box_stats([1, 2, 3, 4, 100])
    assert (s["q1"], s["median"], s["q3"]) == (2, 3, 4)
    assert s["whisker_high"] == 4 and s["max"] == 100


def test_analyze_cli_outputs(tiny, tmp_path, capsys):
    _, configs = load_manifest(tiny / "manifest.json")
    results = tmp_path / "r.csv"
    ex.write_results(results, run_batch(configs[:100], 5))
    out = tmp_path / "an"
    assert cli.main(["analyze", str(results), "--out", str(out)]) == 0
    assert "messages saved" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text())
    for cats in summary["categories"].values():
        assert sum(cats.values()) == pytest.approx(100, abs=0.01)
    with open(out / "length_histogram.csv", newline="") as fh:
        hist = list(csv.DictReader(fh))
    assert {(h["strategy"], h["protocol"]) for h in hist} == {(s.value, p.value) for s, p in ex.PAIRINGS}
    for key in {(h["strategy"], h["protocol"]) for h in hist}:
        assert sum(int(h["count"]) for h in hist if (h["strategy"], h["protocol"]) == key) == 100
    with open(out / "messages_saved_box.csv", newline="") as fh:
        assert {r["split"] for r in csv.DictReader(fh)} >= {"all", "possible", "impossible"}


def test_read_results_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_results(path)


def test_write_report_per_agent_flag(tmp_path):
    rows = [_row("c", "aop", 10, 70.0, 60.0), _row("c", "acop", 4, 80.0, 60.0)]
    summary = write_report(tmp_path, rows, per_agent=True)
    assert summary["categorization"] == "per_agent"
    assert summary["categories"]["concession"]["equal"] == 50.0
