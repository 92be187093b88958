"""Plot tool: schema checking, sidecar statistics, plateau detection, and
byte-stable outputs. Exercised against real simulator outputs."""
import csv
import math
from pathlib import Path

import numpy as np
import pytest

from analysis import (
    FigureSpec,
    SchemaError,
    find_plateaus,
    plot,
    read_metrics_csv,
    read_trace,
)
from analysis.plot_results import bounding_box, box_intersection, main

from softsearch.cli import main as sim_main

CONFIG = """\
[world]
width = 120
height = 150
seed = 5
obstacles = rect:2-4:6-12x6-12

[run]
strategy = prs
robots = 2
seed = 1
r = 8
tau = 400

[batch]
strategies = sos,ars,prs
seeds = 1,2
world_seeds = 5
"""


@pytest.fixture(scope="module")
def outputs(tmp_path_factory):
    """One PRS run, one SOS run, and a small 3-strategy batch."""
    root = tmp_path_factory.mktemp("analysis_inputs")
    config = root / "config.ini"
    config.write_text(CONFIG)
    assert sim_main(["run", "--config", str(config), "--out", str(root / "prs")]) == 0
    assert sim_main(["run", "--config", str(config),
                     "--override", "run.strategy=sos",
                     "--out", str(root / "sos")]) == 0
    assert sim_main(["batch", "--config", str(config), "--out", str(root / "batch")]) == 0
    return root


def read_sidecar(path: Path) -> dict[str, list[list[str]]]:
    out: dict[str, list[list[str]]] = {}
    for line in path.read_text().splitlines():
        tag, *rest = line.split()
        out.setdefault(tag, []).append(rest)
    return out


# -- readers and schema ------------------------------------------------------


def test_metrics_reader_roundtrip(outputs):
    rows = read_metrics_csv(outputs / "prs" / "metrics.csv")
    assert len(rows) == 2
    assert {r["strategy"] for r in rows} == {"prs"}
    assert all(0.0 <= r["coverage_norm"] <= 2.0 for r in rows)


def test_metrics_reader_names_missing_column(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("strategy,world,seed,N,robot,coverage_cells,overlap_cells,interrupt_ticks\n")
    with pytest.raises(SchemaError, match="coverage_norm"):
        read_metrics_csv(bad)


def test_metrics_reader_rejects_unknown_column(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text(
        "strategy,world,seed,N,robot,coverage_cells,coverage_norm,"
        "overlap_cells,interrupt_ticks,bogus\n"
    )
    with pytest.raises(SchemaError, match="bogus"):
        read_metrics_csv(bad)


def test_trace_reader(outputs):
    data = read_trace(outputs / "prs" / "trace.txt")
    assert data.robots == [0, 1]
    for rid in data.robots:
        assert data.ticks[rid] == sorted(data.ticks[rid])
        assert all(later >= earlier for earlier, later
                   in zip(data.explored[rid], data.explored[rid][1:]))


def test_trace_reader_rejects_malformed(tmp_path):
    bad = tmp_path / "trace.txt"
    bad.write_text("R 0 0 1 2\n")
    with pytest.raises(SchemaError):
        read_trace(bad)


# -- plateau finder --------------------------------------------------------------


def test_find_plateaus_synthetic():
    series = [0, 1, 2, 2, 2, 2, 3, 4, 4, 4]
    assert find_plateaus(series, 3) == [(2, 3)]
    assert find_plateaus(series, 2) == [(2, 3), (7, 2)]
    assert find_plateaus(series, 4) == []
    assert find_plateaus([5] * 10, 5) == [(0, 9)]
    assert find_plateaus([], 1) == []


# -- sidecars carry independently verifiable numbers -------------------------------


def test_errorbar_sidecar_matches_independent_recomputation(outputs, tmp_path):
    csv_path = outputs / "batch" / "all_runs.csv"
    out = tmp_path / "eb.png"
    plot(FigureSpec(kind="errorbars", inputs=[str(csv_path)], out=str(out)))
    sidecar = read_sidecar(Path(str(out) + ".stats.txt"))

    # recompute with the stdlib csv reader, no shared code
    pooled: dict[str, list[float]] = {}
    with open(csv_path) as fh:
        for row in csv.DictReader(line for line in fh if not line.startswith("#")):
            pooled.setdefault(row["strategy"], []).append(float(row["coverage_norm"]))
    entries = {parts[0].split("=")[1]: parts for parts in sidecar["errorbar"]}
    assert sorted(entries) == sorted(pooled)
    for strat, vals in pooled.items():
        fields = dict(p.split("=") for p in entries[strat])
        n = len(vals)
        mean = sum(vals) / n
        std = math.sqrt(sum((v - mean) ** 2 for v in vals) / (n - 1))
        assert float(fields["mean"]) == pytest.approx(mean, abs=1e-9)
        assert float(fields["std"]) == pytest.approx(std, abs=1e-9)
        assert int(fields["n"]) == n


def test_errorbar_sidecar_three_strategies(outputs, tmp_path):
    out = tmp_path / "eb.png"
    plot(FigureSpec(kind="errorbars",
                    inputs=[str(outputs / "batch" / "all_runs.csv")], out=str(out)))
    sidecar = read_sidecar(Path(str(out) + ".stats.txt"))
    assert len(sidecar["errorbar"]) == 3
    assert [p[0] for p in sidecar["errorbar"]] == [
        "strategy=ars", "strategy=prs", "strategy=sos",
    ]


def test_bars_sidecar_matches_metrics(outputs, tmp_path):
    metrics = outputs / "prs" / "metrics.csv"
    out = tmp_path / "bars.png"
    plot(FigureSpec(kind="bars", inputs=[str(metrics)], out=str(out)))
    sidecar = read_sidecar(Path(str(out) + ".stats.txt"))
    rows = read_metrics_csv(metrics)
    assert len(sidecar["bar"]) == len(rows)
    for parts, row in zip(sidecar["bar"], sorted(rows, key=lambda r: r["robot"])):
        assert float(parts[1].split("=")[1]) == pytest.approx(row["coverage_norm"])


def test_timeline_sidecar_detects_interrupt_plateaus(outputs, tmp_path):
    out = tmp_path / "tl.png"
    plot(FigureSpec(kind="timelines",
                    inputs=[str(outputs / "prs" / "trace.txt")], out=str(out)))
    sidecar = read_sidecar(Path(str(out) + ".stats.txt"))
    assert "plateau" in sidecar, "interruptibility must show as a flat segment"
    for parts in sidecar["plateau"]:
        fields = dict(p.split("=") for p in parts)
        assert int(fields["length"]) >= 20


def test_trajectory_sidecar_matches_trace_geometry(outputs, tmp_path):
    trace = outputs / "sos" / "trace.txt"
    out = tmp_path / "traj.png"
    plot(FigureSpec(kind="trajectories", inputs=[str(trace)], out=str(out)))
    sidecar = read_sidecar(Path(str(out) + ".stats.txt"))
    data = read_trace(trace)
    boxes = {}
    for parts in sidecar["bbox"]:
        fields = dict(p.split("=") for p in parts)
        rid = int(fields["robot"])
        boxes[rid] = tuple(int(fields[k]) for k in ("x0", "y0", "x1", "y1"))
        assert boxes[rid] == bounding_box(data.xs[rid], data.ys[rid])
    reported = sidecar["bbox_overlap"][0]
    expect = box_intersection(boxes[0], boxes[1])
    if expect is None:
        assert reported[-1] == "none"
    else:
        fields = dict(p.split("=") for p in reported[1:])
        assert tuple(int(fields[k]) for k in ("x0", "y0", "x1", "y1")) == expect


# -- determinism -------------------------------------------------------------------


def test_sidecar_byte_stable(outputs, tmp_path):
    spec_a = FigureSpec(kind="errorbars",
                        inputs=[str(outputs / "batch" / "all_runs.csv")],
                        out=str(tmp_path / "a.png"))
    spec_b = FigureSpec(kind="errorbars",
                        inputs=[str(outputs / "batch" / "all_runs.csv")],
                        out=str(tmp_path / "b.png"))
    side_a = plot(spec_a).read_bytes()
    side_b = plot(spec_b).read_bytes()
    assert side_a.replace(b"a.png", b"") == side_b.replace(b"b.png", b"")
    assert plot(spec_a).read_bytes() == side_a


# -- command line -------------------------------------------------------------------


def test_cli_success_and_schema_error_exit_codes(outputs, tmp_path, capsys):
    rc = main(["--kind", "errorbars",
               "--input", str(outputs / "batch" / "all_runs.csv"),
               "--out", str(tmp_path / "fig.png")])
    assert rc == 0
    assert (tmp_path / "fig.png").exists()
    assert (tmp_path / "fig.png.stats.txt").exists()

    bad = tmp_path / "bad.csv"
    bad.write_text("foo,bar\n1,2\n")
    rc = main(["--kind", "bars", "--input", str(bad), "--out", str(tmp_path / "x.png")])
    assert rc == 2
    assert "strategy" in capsys.readouterr().err

    rc = main(["--kind", "bars", "--input", str(tmp_path / "missing.csv"),
               "--out", str(tmp_path / "y.png")])
    assert rc == 2
