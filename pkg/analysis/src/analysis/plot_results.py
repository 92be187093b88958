"""Turn simulator outputs into figures plus verifiable stats sidecars.

Figure kinds (``--kind``):

- ``bars``        per-robot final normalized coverage from a metrics CSV
- ``timelines``   per-robot explored-cells-over-time from a trace file, with
                  flat segments (plateaus) detected and listed in the sidecar
- ``trajectories`` robot paths from a trace file, optionally drawn over an
                  environment text file (``--world``)
- ``errorbars``   per-strategy mean/std of normalized coverage pooled over a
                  batch CSV

Every invocation writes the image to ``--out`` and a plain-text sidecar to
``<out>.stats.txt`` holding exactly the numbers that were plotted, so checks
read numbers, not pixels. Ordering and colors are fixed by strategy/robot
name; re-running on the same inputs is byte-stable for the sidecar.

This tool only consumes the documented file formats; it does not import the
simulator.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

KINDS = ("bars", "timelines", "trajectories", "errorbars")

METRICS_COLUMNS = [
    "strategy", "world", "seed", "N", "robot",
    "coverage_cells", "coverage_norm", "overlap_cells", "interrupt_ticks",
]

# fixed per-strategy colors (alphabetical); robots cycle a fixed palette
STRATEGY_COLORS = {"ars": "#1f77b4", "prs": "#2ca02c", "sos": "#d62728"}
ROBOT_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


class SchemaError(ValueError):
    """An input file does not match the documented schema."""


@dataclass
class FigureSpec:
    kind: str
    inputs: list[str]
    out: str
    strategy: str | None = None  # filter
    world: str | None = None  # environment text file for trajectories
    plateau_min: int = 20  # minimum plateau length reported (ticks)


# ---------------------------------------------------------------------------
# Readers (independent of the simulator package)


def read_metrics_csv(path: str | Path) -> list[dict]:
    """Parse a metrics CSV (``# comment`` lines allowed). Raises SchemaError
    naming the first missing/unexpected column."""
    header: list[str] | None = None
    rows: list[dict] = []
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        vals = line.split(",")
        if header is None:
            header = vals
            for col in METRICS_COLUMNS:
                if col not in header:
                    raise SchemaError(f"{path}: missing column {col!r}")
            for col in header:
                if col not in METRICS_COLUMNS:
                    raise SchemaError(f"{path}: unexpected column {col!r}")
            continue
        if len(vals) != len(header):
            raise SchemaError(f"{path}: row has {len(vals)} fields, header has {len(header)}")
        row = dict(zip(header, vals))
        for col in ("seed", "N", "robot", "coverage_cells", "overlap_cells", "interrupt_ticks"):
            row[col] = int(row[col])
        row["coverage_norm"] = float(row["coverage_norm"])
        rows.append(row)
    if header is None:
        raise SchemaError(f"{path}: empty metrics file")
    return rows


@dataclass
class TraceData:
    # per robot id: parallel lists of tick, x, y, phase, explored count
    ticks: dict[int, list[int]] = field(default_factory=dict)
    xs: dict[int, list[int]] = field(default_factory=dict)
    ys: dict[int, list[int]] = field(default_factory=dict)
    phases: dict[int, list[str]] = field(default_factory=dict)
    explored: dict[int, list[int]] = field(default_factory=dict)

    @property
    def robots(self) -> list[int]:
        return sorted(self.ticks)


def read_trace(path: str | Path) -> TraceData:
    """Parse robot state lines (``R <tick> <robot> <x> <y> <phase> <count>``)
    from a trace file; encounter lines are skipped."""
    data = TraceData()
    for ln, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.startswith("R "):
            continue
        parts = line.split()
        if len(parts) != 7:
            raise SchemaError(f"{path}:{ln}: robot line has {len(parts)} fields, want 7")
        _, t, rid, x, y, phase, count = parts
        rid = int(rid)
        data.ticks.setdefault(rid, []).append(int(t))
        data.xs.setdefault(rid, []).append(int(x))
        data.ys.setdefault(rid, []).append(int(y))
        data.phases.setdefault(rid, []).append(phase)
        data.explored.setdefault(rid, []).append(int(count))
    if not data.ticks:
        raise SchemaError(f"{path}: no robot lines found")
    return data


def read_world_mask(path: str | Path) -> np.ndarray:
    """Obstacle mask from an environment text file (header + '.'/'#' rows)."""
    lines = Path(path).read_text().splitlines()
    try:
        width, height = (int(tok) for tok in lines[0].split())
    except (ValueError, IndexError) as exc:
        raise SchemaError(f"{path}: bad header line") from exc
    mask = np.zeros((height, width), dtype=bool)
    for y in range(height):
        row = lines[1 + y]
        if len(row) != width:
            raise SchemaError(f"{path}: row {y} has length {len(row)}, want {width}")
        mask[y] = np.frombuffer(row.encode(), dtype="S1") == b"#"
    return mask


# ---------------------------------------------------------------------------
# Statistics


def find_plateaus(explored: list[int], min_len: int) -> list[tuple[int, int]]:
    """Maximal flat segments of the explored-count series, as (start_index,
    length_in_ticks) pairs with length >= min_len. ``start_index`` is the
    first sample of the flat segment; a segment of length L covers L
    consecutive no-gain ticks."""
    out = []
    run = 0
    for i in range(1, len(explored)):
        if explored[i] == explored[i - 1]:
            run += 1
        else:
            if run >= min_len:
                out.append((i - run - 1, run))
            run = 0
    if run >= min_len:
        out.append((len(explored) - run - 1, run))
    return out


def pooled_stats(rows: list[dict]) -> dict[str, tuple[float, float, int]]:
    """Per-strategy (mean, std, n) of normalized coverage, pooled across
    robots and replications; population-of-samples std (ddof=1)."""
    by: dict[str, list[float]] = {}
    key = lambda r: (r["strategy"], r["world"], r["seed"], r["robot"])
    for row in sorted(rows, key=key):
        by.setdefault(row["strategy"], []).append(row["coverage_norm"])
    out = {}
    for strat in sorted(by):
        vals = by[strat]
        mean = float(np.mean(vals))
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        out[strat] = (mean, std, len(vals))
    return out


def bounding_box(xs: list[int], ys: list[int]) -> tuple[int, int, int, int]:
    """(x0, y0, x1, y1), inclusive."""
    return (min(xs), min(ys), max(xs), max(ys))


def box_intersection(a, b) -> tuple[int, int, int, int] | None:
    x0, y0 = max(a[0], b[0]), max(a[1], b[1])
    x1, y1 = min(a[2], b[2]), min(a[3], b[3])
    if x0 > x1 or y0 > y1:
        return None
    return (x0, y0, x1, y1)


# ---------------------------------------------------------------------------
# Figure kinds


def _plot_bars(spec: FigureSpec, sidecar: list[str]) -> plt.Figure:
    rows = read_metrics_csv(spec.inputs[0])
    if spec.strategy:
        rows = [r for r in rows if r["strategy"] == spec.strategy]
    rows.sort(key=lambda r: (r["strategy"], r["world"], r["seed"], r["robot"]))
    labels = [f"{r['strategy']}/{r['world']}/s{r['seed']}/r{r['robot']}" for r in rows]
    values = [r["coverage_norm"] for r in rows]
    colors = [ROBOT_PALETTE[r["robot"] % len(ROBOT_PALETTE)] for r in rows]
    fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(rows)), 4))
    ax.bar(range(len(rows)), values, color=colors)
    ax.set_xticks(range(len(rows)), labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("normalized coverage")
    ax.set_ylim(0, 1.05)
    ax.set_title("Per-robot final coverage")
    for label, value in zip(labels, values):
        sidecar.append(f"bar {label} coverage_norm={value:.9f}")
    vals = np.array(values)
    sidecar.append(f"summary mean={vals.mean():.12f} std={vals.std(ddof=1) if len(vals) > 1 else 0.0:.12f} n={len(vals)}")
    return fig


def _plot_timelines(spec: FigureSpec, sidecar: list[str]) -> plt.Figure:
    data = read_trace(spec.inputs[0])
    fig, ax = plt.subplots(figsize=(7, 4))
    for rid in data.robots:
        ax.plot(
            data.ticks[rid],
            data.explored[rid],
            color=ROBOT_PALETTE[rid % len(ROBOT_PALETTE)],
            label=f"robot {rid}",
        )
    ax.set_xlabel("tick")
    ax.set_ylabel("explored cells")
    ax.set_title("Coverage over time")
    ax.legend(loc="lower right", fontsize=8)
    total_plateaus = 0
    for rid in data.robots:
        plateaus = find_plateaus(data.explored[rid], spec.plateau_min)
        total_plateaus += len(plateaus)
        final = data.explored[rid][-1]
        sidecar.append(f"timeline robot={rid} final_explored={final} plateaus={len(plateaus)}")
        for start, length in plateaus:
            tick0 = data.ticks[rid][start]
            sidecar.append(f"plateau robot={rid} start_tick={tick0} length={length}")
    sidecar.append(f"summary plateaus_ge_{spec.plateau_min}={total_plateaus}")
    return fig


def _plot_trajectories(spec: FigureSpec, sidecar: list[str]) -> plt.Figure:
    data = read_trace(spec.inputs[0])
    fig, ax = plt.subplots(figsize=(5, 6))
    if spec.world:
        mask = read_world_mask(spec.world)
        ax.imshow(mask, origin="lower", cmap="gray_r", interpolation="nearest", alpha=0.6)
    boxes = {}
    for rid in data.robots:
        ax.plot(
            data.xs[rid],
            data.ys[rid],
            color=ROBOT_PALETTE[rid % len(ROBOT_PALETTE)],
            linewidth=0.8,
            label=f"robot {rid}",
        )
        ax.plot(data.xs[rid][0], data.ys[rid][0], "o", color="black", markersize=3)
        boxes[rid] = bounding_box(data.xs[rid], data.ys[rid])
    ax.set_aspect("equal")
    ax.set_title("Trajectories")
    ax.legend(loc="upper right", fontsize=8)
    for rid, box in boxes.items():
        sidecar.append(f"bbox robot={rid} x0={box[0]} y0={box[1]} x1={box[2]} y1={box[3]}")
    ids = sorted(boxes)
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            inter = box_intersection(boxes[a], boxes[b])
            if inter is None:
                sidecar.append(f"bbox_overlap robots={a},{b} none")
            else:
                w = inter[2] - inter[0] + 1
                h = inter[3] - inter[1] + 1
                sidecar.append(
                    f"bbox_overlap robots={a},{b} x0={inter[0]} y0={inter[1]} "
                    f"x1={inter[2]} y1={inter[3]} width={w} height={h}"
                )
    return fig


def _plot_errorbars(spec: FigureSpec, sidecar: list[str]) -> plt.Figure:
    rows: list[dict] = []
    for path in spec.inputs:
        rows.extend(read_metrics_csv(path))
    if spec.strategy:
        rows = [r for r in rows if r["strategy"] == spec.strategy]
    stats = pooled_stats(rows)
    strategies = sorted(stats)
    means = [stats[s][0] for s in strategies]
    stds = [stats[s][1] for s in strategies]
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.bar(
        range(len(strategies)),
        means,
        yerr=stds,
        capsize=6,
        color=[STRATEGY_COLORS.get(s, "#7f7f7f") for s in strategies],
    )
    ax.set_xticks(range(len(strategies)), strategies)
    ax.set_ylabel("normalized coverage")
    ax.set_ylim(0, 1.05)
    ax.set_title("Strategy comparison")
    for s in strategies:
        mean, std, n = stats[s]
        sidecar.append(f"errorbar strategy={s} mean={mean:.12f} std={std:.12f} n={n}")
    return fig


# ---------------------------------------------------------------------------


def plot(spec: FigureSpec) -> Path:
    """Render the figure and write the sidecar; returns the sidecar path."""
    if spec.kind not in KINDS:
        raise SchemaError(f"unknown figure kind {spec.kind!r}")
    if not spec.inputs:
        raise SchemaError("at least one --input required")
    for path in spec.inputs:
        if not Path(path).exists():
            raise SchemaError(f"input not found: {path}")
    sidecar: list[str] = [f"kind={spec.kind}", f"inputs={','.join(spec.inputs)}"]
    renderer = {
        "bars": _plot_bars,
        "timelines": _plot_timelines,
        "trajectories": _plot_trajectories,
        "errorbars": _plot_errorbars,
    }[spec.kind]
    fig = renderer(spec, sidecar)
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    sidecar_path = Path(str(out) + ".stats.txt")
    sidecar_path.write_text("\n".join(sidecar) + "\n")
    return sidecar_path


def main(argv: list[str] | None = None) -> int:
    p = argparse.ArgumentParser(prog="softsearch-plot", description=__doc__)
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--input", action="append", required=True,
                   help="metrics CSV (bars/errorbars) or trace file (timelines/trajectories); repeatable")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--strategy", default=None, help="filter rows to one strategy")
    p.add_argument("--world", default=None,
                   help="environment text file drawn behind trajectories")
    p.add_argument("--plateau-min", type=int, default=20,
                   help="minimum plateau length (ticks) listed in the sidecar")
    args = p.parse_args(argv)
    spec = FigureSpec(
        kind=args.kind, inputs=args.input, out=args.out,
        strategy=args.strategy, world=args.world, plateau_min=args.plateau_min,
    )
    try:
        sidecar = plot(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {spec.out} and {sidecar}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
