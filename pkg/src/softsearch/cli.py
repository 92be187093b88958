"""Command-line entry points: environment generation, single runs, batch
experiments, and the search-time/area preset table.

Config files are INI (key = value with [world]/[run]/[batch] sections, see
README). Every effective value — defaults included — is echoed to
``resolved_config.ini`` in the output directory, and results are a pure
function of (config, overrides). Progress goes to stderr; stdout stays
machine-parsable.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import math
import os
import sys
import tempfile
from pathlib import Path

from . import sim
from .geometry import max_area
from .world import ContractError, GenerationError, GridWorld, ObstacleSpec, generate_random

TABLE1_N = (2, 3, 4, 7, 8, 10)


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# Helpers


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_range(tok: str) -> tuple[int, int]:
    if "-" in tok:
        lo, hi = tok.split("-", 1)
        return (int(lo), int(hi))
    v = int(tok)
    return (v, v)


def parse_obstacles(spec: str) -> ObstacleSpec:
    """Parse an obstacle spec string like
    ``rect:8-12:20-50x20-50,circle:4-6:10-25`` (counts and sizes are single
    values or inclusive lo-hi ranges); ``none`` means no obstacles."""
    spec = spec.strip()
    if not spec or spec == "none":
        return ObstacleSpec()
    kw: dict = {}
    for part in spec.split(","):
        fields = part.strip().split(":")
        if len(fields) != 3:
            raise ConfigError(f"bad obstacle term {part!r} (want shape:count:size)")
        shape, count, size = fields
        if shape == "rect":
            if "x" not in size:
                raise ConfigError(f"rect size must be WxH, got {size!r}")
            w, h = size.split("x", 1)
            kw["rect_count"] = _parse_range(count)
            kw["rect_width"] = _parse_range(w)
            kw["rect_height"] = _parse_range(h)
        elif shape == "circle":
            kw["circle_count"] = _parse_range(count)
            kw["circle_radius"] = _parse_range(size)
        else:
            raise ConfigError(f"unknown obstacle shape {shape!r}")
    return ObstacleSpec(**kw)


def format_obstacles(spec: ObstacleSpec) -> str:
    def rng(pair):
        return str(pair[0]) if pair[0] == pair[1] else f"{pair[0]}-{pair[1]}"

    parts = []
    if spec.rect_count[1] > 0:
        parts.append(f"rect:{rng(spec.rect_count)}:{rng(spec.rect_width)}x{rng(spec.rect_height)}")
    if spec.circle_count[1] > 0:
        parts.append(f"circle:{rng(spec.circle_count)}:{rng(spec.circle_radius)}")
    return ",".join(parts) or "none"


def _load_ini(path: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    return cp


def _apply_overrides(cp: configparser.ConfigParser, overrides: list[str]) -> None:
    """Overrides are section.key=value, or key=value (searched across
    sections, must be unambiguous; unknown keys land in [run])."""
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(f"override must be key=value, got {ov!r}")
        key, value = ov.split("=", 1)
        key = key.strip()
        if "." in key:
            section, name = key.split(".", 1)
        else:
            hits = [s for s in cp.sections() if cp.has_option(s, key)]
            if len(hits) > 1:
                raise ConfigError(f"override key {key!r} is ambiguous: sections {hits}")
            section, name = (hits[0] if hits else "run"), key
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, name, value.strip())


def _build_config(cp: configparser.ConfigParser) -> sim.RunConfig:
    w = cp["world"] if cp.has_section("world") else {}
    r = cp["run"] if cp.has_section("run") else {}

    def geti(sec, key, default):
        return int(sec.get(key, default))

    cfg = sim.RunConfig(
        strategy=r.get("strategy", "sos"),
        n_robots=geti(r, "robots", 2),
        seed=geti(r, "seed", 0),
        width=geti(w, "width", 480),
        height=geti(w, "height", 600),
        r=geti(r, "r", 20),
        gamma=float(r.get("gamma", 1.0)),
        k=float(r.get("k", 0.6)),
        tau=int(r["tau"]) if "tau" in r else None,
        margin=int(r["margin"]) if "margin" in r else None,
        b=geti(r, "b", 50),
        world_file=w.get("file") or None,
        world_seed=geti(w, "seed", 0),
        obstacles=parse_obstacles(w.get("obstacles", "none")),
        record_trace=str(r.get("trace", "true")).lower() in ("1", "true", "yes"),
    )
    if cfg.world_file:
        cfg.world_name = Path(cfg.world_file).stem
    else:
        cfg.world_name = f"gen{cfg.world_seed}"
    try:
        cfg.validate()
    except ContractError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _resolved_config_text(cfg: sim.RunConfig, tau: int, extra: dict | None = None) -> str:
    lines = ["[world]"]
    if cfg.world_file:
        lines.append(f"file = {cfg.world_file}")
    else:
        lines.append(f"seed = {cfg.world_seed}")
        lines.append(f"obstacles = {format_obstacles(cfg.obstacles or ObstacleSpec())}")
    lines += [f"width = {cfg.width}", f"height = {cfg.height}", "", "[run]"]
    lines += [
        f"strategy = {cfg.strategy}",
        f"robots = {cfg.n_robots}",
        f"seed = {cfg.seed}",
        f"r = {cfg.r}",
        f"gamma = {cfg.gamma}",
        f"k = {cfg.k}",
        f"tau = {tau}",
        f"margin = {cfg.margin if cfg.margin is not None else 2 * cfg.r}",
        f"b = {cfg.b}",
        f"trace = {'true' if cfg.record_trace else 'false'}",
    ]
    if extra:
        lines += ["", "[batch]"]
        lines += [f"{k} = {v}" for k, v in extra.items()]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen_env(args) -> int:
    try:
        spec = parse_obstacles(args.obstacles)
        world = generate_random(args.seed, args.width, args.height, spec)
    except (ConfigError, ContractError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _atomic_write(Path(args.out), world.to_text())
    print(f"{args.out}: {world.width}x{world.height}, "
          f"{int(world.obstacle_mask.sum())} obstacle cells")
    return 0


def cmd_run(args) -> int:
    try:
        cp = _load_ini(args.config)
        _apply_overrides(cp, args.override)
        cfg = _build_config(cp)
        if cfg.world_file and not Path(cfg.world_file).exists():
            raise ConfigError(f"world file not found: {cfg.world_file}")
        world = sim.make_world(cfg)
    except (ConfigError, ContractError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"running {cfg.strategy} N={cfg.n_robots} seed={cfg.seed} "
          f"world={cfg.world_name}", file=sys.stderr)
    result = sim.run(cfg, world)
    out = Path(args.out)
    _atomic_write(out / "trace.txt", "\n".join(result.trace) + "\n")
    _atomic_write(out / "metrics.csv", sim.metrics_text(result))
    _atomic_write(
        out / "resolved_config.ini",
        _resolved_config_text(result.config, result.tau),  # world size adopted
    )
    for m in result.metrics:
        print(f"robot {m.robot}: coverage {m.coverage_cells} cells "
              f"({m.coverage_norm:.4f} of A), overlap {m.overlap_cells}, "
              f"interrupt {m.interrupt_ticks}")
    return 0


def _batch_jobs(cp: configparser.ConfigParser) -> tuple[list[str], list[int], list[tuple[str, int]]]:
    b = cp["batch"] if cp.has_section("batch") else {}
    strategies = [s.strip() for s in b.get("strategies", "sos,ars,prs").split(",") if s.strip()]
    seeds_raw = b.get("seeds", "5")
    if "," in seeds_raw:
        seeds = [int(s) for s in seeds_raw.split(",")]
    else:
        seeds = list(range(1, int(seeds_raw) + 1))
    world_seeds = [int(s) for s in b.get("world_seeds", "11,22,33").split(",")]
    worlds = [(f"gen{ws}", ws) for ws in world_seeds]
    return strategies, seeds, worlds


def _run_one(packed):
    cfg_dict, world_text = packed
    cfg = sim.RunConfig(**cfg_dict)
    world = GridWorld.from_text(world_text)
    result = sim.run(cfg, world)
    return sim.metrics_text(result)


def cmd_batch(args) -> int:
    try:
        cp = _load_ini(args.config)
        _apply_overrides(cp, args.override)
        base = _build_config(cp)
        strategies, seeds, worlds = _batch_jobs(cp)
        for s in strategies:
            if s not in sim.STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}")
    except (ConfigError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    runs_dir = out / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)

    world_cache: dict[int, str] = {}
    jobs = []
    from dataclasses import replace

    for strategy in strategies:
        for world_name, ws in worlds:
            for seed in seeds:
                path = runs_dir / f"{strategy}_{world_name}_{seed}.csv"
                if path.exists():
                    continue  # resume: completed triple
                if ws not in world_cache:
                    cfg_w = replace(base, world_seed=ws)
                    world_cache[ws] = sim.make_world(cfg_w).to_text()
                cfg = replace(
                    base, strategy=strategy, seed=seed, world_seed=ws,
                    world_name=world_name, record_trace=False,
                )
                jobs.append((path, (cfg.__dict__.copy(), world_cache[ws])))

    total = len(jobs)
    if args.jobs > 1 and total:
        import multiprocessing as mp

        with mp.Pool(args.jobs) as pool:
            for i, (text, (path, _)) in enumerate(
                zip(pool.imap(_run_one, [p for _, p in jobs]), jobs)
            ):
                _atomic_write(path, text)
                print(f"[{i + 1}/{total}] {path.name}", file=sys.stderr)
    else:
        for i, (path, packed) in enumerate(jobs):
            text = _run_one(packed)
            _atomic_write(path, text)
            print(f"[{i + 1}/{total}] {path.name}", file=sys.stderr)

    # aggregate everything on disk (including pre-existing runs)
    rows = []
    for path in sorted(runs_dir.glob("*.csv")):
        rows.extend(sim.parse_metrics(path.read_text()))
    all_lines = [sim.METRICS_SCHEMA, sim.METRICS_HEADER]
    key = lambda r: (r["strategy"], r["world"], r["seed"], r["robot"])
    for r in sorted(rows, key=key):
        all_lines.append(
            f"{r['strategy']},{r['world']},{r['seed']},{r['N']},{r['robot']},"
            f"{r['coverage_cells']},{r['coverage_norm']:.6f},"
            f"{r['overlap_cells']},{r['interrupt_ticks']}"
        )
    _atomic_write(out / "all_runs.csv", "\n".join(all_lines) + "\n")
    agg = sim.aggregate(rows)
    agg_lines = [sim.METRICS_SCHEMA, "strategy,mean_coverage_norm,std_coverage_norm,n"]
    for strat, (mean, std, n) in sorted(agg.items()):
        agg_lines.append(f"{strat},{mean:.6f},{std:.6f},{n}")
    _atomic_write(out / "aggregate.csv", "\n".join(agg_lines) + "\n")
    tau = base.tau if base.tau is not None else sim.search_time(
        base.width, base.height, base.r, base.gamma, base.n_robots, base.k
    )
    _atomic_write(
        out / "resolved_config.ini",
        _resolved_config_text(
            base, tau,
            extra={
                "strategies": ",".join(strategies),
                "seeds": ",".join(str(s) for s in seeds),
                "world_seeds": ",".join(str(ws) for _, ws in worlds),
                "jobs": args.jobs,
            },
        ),
    )
    for strat, (mean, std, n) in sorted(agg.items()):
        print(f"{strat}: {mean:.4f} +/- {std:.4f} (n={n})")
    return 0


def cmd_table1(args) -> int:
    rows = []
    for n in TABLE1_N:
        tau = sim.search_time(480, 600, 20, 1.0, n, 0.6)
        rows.append((n, tau, max_area(tau, 20, 1.0)))
    print(f"{'N':>3} {'tau':>6} {'A':>8}")
    for n, tau, area in rows:
        print(f"{n:>3} {tau:>6} {area:>8}")
    lines = ["N,tau,A"] + [f"{n},{tau},{a}" for n, tau, a in rows]
    _atomic_write(Path(args.out), "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="softsearch", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-env", help="generate a random environment file")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--width", type=int, default=480)
    g.add_argument("--height", type=int, default=600)
    g.add_argument("--obstacles", default="none",
                   help="e.g. rect:8-12:20-50x20-50,circle:4-6:10-25")
    g.add_argument("--out", default="env.txt")
    g.set_defaults(func=cmd_gen_env)

    r = sub.add_parser("run", help="run one simulation from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--out", default="run_out")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("batch", help="run a strategy/world/seed grid")
    b.add_argument("--config", required=True)
    b.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out", default="batch_out")
    b.set_defaults(func=cmd_batch)

    t = sub.add_parser("table1", help="print the N/tau/A preset table")
    t.add_argument("--out", default="table1.csv")
    t.set_defaults(func=cmd_table1)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
