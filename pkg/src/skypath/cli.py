"""Command-line front end: scenario generation, map building, planning, sweeps, rendering.

Exit codes are a stable contract: 0 success, 2 usage or configuration
error, 3 problem-infeasible (no route at the requested target), 4
endpoint-infeasible (a start or end cell fails the target).

Every command is a pure function of its input files and flags, so re-runs
produce byte-identical outputs.  The one exception is opt-in: ``sweep
--timing`` fills the runtime_ms column with wall-clock medians, which are
not reproducible by nature and therefore default to empty.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import statistics
import sys
import time
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

from .environment import (
    EnvConfig,
    environment_from_json,
    environment_to_json,
    generate_environment,
)
from .errors import (
    ConfigurationError,
    EndpointInfeasibleError,
    PlanInfeasibleError,
    ProblemInfeasibleError,
)
from .feasibility import (
    build_feasible_map,
    build_quantized_feasible_map,
    mask_to_pbm,
    read_mask,
    write_mask,
)
from .planner import (
    build_graph_fine,
    build_graph_quantized,
    path_metrics,
    path_to_json,
    plan_optimal,
    plan_quantized,
    render_path_svg,
)
from .radiomap import (
    LinkBudget,
    RadioMap,
    RadioMapSet,
    build_radio_map_set,
    maps_from_files,
    read_radio_map,
    render_pgm,
    superpose,
    write_radio_map,
)

SUPERPOSED_GBS_ID = 0  # gbs_id used in the header of the superposed-map file


@dataclass(frozen=True)
class ScenarioPreset:
    """Named bundle of generation config, link budget, endpoints, and sweep defaults."""

    name: str
    env: EnvConfig
    epsilon_db: float
    budget: LinkBudget
    u0: tuple[float, float]
    uF: tuple[float, float]
    targets_db: tuple[float, ...]
    kappas: tuple[int, ...]


PAPER_UMA = ScenarioPreset(
    name="paper-uma",
    env=EnvConfig(
        edge_length_m=630.0,
        granularity_m=5.0,
        altitude_m=90.0,
        gbs_count=6,
        gbs_height_m=25.0,
        obstacle_count=30,
        obstacle_side_range_m=(50.0, 70.0),
        obstacle_height_mean_m=40.0,
    ),
    epsilon_db=-57.0,
    budget=LinkBudget(
        tx_power_dbm=23.0,
        noise_density_dbm_hz=-150.0,
        noise_figure_db=7.0,
        bandwidth_hz=10e6,
    ),
    u0=(2.5, 2.5),
    uF=(627.5, 627.5),
    targets_db=tuple(-50.0 + 0.5 * k for k in range(16)),  # -50 .. -42.5
    kappas=(1, 3, 5),
)

PRESETS = {PAPER_UMA.name: PAPER_UMA}


def _load_env_config(path: str) -> EnvConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        side_range = doc.get("obstacle_side_range_m", (50.0, 70.0))
        return EnvConfig(
            edge_length_m=doc["edge_length_m"],
            granularity_m=doc["granularity_m"],
            altitude_m=doc["altitude_m"],
            gbs_count=doc["gbs_count"],
            gbs_height_m=doc["gbs_height_m"],
            obstacle_count=doc.get("obstacle_count", 0),
            obstacle_side_range_m=(side_range[0], side_range[1]),
            obstacle_height_mean_m=doc.get("obstacle_height_mean_m", 40.0),
        )
    except KeyError as missing:
        raise ConfigurationError(f"config file {path} is missing key {missing}")


def _parse_point(text: str) -> tuple[float, float]:
    try:
        x, y = (float(t) for t in text.split(","))
    except ValueError:
        raise ConfigurationError(f"expected 'x,y', got {text!r}")
    return (x, y)


def _parse_targets(text: str) -> list[float]:
    """Comma list ('-50,-49.5') or inclusive range ('-50:-42.5:0.5')."""
    if ":" in text:
        try:
            start, stop, step = (float(t) for t in text.split(":"))
        except ValueError:
            raise ConfigurationError(f"expected 'start:stop:step', got {text!r}")
        if step <= 0 or stop < start:
            raise ConfigurationError("target range needs step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + k * step for k in range(count)]
    try:
        targets = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigurationError(f"bad target list {text!r}")
    if not targets:
        raise ConfigurationError("empty target list")
    return targets


def _thread_cap() -> int | None:
    raw = os.environ.get("SKYPATH_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigurationError(f"SKYPATH_THREADS must be an integer, got {raw!r}")
    if cap < 0:
        raise ConfigurationError("SKYPATH_THREADS must be >= 0")
    if cap == 0:
        return min(8, os.cpu_count() or 1)
    return cap


def _load_maps_dir(maps_dir: str) -> RadioMapSet:
    paths = sorted(FsPath(maps_dir).glob("gbs_*.rmap"))
    if not paths:
        raise ConfigurationError(f"no gbs_*.rmap files in {maps_dir}")
    return maps_from_files(paths)


# --- commands -----------------------------------------------------------------


def cmd_env_gen(args) -> int:
    if args.preset:
        preset = PRESETS.get(args.preset)
        if preset is None:
            raise ConfigurationError(f"unknown preset {args.preset!r} (have: {sorted(PRESETS)})")
        config = preset.env
    else:
        config = _load_env_config(args.config)
    env = generate_environment(config, args.seed)
    FsPath(args.out).write_text(environment_to_json(env), encoding="utf-8")
    heights = [ob.height_m for ob in env.obstacles]
    sides = [ob.length_m for ob in env.obstacles]
    print(f"wrote {args.out}")
    print(f"grid: D={env.region.grid_size} (L={env.region.edge_length_m} m at {env.region.granularity_m} m)")
    print(f"gbss: M={len(env.gbss)} at height {env.gbss[0].position[2]} m")
    if heights:
        print(
            f"obstacles: {len(heights)}, heights {min(heights):.1f}-{max(heights):.1f} m "
            f"(mean {sum(heights) / len(heights):.1f}), sides {min(sides):.1f}-{max(sides):.1f} m"
        )
    else:
        print("obstacles: 0")
    return 0


def cmd_map_build(args) -> int:
    env = environment_from_json(FsPath(args.env).read_text(encoding="utf-8"))
    out_dir = FsPath(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    maps = build_radio_map_set(env, args.epsilon_db, max_workers=_thread_cap())
    for m in maps.maps:
        write_radio_map(m, out_dir / f"gbs_{m.gbs_id:02d}.rmap")
    combined = superpose(maps)
    write_radio_map(
        RadioMap(
            gbs_id=SUPERPOSED_GBS_ID,
            region=maps.region,
            epsilon_db=args.epsilon_db,
            gains=combined,
        ),
        out_dir / "superposed.rmap",
    )
    if args.render:
        for m in maps.maps:
            (out_dir / f"gbs_{m.gbs_id:02d}.pgm").write_bytes(render_pgm(m.gains))
        (out_dir / "superposed.pgm").write_bytes(render_pgm(combined))
    d = maps.region.grid_size
    print(f"wrote {len(maps.maps)} radio maps ({d}x{d}) and the superposed map to {out_dir}")
    return 0


def cmd_plan(args) -> int:
    maps = _load_maps_dir(args.maps_dir)
    u0 = _parse_point(args.src)
    uF = _parse_point(args.dst)
    if args.kappa == 1:
        path = plan_optimal(maps, args.target_db, u0, uF)
    else:
        path = plan_quantized(maps, args.target_db, args.kappa, u0, uF)
    if args.out:
        FsPath(args.out).write_text(path_to_json(path), encoding="utf-8")
        print(f"wrote {args.out}")
    if args.render:
        infeasible = ~build_feasible_map(maps, args.target_db).mask.to_bool()
        FsPath(args.render).write_text(
            render_path_svg(path, maps.region, infeasible), encoding="utf-8"
        )
        print(f"wrote {args.render}")
    metrics = path_metrics(path, args.speed)
    line = f"feasible: length {metrics['length_m']:.3f} m over {len(path.waypoints)} waypoints"
    if "duration_s" in metrics:
        line += f", duration {metrics['duration_s']:.3f} s"
    print(line)
    return 0


def _sweep_rows(maps: RadioMapSet, targets, kappas, u0, uF, timing: bool):
    rows = []
    for target in sorted(targets):
        for kappa in sorted(kappas):
            feasible = True
            length = None
            try:
                planner = (
                    (lambda: plan_optimal(maps, target, u0, uF))
                    if kappa == 1
                    else (lambda: plan_quantized(maps, target, kappa, u0, uF))
                )
                path = planner()
                length = path.total_length_m
            except PlanInfeasibleError:
                feasible = False

            f = build_feasible_map(maps, target)
            graph = (
                build_graph_fine(f)
                if kappa == 1
                else build_graph_quantized(build_quantized_feasible_map(f, kappa))
            )
            runtime_ms = None
            if timing and feasible:
                samples = []
                for _ in range(3):
                    start = time.perf_counter()
                    planner()
                    samples.append((time.perf_counter() - start) * 1000.0)
                runtime_ms = statistics.median(samples)
            rows.append(
                {
                    "target_db": target,
                    "kappa": kappa,
                    "feasible": feasible,
                    "length_m": length,
                    "runtime_ms": runtime_ms,
                    "vertices": graph.vertex_count(),
                    "edges": graph.edge_count(),
                }
            )
    return rows


def sweep_rows_to_csv(rows) -> str:
    lines = ["target_db,kappa,feasible,length_m,runtime_ms,vertices,edges"]
    for r in rows:
        length = "" if r["length_m"] is None else repr(r["length_m"])
        runtime = "" if r["runtime_ms"] is None else f"{r['runtime_ms']:.3f}"
        lines.append(
            f"{r['target_db']!r},{r['kappa']},{'true' if r['feasible'] else 'false'},"
            f"{length},{runtime},{r['vertices']},{r['edges']}"
        )
    return "\n".join(lines) + "\n"


def cmd_sweep(args) -> int:
    maps = _load_maps_dir(args.maps_dir)
    targets = _parse_targets(args.targets)
    try:
        kappas = [int(k) for k in args.kappas.split(",") if k.strip()]
    except ValueError:
        raise ConfigurationError(f"bad kappa list {args.kappas!r}")
    if not kappas:
        raise ConfigurationError("empty kappa list")
    d = maps.region.grid_size
    for kappa in kappas:
        if kappa < 1 or kappa % 2 == 0 or d % kappa != 0:
            raise ConfigurationError(
                f"kappa {kappa} must be odd, >= 1, and divide the grid size {d}"
            )
    u0 = _parse_point(args.src)
    uF = _parse_point(args.dst)
    rows = _sweep_rows(maps, targets, kappas, u0, uF, args.timing)
    FsPath(args.out_csv).write_text(sweep_rows_to_csv(rows), encoding="utf-8")
    feasible_count = sum(1 for r in rows if r["feasible"])
    print(f"wrote {args.out_csv}: {len(rows)} rows, {feasible_count} feasible")
    return 0


def cmd_render(args) -> int:
    out = FsPath(args.out)
    if args.map and not args.path:
        m = read_radio_map(args.map)
        out.write_bytes(render_pgm(m.gains))
    elif args.mask and not args.path:
        grid, _, _ = read_mask(args.mask)
        out.write_bytes(mask_to_pbm(grid))
    elif args.path:
        if not args.map:
            raise ConfigurationError("--path rendering needs --map for the region and backdrop")
        doc = json.loads(FsPath(args.path).read_text(encoding="utf-8"))
        m = read_radio_map(args.map)
        infeasible = m.gains.astype(np.float64) < doc["target_db"]
        from .planner import Path as PlanPath

        waypoints = tuple((w["x"], w["y"]) for w in doc["waypoints"])
        path = PlanPath(
            level=doc["level"],
            kappa=doc["kappa"],
            target_db=doc["target_db"],
            waypoints=waypoints,
            total_length_m=doc["total_length_m"],
            serving_gbs=tuple(w["gbs_id"] for w in doc["waypoints"]),
            waypoint_gains_db=tuple(w["gain_db"] for w in doc["waypoints"]),
        )
        out.write_text(render_path_svg(path, m.region, infeasible), encoding="utf-8")
    else:
        raise ConfigurationError("nothing to render: pass --map, --mask, or --path")
    print(f"wrote {out}")
    return 0


def cmd_mask_build(args) -> int:
    """Build and cache feasibility masks (fine plus optional quantized)."""
    maps = _load_maps_dir(args.maps_dir)
    f = build_feasible_map(maps, args.target_db)
    out = FsPath(args.out)
    if args.kappa == 1:
        write_mask(out, f.mask, 1, args.target_db)
        bits = f.mask
    else:
        fq = build_quantized_feasible_map(f, args.kappa)
        write_mask(out, fq.mask, args.kappa, args.target_db)
        bits = fq.mask
    print(f"wrote {out}: {bits.popcount()} feasible of {bits.side * bits.side}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skypath",
        description="Radio-map based minimum-distance path planning for a cellular-connected UAV.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("env-gen", help="generate a random environment file")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", help=f"named scenario preset ({', '.join(sorted(PRESETS))})")
    group.add_argument("--config", help="JSON file with generation parameters")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_env_gen)

    p = sub.add_parser("map-build", help="build per-GBS radio maps from an environment")
    p.add_argument("--env", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--epsilon-db", type=float, default=-57.0)
    p.add_argument("--render", action="store_true", help="also write PGM heatmaps")
    p.set_defaults(func=cmd_map_build)

    p = sub.add_parser("plan", help="plan a minimum-distance path at a gain target")
    p.add_argument("--maps-dir", required=True)
    p.add_argument("--target-db", type=float, required=True)
    p.add_argument("--kappa", type=int, default=1, help="quantization ratio; 1 = exact solution")
    p.add_argument("--from", dest="src", required=True, metavar="X,Y")
    p.add_argument("--to", dest="dst", required=True, metavar="X,Y")
    p.add_argument("--speed", type=float, default=None, help="report duration at this m/s")
    p.add_argument("--out", default=None, help="write the path as JSON")
    p.add_argument("--render", default=None, help="write an SVG overlay")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sweep", help="run a (target, kappa) grid and tabulate results")
    p.add_argument("--maps-dir", required=True)
    p.add_argument("--targets", required=True, help="'-50,-49' or '-50:-42.5:0.5'")
    p.add_argument("--kappas", default="1", help="comma list of odd ratios")
    p.add_argument("--from", dest="src", required=True, metavar="X,Y")
    p.add_argument("--to", dest="dst", required=True, metavar="X,Y")
    p.add_argument("--out-csv", required=True)
    p.add_argument(
        "--timing",
        action="store_true",
        help="fill runtime_ms (median of 3 planning runs); breaks byte-reproducibility",
    )
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("mask-build", help="cache a feasibility mask sidecar")
    p.add_argument("--maps-dir", required=True)
    p.add_argument("--target-db", type=float, required=True)
    p.add_argument("--kappa", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mask_build)

    p = sub.add_parser("render", help="render maps (PGM), masks (PBM), or paths (SVG)")
    p.add_argument("--map", default=None, help="RMAP file; heatmap backdrop for --path")
    p.add_argument("--mask", default=None, help="FMSK sidecar file")
    p.add_argument("--path", default=None, help="path JSON file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EndpointInfeasibleError as exc:
        print(f"endpoint infeasible: {exc}", file=sys.stderr)
        return 4
    except ProblemInfeasibleError as exc:
        print(f"problem infeasible: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
