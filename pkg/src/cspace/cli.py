"""Command-line driver: ``cspace build | query | bench``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import CSpaceError, ParseError
from .geometry import bounds_for
from .graph import BuildContext, build
from .query import is_caged, locate, narrow_passage, path_nonexistence
from .rotations import (EpsilonPlan, choose_epsilon, generate_grid, load_grid, quaternion_grid,
                        so2_grid)
from .scene import bundled_scenes, load_bundled, load_scene, parse_configuration
from .slices import dump_slice


class UsageError(CSpaceError):
    """Invalid command-line input."""


def _seed() -> int | None:
    raw = os.environ.get("CSPACE_SEED")
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"CSPACE_SEED: expected an integer, got {raw!r}") from None


def _scene(arg: str):
    path = Path(arg)
    if not path.exists() and arg in bundled_scenes():
        return load_bundled(arg)
    if not path.exists():
        raise UsageError(f"--scene: file not found: {arg} (bundled scenes: {', '.join(bundled_scenes())})")
    return load_scene(path)


def _grid(args, dim: int, seed: int | None):
    sources = [s for s in ("grid_file", "grid_gen_dispersion", "so2") if getattr(args, s) is not None]
    if len(sources) != 1:
        raise UsageError("grid: give exactly one of --grid-file, --grid-gen-dispersion, --so2")
    rng = np.random.default_rng(seed)
    if args.so2 is not None:
        if dim != 2:
            raise UsageError("--so2: the scene is 3D; use --grid-file or --grid-gen-dispersion")
        if args.so2 < 3:
            raise UsageError(f"--so2: need at least 3 orientations, got {args.so2}")
        return so2_grid(args.so2)
    if dim != 3:
        raise UsageError("grid: the scene is 2D; use --so2")
    if args.grid_file is not None:
        return quaternion_grid(load_grid(args.grid_file), rng=rng)
    target = args.grid_gen_dispersion
    if not 0 < target < math.pi / 2:
        raise UsageError(f"--grid-gen-dispersion: must lie in (0, pi/2), got {target}")
    return quaternion_grid(generate_grid(target, rng=rng), rng=rng)


def _plan(args, scene, grid) -> EpsilonPlan:
    if args.delta is None:
        raise UsageError("--delta: required (use 0 for no clearance)")
    if args.delta < 0:
        raise UsageError(f"--delta: must be >= 0, got {args.delta}")
    if args.epsilon is None:
        raise UsageError("--epsilon: required; pass 'auto' or a positive number")
    rmax = float(scene.object.shape.radii.max())
    auto = choose_epsilon(grid, scene.object.radius, args.delta, max_ball_radius=rmax)
    if args.epsilon == "auto":
        return auto
    try:
        eps = float(args.epsilon)
    except ValueError:
        raise UsageError(f"--epsilon: expected 'auto' or a number, got {args.epsilon!r}") from None
    if not eps > 0:
        raise UsageError(f"--epsilon: must be positive, got {eps}")
    if eps < auto.epsilon / (1 + auto.margin):
        print(f"warning: --epsilon {eps:g} is below the rotation bound {auto.epsilon / (1 + auto.margin):g}; "
              "results are not guaranteed", file=sys.stderr)
    return EpsilonPlan(eps, args.delta, grid.dispersion, scene.object.radius, 0.0, "manual")


def _bounds(args, scene):
    if args.bounds_inflate is not None and args.bounds_inflate <= 0:
        raise UsageError(f"--bounds-inflate: must be positive, got {args.bounds_inflate}")
    return bounds_for(scene.obstacles, scene.object, args.bounds_inflate)


def _setup(args, check_scene=None):
    if args.workers < 1:
        raise UsageError(f"--workers: must be >= 1, got {args.workers}")
    seed = _seed()
    scene = _scene(args.scene)
    if check_scene is not None:
        check_scene(scene)
    grid = _grid(args, scene.dimension, seed)
    plan = _plan(args, scene, grid)
    return scene, grid, plan, _bounds(args, scene), seed


def _config(text: str, dim: int, flag: str):
    """``"x y [z] | angle"`` or ``"x y z | qw qx qy qz"``."""
    if "|" in text:
        pos, rot = text.split("|", 1)
        values = pos.split() + rot.split()
    else:
        values = text.replace(",", " ").split()
    return parse_configuration(values, dim, flag)


def _stats_payload(graph, scene, grid, plan, seed) -> dict:
    out = dict(graph.stats)
    out.update(scene=scene.name, dimension=scene.dimension, orientations=len(grid),
               dispersion=grid.dispersion, epsilon=plan.epsilon, delta=plan.delta,
               mean_degree=float(grid.degrees().mean()), seed=seed)
    return out


def cmd_build(args) -> int:
    scene, grid, plan, bounds, seed = _setup(args)
    graph = build(scene, grid, plan, bounds, workers=args.workers, strict=args.strict_edges, seed=seed,
                  parallel=args.workers > 1)
    if args.out_graph:
        graph.save(args.out_graph, args.format)
    stats = _stats_payload(graph, scene, grid, plan, seed)
    if args.out_stats:
        Path(args.out_stats).write_text(json.dumps(stats, indent=1) + "\n")
    if args.dump_slice is not None:
        if not 0 <= args.dump_slice < len(grid):
            raise UsageError(f"--dump-slice: index must lie in [0, {len(grid)}), got {args.dump_slice}")
        ctx = BuildContext.prepare(scene, grid, plan, bounds)
        free, _ = ctx.compute(args.dump_slice)
        dump_slice(free, ctx.collision(args.dump_slice), sys.stdout)
    print(f"slices {stats['slices']}  components {stats['total_components']}  classes {stats['classes']}  "
          f"bounded {stats['bounded_classes']}  eps {plan.epsilon:.6g}  wall {stats['wall_time_s']:.2f}s")
    return 0


def cmd_query(args) -> int:
    configs = []

    def parse(scene):
        # fail on malformed configurations before the grid is built
        configs.append(_config(args.start, scene.dimension, "--from"))
        configs.append(_config(args.goal, scene.dimension, "--to") if args.goal is not None else None)

    scene, grid, plan, bounds, seed = _setup(args, parse)
    c1, c2 = configs
    if args.passage is not None:
        if c2 is None:
            raise UsageError("--passage: needs both --from and --to")
        if args.passage <= 0:
            raise UsageError(f"--passage: delta must be positive, got {args.passage}")
        verdict = narrow_passage(scene, grid, plan, c1, c2, args.passage, bounds,
                                 workers=args.workers, strict=args.strict_edges)
        print(verdict)
        return 0
    graph = build(scene, grid, plan, bounds, workers=args.workers, strict=args.strict_edges, seed=seed,
                  parallel=args.workers > 1)
    if c2 is None:
        v = locate(graph, c1)
        if not hasattr(v, "component"):
            print("IN_COLLISION_APPROX")
        else:
            print("CAGED" if is_caged(graph, c1) else "NOT_CAGED")
        return 0
    print(path_nonexistence(graph, c1, c2))
    return 0


def cmd_bench(args) -> int:
    scene, grid, plan, bounds, seed = _setup(args)
    try:
        threads = [int(t) for t in args.threads.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--threads: expected a comma-separated list of integers, got {args.threads!r}") from None
    if not threads or min(threads) < 1:
        raise UsageError("--threads: every entry must be >= 1")
    rows = []
    reference = None
    base = None
    for k in threads:
        times = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            graph = build(scene, grid, plan, bounds, workers=k, strict=args.strict_edges, seed=seed,
                          parallel=True)
            times.append(time.perf_counter() - t0)
        wall = min(times)
        base = wall if base is None else base
        same = True if reference is None else graph.same_as(reference)
        reference = reference or graph
        rows.append({"threads": k, "wall_s": wall, "speedup": base / wall, "identical": same,
                     "runs": times})
    print(f"{'threads':>7} {'wall_s':>10} {'speedup':>8} identical")
    for r in rows:
        print(f"{r['threads']:>7} {r['wall_s']:>10.3f} {r['speedup']:>8.2f} {r['identical']}")
    payload = {"scene": scene.name, "orientations": len(grid), "cpu_count": os.cpu_count(), "rows": rows,
               "plan": asdict(plan)}
    if args.out_stats:
        Path(args.out_stats).write_text(json.dumps(payload, indent=1) + "\n")
    return 0


def _common(p: argparse.ArgumentParser):
    p.add_argument("--scene", required=True, help="scene JSON file or bundled scene name")
    p.add_argument("--grid-file", help="quaternion grid file (one 'w x y z' per line)")
    p.add_argument("--grid-gen-dispersion", type=float, help="generate a grid with this dispersion")
    p.add_argument("--so2", type=int, help="planar grid with this many angles")
    p.add_argument("--epsilon", help="'auto' or a positive number")
    p.add_argument("--delta", type=float, help="clearance offset (0 for none)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--strict-edges", action="store_true", help="verify cross-slice overlaps against collisions")
    p.add_argument("--bounds-inflate", type=float, default=4.0,
                   help="bounds = obstacle box grown by this many object radii plus the largest obstacle radius")
    p.add_argument("--out-stats", help="write statistics as JSON")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cspace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build the connectivity graph")
    _common(b)
    b.add_argument("--out-graph", help="write the graph")
    b.add_argument("--format", choices=("json", "dot"), default="json")
    b.add_argument("--dump-slice", type=int, help="print the dual diagram of one slice")
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="answer a connectivity question")
    _common(q)
    q.add_argument("--from", dest="start", required=True, help="configuration 'x y | theta' or 'x y z | qw qx qy qz'")
    q.add_argument("--to", dest="goal", help="second configuration; omit to ask whether --from is caged")
    q.add_argument("--passage", type=float, help="compare builds at this clearance and at 0")
    q.set_defaults(func=cmd_query)

    bench = sub.add_parser("bench", help="time the threaded build for several worker counts")
    _common(bench)
    bench.add_argument("--threads", default="1,2,4,8")
    bench.add_argument("--repeat", type=int, default=1)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CSpaceError, ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
