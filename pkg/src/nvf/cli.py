"""Batch command line for the full pipeline.

Subcommands mirror the library operations: gen-scene, gen-data, train,
eval, region-error, query, inverse, facade, render, serve. Output is
JSON lines for machine consumption (tables behind --pretty). All
randomness flows from explicit --seed flags, so a pipeline with fixed
seeds is reproducible byte for byte. Exit codes: 0 success, 1 user
error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _parse_viewpoint(text: str):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 5:
        raise ValueError("viewpoint must be x,y,z,alpha,gamma")
    return parts


def _parse_plane(text: str):
    """Plane mini-format: p=0,0,1.7;v1=1,0,0;v2=0,1,0;l=500;L=500"""
    from .field import Plane

    fields = {}
    for part in text.split(";"):
        key, _, val = part.partition("=")
        if not val:
            raise ValueError(f"bad plane field {part!r}")
        fields[key.strip()] = [float(v) for v in val.split(",")]
    try:
        return Plane(
            np.array(fields["p"]), np.array(fields["v1"]), np.array(fields["v2"]),
            fields["l"][0], fields["L"][0],
        )
    except KeyError as e:
        raise ValueError(f"plane spec missing field {e}") from e


def _emit(obj, pretty: bool):
    print(json.dumps(obj, indent=2 if pretty else None))


def build_parser() -> _Parser:
    p = _Parser(prog="nvf", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--threads", type=int, default=int(os.environ.get("NVF_THREADS", "1")),
                   help="worker cap for parallel sections (env NVF_THREADS)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-scene", help="generate a synthetic city")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--grid", type=int, default=6)
    g.add_argument("--block-size", type=float, default=80.0)
    g.add_argument("--street-width", type=float, default=12.0)
    g.add_argument("--density", type=float, default=0.7, help="building density in [0,1]")
    g.add_argument("--max-height", type=float, default=60.0)
    g.add_argument("--tree-density", type=float, default=0.4)
    g.add_argument("--water-fraction", type=float, default=0.1)
    g.add_argument("--out", required=True)

    d = sub.add_parser("gen-data", help="sample viewpoints and build ground truth")
    d.add_argument("--scene", required=True)
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--strategy", choices=["uniform", "street", "facade"], default="uniform")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--dirs-per-position", type=int, default=1)
    d.add_argument("--width", type=int, default=64)
    d.add_argument("--height", type=int, default=64)
    d.add_argument("--fov", type=float, default=60.0)
    d.add_argument("--out", required=True)

    t = sub.add_parser("train", help="fit the view field to a dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--scene", default=None,
                   help="bind class names and extent (defaults derived from data)")
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--batch-size", type=int, default=1024)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--test-fraction", type=float, default=0.0,
                   help="hold out this fraction for a final RMSE")
    t.add_argument("--out", required=True)
    t.add_argument("--report", default=None)
    t.add_argument("--quiet", action="store_true")

    e = sub.add_parser("eval", help="RMSE of a model on a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--pretty", action="store_true")

    r = sub.add_parser("region-error", help="region-grid accuracy protocol")
    r.add_argument("--scene", required=True)
    r.add_argument("--model", required=True)
    r.add_argument("--region-side", type=float, default=80.0)
    r.add_argument("--threshold", type=float, default=0.10)
    r.add_argument("--out", default=None, help="write full report JSON here")
    r.add_argument("--pretty", action="store_true")

    q = sub.add_parser("query", help="direct queries at explicit viewpoints")
    q.add_argument("--model", required=True)
    q.add_argument("--view", action="append", required=True, help="x,y,z,alpha,gamma (repeatable)")
    q.add_argument("--metric", default=None, help="perception metric expression")
    q.add_argument("--pretty", action="store_true")

    i = sub.add_parser("inverse", help="gradient-based inverse query")
    i.add_argument("--model", required=True)
    i.add_argument("--target", required=True, help='e.g. "tree:0.2-0.4,sky:0.3-0.5"')
    i.add_argument("--plane", default=None, help="p=..;v1=..;v2=..;l=..;L=..")
    i.add_argument("--fixed-dir", default=None, help="alpha,gamma")
    i.add_argument("--n", type=int, default=10, help="number of restarts/results")
    i.add_argument("--eta", type=float, default=0.01)
    i.add_argument("--iters", type=int, default=500)
    i.add_argument("--eps", type=float, default=1e-3)
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--pretty", action="store_true")

    f = sub.add_parser("facade", help="per-patch facade visibility summary")
    f.add_argument("--model", required=True)
    f.add_argument("--scene", required=True)
    f.add_argument("--building", type=int, required=True)
    f.add_argument("--patch-size", type=float, default=10.0)
    f.add_argument("--per-patch-samples", type=int, default=5)
    f.add_argument("--theme", default=None, help="class name to report (default: full distribution)")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--pretty", action="store_true")

    rd = sub.add_parser("render", help="false-color render of a viewpoint")
    rd.add_argument("--scene", required=True)
    rd.add_argument("--view", required=True, help="x,y,z,alpha,gamma")
    rd.add_argument("--width", type=int, default=256)
    rd.add_argument("--height", type=int, default=256)
    rd.add_argument("--out", required=True)

    s = sub.add_parser("serve", help="run the HTTP service")
    s.add_argument("--scene", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--metric", action="append", default=[],
                   help='register a metric as name=expression (repeatable)')
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8765)
    return p


def _cmd_gen_scene(args) -> int:
    from .scene import generate_city, save_scene

    scene = generate_city(
        seed=args.seed, grid=args.grid, block_size=args.block_size,
        street_width=args.street_width, building_density=args.density,
        max_height=args.max_height, tree_density=args.tree_density,
        water_fraction=args.water_fraction,
    )
    save_scene(scene, args.out)
    _emit({"scene": args.out, "triangles": len(scene.triangles),
           "buildings": len(scene.buildings), "classes": scene.class_names}, False)
    return 0


def _cmd_gen_data(args) -> int:
    from .dataset import (FacadeMountedSampling, StreetLevelSampling,
                          UniformSampling, build_dataset, sample_viewpoints,
                          save_views_csv)
    from .field import Viewpoint
    from .raster import Camera
    from .scene import load_scene

    scene = load_scene(args.scene)
    strategy = {
        "uniform": UniformSampling(directions_per_position=args.dirs_per_position),
        "street": StreetLevelSampling(directions_per_position=args.dirs_per_position),
        "facade": FacadeMountedSampling(directions_per_position=args.dirs_per_position),
    }[args.strategy]
    vps = sample_viewpoints(scene, strategy, args.n, args.seed)
    cam = Camera(Viewpoint(0, 0, 0, 0, 0), width=args.width, height=args.height, vfov_deg=args.fov)
    ds = build_dataset(scene, vps, camera=cam, workers=max(1, args.threads))
    save_views_csv(ds, args.out)
    _emit({"data": args.out, "samples": len(ds), "k": ds.k}, False)
    return 0


def _cmd_train(args) -> int:
    from .dataset import load_views_csv, split
    from .field import Normalizer
    from . import net as netmod
    from .train import TrainConfig, train

    ds = load_views_csv(args.data)
    if args.scene:
        from .scene import load_scene

        scene = load_scene(args.scene)
        normalizer = Normalizer.from_aabb(scene.aabb)
        class_names = scene.class_names
    else:
        lo = ds.viewpoints[:, :3].min(axis=0) - 1.0
        hi = ds.viewpoints[:, :3].max(axis=0) + 1.0
        normalizer = Normalizer(lo, hi)
        class_names = [f"m{i}" for i in range(ds.k)]

    test_set = None
    train_set = ds
    if args.test_fraction > 0:
        train_set, test_set = split(ds, args.test_fraction, args.seed)
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                         learning_rate=args.lr, seed=args.seed)
    provenance = {"data": os.path.basename(args.data), "seed": args.seed, "epochs": args.epochs}
    model = netmod.init(args.seed, ds.k, normalizer, class_names, provenance=provenance)
    fitted, report = train(train_set, config, model, test_dataset=test_set,
                           log_every=0 if args.quiet else 10)
    netmod.save_checkpoint(fitted, args.out)
    if args.report:
        report.save(args.report)
    _emit({"model": args.out, "final_loss": report.epoch_losses[-1],
           "test_rmse": report.final_test_rmse, "wall_time_s": round(report.wall_time_s, 2)}, False)
    return 0


def _cmd_eval(args) -> int:
    from .dataset import load_views_csv
    from .net import load_checkpoint
    from .train import evaluate_rmse

    rmse = evaluate_rmse(load_checkpoint(args.model), load_views_csv(args.data))
    _emit({"rmse": rmse}, args.pretty)
    return 0


def _cmd_region_error(args) -> int:
    from .analysis import region_error
    from .net import load_checkpoint
    from .scene import load_scene

    report = region_error(load_scene(args.scene), load_checkpoint(args.model),
                          region_side=args.region_side, threshold=args.threshold)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_json())
    if args.pretty:
        print(report.table())
    else:
        _emit({"pct_under_threshold": report.pct_under}, False)
    return 0


def _cmd_query(args) -> int:
    from . import percept
    from .net import load_checkpoint
    from .query import direct_query

    params = load_checkpoint(args.model)
    vps = np.array([_parse_viewpoint(v) for v in args.view])
    metric = None
    if args.metric:
        metric = percept.PerceptionMetric.compile("metric", args.metric, params.meta.class_names)
    out = direct_query(params, vps, metric)
    for vp, val in zip(vps, out):
        row = {"viewpoint": vp.tolist()}
        if metric is None:
            row["m"] = val.tolist()
        else:
            row["value"] = float(val)
        _emit(row, args.pretty)
    return 0


def _cmd_inverse(args) -> int:
    from .net import load_checkpoint
    from .query import InverseConfig, inverse_gradient, parse_target

    params = load_checkpoint(args.model)
    target = parse_target(args.target, params.meta.class_names)
    region = _parse_plane(args.plane) if args.plane else None
    fixed = None
    if args.fixed_dir:
        a, g = (float(v) for v in args.fixed_dir.split(","))
        fixed = (a, g)
    cfg = InverseConfig(eta=args.eta, max_iters=args.iters, tol=args.eps,
                        restarts=args.n, seed=args.seed, region=region, fixed_direction=fixed)
    for r in inverse_gradient(params, target, cfg):
        _emit({"viewpoint": r.viewpoint.as_array().tolist(), "m": r.m.tolist(),
               "loss": r.loss, "status": r.status, "iterations": r.iterations,
               "restart": r.restart}, args.pretty)
    return 0


def _cmd_facade(args) -> int:
    from .net import load_checkpoint
    from .query import facade_summary
    from .scene import load_scene

    params = load_checkpoint(args.model)
    scene = load_scene(args.scene)
    patches, means = facade_summary(params, scene, args.building, args.patch_size,
                                    args.per_patch_samples, args.seed)
    theme_idx = scene.class_index(args.theme) if args.theme else None
    for patch, m in zip(patches, means):
        row = {"center": patch.center.tolist(), "normal": patch.normal.tolist()}
        if theme_idx is None:
            row["m"] = m.tolist()
        else:
            row[args.theme] = float(m[theme_idx])
        _emit(row, args.pretty)
    return 0


def _cmd_render(args) -> int:
    from .field import Viewpoint
    from .raster import Camera, render_falsecolor
    from .scene import load_scene

    scene = load_scene(args.scene)
    cam = Camera(Viewpoint.from_array(_parse_viewpoint(args.view)),
                 width=args.width, height=args.height)
    with open(args.out, "wb") as fh:
        fh.write(render_falsecolor(scene, cam))
    _emit({"render": args.out, "width": args.width, "height": args.height}, False)
    return 0


def _cmd_serve(args) -> int:
    from .service import load_state, run_server

    metrics = {}
    for entry in args.metric:
        name, _, src = entry.partition("=")
        if not src:
            raise ValueError(f"metric must be name=expression, got {entry!r}")
        metrics[name.strip()] = src.strip()
    state = load_state(args.scene, args.model, args.data, metrics)
    run_server(state, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "gen-scene": _cmd_gen_scene,
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "region-error": _cmd_region_error,
    "query": _cmd_query,
    "inverse": _cmd_inverse,
    "facade": _cmd_facade,
    "render": _cmd_render,
    "serve": _cmd_serve,
}

# errors from these are user mistakes (bad files, bad flags), not bugs
_USER_ERRORS = (FileNotFoundError, PermissionError, ValueError, KeyError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except _USER_ERRORS as e:
        sys.stderr.write(f"error: {e}\n")
        return 1
    except KeyboardInterrupt:
        return 1
    except Exception as e:  # noqa: BLE001
        sys.stderr.write(f"internal error: {type(e).__name__}: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
