"""Command-line entry points.

Subcommands: convert, render, bench, fuse, simulate, netprobe, serve,
report. Pose files are JSON with rotation (w, x, y, z quaternion),
translation and uniform_scale; twist scripts are CSV rows t_s,linear,angular.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .camera import CameraModel
from .channels import LinkModel, measure_m2p, probe_stream_m2p
from .fusion import StereoIntrinsics, composite, frame_to_cloud
from .maze import MazeSpec, canonical_maze
from .missions import generate_trajectories
from .renderer import bench as run_bench
from .renderer import render
from .scene import Convention, convert_convention, load_cache, load_ply, register_scene, save_cache
from .session import RenderOptions, SessionConfig, TwistScript, ViewMode, run_session
from .transforms import RigidTransform
from .wire import decode_frame


def _load_pose(path) -> RigidTransform:
    if path is None:
        return RigidTransform.identity()
    return RigidTransform.from_dict(json.loads(Path(path).read_text()))


def _load_scene(path):
    path = Path(path)
    if path.suffix == ".npz":
        return load_cache(path)
    scene = load_ply(path)
    return register_scene(convert_convention(scene), RigidTransform.identity())


def _parse_size(text) -> tuple[int, int]:
    w, h = text.lower().split("x")
    return int(w), int(h)


def _save_png(target, path):
    from PIL import Image

    Image.fromarray(target.to_srgb_u8()).save(path)


def cmd_convert(args) -> int:
    scene = load_ply(args.input)
    if scene.source_convention is Convention.COLMAP:
        scene = convert_convention(scene)
    scene = register_scene(scene, _load_pose(args.reference))
    save_cache(scene, args.output)
    print(f"cached {len(scene)} splats -> {args.output}")
    return 0


def cmd_render(args) -> int:
    scene = _load_scene(args.scene)
    w, h = _parse_size(args.size)
    camera = CameraModel(pose=_load_pose(args.camera), viewport=(w, h),
                         vertical_fov=args.fov)
    target = render(scene, camera, workers=args.workers)
    _save_png(target, args.out)
    print(f"rendered {len(scene)} splats at {w}x{h} -> {args.out}")
    return 0


def cmd_bench(args) -> int:
    scene = _load_scene(args.scene)
    w, h = _parse_size(args.size)
    camera = CameraModel(pose=_load_pose(args.camera), viewport=(w, h),
                         vertical_fov=args.fov)
    report = run_bench(scene, camera, frames=args.frames, workers=args.workers)
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(f"{report['fps']:.2f} fps  mean {report['ms_per_frame_mean']:.1f} ms  "
              f"p95 {report['ms_per_frame_p95']:.1f} ms  "
              f"{report['splats_per_s']:.3g} splats/s")
    return 0


def cmd_fuse(args) -> int:
    scene = _load_scene(args.scene)
    frame = decode_frame(Path(args.frame).read_bytes())
    frame.camera_pose_at_capture = _load_pose(args.frame_pose)
    w, h = _parse_size(args.size)
    camera = CameraModel(pose=_load_pose(args.camera), viewport=(w, h),
                         vertical_fov=args.fov)
    intr = StereoIntrinsics.from_fov(baseline=args.baseline, width=frame.width,
                                     height=frame.height)
    base = render(scene, camera, workers=args.workers)
    cloud = frame_to_cloud(frame, intr)
    target = composite(base, cloud, camera, point_px=args.point_px)
    _save_png(target, args.out)
    print(f"fused {len(cloud)} live points over {len(scene)} splats -> {args.out}")
    return 0


def _load_script(path) -> TwistScript:
    entries = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            t_s, lin, ang = (float(v) for v in row[:3])
            entries.append((round(t_s * 1e6), lin, ang))
    return TwistScript(entries)


def cmd_simulate(args) -> int:
    maze = MazeSpec.load(args.maze) if args.maze else canonical_maze()
    trajectories = generate_trajectories(maze)
    cfg = SessionConfig(
        mode=ViewMode(args.mode),
        trajectory=trajectories[args.trajectory - 1],
        link=LinkModel(args.delay_ms, args.jitter_ms, args.loss, seed=args.seed),
        maze=maze,
        odom_noise=(args.odom_noise, args.odom_noise),
        odom_seed=args.seed,
        timeout_s=args.timeout,
    )
    script = _load_script(args.script)
    result = run_session(cfg, script)
    m = result.metrics
    doc = {
        "completed": m.completed,
        "elapsed_s": m.elapsed_s,
        "goal_splits_s": list(m.goal_splits_s),
        "collision_count": m.collision_count,
        "command_count": m.command_count,
        "ticks": m.ticks,
        "frames_sent": result.frames_sent,
        "frames_presented": result.frames_presented,
        "mode": args.mode,
        "trajectory": args.trajectory,
        "seed": args.seed,
    }
    out = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(out)
    print(out)
    return 0


def cmd_netprobe(args) -> int:
    if args.trace:
        trace = [json.loads(line) for line in Path(args.trace).read_text().splitlines()
                 if line.strip()]
    else:
        link = LinkModel(args.delay_ms, args.jitter_ms, args.loss, seed=args.seed)
        trace = probe_stream_m2p(link, n_frames=args.frames)
    stats = measure_m2p(trace)
    print(json.dumps(stats, indent=2))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import OperatorService, create_app

    scene = _load_scene(args.scene) if args.scene else None
    maze = MazeSpec.load(args.maze) if args.maze else canonical_maze()
    service = OperatorService(
        scene=scene,
        maze=maze,
        mode=ViewMode(args.mode),
        render=RenderOptions(viewport=_parse_size(args.view_size), every_n_frames=3),
    )
    app = create_app(service)
    print(f"operator console backend on http://{args.host}:{args.port} "
          f"(mode {args.mode}, scene {'yes' if scene else 'no'})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_report(args) -> int:
    docs = [json.loads(Path(p).read_text()) for p in args.metrics]
    cols = ["trajectory", "mode", "completed", "elapsed_s", "collision_count",
            "command_count"]
    rows = [[str(d.get(c, "-")) for c in cols] for d in docs]
    widths = [max(len(c), *(len(r[i]) for r in rows)) for i, c in enumerate(cols)]
    line = "  ".join(c.ljust(w) for c, w in zip(cols, widths))
    print(line)
    print("-" * len(line))
    for r in rows:
        print("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    splits = [d for d in docs if d.get("goal_splits_s")]
    if splits:
        print()
        for d in splits:
            marks = ", ".join(f"{s:.2f}s" for s in d["goal_splits_s"])
            print(f"trajectory {d.get('trajectory', '?')}: splits {marks}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splatteleop")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("convert", help="PLY -> registered engine cache")
    c.add_argument("--input", required=True)
    c.add_argument("--reference", help="pose JSON for the registration transform")
    c.add_argument("--output", required=True)
    c.set_defaults(func=cmd_convert)

    r = sub.add_parser("render", help="rasterize a scene to PNG")
    r.add_argument("--scene", required=True)
    r.add_argument("--camera", help="pose JSON (camera-to-world)")
    r.add_argument("--size", default="640x480")
    r.add_argument("--fov", type=float, default=54.0)
    r.add_argument("--workers", type=int, default=4)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_render)

    b = sub.add_parser("bench", help="rasterizer throughput report")
    b.add_argument("--scene", required=True)
    b.add_argument("--camera")
    b.add_argument("--size", default="512x512")
    b.add_argument("--fov", type=float, default=54.0)
    b.add_argument("--frames", type=int, default=20)
    b.add_argument("--workers", type=int, default=4)
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=cmd_bench)

    f = sub.add_parser("fuse", help="composite a live frame over a splat render")
    f.add_argument("--scene", required=True)
    f.add_argument("--frame", required=True, help="binary frame file (wire format)")
    f.add_argument("--frame-pose", help="capture pose JSON")
    f.add_argument("--camera", help="view pose JSON")
    f.add_argument("--size", default="640x480")
    f.add_argument("--fov", type=float, default=54.0)
    f.add_argument("--baseline", type=float, default=0.063)
    f.add_argument("--point-px", type=int, default=2)
    f.add_argument("--workers", type=int, default=4)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fuse)

    s = sub.add_parser("simulate", help="headless scripted session -> metrics JSON")
    s.add_argument("--maze", help="maze layout YAML (default: canonical)")
    s.add_argument("--script", required=True, help="twist CSV: t_s,linear,angular")
    s.add_argument("--mode", default="exo", choices=[m.value for m in ViewMode])
    s.add_argument("--trajectory", type=int, default=1, choices=[1, 2, 3, 4])
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--odom-noise", type=float, default=0.005)
    s.add_argument("--delay-ms", type=float, default=40.0)
    s.add_argument("--jitter-ms", type=float, default=8.0)
    s.add_argument("--loss", type=float, default=0.0)
    s.add_argument("--timeout", type=float, default=300.0)
    s.add_argument("--out", help="metrics JSON path")
    s.set_defaults(func=cmd_simulate)

    n = sub.add_parser("netprobe", help="motion-to-photon stats as JSON")
    n.add_argument("--trace", help="JSONL event trace; omit to synthesize one")
    n.add_argument("--frames", type=int, default=1000)
    n.add_argument("--delay-ms", type=float, default=153.47)
    n.add_argument("--jitter-ms", type=float, default=33.33)
    n.add_argument("--loss", type=float, default=0.0)
    n.add_argument("--seed", type=int, default=0)
    n.set_defaults(func=cmd_netprobe)

    v = sub.add_parser("serve", help="operator console backend")
    v.add_argument("--scene")
    v.add_argument("--maze")
    v.add_argument("--mode", default="exo", choices=[m.value for m in ViewMode])
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8731)
    v.add_argument("--view-size", default="320x240")
    v.set_defaults(func=cmd_serve)

    t = sub.add_parser("report", help="metrics JSON -> table")
    t.add_argument("metrics", nargs="+")
    t.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
