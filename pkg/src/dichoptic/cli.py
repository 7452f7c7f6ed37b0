"""Command line interface.

Subcommands: gen (write trial-set files), render (rasterize one scene),
volcast (masked volume ray casting), simulate (scripted participant run),
serve (wire protocol servers), analyze (summary / matrix / tlx / test /
plot over session logs).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analysis, plotting, volume as vol
from .render import compose, render_stereo_pair, write_png, write_ppm
from .scenes import SET_KINDS, SetConfig, generate_set, load_set, save_set
from .service import _highlight_from_name, serve
from .session import build_default_plan, export_session, load_session, run_scripted_session


def _parse_size(text: str) -> tuple[int, int]:
    w, _, h = text.lower().partition("x")
    return int(w), int(h)


def _write_image(path: Path, pixels):
    if path.suffix.lower() == ".png":
        write_png(path, pixels)
    else:
        write_ppm(path, pixels)


def _cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kinds = SET_KINDS if args.kind == "all" else (args.kind,)
    for kind in kinds:
        config = SetConfig(set_kind=kind, scenes_per_set=args.scenes, rng_seed=args.seed)
        scenes = generate_set(config)
        path = save_set(out / f"{kind}_seed{args.seed}.json", config, scenes)
        print(f"wrote {path} ({len(scenes)} scenes)")
    return 0


def _cmd_render(args) -> int:
    if args.set_file:
        config, scenes = load_set(args.set_file)
    else:
        config = SetConfig(set_kind=args.kind, rng_seed=args.seed)
        scenes = generate_set(config)
    if args.scene_id:
        matches = [s for s in scenes if s.scene_id == args.scene_id]
        if not matches:
            print(f"no scene {args.scene_id!r} in the set", file=sys.stderr)
            return 2
        scene = matches[0]
    else:
        scene = scenes[args.index]
    from .scenes import default_rig

    highlight = None if args.technique is None else _highlight_from_name(args.technique, scene)
    pair = render_stereo_pair(scene, default_rig(), highlight, args.time_ms, _parse_size(args.size))
    image = compose(pair, args.layout)
    _write_image(Path(args.out), image)
    print(f"wrote {args.out} ({scene.scene_id}, technique {pair[0].technique}, layout {args.layout})")
    return 0


def _cmd_volcast(args) -> int:
    if args.phantom:
        grid, labels = vol.make_phantom(args.phantom, dims=tuple(args.dims))
    else:
        grid = vol.load_raw_volume(args.volume)
        labels = None
    if args.tf and Path(args.tf).exists():
        tf = vol.load_transfer_function(args.tf)
    elif args.tf == "color":
        tf = vol.color_transfer_function(grid.value_range)
    else:
        tf = vol.greyscale_transfer_function(grid.value_range)
    if args.mask:
        mask = vol.load_mask(args.mask)
    elif args.segment is not None:
        if labels is None:
            print("--segment needs a phantom (labels)", file=sys.stderr)
            return 2
        mask = vol.mask_from_segment(labels, args.segment)
    else:
        mask = vol.MaskVolume.zeros(grid.dims)
    clip = None
    if args.clip:
        nx, ny, nz, d = (float(v) for v in args.clip.split(","))
        clip = ((nx, ny, nz), d)
    settings = vol.RenderSettings(
        deadeye=None if args.deadeye == "off" else args.deadeye,
        clip_plane=clip,
    )
    size = _parse_size(args.size)
    views = vol.orbit_views(grid, size, azimuth_deg=args.azimuth, elevation_deg=args.elevation)
    left = vol.raycast(grid, tf, mask, views[0], settings, size, threads=args.threads)
    right = vol.raycast(grid, tf, mask, views[1], settings, size, threads=args.threads)
    image = compose((left, right), args.layout)
    _write_image(Path(args.out), image)
    print(f"wrote {args.out} (deadeye {args.deadeye}, layout {args.layout})")
    return 0


def _cmd_simulate(args) -> int:
    plan = build_default_plan(args.participant, args.seed,
                              scenes_per_set=args.scenes, training_scenes=args.training)
    session = run_scripted_session(plan, responder=args.responder)
    text = export_session(session.log, args.out)
    n_responses = len(session.log.responses)
    print(f"wrote {args.out} ({n_responses} responses, {len(text.splitlines())} lines)")
    return 0


def _cmd_serve(args) -> int:
    serve(host=args.host, tcp_port=args.port, http_port=args.http_port,
          static_dir=args.static)
    return 0


def _load_logs(paths: list[str]):
    files = []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            files.extend(sorted(path.glob("*.jsonl")))
        else:
            files.append(path)
    if not files:
        raise SystemExit("no session logs found")
    return [load_session(f) for f in files]


def _cmd_analyze(args) -> int:
    logs = _load_logs(args.logs)
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    def emit(name: str, text: str):
        if out_dir:
            target = out_dir / name
            target.write_text(text)
            print(f"wrote {target}")
        else:
            print(text, end="")

    if args.what == "summary":
        emit("summary.csv", analysis.summary_to_csv(analysis.summarize(logs)))
    elif args.what == "matrix":
        if args.by_plane:
            for plane, matrix in analysis.position_matrices_by_plane(logs).items():
                if matrix.counts.sum():
                    emit(f"matrix_plane{plane}.csv", analysis.matrix_to_csv(matrix))
        else:
            emit("matrix.csv", analysis.matrix_to_csv(analysis.position_matrix(logs)))
    elif args.what == "tlx":
        emit("tlx.csv", analysis.tlx_to_csv(analysis.tlx_aggregate(logs)))
    elif args.what == "test":
        results = {}
        try:
            _, acc = analysis.accuracy_matrix(logs)
            results["accuracy_rm_anova"] = analysis.rm_anova_oneway(acc)
        except ValueError as exc:
            print(f"skipping accuracy ANOVA: {exc}", file=sys.stderr)
        for name, r in analysis.tlx_paired_tests(logs).items():
            results[f"tlx_{name}_paired"] = r
        emit("tests.csv", analysis.tests_to_csv(results))
    elif args.what == "plot":
        target = out_dir or Path(".")
        target.mkdir(parents=True, exist_ok=True)
        report = analysis.summarize(logs)
        print(f"wrote {plotting.accuracy_chart(report, target / 'accuracy.png')}")
        aggregate = analysis.tlx_aggregate(logs)
        if aggregate:
            print(f"wrote {plotting.tlx_chart(aggregate, target / 'questionnaires.png')}")
        matrix = analysis.position_matrix(logs)
        if matrix.counts.sum():
            print(f"wrote {plotting.position_heatmap(matrix, target / 'positions.png')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dichoptic",
                                     description="one-eye highlighting toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate trial-set files")
    p.add_argument("--kind", choices=SET_KINDS + ("all",), default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenes", type=int, default=48)
    p.add_argument("--out", default="sets")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("render", help="render one scene to an image")
    p.add_argument("--set-file", help="set file written by gen")
    p.add_argument("--kind", choices=SET_KINDS, default="exp1_16")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scene-id")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--technique",
                   choices=["deadeye-left", "deadeye-right", "color", "flicker", "none"])
    p.add_argument("--layout", choices=["side_by_side", "anaglyph_red_cyan", "left_only", "right_only"],
                   default="side_by_side")
    p.add_argument("--size", default="512x512")
    p.add_argument("--time-ms", type=float, default=0.0)
    p.add_argument("--out", default="scene.png")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("volcast", help="masked stereo volume ray casting")
    p.add_argument("--volume", help="raw volume header file")
    p.add_argument("--phantom", choices=vol.PHANTOM_KINDS)
    p.add_argument("--dims", type=int, nargs=3, default=[64, 64, 64])
    p.add_argument("--tf", help="transfer function file, or 'greyscale'/'color'")
    p.add_argument("--mask", help="mask header file")
    p.add_argument("--segment", type=int, help="build the mask from this phantom segment id")
    p.add_argument("--deadeye", choices=["left", "right", "off"], default="off")
    p.add_argument("--clip", help="clip plane as nx,ny,nz,d")
    p.add_argument("--size", default="256x256")
    p.add_argument("--layout", choices=["side_by_side", "anaglyph_red_cyan", "left_only", "right_only"],
                   default="side_by_side")
    p.add_argument("--azimuth", type=float, default=30.0)
    p.add_argument("--elevation", type=float, default=15.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="volume.png")
    p.set_defaults(func=_cmd_volcast)

    p = sub.add_parser("simulate", help="run a scripted participant and export the log")
    p.add_argument("--participant", default="sim01")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenes", type=int, default=48)
    p.add_argument("--training", type=int, default=20)
    p.add_argument("--responder", default="perfect",
                   choices=["perfect", "always_no", "always_yes"])
    p.add_argument("--out", default="session.jsonl")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("serve", help="run the wire protocol servers")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8764, help="TCP line protocol port")
    p.add_argument("--http-port", type=int, default=8765, help="HTTP bridge port")
    p.add_argument("--static", help="directory of static files to serve over HTTP")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("analyze", help="score session logs")
    p.add_argument("what", choices=["summary", "matrix", "tlx", "test", "plot"])
    p.add_argument("--logs", nargs="+", required=True, help="log files or directories")
    p.add_argument("--by-plane", action="store_true")
    p.add_argument("--out", help="output directory (default: print to stdout)")
    p.set_defaults(func=_cmd_analyze)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
