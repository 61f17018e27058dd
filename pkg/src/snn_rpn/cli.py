"""Command-line harness: generate, run, sweep, evaluate, compare, report.

Flag precedence: explicit flags override config-file keys, which override
built-in defaults. All outputs are reproducible byte for byte for the same
inputs and seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from fractions import Fraction

from . import config as cfgmod
from . import cost, io, meanshift, metrics, synth
from .pipeline import run_pipeline


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def _parse_float_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--height", type=int, help="sensor rows")
    p.add_argument("--width", type=int, help="sensor columns")
    p.add_argument("--window", type=int, help="analysis window side in pixels")
    p.add_argument("--stride", type=int, help="window stride in pixels")
    p.add_argument("--fps", type=int, help="frame rate for clustering/evaluation")
    p.add_argument("--duration", type=float, help="covered duration in seconds")
    p.add_argument("--conv-vth", type=float, help="window-neuron firing threshold")
    p.add_argument("--lateral", choices=("on", "off"), help="neighbor excitation")


def _pipeline_config(args) -> "cfgmod.PipelineConfig":
    mapping = io.read_config(args.config) if args.config else {}
    lateral = None if args.lateral is None else args.lateral == "on"
    return cfgmod.make_pipeline_config(
        mapping,
        sensor_height=args.height,
        sensor_width=args.width,
        window=args.window,
        stride=args.stride,
        fps=args.fps,
        duration_s=args.duration,
        conv_v_th=getattr(args, "conv_vth", None),
        lateral=lateral,
    )


def _ms_config(args) -> meanshift.MsConfig:
    mapping = io.read_config(args.config) if args.config else {}
    return cfgmod.make_ms_config(
        mapping,
        radius=getattr(args, "ms_radius", None),
        eta=getattr(args, "ms_eta", None),
        tau_act_us=getattr(args, "ms_tau_act", None),
        act_threshold=getattr(args, "ms_act_threshold", None),
        max_clusters=getattr(args, "ms_max_clusters", None),
    )


def _load_events(path, config) -> list:
    return list(io.read_events(path, config.sensor_geometry()))


def _cmd_synth(args) -> int:
    spec = synth.preset(args.preset)
    spec = dataclasses.replace(spec, seed=args.seed)
    if args.duration is not None:
        spec = dataclasses.replace(spec, duration_s=args.duration)
    out = synth.gen_scene(spec)
    os.makedirs(args.out, exist_ok=True)
    events_path = os.path.join(args.out, "events.csv")
    gt_path = os.path.join(args.out, "gt.csv")
    io.write_events(events_path, out.events)
    io.write_gt(gt_path, out.gt)
    print(
        f"wrote {len(out.events)} events to {events_path} and "
        f"{len(out.gt)} ground-truth boxes to {gt_path} "
        f"({out.frame_count} frames, {spec.geometry.width}x{spec.geometry.height})"
    )
    return 0


def _cmd_run(args) -> int:
    config = _pipeline_config(args)
    events = _load_events(args.events, config)
    frames, counters = run_pipeline(events, config)
    os.makedirs(args.out, exist_ok=True)
    proposals_path = os.path.join(args.out, "proposals.csv")
    io.write_proposals(proposals_path, frames)

    measured = cost.measure(counters)
    geometry = config.conv_geometry()
    inputs = cost.CostInputs(
        k_inp=counters.k_inp,
        alpha=measured.alpha,
        w=config.window,
        f=measured.frames,
        r=int(round(float(measured.r_mean))),
        h=config.sensor_height,
        l=config.sensor_width,
        m=geometry.rows,
        n=geometry.cols,
        b=args.bits,
    )
    report = cost.make_report(inputs)
    text = cost.format_report(report, inputs, measured)
    report_path = os.path.join(args.out, "cost.txt")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    csv_path = os.path.join(args.out, "cost.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("key,value\n")
        for key, value in cost.report_csv_rows(report, inputs):
            fh.write(f"{key},{value}\n")
    print(f"wrote {proposals_path}, {report_path}, {csv_path}")
    print(text)
    return 0


def _cmd_sweep(args) -> int:
    config = _pipeline_config(args)
    events = _load_events(args.events, config)
    gt = io.read_gt(args.gt)
    points = metrics.sweep_thresholds(
        events, gt, config, args.thresholds, args.metric, args.overlap
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("threshold,precision,recall,metric,overlap\n")
        for pt in points:
            fh.write(
                f"{pt.threshold:g},{_fmt(pt.precision)},{_fmt(pt.recall)},"
                f"{args.metric},{args.overlap:g}\n"
            )
    for pt in points:
        print(f"threshold {pt.threshold:g}: precision {_fmt(pt.precision) or 'n/a'} "
              f"recall {_fmt(pt.recall) or 'n/a'}")
    print(f"wrote {args.out}")
    return 0


def _cmd_eval(args) -> int:
    proposals = io.read_proposals(args.proposals)
    gt = metrics.group_by_frame(io.read_gt(args.gt))
    total = metrics.MatchCounts()
    for f in sorted(set(proposals) | set(gt)):
        total.add(
            metrics.match_frame(proposals.get(f, []), gt.get(f, []), args.overlap, args.metric)
        )
    precision, recall = metrics.pr_point(total)
    print(
        f"tp {total.tp}  fp {total.fp}  fn {total.fn}  "
        f"precision {_fmt(precision) or 'n/a'}  recall {_fmt(recall) or 'n/a'}"
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("metric,overlap,tp,fp,fn,precision,recall\n")
            fh.write(
                f"{args.metric},{args.overlap:g},{total.tp},{total.fp},{total.fn},"
                f"{_fmt(precision)},{_fmt(recall)}\n"
            )
        print(f"wrote {args.out}")
    return 0


def _cmd_compare(args) -> int:
    config = _pipeline_config(args)
    events = _load_events(args.events, config)
    gt = io.read_gt(args.gt)
    gt_by_frame = metrics.group_by_frame(gt)

    rpn_points = metrics.sweep_thresholds(
        events, gt, config, args.thresholds, args.metric, args.overlap
    )
    ms_base = _ms_config(args)
    ms_rows = []
    for act_th in sorted(args.ms_thresholds):
        ms_cfg = dataclasses.replace(ms_base, act_threshold=act_th)
        frames, _ = meanshift.run_meanshift(events, config, ms_cfg)
        counts = metrics.match_frames(frames, gt_by_frame, args.overlap, args.metric)
        precision, recall = metrics.pr_point(counts)
        ms_rows.append((act_th, precision, recall))

    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("algorithm,threshold,precision,recall,metric,overlap\n")
        for pt in rpn_points:
            fh.write(
                f"snn-rpn,{pt.threshold:g},{_fmt(pt.precision)},{_fmt(pt.recall)},"
                f"{args.metric},{args.overlap:g}\n"
            )
        for act_th, precision, recall in ms_rows:
            fh.write(
                f"mean-shift,{act_th:g},{_fmt(precision)},{_fmt(recall)},"
                f"{args.metric},{args.overlap:g}\n"
            )
    for pt in rpn_points:
        print(f"snn-rpn th={pt.threshold:g}: p={_fmt(pt.precision) or 'n/a'} r={_fmt(pt.recall) or 'n/a'}")
    for act_th, precision, recall in ms_rows:
        print(f"mean-shift th={act_th:g}: p={_fmt(precision) or 'n/a'} r={_fmt(recall) or 'n/a'}")
    print(f"wrote {args.out}")
    return 0


def _cmd_cost(args) -> int:
    frames = int(round(args.fps * args.duration))
    inputs = cost.CostInputs(
        k_inp=args.events_count,
        alpha=cost.as_rational(args.alpha),
        w=args.w,
        f=frames,
        r=args.r,
        h=args.h,
        l=args.l,
        m=args.m,
        n=args.n,
        b=args.b,
    )
    report = cost.make_report(inputs)
    print(cost.format_report(report, inputs))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("key,value\n")
            for key, value in cost.report_csv_rows(report, inputs):
                fh.write(f"{key},{value}\n")
        print(f"wrote {args.out}")
    return 0


def _cmd_render(args) -> int:
    config = _pipeline_config(args)
    geometry = config.sensor_geometry()
    events = _load_events(args.events, config)
    proposals = io.read_proposals(args.proposals) if args.proposals else {}
    gt = metrics.group_by_frame(io.read_gt(args.gt)) if args.gt else {}
    fps = config.fps

    by_frame: dict[int, list] = {}
    for ev in events:
        by_frame.setdefault((ev.t * fps) // 1_000_000, []).append(ev)
    last = max(by_frame) if by_frame else -1
    count = last + 1
    if args.max_frames is not None:
        count = min(count, args.max_frames)
    os.makedirs(args.out, exist_ok=True)
    for f in range(count):
        image = io.render_frame(
            by_frame.get(f, []), proposals.get(f, []), geometry, gt.get(f, [])
        )
        with open(os.path.join(args.out, f"frame_{f:06d}.ppm"), "wb") as fh:
            fh.write(image)
    print(f"wrote {count} frames to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snn-rpn",
        description="Event-driven spiking region proposals for neuromorphic vision streams",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("--preset", required=True, choices=synth.PRESET_NAMES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, help="override scene duration in seconds")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("run", help="run the pipeline on an event file")
    p.add_argument("--events", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--bits", type=int, default=8, help="bits per stored variable")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="precision/recall over firing thresholds")
    p.add_argument("--events", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--thresholds", required=True, type=_parse_float_list)
    p.add_argument("--metric", choices=metrics.METRICS, default="iou")
    p.add_argument("--overlap", type=float, default=0.3)
    p.add_argument("--out", required=True, help="output CSV path")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("eval", help="score a proposals file against ground truth")
    p.add_argument("--proposals", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--metric", choices=metrics.METRICS, default="iou")
    p.add_argument("--overlap", type=float, default=0.3)
    p.add_argument("--out", help="optional output CSV path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("compare", help="pipeline vs tracker on one denoised stream")
    p.add_argument("--events", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--thresholds", required=True, type=_parse_float_list,
                   help="window-neuron thresholds for the pipeline sweep")
    p.add_argument("--ms-thresholds", required=True, type=_parse_float_list,
                   help="activity thresholds for the tracker sweep")
    p.add_argument("--metric", choices=metrics.METRICS, default="iou")
    p.add_argument("--overlap", type=float, default=0.3)
    p.add_argument("--ms-radius", type=float)
    p.add_argument("--ms-eta", type=float)
    p.add_argument("--ms-tau-act", type=float)
    p.add_argument("--ms-max-clusters", type=int)
    p.add_argument("--out", required=True, help="output CSV path")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("cost", help="evaluate the operation/memory model")
    p.add_argument("--alpha", required=True, help="surviving-event fraction, e.g. 0.15")
    p.add_argument("--w", required=True, type=int, help="window side")
    p.add_argument("--h", required=True, type=int, help="sensor rows")
    p.add_argument("--l", required=True, type=int, help="sensor columns")
    p.add_argument("--m", required=True, type=int, help="window grid rows")
    p.add_argument("--n", required=True, type=int, help="window grid columns")
    p.add_argument("--r", required=True, type=int, help="proposals per frame")
    p.add_argument("--b", required=True, type=int, help="bits per variable")
    p.add_argument("--fps", type=int, default=30)
    p.add_argument("--duration", type=float, default=0.0, help="seconds, for the frame count")
    p.add_argument("--events-count", type=int, default=0, help="input events for totals")
    p.add_argument("--out", help="optional output CSV path")
    p.set_defaults(func=_cmd_cost)

    p = sub.add_parser("render", help="draw per-frame PPM images")
    p.add_argument("--events", required=True)
    p.add_argument("--proposals")
    p.add_argument("--gt")
    p.add_argument("--max-frames", type=int)
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"snn-rpn {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
