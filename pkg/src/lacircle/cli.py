"""Command-line interface: ``lacircle {edges,detect,synth,bench}``.

Exit codes: 0 success, 1 I/O or configuration error, 2 nothing detectable
(too few edge points or no feasible candidate), 3 benchmark assertion failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields, replace

from . import __version__
from .bench import MetricConfig, SceneSpec, generate_scene, load_suite, run_benchmark
from .detector import DetectorConfig, detect, save_overlay
from .edges import (
    EdgeConfig,
    detect_edges,
    load_edge_map,
    load_gray_image,
    save_edge_map,
    save_gray_image,
)
from .errors import CircleDetectionError, NoFeasibleActions, TooFewEdgePoints

EXIT_OK, EXIT_IO, EXIT_NO_DETECTION, EXIT_ASSERT = 0, 1, 2, 3

# flag name -> (type, help)
DETECTOR_FLAGS = {
    "fraction": (float, "share of edge pixels sampled for triplets (default 0.05)"),
    "r-min": (float, "smallest accepted radius (default 40)"),
    "r-max": (float, "largest accepted radius (default 150)"),
    "sensitivity": (float, "distinctiveness sensitivity s (default 2)"),
    "theta": (float, "learning rate in (0, 1) (default 0.001)"),
    "k-max": (int, "iteration budget (default: half the number of actions)"),
    "k-cap": (int, "absolute iteration cap (default 5000)"),
    "p-stop": (float, "stop once an action reaches this probability (default 0.2)"),
    "pr-divisor": (float, "accept circles down to Pr_high / divisor (default 10)"),
    "action-cap": (int, "maximum number of candidate circles (default 1000)"),
    "max-clip-fraction": (float, "reject candidates clipped beyond this share (default 0.5)"),
    "beta-accept": (float, "skip accepted circles with lower reinforcement (default 0)"),
    "beta-min-solution": (float, "stop learning once a candidate reaches this reinforcement"),
}
EDGE_FLAGS = {
    "blur-sigma": (float, "Gaussian sigma before the gradient (default 1.4)"),
    "low-thresh": (float, "hysteresis low threshold, fraction of peak gradient (default 0.1)"),
    "high-thresh": (float, "hysteresis high threshold, fraction of peak gradient (default 0.3)"),
}
METRIC_FLAGS = {
    "eta": (float, "centre-shift weight of the error score (default 0.05)"),
    "mu": (float, "radius weight of the error score (default 0.1)"),
    "es-fail": (float, "error charged for a missed true circle (default 2.0)"),
}


class CliError(Exception):
    def __init__(self, message, code=EXIT_IO):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(f"{self.prog}: {message}")


def _dest(flag: str) -> str:
    return flag.replace("-", "_")


def _add_flags(p, table):
    for flag, (typ, help_) in table.items():
        p.add_argument(f"--{flag}", type=typ, default=None, help=help_)


def _read_config(path, allowed=None) -> dict:
    """Flat JSON config; ``allowed`` lists the keys (flag spelling) it may hold."""
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror}") from exc
    except ValueError as exc:
        raise CliError(f"malformed config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise CliError(f"config {path} must hold a JSON object")
    out = {_dest(k): v for k, v in data.items()}
    if allowed is not None:
        unknown = set(out) - {_dest(a) for a in allowed}
        if unknown:
            raise CliError(f"unknown key(s) in config {path}: {', '.join(sorted(unknown))}")
    return out


def _merged(args, table, config: dict) -> dict:
    """Values for ``table`` keys: flag if given, else config file, else absent."""
    out = {}
    for flag in table:
        key = _dest(flag)
        val = getattr(args, key, None)
        if val is None:
            val = config.get(key)
        if val is not None:
            out[key] = val
    return out


def build_detector_config(args, config: dict) -> DetectorConfig:
    vals = _merged(args, {**DETECTOR_FLAGS, **EDGE_FLAGS}, config)
    try:
        return DetectorConfig.from_dict(vals)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid detector settings: {exc}") from exc


def build_edge_config(args, config: dict) -> EdgeConfig:
    vals = _merged(args, EDGE_FLAGS, config)
    try:
        return EdgeConfig(**vals)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid edge settings: {exc}") from exc


def _seed(args, config):
    seed = args.seed if args.seed is not None else config.get("seed")
    return None if seed is None else int(seed)


def _is_edge_map(path: str) -> bool:
    if path.lower().endswith(".pbm"):
        return True
    try:
        with open(path, "rb") as fh:
            return fh.read(2) in (b"P4", b"P1")
    except OSError:
        return False


def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_edges(args) -> int:
    config = _read_config(args.config, EDGE_FLAGS)
    cfg = build_edge_config(args, config)
    img = load_gray_image(args.input)
    edges = detect_edges(img, cfg)
    side = save_edge_map(args.output, edges)
    print(f"{edges.count} edge pixels -> {args.output} ({os.path.basename(side)})")
    return EXIT_OK


def cmd_detect(args) -> int:
    config = _read_config(args.config, [*DETECTOR_FLAGS, *EDGE_FLAGS, "seed"])
    cfg = build_detector_config(args, config)
    seed = _seed(args, config)
    if _is_edge_map(args.input):
        source = load_edge_map(args.input)
    else:
        source = load_gray_image(args.input)
    result = detect(source, cfg, seed)
    _write_text(args.out, result.to_json(include_timing=not args.no_timing) + "\n")
    if args.overlay:
        save_overlay(args.overlay, source, result)
    return EXIT_OK


def cmd_synth(args) -> int:
    keys = {f.name for f in fields(SceneSpec)}
    config = _read_config(args.config, keys)
    try:
        spec = SceneSpec.from_dict(config)
        over = {}
        for name in ("width", "height", "noise", "min_separation", "partial_fraction"):
            if getattr(args, name) is not None:
                over[name] = getattr(args, name)
        if args.circles is not None:
            over["n_circles"] = args.circles
        lo, hi = spec.r_range
        if args.radius_min is not None or args.radius_max is not None:
            over["r_range"] = (args.radius_min if args.radius_min is not None else lo,
                               args.radius_max if args.radius_max is not None else hi)
        if args.outline:
            over["filled"] = False
        seed = _seed(args, config)
        if seed is not None:
            over["seed"] = seed
        spec = replace(spec, **over)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid scene settings: {exc}") from exc
    scene = generate_scene(spec)
    save_gray_image(args.output, scene.image)
    truth = args.truth or os.path.splitext(args.output)[0] + ".json"
    with open(truth, "w") as fh:
        json.dump(scene.truth_dict(), fh, indent=2)
        fh.write("\n")
    print(f"{scene.n_circles} circles -> {args.output}, truth -> {truth}")
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        name, entries, settings = load_suite(args.suite)
    except FileNotFoundError as exc:
        raise CliError(f"cannot read suite {args.suite}: {exc.strerror}") from exc
    except (ValueError, TypeError, KeyError) as exc:
        raise CliError(f"malformed suite {args.suite}: {exc}") from exc
    trials = args.trials if args.trials is not None else settings.get("trials", 35)
    base_seed = args.base_seed if args.base_seed is not None else settings.get("base_seed", 0)
    metric = settings.get("metric", MetricConfig())
    try:
        metric = replace(metric, **_merged(args, METRIC_FLAGS, {}))
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if trials < 1:
        raise CliError("--trials must be >= 1")
    report = run_benchmark(entries, trials, base_seed, metric, workers=args.workers, name=name)
    timing = not args.no_timing
    if args.out:
        _write_text(args.out, report.to_json(timing) + "\n")
    table = report.to_table(timing)
    if args.table:
        _write_text(args.table, table)
    sys.stdout.write(table)
    failed = []
    for row in report.rows:
        if args.assert_sr is not None and row.sr < args.assert_sr:
            failed.append(f"{row.name}: SR {row.sr:.2f} < {args.assert_sr}")
        if args.assert_me is not None and row.me_mean > args.assert_me:
            failed.append(f"{row.name}: ME {row.me_mean:.3f} > {args.assert_me}")
    if failed:
        for line in failed:
            print(f"assertion failed: {line}", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lacircle", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("edges", help="write the Canny edge map of an image as PBM + JSON")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--config")
    _add_flags(p, EDGE_FLAGS)
    p.set_defaults(func=cmd_edges)

    p = sub.add_parser("detect", help="detect circles in an image or PBM edge map")
    p.add_argument("input")
    p.add_argument("--out", help="JSON result path (default stdout)")
    p.add_argument("--overlay", help="write the image with detected circles (.png or .ppm)")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON file with flat keys named like the flags")
    p.add_argument("--no-timing", action="store_true", help="omit elapsed time from the JSON")
    _add_flags(p, DETECTOR_FLAGS)
    _add_flags(p, EDGE_FLAGS)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("synth", help="render a synthetic scene and its ground truth")
    p.add_argument("output", help="image path (.pgm or .png)")
    p.add_argument("--truth", help="ground-truth JSON path (default: next to the image)")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--circles", type=int, help="number of circles")
    p.add_argument("--radius-min", type=float)
    p.add_argument("--radius-max", type=float)
    p.add_argument("--min-separation", type=float)
    p.add_argument("--partial-fraction", type=float)
    p.add_argument("--outline", action="store_true", help="draw rings instead of disks")
    p.add_argument("--noise", type=float, help="salt & pepper level in [0, 1]")
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="run a benchmark suite")
    p.add_argument("suite", help="suite JSON file or bundled name "
                                 "(single_circle, three_scenes, noise_ladder)")
    p.add_argument("--trials", type=int)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--table", help="plain-text table path (always printed to stdout)")
    p.add_argument("--assert-sr", type=float, help="exit 3 if any row's SR%% is below this")
    p.add_argument("--assert-me", type=float, help="exit 3 if any row's mean ME exceeds this")
    p.add_argument("--workers", type=int, help="run trials in this many processes")
    p.add_argument("--no-timing", action="store_true")
    _add_flags(p, METRIC_FLAGS)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except (TooFewEdgePoints, NoFeasibleActions) as exc:
        print(f"no detection: {exc}", file=sys.stderr)
        return EXIT_NO_DETECTION
    except (CircleDetectionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
