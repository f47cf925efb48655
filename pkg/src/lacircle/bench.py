"""Synthetic scenes with known circles, accuracy metrics and repeatable benchmark runs."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources

import numpy as np

from .detector import DetectionResult, DetectorConfig, detect
from .edges import GrayImage, load_gray_image
from .errors import CircleDetectionError, PlacementFailure


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for a synthetic image.

    Circles are either listed explicitly in ``circles`` as ``(x, y, r)`` or placed
    at random: ``n_circles`` radii drawn uniformly from ``r_range``, centres
    uniform subject to ``min_separation`` between centres and, unless
    ``allow_overlap``, no two shapes touching. A ``partial_fraction`` share of
    the random circles is deliberately cut by the image border.
    """

    width: int = 256
    height: int = 256
    n_circles: int = 1
    r_range: tuple[float, float] = (20.0, 80.0)
    partial_fraction: float = 0.0
    min_separation: float = 0.0
    allow_overlap: bool = False
    filled: bool = True
    thickness: float = 2.0
    background: int = 255
    foreground: int = 0
    noise: float = 0.0
    circles: tuple[tuple[float, float, float], ...] | None = None
    seed: int = 0
    max_tries: int = 200

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        norm = {k.replace("-", "_"): v for k, v in d.items()}
        known = {f.name for f in fields(cls)}
        unknown = set(norm) - known
        if unknown:
            raise ValueError(f"unknown scene option(s): {', '.join(sorted(unknown))}")
        if "r_range" in norm:
            norm["r_range"] = tuple(float(v) for v in norm["r_range"])
        if norm.get("circles") is not None:
            norm["circles"] = tuple(_triple(c) for c in norm["circles"])
        return cls(**norm)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["r_range"] = list(self.r_range)
        if self.circles is not None:
            d["circles"] = [list(c) for c in self.circles]
        return d


def _triple(c) -> tuple[float, float, float]:
    if isinstance(c, dict):
        return (float(c["x"]), float(c["y"]), float(c["r"]))
    x, y, r = c
    return (float(x), float(y), float(r))


@dataclass(frozen=True, eq=False)
class GroundTruthScene:
    image: GrayImage
    circles: tuple[tuple[float, float, float], ...]
    noise_level: float = 0.0
    seed: int | None = None
    partial: tuple[bool, ...] = ()

    @property
    def n_circles(self) -> int:
        return len(self.circles)

    def truth_dict(self) -> dict:
        partial = self.partial or (False,) * len(self.circles)
        return {
            "width": self.image.width,
            "height": self.image.height,
            "circles": [{"x": x, "y": y, "r": r, "partial": bool(p)}
                        for (x, y, r), p in zip(self.circles, partial)],
            "noise": self.noise_level,
            "seed": self.seed,
        }


def load_truth(path) -> tuple[tuple[float, float, float], ...]:
    with open(path) as fh:
        data = json.load(fh)
    return tuple(_triple(c) for c in data["circles"])


def _fits(x, y, r, w, h, partial) -> bool:
    inside = x - r >= 1 and y - r >= 1 and x + r <= w - 2 and y + r <= h - 2
    if not partial:
        return inside
    # cut by the border but keep most of the perimeter visible
    margin = 0.3 * r
    return (not inside) and margin <= x <= w - 1 - margin and margin <= y <= h - 1 - margin


def _place(spec: SceneSpec, rng: np.random.Generator):
    lo, hi = spec.r_range
    n_partial = int(round(spec.partial_fraction * spec.n_circles))
    flags = [i < n_partial for i in range(spec.n_circles)]
    for _ in range(spec.max_tries):
        placed: list[tuple[float, float, float]] = []
        for partial in flags:
            for _ in range(spec.max_tries):
                r = float(rng.uniform(lo, hi))
                x = float(rng.uniform(0, spec.width - 1))
                y = float(rng.uniform(0, spec.height - 1))
                if not _fits(x, y, r, spec.width, spec.height, partial):
                    continue
                ok = True
                for (px, py, pr) in placed:
                    d = math.hypot(x - px, y - py)
                    if d < spec.min_separation or (not spec.allow_overlap and d < r + pr + 4):
                        ok = False
                        break
                if ok:
                    placed.append((x, y, r))
                    break
            else:
                break
        if len(placed) == spec.n_circles:
            return tuple(placed), tuple(flags)
    raise PlacementFailure(
        f"could not place {spec.n_circles} circles in {spec.width}x{spec.height} "
        f"with radii {spec.r_range} and separation {spec.min_separation}"
    )


def draw_circles(width, height, circles, filled=True, thickness=2.0,
                 background=255, foreground=0) -> np.ndarray:
    img = np.full((height, width), background, dtype=np.uint8)
    yy, xx = np.mgrid[0:height, 0:width]
    for x0, y0, r in circles:
        d2 = (xx - x0) ** 2 + (yy - y0) ** 2
        if filled:
            mask = d2 <= r * r
        else:
            mask = np.abs(np.sqrt(d2) - r) <= thickness / 2
        img[mask] = foreground
    return img


def generate_scene(spec: SceneSpec, rng=None) -> GroundTruthScene:
    """Render a scene; ``rng`` defaults to a Generator seeded with ``spec.seed``.

    Placement draws come first, then the noise mask, all from the same generator.
    """
    if spec.n_circles < 1 and not spec.circles:
        raise ValueError("a scene needs at least one circle")
    if not 0 <= spec.noise <= 1:
        raise ValueError("noise must be in [0, 1]")
    seed = spec.seed
    if rng is None:
        rng = np.random.default_rng(seed)
    elif not isinstance(rng, np.random.Generator):
        seed = int(rng)
        rng = np.random.default_rng(seed)
    if spec.circles:
        circles = tuple(spec.circles)
        partial = tuple(not _fits(x, y, r, spec.width, spec.height, False) for x, y, r in circles)
    else:
        lo, hi = spec.r_range
        if not 0 < lo <= hi or 2 * lo > min(spec.width, spec.height) - 3:
            raise ValueError(f"radius range {spec.r_range} does not fit {spec.width}x{spec.height}")
        circles, partial = _place(spec, rng)
    img = GrayImage(draw_circles(spec.width, spec.height, circles, spec.filled, spec.thickness,
                                 spec.background, spec.foreground))
    if spec.noise > 0:
        img = add_salt_pepper(img, spec.noise, rng)
    return GroundTruthScene(img, circles, spec.noise, seed, partial)


def add_salt_pepper(img: GrayImage, level: float, rng) -> GrayImage:
    """Replace each pixel, with probability ``level``, by 0 or 255 (even odds).

    The corrupted positions depend only on the generator state, not on the image.
    """
    if not 0 <= level <= 1:
        raise ValueError(f"noise level must be in [0, 1], got {level}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    shape = img.data.shape
    hit = rng.random(shape) < level
    salt = rng.random(shape) < 0.5
    out = img.data.copy()
    out[hit] = np.where(salt[hit], 255, 0)
    return GrayImage(out)


@dataclass(frozen=True)
class MetricConfig:
    """Weights of the error score; ``es_fail`` is charged per missed true circle."""

    eta: float = 0.05
    mu: float = 0.1
    es_fail: float = 2.0

    def __post_init__(self):
        if not (self.eta > 0 and self.mu > 0):
            raise ValueError("eta and mu must be positive")


def error_score(detected, truth, m: MetricConfig | None = None) -> float:
    m = m or MetricConfig()
    xd, yd, rd = detected
    xt, yt, rt = truth
    return m.eta * (abs(xt - xd) + abs(yt - yd)) + m.mu * abs(rt - rd)


def match_circles(detected, truths, m: MetricConfig | None = None):
    """Greedy one-to-one assignment, globally smallest error score first.

    Returns ``(pairs, unmatched_truths, unmatched_detections)`` where ``pairs``
    holds ``(truth_index, detection_index, es)`` in the order they were taken.
    Ties go to the lower truth index, then the lower detection index.
    """
    m = m or MetricConfig()
    cand = sorted(
        (error_score(d, t, m), ti, di)
        for ti, t in enumerate(truths)
        for di, d in enumerate(detected)
    )
    used_t: set = set()
    used_d: set = set()
    pairs = []
    for es, ti, di in cand:
        if ti in used_t or di in used_d:
            continue
        used_t.add(ti)
        used_d.add(di)
        pairs.append((ti, di, es))
    free_t = [i for i in range(len(truths)) if i not in used_t]
    free_d = [i for i in range(len(detected)) if i not in used_d]
    return pairs, free_t, free_d


def _params(detected):
    if isinstance(detected, DetectionResult):
        return [c.params for c in detected.circles]
    return [tuple(d) for d in detected]


def multiple_error(result, scene, m: MetricConfig | None = None) -> float:
    """Mean error score over the true circles; misses cost ``m.es_fail``.

    ``result`` is a :class:`DetectionResult` or a list of ``(x, y, r)``; ``scene``
    a :class:`GroundTruthScene` or a list of true ``(x, y, r)``. Surplus
    detections do not enter the score.
    """
    m = m or MetricConfig()
    truths = scene.circles if isinstance(scene, GroundTruthScene) else list(scene)
    if len(truths) < 1:
        raise ValueError("need at least one true circle")
    pairs, free_t, _ = match_circles(_params(result), truths, m)
    total = sum(es for _, _, es in pairs) + m.es_fail * len(free_t)
    return total / len(truths)


def success_rate(me_values) -> float:
    """Percentage of trials with ME below 1, rounded to two decimals."""
    me = list(me_values)
    if not me:
        raise ValueError("need at least one trial")
    return round(100.0 * sum(1 for v in me if v < 1) / len(me), 2)


@dataclass(frozen=True)
class BenchEntry:
    name: str
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    scene: SceneSpec | None = None
    image: str | None = None
    truth: str | None = None

    def load(self) -> tuple[GrayImage, tuple]:
        if self.scene is not None:
            s = generate_scene(self.scene)
            return s.image, s.circles
        if self.image is None or self.truth is None:
            raise ValueError(f"entry {self.name!r} needs a scene or an image plus truth file")
        return load_gray_image(self.image), load_truth(self.truth)

    @property
    def noise(self) -> float | None:
        return self.scene.noise if self.scene is not None else None


@dataclass(frozen=True)
class TrialResult:
    seed: int
    me: float
    n_detected: int
    false_positives: int
    elapsed: float
    error: str | None = None
    result: DetectionResult | None = None


@dataclass
class RowReport:
    name: str
    n_circles: int
    noise: float | None
    trials: list[TrialResult]

    @property
    def me_values(self) -> list[float]:
        return [t.me for t in self.trials]

    @property
    def me_mean(self) -> float:
        return float(np.mean(self.me_values))

    @property
    def me_std(self) -> float:
        return float(np.std(self.me_values))

    @property
    def sr(self) -> float:
        return success_rate(self.me_values)

    @property
    def time_mean(self) -> float:
        return float(np.mean([t.elapsed for t in self.trials]))

    @property
    def time_std(self) -> float:
        return float(np.std([t.elapsed for t in self.trials]))

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "name": self.name,
            "n_circles": self.n_circles,
            "noise": self.noise,
            "trials": len(self.trials),
            "seeds": [t.seed for t in self.trials],
            "sr": self.sr,
            "me_mean": self.me_mean,
            "me_std": self.me_std,
            "me_values": self.me_values,
            "false_positives": [t.false_positives for t in self.trials],
            "errors": [t.error for t in self.trials],
        }
        if include_timing:
            d["time_mean_s"] = self.time_mean
            d["time_std_s"] = self.time_std
        return d


@dataclass
class BenchReport:
    rows: list[RowReport]
    trials: int
    base_seed: int
    suite: str = ""

    @property
    def seeds(self) -> list[int]:
        return list(range(self.base_seed, self.base_seed + self.trials))

    def row(self, name: str) -> RowReport:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self, include_timing: bool = True) -> dict:
        return {
            "suite": self.suite,
            "trials": self.trials,
            "base_seed": self.base_seed,
            "rows": [r.to_dict(include_timing) for r in self.rows],
        }

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2)

    def to_table(self, include_timing: bool = True) -> str:
        head = f"{'input':<24}{'SR%':>8}   {'ME mean ± std':<18}"
        if include_timing:
            head += "time (s) mean ± std"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            line = f"{r.name:<24}{r.sr:>8.2f}   " + f"{r.me_mean:.3f} ± {r.me_std:.3f}".ljust(18)
            if include_timing:
                line += f"{r.time_mean:.3f} ± {r.time_std:.3f}"
            lines.append(line.rstrip())
        return "\n".join(lines) + "\n"


def run_trial(image: GrayImage, truths, cfg: DetectorConfig, seed: int,
              metric: MetricConfig | None = None, keep_result: bool = False) -> TrialResult:
    metric = metric or MetricConfig()
    try:
        res = detect(image, cfg, seed)
    except CircleDetectionError as exc:
        return TrialResult(seed, metric.es_fail, 0, 0, 0.0, f"{type(exc).__name__}: {exc}")
    me = multiple_error(res, truths, metric)
    pairs, _, free_d = match_circles(_params(res), truths, metric)
    return TrialResult(seed, me, len(res.circles), len(free_d), res.elapsed, None,
                       res if keep_result else None)


def run_benchmark(suite, trials: int, base_seed: int = 0, metric: MetricConfig | None = None,
                  workers: int | None = None, keep_results: bool = False,
                  name: str = "") -> BenchReport:
    """Run every entry of ``suite`` with detection seeds ``base_seed .. base_seed+trials-1``.

    Each entry's image is built once; only the detection seed varies. With
    ``workers > 1`` trials run in a process pool; results are ordered by seed so
    the report does not depend on scheduling.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    metric = metric or MetricConfig()
    seeds = list(range(base_seed, base_seed + trials))
    rows = []
    pool = ProcessPoolExecutor(workers) if workers and workers > 1 else None
    try:
        for entry in suite:
            image, truths = entry.load()
            args = [(image, truths, entry.detector, s, metric, keep_results) for s in seeds]
            if pool is None:
                results = [run_trial(*a) for a in args]
            else:
                results = list(pool.map(run_trial, *zip(*args)))
            results.sort(key=lambda t: t.seed)
            rows.append(RowReport(entry.name, len(truths), entry.noise, results))
    finally:
        if pool is not None:
            pool.shutdown()
    return BenchReport(rows, trials, base_seed, name)


BUNDLED_SUITES = ("single_circle", "three_scenes", "noise_ladder")


def load_suite(path_or_name) -> tuple[str, list[BenchEntry], dict]:
    """Parse a suite file (or the name of a bundled suite).

    Returns ``(name, entries, settings)``; ``settings`` carries optional suite
    level ``trials``, ``base_seed`` and ``metric``.
    """
    p = os.fspath(path_or_name)
    base_dir = os.path.dirname(os.path.abspath(p))
    if p in BUNDLED_SUITES and not os.path.exists(p):
        text = resources.files("lacircle.suites").joinpath(p + ".json").read_text()
        base_dir = ""
    else:
        with open(p) as fh:
            text = fh.read()
    data = json.loads(text)
    if not isinstance(data, dict) or not isinstance(data.get("entries"), list):
        raise ValueError("suite must be a JSON object with an 'entries' list")
    name = data.get("name", os.path.splitext(os.path.basename(p))[0])
    base_cfg = DetectorConfig.from_dict(data.get("detector", {}))
    scene_defaults = data.get("scene", {})
    entries = []
    for i, e in enumerate(data["entries"]):
        cfg = DetectorConfig.from_dict(e.get("detector", {}), base_cfg)
        scene = None
        if "scene" in e:
            scene = SceneSpec.from_dict({**scene_defaults, **e["scene"]})
        image = truth = None
        if "image" in e:
            image = os.path.join(base_dir, e["image"])
            truth = os.path.join(base_dir, e["truth"]) if "truth" in e else None
        entries.append(BenchEntry(e.get("name", f"entry{i}"), cfg, scene, image, truth))
    settings = {k: data[k] for k in ("trials", "base_seed") if k in data}
    if "metric" in data:
        settings["metric"] = MetricConfig(**data["metric"])
    return name, entries, settings
