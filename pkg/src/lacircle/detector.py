"""End-to-end multi-circle detection.

After learning, the probability vector is scanned in descending order. The
top action becomes the first circle; further actions are accepted when they
differ from every circle accepted so far by more than the distinctiveness
threshold, until probabilities fall below ``Pr_high / pr_divisor``.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import imfile
from .automaton import (
    ActionSet,
    BetaCache,
    LearningConfig,
    ProbabilityVector,
    build_action_set,
    run_learning,
)
from .edges import EdgeConfig, EdgeMap, GrayImage, detect_edges, sample_edge_points
from .geometry import distinctiveness, distinctiveness_threshold, rasterize_circle
from .errors import EmptyPerimeter


@dataclass(frozen=True)
class DetectorConfig:
    """Every knob of the pipeline. Defaults are the reference parameter set."""

    fraction: float = 0.05
    r_min: float = 40.0
    r_max: float = 150.0
    sensitivity: float = 2.0
    theta: float = 0.001
    k_max: int | None = None
    k_cap: int = 5000
    p_stop: float = 0.2
    pr_divisor: float = 10.0
    action_cap: int = 1000
    max_clip_fraction: float = 0.5
    beta_accept: float = 0.0
    beta_min_solution: float | None = None
    edge: EdgeConfig = field(default_factory=EdgeConfig)

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ValueError(f"fraction must be in (0, 1], got {self.fraction}")
        if not 1 <= self.r_min < self.r_max:
            raise ValueError(f"need 1 <= r_min < r_max, got [{self.r_min}, {self.r_max}]")
        if not self.sensitivity > 0:
            raise ValueError("sensitivity must be positive")
        if not self.pr_divisor > 1:
            raise ValueError("pr_divisor must exceed 1")
        if self.action_cap < 1:
            raise ValueError("action_cap must be >= 1")
        if not 0 <= self.max_clip_fraction <= 1:
            raise ValueError("max_clip_fraction must be in [0, 1]")
        if not 0 <= self.beta_accept <= 1:
            raise ValueError("beta_accept must be in [0, 1]")
        # delegates theta / p_stop / k checks
        self.learning(None)

    @property
    def es_threshold(self) -> float:
        return distinctiveness_threshold(self.r_min, self.r_max, self.sensitivity)

    def learning(self, seed) -> LearningConfig:
        return LearningConfig(theta=self.theta, k_max=self.k_max, k_cap=self.k_cap,
                              p_stop=self.p_stop, beta_min_solution=self.beta_min_solution,
                              seed=seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        edge = d.pop("edge")
        d.update(edge)
        return d

    @classmethod
    def from_dict(cls, d: dict, base: "DetectorConfig | None" = None) -> "DetectorConfig":
        """Build from flat keys; hyphens and underscores are interchangeable."""
        base = base or cls()
        norm = {k.replace("-", "_"): v for k, v in d.items()}
        own = {f.name for f in fields(cls)} - {"edge"}
        edge_keys = {f.name for f in fields(EdgeConfig)}
        unknown = set(norm) - own - edge_keys
        if unknown:
            raise ValueError(f"unknown detector option(s): {', '.join(sorted(unknown))}")
        edge = replace(base.edge, **{k: float(v) for k, v in norm.items() if k in edge_keys})
        kw = {k: v for k, v in norm.items() if k in own}
        return replace(base, edge=edge, **kw)


@dataclass(frozen=True)
class DetectedCircle:
    x0: float
    y0: float
    r: float
    probability: float
    beta: float
    rank: int

    @property
    def params(self) -> tuple[float, float, float]:
        return (self.x0, self.y0, self.r)


@dataclass(frozen=True)
class DetectionResult:
    circles: tuple[DetectedCircle, ...]
    n_actions: int
    iterations: int
    seed: int | None
    elapsed: float = 0.0
    pr_high: float | None = None  # top action probability, the extraction reference

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "circles": [asdict(c) for c in self.circles],
            "n_actions": self.n_actions,
            "iterations": self.iterations,
            "seed": self.seed,
            "pr_high": self.pr_high,
        }
        if include_timing:
            d["elapsed_s"] = self.elapsed
        return d

    def to_json(self, include_timing: bool = True, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(include_timing), indent=indent)

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionResult":
        circles = tuple(DetectedCircle(**c) for c in d["circles"])
        return cls(circles, d["n_actions"], d["iterations"], d.get("seed"),
                   d.get("elapsed_s", 0.0), d.get("pr_high"))


def extract_circles(
    actions: ActionSet,
    pv: ProbabilityVector,
    betas: BetaCache,
    es_th: float,
    pr_divisor: float = 10.0,
    beta_accept: float = 0.0,
) -> list[DetectedCircle]:
    """Mine the learned distribution for mutually distinct circles.

    A candidate must differ from *every* circle accepted so far by more than
    ``es_th``. Candidates with reinforcement below ``beta_accept`` are skipped
    without blocking later ones.
    """
    if len(pv) == 0:
        raise ValueError("empty probability vector")
    if not es_th > 0:
        raise ValueError("es_th must be positive")
    p = pv.p
    order = np.lexsort((np.arange(len(p)), -p))  # descending p, ties by index
    cutoff = p[order[0]] / pr_divisor
    accepted: list[DetectedCircle] = []
    for idx in order:
        prob = float(p[idx])
        if prob < cutoff or prob <= 0:
            break
        cand = actions[idx]
        if any(distinctiveness(cand.params, c.params) <= es_th for c in accepted):
            continue
        beta = betas[idx]
        if beta < beta_accept:
            continue
        accepted.append(DetectedCircle(cand.x0, cand.y0, cand.r, prob, beta, len(accepted) + 1))
    return accepted


def detect(source, cfg: DetectorConfig | None = None, seed: int | None = None) -> DetectionResult:
    """Detect circles in a :class:`GrayImage` (edge detection first) or an :class:`EdgeMap`."""
    cfg = cfg or DetectorConfig()
    start = time.perf_counter()
    if isinstance(source, EdgeMap):
        edges = source
    elif isinstance(source, GrayImage):
        edges = detect_edges(source, cfg.edge)
    else:
        raise TypeError(f"expected GrayImage or EdgeMap, got {type(source).__name__}")
    rng = np.random.default_rng(seed)
    pts = sample_edge_points(edges, cfg.fraction, rng)
    actions = build_action_set(pts, cfg.r_min, cfg.r_max, (edges.width, edges.height),
                               cap=cfg.action_cap, rng=rng,
                               max_clip_fraction=cfg.max_clip_fraction)
    pv, betas = run_learning(actions, edges, cfg.learning(seed), rng=rng)
    circles = extract_circles(actions, pv, betas, cfg.es_threshold, cfg.pr_divisor,
                              cfg.beta_accept)
    elapsed = time.perf_counter() - start
    return DetectionResult(tuple(circles), len(actions), pv.iteration, seed, elapsed,
                           float(pv.p.max()))


def render_overlay(background, result: DetectionResult, color=(255, 0, 0)) -> np.ndarray:
    """RGB copy of an image (or edge map) with detected perimeters drawn on top."""
    if isinstance(background, EdgeMap):
        gray = np.where(background.bits, 255, 0).astype(np.uint8)
    elif isinstance(background, GrayImage):
        gray = background.data
    else:
        gray = np.asarray(background, dtype=np.uint8)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    h, w = gray.shape
    for c in result.circles:
        if round(c.r) < 1:
            continue
        try:
            per = rasterize_circle(c.params, w, h)
        except EmptyPerimeter:
            continue
        rgb[per.points[:, 1], per.points[:, 0]] = color
    return rgb


def save_overlay(path, background, result: DetectionResult, color=(255, 0, 0)) -> None:
    """Write the overlay as PNG (``.png`` suffix) or binary PPM."""
    imfile.write_rgb(path, render_overlay(background, result, color))
