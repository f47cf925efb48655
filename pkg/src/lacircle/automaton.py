"""Learning automaton over candidate circles (linear reward/inaction scheme).

Every action is one candidate circle built from three sampled edge points.
Its reinforcement is the fraction of the circle's rasterized perimeter that
lands on edge pixels. Random draws come from one ``numpy`` Generator in this
order: edge-point sampling, triplet sampling (only when the triplet count
exceeds the action cap), then one uniform draw per learning iteration.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .edges import EdgeMap, SampledPoints
from .errors import NoFeasibleActions
from .geometry import (
    CandidateCircle,
    circle_offsets,
    circles_from_triplets,
    rasterize_circle,
    round_half_away,
)

SUM_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class ActionSet:
    actions: tuple[CandidateCircle, ...]
    width: int
    height: int
    r_min: float
    r_max: float
    n_all: int = 0  # triplets examined before filtering

    def __post_init__(self):
        if len(self.actions) < 1:
            raise ValueError("an action set needs at least one action")
        params = np.array([a.params for a in self.actions], dtype=np.float64)
        params.setflags(write=False)
        object.__setattr__(self, "params", params)

    def __len__(self) -> int:
        return len(self.actions)

    def __getitem__(self, i) -> CandidateCircle:
        return self.actions[i]


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    p: np.ndarray
    iteration: int = 0
    stop_reason: str = ""

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, n: int) -> "ProbabilityVector":
        return cls(np.full(n, 1.0 / n))

    def __len__(self) -> int:
        return len(self.p)


@dataclass(frozen=True)
class LearningConfig:
    """Learning-loop settings.

    ``k_max=None`` means half the number of actions; the loop additionally never
    runs more than ``k_cap`` iterations. ``beta_min_solution`` (off by default)
    ends learning as soon as an evaluated action reaches that reinforcement.
    """

    theta: float = 0.001
    k_max: int | None = None
    k_cap: int = 5000
    p_stop: float = 0.2
    beta_min_solution: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValueError(f"theta must be in (0, 1), got {self.theta}")
        if not 0 < self.p_stop <= 1:
            raise ValueError(f"p_stop must be in (0, 1], got {self.p_stop}")
        if self.k_cap < 0 or (self.k_max is not None and self.k_max < 0):
            raise ValueError("iteration limits must be non-negative")

    def iteration_budget(self, n_actions: int) -> int:
        k = math.ceil(n_actions / 2) if self.k_max is None else self.k_max
        return min(k, self.k_cap)


def _accept_candidates(points, tri, r_min, r_max, width, height, max_clip_fraction, seen):
    """Filter a batch of triplets; returns the surviving CandidateCircles in batch order."""
    x0, y0, r, ok = circles_from_triplets(points, tri)
    ok &= (r >= r_min) & (r <= r_max)
    out = []
    for t in np.flatnonzero(ok):
        key = (round_half_away(x0[t]), round_half_away(y0[t]), round_half_away(r[t]))
        if key in seen:
            continue
        cx, cy, rr = key
        if cx - rr < 0 or cy - rr < 0 or cx + rr >= width or cy + rr >= height:
            offs = circle_offsets(rr) + (cx, cy)
            outside = ((offs[:, 0] < 0) | (offs[:, 0] >= width)
                       | (offs[:, 1] < 0) | (offs[:, 1] >= height))
            if outside.mean() > max_clip_fraction:
                continue
        seen.add(key)
        i, j, k = (int(v) for v in tri[t])
        a, b, c = points[i], points[j], points[k]
        d = sorted(float(np.hypot(x0[t] - p[0], y0[t] - p[1])) for p in (a, b, c))
        spread = max(abs(di - r[t]) for di in d)
        out.append(CandidateCircle(i, j, k, float(x0[t]), float(y0[t]), float(r[t]), float(spread)))
    return out


def build_action_set(
    pts: SampledPoints,
    r_min: float,
    r_max: float,
    bounds: tuple[int, int],
    cap: int = 1000,
    rng=None,
    max_clip_fraction: float = 0.5,
) -> ActionSet:
    """Turn triplets of sampled points into a deduplicated set of candidate circles.

    All ``C(N_p, 3)`` triplets are enumerated when that is at most ``cap``;
    otherwise distinct triplets are drawn uniformly without replacement until
    ``cap`` candidates survive or the triplet budget is exhausted. Triplets are
    dropped when collinear, when the radius is outside ``[r_min, r_max]``, when
    more than ``max_clip_fraction`` of the perimeter leaves the image, or when
    the rounded ``(x0, y0, r)`` repeats an earlier candidate.
    """
    if pts.count < 3:
        raise NoFeasibleActions(f"need at least 3 points, got {pts.count}")
    if r_min < 1 or not r_max > r_min:
        raise ValueError(f"invalid radius range [{r_min}, {r_max}]")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    width, height = bounds
    points = pts.points
    n = pts.count
    total = math.comb(n, 3)
    seen: set = set()
    accepted: list[CandidateCircle] = []

    if total <= cap:
        tri = np.array(list(combinations(range(n), 3)), dtype=np.int64)
        accepted = _accept_candidates(points, tri, r_min, r_max, width, height,
                                      max_clip_fraction, seen)
        examined = total
    else:
        if rng is None or not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        drawn: set = set()
        budget = min(total, 50 * cap)
        batch = max(64, cap)
        examined = 0
        while len(accepted) < cap and examined < budget:
            raw = rng.integers(0, n, size=(batch, 3))
            raw.sort(axis=1)
            fresh = []
            for row in raw:
                if row[0] == row[1] or row[1] == row[2]:
                    continue
                key = (int(row[0]), int(row[1]), int(row[2]))
                if key in drawn:
                    continue
                drawn.add(key)
                fresh.append(key)
                if examined + len(fresh) >= budget:
                    break
            examined += len(fresh)
            if not fresh:
                continue
            accepted.extend(_accept_candidates(points, np.array(fresh), r_min, r_max,
                                               width, height, max_clip_fraction, seen))
    if not accepted:
        raise NoFeasibleActions(
            f"all {examined} triplets rejected (radius range [{r_min}, {r_max}])"
        )
    return ActionSet(tuple(accepted[:cap]), width, height, float(r_min), float(r_max), examined)


def reinforcement(c, edges: EdgeMap) -> float:
    """Share of the in-bounds perimeter pixels of ``c`` that are edge pixels."""
    per = rasterize_circle(c, edges.width, edges.height)
    xs, ys = per.points[:, 0], per.points[:, 1]
    return float(np.count_nonzero(edges.bits[ys, xs])) / per.count


class BetaCache:
    """Memoised reinforcement values for every action of an :class:`ActionSet`."""

    def __init__(self, actions: ActionSet, edges: EdgeMap):
        self.actions = actions
        self.edges = edges
        self._values = np.full(len(actions), np.nan)

    def __getitem__(self, i: int) -> float:
        v = self._values[i]
        if np.isnan(v):
            v = self._values[i] = reinforcement(self.actions[i], self.edges)
        return float(v)

    def __len__(self) -> int:
        return len(self._values)

    def __contains__(self, i: int) -> bool:
        return not np.isnan(self._values[i])

    @property
    def evaluated(self) -> int:
        return int(np.count_nonzero(~np.isnan(self._values)))

    def values(self) -> np.ndarray:
        """Copy of the cache; NaN for actions never evaluated."""
        return self._values.copy()

    def precompute(self, workers: int | None = None) -> None:
        todo = np.flatnonzero(np.isnan(self._values))
        if workers and workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                vals = list(pool.map(lambda i: reinforcement(self.actions[i], self.edges), todo))
            self._values[todo] = vals
        else:
            for i in todo:
                self[i]


def lri_step(p, selected, beta, theta):
    """Reward/inaction update on raw arrays.

    ``p`` may be a single distribution ``(n,)`` or a batch ``(m, n)`` with
    matching ``selected`` and ``beta`` arrays of shape ``(m,)``.
    """
    p = np.asarray(p, dtype=np.float64)
    gain = theta * np.asarray(beta, dtype=np.float64)
    if p.ndim == 1:
        out = p * (1.0 - gain)
        out[selected] += gain
    else:
        out = p * (1.0 - gain)[:, None]
        out[np.arange(len(p)), selected] += gain
    np.clip(out, 0.0, 1.0, out=out)
    total = out.sum(axis=-1, keepdims=True)
    drift = np.abs(total - 1.0) > SUM_TOLERANCE
    if np.any(drift):
        out = np.where(drift, out / total, out)
    return out


def lri_update(pv: ProbabilityVector, selected: int, beta: float, theta: float) -> ProbabilityVector:
    """Reward the selected action in proportion to ``beta``; zero reward is a no-op."""
    if not 0 <= beta <= 1:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    if not 0 < theta < 1:
        raise ValueError(f"theta must be in (0, 1), got {theta}")
    if not 0 <= selected < len(pv):
        raise IndexError(f"action {selected} out of range for {len(pv)} actions")
    return ProbabilityVector(lri_step(pv.p, selected, beta, theta), pv.iteration + 1)


def _select(p: np.ndarray, z: float) -> int:
    cum = np.cumsum(p)
    v = int(np.searchsorted(cum, z, side="right"))
    if v >= len(p):
        # z fell beyond a sum that drifted just below 1
        v = int(np.flatnonzero(p > 0)[-1])
    return v


def select_action(pv: ProbabilityVector, z: float) -> int:
    """Roulette selection: first index whose cumulative probability exceeds ``z``."""
    if not 0 <= z < 1:
        raise ValueError(f"z must be in [0, 1), got {z}")
    return _select(pv.p, z)


def run_learning(actions: ActionSet, edges: EdgeMap, cfg: LearningConfig | None = None,
                 rng=None) -> tuple[ProbabilityVector, BetaCache]:
    """Run the automaton until the iteration budget, ``p_stop`` or a solution is hit.

    ``rng`` defaults to a Generator seeded with ``cfg.seed``.
    """
    cfg = cfg or LearningConfig()
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    n = len(actions)
    betas = BetaCache(actions, edges)
    p = np.full(n, 1.0 / n)
    budget = cfg.iteration_budget(n)
    k = 0
    reason = "k_max"
    while True:
        if p.max() >= cfg.p_stop:
            reason = "p_stop"
            break
        if k >= budget:
            break
        v = _select(p, rng.random())
        beta = betas[v]
        p = lri_step(p, v, beta, cfg.theta)
        k += 1
        if cfg.beta_min_solution is not None and beta >= cfg.beta_min_solution:
            reason = "solution"
            break
    return ProbabilityVector(p, k, reason), betas
