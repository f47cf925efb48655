"""Circle-through-three-points, midpoint circle rasterization, circle distances."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CollinearPoints, EmptyPerimeter


@dataclass(frozen=True)
class CandidateCircle:
    """A circle hypothesis generated by the sampled points ``i, j, k``.

    ``r`` is the mean distance from the centre to the three points and
    ``r_spread`` the largest deviation of an individual distance from it.
    """

    i: int
    j: int
    k: int
    x0: float
    y0: float
    r: float
    r_spread: float = 0.0

    @property
    def params(self) -> tuple[float, float, float]:
        return (self.x0, self.y0, self.r)


@dataclass(frozen=True, eq=False)
class PerimeterSet:
    points: np.ndarray  # (N_s, 2) int64 (x, y), ordered by angle
    clipped: int = 0

    @property
    def count(self) -> int:
        return len(self.points)


def round_half_away(v):
    """Nearest integer, ties away from zero (unlike :func:`round`)."""
    v = np.asarray(v, dtype=np.float64)
    out = np.sign(v) * np.floor(np.abs(v) + 0.5)
    return out.astype(np.int64) if out.ndim else int(out)


def _center(xi, yi, xj, yj, xk, yk):
    """Integer numerators of both centre coordinates and their shared denominator."""
    si = xi * xi + yi * yi
    dj = xj * xj + yj * yj - si
    dk = xk * xk + yk * yk - si
    det_a = dj * 2 * (yk - yi) - dk * 2 * (yj - yi)
    det_b = 2 * (xj - xi) * dk - 2 * (xk - xi) * dj
    den = 4 * ((xj - xi) * (yk - yi) - (xk - xi) * (yj - yi))
    return det_a, det_b, den


def circle_from_triplet(p_i, p_j, p_k, indices=(0, 1, 2)) -> CandidateCircle:
    """Circle through three integer pixels.

    Raises :class:`CollinearPoints` when the (exact, integer) denominator is zero,
    which also covers repeated points.
    """
    (xi, yi), (xj, yj), (xk, yk) = (tuple(int(c) for c in p) for p in (p_i, p_j, p_k))
    det_a, det_b, den = _center(xi, yi, xj, yj, xk, yk)
    if den == 0:
        raise CollinearPoints(f"points {p_i}, {p_j}, {p_k} are collinear")
    x0 = det_a / den
    y0 = det_b / den
    d = sorted(np.hypot(x0 - x, y0 - y) for x, y in ((xi, yi), (xj, yj), (xk, yk)))
    r = (d[0] + d[1] + d[2]) / 3.0
    spread = max(abs(di - r) for di in d)
    i, j, k = indices
    return CandidateCircle(int(i), int(j), int(k), float(x0), float(y0), float(r), float(spread))


def circles_from_triplets(points: np.ndarray, triplets: np.ndarray):
    """Vectorised :func:`circle_from_triplet`.

    ``points`` is ``(N, 2)`` integer, ``triplets`` is ``(M, 3)`` indices. Returns
    ``(x0, y0, r, ok)`` where ``ok`` flags non-collinear triplets; entries with
    ``ok == False`` are NaN.
    """
    pts = np.asarray(points, dtype=np.int64)
    tri = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    a, b, c = pts[tri[:, 0]], pts[tri[:, 1]], pts[tri[:, 2]]
    det_a, det_b, den = _center(a[:, 0], a[:, 1], b[:, 0], b[:, 1], c[:, 0], c[:, 1])
    ok = den != 0
    with np.errstate(divide="ignore", invalid="ignore"):
        x0 = np.where(ok, det_a / np.where(ok, den, 1), np.nan)
        y0 = np.where(ok, det_b / np.where(ok, den, 1), np.nan)
    d = np.stack([np.hypot(x0 - p[:, 0], y0 - p[:, 1]) for p in (a, b, c)], axis=1)
    d.sort(axis=1)
    r = (d[:, 0] + d[:, 1] + d[:, 2]) / 3.0
    return x0, y0, r, ok


def midpoint_octant(radius: int) -> list[tuple[int, int]]:
    """First-octant ``(x, y)`` pixels (``0 <= x <= y``) of the midpoint circle algorithm."""
    x, y, d = 0, radius, 1 - radius
    out = []
    while x <= y:
        out.append((x, y))
        if d < 0:
            d += 2 * x + 3
        else:
            d += 2 * (x - y) + 5
            y -= 1
        x += 1
    return out


@lru_cache(maxsize=4096)
def circle_offsets(radius: int) -> np.ndarray:
    """Unique perimeter offsets of a full circle, sorted by angle."""
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    octant = np.array(midpoint_octant(radius), dtype=np.int64)
    x, y = octant[:, 0], octant[:, 1]
    full = np.concatenate([
        np.stack(p, axis=1)
        for p in ((x, y), (y, x), (-x, y), (-y, x), (x, -y), (y, -x), (-x, -y), (-y, -x))
    ])
    full = np.unique(full, axis=0)
    order = np.argsort(np.arctan2(full[:, 1], full[:, 0]), kind="stable")
    full = full[order]
    full.setflags(write=False)
    return full


def rasterize_circle(c, width: int, height: int) -> PerimeterSet:
    """Midpoint-circle perimeter of ``c`` restricted to ``[0, width) x [0, height)``.

    ``c`` is a :class:`CandidateCircle` or an ``(x0, y0, r)`` triple; centre and
    radius are rounded to the pixel grid first.
    """
    x0, y0, r = c.params if isinstance(c, CandidateCircle) else c
    cx, cy, rr = round_half_away(x0), round_half_away(y0), round_half_away(r)
    if rr < 1:
        raise ValueError(f"radius must round to >= 1, got {r}")
    pts = circle_offsets(rr) + (cx, cy)
    inside = (pts[:, 0] >= 0) & (pts[:, 0] < width) & (pts[:, 1] >= 0) & (pts[:, 1] < height)
    kept = pts[inside]
    if len(kept) == 0:
        raise EmptyPerimeter(f"circle ({x0}, {y0}, {r}) lies outside {width}x{height}")
    return PerimeterSet(kept, clipped=int(len(pts) - len(kept)))


def clip_fraction(c, width: int, height: int) -> float:
    """Share of the ideal perimeter falling outside the image (1.0 if all)."""
    try:
        per = rasterize_circle(c, width, height)
    except EmptyPerimeter:
        return 1.0
    return per.clipped / (per.count + per.clipped)


def distinctiveness(a, b) -> float:
    """L1 distance between two ``(x0, y0, r)`` parameter triples."""
    a = a.params if isinstance(a, CandidateCircle) else a
    b = b.params if isinstance(b, CandidateCircle) else b
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) + abs(a[2] - b[2])


def distinctiveness_threshold(r_min: float, r_max: float, s: float) -> float:
    """Parameter distance beyond which two circles count as different ones."""
    if not r_max > r_min:
        raise ValueError("r_max must exceed r_min")
    if not s > 0:
        raise ValueError("sensitivity must be positive")
    return (r_max - r_min) / s
