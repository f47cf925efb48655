"""Gray images, Canny edge maps and the random edge-point subsample."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import imfile
from .errors import ImageFormatError, TooFewEdgePoints


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit luminance image stored as a ``(height, width)`` array."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.size == 0:
            raise ValueError(f"expected a nonempty 2-D array, got shape {data.shape}")
        if data.dtype != np.uint8:
            if data.min() < 0 or data.max() > 255:
                raise ValueError("luminance values must lie in [0, 255]")
            data = data.astype(np.uint8)
        object.__setattr__(self, "data", _frozen(data))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class EdgeMap:
    """Binary edge mask together with the ``(x, y)`` list of its set pixels.

    ``edge_points`` is in row-major scan order (sorted by ``y`` then ``x``).
    """

    bits: np.ndarray
    edge_points: np.ndarray = field(init=False)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2 or bits.size == 0:
            raise ValueError(f"expected a nonempty 2-D mask, got shape {bits.shape}")
        object.__setattr__(self, "bits", _frozen(bits))
        ys, xs = np.nonzero(bits)
        pts = np.stack([xs, ys], axis=1).astype(np.int64)
        object.__setattr__(self, "edge_points", _frozen(pts.reshape(-1, 2)))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def count(self) -> int:
        return len(self.edge_points)

    def __eq__(self, other):
        if not isinstance(other, EdgeMap):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)


@dataclass(frozen=True, eq=False)
class SampledPoints:
    points: np.ndarray
    source_seed: int | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def count(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class EdgeConfig:
    """Canny parameters. Thresholds are fractions of the peak gradient magnitude."""

    blur_sigma: float = 1.4
    low_thresh: float = 0.1
    high_thresh: float = 0.3

    def __post_init__(self):
        if self.blur_sigma < 0:
            raise ValueError("blur_sigma must be non-negative")
        if not 0 <= self.low_thresh <= self.high_thresh:
            raise ValueError("need 0 <= low_thresh <= high_thresh")


def load_gray_image(path) -> GrayImage:
    return GrayImage(imfile.read_gray(path))


def save_gray_image(path, img: GrayImage) -> None:
    imfile.write_gray(path, img.data)


# Neighbour offsets (dx, dy) along the quantized gradient direction.
# Image rows grow downwards, so a 45 degree gradient points to (+1, +1).
_DIRECTIONS = ((1, 0), (1, 1), (0, 1), (-1, 1))

# Gradients weaker than this (in gray levels per pixel) are numerical noise.
_MIN_GRADIENT = 1e-3


def _shift(a: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """out[y, x] = a[y + dy, x + dx], zero outside."""
    h, w = a.shape
    out = np.zeros_like(a)
    ys = slice(max(0, -dy), min(h, h - dy))
    xs = slice(max(0, -dx), min(w, w - dx))
    ys_src = slice(max(0, dy), min(h, h + dy))
    xs_src = slice(max(0, dx), min(w, w + dx))
    out[ys, xs] = a[ys_src, xs_src]
    return out


def gradient(img: GrayImage, blur_sigma: float = 1.4) -> tuple[np.ndarray, np.ndarray]:
    """Sobel gradient ``(gx, gy)`` of the Gaussian-smoothed image."""
    a = img.data.astype(np.float64)
    if blur_sigma > 0:
        a = ndimage.gaussian_filter(a, blur_sigma, mode="nearest")
    gx = ndimage.sobel(a, axis=1, mode="nearest")
    gy = ndimage.sobel(a, axis=0, mode="nearest")
    return gx, gy


def non_maximum_suppression(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Mask of pixels that are local maxima of |grad| across the edge.

    Ties between the two neighbours are broken towards the forward one so that
    a symmetric step yields exactly one ridge pixel instead of zero.
    """
    mag = np.hypot(gx, gy)
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    sector = np.floor((angle + np.pi / 8) / (np.pi / 4)).astype(np.int64) % 4
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (dx, dy) in enumerate(_DIRECTIONS):
        fwd = _shift(mag, dx, dy)
        back = _shift(mag, -dx, -dy)
        keep |= (sector == s) & (mag >= fwd) & (mag > back)
    keep &= mag > _MIN_GRADIENT
    keep[0, :] = keep[-1, :] = False
    keep[:, 0] = keep[:, -1] = False
    return keep


def hysteresis(mag: np.ndarray, candidates: np.ndarray, low: float, high: float) -> np.ndarray:
    weak = candidates & (mag >= low)
    strong = candidates & (mag >= high)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return weak
    hit = np.zeros(n + 1, dtype=bool)
    hit[np.unique(labels[strong])] = True
    hit[0] = False
    return hit[labels]


def detect_edges(img: GrayImage, cfg: EdgeConfig | None = None) -> EdgeMap:
    """Canny edge map: smooth, Sobel gradient, non-maximum suppression, hysteresis."""
    cfg = cfg or EdgeConfig()
    gx, gy = gradient(img, cfg.blur_sigma)
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= _MIN_GRADIENT:
        return EdgeMap(np.zeros(mag.shape, dtype=bool))
    thin = non_maximum_suppression(gx, gy)
    bits = hysteresis(mag / peak, thin, cfg.low_thresh, cfg.high_thresh)
    return EdgeMap(bits)


def _sidecar_path(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root + ".json"


def save_edge_map(path, edges: EdgeMap) -> str:
    """Write ``path`` as P4 PBM plus a ``.json`` sidecar; returns the sidecar path."""
    path = os.fspath(path)
    imfile.write_bitmap(path, edges.bits)
    side = _sidecar_path(path)
    with open(side, "w") as fh:
        json.dump({"width": edges.width, "height": edges.height, "count": edges.count}, fh)
        fh.write("\n")
    return side


def load_edge_map(path) -> EdgeMap:
    path = os.fspath(path)
    edges = EdgeMap(imfile.read_bitmap(path))
    side = _sidecar_path(path)
    if os.path.exists(side) and side != path:
        try:
            with open(side) as fh:
                meta = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ImageFormatError(f"bad edge-map sidecar {side}: {exc}") from exc
        expected = (edges.width, edges.height, edges.count)
        got = (meta.get("width"), meta.get("height"), meta.get("count"))
        if got != expected:
            raise ImageFormatError(f"sidecar {side} says {got}, bitmap has {expected}")
    return edges


def sample_size(n_total: int, fraction: float) -> int:
    # tolerance keeps e.g. 0.07 * 100 from rounding up to 8
    return math.ceil(fraction * n_total - 1e-9)


def sample_edge_points(edges: EdgeMap, fraction: float, rng) -> SampledPoints:
    """Uniformly draw ``ceil(fraction * N_t)`` distinct edge points.

    ``rng`` is a :class:`numpy.random.Generator` or an integer seed. The draw is
    a partial Fisher-Yates shuffle, so the order of the returned points is part
    of the deterministic contract.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    seed = None
    if not isinstance(rng, np.random.Generator):
        seed = int(rng)
        rng = np.random.default_rng(seed)
    n_total = edges.count
    n = sample_size(n_total, fraction)
    if n < 3:
        raise TooFewEdgePoints(
            f"{n} sampled points from {n_total} edge pixels; need at least 3"
        )
    order = np.arange(n_total)
    for i in range(n):
        j = int(rng.integers(i, n_total))
        order[i], order[j] = order[j], order[i]
    return SampledPoints(edges.edge_points[order[:n]], source_seed=seed)
