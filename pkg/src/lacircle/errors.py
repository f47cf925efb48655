"""Exception types raised by the detection pipeline."""


class CircleDetectionError(Exception):
    """Base class for every error raised by :mod:`lacircle`."""


class ImageFormatError(CircleDetectionError, ValueError):
    """An image or edge-map file could not be parsed."""


class TooFewEdgePoints(CircleDetectionError):
    """Fewer than three sampled edge points; no triplet can be formed."""


class CollinearPoints(CircleDetectionError, ValueError):
    pass


class EmptyPerimeter(CircleDetectionError):
    """Every rasterized perimeter pixel fell outside the image."""


class NoFeasibleActions(CircleDetectionError):
    """All candidate triplets were rejected while building the action set."""


class PlacementFailure(CircleDetectionError):
    """Scene generation could not satisfy the separation constraints."""
