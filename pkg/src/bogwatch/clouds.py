"""Per-pixel cloud probability from sky color.

Clouds scatter red and blue roughly equally while clear sky is strongly
blue, so the normalized blue-red ratio rho = (B - R) / (B + R) separates the
two classes. A logistic squash turns the ratio into a soft probability that
downstream motion aggregation can weight by.
"""

import numpy as np

from .errors import ShapeError
from .raster import Raster

RATIO_EPS = 1e-6
DEFAULT_THRESHOLD = 0.10
DEFAULT_STEEPNESS = 40.0

# A CloudProbMap is a single-channel Raster whose values are cloud
# probabilities; no separate type is needed.
CloudProbMap = Raster


def cloud_probability(
    frame: Raster,
    threshold: float = DEFAULT_THRESHOLD,
    steepness: float = DEFAULT_STEEPNESS,
) -> Raster:
    """Cloud probability map p = logistic(k * (t - rho)) per pixel."""
    if frame.channels != 3:
        raise ShapeError(f"need an RGB frame, got {frame.channels} channel(s)")
    r = frame.data[:, :, 0]
    b = frame.data[:, :, 2]
    rho = (b - r) / (b + r + RATIO_EPS)
    p = 1.0 / (1.0 + np.exp(-steepness * (threshold - rho)))
    return Raster(p)


def binarize(prob: Raster, tau: float) -> Raster:
    """Threshold a probability map; values >= tau become foreground."""
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    if prob.channels != 1:
        raise ShapeError("probability map must be single-channel")
    return Raster((prob.data >= tau).astype(np.float64))


def sun_glare_exclusion(
    width: int, height: int, sun_px: tuple[float, float] | None, radius: float
) -> np.ndarray:
    """Boolean mask of pixels to drop near the sun disc (glare mimics cloud).

    Radius 0 (the default everywhere) excludes nothing.
    """
    excluded = np.zeros((height, width), dtype=bool)
    if sun_px is None or radius <= 0.0:
        return excluded
    ys, xs = np.mgrid[0.0:height, 0.0:width]
    d2 = (xs - sun_px[0]) ** 2 + (ys - sun_px[1]) ** 2
    return d2 <= radius * radius
