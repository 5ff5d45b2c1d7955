"""Forecast and segmentation metrics: MAPE, R-squared, discrete Frechet
distance, counting MAE, and mean IoU."""

import numpy as np

from .errors import ShapeError
from .raster import Raster


def normalize_minmax(series) -> np.ndarray:
    """(s - min) / (max - min); a constant series maps to all zeros."""
    s = np.asarray(series, dtype=np.float64)
    if s.size < 1:
        raise ShapeError("series must be non-empty")
    span = s.max() - s.min()
    if span == 0.0:
        return np.zeros_like(s)
    return (s - s.min()) / span


def _pair(truth, pred):
    t = np.asarray(truth, dtype=np.float64)
    p = np.asarray(pred, dtype=np.float64)
    if t.shape != p.shape or t.ndim != 1 or t.size == 0:
        raise ShapeError(f"series must be equal-length 1-D, got {t.shape} vs {p.shape}")
    return t, p


def mape(truth, pred, normalized: bool = False, eps: float = 1e-6) -> float:
    """Mean absolute percentage error, in percent; truth in the denominator.

    By default the raw series are compared and any zero in the ground truth
    is an error. With normalized=True both series are min-max normalized
    first and the denominator is floored at eps (the normalized ground truth
    always contains a zero).
    """
    t, p = _pair(truth, pred)
    if normalized:
        t, p = normalize_minmax(t), normalize_minmax(p)
        return float(np.mean(np.abs(t - p) / np.maximum(t, eps)) * 100.0)
    zeros = np.flatnonzero(t == 0.0)
    if zeros.size:
        raise ZeroDivisionError(
            f"ground truth contains zeros at indices {zeros.tolist()}"
        )
    return float(np.mean(np.abs((t - p) / t)) * 100.0)


def r_squared(truth, pred, norm_ratio: bool = False) -> float:
    """Explained variance 1 - SS_res / SS_tot.

    With norm_ratio=True the ratio of 2-norms (not squared norms) is used
    instead; that variant exists for comparability with reports that define
    it that way.
    """
    t, p = _pair(truth, pred)
    if t.size < 2:
        raise ShapeError("need at least 2 points")
    mean = t.mean()
    ss_tot = float(np.sum((t - mean) ** 2))
    if ss_tot == 0.0:
        raise ZeroDivisionError("ground truth is constant; variance undefined")
    ss_res = float(np.sum((t - p) ** 2))
    if norm_ratio:
        return 1.0 - np.sqrt(ss_res) / np.sqrt(ss_tot)
    return 1.0 - ss_res / ss_tot


def frechet(curve_a, curve_b) -> float:
    """Discrete Frechet distance between two point sequences.

    Points may be scalars (1-D curves) or d-dimensional rows; the ground
    metric is Euclidean. Dynamic program over the full coupling table.
    """
    if len(curve_a) == 0 or len(curve_b) == 0:
        raise ShapeError("curves must be non-empty")
    a = np.atleast_2d(np.asarray(curve_a, dtype=np.float64).reshape(len(curve_a), -1))
    b = np.atleast_2d(np.asarray(curve_b, dtype=np.float64).reshape(len(curve_b), -1))
    if a.shape[1] != b.shape[1]:
        raise ShapeError("curves must share the point dimension")
    dist = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    n, m = dist.shape
    ca = np.empty((n, m))
    ca[0, 0] = dist[0, 0]
    for j in range(1, m):
        ca[0, j] = max(ca[0, j - 1], dist[0, j])
    for i in range(1, n):
        ca[i, 0] = max(ca[i - 1, 0], dist[i, 0])
        row, prev = ca[i], ca[i - 1]
        for j in range(1, m):
            row[j] = max(min(prev[j], prev[j - 1], row[j - 1]), dist[i, j])
    return float(ca[-1, -1])


def mean_iou(pred, truth) -> float:
    """Mean intersection-over-union over {foreground, background}.

    A class absent from both masks counts as IoU 1.
    """
    p = pred.data >= 0.5 if isinstance(pred, Raster) else np.asarray(pred).astype(bool)
    t = truth.data >= 0.5 if isinstance(truth, Raster) else np.asarray(truth).astype(bool)
    if p.shape != t.shape:
        raise ShapeError(f"mask shapes differ: {p.shape} vs {t.shape}")
    total = 0.0
    for cls_p, cls_t in ((p, t), (~p, ~t)):
        union = np.logical_or(cls_p, cls_t).sum()
        if union == 0:
            total += 1.0
        else:
            total += np.logical_and(cls_p, cls_t).sum() / union
    return total / 2.0
