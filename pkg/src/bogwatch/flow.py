"""Dense cloud motion estimation and aggregation.

The flow between a frame pair is estimated with coarse-to-fine iterative
Lucas-Kanade: at each pyramid level the current displacement is refined by
solving the 2x2 normal equations of the brightness-constancy linearization
over a square window. Pixels whose structure tensor is near-singular
(textureless sky, aperture-degenerate edges) are marked invalid and carry
zero flow.

The per-pixel field is then distilled into one global cloud motion vector:
a weighted mean where each pixel contributes by how cloudy it is, how close
it sits to the sun, and whether it is actually heading toward the sun.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ShapeError
from .raster import FlowField, Raster, bilinear_sample

MIN_EIGENVALUE = 1e-4  # validity gate on the window-averaged structure tensor
_SOLVE_FRACTION = 0.25  # of MIN_EIGENVALUE: below this a pixel is not updated
_STEP_CLAMP = 1.0  # px, per-iteration update limit (pyramid handles the rest)
_STEP_STOP = 0.005  # px, freeze a pixel once its update falls below this
DEFAULT_CONSISTENCY_TOL = 1.0  # px


@dataclass(frozen=True)
class MotionWeights:
    """Weight shaping for the global motion estimate.

    sigma_d: Gaussian scale (px) of the distance decay toward the sun.
    use_direction: gate contributions by the clipped cosine between the
        pixel's motion and its direction to the sun.
    prob_exponent: exponent applied to the cloud probability.
    """

    sigma_d: float
    use_direction: bool = True
    prob_exponent: float = 1.0

    def __post_init__(self):
        if self.sigma_d <= 0.0:
            raise ValueError("sigma_d must be positive")


@dataclass(frozen=True)
class GlobalMotion:
    vx: float
    vy: float
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.vx, self.vy])


def _as_plane(img) -> np.ndarray:
    if isinstance(img, Raster):
        return img.gray()
    return np.asarray(img, dtype=np.float64)


def _blur5(a: np.ndarray) -> np.ndarray:
    """Separable binomial [1 4 6 4 1]/16 low-pass, reflect borders."""
    p = np.pad(a, ((2, 2), (0, 0)), mode="reflect")
    a = (p[:-4] + 4 * p[1:-3] + 6 * p[2:-2] + 4 * p[3:-1] + p[4:]) / 16.0
    p = np.pad(a, ((0, 0), (2, 2)), mode="reflect")
    return (p[:, :-4] + 4 * p[:, 1:-3] + 6 * p[:, 2:-2] + 4 * p[:, 3:-1] + p[:, 4:]) / 16.0


def _downsample(a: np.ndarray) -> np.ndarray:
    return _blur5(a)[::2, ::2]


def _gradients(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gy, gx = np.gradient(a)
    return gx, gy


def _window_sum(a: np.ndarray, radius: int) -> np.ndarray:
    """Box sum over a (2*radius+1)^2 window, truncated at the borders."""
    c = np.cumsum(np.cumsum(np.pad(a, ((1, 0), (1, 0))), axis=0), axis=1)
    h, w = a.shape
    y0 = np.clip(np.arange(h) - radius, 0, h)
    y1 = np.clip(np.arange(h) + radius + 1, 0, h)
    x0 = np.clip(np.arange(w) - radius, 0, w)
    x1 = np.clip(np.arange(w) + radius + 1, 0, w)
    return (
        c[np.ix_(y1, x1)] - c[np.ix_(y0, x1)] - c[np.ix_(y1, x0)] + c[np.ix_(y0, x0)]
    )


def _resize_bilinear(a: np.ndarray, height: int, width: int) -> np.ndarray:
    sy = a.shape[0] / height
    sx = a.shape[1] / width
    ys = (np.arange(height) + 0.5) * sy - 0.5
    xs = (np.arange(width) + 0.5) * sx - 0.5
    return bilinear_sample(a, *np.meshgrid(xs, ys))


def _spline_sampler(plane: np.ndarray):
    """Cubic B-spline sampler (nearest-border); bilinear on tiny images.

    Bilinear resampling attenuates fine texture at fractional offsets, which
    biases iterative refinement; cubic interpolation removes that drift.
    """
    if min(plane.shape) < 4:
        return lambda sy, sx: bilinear_sample(plane, sx, sy)
    coeff = ndimage.spline_filter(plane, order=3, mode="nearest")
    return lambda sy, sx: ndimage.map_coordinates(
        coeff, [sy, sx], order=3, prefilter=False, mode="nearest"
    )


def lucas_kanade_flow(
    prev,
    next_,
    levels: int = 3,
    window: int = 15,
    iters: int = 5,
) -> FlowField:
    """Dense flow from prev to next: next(q + flow(q)) ~= prev(q)."""
    a = _as_plane(prev)
    b = _as_plane(next_)
    if a.shape != b.shape:
        raise ShapeError(f"frame shapes differ: {a.shape} vs {b.shape}")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    radius = window // 2
    npix = float(window * window)

    pyr_a, pyr_b = [a], [b]
    for _ in range(levels - 1):
        if min(pyr_a[-1].shape) < 2 * window:
            break  # coarser levels would be smaller than the window
        pyr_a.append(_downsample(pyr_a[-1]))
        pyr_b.append(_downsample(pyr_b[-1]))

    u = np.zeros_like(pyr_a[-1])
    v = np.zeros_like(pyr_a[-1])
    lam_fine = None
    for level in range(len(pyr_a) - 1, -1, -1):
        al, bl = pyr_a[level], pyr_b[level]
        h, w = al.shape
        if u.shape != al.shape:
            u = _resize_bilinear(u, h, w) * 2.0
            v = _resize_bilinear(v, h, w) * 2.0
        ax, ay = _gradients(al)
        bgx, bgy = _gradients(bl)
        sample_b = _spline_sampler(bl)
        sample_gx = _spline_sampler(bgx)
        sample_gy = _spline_sampler(bgy)
        ys, xs = np.mgrid[0.0:h, 0.0:w]
        active = np.ones((h, w), dtype=bool)
        for _ in range(iters):
            sx, sy = xs + u, ys + v
            warped = sample_b(sy, sx)
            # Symmetric gradient (template + warped target) halves the
            # linearization bias of the pure template-gradient scheme.
            gx = 0.5 * (ax + sample_gx(sy, sx))
            gy = 0.5 * (ay + sample_gy(sy, sx))
            gxx = _window_sum(gx * gx, radius)
            gxy = _window_sum(gx * gy, radius)
            gyy = _window_sum(gy * gy, radius)
            det = gxx * gyy - gxy * gxy
            trace = gxx + gyy
            lam_min = 0.5 * (
                trace - np.sqrt(np.maximum(trace * trace - 4.0 * det, 0.0))
            )
            solvable = active & (lam_min > _SOLVE_FRACTION * MIN_EIGENVALUE * npix)
            it = al - warped
            bx = _window_sum(gx * it, radius)
            by = _window_sum(gy * it, radius)
            with np.errstate(divide="ignore", invalid="ignore"):
                du = (gyy * bx - gxy * by) / det
                dv = (gxx * by - gxy * bx) / det
            # Clamp each step (near-singular windows otherwise jump wildly)
            # and freeze pixels once their update is negligible, so tiny
            # residual biases cannot accumulate over many iterations.
            du = np.clip(np.where(solvable, du, 0.0), -_STEP_CLAMP, _STEP_CLAMP)
            dv = np.clip(np.where(solvable, dv, 0.0), -_STEP_CLAMP, _STEP_CLAMP)
            u = u + du
            v = v + dv
            active = solvable & (np.hypot(du, dv) >= _STEP_STOP)
            if not active.any():
                break
        if level == 0:
            # Validity gate from the template structure tensor, normalized to
            # a per-pixel average so it does not depend on the window size.
            txx = _window_sum(ax * ax, radius)
            txy = _window_sum(ax * ay, radius)
            tyy = _window_sum(ay * ay, radius)
            tdet = txx * tyy - txy * txy
            ttr = txx + tyy
            lam_fine = 0.5 * (ttr - np.sqrt(np.maximum(ttr * ttr - 4.0 * tdet, 0.0)))

    valid = (lam_fine / npix) >= MIN_EIGENVALUE
    return FlowField(np.where(valid, u, 0.0), np.where(valid, v, 0.0), valid)


def consistency_check(fwd: FlowField, bwd: FlowField, tol: float) -> FlowField:
    """Keep pixels where the backward flow sampled downstream cancels the
    forward flow to within tol pixels."""
    if (fwd.height, fwd.width) != (bwd.height, bwd.width):
        raise ShapeError("flow fields differ in size")
    if math.isinf(tol):
        return fwd
    ys, xs = np.mgrid[0.0 : fwd.height, 0.0 : fwd.width]
    bu = bilinear_sample(bwd.u, xs + fwd.u, ys + fwd.v)
    bv = bilinear_sample(bwd.v, xs + fwd.u, ys + fwd.v)
    residual = np.hypot(fwd.u + bu, fwd.v + bv)
    valid = fwd.valid & (residual <= tol)
    return FlowField(fwd.u, fwd.v, valid)


def mask_flow(flow: FlowField, prob: Raster) -> FlowField:
    """Scale displacements by the per-pixel cloud probability."""
    if (flow.height, flow.width) != (prob.height, prob.width):
        raise ShapeError("flow and probability map differ in size")
    p = prob.data if prob.channels == 1 else prob.gray()
    return FlowField(flow.u * p, flow.v * p, flow.valid)


def global_motion(
    flow: FlowField,
    prob: Raster,
    sun_px: tuple[float, float],
    weights: MotionWeights,
) -> GlobalMotion:
    """Weighted-mean cloud motion vector aimed at predicting sun occlusion.

    Per valid pixel q: gamma = h(m) * f(|d|) * g(v, d) with m the cloud
    probability, d the vector from q to the sun, h(m) = m**prob_exponent,
    f a Gaussian falloff in distance, and g the cosine between the motion and
    sun direction clipped at zero (g = 1 for zero motion). Confidence is the
    achieved weight mass relative to its ceiling g = 1, i.e. the f*h-weighted
    mean of g: how coherently the cloudy mass heads for the sun.
    """
    if (flow.height, flow.width) != (prob.height, prob.width):
        raise ShapeError("flow and probability map differ in size")
    valid = flow.valid
    if not valid.any():
        return GlobalMotion(0.0, 0.0, 0.0)
    p = prob.data if prob.channels == 1 else prob.gray()
    ys, xs = np.mgrid[0.0 : flow.height, 0.0 : flow.width]
    dx = sun_px[0] - xs
    dy = sun_px[1] - ys
    dist = np.hypot(dx, dy)
    f = np.exp(-(dist * dist) / (2.0 * weights.sigma_d**2))
    h = np.power(np.clip(p, 0.0, 1.0), weights.prob_exponent)
    if weights.use_direction:
        speed = np.hypot(flow.u, flow.v)
        denom = speed * dist
        with np.errstate(divide="ignore", invalid="ignore"):
            cosang = (flow.u * dx + flow.v * dy) / denom
        g = np.where(denom > 0.0, np.clip(cosang, 0.0, 1.0), 1.0)
    else:
        g = np.ones_like(f)
    gamma = np.where(valid, h * f * g, 0.0)
    total = float(gamma.sum())
    ceiling = float(np.where(valid, h * f, 0.0).sum())
    if total < 1e-9 or ceiling <= 0.0:
        return GlobalMotion(0.0, 0.0, 0.0)
    vx = float((gamma * flow.u).sum() / total)
    vy = float((gamma * flow.v).sum() / total)
    return GlobalMotion(vx, vy, min(1.0, total / ceiling))
