"""Image and flow containers shared by all vision stages.

Pixel (x, y) means column x, row y; arrays are indexed [y, x]. Intensities
are stored as float64 in [0, 1]; 8-bit files are scaled by 1/255 on ingest.
All containers are read-only after construction so frames can be processed
concurrently without copying.
"""

import numpy as np

from .errors import ShapeError

# Rec.601 luma weights, used when a single-plane view of an RGB frame is needed.
_LUMA = np.array([0.299, 0.587, 0.114])


class Raster:
    """W x H x C image of unit-interval intensities (C = 1 or 3)."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
            raise ShapeError(f"expected HxW or HxWx3 data, got shape {arr.shape}")
        if arr.size == 0:
            raise ShapeError("empty image")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < -1e-9 or hi > 1.0 + 1e-9:
            raise ValueError(f"intensities outside [0, 1]: min {lo:.6g}, max {hi:.6g}")
        np.clip(arr, 0.0, 1.0, out=arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Raster is immutable")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]

    def gray(self) -> np.ndarray:
        """Single-plane float view: the data itself or its Rec.601 luma."""
        if self.channels == 1:
            return self.data
        return self.data @ _LUMA

    def __eq__(self, other):
        return isinstance(other, Raster) and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"Raster({self.width}x{self.height}x{self.channels})"


class FlowField:
    """Per-pixel displacement (u, v) in pixels plus a validity channel.

    Invalid pixels always carry displacement (0, 0).
    """

    __slots__ = ("u", "v", "valid")

    def __init__(self, u, v, valid):
        u = np.array(u, dtype=np.float64)
        v = np.array(v, dtype=np.float64)
        valid = np.array(valid, dtype=bool)
        if not (u.ndim == 2 and u.shape == v.shape == valid.shape):
            raise ShapeError(
                f"u/v/valid shapes differ: {u.shape}, {v.shape}, {valid.shape}"
            )
        u[~valid] = 0.0
        v[~valid] = 0.0
        for a in (u, v, valid):
            a.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "valid", valid)

    def __setattr__(self, name, value):
        raise AttributeError("FlowField is immutable")

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @staticmethod
    def zero(width: int, height: int) -> "FlowField":
        z = np.zeros((height, width))
        return FlowField(z, z.copy(), np.ones((height, width), dtype=bool))

    def __repr__(self):
        frac = float(self.valid.mean()) if self.valid.size else 0.0
        return f"FlowField({self.width}x{self.height}, {frac:.0%} valid)"


def bilinear_sample(plane: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample a 2-D plane at float coordinates with border replication."""
    h, w = plane.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = plane[y0, x0] * (1.0 - fx) + plane[y0, x1] * fx
    bot = plane[y1, x0] * (1.0 - fx) + plane[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def warp(img: Raster, flow: FlowField) -> Raster:
    """Backward-warp an image: output(q) = img sampled at q + flow(q).

    Bilinear interpolation; samples falling outside the image replicate the
    nearest border pixel.
    """
    if (img.height, img.width) != (flow.height, flow.width):
        raise ShapeError(
            f"image {img.width}x{img.height} vs flow {flow.width}x{flow.height}"
        )
    ys, xs = np.mgrid[0.0 : img.height, 0.0 : img.width]
    sx = xs + flow.u
    sy = ys + flow.v
    if img.channels == 1:
        return Raster(bilinear_sample(img.data, sx, sy))
    out = np.stack(
        [bilinear_sample(img.data[:, :, c], sx, sy) for c in range(img.channels)],
        axis=2,
    )
    return Raster(out)
