"""Berry instance extraction: connected components, selective watershed
splitting, counting, and field density maps.

Counting treats each 8-connected foreground blob as one berry, after a
selective watershed pass has split blobs that plausibly contain several
merged berries. A blob is split only when it is large enough and its
distance transform shows at least two well-separated peaks; everything else
passes through untouched, so the pass can only ever increase the count.
"""

import csv
import heapq
from dataclasses import dataclass
from itertools import count as _counter

import numpy as np
from scipy import ndimage

from .errors import RangeError, ShapeError
from .raster import Raster

MIN_SPLIT_AREA = 120  # px, gate below which a blob is never split
MIN_MARKER_SEP = 6  # px, minimum distance between watershed seeds

_NEIGHBORS8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class LabeledBlobs:
    """Instance labeling: 0 = background, 1..N in raster-scan encounter order."""

    labels: np.ndarray  # int32, HxW
    areas: np.ndarray  # px count per label, index label-1
    centroids: np.ndarray  # (N, 2) pixel (x, y) per label

    @property
    def count(self) -> int:
        return int(self.areas.size)


@dataclass(frozen=True)
class AnnotationPoints:
    """Positive (berry) and negative (background) click annotations."""

    positive: tuple[tuple[int, int], ...]
    negative: tuple[tuple[int, int], ...]
    width: int
    height: int

    def __post_init__(self):
        for x, y in (*self.positive, *self.negative):
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise ValueError(f"point ({x}, {y}) outside the image")
        if set(self.positive) & set(self.negative):
            raise ValueError("positive and negative point sets overlap")


def _as_bool_mask(mask) -> np.ndarray:
    if isinstance(mask, Raster):
        if mask.channels != 1:
            raise ShapeError("mask must be single-channel")
        return mask.data >= 0.5
    return np.asarray(mask).astype(bool)


def connected_components(mask) -> LabeledBlobs:
    """8-connectivity labeling with deterministic raster-scan label order.

    Row runs of foreground pixels are merged with union-find, which keeps the
    Python-level work proportional to the number of runs, not pixels.
    """
    fg = _as_bool_mask(mask)
    h, w = fg.shape
    row_runs: list[list[tuple[int, int]]] = []
    for r in range(h):
        padded = np.empty(w + 2, dtype=np.int8)
        padded[0] = padded[-1] = 0
        padded[1:-1] = fg[r]
        edges = np.flatnonzero(np.diff(padded))
        row_runs.append(list(zip(edges[0::2], edges[1::2])))

    # Union-find over global run ids.
    parent: list[int] = []
    runs: list[tuple[int, int, int]] = []  # (row, x0, x1-exclusive)
    for r, rr in enumerate(row_runs):
        for x0, x1 in rr:
            parent.append(len(parent))
            runs.append((r, int(x0), int(x1)))

    def find(i: int) -> int:
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    offsets = np.cumsum([0] + [len(rr) for rr in row_runs])
    for r in range(1, h):
        above, here = row_runs[r - 1], row_runs[r]
        i = j = 0
        while i < len(above) and j < len(here):
            a0, a1 = above[i]
            b0, b1 = here[j]
            if a0 <= b1 and b0 <= a1:  # ranges within one pixel: 8-adjacency
                union(offsets[r - 1] + i, offsets[r] + j)
            if a1 < b1:
                i += 1
            else:
                j += 1

    labels = np.zeros((h, w), dtype=np.int32)
    label_of_root: dict[int, int] = {}
    next_label = 1
    for idx, (r, x0, x1) in enumerate(runs):
        root = find(idx)
        lab = label_of_root.get(root)
        if lab is None:
            lab = next_label
            label_of_root[root] = lab
            next_label += 1
        labels[r, x0:x1] = lab

    n = next_label - 1
    if n == 0:
        return LabeledBlobs(labels, np.zeros(0, dtype=np.int64), np.zeros((0, 2)))
    flat = labels.ravel()
    areas = np.bincount(flat, minlength=n + 1)[1:]
    ys, xs = np.mgrid[0:h, 0:w]
    cx = np.bincount(flat, weights=xs.ravel(), minlength=n + 1)[1:] / areas
    cy = np.bincount(flat, weights=ys.ravel(), minlength=n + 1)[1:] / areas
    return LabeledBlobs(labels, areas.astype(np.int64), np.column_stack([cx, cy]))


def _watershed_markers(edt: np.ndarray, region: np.ndarray, min_sep: float):
    """Distance-transform peaks at least min_sep apart, strongest first."""
    size = int(np.ceil(min_sep))
    yy, xx = np.mgrid[-size : size + 1, -size : size + 1]
    footprint = (xx * xx + yy * yy) <= min_sep * min_sep
    local_max = ndimage.maximum_filter(edt, footprint=footprint, mode="constant")
    cand = region & (edt > 0.0) & (edt >= local_max - 1e-9)
    ys, xs = np.nonzero(cand)
    if ys.size == 0:
        return []
    order = np.lexsort((xs, ys, -edt[ys, xs]))
    kept: list[tuple[int, int]] = []
    for i in order:
        y, x = int(ys[i]), int(xs[i])
        if all((y - ky) ** 2 + (x - kx) ** 2 >= min_sep * min_sep for ky, kx in kept):
            kept.append((y, x))
    return kept


def _flood(region: np.ndarray, edt: np.ndarray, markers) -> np.ndarray:
    """Marker-seeded flooding of the negated distance transform."""
    lab = np.zeros(region.shape, dtype=np.int32)
    heap: list = []
    tie = _counter()
    h, w = region.shape

    def push_neighbors(y: int, x: int, l: int) -> None:
        for dy, dx in _NEIGHBORS8:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and region[ny, nx] and lab[ny, nx] == 0:
                heapq.heappush(heap, (-edt[ny, nx], next(tie), ny, nx, l))

    for i, (y, x) in enumerate(markers, start=1):
        lab[y, x] = i
    for i, (y, x) in enumerate(markers, start=1):
        push_neighbors(y, x, i)
    while heap:
        _, _, y, x, l = heapq.heappop(heap)
        if lab[y, x] != 0:
            continue
        lab[y, x] = l
        push_neighbors(y, x, l)
    return lab


def selective_watershed(
    mask,
    min_split_area: int = MIN_SPLIT_AREA,
    min_marker_sep: float = MIN_MARKER_SEP,
) -> Raster:
    """Split merged blobs along watershed ridges of the distance transform.

    Only blobs with area >= min_split_area and at least two peak markers
    separated by >= min_marker_sep are touched. Ridge pixels (those adjacent
    to a catchment with a smaller label) are erased, so the output foreground
    is always a subset of the input and the component count never drops.
    """
    fg = _as_bool_mask(mask)
    blobs = connected_components(fg)
    out = fg.copy()
    for lab in range(1, blobs.count + 1):
        if blobs.areas[lab - 1] < min_split_area:
            continue
        ys, xs = np.nonzero(blobs.labels == lab)
        y0, y1 = ys.min(), ys.max() + 1
        x0, x1 = xs.min(), xs.max() + 1
        region = blobs.labels[y0:y1, x0:x1] == lab
        edt = ndimage.distance_transform_edt(
            np.pad(region, 1, mode="constant")
        )[1:-1, 1:-1]
        markers = _watershed_markers(edt, region, min_marker_sep)
        if len(markers) < 2:
            continue
        ws = _flood(region, edt, markers)
        ridge = np.zeros_like(region)
        padded = np.pad(ws, 1, mode="constant")
        for dy, dx in _NEIGHBORS8:
            neigh = padded[1 + dy : 1 + dy + region.shape[0], 1 + dx : 1 + dx + region.shape[1]]
            ridge |= (ws > 0) & (neigh > 0) & (neigh < ws)
        out[y0:y1, x0:x1] &= ~ridge
    return Raster(out.astype(np.float64))


def count(
    mask,
    min_split_area: int = MIN_SPLIT_AREA,
    min_marker_sep: float = MIN_MARKER_SEP,
) -> int:
    """Berry count: components remaining after selective watershed splitting."""
    split = selective_watershed(mask, min_split_area, min_marker_sep)
    return connected_components(split).count


def count_error(predictions, truth) -> float:
    """Mean absolute error between predicted and annotated counts."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"length mismatch: {p.shape} vs {t.shape}")
    return float(np.abs(p - t).mean())


@dataclass(frozen=True)
class CountDensityMap:
    """Per-cell summed berry counts over a georeferenced grid."""

    sums: np.ndarray  # (ny, nx) summed counts
    images: np.ndarray  # (ny, nx) contributing image count
    cell_size_m: float
    extent: tuple[float, float, float, float]  # min_e, min_n, max_e, max_n

    @property
    def mean_per_image(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.images > 0, self.sums / self.images, 0.0)


def density_map(
    tiles,
    cell_size_m: float,
    extent: tuple[float, float, float, float],
) -> CountDensityMap:
    """Accumulate (easting, northing, count) tile records into grid cells."""
    min_e, min_n, max_e, max_n = extent
    if cell_size_m <= 0.0 or max_e <= min_e or max_n <= min_n:
        raise ValueError("bad grid geometry")
    nx = int(np.ceil((max_e - min_e) / cell_size_m))
    ny = int(np.ceil((max_n - min_n) / cell_size_m))
    sums = np.zeros((ny, nx))
    images = np.zeros((ny, nx), dtype=np.int64)
    for easting, northing, n in tiles:
        if not (min_e <= easting <= max_e and min_n <= northing <= max_n):
            raise RangeError(
                f"position ({easting}, {northing}) outside extent {extent}"
            )
        ix = min(int((easting - min_e) / cell_size_m), nx - 1)
        iy = min(int((northing - min_n) / cell_size_m), ny - 1)
        sums[iy, ix] += n
        images[iy, ix] += 1
    return CountDensityMap(sums, images, cell_size_m, extent)


def read_manifest(path) -> list[tuple[str, float, float]]:
    """Tile manifest CSV: filename, easting_m, northing_m."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(
                (rec["filename"], float(rec["easting_m"]), float(rec["northing_m"]))
            )
    return rows


def write_manifest(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "easting_m", "northing_m"])
        for name, easting, northing in rows:
            writer.writerow([name, f"{easting:.3f}", f"{northing:.3f}"])


def write_density_csv(dm: CountDensityMap, path) -> None:
    """Grid CSV: one row per cell with indices, geo center, sum, images, mean."""
    mean = dm.mean_per_image
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["cell_x", "cell_y", "center_easting_m", "center_northing_m",
             "count_sum", "images", "count_mean"]
        )
        ny, nx = dm.sums.shape
        for iy in range(ny):
            for ix in range(nx):
                ce = dm.extent[0] + (ix + 0.5) * dm.cell_size_m
                cn = dm.extent[1] + (iy + 0.5) * dm.cell_size_m
                writer.writerow(
                    [ix, iy, f"{ce:.3f}", f"{cn:.3f}",
                     f"{dm.sums[iy, ix]:.0f}", int(dm.images[iy, ix]),
                     f"{mean[iy, ix]:.3f}"]
                )


def density_heat_image(dm: CountDensityMap) -> Raster:
    """Grayscale heat map of cell sums, max-normalized."""
    top = dm.sums.max()
    plane = dm.sums / top if top > 0 else dm.sums
    return Raster(plane)
