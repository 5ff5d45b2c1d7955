"""Image and flow-field file I/O.

Frames are read from 8-bit PNG or PPM/PGM and scaled by 1/255. Flow fields
are stored as a trio of netpbm files per frame pair:

    <stem>_u.pgm     16-bit PGM, offset-binary fixed point: raw = round(u * 64) + 32768
    <stem>_v.pgm     same encoding for the v component
    <stem>_valid.pgm 8-bit PGM, 255 = valid, 0 = invalid

The 1/64 px quantum bounds representable displacements to about +/-511 px.
"""

import re
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ShapeError
from .raster import FlowField, Raster

FLOW_QUANTUM = 64.0
FLOW_OFFSET = 32768


def read_image(path) -> Raster:
    """Load an 8-bit PNG/PPM/PGM file as a unit-interval Raster."""
    path = Path(path)
    if path.suffix.lower() in (".pgm", ".ppm", ".pnm"):
        arr = _read_pnm(path)
    else:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB" if im.mode in ("RGBA", "P", "CMYK") else "L")
            arr = np.asarray(im)
    return Raster(arr.astype(np.float64) / 255.0)


def write_image(img: Raster, path) -> None:
    """Write a Raster as an 8-bit PNG or binary PPM/PGM, by extension."""
    path = Path(path)
    data = np.rint(img.data * 255.0).astype(np.uint8)
    if path.suffix.lower() in (".pgm", ".ppm", ".pnm"):
        _write_pnm(data, path)
        return
    Image.fromarray(data, mode="L" if img.channels == 1 else "RGB").save(path)


def write_gray(plane: np.ndarray, path) -> None:
    """Write a unit-interval 2-D array as an 8-bit grayscale image."""
    write_image(Raster(np.clip(plane, 0.0, 1.0)), path)


def _read_pnm(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    magic = raw[:2].decode("ascii", errors="replace")
    if magic not in ("P2", "P3", "P5", "P6"):
        raise ValueError(f"{path}: unsupported netpbm magic {magic!r}")
    # Header tokens: magic, width, height, maxval, with # comments allowed.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        m = re.match(rb"\s*(?:#[^\n]*\n)*\s*(\S+)", raw[pos:])
        if not m:
            raise ValueError(f"{path}: truncated netpbm header")
        tokens.append(m.group(1))
        pos += m.end()
    width, height, maxval = (int(t) for t in tokens)
    if maxval <= 0 or maxval > 65535:
        raise ValueError(f"{path}: bad maxval {maxval}")
    planar = 3 if magic in ("P3", "P6") else 1
    count = width * height * planar
    if magic in ("P2", "P3"):
        values = np.array(raw[pos:].split(), dtype=np.int64)
        if values.size != count:
            raise ValueError(f"{path}: expected {count} samples, got {values.size}")
        arr = values
    else:
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.uint8
        arr = np.frombuffer(raw, dtype=dtype, count=count, offset=pos).astype(np.int64)
    arr = arr.reshape((height, width, planar) if planar == 3 else (height, width))
    if maxval != 255:
        arr = np.rint(arr * (255.0 / maxval)).astype(np.int64)
    return np.clip(arr, 0, 255).astype(np.uint8)


def _write_pnm(data: np.ndarray, path: Path, maxval: int = 255) -> None:
    if data.ndim == 3 and data.shape[2] == 3:
        magic = "P6"
    elif data.ndim == 2:
        magic = "P5"
    else:
        raise ShapeError(f"cannot write array of shape {data.shape} as netpbm")
    header = f"{magic}\n{data.shape[1]} {data.shape[0]}\n{maxval}\n".encode("ascii")
    body = data.astype(">u2" if maxval > 255 else np.uint8).tobytes()
    path.write_bytes(header + body)


def write_flow(flow: FlowField, stem) -> list[Path]:
    """Write a flow field; returns the three file paths."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, comp in (("u", flow.u), ("v", flow.v)):
        raw = np.rint(comp * FLOW_QUANTUM) + FLOW_OFFSET
        raw = np.clip(raw, 0, 65535).astype(np.uint16)
        p = stem.with_name(stem.name + f"_{name}.pgm")
        _write_pnm(raw, p, maxval=65535)
        paths.append(p)
    vp = stem.with_name(stem.name + "_valid.pgm")
    _write_pnm(np.where(flow.valid, 255, 0).astype(np.uint8), vp)
    paths.append(vp)
    return paths


def read_flow(stem) -> FlowField:
    stem = Path(stem)
    comps = {}
    for name in ("u", "v"):
        raw = _read_pnm_raw(stem.with_name(stem.name + f"_{name}.pgm"))
        comps[name] = (raw.astype(np.float64) - FLOW_OFFSET) / FLOW_QUANTUM
    valid = _read_pnm_raw(stem.with_name(stem.name + "_valid.pgm")) >= 128
    return FlowField(comps["u"], comps["v"], valid)


def _read_pnm_raw(path: Path) -> np.ndarray:
    """Read a binary PGM keeping native sample values (no 8-bit rescale)."""
    raw = path.read_bytes()
    if raw[:2] != b"P5":
        raise ValueError(f"{path}: expected binary PGM")
    tokens = []
    pos = 2
    while len(tokens) < 3:
        m = re.match(rb"\s*(?:#[^\n]*\n)*\s*(\S+)", raw[pos:])
        tokens.append(m.group(1))
        pos += m.end()
    width, height, maxval = (int(t) for t in tokens)
    pos += 1
    dtype = np.dtype(">u2") if maxval > 255 else np.uint8
    arr = np.frombuffer(raw, dtype=dtype, count=width * height, offset=pos)
    return arr.reshape((height, width)).astype(np.int64)
