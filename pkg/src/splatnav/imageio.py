"""Minimal binary PPM/PGM readers and writers for image and map dumps."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .accel.kconst import CELL_FREE, CELL_OCCUPIED, CELL_UNKNOWN


def write_ppm(path, rgb: np.ndarray) -> None:
    """P6 with maxval 255; accepts float [0,1] or uint8."""
    if rgb.dtype != np.uint8:
        rgb = np.round(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.tobytes())


def _read_pnm_header(fh, magic: bytes):
    if fh.read(2) != magic:
        raise ValueError(f"expected {magic!r} file")
    vals = []
    while len(vals) < 3:
        line = fh.readline()
        if not line:
            raise ValueError("truncated header")
        text = line.split(b"#", 1)[0]
        vals.extend(int(v) for v in text.split())
    return vals[0], vals[1], vals[2]


def read_ppm(path) -> np.ndarray:
    """Returns float rgb in [0, 1]."""
    with open(path, "rb") as fh:
        w, h, maxval = _read_pnm_header(fh, b"P6")
        data = np.frombuffer(fh.read(w * h * 3), np.uint8)
    return data.reshape(h, w, 3).astype(float) / float(maxval)


def write_pgm(path, gray: np.ndarray) -> None:
    """P5 with maxval 255 from a uint8 array."""
    gray = np.asarray(gray, np.uint8)
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(gray.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        w, h, _ = _read_pnm_header(fh, b"P5")
        data = np.frombuffer(fh.read(w * h), np.uint8)
    return data.reshape(h, w).copy()


def write_pgm16(path, values: np.ndarray) -> None:
    """16-bit P5 (big endian), used for instance-id images."""
    vals = np.asarray(values, np.uint16)
    h, w = vals.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode())
        fh.write(vals.astype(">u2").tobytes())


def read_pgm16(path) -> np.ndarray:
    with open(path, "rb") as fh:
        w, h, maxval = _read_pnm_header(fh, b"P5")
        if maxval <= 255:
            data = np.frombuffer(fh.read(w * h), np.uint8).astype(np.uint16)
        else:
            data = np.frombuffer(fh.read(w * h * 2), ">u2").astype(np.uint16)
    return data.reshape(h, w).copy()


def depth_to_pgm(path, depth: np.ndarray, max_depth: float = 5.0) -> None:
    scaled = np.round(np.clip(depth / max_depth, 0.0, 1.0) * 255.0).astype(np.uint8)
    write_pgm(path, scaled)


def map_to_pgm(path, cells: np.ndarray) -> None:
    """Occupancy dump: UNKNOWN=128, FREE=255, OCCUPIED=0."""
    img = np.full(cells.shape, 128, np.uint8)
    img[cells == CELL_FREE] = 255
    img[cells == CELL_OCCUPIED] = 0
    img[cells == CELL_UNKNOWN] = 128
    write_pgm(path, img)


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
