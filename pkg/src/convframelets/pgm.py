"""PGM image I/O and random sampling masks."""

from __future__ import annotations

import re

import numpy as np

__all__ = ["PGMError", "load_pgm", "save_pgm", "gen_mask", "load_mask", "save_mask"]


class PGMError(ValueError):
    pass


def _header_tokens(data, count):
    """Read ``count`` header tokens, skipping whitespace and ``#`` comments."""
    pos = 0
    out = []
    while len(out) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise PGMError("malformed PGM header")
        if data[pos : pos + 1] == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
            continue
        end = pos
        while end < len(data) and not data[end : end + 1].isspace() and data[end : end + 1] != b"#":
            end += 1
        out.append(data[pos:end])
        pos = end
    return out, pos


def load_pgm(path):
    """Read a P5 (binary) or P2 (ASCII) greymap with maxval <= 255 as float64."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = _header_tokens(data, 4)
    magic = tokens[0]
    if magic not in (b"P5", b"P2"):
        raise PGMError(f"unsupported magic number {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise PGMError("non-integer PGM header field") from exc
    if width <= 0 or height <= 0:
        raise PGMError(f"invalid size {width}x{height}")
    if not 0 < maxval <= 255:
        raise PGMError(f"maxval {maxval} not in 1..255")
    n = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates the header from the raster
        if pos >= len(data) or not data[pos : pos + 1].isspace():
            raise PGMError("missing whitespace after PGM header")
        raster = data[pos + 1 : pos + 1 + n]
        if len(raster) < n:
            raise PGMError(f"truncated payload: expected {n} bytes, got {len(raster)}")
        values = np.frombuffer(raster, dtype=np.uint8)
    else:
        body = re.sub(rb"#[^\n]*", b" ", data[pos:]).split()
        if len(body) < n:
            raise PGMError(f"truncated payload: expected {n} values, got {len(body)}")
        try:
            values = np.array([int(t) for t in body[:n]], dtype=np.int64)
        except ValueError as exc:
            raise PGMError("non-integer pixel value") from exc
    if values.max(initial=0) > maxval or values.min(initial=0) < 0:
        raise PGMError("pixel value exceeds maxval")
    return values.astype(np.float64).reshape(height, width)


def save_pgm(path, image):
    """Write a P5 greymap; values are clamped to [0, 255] and rounded half-to-even."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    raster = np.rint(np.clip(img, 0.0, 255.0)).astype(np.uint8)
    h, w = raster.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())


def gen_mask(shape, rate, seed=0):
    """Boolean mask with exactly ``round(rate * N)`` known pixels, drawn uniformly."""
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    n = int(np.prod(shape))
    count = int(round(rate * n))
    rng = np.random.default_rng(seed)
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, size=count, replace=False)] = True
    return mask.reshape(shape)


def load_mask(path):
    """Mask PGM: nonzero pixels are known."""
    return load_pgm(path) > 0


def save_mask(path, mask):
    save_pgm(path, np.where(np.asarray(mask, dtype=bool), 255.0, 0.0))
