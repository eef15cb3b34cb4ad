"""Patch matrices, anti-diagonal averaging and circular convolution.

Signals live on a periodic domain. A 1-D signal of length ``N`` yields an
``N x l`` Hankel patch matrix; a 2-D ``H x W`` image yields an ``N x l``
block-Hankel matrix with ``N = H*W`` and ``l = s1*s2``. Patches are anchored
at their top-left pixel, anchors run in raster order and the pixels inside a
patch are linearised row-major.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PatchConfig",
    "as_signal",
    "build_patch_matrix",
    "average_antidiagonals",
    "circular_convolve",
    "flip",
]


@dataclass(frozen=True)
class PatchConfig:
    """Patch geometry: ``shape`` is ``(l,)`` for 1-D or ``(s1, s2)`` for 2-D.

    Stride is always 1 and the boundary is always periodic.
    """

    shape: tuple

    def __post_init__(self):
        shape = tuple(int(s) for s in np.atleast_1d(self.shape))
        if len(shape) not in (1, 2) or min(shape) < 1:
            raise ValueError(f"invalid patch shape {self.shape!r}")
        object.__setattr__(self, "shape", shape)

    @classmethod
    def parse(cls, text):
        """Build from ``"8"`` or ``"4x4"``."""
        parts = str(text).lower().split("x")
        return cls(tuple(int(p) for p in parts))

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def offsets(self):
        """Pixel offsets of the ``l`` patch entries, shape ``(l, ndim)``."""
        grids = np.meshgrid(*[np.arange(s) for s in self.shape], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def check(self, signal_shape):
        signal_shape = tuple(signal_shape)
        if len(signal_shape) != self.ndim:
            raise ValueError(
                f"{self.ndim}-D patch {self.shape} does not match signal of shape "
                f"{signal_shape}"
            )
        n = int(np.prod(signal_shape))
        if not 1 < self.size < n:
            raise ValueError(f"need 1 < l < N, got l={self.size}, N={n}")
        if any(s > d for s, d in zip(self.shape, signal_shape)):
            raise ValueError(f"patch {self.shape} larger than signal {signal_shape}")


def as_signal(f):
    """Return ``f`` as a finite float64 array of dimension 1 or 2."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim not in (1, 2):
        raise ValueError(f"signal must be 1-D or 2-D, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("signal contains non-finite values")
    return f


def build_patch_matrix(f, cfg):
    """Stack all periodic stride-1 patches of ``f`` as rows of an ``N x l`` matrix.

    ``F[m, j] = f[(m + j) mod N]`` in 1-D; in 2-D row ``m`` is the patch whose
    top-left corner is raster pixel ``m``.
    """
    f = as_signal(f)
    cfg.check(f.shape)
    cols = []
    for off in cfg.offsets():
        # column j is f shifted so that entry m reads pixel m + offset_j
        cols.append(np.roll(f, shift=tuple(-off), axis=tuple(range(f.ndim))).ravel())
    return np.stack(cols, axis=1)


def average_antidiagonals(F, cfg, signal_shape):
    """Left inverse of :func:`build_patch_matrix`.

    Every pixel is copied into ``l`` entries of ``F``; the output is the mean of
    those entries. For 1-D signals ``signal_shape`` may be an int.
    """
    signal_shape = tuple(np.atleast_1d(signal_shape).astype(int))
    F = np.asarray(F, dtype=np.float64)
    n = int(np.prod(signal_shape))
    if F.ndim != 2 or F.shape != (n, cfg.size):
        raise ValueError(f"patch matrix of shape {F.shape} does not match N={n}, l={cfg.size}")
    cfg.check(signal_shape)
    axes = tuple(range(len(signal_shape)))
    out = np.zeros(signal_shape)
    for j, off in enumerate(cfg.offsets()):
        out += np.roll(F[:, j].reshape(signal_shape), shift=tuple(off), axis=axes)
    return out / cfg.size


def _zero_pad(v, shape):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != len(shape):
        raise ValueError(f"cannot zero-pad array of shape {v.shape} into {shape}")
    if any(a > b for a, b in zip(v.shape, shape)):
        raise ValueError(f"input of shape {v.shape} longer than domain {shape}")
    out = np.zeros(shape)
    out[tuple(slice(0, s) for s in v.shape)] = v
    return out


def circular_convolve(v, w, n):
    """Periodic convolution of zero-padded ``v`` and ``w`` on a domain of size ``n``.

    ``n`` is an int for 1-D signals or an ``(H, W)`` tuple for images, in which
    case ``v`` and ``w`` are 2-D arrays no larger than the domain.
    """
    shape = tuple(np.atleast_1d(n).astype(int))
    v0 = _zero_pad(v, shape)
    w0 = _zero_pad(w, shape)
    axes = tuple(range(len(shape)))
    out = np.zeros(shape)
    # sum over the support of w only; local filters are short
    for idx in zip(*np.nonzero(w0)):
        out += w0[idx] * np.roll(v0, shift=idx, axis=axes)
    return out


def flip(v, n):
    """Periodic flip ``v0[-k mod n]`` of the zero-padded ``v``."""
    shape = tuple(np.atleast_1d(n).astype(int))
    v0 = _zero_pad(v, shape)
    for ax in range(v0.ndim):
        v0 = np.roll(np.flip(v0, axis=ax), 1, axis=ax)
    return v0
