"""Convolution framelet analysis, synthesis and frame diagnostics.

For an orthonormal nonlocal basis ``Phi`` (columns on the ``N`` patches) and
an orthonormal local basis ``V`` (columns in patch space) the coefficients of
a signal are ``C = Phi^T F V`` where ``F`` is its patch matrix. The atoms
``psi_ij = phi_i * v_j / sqrt(l)`` form a tight frame, so synthesis is
``average_antidiagonals(Phi C V^T)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .bases import LocalBasis, NonlocalBasis
from .patch_core import (
    as_signal,
    average_antidiagonals,
    build_patch_matrix,
    circular_convolve,
)

__all__ = [
    "CoeffMatrix",
    "analyze",
    "synthesize",
    "framelet_atom",
    "frame_operator",
    "verify_frame_constant",
    "energy_concentration",
    "write_coefficients_csv",
]


@dataclass(frozen=True)
class CoeffMatrix:
    """Framelet coefficients plus the bookkeeping needed to synthesise.

    ``total_energy`` is ``||F||_F^2`` of the analysed patch matrix, which equals
    ``||C||_F^2`` for complete bases and lets truncated systems report energy
    fractions.
    """

    entries: np.ndarray
    signal_shape: tuple
    total_energy: float
    phi_meta: str = ""
    v_meta: str = ""

    @property
    def shape(self):
        return self.entries.shape


def _vectors(basis):
    if isinstance(basis, (LocalBasis, NonlocalBasis)):
        return basis.vectors
    return np.asarray(basis, dtype=np.float64)


def _meta(basis):
    if isinstance(basis, LocalBasis):
        return basis.kind
    if isinstance(basis, NonlocalBasis):
        return basis.source
    return "matrix"


def analyze(f, phi, V, cfg):
    """Coefficients ``C_ij = phi_i^T F v_j``."""
    f = as_signal(f)
    F = build_patch_matrix(f, cfg)
    P, Q = _vectors(phi), _vectors(V)
    if P.shape[0] != F.shape[0] or Q.shape[0] != F.shape[1]:
        raise ValueError(
            f"bases of shapes {P.shape} and {Q.shape} do not fit patch matrix {F.shape}"
        )
    C = P.T @ F @ Q
    return CoeffMatrix(C, f.shape, float(np.sum(F * F)), _meta(phi), _meta(V))


def synthesize(C, phi, V, cfg):
    """Signal from coefficients; exact inverse of :func:`analyze` for complete bases.

    With truncated bases the result is the least-squares partial expansion.
    """
    P, Q = _vectors(phi), _vectors(V)
    entries = C.entries if isinstance(C, CoeffMatrix) else np.asarray(C, dtype=np.float64)
    if entries.shape != (P.shape[1], Q.shape[1]):
        raise ValueError(
            f"coefficients of shape {entries.shape} do not match bases "
            f"({P.shape[1]}, {Q.shape[1]})"
        )
    shape = C.signal_shape if isinstance(C, CoeffMatrix) else None
    if shape is None:
        shape = _infer_shape(P.shape[0], cfg)
    return average_antidiagonals(P @ entries @ Q.T, cfg, shape)


def _infer_shape(n, cfg):
    if cfg.ndim == 1:
        return (n,)
    side = int(round(np.sqrt(n)))
    if side * side != n:
        raise ValueError("cannot infer image shape; pass a CoeffMatrix")
    return (side, side)


def framelet_atom(phi, V, i, j, cfg, signal_shape):
    """``psi_ij = phi_i * v_j / sqrt(l)`` on the periodic signal domain."""
    P, Q = _vectors(phi), _vectors(V)
    if not (0 <= i < P.shape[1] and 0 <= j < Q.shape[1]):
        raise IndexError(f"atom ({i}, {j}) out of range for {P.shape[1]} x {Q.shape[1]}")
    signal_shape = tuple(np.atleast_1d(signal_shape).astype(int))
    phi_i = P[:, i].reshape(signal_shape)
    v_j = Q[:, j].reshape(cfg.shape)
    return circular_convolve(phi_i, v_j, signal_shape) / np.sqrt(cfg.size)


def frame_operator(VL, VS):
    """``S = sum_ij a_ij a_ij^T`` over atoms ``a_ij = vL_j * vS_i`` in R^n."""
    VL = np.asarray(VL, dtype=np.float64)
    VS = np.asarray(VS, dtype=np.float64)
    n = VL.shape[0]
    atoms = [
        circular_convolve(VL[:, j], VS[:, i], n)
        for i in range(VS.shape[1])
        for j in range(VL.shape[1])
    ]
    A = np.array(atoms)
    return A.T @ A


def verify_frame_constant(VL, VS, n=None, tol=1e-8):
    """Largest deviation of the brute-force frame operator from ``m * I``.

    ``VL`` is ``n x n'`` with ``VL VL^T = I_n`` and ``VS`` is ``m x m'`` with
    ``VS VS^T = I_m``, ``m <= n``.
    """
    VL = np.asarray(VL, dtype=np.float64)
    VS = np.asarray(VS, dtype=np.float64)
    n = VL.shape[0] if n is None else int(n)
    m = VS.shape[0]
    if VL.shape[0] != n:
        raise ValueError(f"VL has {VL.shape[0]} rows, expected n={n}")
    if m > n:
        raise ValueError(f"need m <= n, got m={m}, n={n}")
    for name, M in (("VL", VL), ("VS", VS)):
        gram = M @ M.T
        if np.max(np.abs(gram - np.eye(M.shape[0]))) > tol:
            raise ValueError(f"{name} rows are not orthonormal")
    S = frame_operator(VL, VS)
    return float(np.max(np.abs(S - m * np.eye(n))))


def energy_concentration(C, p, r):
    """Fraction of coefficient energy in the top-left ``p x r`` block."""
    entries = C.entries if isinstance(C, CoeffMatrix) else np.asarray(C, dtype=np.float64)
    if p < 1 or r < 1 or p > entries.shape[0] or r > entries.shape[1]:
        raise ValueError(f"block {p} x {r} outside coefficient matrix {entries.shape}")
    total = C.total_energy if isinstance(C, CoeffMatrix) else float(np.sum(entries**2))
    if total == 0:
        return 0.0
    block = entries[:p, :r]
    return float(np.sum(block * block) / total)


def write_coefficients_csv(path, C):
    entries = C.entries if isinstance(C, CoeffMatrix) else np.asarray(C)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "value"])
        for i in range(entries.shape[0]):
            for j in range(entries.shape[1]):
                writer.writerow([i, j, repr(float(entries[i, j]))])
