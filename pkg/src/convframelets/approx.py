"""N-term approximation with convolution framelets and the PSNR metric."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .framelets import CoeffMatrix, analyze, synthesize
from .patch_core import as_signal, build_patch_matrix

__all__ = [
    "ApproxPlan",
    "energy_filtered",
    "selection_order",
    "nterm_approx",
    "approx_curve",
    "psnr",
    "write_curve_csv",
]

MODES = ("linear", "nonlinear")


@dataclass(frozen=True)
class ApproxPlan:
    """Keep ``terms`` coefficients chosen by ``mode``.

    Linear mode ranks coefficient ``(i, j)`` by ``|(1 - lambda_i) s_j|``, a
    fixed order that does not look at the coefficients themselves. Nonlinear
    mode ranks by ``|C_ij|``. Ties fall back to lexicographic ``(i, j)``.
    """

    mode: str
    terms: int

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if int(self.terms) != self.terms or self.terms < 0:
            raise ValueError(f"terms must be a non-negative integer, got {self.terms}")


def energy_filtered(F, v):
    """``s = ||F v||^2``, the patch energy passed by the local filter ``v``."""
    Fv = np.asarray(F, dtype=np.float64) @ np.asarray(v, dtype=np.float64)
    return float(Fv @ Fv)


def _filtered_energies(F, V):
    FV = np.asarray(F, dtype=np.float64) @ V
    return np.einsum("ij,ij->j", FV, FV)


def selection_order(C, mode, eigenvalues=None, energies=None):
    """Flat indices (row-major) of ``C`` from most to least important."""
    C = np.asarray(C, dtype=np.float64)
    if mode == "nonlinear":
        key = np.abs(C)
    elif mode == "linear":
        if eigenvalues is None or energies is None:
            raise ValueError("linear mode needs nonlocal eigenvalues and local energies")
        lam = np.asarray(eigenvalues, dtype=np.float64)
        s = np.asarray(energies, dtype=np.float64)
        if lam.shape != (C.shape[0],) or s.shape != (C.shape[1],):
            raise ValueError("eigenvalues/energies do not match the coefficient shape")
        key = np.abs(np.outer(1.0 - lam, s))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    # stable sort on the negated key keeps row-major order among ties
    return np.argsort(-key.ravel(), kind="stable")


def _vectors(basis):
    vectors = getattr(basis, "vectors", None)
    return np.asarray(basis if vectors is None else vectors, dtype=np.float64)


def nterm_approx(f, phi, V, plan, cfg):
    """Synthesise ``f`` from its ``plan.terms`` selected framelet coefficients.

    The signal is used as given; callers wanting the mean-subtracted convention
    subtract the mean first and add it back afterwards. Linear mode reads the
    eigenvalues from ``phi`` and computes ``s_j`` from the patch matrix of ``f``.
    """
    f = as_signal(f)
    C = analyze(f, phi, V, cfg)
    total = C.entries.size
    if plan.terms > total:
        raise ValueError(f"terms={plan.terms} exceeds the {total} available coefficients")
    order = _order_for(C, f, phi, V, cfg, plan.mode)
    return _synth_top(C, order, plan.terms, phi, V, cfg)


def _order_for(C, f, phi, V, cfg, mode):
    if mode == "nonlinear":
        return selection_order(C.entries, mode)
    lam = getattr(phi, "eigenvalues", None)
    if lam is None:
        raise ValueError("linear mode needs a nonlocal basis carrying eigenvalues")
    s = _filtered_energies(build_patch_matrix(f, cfg), _vectors(V))
    return selection_order(C.entries, mode, lam, s)


def _synth_top(C, order, n, phi, V, cfg):
    kept = np.zeros(C.entries.size)
    idx = order[:n]
    kept[idx] = C.entries.ravel()[idx]
    C_n = CoeffMatrix(kept.reshape(C.shape), C.signal_shape, C.total_energy)
    return synthesize(C_n, phi, V, cfg)


def approx_curve(f, phi, V, cfg, terms, peak=255.0, subtract_mean=True):
    """Rows ``(n, psnr_linear, psnr_nonlinear)`` for each ``n`` in ``terms``.

    Coefficients are computed once; with ``subtract_mean`` the mean pixel value
    is removed before analysis and restored after synthesis.
    """
    f = as_signal(f)
    mean = f.mean() if subtract_mean else 0.0
    g = f - mean
    C = analyze(g, phi, V, cfg)
    lin = _order_for(C, g, phi, V, cfg, "linear")
    non = _order_for(C, g, phi, V, cfg, "nonlinear")
    rows = []
    for n in terms:
        if not 0 <= n <= C.entries.size:
            raise ValueError(f"terms={n} out of range [0, {C.entries.size}]")
        a = _synth_top(C, lin, n, phi, V, cfg) + mean
        b = _synth_top(C, non, n, phi, V, cfg) + mean
        rows.append((int(n), psnr(f, a, peak), psnr(f, b, peak)))
    return rows


def psnr(f, fhat, peak=255.0):
    """``20 log10(peak) - 10 log10(MSE)`` in dB; ``inf`` for identical inputs.

    ``peak=None`` uses ``max|f|``, the convention for synthetic signals.
    """
    f = np.asarray(f, dtype=np.float64)
    fhat = np.asarray(fhat, dtype=np.float64)
    if f.shape != fhat.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {fhat.shape}")
    mse = float(np.mean((f - fhat) ** 2))
    if mse == 0.0:
        return math.inf
    if peak is None:
        peak = float(np.max(np.abs(f)))
    return 20.0 * math.log10(peak) - 10.0 * math.log10(mse)


def write_curve_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "psnr_linear", "psnr_nonlinear"])
        for n, a, b in rows:
            writer.writerow([n, repr(float(a)), repr(float(b))])
