"""Optimal local bases for a given nonlocal embedding.

An embedding maps the rows of a data matrix ``X`` (``N x l``) to ``Xt``
(``N x p``) with mutually orthogonal columns, ``Xt = Phi_E diag(c)``. The
local basis solves

    min_{R upper triangular, V^T V = I_p} || Xt R V^T - (X + B) ||_F^2

where ``B`` is an optional bias (centering) matrix. Paired with ``Phi_E``, the
resulting ``V`` concentrates the coefficients ``Phi^T X V`` on the upper
triangle of the leading ``p x p`` block.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bases import fix_signs

__all__ = [
    "EmbeddedData",
    "ReconstructionBasis",
    "orthogonal_normalization",
    "embed",
    "mds_embedding",
    "optimal_local_basis",
    "reconstruction_residual",
    "upper_triangle_energy",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbeddedData:
    X: np.ndarray
    Xt: np.ndarray
    Phi_E: np.ndarray
    C_E: np.ndarray
    bias: np.ndarray | None = None

    @property
    def p(self):
        return self.Xt.shape[1]

    @property
    def target(self):
        return self.X if self.bias is None else self.X + self.bias


@dataclass
class ReconstructionBasis:
    V_E: np.ndarray
    R_E: np.ndarray
    residual: float
    n_iter: int = 0
    converged: bool = True
    history: list = field(default_factory=list)


def orthogonal_normalization(Xt_raw, rtol=1e-10):
    """Rotate embedding coordinates so that their columns are orthogonal.

    Returns ``Xt_raw @ O`` where ``O`` holds the right singular vectors.
    Directions with negligible singular value are dropped with a warning.
    """
    Xt_raw = np.asarray(Xt_raw, dtype=np.float64)
    _, s, Ot = np.linalg.svd(Xt_raw, full_matrices=False)
    keep = s > rtol * max(s[0], np.finfo(float).tiny) if s.size else np.zeros(0, bool)
    if not np.all(keep):
        warnings.warn(
            f"embedding is rank deficient; dropping {np.count_nonzero(~keep)} coordinate(s)",
            RuntimeWarning,
            stacklevel=2,
        )
    return Xt_raw @ Ot[keep].T


def embed(X, Xt, bias=None):
    """Package data and (orthogonalised) embedding coordinates."""
    X = np.asarray(X, dtype=np.float64)
    Xt = orthogonal_normalization(Xt)
    c = np.linalg.norm(Xt, axis=0)
    return EmbeddedData(X, Xt, Xt / c, c, bias)


def mds_embedding(X, p):
    """Classical MDS coordinates ``U_p S_p`` from the SVD of the centred data.

    The bias is the centering correction ``HX - X``.
    """
    X = np.asarray(X, dtype=np.float64)
    n, ell = X.shape
    if not 1 <= p <= min(n - 1, ell):
        raise ValueError(f"p must lie in [1, {min(n - 1, ell)}], got {p}")
    HX = X - X.mean(axis=0)
    U, s, _ = np.linalg.svd(HX, full_matrices=False)
    if s[p - 1] <= 1e-12 * max(s[0], 1.0):
        raise ValueError(f"p={p} exceeds the rank of the centred data")
    U = fix_signs(U[:, :p])
    return EmbeddedData(X, U * s[:p], U, s[:p].copy(), HX - X)


def reconstruction_residual(E, R, V):
    return float(np.linalg.norm(E.Xt @ R @ V.T - E.target) ** 2)


def _best_r(E, V):
    M = (E.Phi_E.T @ E.target @ V) / E.C_E[:, None]
    return np.triu(M)


def _best_v(E, R):
    U, _, Wt = np.linalg.svd(E.target.T @ E.Xt @ R, full_matrices=False)
    return U @ Wt


def optimal_local_basis(E, max_iter=500, tol=1e-10):
    """Alternate closed-form ``R`` and Procrustes ``V`` updates.

    Initialised at the top right singular vectors of the target, rotated within
    their span (RQ decomposition) so that the first ``R`` step is exact when the
    data lie on a linear subspace. Each half-step is an exact minimiser, so the
    residual never increases.
    """
    target = E.target
    p = E.p
    _, _, Vt = np.linalg.svd(target, full_matrices=False)
    V = Vt[:p].T
    M = (E.Phi_E.T @ target @ V) / E.C_E[:, None]
    _, Q = scipy.linalg.rq(M)
    V = V @ Q.T
    R = _best_r(E, V)
    res = reconstruction_residual(E, R, V)
    history = [res]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        V = _best_v(E, R)
        R = _best_r(E, V)
        new = reconstruction_residual(E, R, V)
        history.append(new)
        if res - new < tol * max(1.0, res):
            res = new
            converged = True
            break
        res = new
    if not converged:
        logger.warning("optimal_local_basis stopped after %d iterations, residual %.3e", it, res)
    return ReconstructionBasis(V, R, res, it, converged, history)


def upper_triangle_energy(C, p):
    """Sum of ``C_ij^2`` over ``i <= j <= p`` (1-based)."""
    C = np.asarray(getattr(C, "entries", C), dtype=np.float64)
    block = C[:p, :p]
    return float(np.sum(np.triu(block) ** 2))
