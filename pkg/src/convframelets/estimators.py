"""scikit-learn style wrappers around the framelet and inpainting routines.

An image (or 1-D signal) plays the role of ``X``; the fitted state is the pair
of bases, which ``transform`` applies to any signal of the same shape.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .approx import ApproxPlan, nterm_approx
from .bases import (
    build_patch_graph,
    dense_patch_graph,
    laplacian_eigenbasis,
    local_basis,
    normalized_laplacian,
    svd_nonlocal_basis,
)
from .framelets import CoeffMatrix, analyze, synthesize
from .ldmm import LdmmParams, ldmm_inpaint, rw_ldmm_inpaint
from .patch_core import PatchConfig, build_patch_matrix

__all__ = ["ConvolutionFramelet", "LDMMInpainter"]


def _signal(X):
    X = check_array(X, ensure_2d=False, dtype=np.float64)
    if X.ndim not in (1, 2):
        raise ValueError(f"expected a 1-D signal or 2-D image, got shape {X.shape}")
    return X


def _cfg(patch):
    return patch if isinstance(patch, PatchConfig) else (
        PatchConfig.parse(patch) if isinstance(patch, str) else PatchConfig(patch)
    )


class ConvolutionFramelet(TransformerMixin, BaseEstimator):
    """Learn a local/nonlocal basis pair from a signal and expand in its framelets.

    Parameters
    ----------
    patch : str or tuple
        Patch shape, e.g. ``"4x4"`` or ``(8,)``.
    local : {"svd", "dct", "haar", "random"}
    nonlocal_basis : {"le", "svd"}
        Graph Laplacian eigenvectors or left singular vectors of the patch matrix.
    n_nonlocal : int or None
        Number of nonlocal vectors; ``None`` keeps all ``N`` (dense graph only).
    knn : int or None
        Neighbours of the sparse patch graph; ``None`` builds the dense graph.
    symmetric : bool
        Symmetrised bandwidths in the graph weights.
    """

    def __init__(self, patch="4x4", local="svd", nonlocal_basis="le", n_nonlocal=None,
                 knn=None, symmetric=True, seed=0):
        self.patch = patch
        self.local = local
        self.nonlocal_basis = nonlocal_basis
        self.n_nonlocal = n_nonlocal
        self.knn = knn
        self.symmetric = symmetric
        self.seed = seed

    def fit(self, X, y=None):
        f = _signal(X)
        cfg = _cfg(self.patch)
        F = build_patch_matrix(f, cfg)
        n = F.shape[0]
        p = n if self.n_nonlocal is None else int(self.n_nonlocal)
        self.local_basis_ = local_basis(self.local, cfg.shape, F, seed=self.seed)
        if self.nonlocal_basis == "le":
            g = (dense_patch_graph(F, self.symmetric) if self.knn is None
                 else build_patch_graph(F, self.knn, self.symmetric))
            self.nonlocal_basis_ = laplacian_eigenbasis(normalized_laplacian(g), p, seed=self.seed)
        elif self.nonlocal_basis == "svd":
            self.nonlocal_basis_ = svd_nonlocal_basis(F, p)
        else:
            raise ValueError(f"unknown nonlocal_basis {self.nonlocal_basis!r}")
        self.patch_config_ = cfg
        self.signal_shape_ = f.shape
        return self

    def _check_shape(self, f):
        if f.shape != self.signal_shape_:
            raise ValueError(f"expected shape {self.signal_shape_}, got {f.shape}")

    def transform(self, X):
        """Coefficient matrix ``Phi^T F V``."""
        check_is_fitted(self, "local_basis_")
        f = _signal(X)
        self._check_shape(f)
        return analyze(f, self.nonlocal_basis_, self.local_basis_, self.patch_config_).entries

    def inverse_transform(self, C):
        check_is_fitted(self, "local_basis_")
        C = np.asarray(C, dtype=np.float64)
        coeffs = CoeffMatrix(C, self.signal_shape_, float(np.sum(C * C)))
        return synthesize(coeffs, self.nonlocal_basis_, self.local_basis_, self.patch_config_)

    def approximate(self, X, terms, mode="nonlinear"):
        """Mean-subtracted ``terms``-term approximation of ``X``."""
        check_is_fitted(self, "local_basis_")
        f = _signal(X)
        self._check_shape(f)
        mean = f.mean()
        plan = ApproxPlan(mode, terms)
        return nterm_approx(f - mean, self.nonlocal_basis_, self.local_basis_, plan,
                            self.patch_config_) + mean


class LDMMInpainter(BaseEstimator):
    """Inpaint an image from the pixels flagged in ``mask``.

    ``method`` is ``"ldmm"``, ``"rwldmm-svd"`` or ``"rwldmm-dct"``. After
    :meth:`fit`, ``image_`` holds the reconstruction and ``psnr_trace_`` the
    per-iteration PSNR when a ground truth was given.
    """

    _KINDS = {"ldmm": "none", "rwldmm-svd": "svd", "rwldmm-dct": "dct"}

    def __init__(self, method="rwldmm-svd", patch="10x10", mu=0.5, iters=100, knn=50,
                 symmetric=False, r_frac=0.2, solver_tol=1e-6, seed=0):
        self.method = method
        self.patch = patch
        self.mu = mu
        self.iters = iters
        self.knn = knn
        self.symmetric = symmetric
        self.r_frac = r_frac
        self.solver_tol = solver_tol
        self.seed = seed

    def _params(self):
        if self.method not in self._KINDS:
            raise ValueError(f"method must be one of {tuple(self._KINDS)}, got {self.method!r}")
        return LdmmParams(mu=self.mu, iters=self.iters, knn=self.knn, symmetric=self.symmetric,
                          patch=_cfg(self.patch), local_kind=self._KINDS[self.method],
                          r_frac=self.r_frac, solver_tol=self.solver_tol, seed=self.seed)

    def fit(self, X, mask, truth=None):
        f = check_array(X, dtype=np.float64)
        mask = np.asarray(mask, dtype=bool)
        params = self._params()
        run = ldmm_inpaint if params.local_kind == "none" else rw_ldmm_inpaint
        result = run(f, mask, params, truth=truth)
        self.image_ = result.image
        self.psnr_trace_ = result.psnr_trace
        self.change_trace_ = result.change_trace
        self.n_iter_ = len(result.change_trace)
        return self

    def fit_transform(self, X, mask, truth=None):
        return self.fit(X, mask, truth).image_
