"""Convolution framelets, graph-spectral patch bases and (reweighted) LDMM inpainting."""

from .approx import ApproxPlan, approx_curve, energy_filtered, nterm_approx, psnr
from .bases import (
    EigenSolverError,
    LocalBasis,
    NonlocalBasis,
    PatchGraph,
    build_patch_graph,
    dct_basis,
    dense_patch_graph,
    haar_basis,
    laplacian_eigenbasis,
    local_basis,
    normalized_laplacian,
    random_orthonormal_basis,
    svd_local_basis,
    svd_nonlocal_basis,
)
from .embedding import mds_embedding, optimal_local_basis
from .estimators import ConvolutionFramelet, LDMMInpainter
from .framelets import (
    CoeffMatrix,
    analyze,
    energy_concentration,
    framelet_atom,
    synthesize,
    verify_frame_constant,
)
from .ldmm import LdmmParams, SolverError, gamma_weights, ldmm_inpaint, rw_ldmm_inpaint
from .patch_core import PatchConfig, average_antidiagonals, build_patch_matrix, circular_convolve, flip
from .pgm import gen_mask, load_pgm, save_pgm

__version__ = "0.1.0"
