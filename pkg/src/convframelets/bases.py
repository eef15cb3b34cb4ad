"""Local patch bases and nonlocal graph-spectral bases."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import scipy.spatial
from sklearn.neighbors import NearestNeighbors

__all__ = [
    "LocalBasis",
    "NonlocalBasis",
    "PatchGraph",
    "EigenSolverError",
    "dct_basis",
    "haar_basis",
    "random_orthonormal_basis",
    "svd_local_basis",
    "local_basis",
    "build_patch_graph",
    "dense_patch_graph",
    "normalized_laplacian",
    "laplacian_eigenbasis",
    "svd_nonlocal_basis",
    "identity_nonlocal_basis",
    "complete_basis",
    "fix_signs",
    "write_eigenvalues_csv",
]

DENSE_LIMIT = 2000


class EigenSolverError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class LocalBasis:
    """Orthonormal columns ``vectors`` (``l x r``) spanning patch space."""

    vectors: np.ndarray
    kind: str
    spectrum: np.ndarray | None = None

    @property
    def size(self):
        return self.vectors.shape[1]

    def truncate(self, r):
        spec = None if self.spectrum is None else self.spectrum[:r]
        return LocalBasis(self.vectors[:, :r], self.kind, spec)


@dataclass(frozen=True)
class NonlocalBasis:
    """Orthonormal columns ``vectors`` (``N x p``) on the set of patches."""

    vectors: np.ndarray
    source: str
    eigenvalues: np.ndarray | None = None

    @property
    def size(self):
        return self.vectors.shape[1]


@dataclass(frozen=True)
class PatchGraph:
    """Sparse Gaussian affinity between patches.

    ``W`` is CSR with the self-loop ``W_ii = 1`` on the diagonal, ``degree`` its
    row sums and ``eps`` the per-patch bandwidths.
    """

    W: sp.csr_matrix
    degree: np.ndarray
    eps: np.ndarray
    knn: int
    symmetric: bool
    nn_rank: int = 20
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.W.shape[0]

    def laplacian_parts(self):
        """Return ``(D - W, W)`` as CSR matrices."""
        return (sp.diags(self.degree) - self.W).tocsr(), self.W


def fix_signs(M):
    """Flip columns so the largest-magnitude entry of each is positive."""
    M = np.array(M, dtype=np.float64, copy=True)
    if M.size == 0:
        return M
    idx = np.argmax(np.abs(M), axis=0)
    signs = np.sign(M[idx, np.arange(M.shape[1])])
    signs[signs == 0] = 1.0
    return M * signs


def _shape_tuple(shape):
    return tuple(int(s) for s in np.atleast_1d(shape))


def _dct1(n):
    # columns are the orthonormal DCT-II atoms
    return scipy.fft.dct(np.eye(n), norm="ortho", axis=0).T


def _haar1(n):
    if n < 1 or n & (n - 1):
        raise ValueError(f"Haar basis needs a power-of-two side, got {n}")
    H = np.ones((1, 1))
    while H.shape[0] < n:
        k = H.shape[0]
        top = np.kron(H, [1.0, 1.0])
        bottom = np.kron(np.eye(k), [1.0, -1.0])
        H = np.vstack([top, bottom]) / np.sqrt(2.0)
    return H.T


def _kron_basis(shape, one_d):
    shape = _shape_tuple(shape)
    V = one_d(shape[0])
    for s in shape[1:]:
        V = np.kron(V, one_d(s))
    return V


def dct_basis(shape):
    """Type-II orthonormal DCT; 2-D patches use the Kronecker product."""
    return LocalBasis(_kron_basis(shape, _dct1), "dct")


def haar_basis(shape):
    """Full-depth orthonormal Haar basis, coarse to fine."""
    return LocalBasis(_kron_basis(shape, _haar1), "haar")


def random_orthonormal_basis(shape, seed=0):
    """Orthonormal factor of a seeded Gaussian matrix."""
    ell = int(np.prod(_shape_tuple(shape)))
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((ell, ell)))
    Q = Q * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))
    return LocalBasis(Q, "random")


def svd_local_basis(F, r=None):
    """Top-``r`` right singular vectors of the patch matrix, with singular values."""
    F = np.asarray(F, dtype=np.float64)
    ell = F.shape[1]
    r = ell if r is None else int(r)
    if not 1 <= r <= ell:
        raise ValueError(f"r must lie in [1, {ell}], got {r}")
    _, s, Vt = np.linalg.svd(F, full_matrices=False)
    return LocalBasis(fix_signs(Vt[:r].T), "patch-svd", s[:r].copy())


def local_basis(kind, shape, F=None, seed=0):
    """Dispatch on ``kind`` in ``{dct, haar, random, svd}``."""
    if kind == "dct":
        return dct_basis(shape)
    if kind == "haar":
        return haar_basis(shape)
    if kind == "random":
        return random_orthonormal_basis(shape, seed)
    if kind in ("svd", "patch-svd"):
        if F is None:
            raise ValueError("svd local basis needs the patch matrix")
        return svd_local_basis(F)
    raise ValueError(f"unknown local basis kind {kind!r}")


def _knn_candidates_brute(F, k, chunk=1024):
    n = F.shape[0]
    # distances are translation invariant; centring limits cancellation
    G = F - F.mean(axis=0)
    sq = np.einsum("ij,ij->i", G, G)
    nbrs = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d2 = G[start:stop] @ G.T
        d2 *= -2.0
        d2 += sq
        d2 += sq[start:stop, None]
        rows = np.arange(stop - start)
        d2[rows, rows + start] = -np.inf
        nbrs[start:stop] = np.argpartition(d2, k - 1, axis=1)[:, :k]
    return nbrs


def _ensure_self(nbrs):
    # duplicated patches can push self out of its own list
    n = nbrs.shape[0]
    missing = ~np.any(nbrs == np.arange(n)[:, None], axis=1)
    nbrs[missing, -1] = np.flatnonzero(missing)
    return nbrs


def _knn_candidates_sklearn(F, k):
    nn = NearestNeighbors(n_neighbors=k, algorithm="brute", metric="sqeuclidean")
    _, nbrs = nn.fit(F).kneighbors(F)
    return _ensure_self(np.asarray(nbrs, dtype=np.int64))


def _knn_candidates_tree(F, k):
    _, nbrs = scipy.spatial.cKDTree(F).query(F, k=k)
    return _ensure_self(np.asarray(nbrs, dtype=np.int64).reshape(F.shape[0], k))


def _knn_search(F, k, method="auto"):
    """Exact k nearest rows (self first), sorted by (distance, index).

    ``auto`` uses scikit-learn's tiled brute-force search. ``brute`` (own
    blocked distance matrices) and ``tree`` (k-d tree) are independent routes
    kept for cross-checking. Among exactly tied distances the routes may pick
    different members.
    """
    n = F.shape[0]
    if method == "auto":
        method = "sklearn"
    if method == "sklearn":
        nbrs = _knn_candidates_sklearn(F, k)
    elif method == "tree":
        nbrs = _knn_candidates_tree(F, k)
    elif method == "brute":
        nbrs = _knn_candidates_brute(F, k)
    else:
        raise ValueError(f"unknown knn method {method!r}")
    # exact distances on the selected pairs so duplicates give exactly 0
    diff = F[nbrs] - F[:, None, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    is_self = nbrs == np.arange(n)[:, None]
    order = np.lexsort((nbrs, dist2, ~is_self), axis=1)
    return np.take_along_axis(nbrs, order, 1), np.take_along_axis(dist2, order, 1)


def _bandwidths(dist2, nn_rank):
    eps = dist2[:, nn_rank].copy()
    bad = eps <= 0
    if np.any(bad):
        for i in np.flatnonzero(bad):
            pos = dist2[i][dist2[i] > 0]
            eps[i] = pos.min() if pos.size else 1.0
    return eps


def _graph_from_neighbors(n, nbrs, dist2, eps, symmetric, knn, nn_rank):
    rows = np.repeat(np.arange(n), nbrs.shape[1])
    cols = nbrs.ravel()
    d2 = dist2.ravel()
    if symmetric:
        rows, cols, d2 = (
            np.concatenate([rows, cols]),
            np.concatenate([cols, rows]),
            np.concatenate([d2, d2]),
        )
        keys, first = np.unique(rows * n + cols, return_index=True)
        rows, cols, d2 = keys // n, keys % n, d2[first]
        vals = np.exp(-d2 / np.sqrt(eps[rows] * eps[cols]))
    else:
        vals = np.exp(-d2 / eps[rows])
    W = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    W.sort_indices()
    degree = np.asarray(W.sum(axis=1)).ravel()
    return PatchGraph(W, degree, eps, knn, symmetric, nn_rank)


def build_patch_graph(F, k=50, symmetric=False, nn_rank=20):
    """k-NN Gaussian affinity with self-tuning bandwidth.

    ``eps_i`` is the squared distance from patch ``i`` to its ``nn_rank``-th
    nearest neighbour (self excluded). Rows keep their ``k`` nearest patches,
    self included. With ``symmetric`` the support is the union of neighbour
    sets and the bandwidth is ``sqrt(eps_i * eps_j)``.
    """
    F = np.asarray(F, dtype=np.float64)
    n = F.shape[0]
    if not nn_rank < k < n:
        raise ValueError(f"need nn_rank < k < N, got nn_rank={nn_rank}, k={k}, N={n}")
    return _build_graph(F, k, symmetric, nn_rank)


def _build_graph(F, k, symmetric, nn_rank):
    nbrs, dist2 = _knn_search(F, k)
    eps = _bandwidths(dist2, nn_rank)
    return _graph_from_neighbors(F.shape[0], nbrs, dist2, eps, symmetric, k, nn_rank)


def dense_patch_graph(F, symmetric=True, nn_rank=20):
    """Fully connected variant of :func:`build_patch_graph` (small N only)."""
    F = np.asarray(F, dtype=np.float64)
    n = F.shape[0]
    if n > DENSE_LIMIT:
        raise ValueError(f"dense graph limited to N <= {DENSE_LIMIT}")
    return _build_graph(F, n, symmetric, min(nn_rank, n - 1))


def normalized_laplacian(g):
    """``L = I - D^{-1/2} W D^{-1/2}`` as a sparse matrix."""
    if np.any(g.degree <= 0):
        raise ValueError("graph has a vertex with zero degree")
    dinv = sp.diags(1.0 / np.sqrt(g.degree))
    return (sp.identity(g.n, format="csr") - dinv @ g.W @ dinv).tocsr()


def laplacian_eigenbasis(L, p, tol=1e-8, maxiter=5000, seed=0):
    """The ``p`` smallest eigenpairs of ``L`` (symmetrised), ascending."""
    n = L.shape[0]
    if not 1 <= p <= n:
        raise ValueError(f"p must lie in [1, {n}], got {p}")
    if sp.issparse(L):
        Ls = ((L + L.T) * 0.5).tocsr()
    else:
        L = np.asarray(L, dtype=np.float64)
        Ls = (L + L.T) * 0.5
    if n <= DENSE_LIMIT or p >= n - 1:
        dense = Ls.toarray() if sp.issparse(Ls) else Ls
        lam, vecs = scipy.linalg.eigh(dense, subset_by_index=[0, p - 1])
    else:
        # largest eigenvalues of I - L converge much faster than smallest of L
        M = (sp.identity(n, format="csr") - Ls).tocsr()
        v0 = np.random.default_rng(seed).standard_normal(n)
        try:
            mu, vecs = spla.eigsh(M, k=p, which="LA", tol=tol, maxiter=maxiter, v0=v0)
        except spla.ArpackNoConvergence as exc:
            lam = 1.0 - exc.eigenvalues
            res = np.linalg.norm(Ls @ exc.eigenvectors - exc.eigenvectors * lam, axis=0)
            raise EigenSolverError("eigensolver did not converge", float(res.max(initial=np.inf)))
        lam = 1.0 - mu
        order = np.argsort(lam, kind="stable")
        lam, vecs = lam[order], vecs[:, order]
    vecs = fix_signs(vecs)
    res = np.linalg.norm(Ls @ vecs - vecs * lam, axis=0)
    if np.any(res > 1e-6 * np.linalg.norm(vecs, axis=0) + 1e-10):
        raise EigenSolverError("eigenpair residual check failed", float(res.max()))
    return NonlocalBasis(vecs, "laplacian", lam)


def svd_nonlocal_basis(F, p=None):
    """Left singular vectors of ``F`` (at most ``l`` of them)."""
    U, s, _ = np.linalg.svd(np.asarray(F, dtype=np.float64), full_matrices=False)
    p = U.shape[1] if p is None else min(int(p), U.shape[1])
    return NonlocalBasis(fix_signs(U[:, :p]), "patch-svd-left")


def identity_nonlocal_basis(n):
    return NonlocalBasis(np.eye(n), "identity")


def complete_basis(Q):
    """Extend orthonormal columns ``Q`` (``n x p``) to an ``n x n`` orthogonal matrix."""
    Q = np.asarray(Q, dtype=np.float64)
    if Q.shape[1] >= Q.shape[0]:
        return Q.copy()
    rest = scipy.linalg.null_space(Q.T)
    return np.hstack([Q, fix_signs(rest)])


def write_eigenvalues_csv(path, eigenvalues):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "lambda"])
        for i, lam in enumerate(eigenvalues):
            writer.writerow([i, repr(float(lam))])
