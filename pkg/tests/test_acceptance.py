"""Acceptance suite: one check per criterion, each at its stated tolerance.

Every check appends a ``PASS``/``FAIL`` line to the terminal summary before
asserting, so a single run shows the state of all criteria at once.
"""

import os
import subprocess
import sys
import time

import numpy as np
import pytest

from convframelets.approx import approx_curve
from convframelets.bases import (
    build_patch_graph,
    complete_basis,
    dense_patch_graph,
    laplacian_eigenbasis,
    local_basis,
    normalized_laplacian,
)
from convframelets.embedding import embed, mds_embedding, optimal_local_basis
from convframelets.framelets import analyze, energy_concentration, synthesize, verify_frame_constant
from convframelets.ldmm import (
    LdmmParams,
    gamma_weights,
    ldmm_inpaint,
    rl_operator,
    rl_quadratic,
    rw_ldmm_inpaint,
    solve_graph_system,
)
from convframelets.patch_core import PatchConfig, build_patch_matrix
from convframelets.pgm import gen_mask, save_pgm
from conftest import ACCEPTANCE_LINES, desk_crop, load_image
from oracles import random_row_orthonormal

KINDS = ("svd", "dct", "haar", "random")
METHODS = {"ldmm": "none", "rw-svd": "svd", "rw-dct": "dct"}


def report(label, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def dense_spd_graph(rng, n):
    """Gaussian affinities with a spectrum bounded away from zero."""
    while True:
        X = rng.uniform(size=(n, 3))
        d2 = np.sum((X[:, None] - X[None]) ** 2, axis=-1)
        W = np.exp(-d2 / rng.uniform(0.01, 0.05))
        if np.linalg.eigvalsh(W)[0] > 0.05:
            return W


def _barbara_basis(p):
    f = load_image("barbara128.pgm")
    cfg = PatchConfig((4, 4))
    F = build_patch_matrix(f, cfg)
    g = build_patch_graph(F, 50, symmetric=True)
    return f, cfg, F, laplacian_eigenbasis(normalized_laplacian(g), p)


def test_c1_frame_exactness():
    rng = np.random.default_rng(1)
    with Timer() as t:
        frame_dev = 0.0
        for _ in range(20):
            n = int(rng.integers(2, 17))
            m = int(rng.integers(1, min(n, 8) + 1))
            VL = random_row_orthonormal(rng, n, n + int(rng.integers(0, 4)))
            VS = random_row_orthonormal(rng, m, m + int(rng.integers(0, 4)))
            frame_dev = max(frame_dev, verify_frame_constant(VL, VS))
        trip = 0.0
        for k in range(50):
            kind = KINDS[k % 4]
            if k % 2:
                shape = tuple(int(s) for s in rng.integers(4, 8, size=2))
                cfg = PatchConfig(((2, 2), (4, 2), (2, 4))[k % 3])
            else:
                shape = (int(rng.integers(16, 40)),)
                cfg = PatchConfig(((2,), (4,), (8,))[k % 3])
            f = rng.normal(size=shape)
            F = build_patch_matrix(f, cfg)
            g = dense_patch_graph(F, symmetric=True, nn_rank=min(20, F.shape[0] - 1))
            phi = laplacian_eigenbasis(normalized_laplacian(g), F.shape[0])
            V = local_basis(kind, cfg.shape, F, seed=k)
            trip = max(trip, float(np.max(np.abs(synthesize(analyze(f, phi, V, cfg), phi, V, cfg) - f))))
    ok = frame_dev < 1e-8 and trip < 1e-9 and t.seconds < 10
    report("C1 frame exactness", ok,
           f"frame dev {frame_dev:.2e} (<1e-8), round trip {trip:.2e} (<1e-9), {t.seconds:.1f}s (<10s)")
    assert ok


def test_c2_rl_identities():
    rng = np.random.default_rng(2)
    with Timer() as t:
        op_err = quad_err = 0.0
        for _ in range(20):
            n = int(rng.integers(5, 51))
            W = dense_spd_graph(rng, n)
            F = rng.normal(size=(n, 4))
            op_err = max(op_err, float(np.max(np.abs(
                rl_operator(W, route="direct") - rl_operator(W, route="spectral")))))
            # eigen expansion of the quadratic form, written out independently
            deg = W.sum(axis=1)
            dh = np.sqrt(deg)
            lam, phi = np.linalg.eigh(np.eye(n) - W / np.outer(dh, dh))
            coeff = (dh[:, None] * phi).T @ F
            ref = float(np.sum(lam / (1 - lam) * np.sum(coeff**2, axis=1)))
            quad_err = max(quad_err, abs(rl_quadratic(F, W) - ref))
    ok = op_err < 1e-8 and quad_err < 1e-8 and t.seconds < 5
    report("C2 R_L identities", ok,
           f"operator {op_err:.2e}, quadratic {quad_err:.2e} (<1e-8), {t.seconds:.1f}s (<5s)")
    assert ok


def _laplacian_parts(W):
    return np.diag(W.sum(axis=1)) - W, W


def _rw_objective(F, E, V, gamma, R, D, mu):
    FV = F @ V
    reg = sum(g * FV[:, j] @ R @ FV[:, j] for j, g in enumerate(gamma))
    diff = F - E
    return reg + mu * np.sum(diff * (D @ diff))


def test_c3_euler_lagrange():
    rng = np.random.default_rng(3)
    mu = 0.5
    with Timer() as t:
        rel = 0.0
        for _ in range(5):
            n, l = int(rng.integers(10, 31)), int(rng.integers(2, 6))
            lap, W = _laplacian_parts(dense_spd_graph(rng, n))
            D = np.diag(W.sum(axis=1))
            E = rng.normal(size=(n, l))
            pim = solve_graph_system(lap, W, 1.0, mu, mu * W @ E, tol=1e-12)
            dense = np.linalg.solve(rl_operator(W) + mu * D, mu * D @ E)
            rel = max(rel, float(np.linalg.norm(pim - dense) / np.linalg.norm(dense)))

        n, l = 12, 4
        lap, W = _laplacian_parts(dense_spd_graph(rng, n))
        D = np.diag(W.sum(axis=1))
        R = rl_operator(W)
        R = (R + R.T) / 2
        E = rng.normal(size=(n, l))
        V = np.linalg.qr(rng.normal(size=(l, l)))[0]
        gamma = np.r_[gamma_weights([3.0, 1.0]), np.ones(l - 2)]
        cols = [solve_graph_system(lap, W, g, mu, mu * W @ (E @ V[:, j]), tol=1e-13)
                for j, g in enumerate(gamma)]
        F = np.column_stack(cols) @ V.T
        h = 1e-5
        grad = np.zeros_like(F)
        for idx in np.ndindex(F.shape):
            step = np.zeros_like(F)
            step[idx] = h
            grad[idx] = (_rw_objective(F + step, E, V, gamma, R, D, mu)
                         - _rw_objective(F - step, E, V, gamma, R, D, mu)) / (2 * h)
        g_max = float(np.max(np.abs(grad)))
    ok = rel < 1e-6 and g_max < 1e-6 and t.seconds < 10
    report("C3 Euler-Lagrange", ok,
           f"PIM vs minimiser {rel:.2e} (<1e-6), rw gradient {g_max:.2e} (<1e-6), {t.seconds:.1f}s (<10s)")
    assert ok


def test_c4_exact_energy_concentration():
    rng = np.random.default_rng(4)
    with Timer() as t:
        n, l, p = 64, 8, 3
        A = np.linalg.qr(rng.normal(size=(l, p)))[0]
        X = (rng.normal(size=(n, p)) * [5.0, 2.0, 1.0]) @ A.T
        E = embed(X, X @ A @ rng.normal(size=(p, p)))
        B = optimal_local_basis(E)
        C = complete_basis(E.Phi_E).T @ X @ complete_basis(B.V_E)
        outside = C.copy()
        outside[:p, :p] = np.tril(outside[:p, :p], -1)
        frac = float(np.sum(outside**2) / np.sum(C**2))

        Y = rng.normal(size=(n, l)) @ rng.normal(size=(l, l))
        Y -= Y.mean(axis=1, keepdims=True)  # HY has rank l - 1
        M = mds_embedding(Y, l - 1)
        BM = optimal_local_basis(M)
        Vt = np.linalg.svd(M.target)[2]
        sign_err = float(np.max(np.abs(np.abs(Vt[: l - 1] @ BM.V_E) - np.eye(l - 1))))
        nnz = int(np.count_nonzero(np.abs(M.Phi_E.T @ M.target @ BM.V_E) > 1e-8))
    ok = frac < 1e-8 and sign_err < 1e-8 and nnz == l - 1 and t.seconds < 5
    report("C4 exact concentration", ok,
           f"mass outside triangle {frac:.2e} (<1e-8), MDS basis vs SVD {sign_err:.2e}, "
           f"{nnz} nonzeros (= {l - 1}), {t.seconds:.1f}s (<5s)")
    assert ok


def test_c5_energy_concentration_barbara():
    with Timer() as t:
        f, cfg, F, phi = _barbara_basis(16)

        def ratios(kind, seed=0):
            C = analyze(f, phi, local_basis(kind, (4, 4), F, seed=seed), cfg)
            return energy_concentration(C, 16, 16), energy_concentration(C, 16, 4)

        full_svd, lead_svd = ratios("svd")
        rand = [ratios("random", s) for s in range(5)]
        lead_rand = float(np.median([r[1] for r in rand]))
        # a 16 x 16 block with l = 16 spans every local direction, so any
        # orthonormal V yields the same ratio; compactness shows in the leading columns
        spread = max(abs(r[0] - full_svd) for r in rand)
    ok = lead_svd > lead_rand and t.seconds < 120
    report("C5 energy concentration", ok,
           f"16x4 block SVD {lead_svd:.4f} > random median {lead_rand:.4f}; "
           f"16x16 block equal for all V ({full_svd:.6f}, spread {spread:.1e}), {t.seconds:.1f}s (<120s)")
    assert ok


def test_c6_nonlinear_beats_linear():
    with Timer() as t:
        f = load_image("barbara128.pgm")
        cfg = PatchConfig((4, 4))
        F = build_patch_matrix(f - f.mean(), cfg)
        g = build_patch_graph(F, 50, symmetric=True)
        phi = laplacian_eigenbasis(normalized_laplacian(g), 200)
        rows = {}
        for kind in ("svd", "haar", "dct"):
            V = local_basis(kind, cfg.shape, F)
            (_, lin, non), = approx_curve(f, phi, V, cfg, [8])
            rows[kind] = (lin, non)
    ok = all(non >= lin for lin, non in rows.values()) and t.seconds < 180
    detail = ", ".join(f"{k} {non:.2f}>={lin:.2f}" for k, (lin, non) in rows.items())
    report("C6 approximation ordering", ok, f"n=8 nonlinear vs linear dB: {detail}, {t.seconds:.1f}s (<180s)")
    assert ok


def _inpaint_all(f, mask, patch, iters):
    out = {}
    for name, kind in METHODS.items():
        params = LdmmParams(patch=PatchConfig(patch), iters=iters, local_kind=kind)
        run = ldmm_inpaint if kind == "none" else rw_ldmm_inpaint
        out[name] = run(f, mask, params, truth=f).psnr_trace[-1]
    return out


def _ordered(scores):
    return scores["rw-svd"] > scores["ldmm"] and scores["rw-dct"] > scores["ldmm"]


def test_c7_inpainting_ordering_desk():
    with Timer() as t:
        results = {}
        for key in ("barbara", "camera", "astronaut"):
            f = desk_crop(key)
            results[key] = _inpaint_all(f, gen_mask(f.shape, 0.1, 1), (4, 4), 50)
    ok = all(_ordered(s) for s in results.values()) and t.seconds < 600
    detail = "; ".join(
        f"{k} ldmm {s['ldmm']:.2f} svd {s['rw-svd']:.2f} dct {s['rw-dct']:.2f}" for k, s in results.items()
    )
    report("C7 inpainting ordering (96x96, 4x4, 50 it)", ok, f"{detail}; {t.seconds:.0f}s (<600s)")
    assert ok


# reference 10% subsampling scores (no symmetrisation) for the stretch comparison
REFERENCE_10PCT = {"barbara": {"ldmm": 24.75, "rw-svd": 25.61, "rw-dct": 25.71}}


@pytest.mark.slow
@pytest.mark.skipif(os.environ.get("CONVFRAMELETS_FULL") != "1",
                    reason="full-scale run; set CONVFRAMELETS_FULL=1")
def test_c7_inpainting_ordering_full():
    with Timer() as t:
        results = {}
        for key in ("barbara", "camera", "astronaut"):
            f = load_image(f"{key}256.pgm")
            results[key] = _inpaint_all(f, gen_mask(f.shape, 0.1, 1), (10, 10), 100)
    ok = all(_ordered(s) for s in results.values())
    detail = "; ".join(
        f"{k} ldmm {s['ldmm']:.2f} svd {s['rw-svd']:.2f} dct {s['rw-dct']:.2f}" for k, s in results.items()
    )
    report("C7 inpainting ordering (256x256, 10x10, 100 it)", ok, f"{detail}; {t.seconds:.0f}s")
    for key, ref in REFERENCE_10PCT.items():
        gaps = {m: results[key][m] - v for m, v in ref.items()}
        within = all(abs(d) <= 1.5 for d in gaps.values())
        ACCEPTANCE_LINES.append(
            f"{'INFO':4}  C7 stretch (non-gating) {key}: "
            + ", ".join(f"{m} {d:+.2f} dB" for m, d in gaps.items())
            + (" within" if within else " outside") + " +-1.5 dB"
        )
    assert ok


def test_c8_cli_determinism(tmp_path):
    src = tmp_path / "crop.pgm"
    save_pgm(src, desk_crop("barbara")[:48, :48])
    outputs = {}
    with Timer() as t:
        for method in ("ldmm", "rwldmm-svd", "rwldmm-dct"):
            pair = []
            for run in ("a", "b"):
                out = tmp_path / f"{method}-{run}.pgm"
                cmd = [sys.executable, "-m", "convframelets.cli", "inpaint", "--image", str(src),
                       "--rate", "0.2", "--seed", "3", "--method", method, "--iters", "4",
                       "--patch", "4x4", "--knn", "30", "--out", str(out)]
                subprocess.run(cmd, check=True, capture_output=True)
                pair.append(out.read_bytes())
            outputs[method] = pair[0] == pair[1]
    ok = all(outputs.values())
    report("C8 determinism", ok,
           ", ".join(f"{m} {'identical' if same else 'DIFFERS'}" for m, same in outputs.items())
           + f" across separate processes, {t.seconds:.1f}s")
    assert ok
