"""Command-line front end: ``convframelets {decompose,approx,inpaint,graph}``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import approx as approx_mod
from .bases import (
    EigenSolverError,
    build_patch_graph,
    laplacian_eigenbasis,
    local_basis,
    normalized_laplacian,
    svd_nonlocal_basis,
    write_eigenvalues_csv,
)
from .framelets import analyze, write_coefficients_csv
from .ldmm import LdmmParams, SolverError, ldmm_inpaint, rw_ldmm_inpaint, write_psnr_trace
from .patch_core import PatchConfig, build_patch_matrix
from .pgm import PGMError, gen_mask, load_mask, load_pgm, save_pgm

log = logging.getLogger("convframelets")

METHODS = {"ldmm": "none", "rwldmm-svd": "svd", "rwldmm-dct": "dct"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _patch(text):
    try:
        return PatchConfig.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid patch {text!r}, expected e.g. 4x4") from exc


def _rate(text):
    r = float(text)
    if not 0.0 < r <= 1.0:
        raise argparse.ArgumentTypeError("rate must lie in (0, 1]")
    return r


def _flag01(text):
    if text not in ("0", "1"):
        raise argparse.ArgumentTypeError("expected 0 or 1")
    return text == "1"


def _graph_basis(F, p, knn, symmetric):
    g = build_patch_graph(F, knn, symmetric)
    return laplacian_eigenbasis(normalized_laplacian(g), p)


def cmd_decompose(args):
    f = load_pgm(args.image)
    F = build_patch_matrix(f, args.patch)
    V = local_basis(args.local, args.patch.shape, F, seed=args.seed)
    if args.nonlocal_kind == "le":
        phi = _graph_basis(F, args.p, args.knn, args.sym_laplacian)
    else:
        phi = svd_nonlocal_basis(F, args.p)
    C = analyze(f, phi, V, args.patch)
    write_coefficients_csv(args.out, C)
    log.info("wrote %d x %d coefficients to %s", *C.shape, args.out)


def cmd_approx(args):
    f = load_pgm(args.image)
    F = build_patch_matrix(f - f.mean(), args.patch)
    V = local_basis(args.local, args.patch.shape, F, seed=args.seed)
    phi = _graph_basis(F, args.p, args.knn, args.sym_laplacian)
    if args.terms > phi.size * V.size:
        raise ValueError(f"--terms {args.terms} exceeds {phi.size * V.size} coefficients")
    rows = approx_mod.approx_curve(f, phi, V, args.patch, range(1, args.terms + 1))
    plan = approx_mod.ApproxPlan(args.mode, args.terms)
    mean = f.mean()
    out = approx_mod.nterm_approx(f - mean, phi, V, plan, args.patch) + mean
    save_pgm(args.out, out)
    if args.csv:
        approx_mod.write_curve_csv(args.csv, rows)
    value = approx_mod.psnr(f, out)
    print(f"{args.mode} {args.terms}-term PSNR: {value:.4f} dB")


def cmd_inpaint(args):
    f = load_pgm(args.image)
    if args.mask is not None and args.rate is not None:
        raise ValueError("--mask and --rate are mutually exclusive")
    if args.mask is None and args.rate is None:
        raise ValueError("one of --mask or --rate is required")
    mask = load_mask(args.mask) if args.mask else gen_mask(f.shape, args.rate, args.seed)
    if mask.shape != f.shape:
        raise ValueError(f"mask shape {mask.shape} differs from image shape {f.shape}")
    truth = load_pgm(args.truth) if args.truth else None
    params = LdmmParams(
        mu=args.mu,
        iters=args.iters,
        knn=args.knn,
        symmetric=args.sym_laplacian,
        patch=args.patch,
        local_kind=METHODS[args.method],
        r_frac=args.r_frac,
        seed=args.seed,
    )

    def report(state, _f):
        if state.psnr_trace:
            log.info("iter %d  psnr %.4f", state.iteration, state.psnr_trace[-1])
        else:
            log.info("iter %d  change %.3e", state.iteration, state.change_trace[-1])

    run = ldmm_inpaint if params.local_kind == "none" else rw_ldmm_inpaint
    result = run(f, mask, params, truth=truth, callback=report)
    save_pgm(args.out, result.image)
    if args.psnr_log:
        write_psnr_trace(args.psnr_log, result)
    if result.psnr_trace:
        print(f"final PSNR: {result.psnr_trace[-1]:.4f} dB")


def cmd_graph(args):
    f = load_pgm(args.image)
    F = build_patch_matrix(f, args.patch)
    phi = _graph_basis(F, args.eigs, args.knn, args.sym_laplacian)
    write_eigenvalues_csv(args.out, phi.eigenvalues)


def build_parser():
    parser = _Parser(prog="convframelets", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, patch_default=None):
        p.add_argument("--image", required=True)
        p.add_argument("--patch", type=_patch, required=patch_default is None,
                       default=None if patch_default is None else PatchConfig.parse(patch_default))
        p.add_argument("--knn", type=int, default=50)
        p.add_argument("--sym-laplacian", type=_flag01, default=False)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("decompose", help="framelet coefficients to CSV")
    common(p)
    p.add_argument("--local", choices=("svd", "dct", "haar", "random"), default="svd")
    p.add_argument("--nonlocal", dest="nonlocal_kind", choices=("le", "svd"), default="le")
    p.add_argument("--p", type=int, required=True, help="number of nonlocal basis vectors")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("approx", help="N-term approximation")
    common(p)
    p.add_argument("--local", choices=("svd", "dct", "haar", "random"), default="svd")
    p.add_argument("--p", type=int, default=64, help="Laplacian eigenvectors to compute")
    p.add_argument("--terms", type=int, required=True)
    p.add_argument("--mode", choices=approx_mod.MODES, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("inpaint", help="LDMM / reweighted LDMM inpainting")
    common(p, patch_default="10x10")
    p.add_argument("--mask")
    p.add_argument("--rate", type=_rate)
    p.add_argument("--method", choices=tuple(METHODS), default="ldmm")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--r-frac", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.add_argument("--psnr-log")
    p.add_argument("--truth")
    p.set_defaults(func=cmd_inpaint)

    p = sub.add_parser("graph", help="Laplacian eigenvalues of the patch graph")
    common(p)
    p.add_argument("--eigs", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_graph)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except (ValueError, OSError, PGMError, SolverError, EigenSolverError) as exc:
        print(f"convframelets: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
