"""schurchain command-line interface.

Exit codes: 0 success, 1 usage or input error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import asdict

import numpy as np

from . import bench as benchmod
from . import generators
from .chain import ChainError, ChainFormatError, ChainOptions, black_box_construct, load_chain, save_chain
from .expanders import (lps_ramanujan, nontrivial_spectral_radius, product_demand_graph, weighted_expander)
from .io import ParseError, ingest, read_vector, write_edge_list, write_matrix_market, write_vector
from .jacobi import NnzBudgetExceeded
from .schur import approx_schur
from .sddm import InvalidMatrixError, SddmMatrix, exact_schur, laplacian_from_edges, loewner_approx_check
from .solver import laplacian_solve, solve
from .sparsify import SparsifyParams, sparsify
from .subsets import SubsetError

SCHEMA_VERSION = 1
DEFAULT_SEED = 0
ORACLE_MAX = 2000

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class NumericFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- JSON with fixed float precision


def _encode(obj) -> str:
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return format(v, ".17g") if math.isfinite(v) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{_encode(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps_stats(stats: dict) -> str:
    return _encode({"schema_version": SCHEMA_VERSION, **stats}) + "\n"


def _emit(stats: dict, path) -> None:
    text = dumps_stats(stats)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _write_matrix(path, m) -> None:
    if str(path).endswith((".tsv", ".edges", ".txt")):
        write_edge_list(path, m)
    else:
        write_matrix_market(path, m)


def _options(args) -> ChainOptions:
    return ChainOptions(alpha=args.alpha, final_size=args.final_size, seed=args.seed, subset=args.subset)


# ---------------------------------------------------------------- subcommands


def cmd_solve(args) -> int:
    m = ingest(args.matrix, args.format)
    b = read_vector(args.rhs)
    if b.size != m.n:
        raise UsageError(f"right-hand side has {b.size} entries, matrix has {m.n} rows")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if m.is_laplacian:
            x, rep = laplacian_solve(m, b, args.eps, options=_options(args), method=args.method, oracle=args.oracle)
        else:
            x, rep = solve(m, b, args.eps, options=_options(args), method=args.method, oracle=args.oracle)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if args.out:
        write_vector(args.out, x)
    stats = {"command": "solve", "seed": args.seed, "n": m.n, "eps": args.eps, "method": rep.method,
             "iterations": rep.iterations, "error_estimate": rep.error_estimate, "converged": rep.converged,
             "monotone": rep.monotone, "error_bound": rep.error_bound, "oracle_error": rep.oracle_error,
             "residual_norms": rep.residual_norms}
    if args.timings:
        stats["wall_time"] = rep.wall_time
    _emit(stats, args.stats)
    if not rep.converged:
        return EXIT_NUMERIC
    return EXIT_OK


def chain_stats(ch) -> dict:
    return {"n": ch.n, "levels": [lev.stats() for lev in ch.levels], "final_n": ch.final.n,
            "final_nnz": ch.final.nnz, "eps0": ch.eps0, "error_bound": ch.error_bound,
            "apply_work": ch.apply_work(), "seed": ch.options.seed, "options": vars_of(ch.options)}


def vars_of(opts) -> dict:
    return asdict(opts)


def cmd_build_chain(args) -> int:
    m = ingest(args.matrix, args.format)
    if m.is_laplacian:
        raise UsageError("build-chain needs an SDDM matrix; ground the Laplacian first")
    ch = black_box_construct(m, _options(args))
    save_chain(ch, args.out)
    _emit({"command": "build-chain", **chain_stats(ch)}, args.stats)
    return EXIT_OK


def cmd_inspect_chain(args) -> int:
    ch = load_chain(args.chain)
    _emit({"command": "inspect-chain", **chain_stats(ch)}, args.stats)
    return EXIT_OK


def cmd_sparsify(args) -> int:
    m = ingest(args.matrix, args.format)
    params = SparsifyParams(eps=args.eps, c=args.c, seed=args.seed)
    out = sparsify(m, params)
    if args.out:
        _write_matrix(args.out, out)
    stats = {"command": "sparsify", "seed": args.seed, "n": m.n, "eps": args.eps, "nnz_in": m.nnz,
             "nnz_out": out.nnz, "samples": params.samples(m.n)}
    if args.exact:
        if m.n > ORACLE_MAX:
            raise UsageError(f"--exact needs n <= {ORACLE_MAX}")
        rep = loewner_approx_check(out, m, args.eps)
        stats.update(achieved_eps=rep.epsilon_achieved, passes=rep.passes)
    _emit(stats, args.stats)
    return EXIT_OK


def _read_index_set(path, n: int) -> np.ndarray:
    idx = read_vector(path)
    if idx.size and (np.any(idx != np.round(idx)) or idx.min() < 0 or idx.max() >= n):
        raise UsageError("F set must hold integer indices in [0, n)")
    return np.unique(idx.astype(np.int64))


def cmd_schur(args) -> int:
    m = ingest(args.matrix, args.format)
    f = _read_index_set(args.f, m.n)
    info: dict = {}
    out = approx_schur(m, f, args.alpha, args.eps, seed=args.seed, prefer_exact=not args.expanders, info=info)
    if args.out:
        _write_matrix(args.out, out)
    stats = {"command": "schur", "seed": args.seed, "n": m.n, "f": int(f.size), "alpha": args.alpha,
             "eps": args.eps, "nnz_in": m.nnz, "nnz_out": out.nnz, "edges_out": (out.nnz - out.n) // 2,
             "iterations": info.get("iterations"), "dominance_trace": info.get("dominance_trace", [])}
    if m.n <= ORACLE_MAX:
        rep = loewner_approx_check(out, exact_schur(m, f), args.eps)
        stats.update(achieved_eps=rep.epsilon_achieved, passes=rep.passes)
    _emit(stats, args.stats)
    return EXIT_OK


def cmd_expander(args) -> int:
    if args.p is not None:
        if args.q is None:
            raise UsageError("--p needs --q")
        g = lps_ramanujan(args.p, args.q)
        lam = nontrivial_spectral_radius(g)
        wg = g.as_weighted().merged().without_loops()
        stats = {"command": "expander", "p": args.p, "q": args.q, "n": g.n, "degree": g.d,
                 "bipartite": g.bipartite, "lambda": lam, "ramanujan_bound": 2 * math.sqrt(args.p)}
    else:
        if not args.demands:
            raise UsageError("give --p/--q or --demands")
        d = np.array([float(t) for t in args.demands.split(",")])
        wg = weighted_expander(d, args.eps, seed=args.seed, prefer_exact=False)
        stats = {"command": "expander", "seed": args.seed, "n": d.size, "eps": args.eps, "edges": wg.num_edges}
        if d.size <= ORACLE_MAX:
            exact = SddmMatrix(product_demand_graph(d).laplacian(), check=False)
            approx = SddmMatrix(laplacian_from_edges(d.size, wg.u, wg.v, wg.w), check=False, allow_disconnected=True)
            rep = loewner_approx_check(approx, exact, args.eps)
            stats["achieved_eps"] = rep.epsilon_achieved
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for a, b, w in zip(wg.u.tolist(), wg.v.tolist(), wg.w.tolist()):
                fh.write(f"{a}\t{b}\t{float(w)!r}\n")
    _emit(stats, args.stats)
    return EXIT_OK


def cmd_gen(args) -> int:
    kind = args.kind
    if kind in ("grid2d", "grid3d"):
        m = generators.GENERATORS[kind](args.k, ridge=args.ridge)
    elif kind == "random-regular":
        m = generators.random_regular(args.n, args.d, seed=args.seed, ridge=args.ridge)
    elif kind == "product-demand":
        if not args.demands:
            raise UsageError("product-demand needs --demands")
        m = generators.product_demand([float(t) for t in args.demands.split(",")], ridge=args.ridge)
    else:
        m = generators.barbell(args.k, path=args.path, ridge=args.ridge)
    _write_matrix(args.out, m)
    _emit({"command": "gen", "kind": kind, "seed": args.seed, "n": m.n, "nnz": m.nnz}, args.stats)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.kind == "expander":
        report = benchmod.expander_table()
    else:
        ks = tuple(int(t) for t in args.ks.split(","))
        report = benchmod.grid_sweep(ks, ridge=args.ridge, options=_options(args), eps=args.eps,
                                     udu=not args.no_udu, timings=args.timings)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(benchmod.to_csv(report))
    _emit({"command": "bench", "seed": args.seed, **report}, args.stats)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="schurchain", description="Vertex-sparsifier chains and SDDM solvers.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp_, matrix=True):
        sp_.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp_.add_argument("--stats", default="-", help="JSON stats path ('-' for stdout)")
        if matrix:
            sp_.add_argument("--matrix", required=True)
            sp_.add_argument("--format", choices=("matrix-market", "edge-list"))

    def chain_flags(sp_):
        sp_.add_argument("--alpha", type=_positive, default=4.0)
        sp_.add_argument("--final-size", type=int, default=100)
        sp_.add_argument("--subset", choices=("random", "low-degree"), default="random")

    s = sub.add_parser("solve", help="solve M x = b to eps in the M-norm")
    common(s)
    chain_flags(s)
    s.add_argument("--rhs", required=True)
    s.add_argument("--eps", type=_positive, default=1e-8)
    s.add_argument("--out")
    s.add_argument("--method", choices=("refinement", "cg"), default="refinement")
    s.add_argument("--oracle", action="store_true", help="compare against a dense direct solve")
    s.add_argument("--timings", action="store_true")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("build-chain", help="construct and save a vertex-sparsifier chain")
    common(s)
    chain_flags(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_build_chain)

    s = sub.add_parser("inspect-chain", help="print stats of a saved chain")
    s.add_argument("chain")
    s.add_argument("--stats", default="-")
    s.set_defaults(func=cmd_inspect_chain)

    s = sub.add_parser("sparsify", help="spectral sparsification by effective-resistance sampling")
    common(s)
    s.add_argument("--eps", type=_positive, default=0.5)
    s.add_argument("--c", type=float, default=8.0)
    s.add_argument("--exact", action="store_true", help="certify the result with the dense oracle")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sparsify)

    s = sub.add_parser("schur", help="approximate Schur complement onto the complement of F")
    common(s)
    s.add_argument("--f", required=True, help="file with one 0-based index of F per line")
    s.add_argument("--alpha", type=_positive, default=4.0)
    s.add_argument("--eps", type=_positive, default=0.5)
    s.add_argument("--expanders", action="store_true", help="always use expanders, even where exact is cheaper")
    s.add_argument("--out")
    s.set_defaults(func=cmd_schur)

    s = sub.add_parser("expander", help="LPS Ramanujan graph or weighted expander")
    common(s, matrix=False)
    s.add_argument("--p", type=int)
    s.add_argument("--q", type=int)
    s.add_argument("--demands", help="comma-separated positive demands")
    s.add_argument("--eps", type=_positive, default=0.5)
    s.add_argument("--out", help="edge-list TSV output")
    s.set_defaults(func=cmd_expander)

    s = sub.add_parser("gen", help="generate a test matrix")
    common(s, matrix=False)
    s.add_argument("kind", choices=tuple(generators.GENERATORS))
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--n", type=int, default=10)
    s.add_argument("--d", type=int, default=3)
    s.add_argument("--path", type=int, default=1)
    s.add_argument("--demands")
    s.add_argument("--ridge", type=float, default=0.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("bench", help="work-count benchmarks")
    common(s, matrix=False)
    chain_flags(s)
    s.add_argument("kind", choices=("grid", "expander"), nargs="?", default="grid")
    s.add_argument("--ks", default="10,20,40,80")
    s.add_argument("--ridge", type=float, default=1e-2)
    s.add_argument("--eps", type=_positive, default=1e-8)
    s.add_argument("--no-udu", action="store_true")
    s.add_argument("--csv")
    s.add_argument("--timings", action="store_true")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ChainFormatError as err:
        print(f"schurchain {args.command}: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ChainError, NnzBudgetExceeded, SubsetError, np.linalg.LinAlgError, NumericFailure,
            ArithmeticError) as err:
        print(f"schurchain {args.command}: numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ParseError, InvalidMatrixError, OSError, ValueError) as err:
        print(f"schurchain {args.command}: error: {err}", file=sys.stderr)
        return EXIT_USAGE

if __name__ == "__main__":
    sys.exit(main())
