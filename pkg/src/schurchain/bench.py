"""Benchmarks that count work (multiply-adds, nonzeros) rather than time."""

from __future__ import annotations

import csv
import io
import math
import time

import numpy as np

from .chain import ChainOptions, apply_chain, black_box_construct, decompose
from .expanders import lps_ramanujan, nontrivial_spectral_radius
from .generators import grid2d
from .sddm import loewner_approx_check
from .solver import solve

DENSE_ORACLE_MAX = 1600


def loglog_slope(ns, values) -> float:
    return float(np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(values, float)), 1)[0])


def chain_quality(chain, m) -> float:
    """Achieved eps of W^{-1} against M by dense assembly."""
    w = apply_chain(chain, np.eye(m.n))
    w = 0.5 * (w + w.T)
    return loewner_approx_check(np.linalg.inv(w), m, 2.0).epsilon_achieved


def grid_cell(k: int, ridge: float, options: ChainOptions, eps: float = 1e-8, udu: bool = True,
              oracle_max: int = DENSE_ORACLE_MAX, timings: bool = False) -> dict:
    m = grid2d(k, ridge)
    t0 = time.perf_counter()
    chain = black_box_construct(m, options)
    t1 = time.perf_counter()
    b = np.random.default_rng(options.seed).standard_normal(m.n)
    _, rep = solve(m, b, eps, chain=chain)
    apply_work = chain.apply_work()
    row = {
        "k": k,
        "n": m.n,
        "nnz": m.nnz,
        "levels": len(chain.levels),
        "level_nnz": [lev.m.nnz for lev in chain.levels] + [chain.final.nnz],
        "apply_work": apply_work,
        "apply_work_per_n": apply_work / m.n,
        "iterations": rep.iterations,
        "work_per_solve": apply_work * (rep.iterations + 1),
        "error_bound": chain.error_bound,
        "achieved_eps": chain_quality(chain, m) if m.n <= oracle_max else None,
    }
    if udu:
        fac = decompose(chain)
        row["udu_nnz_per_n"] = fac.u.nnz / m.n
    if timings:
        row["build_seconds"] = t1 - t0
        row["solve_seconds"] = rep.wall_time
    return row


def grid_sweep(ks=(10, 20, 40, 80), ridge: float = 1e-2, options: ChainOptions = ChainOptions(),
               eps: float = 1e-8, udu: bool = True, timings: bool = False, progress=None) -> dict:
    rows = []
    for k in ks:
        rows.append(grid_cell(k, ridge, options, eps, udu=udu, timings=timings))
        if progress:
            progress(rows[-1])
    ns = [r["n"] for r in rows]
    out = {"kind": "grid", "ridge": ridge, "eps": eps, "seed": options.seed, "rows": rows}
    if len(rows) >= 2:
        out["apply_work_slope"] = loglog_slope(ns, [r["apply_work"] for r in rows])
        out["work_per_solve_slope"] = loglog_slope(ns, [r["work_per_solve"] for r in rows])
        if udu:
            out["udu_nnz_slope"] = loglog_slope(ns, [r["udu_nnz_per_n"] * r["n"] for r in rows])
    return out


def expander_table(pairs=((5, 13), (13, 17), (5, 17))) -> dict:
    rows = []
    for p, q in pairs:
        g = lps_ramanujan(p, q)
        deg = g.degrees()
        lam = nontrivial_spectral_radius(g)
        bound = 2 * math.sqrt(p)
        rows.append({"p": p, "q": q, "n": g.n, "regular": bool(np.all(deg == p + 1)), "degree": p + 1,
                     "bipartite": g.bipartite, "lambda": lam, "bound": bound, "ratio": lam / bound})
    return {"kind": "expander", "rows": rows}


def to_csv(report: dict) -> str:
    rows = report["rows"]
    if not rows:
        return ""
    fields = list(rows[0].keys())
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (";".join(map(str, v)) if isinstance(v, list) else
                             (repr(v) if isinstance(v, float) else v)) for k, v in r.items()})
    return buf.getvalue()
