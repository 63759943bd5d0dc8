"""Execute configured checks and write their reports.

Each check returns a :class:`VerificationReport`.  Reports are written in
declaration order as ``<check>.json``, ``<check>.csv`` and ``<check>.svg``
(per the configured formats) plus a ``summary.json``.  Exit status: 0 when
every verdict passes, 2 if any fails, 3 if any is inconclusive (and none
fails), 1 for operational errors.
"""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from . import conjugate as cj
from .config import RunConfig
from .conjugate import _jsonable
from .entire import derivative_table, parse_function
from .errors import DivergenceSuspected, PreconditionError, WeightSpaceError
from .fourier import theorem3_check
from .grids import GridSpec, symmetric
from .norms import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    PsiStar,
    SpaceParams,
    VerificationReport,
    lemma3_check,
    theorem1_check,
    theorem2_check,
    theorem4_equivalence_check,
    verdict_of,
)
from .weights import check_admissibility, compose_exp, parse_weight

log = logging.getLogger(__name__)

EXIT_OK, EXIT_ERROR, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3


@dataclass
class Context:
    cfg: RunConfig

    def __post_init__(self):
        self.weight = parse_weight(self.cfg.weight)
        self.psi = compose_exp(self.weight)
        self.psistar = PsiStar(self.weight)
        self.params = SpaceParams(self.cfg.sigma, self.cfg.epsilons, self.cfg.k_max, self.cfg.m_max, self.cfg.n_max)
        self.functions = [(name, parse_function(name)) for name in self.cfg.functions]

    def grid(self, name, default=None):
        return self.cfg.grids.get(name, default)


def _merge(check: str, parts, params: dict) -> VerificationReport:
    """Combine per-function reports: rows tagged, verdict is the worst."""
    rows, fitted, diag = [], {}, {}
    margins = []
    for label, rep in parts:
        rows += [{"function": label, **r} for r in rep.rows]
        fitted.update({f"{label}:{k}": v for k, v in rep.fitted_constants.items()})
        diag[label] = {"verdict": rep.verdict, **rep.diagnostics}
        if rep.worst_margin is not None and not (isinstance(rep.worst_margin, float) and math.isnan(rep.worst_margin)):
            margins.append(rep.worst_margin)
    series = {}
    for label, rep in parts:
        series.update({f"{label}:{k}": v for k, v in rep.series.items()})
    return VerificationReport(check, fitted, min(margins) if margins else math.nan, params,
                              verdict_of([rep.verdict for _, rep in parts]), diag, rows, series)


# --------------------------------------------------------------------------
# checks


def run_admissibility(ctx: Context) -> VerificationReport:
    rep = check_admissibility(ctx.weight, ctx.grid("weight"), ctx.cfg.h_list)
    rows = [{"condition": "superlinear", "h": "", "value": float(rep.superlinear_ratio[-1]), "ok": rep.superlinear_ok},
            {"condition": "log_convexity", "h": "", "value": rep.worst_second_difference, "ok": rep.log_convexity_ok}]
    rows += [{"condition": "doubling", "h": d.h, "value": d.K, "ok": not d.divergent} for d in rep.doubling_constants]
    xs = rep.probe_grid.points()
    return VerificationReport(
        "admissibility",
        {f"K(h={d.h:g})": d.K for d in rep.doubling_constants},
        rep.worst_second_difference,
        {"weight": ctx.cfg.weight, "h": list(ctx.cfg.h_list)},
        PASS if rep.admissible else FAIL,
        rep.to_dict(),
        rows,
        {"w(x)/x": (xs, rep.superlinear_ratio)},
    )


def _conjugate_case(label, g, x_grid):
    xs = x_grid.points()
    y_hi = cj.auto_upper(g, float(xs[-1]))
    y_grid = GridSpec(1e-6, y_hi, 4096)
    probe = GridSpec(y_hi / 100.0, y_hi / 2.0, 256)
    rep = cj.biconjugate_check(g, y_grid, x_grid, probe)
    ys = y_grid.points()
    gv = np.asarray(g(ys), dtype=float)
    scan, _ = cj.discrete_conjugate(ys, gv, xs, "scan")
    hull, _ = cj.discrete_conjugate(ys, gv, xs, "hull")
    agree = float(np.max(np.abs(scan - hull) / np.maximum(1.0, np.abs(scan))))
    ok_fy = rep.fenchel_young_worst_gap >= -1e-9 * rep.scale
    interior = int(np.count_nonzero(rep.interior))
    ok_bic = interior > 0 and rep.biconjugate_max_dev < 5e-3
    ok = ok_fy and rep.slopes_monotone and agree <= 1e-10
    status = (PASS if ok_bic else INCONCLUSIVE if interior == 0 else FAIL) if ok else FAIL
    row = {"function": label, "fenchel_young_worst_gap": rep.fenchel_young_worst_gap, "scale": rep.scale,
           "biconjugate_max_dev": rep.biconjugate_max_dev, "interior_probes": interior,
           "slopes_monotone": rep.slopes_monotone, "hull_scan_rel_diff": agree,
           "divergent_columns": rep.divergent_columns, "y_hi": y_hi,
           "truncation_warning": rep.conjugate.meta["truncation_warning"], "verdict": status}
    return status, row, (rep.conjugate.xs, rep.conjugate.values), rep.fenchel_young_worst_gap / rep.scale


def run_conjugate(ctx: Context) -> VerificationReport:
    x_grid = ctx.grid("conjugate_x", GridSpec(0.0, 20.0, 4096))
    rows, results, series, margins = [], [], {}, []
    for label, g in (("weight", ctx.weight), ("psi", ctx.psi)):
        status, row, curve, margin = _conjugate_case(label, g, x_grid)
        rows.append(row)
        results.append(status)
        series[f"{label}*"] = curve
        margins.append(margin)
    return VerificationReport("conjugate", {f"{r['function']}:biconjugate_max_dev": r["biconjugate_max_dev"] for r in rows},
                              min(margins), {"x_grid": x_grid.to_dict()}, verdict_of(results), {}, rows, series)


def run_lemma1(ctx: Context) -> VerificationReport:
    rows, results, series, fitted = [], [], {}, {}
    worst = math.inf
    for M in ctx.cfg.lemma1_M:
        res = cj.lemma1_check(ctx.psi, M, x_grid=ctx.grid("lemma1_x"))
        status = INCONCLUSIVE if not res.tail_ok else (PASS if res.ok else FAIL)
        results.append(status)
        worst = min(worst, res.worst_relative_margin)
        fitted[f"A_M(M={M:g})"] = res.A_M
        rows.append({"M": M, **res.to_dict(), "verdict": status})
        series[f"margin M={M:g}"] = (res.xs, res.margins)
    return VerificationReport("lemma1", fitted, worst, {"M": list(ctx.cfg.lemma1_M)}, verdict_of(results), {}, rows,
                              series)


def run_lemma2(ctx: Context) -> VerificationReport:
    rows, results, fitted, diag = [], [], {}, {}
    worst = math.inf
    X = 200.0
    y_hi = cj.auto_upper(ctx.psi, X)
    gstar = cj.young_conjugate(ctx.psi, GridSpec(1e-6, y_hi, 4096), GridSpec(0.0, X, 2001), convex=True)
    for eps in ctx.cfg.lemma2_epsilons:
        try:
            fwd = cj.lemma2_forward_check(ctx.psi, eps)
        except PreconditionError as exc:
            results.append(FAIL)
            rows.append({"epsilon": eps, "direction": "forward", "verdict": FAIL, "error": str(exc)})
            diag[f"eps={eps:g}"] = str(exc)
            continue
        st_f = PASS if fwd.ok else FAIL
        rev = cj.lemma2_reverse_check(gstar, eps, fwd.C)
        st_r = (PASS if rev.ok else FAIL) if rev.evaluated else INCONCLUSIVE
        results += [st_f, st_r]
        worst = min(worst, -fwd.worst_violation / fwd.scale,
                    -rev.worst_violation / rev.scale if rev.evaluated else math.inf)
        fitted[f"C(eps={eps:g})"] = fwd.C
        fitted[f"B(eps={eps:g})"] = fwd.B
        rows.append({"epsilon": eps, "direction": "forward", **fwd.to_dict(), "verdict": st_f})
        rows.append({"epsilon": eps, "direction": "reverse", **rev.to_dict(), "verdict": st_r})
    return VerificationReport("lemma2", fitted, worst if worst != math.inf else math.nan,
                              {"epsilons": list(ctx.cfg.lemma2_epsilons)}, verdict_of(results), diag, rows)


def run_lemma4(ctx: Context) -> VerificationReport:
    gf = cj.lemma4_slope_check(ctx.psi, ctx.cfg.lemma4_delta, ctx.grid("lemma4_x", GridSpec(1.0, 40.0, 256)))
    meta = gf.meta
    status = PASS if meta["verdict"] == "pass" else FAIL
    if meta["truncated_points"]:
        status = INCONCLUSIVE if status == PASS else status
    rows = [{"x": x, "r": r} for x, r in zip(gf.xs, gf.values)]
    margin = float(np.min(np.diff(gf.values[int(0.75 * gf.xs.size):])))
    return VerificationReport("lemma4", {"end_start_ratio": meta["end_start_ratio"]}, margin,
                              {"delta": ctx.cfg.lemma4_delta}, status, meta, rows, {"r(x)": (gf.xs, gf.values)})


def _eq21_u(ctx):
    if ctx.cfg.eq21_u == "half_square":
        return lambda y: 0.5 * np.asarray(y, dtype=float) ** 2
    return ctx.weight


def run_eq21(ctx: Context) -> VerificationReport:
    u = _eq21_u(ctx)
    try:
        res = cj.eq21_identity_check(u, x_grid=ctx.grid("eq21_x"))
        spots = cj.eq21_identity_check(u, x_grid=np.array([1.0, math.e]))
    except PreconditionError as exc:
        return VerificationReport("eq21", {}, math.nan, {"u": ctx.cfg.eq21_u}, FAIL, {"error": str(exc)})
    spot_err = float(np.max(np.abs(spots.lhs - np.array([-1.0, 0.0]))))
    ok = res.max_abs_err < 5e-3 and spot_err < 1e-3
    rows = [{"x": x, "lhs": a, "rhs": b, "log_term": t1, "conjugate_term": t2, "interior": i}
            for x, a, b, t1, t2, i in zip(res.xs, res.lhs, res.rhs, res.term_log, res.term_conj, res.interior)]
    return VerificationReport(
        "eq21", {"max_abs_err": res.max_abs_err, "spot_max_abs_err": spot_err}, 5e-3 - res.max_abs_err,
        {"u": ctx.cfg.eq21_u}, PASS if ok else FAIL, res.to_dict(), rows,
        {"lhs": (res.xs, res.lhs), "x ln x - x": (res.xs, res.rhs)})


def run_corollary1(ctx: Context) -> VerificationReport:
    rows, results, fitted, series = [], [], {}, {}
    for b in ctx.cfg.series_b:
        try:
            res = cj.corollary1_series(ctx.psistar, b)
            status = PASS
            fitted[f"sum(b={b:g})"] = res.partial_sum
            rows.append({"b": b, **res.to_dict(), "verdict": status})
            series[f"log term b={b:g}"] = (np.arange(res.log_terms.size), res.log_terms)
        except DivergenceSuspected as exc:
            status = FAIL
            rows.append({"b": b, "error": str(exc), "verdict": status})
        results.append(status)
    return VerificationReport("corollary1", fitted, math.nan, {"b": list(ctx.cfg.series_b)}, verdict_of(results), {},
                              rows, series)


def _per_function(check, ctx, fn: Callable) -> VerificationReport:
    parts = []
    for label, f in ctx.functions:
        try:
            parts.append((label, fn(f)))
        except (WeightSpaceError, ArithmeticError, ValueError) as exc:
            parts.append((label, VerificationReport(check, {}, math.nan, ctx.params.to_dict(), INCONCLUSIVE,
                                                    {"error": f"{type(exc).__name__}: {exc}"})))
    return _merge(check, parts, ctx.params.to_dict())


def run_lemma3(ctx: Context) -> VerificationReport:
    return _per_function("lemma3", ctx, lambda f: lemma3_check(
        derivative_table(f, symmetric(8.0, 321), ctx.cfg.m_max), ctx.psistar, ctx.params))


def run_theorem1(ctx: Context) -> VerificationReport:
    return _per_function("theorem1", ctx, lambda f: theorem1_check(
        f, ctx.weight, ctx.params, ctx.grid("theorem1_x"), ctx.psistar))


# the growth hypothesis quantifies over every (eps, m); only this finite sample is checked
GROWTH_SAMPLE_EPSILONS = (0.25, 0.5, 1.0)
GROWTH_SAMPLE_M = (0, 1, 2, 3, 4)


def run_theorem2(ctx: Context) -> VerificationReport:
    eps = sorted(set(GROWTH_SAMPLE_EPSILONS) | set(ctx.params.epsilons))
    params = SpaceParams(ctx.params.sigma, eps, ctx.params.k_max, ctx.params.m_max, ctx.params.n_max)

    def one(f):
        table = derivative_table(f, np.linspace(-2.0, 2.0, 21), 130)
        return theorem2_check(table, ctx.weight, params, reference=f, m_list=GROWTH_SAMPLE_M)

    return _per_function("theorem2", ctx, one)


def run_theorem3(ctx: Context) -> VerificationReport:
    return _per_function("theorem3", ctx, lambda f: theorem3_check(
        f, ctx.weight, ctx.params, ctx.psistar, x_grid=ctx.grid("theorem3_x")))


def run_theorem4(ctx: Context) -> VerificationReport:
    return _per_function("theorem4", ctx, lambda f: theorem4_equivalence_check(
        f, ctx.weight, ctx.params, ctx.grid("theorem4_x"), d=ctx.cfg.regularization_d, psistar=ctx.psistar))


CHECK_RUNNERS: Dict[str, Callable[[Context], VerificationReport]] = {
    "admissibility": run_admissibility,
    "conjugate": run_conjugate,
    "lemma1": run_lemma1,
    "lemma2": run_lemma2,
    "lemma3": run_lemma3,
    "lemma4": run_lemma4,
    "eq21": run_eq21,
    "corollary1": run_corollary1,
    "theorem1": run_theorem1,
    "theorem2": run_theorem2,
    "theorem3": run_theorem3,
    "theorem4": run_theorem4,
}


def run_check(name: str, ctx: Context) -> VerificationReport:
    """Run one check; numerical breakdowns become an inconclusive verdict."""
    try:
        with np.errstate(all="ignore"):
            return CHECK_RUNNERS[name](ctx)
    except (WeightSpaceError, ArithmeticError, ValueError) as exc:
        log.warning("check %s inconclusive: %s", name, exc)
        return VerificationReport(name, {}, math.nan, ctx.params.to_dict(), INCONCLUSIVE,
                                  {"error": f"{type(exc).__name__}: {exc}"})


def exit_code(verdicts: List[str]) -> int:
    if FAIL in verdicts:
        return EXIT_FAIL
    if INCONCLUSIVE in verdicts:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def run(cfg: RunConfig, out_dir: Optional[str] = None, parallel: bool = False,
        formats: Optional[List[str]] = None):
    """Run every configured check and write reports.

    Returns ``(exit_code, summary)``.  Raises ``OSError`` if the output
    directory cannot be created or written.
    """
    out_dir = out_dir or cfg.output_dir
    formats = list(formats or cfg.formats)
    os.makedirs(out_dir, exist_ok=True)
    ctx = Context(cfg)
    if parallel and len(cfg.checks) > 1:
        with ThreadPoolExecutor(max_workers=min(4, len(cfg.checks))) as pool:
            reports = list(pool.map(lambda c: run_check(c, ctx), cfg.checks))
    else:
        reports = [run_check(c, ctx) for c in cfg.checks]

    entries = []
    for rep in reports:
        files = []
        if "json" in formats:
            files.append(_write(out_dir, f"{rep.theorem}.json", dump_json(rep.to_dict())))
        if "csv" in formats:
            files.append(_write(out_dir, f"{rep.theorem}.csv", rep.to_csv()))
        if "svg" in formats:
            from .plotting import render_report

            path = os.path.join(out_dir, f"{rep.theorem}.svg")
            render_report(rep, path)
            files.append(os.path.basename(path))
        entries.append({"check": rep.theorem, "verdict": rep.verdict, "worst_margin": rep.worst_margin,
                        "fitted_constants": rep.fitted_constants, "files": files})
    verdicts = [rep.verdict for rep in reports]
    code = exit_code(verdicts)
    summary = {"verdict": verdict_of(verdicts), "exit_code": code, "checks": entries, "config": cfg.to_dict()}
    _write(out_dir, "summary.json", dump_json(summary))
    return code, summary


def _write(out_dir, name, text) -> str:
    with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return name
