"""Acceptance criteria, one test each, at their stated tolerances.

Every test prints a single ``[PASS]``/``[FAIL]`` line with the measured
quantities, visible under ``pytest -v`` (or ``python tests/test_acceptance.py``).
"""
import math
import sys
import time

import numpy as np
import pytest

from weightspace import conjugate as cj
from weightspace.cli import main
from weightspace.entire import constant, derivative_table, gaussian, taylor_extend
from weightspace.fourier import fourier_transform, roundtrip_check, theorem3_check
from weightspace.grids import GridSpec, symmetric
from weightspace.norms import PASS, PsiStar, SpaceParams, lemma3_check, p_norm, theorem1_check, theorem2_check
from weightspace.norms import theorem4_equivalence_check
from weightspace.weights import check_admissibility, compose_exp, make_weight, regularize_at_zero


@pytest.fixture
def report(capsys):
    """Print one verdict line outside output capture, then assert every check."""

    def emit(number, title, checks, **measured):
        ok = all(checks.values())
        failed = [name for name, good in checks.items() if not good]
        details = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in measured.items())
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2} {title}: {details}"
        if failed:
            line += f" (failed: {', '.join(failed)})"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


@pytest.fixture(scope="module")
def exp_weight():
    return make_weight("exp")


@pytest.fixture(scope="module")
def psistar(exp_weight):
    return PsiStar(exp_weight)


def square(y):
    return np.asarray(y, dtype=float) ** 2


def double_exp(y):
    return np.exp(np.exp(np.asarray(y, dtype=float)))


def half_square(y):
    return 0.5 * np.asarray(y, dtype=float) ** 2


def test_criterion_01_conjugation_core(report):
    t0 = time.perf_counter()
    worst_fy, worst_bic, interior, worst_id = math.inf, 0.0, math.inf, 0.0
    for g in (square, np.exp, double_exp):
        hi = cj.auto_upper(g, 20.0)
        rep = cj.biconjugate_check(g, GridSpec(1e-6, hi, 4096), GridSpec(0.0, 20.0, 4096),
                                   GridSpec(hi / 100, hi / 2, 256))
        worst_fy = min(worst_fy, rep.fenchel_young_worst_gap / rep.scale)
        worst_bic = max(worst_bic, rep.biconjugate_max_dev)
        interior = min(interior, int(np.count_nonzero(rep.interior)))
        ys = GridSpec(1e-3, hi, 4096).points()
        xs = np.linspace(0.0, 20.0, 401)
        gv = g(ys)

        def conj(values, x=xs, y=ys):
            return cj.discrete_conjugate(y, values, x)[0]

        base = conj(gv)
        scale = np.maximum(1.0, np.abs(base))
        lam, a = 2.5, 1.75
        # (lam g)*(x) = lam g*(x/lam); (g + c)* = g* - c; (g - a y)*(x) = g*(x + a); g(y/2)* = g*(2x)
        gaps = [
            np.abs(conj(lam * gv) - lam * conj(gv, xs / lam)) / scale,
            np.abs(conj(gv + 3.0) - (base - 3.0)) / scale,
            np.abs(conj(gv - a * ys) - conj(gv, xs + a)) / np.maximum(1.0, np.abs(conj(gv, xs + a))),
            np.abs(conj(gv, y=2 * ys) - conj(gv, 2 * xs)) / np.maximum(1.0, np.abs(conj(gv, 2 * xs))),
        ]
        worst_id = max(worst_id, max(float(np.max(d)) for d in gaps))
    elapsed = time.perf_counter() - t0
    report(1, "conjugation core", {
        "fenchel_young": worst_fy >= -1e-9,
        "biconjugate": interior > 0 and worst_bic < 5e-3,
        "identities": worst_id <= 1e-10,
        "runtime": elapsed < 10.0,
    }, fy_rel_gap=worst_fy, biconj_dev=worst_bic, identity_rel_err=worst_id, seconds=elapsed)


def test_criterion_02_log_variable_identity(report):
    t0 = time.perf_counter()
    res = cj.eq21_identity_check(half_square, x_grid=GridSpec(0.5, 10.0, 256))
    spots = cj.eq21_identity_check(half_square, x_grid=np.array([math.e, 1.0]))
    elapsed = time.perf_counter() - t0
    err_e, err_1 = abs(spots.lhs[0] - 0.0), abs(spots.lhs[1] + 1.0)
    report(2, "log-variable conjugate identity", {
        "max_error": res.max_abs_err < 5e-3,
        "spot_e": err_e <= 1e-3,
        "spot_1": err_1 <= 1e-3,
        "runtime": elapsed < 5.0,
    }, max_abs_err=res.max_abs_err, spot_e_err=err_e, spot_1_err=err_1, seconds=elapsed)


def test_criterion_03_log_growth_bound(report, exp_weight):
    res = cj.lemma1_check(compose_exp(exp_weight), math.e)
    report(3, "conjugate log-growth bound", {
        "A_M_zero": abs(res.A_M) <= 1e-6,
        "margin": res.worst_margin >= -1e-6,
    }, A_M=res.A_M, worst_margin=res.worst_margin)


def test_criterion_04_conjugate_doubling(report):
    checks, measured = {}, {}
    hi = cj.auto_upper(double_exp, 200.0)
    gstar = cj.young_conjugate(double_exp, GridSpec(1e-6, hi, 4096), GridSpec(0.0, 200.0, 2001), convex=True)
    for eps in (0.25, 0.5):
        fwd = cj.lemma2_forward_check(double_exp, eps, pair_grid=GridSpec(0.0, 10.0, 128))
        rev = cj.lemma2_reverse_check(gstar, eps, fwd.C)
        checks[f"C_recipe_{eps}"] = fwd.C == max(fwd.B, fwd.inf_g)
        checks[f"forward_{eps}"] = fwd.worst_violation <= 1e-6 * fwd.scale
        checks[f"reverse_{eps}"] = rev.evaluated > 0 and rev.B <= fwd.C + 1e-6 * rev.scale
        measured[f"viol_{eps}"] = fwd.worst_violation
        measured[f"B_rec_{eps}"] = rev.B
        measured[f"C_{eps}"] = fwd.C
    report(4, "conjugate doubling inequality", checks, **measured)


def test_criterion_05_series(report, psistar):
    try:
        res = cj.corollary1_series(psistar, 10.0)
        ok, terms, total = True, res.terms_used, res.partial_sum
    except cj.DivergenceSuspected:
        ok, terms, total = False, 65, math.nan
    report(5, "conjugate series", {
        "converged": ok,
        "within_64": terms <= 65,
        "finite": math.isfinite(total),
    }, terms=terms, sum=total)


def test_criterion_06_norm_comparison(report, psistar):
    table = derivative_table(gaussian(), symmetric(8.0, 321), 2)
    rep = lemma3_check(table, psistar, SpaceParams(epsilons=(0.5, 1.0), m_max=2))
    entrywise = all(r["g_norm"] <= r["s_norm"] for r in rep.rows)
    reverse = all(r["s_norm"] <= r["C1"] * r["g_norm_half_eps"] * (1 + 1e-12) for r in rep.rows)
    report(6, "line-norm comparison", {
        "g_le_s": entrywise,
        "reverse_bound": reverse,
        "verdict": rep.verdict == PASS,
        "rows": len(rep.rows) == 6,
    }, worst_margin=rep.worst_margin, **{k: v for k, v in rep.fitted_constants.items() if k.startswith("C1")})


def test_criterion_07_derivative_decay(report, exp_weight, psistar):
    rep = theorem1_check(gaussian(), exp_weight, SpaceParams(sigma=1.0, epsilons=(0.5, 1.0), m_max=2, n_max=12),
                         psistar=psistar)
    changes = [r["relative_change"] for r in rep.rows]
    report(7, "derivative decay constants", {
        "finite": all(math.isfinite(v) for v in rep.fitted_constants.values()),
        "stable": max(changes) < 0.05,
        "verdict": rep.verdict == PASS,
    }, max_relative_change=max(changes), constants=len(rep.fitted_constants))


def test_criterion_08_entire_extension(report, exp_weight):
    f = gaussian()
    table = derivative_table(f, np.linspace(-2.0, 2.0, 21), 130)
    ext = taylor_extend(table, probe_radius=2.0)
    r = np.linspace(0.0, 2.0, 21)
    z = (r[:, None] * np.exp(1j * np.linspace(0.0, 2 * np.pi, 64, endpoint=False))[None, :]).ravel()
    disc_err = float(np.max(np.abs(ext(z) - np.exp(-z ** 2))))
    rep = theorem2_check(table, exp_weight, SpaceParams(epsilons=(0.5, 1.0)), reference=f)
    change = max(row["relative_change"] for row in rep.rows)
    report(8, "entire extension and growth", {
        "disc_error": disc_err <= 1e-8,
        "gamma_stable": change < 0.05,
        "verdict": rep.verdict == PASS,
    }, disc_err=disc_err, max_gamma_change=change, degree=ext.degree)


def test_criterion_09_fourier(report, exp_weight, psistar):
    t0 = time.perf_counter()
    xs = np.linspace(-8.0, 8.0, 321)
    pair = float(np.max(np.abs(fourier_transform(gaussian(), xs).values
                               - math.sqrt(math.pi) * np.exp(-xs ** 2 / 4))))
    rt = roundtrip_check(gaussian(), np.linspace(-4.0, 4.0, 81))
    rep = theorem3_check(gaussian(), exp_weight, SpaceParams(epsilons=(0.5, 1.0)), psistar)
    elapsed = time.perf_counter() - t0
    pairs = {(r["epsilon"], r["k"]) for r in rep.rows}
    inequality = all(r["transform_norm"] <= r["pi_p_norm"] for r in rep.rows)
    report(9, "Fourier transform bounds", {
        "gaussian_pair": pair <= 1e-8,
        "roundtrip": rt <= 1e-8,
        "inequality": inequality and pairs == {(e, k) for e in (0.5, 1.0) for k in (0, 1, 2)},
        "runtime": elapsed < 60.0,
    }, pair_err=pair, roundtrip_err=rt, worst_margin=rep.worst_margin, seconds=elapsed)


def test_criterion_10_decay_characterisation(report, exp_weight, psistar):
    gf = cj.lemma4_slope_check(double_exp, 0.5)
    reg = regularize_at_zero(exp_weight, d=2.0)
    rep = theorem4_equivalence_check(gaussian(), exp_weight, SpaceParams(epsilons=(0.5, 1.0)), psistar=psistar)
    used = rep.diagnostics["regularization"]
    report(10, "slope divergence and decay characterisation", {
        "tail_increasing": gf.meta["tail_increasing"],
        "ratio": gf.meta["end_start_ratio"] > 10,
        "both_directions": rep.verdict == PASS and all(
            r["verdict_A"] == PASS and r["verdict_B"] == PASS for r in rep.rows),
        "measured_constants": used["s"] == reg.s and used["s1"] == reg.s1,
    }, end_start_ratio=gf.meta["end_start_ratio"], s=reg.s, s1=reg.s1, worst_margin=rep.worst_margin)


def test_criterion_11_negative_controls(report, tmp_path, exp_weight):
    adm = check_admissibility(make_weight("power", p=2.0), h_list=(1.2,))
    pn = p_norm(constant(1.0), exp_weight, 1.0, 0.5, 1)
    codes = {}
    for name, text in {
        "square_weight": "weight = power:p=2\nh = 1.2\ncheck = admissibility\n",
        "constant_function": "function = constant:c=1\ncheck = theorem1\n",
    }.items():
        cfg = tmp_path / f"{name}.cfg"
        cfg.write_text(text)
        codes[name] = main(["verify", "--config", str(cfg), "--out", str(tmp_path / name)])
    report(11, "negative controls", {
        "doubling_divergent": adm.doubling_constants[0].divergent,
        "p_divergent": pn.divergent,
        "cli_square_exit_2": codes["square_weight"] == 2,
        "cli_constant_exit_2": codes["constant_function"] == 2,
    }, **{f"exit_{k}": v for k, v in codes.items()})


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
