"""Acceptance criteria 1-8, each at its stated tolerance.

Every criterion records one PASS/FAIL line; the lines are printed in the
terminal summary (see conftest.py) and when this file runs as a script.
Numbers that come from the published application are driven by the bundled
moments file, since the raw data is not distributed.
"""

from __future__ import annotations

import os
import sys

import numpy as np
import pytest

from factorial_iv import (
    BoundInputs,
    Restrictions,
    bound_aux_moments,
    bound_joint_cc,
    bound_laie_direct,
    bound_laie_indirect,
    bound_y00_cc,
    build_cell_table,
    identified_moments,
    load_moments,
    read_csv,
    robust_se,
    saturated_iv,
    type_shares,
    wald,
)
from factorial_iv.oracle import (
    ONE_SIDED,
    OutcomeSpec,
    exact_cell_table,
    make_population,
    random_spec,
)
from factorial_iv.oracle.truth import a_is, b_is, true_effect
from factorial_iv.sensitivity import bound_over_box, indirect_lambda_model

import oracle_suites as suites

RAW_DATA_ENV = "FACTORIAL_IV_RAW_DATA"
RESULTS: dict[int, tuple[bool, str]] = {}


class Checker:
    def __init__(self) -> None:
        self.failures: list[str] = []
        self.count = 0

    def near(self, label: str, value: float, target: float, tol: float) -> None:
        self.count += 1
        if not abs(value - target) <= tol:
            self.failures.append(f"{label}: {value:.6g} vs {target:.6g} (tol {tol})")

    def true(self, label: str, ok: bool) -> None:
        self.count += 1
        if not ok:
            self.failures.append(label)


def _finish(number: int, chk: Checker, detail: str = "") -> None:
    ok = not chk.failures
    msg = detail or f"{chk.count} checks"
    if chk.failures:
        msg += "; " + "; ".join(chk.failures[:4])
    RESULTS[number] = (ok, msg)
    assert ok, msg


@pytest.fixture(scope="module")
def app():
    mf = load_moments("application")
    strict = Restrictions(no_cross_defiers_a=True, no_joint_compliers_b=True)
    shares = type_shares(mf.table, strict)
    moments = identified_moments(mf.table, shares)
    return mf, shares, moments


def _inputs(app, **flags) -> BoundInputs:
    mf, shares, moments = app
    return BoundInputs(shares, moments, mf.k, **flags)


def test_criterion_1_type_shares(app):
    mf, _, _ = app
    chk = Checker()
    a_only = type_shares(mf.table, Restrictions(no_cross_defiers_a=True))
    chk.near("p_s_a", a_only.p_s_a, 0.28, 0.005)
    chk.near("p_j_a", a_only.p_j_a, 0.21, 0.005)
    chk.near("p_n_a", a_only.p_n_a, 0.51, 0.005)
    base = type_shares(mf.table)
    chk.near("p_sd_b", base.p_sd_b, 0.93, 0.005)
    chk.near("contrast_b", base.contrast_b, -0.12, 0.005)
    chk.near("p_cc", base.p_cc, 0.49, 0.005)
    chk.near("p_ndA_c", base.p_ndA_c, 0.31, 0.005)
    chk.near("p_ndnd", base.p_ndnd, 0.19, 0.005)
    _finish(1, chk)


def test_criterion_2_joint_effect_bounds(app):
    chk = Checker()
    inp = _inputs(app)
    y00 = bound_y00_cc(inp)
    chk.near("U00", y00.hi, 100.87, 0.02)
    chk.near("L00", y00.lo, 59.85, 0.02)
    joint = bound_joint_cc(inp)
    chk.near("joint lo", joint.lo, -33.93, 0.02)
    chk.near("joint hi", joint.hi, 7.09, 0.02)
    strong = bound_joint_cc(_inputs(app, y11_ge_y00=True))
    chk.near("joint lo, Y11>=Y00", strong.lo, 0.0, 0.02)
    chk.near("joint hi, Y11>=Y00", strong.hi, 7.09, 0.02)
    _finish(2, chk)


def test_criterion_3_direct_interaction_bounds(app):
    chk = Checker()
    direct = bound_laie_direct(_inputs(app, y11_ge_y00=True))
    chk.near("Y10 lo", direct.y10.lo, 37.28, 0.02)
    chk.near("Y10 hi", direct.y10.hi, 80.14, 0.02)
    chk.near("Y01 lo", direct.y01.lo, 59.38, 0.02)
    chk.near("Y01 hi", direct.y01.hi, 83.87, 0.02)
    chk.near("LAIE lo", direct.laie.lo, -37.22, 0.02)
    chk.near("LAIE hi", direct.laie.hi, 37.22, 0.02)
    strongest = bound_laie_direct(_inputs(app, y11_ge_max=True))
    chk.near("LAIE lo, Y11>=max", strongest.laie.lo, -7.09, 0.02)
    chk.near("LAIE hi, Y11>=max", strongest.laie.hi, 37.22, 0.02)
    _finish(3, chk)


def test_criterion_4_indirect_pipeline(app):
    mf, shares, _ = app
    chk = Checker()
    beta = mf.reported_beta
    a_only = type_shares(mf.table, Restrictions(no_cross_defiers_a=True))
    model = indirect_lambda_model(a_only, beta[3], beta[1], beta[2])
    chk.near("identified part", model.intercept, 1.02, 0.02)
    chk.near("lambda_1 slope", model.slopes["lambda_1"], -1.11, 0.02)
    # lambda_2 slope is 6.43 * (0.12 + P), lambda_3 slope is -6.43 * P
    chk.near("lambda_2 slope at P=0", model.slopes["lambda_2"], 6.43 * 0.12, 0.02)
    chk.near("lambda_2 slope per unit P", model.share_slopes["lambda_2"], 6.43, 0.02)
    chk.near("lambda_3 slope at P=0", model.slopes["lambda_3"], 0.0, 0.02)
    chk.near("lambda_3 slope per unit P", model.share_slopes["lambda_3"], -6.43, 0.02)
    box = bound_over_box(model)
    chk.near("box lo", box.lo, -2.30, 0.02)
    chk.near("box lo per unit P", box.lo_share, -19.29, 0.02)
    chk.near("box hi", box.hi, 3.34, 0.02)
    chk.near("box hi per unit P", box.hi_share, 19.29, 0.02)
    aux = bound_aux_moments(_inputs(app, y11_ge_y00=True))
    chk.near("ATE_A(j) lo", aux.ate_a_j.lo, 0.0, 0.05)
    chk.near("ATE_A(j) hi", aux.ate_a_j.hi, 43.88, 0.05)
    ind = bound_laie_indirect(_inputs(app, y11_ge_y00=True), beta[3], beta[1], beta[2], 0.0)
    chk.near("indirect identified part", ind.identified_part, 1.02, 0.02)
    chk.near("indirect LAIE hi", ind.laie.hi, 25.51, 0.02)
    chk.near("indirect LAIE lo", ind.laie.lo, -17.85, 0.1)
    _finish(4, chk, f"{chk.count} checks; lower endpoint {ind.laie.lo:.3f} against published -17.85")


def test_criterion_5_saturated_iv(app):
    mf, _, _ = app
    chk = Checker()
    est = saturated_iv(mf.table)
    for name, value, target in zip(("const", "D_A", "D_B", "D_AD_B"), est.beta, (62.83, 2.64, 3.14, 0.64)):
        chk.near(f"beta {name}", value, target, 0.01)
    for name, value, target in zip(("const", "D_A", "D_B", "D_AD_B"), est.beta, mf.reported_beta):
        chk.near(f"beta {name} vs reported", value, target, 0.08)
    raw = os.environ.get(RAW_DATA_ENV)
    detail = f"{chk.count} checks"
    if raw:
        data = read_csv(raw)
        full = saturated_iv(build_cell_table(data))
        se = np.sqrt(np.diag(robust_se(data, full.beta)))
        for name, value, target in zip(("const", "D_A", "D_B", "D_AD_B"), full.beta, mf.reported_beta):
            chk.near(f"raw beta {name}", value, target, 0.005)
        for name, value, target in zip(("const", "D_A", "D_B", "D_AD_B"), se, mf.reported_se):
            chk.near(f"raw se {name}", value, target, 0.1 * target)
        detail = f"{chk.count} checks including raw data"
    else:
        detail += f"; raw-data part not run (set {RAW_DATA_ENV} to a CSV)"
    _finish(5, chk, detail)


def test_criterion_6_oracle_theorems():
    chk = Checker()
    parts = []
    for mode, theorems in suites.THEOREM_SUITES.items():
        res = suites.theorem_suite(mode)
        for th in theorems:
            chk.true(f"{mode} {th} ran on {res.runs[th]} populations", res.runs[th] >= suites.MIN_CASES)
        chk.true(f"{mode} failures {res.failures[:1]}", res.passed)
        parts.append(f"{mode}: {'/'.join(theorems)} x{min(res.runs[t] for t in theorems)}")
    _finish(6, chk, "; ".join(parts))


def test_criterion_7_bound_containment():
    chk = Checker()
    res = suites.containment_suite()
    for family in suites.BOUND_FAMILIES:
        chk.true(f"{family} ran on {res.runs[family]} populations", res.runs[family] >= suites.MIN_CONTAINMENT)
    chk.true(f"violations {res.failures[:1]}", res.passed)
    counts = ", ".join(f"{f} {res.runs[f]}" for f in suites.BOUND_FAMILIES)
    _finish(7, chk, f"{res.runs['checks']} interval checks, zero violations required; populations per family: {counts}")


def test_criterion_8_degenerate_cases():
    chk = Checker()
    worst = 0.0
    for seed in range(100):
        spec = random_spec(ONE_SIDED, seed, exclude_a=("j", "d"), exclude_b=("j", "d"))
        pop = make_population(spec)
        beta_ab = saturated_iv(exact_cell_table(pop, spec.assignment_probs)).beta_ab
        laie = true_effect(pop, a_is("c") & b_is("c"), "LAIE")
        err = abs(beta_ab - laie) / max(1.0, abs(laie))
        worst = max(worst, err)
        chk.true(f"seed {seed}: beta_AB {beta_ab} vs LAIE {laie}", err <= 1e-9)
    worst_h = 0.0
    for seed in range(100):
        taus = (10.0 + seed % 7, 5.0 + seed % 5, 0.0)
        spec = random_spec(ONE_SIDED, seed, exclude_b=("j", "d"), outcome=OutcomeSpec("additive", taus=taus))
        pop = make_population(spec)
        table = exact_cell_table(pop, spec.assignment_probs)
        a0, a1 = wald(table, "A", 0), wald(table, "A", 1)
        err = abs(a0 - a1) / max(1.0, abs(a0))
        worst_h = max(worst_h, err)
        chk.true(f"seed {seed}: delta_A0 {a0} vs delta_A1 {a1}", err <= 1e-9)
    _finish(8, chk, f"max rel. error beta_AB vs LAIE {worst:.1e}; delta_A0 vs delta_A1 {worst_h:.1e}")


def summary_lines() -> list[str]:
    names = {
        1: "type shares",
        2: "joint-effect bounds",
        3: "direct interaction bounds",
        4: "indirect interaction pipeline",
        5: "saturated IV from moments",
        6: "oracle theorem suite",
        7: "bound containment",
        8: "degenerate cases",
    }
    lines = []
    for n in sorted(names):
        if n in RESULTS:
            ok, msg = RESULTS[n]
            lines.append(f"criterion {n} ({names[n]}): {'PASS' if ok else 'FAIL'} - {msg}")
        else:
            lines.append(f"criterion {n} ({names[n]}): FAIL - not run")
    return lines


if __name__ == "__main__":
    code = pytest.main([__file__, "-q"])
    sys.exit(code)
