"""Numerical verification of the identification results on exact populations.

Each check compares an estimand computed from the exact cell table (the
left-hand side) with its decomposition into ground-truth effects and type
shares (the right-hand side). A check passes when
``|lhs - rhs| <= 1e-9 * max(1, |lhs|)``; containment checks instead ask that
the truth lies inside the returned interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .. import bounds as bd
from ..core import CELLS, AssumedInterval, CellTable, cell_key
from ..errors import PreconditionError
from ..estimands import saturated_iv, wald
from ..identification import Restrictions, delta_a1_weights, identified_moments, type_shares
from .population import BASIC, MONOTONE, Population, exact_cell_table
from .truth import PairSet, a_is, b_is, effect_mass, everyone, share, true_effect, where

REL_TOL = 1e-9
THEOREMS = ("T1", "T2_EQ5", "T2_EQ6", "COR2", "T3", "B1", "B2", "B3", "L1", "A2", "LA1", "BOUNDS_CONTAIN")


@dataclass(frozen=True)
class Check:
    name: str
    lhs: float
    rhs: float
    passed: bool
    diff: float = 0.0
    kind: str = "equality"

    def as_dict(self) -> dict[str, Any]:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "diff": self.diff, "pass": self.passed, "kind": self.kind}


@dataclass
class VerificationReport:
    theorem: str
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def eq(self, name: str, lhs: float, rhs: float) -> None:
        diff = abs(lhs - rhs)
        ok = bool(np.isfinite(lhs) and np.isfinite(rhs) and diff <= REL_TOL * max(1.0, abs(lhs)))
        self.checks.append(Check(name, float(lhs), float(rhs), ok, float(diff)))

    def inside(self, name: str, truth: float, interval: AssumedInterval) -> None:
        ok = interval.contains(truth, tol=REL_TOL)
        excess = max(interval.lo - truth, truth - interval.hi, 0.0)
        self.checks.append(Check(name, float(truth), float("nan"), ok, excess, kind=f"in [{interval.lo:.6g}, {interval.hi:.6g}]"))

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def as_dict(self) -> dict[str, Any]:
        return {"theorem": self.theorem, "pass": self.passed, "checks": [c.as_dict() for c in self.checks], "notes": self.notes}


def _require_one_sided(pop: Population, theorem: str) -> None:
    if not (pop.a_labels_within(BASIC) and pop.b_labels_within(BASIC)):
        raise PreconditionError(f"{theorem} needs one-sided noncompliance for both members")


def _positive(pop: Population, pairs: PairSet, theorem: str) -> float:
    p = share(pop, pairs)
    if not p > 0:
        raise PreconditionError(f"{theorem} needs positive mass on {pairs.name}")
    return p


def _ate(pop: Population, pairs: PairSet, kind: str) -> float:
    return true_effect(pop, pairs, kind)


def _verify_standalone_wald(pop: Population, table: CellTable, rep: VerificationReport) -> None:
    _require_one_sided(pop, "T1")
    _positive(pop, a_is("sd"), "T1")
    _positive(pop, b_is("sd"), "T1")
    rep.eq("delta_A0 = ATE_A|notB(s or d, .)", wald(table, "A", 0), _ate(pop, a_is("sd"), "A_GIVEN_NOT_B"))
    rep.eq("delta_B0 = ATE_B|notA(., s or d)", wald(table, "B", 0), _ate(pop, b_is("sd"), "B_GIVEN_NOT_A"))
    rep.eq("first stage A = P(s or d, .)", table.d_a(1, 0) - table.d_a(0, 0), share(pop, a_is("sd")))


def _verify_partner_wald_four_terms(pop: Population, table: CellTable, rep: VerificationReport) -> None:
    _require_one_sided(pop, "T2_EQ5")
    p_c = _positive(pop, a_is("c"), "T2_EQ5")
    rhs = (
        effect_mass(pop, a_is("c"), "A_GIVEN_NOT_B")
        + effect_mass(pop, b_is("j"), "B_GIVEN_NOT_A")
        - effect_mass(pop, b_is("d"), "B_GIVEN_NOT_A")
        + effect_mass(pop, a_is("c") & b_is("c"), "LAIE")
    ) / p_c
    rep.eq("delta_A1 = four-term decomposition", wald(table, "A", 1), rhs)


def _verify_partner_wald_five_terms(pop: Population, table: CellTable, rep: VerificationReport) -> None:
    _require_one_sided(pop, "T2_EQ6")
    p_c = _positive(pop, a_is("c"), "T2_EQ6")
    rhs = (
        effect_mass(pop, a_is("c") & b_is("j"), "JOINT")
        + effect_mass(pop, a_is("c") & b_is("s"), "A_GIVEN_B")
        + effect_mass(pop, a_is("c") & b_is("nd"), "A_GIVEN_NOT_B")
        - effect_mass(pop, b_is("d"), "B_GIVEN_NOT_A")
        + effect_mass(pop, a_is("nd") & b_is("j"), "B_GIVEN_NOT_A")
    ) / p_c
    rep.eq("delta_A1 = five-term decomposition", wald(table, "A", 1), rhs)


def _verify_three_group_average(pop: Population, table: CellTable, rep: VerificationReport) -> None:
    _require_one_sided(pop, "COR2")
    if share(pop, a_is("d")) > 0 or share(pop, b_is("d")) > 0:
        raise PreconditionError("COR2 needs no cross-defiers on either side")
    if share(pop, (a_is("n") & b_is("j")) | (a_is("j") & b_is("n"))) > 0:
        raise PreconditionError("COR2 needs no (n, j) pairs")
    p_c = _positive(pop, a_is("c"), "COR2")
    rhs = (
        effect_mass(pop, a_is("c") & b_is("j"), "JOINT")
        + effect_mass(pop, a_is("c") & b_is("s"), "A_GIVEN_B")
        + effect_mass(pop, a_is("c") & b_is("n"), "A_GIVEN_NOT_B")
    ) / p_c
    rep.eq("delta_A1 = three-group average", wald(table, "A", 1), rhs)
    shares = type_shares(table, Restrictions(no_cross_defiers_a=True, no_cross_defiers_b=True, no_nj_pairs=True))
    w = delta_a1_weights(shares)
    for key, b_label in (("cj", "j"), ("cs", "s"), ("cn", "n")):
        rep.eq(f"identified weight {key}", w[key], share(pop, a_is("c") & b_is(b_label)) / p_c)


def _interaction_decomposition(pop: Population) -> float:
    cc = a_is("c") & b_is("c")
    p_cc = share(pop, cc)
    p_sd_a, p_sd_b = share(pop, a_is("sd")), share(pop, b_is("sd"))
    a_sd = effect_mass(pop, a_is("sd"), "A_GIVEN_NOT_B") / p_sd_a
    b_sd = effect_mass(pop, b_is("sd"), "B_GIVEN_NOT_A") / p_sd_b
    laie = effect_mass(pop, cc, "LAIE")
    j_a = effect_mass(pop, a_is("j"), "A_GIVEN_NOT_B") - share(pop, a_is("j")) * a_sd
    j_b = effect_mass(pop, b_is("j"), "B_GIVEN_NOT_A") - share(pop, b_is("j")) * b_sd
    d_a = share(pop, a_is("d")) * a_sd - effect_mass(pop, a_is("d"), "A_GIVEN_NOT_B")
    d_b = share(pop, b_is("d")) * b_sd - effect_mass(pop, b_is("d"), "B_GIVEN_NOT_A")
    return (laie + j_a + j_b + d_a + d_b) / p_cc


def _verify_saturated_iv(pop: Population, table: CellTable, rep: VerificationReport) -> None:
    _require_one_sided(pop, "T3")
    for s in (a_is("sd"), b_is("sd"), a_is("c") & b_is("c")):
        _positive(pop, s, "T3")
    iv = saturated_iv(table)
    rep.eq("beta_0 = E[Y(00)]", iv.beta_0, effect_mass(pop, everyone(), "Y00"))
    rep.eq("beta_A = ATE_A|notB(s or d, .)", iv.beta_a, _ate(pop, a_is("sd"), "A_GIVEN_NOT_B"))
    rep.eq("beta_B = ATE_B|notA(., s or d)", iv.beta_b, _ate(pop, b_is("sd"), "B_GIVEN_NOT_A"))
    rep.eq("beta_AB = LAIE(c,c) + heterogeneity terms", iv.beta_ab, _interaction_decomposition(pop))
    rep.eq("beta_A = delta_A0", iv.beta_a, iv.delta_a0)
    rep.eq("beta_B = delta_B0", iv.beta_b, iv.delta_b0)
    pi = iv.gamma.T @ iv.beta[1:]
    for i, name in enumerate(("pi_A", "pi_B", "pi_AB")):
        rep.eq(f"{name} = Gamma' beta", iv.pi[i], pi[i])


def six_sets(z: int) -> list[PairSet]:
    """Pairs whose takeup changes when A's instrument moves from 0 to 1, partner instrument fixed at ``z``."""
    return [
        where(lambda p: (p.d_a(1, z) == 1) & (p.d_a(0, z) == 0), "P1"),
        where(lambda p: (p.d_a(1, z) == 0) & (p.d_a(0, z) == 1), "P2"),
        where(lambda p: (p.d_b(1, z) == 1) & (p.d_b(0, z) == 0), "P3"),
        where(lambda p: (p.d_b(1, z) == 0) & (p.d_b(0, z) == 1), "P4"),
        where(lambda p: (p.d_a(1, z) * p.d_b(1, z) == 1) & (p.d_a(0, z) * p.d_b(0, z) == 0), "P5"),
        where(lambda p: (p.d_a(1, z) * p.d_b(1, z) == 0) & (p.d_a(0, z) * p.d_b(0, z) == 1), "P6"),
    ]


def _verify_unrestricted_contrast(pop: Population, table: CellTable, rep: VerificationReport) -> None:
    for z in (0, 1):
        p1, p2, p3, p4, p5, p6 = six_sets(z)
        rhs = (
            effect_mass(pop, p1, "A_GIVEN_NOT_B") - effect_mass(pop, p2, "A_GIVEN_NOT_B")
            + effect_mass(pop, p3, "B_GIVEN_NOT_A") - effect_mass(pop, p4, "B_GIVEN_NOT_A")
            + effect_mass(pop, p5, "LAIE") - effect_mass(pop, p6, "LAIE")
        )
        rep.eq(f"outcome contrast, Z_B={z}", table.y(1, z) - table.y(0, z), rhs)
        rep.eq(f"takeup contrast, Z_B={z}", table.d_a(1, z) - table.d_a(0, z), share(pop, p1) - share(pop, p2))


def _verify_monotone_a_wald(pop: Population, table: CellTable, rep: VerificationReport) -> None:
    if not (pop.a_labels_within(MONOTONE) and pop.b_labels_within(BASIC)):
        raise PreconditionError("B2 needs a monotone instrument for A and one-sided noncompliance for B")
    p1 = a_is("s", "d", "cross")
    _positive(pop, p1, "B2")
    rep.eq("delta_A0 = ATE_A|notB(s, d or cross-complier)", wald(table, "A", 0), _ate(pop, p1, "A_GIVEN_NOT_B"))
    rep.eq("first stage = P(s, d or cross-complier)", table.d_a(1, 0) - table.d_a(0, 0), share(pop, p1))


def _verify_extended_partner_wald(pop: Population, table: CellTable, rep: VerificationReport) -> None:
    if not (pop.a_labels_within(BASIC) and pop.b_labels_within(MONOTONE)):
        raise PreconditionError("B3 needs one-sided noncompliance for A and a monotone instrument for B")
    p1 = a_is("c")
    p3 = b_is("j")
    p4 = b_is("d", "d3")
    p5 = a_is("c") & b_is("s", "j", "cross", "always", "d2")
    mass1 = _positive(pop, p1, "B3")
    rhs = (
        effect_mass(pop, p1, "A_GIVEN_NOT_B")
        + effect_mass(pop, p3, "B_GIVEN_NOT_A")
        - effect_mass(pop, p4, "B_GIVEN_NOT_A")
        + effect_mass(pop, p5, "LAIE")
    ) / mass1
    rep.eq("delta_A1 = extended-type decomposition", wald(table, "A", 1), rhs)


def _verify_type_shares(pop: Population, table: CellTable, rep: VerificationReport) -> None:
    _require_one_sided(pop, "L1")
    sh = type_shares(table)
    truth = {
        "p_sd_a": share(pop, a_is("sd")),
        "p_sd_b": share(pop, b_is("sd")),
        "p_c_a": share(pop, a_is("c")),
        "p_c_b": share(pop, b_is("c")),
        "p_nd_a": share(pop, a_is("nd")),
        "p_nd_b": share(pop, b_is("nd")),
        "p_nj_a": share(pop, a_is("nj")),
        "p_nj_b": share(pop, b_is("nj")),
        "p_cc": share(pop, a_is("c") & b_is("c")),
        "p_c_ndA": share(pop, a_is("c") & b_is("nd")),
        "p_ndA_c": share(pop, a_is("nd") & b_is("c")),
        "p_ndnd": share(pop, a_is("nd") & b_is("nd")),
    }
    for name, value in truth.items():
        rep.eq(name, getattr(sh, name), value)
    for side, is_ in (("a", a_is), ("b", b_is)):
        for flag, absent in (("no_cross_defiers", "d"), ("no_joint_compliers", "j")):
            if share(pop, is_(absent)) > 0:
                continue
            r = Restrictions(**{f"{flag}_{side}": True})
            resolved = type_shares(table, r)
            for t in ("s", "j", "n", "d"):
                rep.eq(f"p_{t}_{side} under {flag}_{side}", getattr(resolved, f"p_{t}_{side}"), share(pop, is_(t)))


MOMENT_SETS: dict[str, tuple[Callable[[], PairSet], str]] = {
    "m00_all": (everyone, "Y00"),
    "m00_njA": (lambda: a_is("nj"), "Y00"),
    "m00_njB": (lambda: b_is("nj"), "Y00"),
    "m00_ndnd": (lambda: a_is("nd") & b_is("nd"), "Y00"),
    "m10_sdA": (lambda: a_is("sd"), "Y10"),
    "m01_sdB": (lambda: b_is("sd"), "Y01"),
    "m10_c_nd": (lambda: a_is("c") & b_is("nd"), "Y10"),
    "m01_nd_c": (lambda: a_is("nd") & b_is("c"), "Y01"),
    "m11_cc": (lambda: a_is("c") & b_is("c"), "Y11"),
    "m00_sdA": (lambda: a_is("sd"), "Y00"),
    "m00_sdB": (lambda: b_is("sd"), "Y00"),
}


def _verify_identified_moments(pop: Population, table: CellTable, rep: VerificationReport) -> None:
    _require_one_sided(pop, "A2")
    mo = identified_moments(table)
    for name, (make, kind) in MOMENT_SETS.items():
        pairs = make()
        mass = share(pop, pairs)
        if mass > 0:
            rep.eq(name, getattr(mo, name), true_effect(pop, pairs, kind))
        elif not name.startswith("m00_sd"):
            value = getattr(mo, name)
            rep.checks.append(Check(f"{name} undefined on empty set", float("nan") if value is None else value, float("nan"), value is None))


def _verify_effect_additivity(pop: Population, table: CellTable, rep: VerificationReport) -> None:
    parity = where(lambda p: (np.arange(len(p)) % 2) == 0, "even")
    partitions = [(a_is("c"), ~a_is("c")), (b_is("sd"), ~b_is("sd")), (parity, ~parity)]
    for kind in ("A_GIVEN_NOT_B", "A_GIVEN_B", "B_GIVEN_NOT_A", "B_GIVEN_A", "JOINT", "LAIE"):
        whole = true_effect(pop, everyone(), kind)
        for p1, p2 in partitions:
            rhs = 0.0
            for part in (p1, p2):
                mass = share(pop, part)
                if mass > 0:
                    rhs += true_effect(pop, part, kind) * mass
            rep.eq(f"{kind} over {p1.name} and complement", whole, rhs)


def _inputs(table: CellTable, pop: Population, restrictions: Restrictions, y11_ge_y00: bool, y11_ge_max: bool) -> bd.BoundInputs:
    sh = type_shares(table, restrictions)
    return bd.BoundInputs(sh, identified_moments(table, sh), pop.k, y11_ge_y00, y11_ge_max)


def _verify_bounds(pop: Population, table: CellTable, rep: VerificationReport) -> None:
    _require_one_sided(pop, "BOUNDS_CONTAIN")
    if not (pop.outcomes_bounded() and pop.monotone_response()):
        raise PreconditionError("bounds need outcomes in [0, K] and monotone response to each treatment")
    cc = a_is("c") & b_is("c")
    if not share(pop, cc) > 0:
        raise PreconditionError("bounds need joint compliers with positive mass")
    no_a_d = share(pop, a_is("d")) == 0
    no_b_j = share(pop, b_is("j")) == 0
    flag_sets = [(False, False)]
    if pop.y11_ge_y00():
        flag_sets.append((True, False))
    if pop.y11_ge_max():
        flag_sets.append((False, True))
    y00_cc = true_effect(pop, cc, "Y00")
    y10_cc = true_effect(pop, cc, "Y10")
    y01_cc = true_effect(pop, cc, "Y01")
    joint = true_effect(pop, cc, "JOINT")
    laie = true_effect(pop, cc, "LAIE")
    iv = saturated_iv(table)
    for ge00, gemax in flag_sets:
        tag = "+".join(t for t, on in (("y11>=y00", ge00), ("y11>=max", gemax)) if on) or "base"
        inp = _inputs(table, pop, Restrictions(), ge00, gemax)
        rep.inside(f"[{tag}] E[Y(00)|(c,c)]", y00_cc, bd.bound_y00_cc(inp))
        rep.inside(f"[{tag}] E[Y(00)|(c,c)] clipped", y00_cc, bd.bound_y00_cc(inp, clip=True))
        rep.inside(f"[{tag}] joint effect (c,c)", joint, bd.bound_joint_cc(inp))
        if no_a_d and no_b_j:
            inp = _inputs(table, pop, Restrictions(no_cross_defiers_a=True, no_joint_compliers_b=True), ge00, gemax)
            direct = bd.bound_laie_direct(inp)
            rep.inside(f"[{tag}] E[Y(10)|(c,c)]", y10_cc, direct.y10)
            rep.inside(f"[{tag}] E[Y(01)|(c,c)]", y01_cc, direct.y01)
            rep.inside(f"[{tag}] LAIE(c,c) direct", laie, direct.laie)
        if no_a_d and share(pop, a_is("j")) > 0:
            inp = _inputs(table, pop, Restrictions(no_cross_defiers_a=True), ge00, gemax)
            aux = bd.bound_aux_a(inp)
            ja = a_is("j")
            rep.inside(f"[{tag}] E[Y(00)|(j,.)]", true_effect(pop, ja, "Y00"), aux.y00_j)
            rep.inside(f"[{tag}] E[Y(10)|(j,.)]", true_effect(pop, ja, "Y10"), aux.y10_j)
            rep.inside(f"[{tag}] ATE_A|notB(j,.)", true_effect(pop, ja, "A_GIVEN_NOT_B"), aux.ate_a_j)
        if no_b_j and share(pop, b_is("d")) > 0:
            inp = _inputs(table, pop, Restrictions(no_joint_compliers_b=True), ge00, gemax)
            aux = bd.bound_aux_b(inp)
            db = b_is("d")
            rep.inside(f"[{tag}] E[Y(01)|(.,d)]", true_effect(pop, db, "Y01"), aux.y01_d)
            rep.inside(f"[{tag}] E[Y(00)|(.,d)]", true_effect(pop, db, "Y00"), aux.y00_d)
            rep.inside(f"[{tag}] ATE_B|notA(.,d)", true_effect(pop, db, "B_GIVEN_NOT_A"), aux.ate_b_d)
        if no_a_d:
            inp = _inputs(table, pop, Restrictions(no_cross_defiers_a=True), ge00, gemax)
            p_j_b = share(pop, b_is("j"))
            ind = bd.bound_laie_indirect(inp, iv.beta_ab, iv.beta_a, iv.beta_b, p_j_b)
            rep.inside(f"[{tag}] LAIE(c,c) indirect", laie, ind.laie)
            ranged = bd.bound_laie_indirect(inp, iv.beta_ab, iv.beta_a, iv.beta_b, (0.0, p_j_b))
            rep.inside(f"[{tag}] LAIE(c,c) indirect, P(.,j) in [0, truth]", laie, ranged.laie)
            if no_b_j:
                both = direct.laie.intersect(ind.laie)
                rep.inside(f"[{tag}] LAIE(c,c) direct and indirect", laie, both)


_DISPATCH = {
    "T1": _verify_standalone_wald,
    "T2_EQ5": _verify_partner_wald_four_terms,
    "T2_EQ6": _verify_partner_wald_five_terms,
    "COR2": _verify_three_group_average,
    "T3": _verify_saturated_iv,
    "B1": _verify_unrestricted_contrast,
    "B2": _verify_monotone_a_wald,
    "B3": _verify_extended_partner_wald,
    "L1": _verify_type_shares,
    "A2": _verify_identified_moments,
    "LA1": _verify_effect_additivity,
    "BOUNDS_CONTAIN": _verify_bounds,
}


def verify(pop: Population, assignment_probs: Mapping[str, float] | None, theorem: str) -> VerificationReport:
    """Run one theorem's checks; raises :class:`PreconditionError` when the
    population does not satisfy the theorem's assumptions."""
    theorem = theorem.upper()
    if theorem not in _DISPATCH:
        raise ValueError(f"unknown theorem {theorem!r}; choose from {', '.join(THEOREMS)}")
    table = exact_cell_table(pop, assignment_probs)
    rep = VerificationReport(theorem)
    _DISPATCH[theorem](pop, table, rep)
    return rep


def applicable(theorem: str, mode: str) -> bool:
    from .population import MONOTONE_A_ONESIDED_B, ONE_SIDED, ONESIDED_A_MONOTONE_B

    if theorem == "B1":
        return True
    if theorem == "B2":
        return mode in (ONE_SIDED, MONOTONE_A_ONESIDED_B)
    if theorem == "B3":
        return mode in (ONE_SIDED, ONESIDED_A_MONOTONE_B)
    return mode == ONE_SIDED
