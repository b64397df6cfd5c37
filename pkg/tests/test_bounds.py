from __future__ import annotations

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
    identified_moments,
    load_moments,
    type_shares,
)
from factorial_iv.bounds import bound_aux_a, bound_aux_b
from factorial_iv.core import Assumption
from factorial_iv.errors import IdentificationError, InconsistencyError, ValidationError

STRICT = Restrictions(no_cross_defiers_a=True, no_joint_compliers_b=True)
BETA = (62.83, 2.58, 3.15, 0.69)


@pytest.fixture(scope="module")
def table():
    return load_moments("application").table


def _inputs(table, restrictions=STRICT, **flags):
    sh = type_shares(table, restrictions)
    return BoundInputs(sh, identified_moments(table, sh), 100.0, **flags)


def test_y00_bound_matches_hand_computation(table):
    upper = (62.83 - 70.55 * 0.19) / 0.49
    lower = upper - 64.83 * 0.31 / 0.49
    iv = bound_y00_cc(_inputs(table, Restrictions()))
    assert (iv.lo, iv.hi) == pytest.approx((lower, upper), abs=1e-9)
    assert iv.hi > 100 and not iv.clipped
    clipped = bound_y00_cc(_inputs(table, Restrictions()), clip=True)
    assert clipped.hi == 100.0 and clipped.clipped


def test_joint_bound_and_strengthening(table):
    upper = (62.83 - 70.55 * 0.19) / 0.49
    lower = upper - 64.83 * 0.31 / 0.49
    base = bound_joint_cc(_inputs(table, Restrictions()))
    assert (base.lo, base.hi) == pytest.approx((66.94 - upper, 66.94 - lower), abs=1e-9)
    strong = bound_joint_cc(_inputs(table, Restrictions(), y11_ge_y00=True))
    assert strong.lo == 0.0
    assert Assumption.Y11_GE_Y00 in strong.assumptions
    assert Assumption.Y11_GE_Y00 not in base.assumptions


def test_direct_bounds_and_assumption_tags(table):
    res = bound_laie_direct(_inputs(table, y11_ge_y00=True))
    assert (res.laie.lo, res.laie.hi) == pytest.approx((-37.2145, 37.2190), abs=1e-3)
    assert {Assumption.NO_CROSS_DEFIERS_A, Assumption.NO_JOINT_COMPLIERS_B} <= res.laie.assumptions
    for part in (res.y00, res.y10, res.y01):
        assert part.clipped and 0 <= part.lo <= part.hi <= 100


def test_direct_bound_without_strengthening_is_wider(table):
    base = bound_laie_direct(_inputs(table))
    strong = bound_laie_direct(_inputs(table, y11_ge_y00=True))
    assert base.laie.lo <= strong.laie.lo and base.laie.hi >= strong.laie.hi
    assert base.laie.hi == pytest.approx(70.28, abs=0.01)


def test_max_strengthening_caps_standalone_means(table):
    res = bound_laie_direct(_inputs(table, y11_ge_max=True))
    assert res.y10.hi <= 66.94 + 1e-12 and res.y01.hi <= 66.94 + 1e-12
    assert res.laie.lo == pytest.approx(-7.0865, abs=1e-3)
    assert Assumption.Y11_GE_MAX in res.laie.assumptions and Assumption.Y11_GE_Y00 in res.laie.assumptions


def test_direct_bound_requires_restrictions(table):
    with pytest.raises(IdentificationError):
        bound_laie_direct(_inputs(table, Restrictions(no_cross_defiers_a=True)))
    with pytest.raises(IdentificationError):
        bound_aux_b(_inputs(table, Restrictions(no_cross_defiers_a=True)))
    with pytest.raises(IdentificationError):
        bound_aux_a(_inputs(table, Restrictions(no_joint_compliers_b=True)))


def test_aux_bounds(table):
    aux = bound_aux_moments(_inputs(table, y11_ge_y00=True))
    assert (aux.ate_a_j.lo, aux.ate_a_j.hi) == pytest.approx((0.0, 43.875), abs=1e-3)
    assert (aux.ate_b_d.lo, aux.ate_b_d.hi) == pytest.approx((0.0, 100.0))


def test_indirect_bound_at_zero_share(table):
    res = bound_laie_indirect(_inputs(table, y11_ge_y00=True), BETA[3], BETA[1], BETA[2], 0.0)
    assert res.identified_part == pytest.approx(0.69 + 0.21 / 0.49 * 2.58 - 0.12 / 0.49 * 3.15)
    assert (res.laie.lo, res.laie.hi) == pytest.approx((-17.779, 25.514), abs=1e-3)
    assert res.coefficients["ate_a_j"] == pytest.approx(-0.21 / 0.49)


def test_indirect_bound_share_range_is_narrowed_and_covers_points(table):
    inp = _inputs(table, Restrictions(no_cross_defiers_a=True), y11_ge_y00=True)
    ranged = bound_laie_indirect(inp, BETA[3], BETA[1], BETA[2], (0.0, 1.0))
    for p in np.linspace(0.0, 0.07, 8):
        point = bound_laie_indirect(inp, BETA[3], BETA[1], BETA[2], float(p))
        assert ranged.laie.lo <= point.laie.lo + 1e-9 and point.laie.hi <= ranged.laie.hi + 1e-9
    with pytest.raises(InconsistencyError):
        bound_laie_indirect(inp, BETA[3], BETA[1], BETA[2], (0.08, 0.5))
    with pytest.raises(InconsistencyError):
        bound_laie_indirect(inp, BETA[3], BETA[1], BETA[2], 0.1)
    with pytest.raises(ValidationError):
        bound_laie_indirect(inp, BETA[3], BETA[1], BETA[2], (0.5, 0.2))


def test_bound_inputs_validate(table):
    sh = type_shares(table, STRICT)
    mo = identified_moments(table, sh)
    with pytest.raises(ValidationError):
        BoundInputs(sh, mo, k=0.0)
    with pytest.raises(ValidationError):
        BoundInputs(sh, mo, k=50.0)
