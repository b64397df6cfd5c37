"""Partial identification of the joint effect and the interaction effect for
joint compliers ``(c, c)``.

Outcomes are assumed to lie in ``[0, K]`` and to respond monotonically to each
treatment alone (``Y(10) >= Y(00)`` and ``Y(01) >= Y(00)``). Two optional
strengthenings tighten the bounds: ``Y(11) >= Y(00)`` and
``Y(11) >= max(Y(10), Y(01))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import AssumedInterval, Assumption, weighted_term
from .errors import IdentificationError, InconsistencyError, ValidationError
from .identification import IdentifiedMoments, TypeShares

SHARE_TOL = 1e-12
BASE = (Assumption.BOUNDED_OUTCOMES, Assumption.MONOTONE_RESPONSE)


@dataclass(frozen=True)
class BoundInputs:
    shares: TypeShares
    moments: IdentifiedMoments
    k: float = 100.0
    y11_ge_y00: bool = False
    y11_ge_max: bool = False
    clip: bool = True

    def __post_init__(self) -> None:
        if not self.k > 0:
            raise ValidationError("K must be positive")
        for name, value in self.moments.as_dict().items():
            if name in ("m00_sdA", "m00_sdB"):
                continue
            if value is not None and not (-1e-9 <= value <= self.k * (1 + 1e-9)):
                raise ValidationError(f"identified moment {name} = {value:.6g} lies outside [0, {self.k}]")

    @property
    def uses_y11_ge_y00(self) -> bool:
        return self.y11_ge_y00 or self.y11_ge_max

    def tags(self, *extra: Assumption) -> frozenset[Assumption]:
        tags = set(BASE) | set(extra)
        if self.uses_y11_ge_y00:
            tags.add(Assumption.Y11_GE_Y00)
        if self.y11_ge_max:
            tags.add(Assumption.Y11_GE_MAX)
        return frozenset(tags)

    @property
    def m11(self) -> float:
        if self.moments.m11_cc is None:
            raise IdentificationError("E[Y(11)|(c,c)] is undefined: no joint takeup when both instruments are on")
        return self.moments.m11_cc


def _positive(value: float, label: str) -> float:
    if not value > SHARE_TOL:
        raise IdentificationError(f"share {label} must be positive, got {value:.6g}")
    return value


def _interval(lo: float, hi: float, tags: frozenset[Assumption], what: str) -> AssumedInterval:
    if lo > hi + 1e-9 * max(1.0, abs(lo), abs(hi)):
        raise InconsistencyError(f"bounds for {what} are empty ([{lo:.6g}, {hi:.6g}]); the assumptions contradict the data")
    return AssumedInterval(lo, max(lo, hi), tags)


def _finish(iv: AssumedInterval, inputs: BoundInputs, clip: bool) -> AssumedInterval:
    return iv.clip(inputs.k) if clip else iv


def bound_y00_cc(inputs: BoundInputs, clip: bool = False) -> AssumedInterval:
    """Bounds on ``E[Y(00) | (c, c)]``.

    Standalone bounds are reported unclipped by default, so that an upper
    bound above ``K`` stays visible as a diagnostic.
    """
    sh, mo = inputs.shares, inputs.moments
    p_cc = _positive(sh.p_cc, "P(c,c)")
    if mo.m00_all is None:
        raise IdentificationError("E[Y(00)] is undefined: the (0,0) instrument cell is empty")
    upper = (mo.m00_all - weighted_term(mo.m00_ndnd, sh.p_ndnd, "E[Y(00)|(n or d,n or d)]")) / p_cc
    lower = upper - (
        weighted_term(mo.m10_c_nd, sh.p_c_ndA, "E[Y(10)|(c,n or d)]")
        + weighted_term(mo.m01_nd_c, sh.p_ndA_c, "E[Y(01)|(n or d,c)]")
    ) / p_cc
    if inputs.uses_y11_ge_y00:
        upper = min(upper, inputs.m11)
    return _finish(_interval(lower, upper, inputs.tags(), "E[Y(00)|(c,c)]"), inputs, clip)


def bound_joint_cc(inputs: BoundInputs) -> AssumedInterval:
    """Bounds on the joint effect ``E[Y(11) - Y(00) | (c, c)]``."""
    y00 = bound_y00_cc(inputs, clip=False)
    m11 = inputs.m11
    lo, hi = m11 - y00.hi, m11 - y00.lo
    if inputs.uses_y11_ge_y00:
        lo = max(lo, 0.0)
    return _interval(lo, hi, inputs.tags(), "the joint effect")


@dataclass(frozen=True)
class DirectLaieBound:
    laie: AssumedInterval
    y00: AssumedInterval
    y10: AssumedInterval
    y01: AssumedInterval
    unclipped: dict[str, AssumedInterval] = field(default_factory=dict)

    def as_dict(self) -> dict[str, dict]:
        return {
            "laie": self.laie.as_dict(),
            "y00_cc": self.y00.as_dict(),
            "y10_cc": self.y10.as_dict(),
            "y01_cc": self.y01.as_dict(),
        }


def _bound_y10_cc(inputs: BoundInputs) -> AssumedInterval:
    sh, mo = inputs.shares, inputs.moments
    p_cc = _positive(sh.p_cc, "P(c,c)")
    lower = (
        weighted_term(mo.m10_sdA, sh.p_s_a, "E[Y(10)|(s,.)]")
        - weighted_term(mo.m10_c_nd, sh.p_c_ndA, "E[Y(10)|(c,n or d)]")
    ) / p_cc
    upper = lower + inputs.k * sh.p_j_a / p_cc
    if inputs.y11_ge_max:
        upper = min(upper, inputs.m11)
    tags = inputs.tags(Assumption.NO_CROSS_DEFIERS_A)
    return _interval(lower, upper, tags, "E[Y(10)|(c,c)]")


def _bound_y01_cc(inputs: BoundInputs) -> AssumedInterval:
    sh, mo = inputs.shares, inputs.moments
    p_cc = _positive(sh.p_cc, "P(c,c)")
    upper = (
        weighted_term(mo.m01_sdB, sh.p_sd_b, "E[Y(01)|(.,s or d)]")
        - weighted_term(mo.m01_nd_c, sh.p_ndA_c, "E[Y(01)|(n or d,c)]")
    ) / p_cc
    lower = upper - inputs.k * sh.p_d_b / p_cc
    if inputs.y11_ge_max:
        upper = min(upper, inputs.m11)
    tags = inputs.tags(Assumption.NO_JOINT_COMPLIERS_B)
    return _interval(lower, upper, tags, "E[Y(01)|(c,c)]")


def _require(shares: TypeShares, a_no_d: bool = False, b_no_j: bool = False) -> None:
    if a_no_d and not (shares.side_a.resolved and shares.side_a.d == 0):
        raise IdentificationError("these bounds need the no-cross-defiers restriction for A")
    if b_no_j and not (shares.side_b.resolved and shares.side_b.j == 0):
        raise IdentificationError("these bounds need the no-joint-compliers restriction for B")


def bound_laie_direct(inputs: BoundInputs) -> DirectLaieBound:
    """Bounds on ``LAIE(c, c) = E[Y(11) - Y(10) - Y(01) + Y(00) | (c, c)]``
    obtained by bounding each unidentified potential-outcome mean separately.
    """
    _require(inputs.shares, a_no_d=True, b_no_j=True)
    raw00 = bound_y00_cc(inputs, clip=False)
    raw10 = _bound_y10_cc(inputs)
    raw01 = _bound_y01_cc(inputs)
    clip = inputs.clip
    y00 = _finish(raw00, inputs, clip)
    y10 = _finish(raw10, inputs, clip)
    y01 = _finish(raw01, inputs, clip)
    m11 = inputs.m11
    lo = m11 + y00.lo - y10.hi - y01.hi
    hi = m11 + y00.hi - y10.lo - y01.lo
    tags = inputs.tags(Assumption.NO_CROSS_DEFIERS_A, Assumption.NO_JOINT_COMPLIERS_B)
    laie = _interval(lo, hi, tags, "LAIE(c,c)")
    return DirectLaieBound(laie, y00, y10, y01, {"y00_cc": raw00, "y10_cc": raw10, "y01_cc": raw01})


@dataclass(frozen=True)
class AuxBounds:
    """Bounds on potential-outcome means for A joint compliers ``(j, .)`` and
    B cross-defiers ``(., d)``, with the implied effect intervals."""

    y00_j: AssumedInterval | None = None
    y10_j: AssumedInterval | None = None
    ate_a_j: AssumedInterval | None = None
    y01_d: AssumedInterval | None = None
    y00_d: AssumedInterval | None = None
    ate_b_d: AssumedInterval | None = None

    def as_dict(self) -> dict[str, dict | None]:
        return {k: (None if v is None else v.as_dict()) for k, v in self.__dict__.items()}


def _effect(hi_part: AssumedInterval, lo_part: AssumedInterval, k: float, what: str) -> AssumedInterval:
    raw_lo, raw_hi = hi_part.lo - lo_part.hi, hi_part.hi - lo_part.lo
    lo, hi = max(raw_lo, 0.0), min(raw_hi, k)
    if lo > hi:
        raise InconsistencyError(f"bounds for {what} are empty after intersecting with [0, K]")
    return AssumedInterval(lo, hi, hi_part.assumptions | lo_part.assumptions, clipped=True, k=k)


def bound_aux_a(inputs: BoundInputs) -> AuxBounds:
    """Moments and effect of A alone for A joint compliers. Needs only that A
    has no cross-defiers."""
    sh, mo, k = inputs.shares, inputs.moments, inputs.k
    _require(sh, a_no_d=True)
    p_j = _positive(sh.p_j_a, "P(j,.)")
    tags = inputs.tags(Assumption.NO_CROSS_DEFIERS_A)
    base00 = (
        weighted_term(mo.m00_njA, sh.p_nj_a, "E[Y(00)|(n or j,.)]")
        - weighted_term(mo.m00_ndnd, sh.p_ndnd, "E[Y(00)|(n or d,n or d)]")
    )
    u00 = base00 / p_j
    l00 = (base00 - weighted_term(mo.m01_nd_c, sh.p_ndA_c, "E[Y(01)|(n or d,c)]")) / p_j
    l10 = (
        weighted_term(mo.m10_c_nd, sh.p_c_ndA, "E[Y(10)|(c,n or d)]")
        - weighted_term(mo.m10_sdA, sh.p_s_a, "E[Y(10)|(s,.)]")
    ) / p_j
    u10 = l10 + k * sh.p_cc / p_j
    y00 = _interval(l00, u00, tags, "E[Y(00)|(j,.)]").clip(k)
    y10 = _interval(l10, u10, tags, "E[Y(10)|(j,.)]").clip(k)
    return AuxBounds(y00_j=y00, y10_j=y10, ate_a_j=_effect(y10, y00, k, "ATE of A alone on (j,.)"))


def bound_aux_b(inputs: BoundInputs) -> AuxBounds:
    """Moments and effect of B alone for B cross-defiers. Needs that B has no
    joint compliers."""
    sh, mo, k = inputs.shares, inputs.moments, inputs.k
    _require(sh, b_no_j=True)
    p_d = _positive(sh.p_d_b, "P(.,d)")
    tags = inputs.tags(Assumption.NO_JOINT_COMPLIERS_B)
    u01 = (
        weighted_term(mo.m01_sdB, sh.p_sd_b, "E[Y(01)|(.,s or d)]")
        - weighted_term(mo.m01_nd_c, sh.p_ndA_c, "E[Y(01)|(n or d,c)]")
    ) / p_d
    l01 = u01 - k * sh.p_cc / p_d
    sd_mass = weighted_term(mo.m00_sdB if sh.p_sd_b > 0 else None, sh.p_sd_b, "E[Y(00)|(.,s or d)]")
    l00 = (sd_mass - k * sh.p_s_b) / p_d
    u00 = min(
        sd_mass / p_d,
        (
            weighted_term(mo.m00_ndnd, sh.p_ndnd, "E[Y(00)|(n or d,n or d)]")
            + weighted_term(mo.m10_c_nd, sh.p_c_ndA, "E[Y(10)|(c,n or d)]")
        ) / p_d,
    )
    y01 = _interval(l01, u01, tags, "E[Y(01)|(.,d)]").clip(k)
    y00 = _interval(l00, u00, tags, "E[Y(00)|(.,d)]").clip(k)
    return AuxBounds(y01_d=y01, y00_d=y00, ate_b_d=_effect(y01, y00, k, "ATE of B alone on (.,d)"))


def bound_aux_moments(inputs: BoundInputs) -> AuxBounds:
    """Both sides; a side whose share is zero is left as ``None``."""
    sh = inputs.shares
    a = bound_aux_a(inputs) if sh.p_j_a > SHARE_TOL else AuxBounds()
    b = bound_aux_b(inputs) if sh.p_d_b > SHARE_TOL else AuxBounds()
    return AuxBounds(a.y00_j, a.y10_j, a.ate_a_j, b.y01_d, b.y00_d, b.ate_b_d)


@dataclass(frozen=True)
class IndirectLaieBound:
    laie: AssumedInterval
    identified_part: float
    coefficients: dict[str, float]
    effect_intervals: dict[str, AssumedInterval]
    p_j_b: float

    def as_dict(self) -> dict:
        return {
            "laie": self.laie.as_dict(),
            "identified_part": self.identified_part,
            "coefficients": self.coefficients,
            "effect_intervals": {k: v.as_dict() for k, v in self.effect_intervals.items()},
            "p_j_b": self.p_j_b,
        }


def _indirect_at(inputs: BoundInputs, beta_ab: float, beta_a: float, beta_b: float, p_j_b: float, use_aux_b: bool) -> IndirectLaieBound:
    base = inputs.shares
    if base.side_b.resolved and abs(base.side_b.j - p_j_b) <= 1e-12:
        sh = base
    else:
        sh = base.with_p_j_b(p_j_b)
    _require(sh, a_no_d=True)
    p_cc = _positive(sh.p_cc, "P(c,c)")
    k = inputs.k
    trivial = AssumedInterval(0.0, k, inputs.tags(), clipped=True, k=k)
    local = BoundInputs(sh, inputs.moments, k, inputs.y11_ge_y00, inputs.y11_ge_max, inputs.clip)
    ate_a_j = bound_aux_a(local).ate_a_j if sh.p_j_a > SHARE_TOL else trivial
    if use_aux_b and sh.p_j_b <= SHARE_TOL and sh.p_d_b > SHARE_TOL:
        ate_b_d = bound_aux_b(local).ate_b_d
    else:
        ate_b_d = trivial
    ate_b_j = trivial
    coef = {
        "beta_ab": 1.0,
        "beta_a": sh.p_j_a / p_cc,
        "beta_b": (sh.p_j_b - sh.p_d_b) / p_cc,
        "ate_a_j": -sh.p_j_a / p_cc,
        "ate_b_d": sh.p_d_b / p_cc,
        "ate_b_j": -sh.p_j_b / p_cc,
    }
    ident = beta_ab + coef["beta_a"] * beta_a + coef["beta_b"] * beta_b
    total = AssumedInterval(ident, ident, inputs.tags(Assumption.NO_CROSS_DEFIERS_A))
    for name, iv in (("ate_a_j", ate_a_j), ("ate_b_d", ate_b_d), ("ate_b_j", ate_b_j)):
        if coef[name] != 0:
            total = total + iv.scale(coef[name])
    if sh.p_j_b <= SHARE_TOL and use_aux_b:
        total = total.with_assumptions(Assumption.NO_JOINT_COMPLIERS_B)
    return IndirectLaieBound(total, ident, coef, {"ate_a_j": ate_a_j, "ate_b_d": ate_b_d, "ate_b_j": ate_b_j}, p_j_b)


def bound_laie_indirect(
    inputs: BoundInputs,
    beta_ab: float,
    beta_a: float,
    beta_b: float,
    p_j_b: float | tuple[float, float] = 0.0,
) -> IndirectLaieBound:
    """Bound ``LAIE(c, c)`` through the decomposition of the saturated IV
    interaction coefficient.

    The identified part combines ``beta_AB`` with the standalone coefficients;
    the remaining effects for A joint compliers and B cross-defiers / joint
    compliers enter linearly and are replaced by intervals. ``p_j_b`` is the
    assumed share of B joint compliers, a number or a ``(lo, hi)`` range; a
    range is first narrowed to the values compatible with the data.
    With a positive value, B effect intervals fall back to ``[0, K]``.
    """
    if isinstance(p_j_b, tuple):
        lo, hi = p_j_b
        if not 0 <= lo <= hi <= 1:
            raise ValidationError("P(.,j) range must satisfy 0 <= lo <= hi <= 1")
        f_lo, f_hi = inputs.shares.p_j_b_range()
        lo, hi = max(lo, f_lo), min(hi, f_hi)
        if lo > hi + 1e-12:
            raise InconsistencyError(f"no value of P(.,j) in the requested range is compatible with the data ([{f_lo:.4g}, {f_hi:.4g}])")
        hi = max(lo, hi)
        evals = [_indirect_at(inputs, beta_ab, beta_a, beta_b, p, use_aux_b=False) for p in (lo, hi)]
        if lo <= SHARE_TOL:
            evals.append(_indirect_at(inputs, beta_ab, beta_a, beta_b, lo, use_aux_b=True))
        hull = evals[0].laie
        for e in evals[1:]:
            hull = hull.hull(e.laie)
        first = evals[-1] if lo <= SHARE_TOL else evals[0]
        return IndirectLaieBound(hull, first.identified_part, first.coefficients, first.effect_intervals, lo)
    if not 0 <= p_j_b <= 1:
        raise ValidationError("P(.,j) must lie in [0, 1]")
    return _indirect_at(inputs, beta_ab, beta_a, beta_b, float(p_j_b), use_aux_b=True)
