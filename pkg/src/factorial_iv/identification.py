"""Compliance-type shares and point-identified potential-outcome moments.

Type labels per member: ``s`` self-complier (takes up whenever own instrument
is on), ``j`` joint complier (only when both instruments are on), ``n`` never
taker, ``d`` cross-defier (only when own but not partner instrument is on).
``c`` denotes compliers with both instruments on (``s`` or ``j``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

from .core import CellTable, check_one_sided
from .errors import AssumptionViolation, IdentificationError, InconsistencyError, MissingCellError

CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class Restrictions:
    no_cross_defiers_a: bool = False
    no_cross_defiers_b: bool = False
    no_joint_compliers_a: bool = False
    no_joint_compliers_b: bool = False
    no_nj_pairs: bool = False

    def tags(self) -> list[str]:
        return [k.upper() for k, v in asdict(self).items() if v]


@dataclass(frozen=True)
class SideShares:
    """Marginal type shares for one member; ``None`` where unresolved."""

    s: float | None
    j: float | None
    n: float | None
    d: float | None

    @property
    def resolved(self) -> bool:
        return None not in (self.s, self.j, self.n, self.d)


@dataclass(frozen=True)
class TypeShares:
    p_sd_a: float
    p_sd_b: float
    p_cc: float
    p_c_ndA: float
    p_ndA_c: float
    p_ndnd: float
    p_c_a: float
    p_c_b: float
    side_a: SideShares = field(default_factory=lambda: SideShares(None, None, None, None))
    side_b: SideShares = field(default_factory=lambda: SideShares(None, None, None, None))
    restrictions: Restrictions = field(default_factory=Restrictions)

    @property
    def p_nd_a(self) -> float:
        return 1.0 - self.p_c_a

    @property
    def p_nd_b(self) -> float:
        return 1.0 - self.p_c_b

    @property
    def p_nj_a(self) -> float:
        return 1.0 - self.p_sd_a

    @property
    def p_nj_b(self) -> float:
        return 1.0 - self.p_sd_b

    @property
    def contrast_a(self) -> float:
        """``P(j,.) - P(d,.)``: the takeup change for A when B's instrument is switched on."""
        return self.p_c_a - self.p_sd_a

    @property
    def contrast_b(self) -> float:
        return self.p_c_b - self.p_sd_b

    def _get(self, side: SideShares, name: str, label: str) -> float:
        v = getattr(side, name)
        if v is None:
            raise IdentificationError(f"share {label} is not identified without further restrictions")
        return v

    @property
    def p_s_a(self) -> float:
        return self._get(self.side_a, "s", "P(s,.)")

    @property
    def p_j_a(self) -> float:
        return self._get(self.side_a, "j", "P(j,.)")

    @property
    def p_n_a(self) -> float:
        return self._get(self.side_a, "n", "P(n,.)")

    @property
    def p_d_a(self) -> float:
        return self._get(self.side_a, "d", "P(d,.)")

    @property
    def p_s_b(self) -> float:
        return self._get(self.side_b, "s", "P(.,s)")

    @property
    def p_j_b(self) -> float:
        return self._get(self.side_b, "j", "P(.,j)")

    @property
    def p_n_b(self) -> float:
        return self._get(self.side_b, "n", "P(.,n)")

    @property
    def p_d_b(self) -> float:
        return self._get(self.side_b, "d", "P(.,d)")

    def as_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "p_sd_a": self.p_sd_a, "p_sd_b": self.p_sd_b,
            "p_c_a": self.p_c_a, "p_c_b": self.p_c_b,
            "p_nd_a": self.p_nd_a, "p_nd_b": self.p_nd_b,
            "p_nj_a": self.p_nj_a, "p_nj_b": self.p_nj_b,
            "p_cc": self.p_cc, "p_c_ndA": self.p_c_ndA, "p_ndA_c": self.p_ndA_c, "p_ndnd": self.p_ndnd,
            "contrast_a": self.contrast_a, "contrast_b": self.contrast_b,
        }
        for tag, side in (("a", self.side_a), ("b", self.side_b)):
            for name in ("s", "j", "n", "d"):
                out[f"p_{name}_{tag}"] = getattr(side, name)
        out["restrictions"] = self.restrictions.tags()
        return out

    def p_j_b_range(self) -> tuple[float, float]:
        """Values of ``P(., j)`` compatible with the observed takeup frequencies."""
        return max(0.0, self.contrast_b), min(self.p_c_b, self.p_nj_b)

    def with_p_j_b(self, p_j_b: float) -> TypeShares:
        """Resolve B's marginal shares from an assumed joint-complier share."""
        side_b = _resolve_given_j(self.p_sd_b, self.p_c_b, p_j_b, "B")
        return TypeShares(
            self.p_sd_a, self.p_sd_b, self.p_cc, self.p_c_ndA, self.p_ndA_c, self.p_ndnd,
            self.p_c_a, self.p_c_b, self.side_a, side_b, self.restrictions,
        )


def _clamp(value: float, what: str) -> float:
    if value < -CLAMP_TOL:
        raise InconsistencyError(f"{what} would be {value:.6g} < 0")
    return max(value, 0.0)


def _resolve_given_j(p_sd: float, p_c: float, p_j: float, side: str) -> SideShares:
    s = _clamp(p_c - p_j, f"P(s) on side {side} [P(c) - P(j)]")
    d = _clamp(p_sd - s, f"P(d) on side {side} [P(s or d) - P(s)]")
    n = _clamp(1.0 - p_c - d, f"P(n) on side {side} [1 - P(c) - P(d)]")
    return SideShares(s, _clamp(p_j, f"P(j) on side {side}"), n, d)


def _resolve_side(p_sd: float, p_c: float, no_d: bool, no_j: bool, side: str) -> SideShares:
    if no_d and no_j and abs(p_c - p_sd) > CLAMP_TOL:
        raise InconsistencyError(
            f"side {side}: ruling out both joint compliers and cross-defiers needs P(c) = P(s or d), "
            f"got {p_c:.6g} vs {p_sd:.6g}"
        )
    if no_d:
        if p_c < p_sd - CLAMP_TOL:
            raise InconsistencyError(
                f"side {side}: no cross-defiers requires takeup with both instruments ({p_c:.6g}) "
                f">= takeup with own instrument only ({p_sd:.6g})"
            )
        return SideShares(p_sd, _clamp(p_c - p_sd, f"P(j) on side {side}"), _clamp(1.0 - p_c, f"P(n) on side {side}"), 0.0)
    if no_j:
        if p_c > p_sd + CLAMP_TOL:
            raise InconsistencyError(
                f"side {side}: no joint compliers requires takeup with both instruments ({p_c:.6g}) "
                f"<= takeup with own instrument only ({p_sd:.6g})"
            )
        return SideShares(p_c, 0.0, _clamp(1.0 - p_sd, f"P(n) on side {side}"), _clamp(p_sd - p_c, f"P(d) on side {side}"))
    return SideShares(None, None, None, None)


def type_shares(table: CellTable, restrictions: Restrictions | None = None, p_j_b: float | None = None) -> TypeShares:
    """Identify compliance-type shares from takeup frequencies.

    Without restrictions only aggregates such as ``P(s or d, .)`` are
    identified. Ruling out cross-defiers or joint compliers on a side resolves
    its four marginal shares; ``p_j_b`` supplies an assumed ``P(., j)`` when B
    is left unrestricted.
    """
    restrictions = restrictions or Restrictions()
    report = check_one_sided(table, tol=CLAMP_TOL * max(1.0, table.total_mass()))
    if not report.passed:
        raise AssumptionViolation(
            f"one-sided noncompliance fails (treated-without-instrument mass A={report.violation_a:.6g}, "
            f"B={report.violation_b:.6g})"
        )
    for cell in ((1, 0), (0, 1), (1, 1)):
        if not table.nonempty(*cell):
            raise MissingCellError(cell)
    p_sd_a = table.d_a(1, 0)
    p_sd_b = table.d_b(0, 1)
    p_c_a = table.d_a(1, 1)
    p_c_b = table.d_b(1, 1)
    side_a = _resolve_side(p_sd_a, p_c_a, restrictions.no_cross_defiers_a, restrictions.no_joint_compliers_a, "A")
    side_b = _resolve_side(p_sd_b, p_c_b, restrictions.no_cross_defiers_b, restrictions.no_joint_compliers_b, "B")
    if p_j_b is not None:
        if side_b.resolved and not math.isclose(side_b.j, p_j_b, abs_tol=CLAMP_TOL):
            raise InconsistencyError(f"assumed P(.,j) = {p_j_b} contradicts the restriction on B (P(.,j) = {side_b.j})")
        side_b = _resolve_given_j(p_sd_b, p_c_b, p_j_b, "B")
    return TypeShares(
        p_sd_a=p_sd_a,
        p_sd_b=p_sd_b,
        p_cc=table.prob(1, 1, 1, 1),
        p_c_ndA=table.prob(1, 1, 1, 0),
        p_ndA_c=table.prob(1, 1, 0, 1),
        p_ndnd=table.prob(1, 1, 0, 0),
        p_c_a=p_c_a,
        p_c_b=p_c_b,
        side_a=side_a,
        side_b=side_b,
        restrictions=restrictions,
    )


@dataclass(frozen=True)
class Diagnostic:
    side: str
    contrast: float
    statement: str


def compliance_diagnostics(table: CellTable, tol: float = CLAMP_TOL) -> list[Diagnostic]:
    """Sign of each member's takeup response to the partner's instrument."""
    for cell in ((1, 0), (0, 1), (1, 1)):
        if not table.nonempty(*cell):
            raise MissingCellError(cell)
    out = []
    for side, contrast in (("A", table.d_a(1, 1) - table.d_a(1, 0)), ("B", table.d_b(1, 1) - table.d_b(0, 1))):
        if contrast > tol:
            msg = f"joint compliers exist for {side}"
        elif contrast < -tol:
            msg = f"cross-defiers exist for {side}"
        else:
            msg = f"no net partner-instrument effect on {side} takeup"
        out.append(Diagnostic(side, contrast, msg))
    return out


@dataclass(frozen=True)
class IdentifiedMoments:
    """Conditional potential-outcome means that equal observed cell means.

    Naming: ``m<dA><dB>_<set>`` is ``E[Y(dA dB) | set]``. Sets: ``all``
    (everyone), ``njA`` = (n or j, .), ``njB`` = (., n or j), ``ndnd`` =
    (n or d, n or d), ``sdA`` = (s or d, .), ``sdB`` = (., s or d), ``c_nd`` =
    (c, n or d), ``nd_c`` = (n or d, c), ``cc`` = (c, c). ``None`` marks a
    moment whose cell is empty.
    """

    m00_all: float | None
    m00_njA: float | None
    m00_njB: float | None
    m00_ndnd: float | None
    m10_sdA: float | None
    m01_sdB: float | None
    m10_c_nd: float | None
    m01_nd_c: float | None
    m11_cc: float | None
    p_sd_a: float = math.nan
    p_sd_b: float = math.nan

    def _derived(self, p_sd: float, m_nj: float | None, label: str) -> float:
        if not p_sd > 0:
            raise IdentificationError(f"{label} needs a positive self-complier-or-defier share, got {p_sd}")
        if self.m00_all is None:
            raise IdentificationError(f"{label} needs E[Y(00)]")
        p_nj = 1.0 - p_sd
        nj_term = 0.0 if p_nj == 0 else (m_nj if m_nj is not None else math.nan) * p_nj
        if math.isnan(nj_term):
            raise IdentificationError(f"{label} needs the non-complier mean, whose cell is empty")
        return (self.m00_all - nj_term) / p_sd

    @property
    def m00_sdA(self) -> float:
        """``E[Y(00) | (s or d, .)]`` by the law of iterated expectations."""
        return self._derived(self.p_sd_a, self.m00_njA, "E[Y(00)|(s or d,.)]")

    @property
    def m00_sdB(self) -> float:
        return self._derived(self.p_sd_b, self.m00_njB, "E[Y(00)|(.,s or d)]")

    def as_dict(self) -> dict[str, float | None]:
        out: dict[str, float | None] = {
            k: v for k, v in asdict(self).items() if k.startswith("m")
        }
        for name in ("m00_sdA", "m00_sdB"):
            try:
                out[name] = getattr(self, name)
            except IdentificationError:
                out[name] = None
        return out


def identified_moments(table: CellTable, shares: TypeShares | None = None) -> IdentifiedMoments:
    report = check_one_sided(table, tol=CLAMP_TOL * max(1.0, table.total_mass()))
    if not report.passed:
        raise AssumptionViolation("one-sided noncompliance fails; outcome moments are not identified")
    p_sd_a = shares.p_sd_a if shares is not None else (table.d_a(1, 0) if table.nonempty(1, 0) else math.nan)
    p_sd_b = shares.p_sd_b if shares is not None else (table.d_b(0, 1) if table.nonempty(0, 1) else math.nan)
    return IdentifiedMoments(
        m00_all=table.y(0, 0) if table.nonempty(0, 0) else None,
        m00_njA=table.mean(1, 0, 0, 0),
        m00_njB=table.mean(0, 1, 0, 0),
        m00_ndnd=table.mean(1, 1, 0, 0),
        m10_sdA=table.mean(1, 0, 1, 0),
        m01_sdB=table.mean(0, 1, 0, 1),
        m10_c_nd=table.mean(1, 1, 1, 0),
        m01_nd_c=table.mean(1, 1, 0, 1),
        m11_cc=table.mean(1, 1, 1, 1),
        p_sd_a=p_sd_a,
        p_sd_b=p_sd_b,
    )


def delta_a1_weights(shares: TypeShares) -> dict[str, float]:
    """Weights of the three-group average that the A Wald ratio with B's
    instrument on recovers when there are no cross-defiers and no (n, j) pairs.

    Keys: ``cj`` for A-complier with B joint complier (joint effect),
    ``cs`` with B self-complier (effect of A given B), ``cn`` with B never
    taker (effect of A without B).
    """
    r = shares.restrictions
    if not (r.no_cross_defiers_a and r.no_cross_defiers_b and r.no_nj_pairs):
        raise IdentificationError("group weights need no cross-defiers on either side and no (n, j) pairs")
    if not shares.p_c_a > 0:
        raise IdentificationError("P(c,.) must be positive")
    p_cj = shares.p_j_b
    return {
        "cj": p_cj / shares.p_c_a,
        "cs": (shares.p_cc - p_cj) / shares.p_c_a,
        "cn": shares.p_c_ndA / shares.p_c_a,
    }
