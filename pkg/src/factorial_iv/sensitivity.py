"""Multiplier-based sensitivity analysis for the interaction effect.

Unidentified subgroup effects are written as multiples ``lambda`` of
identified reference effects, which makes the interaction effect affine in
the multipliers. Bounds over a box of multipliers are then attained at
vertices, and level sets are straight lines.

Direct mode starts from the joint-effect bound and subtracts the standalone
effects of joint compliers, ``lambda_A * beta_A`` and ``lambda_B * beta_B``.
Indirect mode starts from the interaction coefficient decomposition, with
``lambda_1`` scaling A's effect for A joint compliers, ``lambda_2`` B's effect
for B cross-defiers and ``lambda_3`` B's effect for B joint compliers.
Slopes in indirect mode depend on the unknown share ``P`` of B joint
compliers; it can be fixed or left free.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .core import AssumedInterval, Assumption
from .errors import IdentificationError, PreconditionError, ValidationError
from .identification import TypeShares

DEFAULT_BOX = (0.0, 3.0)
DEFAULT_RESOLUTION = 101
DIRECT, INDIRECT = "DIRECT", "INDIRECT"


@dataclass(frozen=True)
class LambdaModel:
    """``value = intercept + sum_i (slope_i + share_slope_i * P) * lambda_i``."""

    intercept: float
    slopes: Mapping[str, float]
    box: Mapping[str, tuple[float, float]]
    mode: str = DIRECT
    share_slopes: Mapping[str, float] = field(default_factory=dict)
    share: float | None = None
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "slopes", dict(self.slopes))
        object.__setattr__(self, "share_slopes", dict(self.share_slopes))
        object.__setattr__(self, "box", {k: (float(v[0]), float(v[1])) for k, v in self.box.items()})
        if set(self.box) != set(self.slopes):
            raise ValidationError("every multiplier needs a box and a slope")
        if not set(self.share_slopes) <= set(self.slopes):
            raise ValidationError("share slopes refer to unknown multipliers")
        for name, (lo, hi) in self.box.items():
            if not (0 <= lo <= hi and math.isfinite(hi)):
                raise ValidationError(f"box for {name} must satisfy 0 <= lo <= hi < inf, got [{lo}, {hi}]")
        if self.share is not None and not 0 <= self.share <= 1:
            raise ValidationError("the share P must lie in [0, 1]")

    @property
    def names(self) -> list[str]:
        return list(self.slopes)

    @property
    def share_free(self) -> bool:
        return self.share is None and any(v != 0 for v in self.share_slopes.values())

    def slope(self, name: str, share: float | None = None) -> float:
        p = self.share if share is None else share
        extra = self.share_slopes.get(name, 0.0)
        if extra != 0 and p is None:
            raise PreconditionError(f"slope of {name} depends on the free share P; fix it first")
        return self.slopes[name] + (extra * p if extra else 0.0)

    def at_share(self, share: float) -> LambdaModel:
        return replace(self, share=float(share))

    def with_box(self, box: Mapping[str, tuple[float, float]]) -> LambdaModel:
        merged = dict(self.box)
        merged.update(box)
        return replace(self, box=merged)

    def value(self, lambdas: Mapping[str, float], share: float | None = None) -> float:
        unknown = set(lambdas) - set(self.slopes)
        if unknown:
            raise ValidationError(f"unknown multipliers {sorted(unknown)}")
        return self.intercept + sum(self.slope(n, share) * float(lambdas.get(n, 0.0)) for n in self.slopes)

    def describe(self) -> str:
        parts = [f"{self.intercept:.4g}"]
        for n in self.slopes:
            a, b = self.slopes[n], self.share_slopes.get(n, 0.0)
            if b == 0 or self.share is not None:
                coef = self.slope(n) if b else a
                parts.append(f"{'+' if coef >= 0 else '-'} {abs(coef):.4g}*{n}")
            else:
                parts.append(f"+ ({a:.4g} {'+' if b >= 0 else '-'} {abs(b):.4g}*P)*{n}")
        return " ".join(parts)

    def as_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "label": self.label,
            "intercept": self.intercept,
            "slopes": self.slopes,
            "share_slopes": self.share_slopes,
            "share": self.share,
            "box": {k: list(v) for k, v in self.box.items()},
            "expression": self.describe(),
        }


def _box(names: tuple[str, ...], box: tuple[float, float] | Mapping[str, tuple[float, float]] | None) -> dict[str, tuple[float, float]]:
    if box is None:
        return {n: DEFAULT_BOX for n in names}
    if isinstance(box, Mapping):
        return {n: tuple(box.get(n, DEFAULT_BOX)) for n in names}
    return {n: (float(box[0]), float(box[1])) for n in names}


def direct_lambda_model(
    joint_bound: AssumedInterval,
    beta_a: float,
    beta_b: float,
    box: tuple[float, float] | Mapping[str, tuple[float, float]] | None = None,
) -> tuple[LambdaModel, LambdaModel]:
    """Lower and upper bound on the interaction effect as functions of ``(lambda_A, lambda_B)``."""
    b = _box(("lambda_A", "lambda_B"), box)
    slopes = {"lambda_A": -beta_a, "lambda_B": -beta_b}
    lower = LambdaModel(joint_bound.lo, slopes, b, DIRECT, label="lower")
    upper = LambdaModel(joint_bound.hi, slopes, b, DIRECT, label="upper")
    return lower, upper


def indirect_lambda_model(
    shares: TypeShares,
    beta_ab: float,
    beta_a: float,
    beta_b: float,
    p_j_b: float | None = None,
    box: tuple[float, float] | Mapping[str, tuple[float, float]] | None = None,
) -> LambdaModel:
    """Interaction effect for joint compliers as a function of ``(lambda_1, lambda_2, lambda_3)``.

    The intercept does not depend on ``P``: the share cancels between the
    B-joint-complier and B-cross-defier weights on ``beta_B``.
    """
    if not shares.p_cc > 1e-12:
        raise IdentificationError(f"P(c,c) must be positive, got {shares.p_cc:.6g}")
    p_cc = shares.p_cc
    p_j_a = shares.p_j_a
    net_b = -shares.contrast_b
    intercept = beta_ab + (p_j_a / p_cc) * beta_a - (net_b / p_cc) * beta_b
    slopes = {
        "lambda_1": -(p_j_a / p_cc) * beta_a,
        "lambda_2": (net_b / p_cc) * beta_b,
        "lambda_3": 0.0,
    }
    share_slopes = {"lambda_2": beta_b / p_cc, "lambda_3": -beta_b / p_cc}
    return LambdaModel(
        intercept, slopes, _box(("lambda_1", "lambda_2", "lambda_3"), box), INDIRECT,
        share_slopes=share_slopes, share=p_j_b, label="laie",
    )


@dataclass(frozen=True)
class ShareAffineInterval:
    """Bounds of the form ``[lo + lo_share * P, hi + hi_share * P]`` valid for all ``P >= 0``."""

    lo: float
    lo_share: float
    hi: float
    hi_share: float

    def at(self, share: float) -> AssumedInterval:
        return AssumedInterval(self.lo + self.lo_share * share, self.hi + self.hi_share * share, {Assumption.HEURISTIC_LAMBDA})

    def as_dict(self) -> dict[str, float]:
        return {"lo": self.lo, "lo_share": self.lo_share, "hi": self.hi, "hi_share": self.hi_share}


def bound_over_box(model: LambdaModel) -> AssumedInterval | ShareAffineInterval:
    """Exact range of the model over its multiplier box.

    Each multiplier sits at the end of its range picked by the sign of its
    slope. With a free share the slope signs must not depend on ``P >= 0``,
    and the result is affine in ``P``.
    """
    if not model.share_free:
        lo = hi = model.intercept
        for n in model.names:
            s = model.slope(n)
            a, b = model.box[n]
            lo += min(s * a, s * b)
            hi += max(s * a, s * b)
        return AssumedInterval(lo, hi, {Assumption.HEURISTIC_LAMBDA})
    lo = hi = model.intercept
    lo_p = hi_p = 0.0
    for n in model.names:
        a0, a1 = model.slopes[n], model.share_slopes.get(n, 0.0)
        if a0 * a1 < 0:
            raise PreconditionError(f"the sign of the slope of {n} changes with P; fix P to bound the model")
        sign = 1.0 if (a0 > 0 or a1 > 0) else -1.0
        lam_lo, lam_hi = model.box[n]
        at_min, at_max = (lam_lo, lam_hi) if sign > 0 else (lam_hi, lam_lo)
        lo += a0 * at_min
        lo_p += a1 * at_min
        hi += a0 * at_max
        hi_p += a1 * at_max
    return ShareAffineInterval(lo, lo_p, hi, hi_p)


def vertex_extremes(model: LambdaModel) -> tuple[float, float]:
    """Min and max over the box vertices, by enumeration."""
    names = model.names
    values = []
    for mask in range(2 ** len(names)):
        point = {n: model.box[n][(mask >> i) & 1] for i, n in enumerate(names)}
        values.append(model.value(point))
    return min(values), max(values)


def nice_levels(vmin: float, vmax: float, target: int = 10) -> list[float]:
    """Round contour levels covering ``[vmin, vmax]``; includes 0 when it is in range."""
    span = vmax - vmin
    if not span > 0:
        return [vmin]
    raw = span / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(vmin / step)
    last = math.floor(vmax / step)
    return [round(i * step, 12) for i in range(first, last + 1)]


@dataclass(frozen=True)
class LevelSetGrid:
    x_name: str
    y_name: str
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    levels: list[float]
    fixed: dict[str, float]
    share: float | None
    zero_contour: list[tuple[float, float]]

    def metadata(self) -> dict[str, Any]:
        return {
            "x": {"name": self.x_name, "lo": float(self.xs[0]), "hi": float(self.xs[-1]), "n": len(self.xs)},
            "y": {"name": self.y_name, "lo": float(self.ys[0]), "hi": float(self.ys[-1]), "n": len(self.ys)},
            "levels": self.levels,
            "fixed": self.fixed,
            "share": self.share,
            "zero_contour": [list(p) for p in self.zero_contour],
        }


def zero_contour(
    model: LambdaModel,
    var_x: str,
    var_y: str,
    fixed: Mapping[str, float] | None = None,
    level: float = 0.0,
    share: float | None = None,
) -> list[tuple[float, float]]:
    """End points of the segment where the model equals ``level`` inside the box.

    Returns an empty list when the level set misses the box or when both
    slopes vanish.
    """
    fixed = dict(fixed or {})
    base = model.value({k: v for k, v in fixed.items() if k not in (var_x, var_y)}, share) - level
    sx, sy = model.slope(var_x, share), model.slope(var_y, share)
    (x0, x1), (y0, y1) = model.box[var_x], model.box[var_y]
    pts: set[tuple[float, float]] = set()
    tol = 1e-12 * max(1.0, abs(base), abs(sx), abs(sy))
    if sy != 0:
        for x in (x0, x1):
            y = -(base + sx * x) / sy
            if y0 - tol <= y <= y1 + tol:
                pts.add((round(x, 12), round(min(max(y, y0), y1), 12)))
    if sx != 0:
        for y in (y0, y1):
            x = -(base + sy * y) / sx
            if x0 - tol <= x <= x1 + tol:
                pts.add((round(min(max(x, x0), x1), 12), round(y, 12)))
    return sorted(pts)


def level_set_grid(
    model: LambdaModel,
    var_x: str,
    var_y: str,
    resolution: int = DEFAULT_RESOLUTION,
    fixed: Mapping[str, float] | None = None,
    share: float | None = None,
    levels: list[float] | None = None,
) -> LevelSetGrid:
    """Model values on a ``resolution x resolution`` lattice; rows index ``var_y``."""
    if var_x == var_y:
        raise ValidationError("grid axes must be different multipliers")
    for v in (var_x, var_y):
        if v not in model.slopes:
            raise ValidationError(f"unknown multiplier {v!r}")
    if resolution < 1:
        raise ValidationError("resolution must be at least 1")
    fixed = {k: float(v) for k, v in (fixed or {}).items() if k not in (var_x, var_y)}
    xs = np.linspace(*model.box[var_x], resolution)
    ys = np.linspace(*model.box[var_y], resolution)
    base = model.value(fixed, share)
    values = base + model.slope(var_y, share) * ys[:, None] + model.slope(var_x, share) * xs[None, :]
    if levels is None:
        levels = nice_levels(float(values.min()), float(values.max()))
    contour = zero_contour(model, var_x, var_y, fixed, 0.0, share)
    return LevelSetGrid(var_x, var_y, xs, ys, values, levels, fixed, share, contour)


def write_grid(grid: LevelSetGrid, path: str | Path, fmt: str = "csv") -> None:
    """Write a grid as CSV or whitespace (gnuplot ``matrix``) text with a
    ``#``-prefixed JSON metadata line, or as a single JSON document."""
    fmt = fmt.lower()
    if fmt == "json":
        doc = {"schema_version": 1, **grid.metadata(), "values": grid.values.tolist()}
        Path(path).write_text(json.dumps(doc, indent=1))
        return
    if fmt not in ("csv", "gnuplot"):
        raise ValidationError(f"unknown grid format {fmt!r}")
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(grid.metadata()) + "\n")
        if fmt == "csv":
            writer = csv.writer(fh)
            for row in grid.values:
                writer.writerow([repr(float(v)) for v in row])
        else:
            for row in grid.values:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_grid(path: str | Path) -> tuple[dict[str, Any], np.ndarray]:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return doc, np.array(doc["values"], dtype=float)
    lines = text.splitlines()
    meta = json.loads(lines[0][1:].strip())
    delim = "," if "," in lines[1] else None
    rows = [[float(v) for v in (ln.split(delim) if delim else ln.split())] for ln in lines[1:] if ln.strip()]
    return meta, np.array(rows)
