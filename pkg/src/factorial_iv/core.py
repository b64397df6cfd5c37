"""Data model, ingestion and cell-table sufficient statistics.

Everything downstream of ingestion is a function of a :class:`CellTable`: the
mass and mean outcome of every ``(z_a, z_b, d_a, d_b)`` cell together with the
per-instrument-cell outcome and takeup means. A table can be built from unit
records (optionally weighted) or supplied directly as published moments.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import SchemaError, ValidationError

CELLS: tuple[tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))
REQUIRED_COLUMNS = ("y", "d_a", "d_b", "z_a", "z_b")

_TRUTHY = {"1", "true", "yes", "t", "y"}
_FALSY = {"0", "false", "no", "f", "n"}
_MISSING = {"", "na", "nan", "n/a", "none", "null", "."}


class Assumption(str, enum.Enum):
    """Tags attached to intervals to record what they rely on."""

    BOUNDED_OUTCOMES = "BOUNDED_OUTCOMES"
    MONOTONE_RESPONSE = "MONOTONE_RESPONSE"
    NO_CROSS_DEFIERS_A = "NO_CROSS_DEFIERS_A"
    NO_JOINT_COMPLIERS_B = "NO_JOINT_COMPLIERS_B"
    Y11_GE_Y00 = "Y11_GE_Y00"
    Y11_GE_MAX = "Y11_GE_MAX"
    HEURISTIC_LAMBDA = "HEURISTIC_LAMBDA"


@dataclass(frozen=True)
class AssumedInterval:
    """A closed interval valid under a set of assumptions."""

    lo: float
    hi: float
    assumptions: frozenset[Assumption] = frozenset()
    clipped: bool = False
    k: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints must not be NaN")
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")
        if self.clipped:
            if self.k is None:
                raise ValueError("a clipped interval must record K")
            if self.lo < 0 or self.hi > self.k:
                raise ValueError("clipped interval escapes [0, K]")
        object.__setattr__(self, "assumptions", frozenset(self.assumptions))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float, tol: float = 1e-9) -> bool:
        scale = max(1.0, abs(value))
        return self.lo - tol * scale <= value <= self.hi + tol * scale

    def clip(self, k: float) -> AssumedInterval:
        """Intersect with the trivial range ``[0, k]``."""
        lo = min(max(self.lo, 0.0), k)
        hi = max(min(self.hi, k), 0.0)
        return AssumedInterval(lo, hi, self.assumptions, clipped=True, k=k)

    def intersect(self, other: AssumedInterval) -> AssumedInterval:
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi and lo - hi <= 1e-9 * max(1.0, abs(lo), abs(hi)):
            lo = hi = 0.5 * (lo + hi)
        if lo > hi:
            raise ValueError(f"intervals [{self.lo}, {self.hi}] and [{other.lo}, {other.hi}] are disjoint")
        return AssumedInterval(lo, hi, self.assumptions | other.assumptions)

    def scale(self, a: float) -> AssumedInterval:
        lo, hi = (a * self.lo, a * self.hi) if a >= 0 else (a * self.hi, a * self.lo)
        return AssumedInterval(lo, hi, self.assumptions)

    def shift(self, c: float) -> AssumedInterval:
        return AssumedInterval(self.lo + c, self.hi + c, self.assumptions)

    def __add__(self, other: AssumedInterval) -> AssumedInterval:
        return AssumedInterval(self.lo + other.lo, self.hi + other.hi, self.assumptions | other.assumptions)

    def hull(self, other: AssumedInterval) -> AssumedInterval:
        return AssumedInterval(min(self.lo, other.lo), max(self.hi, other.hi), self.assumptions | other.assumptions)

    def with_assumptions(self, *tags: Assumption) -> AssumedInterval:
        return AssumedInterval(self.lo, self.hi, self.assumptions | set(tags), self.clipped, self.k)

    def as_dict(self) -> dict[str, Any]:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "assumptions": sorted(a.value for a in self.assumptions),
            "clipped": self.clipped,
        }


@dataclass(frozen=True)
class Observation:
    y: float
    d_a: int
    d_b: int
    z_a: int
    z_b: int
    weight: float = 1.0

    def __post_init__(self) -> None:
        for name in ("d_a", "d_b", "z_a", "z_b"):
            if getattr(self, name) not in (0, 1):
                raise SchemaError(f"{name} must be 0 or 1", column=name)
        if not math.isfinite(self.y):
            raise SchemaError("outcome must be finite", column="y")
        if not (self.weight >= 0 and math.isfinite(self.weight)):
            raise SchemaError("weight must be finite and nonnegative", column="weight")


@dataclass(frozen=True)
class Dataset:
    """Column-oriented container of validated observations."""

    y: np.ndarray
    d_a: np.ndarray
    d_b: np.ndarray
    z_a: np.ndarray
    z_b: np.ndarray
    weight: np.ndarray
    n_dropped: int = 0

    def __post_init__(self) -> None:
        n = len(self.y)
        for name in ("d_a", "d_b", "z_a", "z_b"):
            raw = np.asarray(getattr(self, name))
            if raw.size and not np.all((raw == 0) | (raw == 1)):
                raise SchemaError("values must be 0 or 1", column=name)
        cols = {
            "y": np.asarray(self.y, dtype=float),
            "d_a": np.asarray(self.d_a, dtype=np.int8),
            "d_b": np.asarray(self.d_b, dtype=np.int8),
            "z_a": np.asarray(self.z_a, dtype=np.int8),
            "z_b": np.asarray(self.z_b, dtype=np.int8),
            "weight": np.asarray(self.weight, dtype=float),
        }
        for name, col in cols.items():
            if col.shape != (n,):
                raise ValidationError(f"column {name} has shape {col.shape}, expected ({n},)")
            col.setflags(write=False)
            object.__setattr__(self, name, col)
        if not np.all(np.isfinite(cols["y"])):
            raise SchemaError("outcome must be finite", column="y")
        if np.any(cols["weight"] < 0) or not np.all(np.isfinite(cols["weight"])):
            raise SchemaError("weights must be finite and nonnegative", column="weight")

    def __len__(self) -> int:
        return len(self.y)

    def __iter__(self) -> Iterator[Observation]:
        for i in range(len(self)):
            yield Observation(
                float(self.y[i]), int(self.d_a[i]), int(self.d_b[i]),
                int(self.z_a[i]), int(self.z_b[i]), float(self.weight[i]),
            )

    @classmethod
    def from_observations(cls, observations: Iterable[Observation], n_dropped: int = 0) -> Dataset:
        obs = list(observations)
        return cls(
            y=np.array([o.y for o in obs], dtype=float),
            d_a=np.array([o.d_a for o in obs], dtype=np.int8),
            d_b=np.array([o.d_b for o in obs], dtype=np.int8),
            z_a=np.array([o.z_a for o in obs], dtype=np.int8),
            z_b=np.array([o.z_b for o in obs], dtype=np.int8),
            weight=np.array([o.weight for o in obs], dtype=float),
            n_dropped=n_dropped,
        )

    def write_csv(self, path: str | Path, with_weight: bool | None = None) -> None:
        if with_weight is None:
            with_weight = bool(np.any(self.weight != 1.0))
        header = list(REQUIRED_COLUMNS) + (["weight"] if with_weight else [])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(len(self)):
                row = [repr(float(self.y[i])), int(self.d_a[i]), int(self.d_b[i]), int(self.z_a[i]), int(self.z_b[i])]
                if with_weight:
                    row.append(repr(float(self.weight[i])))
                writer.writerow(row)


def _coerce_binary(value: Any, row: int, column: str, lenient: bool) -> int:
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, (int, np.integer)) and value in (0, 1):
        return int(value)
    if isinstance(value, (float, np.floating)) and value in (0.0, 1.0):
        return int(value)
    if isinstance(value, str):
        text = value.strip()
        if text in ("0", "1"):
            return int(text)
        if lenient:
            low = text.lower()
            if low in _TRUTHY:
                return 1
            if low in _FALSY:
                return 0
    raise SchemaError(f"non-binary value {value!r}", row=row, column=column)


def _is_missing(value: Any) -> bool:
    if value is None:
        return True
    if isinstance(value, float) and math.isnan(value):
        return True
    return isinstance(value, str) and value.strip().lower() in _MISSING


def ingest(
    records: Iterable[Mapping[str, Any]],
    schema: Mapping[str, str] | None = None,
    lenient: bool = False,
) -> Dataset:
    """Validate raw rows into a :class:`Dataset`.

    ``schema`` maps canonical names (``y``, ``d_a``, ``d_b``, ``z_a``, ``z_b``,
    ``weight``) to the column names actually present in ``records``. Rows with a
    missing outcome are dropped and counted in ``Dataset.n_dropped``; any other
    missing or non-binary field raises :class:`SchemaError`.
    """
    schema = dict(schema or {})
    colname = {c: schema.get(c, c) for c in (*REQUIRED_COLUMNS, "weight")}
    kept: list[Observation] = []
    dropped = 0
    n_rows = 0
    for i, rec in enumerate(records, start=1):
        n_rows += 1
        for c in REQUIRED_COLUMNS:
            if colname[c] not in rec:
                raise SchemaError("required column absent", row=i, column=colname[c])
        y_raw = rec[colname["y"]]
        if _is_missing(y_raw):
            dropped += 1
            continue
        try:
            y = float(y_raw)
        except (TypeError, ValueError):
            raise SchemaError(f"outcome {y_raw!r} is not numeric", row=i, column=colname["y"]) from None
        if not math.isfinite(y):
            raise SchemaError("outcome must be finite", row=i, column=colname["y"])
        bits = {}
        for c in ("d_a", "d_b", "z_a", "z_b"):
            raw = rec[colname[c]]
            if _is_missing(raw):
                raise SchemaError("missing value", row=i, column=colname[c])
            bits[c] = _coerce_binary(raw, i, colname[c], lenient)
        w_raw = rec.get(colname["weight"], 1.0)
        try:
            w = 1.0 if _is_missing(w_raw) else float(w_raw)
        except (TypeError, ValueError):
            raise SchemaError(f"weight {w_raw!r} is not numeric", row=i, column=colname["weight"]) from None
        if not (math.isfinite(w) and w >= 0):
            raise SchemaError("weight must be finite and nonnegative", row=i, column=colname["weight"])
        kept.append(Observation(y, bits["d_a"], bits["d_b"], bits["z_a"], bits["z_b"], w))
    if n_rows == 0:
        raise ValidationError("no input rows")
    if not kept:
        raise ValidationError(f"all {dropped} rows have a missing outcome")
    return Dataset.from_observations(kept, n_dropped=dropped)


def read_csv(path: str | Path, schema: Mapping[str, str] | None = None, lenient: bool = False) -> Dataset:
    with open(path, newline="") as fh:
        return ingest(csv.DictReader(fh), schema=schema, lenient=lenient)


@dataclass(frozen=True)
class CellMoments:
    """Published moments for one instrument cell (moments-input mode).

    ``probs`` maps ``(d_a, d_b)`` to ``P(D_A=d_a, D_B=d_b | Z)`` and ``means``
    to ``E[Y | D, Z]`` (``None`` when the cell is empty). The marginal
    summaries default to values implied by ``probs``/``means``.
    """

    n: float
    probs: Mapping[tuple[int, int], float]
    means: Mapping[tuple[int, int], float | None]
    y_mean: float | None = None
    d_a_mean: float | None = None
    d_b_mean: float | None = None


@dataclass(frozen=True)
class CellTable:
    """Sufficient statistics on the 2x2x2x2 design.

    Arrays are indexed ``[z_a, z_b, d_a, d_b]``; per-instrument-cell summaries
    are indexed ``[z_a, z_b]``. Means on zero-mass cells are NaN.
    """

    mass: np.ndarray
    ybar: np.ndarray
    y_cell: np.ndarray
    da_cell: np.ndarray
    db_cell: np.ndarray
    dab_cell: np.ndarray
    cell_mass: np.ndarray
    source: str = "data"

    def __post_init__(self) -> None:
        for name in ("mass", "ybar", "y_cell", "da_cell", "db_cell", "dab_cell", "cell_mass"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.mass.shape != (2, 2, 2, 2) or self.cell_mass.shape != (2, 2):
            raise ValidationError("cell table arrays have the wrong shape")
        if np.any(self.mass < 0) or np.any(self.cell_mass < 0):
            raise ValidationError("cell masses must be nonnegative")

    # -- accessors -------------------------------------------------------
    def n(self, za: int, zb: int) -> float:
        return float(self.cell_mass[za, zb])

    def total_mass(self) -> float:
        return float(self.cell_mass.sum())

    def prob(self, za: int, zb: int, da: int, db: int) -> float:
        """``P(D_A=da, D_B=db | Z_A=za, Z_B=zb)``; NaN on an empty instrument cell."""
        m = self.cell_mass[za, zb]
        return float(self.mass[za, zb, da, db] / m) if m > 0 else math.nan

    def mean(self, za: int, zb: int, da: int, db: int) -> float | None:
        """``E[Y | D, Z]``, or ``None`` when the cell has zero mass."""
        if self.mass[za, zb, da, db] <= 0:
            return None
        return float(self.ybar[za, zb, da, db])

    def y(self, za: int, zb: int) -> float:
        return float(self.y_cell[za, zb])

    def d_a(self, za: int, zb: int) -> float:
        return float(self.da_cell[za, zb])

    def d_b(self, za: int, zb: int) -> float:
        return float(self.db_cell[za, zb])

    def d_ab(self, za: int, zb: int) -> float:
        return float(self.dab_cell[za, zb])

    def nonempty(self, za: int, zb: int) -> bool:
        return self.cell_mass[za, zb] > 0

    def check_invariants(self, tol: float = 1e-9) -> None:
        """Raise if masses do not add up or marginal means disagree with them."""
        for za, zb in CELLS:
            m = self.cell_mass[za, zb]
            s = self.mass[za, zb].sum()
            if abs(s - m) > tol * max(1.0, m):
                raise ValidationError(f"treatment-cell masses in ({za},{zb}) sum to {s}, not {m}")
            if m > 0:
                implied_a = self.mass[za, zb, 1, :].sum() / m
                implied_b = self.mass[za, zb, :, 1].sum() / m
                if abs(implied_a - self.da_cell[za, zb]) > tol or abs(implied_b - self.db_cell[za, zb]) > tol:
                    raise ValidationError(f"takeup means in ({za},{zb}) disagree with cell masses")

    # -- constructors ----------------------------------------------------
    @classmethod
    def from_moments(cls, cells: Mapping[tuple[int, int], CellMoments], rounding_tol: float = 0.02) -> CellTable:
        """Build a table from published cell probabilities and means.

        Published tables are rounded, so probabilities need only sum to one
        and agree with the reported takeup means within ``rounding_tol``.
        """
        mass = np.zeros((2, 2, 2, 2))
        ybar = np.full((2, 2, 2, 2), np.nan)
        y_cell = np.full((2, 2), np.nan)
        da_cell = np.full((2, 2), np.nan)
        db_cell = np.full((2, 2), np.nan)
        dab_cell = np.full((2, 2), np.nan)
        cell_mass = np.zeros((2, 2))
        for (za, zb), cm in cells.items():
            if (za, zb) not in CELLS:
                raise ValidationError(f"unknown instrument cell {(za, zb)!r}")
            if not cm.n >= 0:
                raise ValidationError(f"cell ({za},{zb}): mass must be nonnegative")
            cell_mass[za, zb] = cm.n
            total_p = 0.0
            for (da, db), p in cm.probs.items():
                if (da, db) not in CELLS:
                    raise ValidationError(f"unknown treatment cell {(da, db)!r}")
                if not 0.0 <= p <= 1.0:
                    raise ValidationError(f"cell ({za},{zb}),({da},{db}): probability {p} outside [0,1]")
                total_p += p
                mass[za, zb, da, db] = cm.n * p
                mu = cm.means.get((da, db))
                if p > 0:
                    if mu is None:
                        raise ValidationError(f"cell ({za},{zb}),({da},{db}) has positive probability but no mean")
                    ybar[za, zb, da, db] = float(mu)
            if cm.n > 0 and abs(total_p - 1.0) > rounding_tol:
                raise ValidationError(f"cell ({za},{zb}): probabilities sum to {total_p:.4f}")
            if cm.n <= 0:
                continue
            implied_a = sum(p for (da, _), p in cm.probs.items() if da == 1)
            implied_b = sum(p for (_, db), p in cm.probs.items() if db == 1)
            da_cell[za, zb] = implied_a if cm.d_a_mean is None else cm.d_a_mean
            db_cell[za, zb] = implied_b if cm.d_b_mean is None else cm.d_b_mean
            if abs(da_cell[za, zb] - implied_a) > rounding_tol or abs(db_cell[za, zb] - implied_b) > rounding_tol:
                raise ValidationError(f"cell ({za},{zb}): takeup means disagree with joint probabilities")
            dab_cell[za, zb] = cm.probs.get((1, 1), 0.0)
            if cm.y_mean is None:
                num = sum(p * cm.means[d] for d, p in cm.probs.items() if p > 0)
                y_cell[za, zb] = num / total_p
            else:
                y_cell[za, zb] = cm.y_mean
        return cls(mass, ybar, y_cell, da_cell, db_cell, dab_cell, cell_mass, source="moments")


def build_cell_table(dataset: Dataset) -> CellTable:
    """Weighted masses and means for every cell of the design."""
    if len(dataset) == 0:
        raise ValidationError("dataset is empty")
    w = dataset.weight
    idx = ((dataset.z_a.astype(np.intp) * 2 + dataset.z_b) * 2 + dataset.d_a) * 2 + dataset.d_b
    mass = np.bincount(idx, weights=w, minlength=16).reshape(2, 2, 2, 2)
    ysum = np.bincount(idx, weights=w * dataset.y, minlength=16).reshape(2, 2, 2, 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        ybar = np.where(mass > 0, ysum / np.where(mass > 0, mass, 1.0), np.nan)
    cell_mass = mass.sum(axis=(2, 3))
    safe = np.where(cell_mass > 0, cell_mass, 1.0)
    empty = cell_mass <= 0
    y_cell = np.where(empty, np.nan, ysum.sum(axis=(2, 3)) / safe)
    da_cell = np.where(empty, np.nan, mass[:, :, 1, :].sum(axis=2) / safe)
    db_cell = np.where(empty, np.nan, mass[:, :, :, 1].sum(axis=2) / safe)
    dab_cell = np.where(empty, np.nan, mass[:, :, 1, 1] / safe)
    return CellTable(mass, ybar, y_cell, da_cell, db_cell, dab_cell, cell_mass, source="data")


@dataclass(frozen=True)
class OneSidedReport:
    """Mass of observations treated without their own instrument."""

    violation_a: float
    violation_b: float
    tol: float = 0.0
    cells: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violation_a <= self.tol and self.violation_b <= self.tol

    def as_dict(self) -> dict[str, Any]:
        return {"passed": self.passed, "violation_a": self.violation_a, "violation_b": self.violation_b, "cells": self.cells}


def check_one_sided(table: CellTable, tol: float = 0.0) -> OneSidedReport:
    """Treated-A mass with ``z_a=0`` and treated-B mass with ``z_b=0``."""
    cells: dict[str, float] = {}
    va = vb = 0.0
    for za, zb, da, db in product((0, 1), repeat=4):
        m = float(table.mass[za, zb, da, db])
        if m <= 0:
            continue
        bad_a = za == 0 and da == 1
        bad_b = zb == 0 and db == 1
        if bad_a:
            va += m
        if bad_b:
            vb += m
        if bad_a or bad_b:
            cells[f"z{za}{zb}/d{da}{db}"] = m
    return OneSidedReport(va, vb, tol, cells)


def cell_key(za: int, zb: int) -> str:
    return f"z{za}{zb}"


def parse_cell_key(key: str, prefix: str) -> tuple[int, int]:
    if len(key) != 3 or key[0] != prefix or key[1] not in "01" or key[2] not in "01":
        raise ValidationError(f"bad cell key {key!r}; expected {prefix}00..{prefix}11")
    return int(key[1]), int(key[2])


def weighted_term(mean: float | None, weight: float, label: str = "") -> float:
    """``mean * weight`` with the convention that a zero weight kills an undefined mean."""
    if weight == 0 or (abs(weight) < 1e-15):
        return 0.0
    if mean is None or math.isnan(mean):
        from .errors import IdentificationError

        raise IdentificationError(f"moment {label or '?'} is undefined but carries weight {weight:.4g}")
    return mean * weight


def as_sequence(x: Any) -> Sequence[Any]:
    return x if isinstance(x, (list, tuple)) else [x]
