"""Moments files: published cell summaries in JSON, as an alternative to raw data.

Schema (``schema_version`` 1)::

    {
      "k": 100,
      "table1": {"z11": {"n": 67, "d_a": 0.49, "d_b": 0.81, "y": 66.98}, ...},
      "joint_probs": {"z11": {"d11": 0.49, "d10": 0.0, "d01": 0.31, "d00": 0.19}},
      "cond_means": {"z11": {"d11": 66.94, "d10": null, ...}, ...},
      "table6": {"coef": {"const": ..., "D_A": ..., "D_B": ..., "D_AD_B": ...},
                 "se": {...}}
    }

Joint takeup probabilities may be omitted for a cell where one treatment is
never taken, since they then follow from the takeup means.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .core import CELLS, CellMoments, CellTable, cell_key, parse_cell_key
from .errors import ValidationError
from .estimands import COEF_NAMES

SCHEMA_VERSION = 1
BUILTIN = {"application": "application_moments.json"}


@dataclass(frozen=True)
class MomentsFile:
    table: CellTable
    k: float | None
    reported_beta: np.ndarray | None = None
    reported_se: np.ndarray | None = None
    description: str = ""


def _cell_probs(key: str, t1: Mapping[str, Any], joint: Mapping[str, Any] | None) -> dict[tuple[int, int], float]:
    if joint is not None:
        return {parse_cell_key(d, "d"): float(p) for d, p in joint.items()}
    d_a, d_b = float(t1["d_a"]), float(t1["d_b"])
    if d_a == 0.0:
        return {(0, 1): d_b, (0, 0): 1.0 - d_b}
    if d_b == 0.0:
        return {(1, 0): d_a, (0, 0): 1.0 - d_a}
    raise ValidationError(f"cell {key}: both treatments are taken, so joint_probs must be given")


def _coef_vector(block: Mapping[str, Any] | None) -> np.ndarray | None:
    if block is None:
        return None
    try:
        return np.array([float(block[name]) for name in COEF_NAMES])
    except KeyError as exc:
        raise ValidationError(f"coefficient block lacks {exc.args[0]!r}") from None


def parse_moments(doc: Mapping[str, Any], rounding_tol: float = 0.02) -> MomentsFile:
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported moments schema_version {version!r}")
    if "table1" not in doc:
        raise ValidationError("moments file lacks 'table1'")
    table1 = doc["table1"]
    joint = doc.get("joint_probs", {})
    means = doc.get("cond_means", {})
    cells: dict[tuple[int, int], CellMoments] = {}
    for key, t1 in table1.items():
        za, zb = parse_cell_key(key, "z")
        for field in ("n", "d_a", "d_b", "y"):
            if field not in t1:
                raise ValidationError(f"table1.{key} lacks {field!r}")
        probs = _cell_probs(key, t1, joint.get(key))
        cell_means: dict[tuple[int, int], float | None] = {}
        for d, mu in means.get(key, {}).items():
            cell_means[parse_cell_key(d, "d")] = None if mu is None else float(mu)
        cells[(za, zb)] = CellMoments(
            n=float(t1["n"]), probs=probs, means=cell_means,
            y_mean=float(t1["y"]), d_a_mean=float(t1["d_a"]), d_b_mean=float(t1["d_b"]),
        )
    missing = [cell_key(*c) for c in CELLS if c not in cells]
    if missing:
        raise ValidationError(f"moments file lacks instrument cells {missing}")
    table = CellTable.from_moments(cells, rounding_tol=rounding_tol)
    t6 = doc.get("table6") or {}
    k = doc.get("k")
    return MomentsFile(
        table=table,
        k=None if k is None else float(k),
        reported_beta=_coef_vector(t6.get("coef")),
        reported_se=_coef_vector(t6.get("se")),
        description=str(doc.get("description", "")),
    )


def load_moments(source: str | Path, rounding_tol: float = 0.02) -> MomentsFile:
    """Load a moments file; ``"application"`` selects the bundled example."""
    if str(source) in BUILTIN:
        text = resources.files("factorial_iv.data").joinpath(BUILTIN[str(source)]).read_text()
    else:
        text = Path(source).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"moments file is not valid JSON: {exc}") from None
    return parse_moments(doc, rounding_tol=rounding_tol)


def table_to_moments(table: CellTable, k: float | None = None) -> dict[str, Any]:
    """Serialize a cell table into the moments schema (all joint probabilities kept)."""
    doc: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "table1": {}, "joint_probs": {}, "cond_means": {}}
    if k is not None:
        doc["k"] = k
    for za, zb in CELLS:
        key = cell_key(za, zb)
        doc["table1"][key] = {
            "n": table.n(za, zb), "d_a": table.d_a(za, zb), "d_b": table.d_b(za, zb), "y": table.y(za, zb),
        }
        doc["joint_probs"][key] = {f"d{da}{db}": table.prob(za, zb, da, db) for da, db in CELLS}
        doc["cond_means"][key] = {f"d{da}{db}": table.mean(za, zb, da, db) for da, db in CELLS}
    return doc
