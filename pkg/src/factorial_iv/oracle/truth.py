"""Ground-truth parameters computed by enumerating a population.

Pair sets are composable predicates over compliance profiles::

    cc = a_is("c") & b_is("c")
    not_complier = ~a_is("c")

Aggregate labels: ``c`` = s or j, ``sd`` = s or d, ``nd`` = n or d,
``nj`` = n or j.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import IdentificationError, ValidationError
from .population import Population

ALIASES = {"c": ("s", "j"), "sd": ("s", "d"), "nd": ("n", "d"), "nj": ("n", "j")}

# contrast of potential outcomes, columns y00, y01, y10, y11
KINDS: dict[str, tuple[float, float, float, float]] = {
    "A_GIVEN_NOT_B": (-1, 0, 1, 0),
    "A_GIVEN_B": (0, -1, 0, 1),
    "B_GIVEN_NOT_A": (-1, 1, 0, 0),
    "B_GIVEN_A": (0, 0, -1, 1),
    "JOINT": (-1, 0, 0, 1),
    "LAIE": (1, -1, -1, 1),
    "Y00": (1, 0, 0, 0),
    "Y01": (0, 1, 0, 0),
    "Y10": (0, 0, 1, 0),
    "Y11": (0, 0, 0, 1),
}


@dataclass(frozen=True)
class PairSet:
    fn: Callable[[Population], np.ndarray]
    name: str = "?"

    def __call__(self, pop: Population) -> np.ndarray:
        return np.asarray(self.fn(pop), dtype=bool)

    def __and__(self, other: PairSet) -> PairSet:
        return PairSet(lambda p: self(p) & other(p), f"({self.name} & {other.name})")

    def __or__(self, other: PairSet) -> PairSet:
        return PairSet(lambda p: self(p) | other(p), f"({self.name} | {other.name})")

    def __invert__(self) -> PairSet:
        return PairSet(lambda p: ~self(p), f"~{self.name}")


def _expand(labels: tuple[str, ...]) -> tuple[str, ...]:
    out: list[str] = []
    for lab in labels:
        out.extend(ALIASES.get(lab, (lab,)))
    return tuple(out)


def a_is(*labels: str) -> PairSet:
    allowed = _expand(labels)
    return PairSet(lambda p: np.isin(p.labels_a, allowed), f"A in {'|'.join(labels)}")


def b_is(*labels: str) -> PairSet:
    allowed = _expand(labels)
    return PairSet(lambda p: np.isin(p.labels_b, allowed), f"B in {'|'.join(labels)}")


def everyone() -> PairSet:
    return PairSet(lambda p: np.ones(len(p), dtype=bool), "all")


def where(fn: Callable[[Population], np.ndarray], name: str = "custom") -> PairSet:
    return PairSet(fn, name)


def share(pop: Population, pairs: PairSet) -> float:
    return float(pop.prob[pairs(pop)].sum())


def effect_mass(pop: Population, pairs: PairSet, kind: str) -> float:
    """``E[contrast * 1{pair in set}]``; well defined even on an empty set."""
    if kind not in KINDS:
        raise ValidationError(f"unknown effect kind {kind!r}")
    contrast = pop.y @ np.array(KINDS[kind], dtype=float)
    mask = pairs(pop)
    return float((pop.prob[mask] * contrast[mask]).sum())


def true_effect(pop: Population, pairs: PairSet, kind: str) -> float:
    """Average of a potential-outcome contrast over the pairs in a set."""
    p = share(pop, pairs)
    if not p > 0:
        raise IdentificationError(f"pair set {pairs.name} has zero mass")
    return effect_mass(pop, pairs, kind) / p
