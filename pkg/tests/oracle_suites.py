"""Randomized oracle suites shared by the oracle tests and the acceptance run.

Each suite draws specs from a fixed master seed, so failures replay from the
printed spec. Results are cached per session.
"""

from __future__ import annotations

import functools
from collections import Counter
from dataclasses import dataclass, field

from factorial_iv.errors import PreconditionError
from factorial_iv.oracle import (
    MONOTONE_A_ONESIDED_B,
    ONE_SIDED,
    ONESIDED_A_MONOTONE_B,
    UNRESTRICTED,
    make_population,
    random_spec,
    verify,
)

MASTER_SEED = 20_240_601
MIN_CASES = 100
MIN_CONTAINMENT = 1000

THEOREM_SUITES = {
    ONE_SIDED: ("T1", "T2_EQ5", "T2_EQ6", "T3", "L1", "A2", "LA1"),
    MONOTONE_A_ONESIDED_B: ("B2",),
    ONESIDED_A_MONOTONE_B: ("B3",),
    UNRESTRICTED: ("B1",),
}

# check-name fragments that identify each bound family
BOUND_FAMILIES = {
    "joint": "joint effect",
    "direct": "LAIE(c,c) direct",
    "aux_a": "(j,.)",
    "aux_b": "(.,d)",
    "indirect": "LAIE(c,c) indirect",
}


@dataclass
class SuiteResult:
    runs: Counter = field(default_factory=Counter)
    failures: list = field(default_factory=list)
    skipped: Counter = field(default_factory=Counter)

    @property
    def passed(self) -> bool:
        return not self.failures


def _record(result: SuiteResult, spec, theorem: str, key: str | None = None) -> bool:
    try:
        rep = verify(make_population(spec), spec.assignment_probs, theorem)
    except PreconditionError:
        result.skipped[key or theorem] += 1
        return False
    result.runs[key or theorem] += 1
    if not rep.passed:
        result.failures.append((theorem, spec.to_json(), [c.as_dict() for c in rep.failures()][:3]))
    return True


@functools.lru_cache(maxsize=None)
def theorem_suite(mode: str, n: int = MIN_CASES) -> SuiteResult:
    """Run the mode's theorems until each has verified on ``n`` populations."""
    result = SuiteResult()
    seed = MASTER_SEED
    theorems = THEOREM_SUITES[mode]
    while min(result.runs[t] for t in theorems) < n:
        spec = random_spec(mode, seed)
        seed += 1
        for th in theorems:
            if result.runs[th] < n:
                _record(result, spec, th)
        if seed - MASTER_SEED > 20 * n:
            break
    return result


@functools.lru_cache(maxsize=None)
def corollary_suite(n: int = MIN_CASES) -> SuiteResult:
    """Weighted-average form of the A effect with B's takeup responding to Z_A."""
    result = SuiteResult()
    for i in range(n):
        spec = random_spec(ONE_SIDED, MASTER_SEED + i, exclude_a=("d",), exclude_b=("d",), no_nj_pairs=True)
        _record(result, spec, "COR2")
    return result


@functools.lru_cache(maxsize=None)
def containment_suite(n: int = MIN_CONTAINMENT) -> SuiteResult:
    """Bound containment until every bound family has ``n`` populations.

    Specs cycle through three restriction sets so that each family's
    assumptions hold often: none, no A cross-defiers, and no A cross-defiers
    with no B joint compliers.
    """
    result = SuiteResult()
    excludes = [((), ()), (("d",), ()), (("d",), ("j",))]
    seed = 0
    while min(result.runs[f] for f in BOUND_FAMILIES) < n and seed < 10 * n:
        ex_a, ex_b = excludes[seed % 3]
        spec = random_spec(ONE_SIDED, MASTER_SEED + 7919 * seed, exclude_a=ex_a, exclude_b=ex_b)
        seed += 1
        try:
            rep = verify(make_population(spec), spec.assignment_probs, "BOUNDS_CONTAIN")
        except PreconditionError:
            result.skipped["BOUNDS_CONTAIN"] += 1
            continue
        result.runs["populations"] += 1
        result.runs["checks"] += len(rep.checks)
        for family, fragment in BOUND_FAMILIES.items():
            if any(fragment in c.name for c in rep.checks):
                result.runs[family] += 1
        if not rep.passed:
            result.failures.append(("BOUNDS_CONTAIN", spec.to_json(), [c.as_dict() for c in rep.failures()][:3]))
    return result
