"""Finite synthetic populations of pairs with known compliance maps and
potential outcomes.

A compliance map holds a member's takeup under each (own instrument,
partner instrument) configuration, stored own-first as the bit tuple
``(d(0,0), d(0,1), d(1,0), d(1,1))``. For member A the own instrument is
``Z_A``; for member B it is ``Z_B``, so ``D_B(z_a, z_b) = map_b[z_b, z_a]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterator, Mapping

import numpy as np

from ..core import CELLS, CellTable, Dataset, build_cell_table, cell_key, parse_cell_key
from ..errors import SpecError, ValidationError

# label -> (d00, d01, d10, d11)
TYPE_BITS: dict[str, tuple[int, int, int, int]] = {
    "s": (0, 0, 1, 1),
    "j": (0, 0, 0, 1),
    "n": (0, 0, 0, 0),
    "d": (0, 0, 1, 0),
    "always": (1, 1, 1, 1),
    "cross": (0, 1, 1, 1),
    "d2": (1, 0, 1, 1),
    "d3": (1, 0, 1, 0),
}
BASIC = ("s", "j", "n", "d")
MONOTONE = tuple(TYPE_BITS)

ONE_SIDED = "ONE_SIDED"
MONOTONE_A_ONESIDED_B = "MONOTONE_A_ONESIDED_B"
ONESIDED_A_MONOTONE_B = "ONESIDED_A_MONOTONE_B"
UNRESTRICTED = "UNRESTRICTED"
MODES = {
    ONE_SIDED: (BASIC, BASIC),
    MONOTONE_A_ONESIDED_B: (MONOTONE, BASIC),
    ONESIDED_A_MONOTONE_B: (BASIC, MONOTONE),
    UNRESTRICTED: (None, None),
}

FAMILIES = ("uniform", "profile", "extreme", "additive")


def bits_to_code(bits: tuple[int, int, int, int]) -> int:
    return bits[0] * 8 + bits[1] * 4 + bits[2] * 2 + bits[3]


def code_to_bits(code: int) -> tuple[int, int, int, int]:
    return ((code >> 3) & 1, (code >> 2) & 1, (code >> 1) & 1, code & 1)


_LABEL_BY_CODE = {bits_to_code(b): name for name, b in TYPE_BITS.items()}


def label_of_code(code: int) -> str:
    return _LABEL_BY_CODE.get(code, "u" + "".join(map(str, code_to_bits(code))))


def code_of_label(label: str) -> int:
    if label in TYPE_BITS:
        return bits_to_code(TYPE_BITS[label])
    if len(label) == 5 and label[0] == "u" and set(label[1:]) <= {"0", "1"}:
        return bits_to_code(tuple(int(c) for c in label[1:]))  # type: ignore[arg-type]
    raise SpecError(f"unknown compliance label {label!r}")


@dataclass(frozen=True)
class ComplianceMap:
    bits: tuple[int, int, int, int]

    def __post_init__(self) -> None:
        if len(self.bits) != 4 or any(b not in (0, 1) for b in self.bits):
            raise ValidationError("a compliance map has four binary entries")
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))

    @classmethod
    def of(cls, label: str) -> ComplianceMap:
        return cls(code_to_bits(code_of_label(label)))

    def takeup(self, own: int, partner: int) -> int:
        return self.bits[own * 2 + partner]

    @property
    def label(self) -> str:
        return label_of_code(bits_to_code(self.bits))

    @property
    def one_sided(self) -> bool:
        return self.label in BASIC

    @property
    def monotone(self) -> bool:
        d00, d01, d10, d11 = self.bits
        return d00 <= d10 and d01 <= d11 and d01 <= d10


@dataclass(frozen=True)
class PotentialOutcomes:
    y00: float
    y01: float
    y10: float
    y11: float

    def __call__(self, d_a: int, d_b: int) -> float:
        return (self.y00, self.y01, self.y10, self.y11)[d_a * 2 + d_b]


@dataclass(frozen=True)
class SyntheticPair:
    map_a: ComplianceMap
    map_b: ComplianceMap
    po: PotentialOutcomes
    weight: float = 1.0

    def treatment(self, z_a: int, z_b: int) -> tuple[int, int]:
        return self.map_a.takeup(z_a, z_b), self.map_b.takeup(z_b, z_a)

    def outcome(self, z_a: int, z_b: int) -> float:
        return self.po(*self.treatment(z_a, z_b))


@dataclass(frozen=True)
class OutcomeSpec:
    """How potential outcomes are drawn.

    ``uniform``: iid on ``[0, k]``. ``profile``: each compliance profile gets
    its own random sub-range, so outcomes correlate with types. ``extreme``:
    values in ``{0, k}``. ``additive``: ``Y(00)`` random, constant effects
    ``taus = (tau_a, tau_b, tau_ab)`` plus optional ``noise`` on each effect.
    """

    family: str = "uniform"
    k: float = 100.0
    monotone: bool = True
    y11_ge_y00: bool = False
    y11_ge_max: bool = False
    taus: tuple[float, float, float] = (0.0, 0.0, 0.0)
    noise: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise SpecError(f"unknown outcome family {self.family!r}")
        if not self.k > 0:
            raise SpecError("k must be positive")
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))


@dataclass(frozen=True)
class PopulationSpec:
    mode: str
    profile_probs: Mapping[str, float]
    n_pairs: int = 200
    outcome: OutcomeSpec = field(default_factory=OutcomeSpec)
    assignment_probs: Mapping[str, float] = field(default_factory=lambda: {k: 0.25 for k in ("z00", "z01", "z10", "z11")})
    weights: str = "equal"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise SpecError(f"unknown mode {self.mode!r}")
        if self.n_pairs < 1:
            raise SpecError("n_pairs must be at least 1")
        if self.weights not in ("equal", "random"):
            raise SpecError("weights must be 'equal' or 'random'")
        allowed_a, allowed_b = MODES[self.mode]
        total = 0.0
        for key, p in self.profile_probs.items():
            a, b = parse_profile(key)
            if allowed_a is not None and a not in allowed_a:
                raise SpecError(f"type {a!r} for A is not allowed in mode {self.mode}")
            if allowed_b is not None and b not in allowed_b:
                raise SpecError(f"type {b!r} for B is not allowed in mode {self.mode}")
            if p < 0:
                raise SpecError(f"negative probability for profile {key!r}")
            total += p
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise SpecError(f"profile probabilities sum to {total}, not 1")
        probs = assignment_vector(self.assignment_probs)
        if np.any(probs <= 0):
            raise SpecError("every instrument cell needs positive assignment probability")

    def to_json(self) -> str:
        doc = asdict(self)
        doc["profile_probs"] = dict(self.profile_probs)
        doc["assignment_probs"] = dict(self.assignment_probs)
        doc["outcome"]["taus"] = list(self.outcome.taus)
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> PopulationSpec:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"spec is not valid JSON: {exc}") from None
        try:
            outcome = OutcomeSpec(**doc.pop("outcome", {}))
            return cls(outcome=outcome, **doc)
        except TypeError as exc:
            raise SpecError(f"malformed spec: {exc}") from None

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> PopulationSpec:
        return cls.from_json(Path(path).read_text())


def parse_profile(key: str) -> tuple[str, str]:
    parts = [p.strip() for p in key.split(",")]
    if len(parts) != 2:
        raise SpecError(f"profile key {key!r} must look like 'a_label,b_label'")
    for p in parts:
        code_of_label(p)
    return parts[0], parts[1]


def assignment_vector(assignment_probs: Mapping[str, float]) -> np.ndarray:
    """Probabilities of instrument cells in the order of ``CELLS``."""
    probs = np.zeros(4)
    for key, p in assignment_probs.items():
        za, zb = parse_cell_key(key, "z")
        probs[CELLS.index((za, zb))] = float(p)
    if not math.isclose(probs.sum(), 1.0, abs_tol=1e-9):
        raise SpecError(f"assignment probabilities sum to {probs.sum()}, not 1")
    return probs


@dataclass(frozen=True)
class Population:
    """Vectorized pairs: map codes, potential outcomes ``y[:, d_a*2 + d_b]``, weights."""

    code_a: np.ndarray
    code_b: np.ndarray
    y: np.ndarray
    weight: np.ndarray
    k: float = 100.0
    mode: str = UNRESTRICTED

    def __post_init__(self) -> None:
        n = len(self.code_a)
        if n == 0:
            raise ValidationError("population is empty")
        if self.code_b.shape != (n,) or self.y.shape != (n, 4) or self.weight.shape != (n,):
            raise ValidationError("population arrays have inconsistent shapes")
        if np.any(self.weight <= 0):
            raise ValidationError("pair weights must be positive")
        for arr in (self.code_a, self.code_b, self.y, self.weight):
            arr.setflags(write=False)
        bits_a = np.array([code_to_bits(int(c)) for c in range(16)])[self.code_a]
        bits_b = np.array([code_to_bits(int(c)) for c in range(16)])[self.code_b]
        object.__setattr__(self, "bits_a", bits_a)
        object.__setattr__(self, "bits_b", bits_b)
        object.__setattr__(self, "labels_a", np.array([label_of_code(int(c)) for c in self.code_a]))
        object.__setattr__(self, "labels_b", np.array([label_of_code(int(c)) for c in self.code_b]))

    def __len__(self) -> int:
        return len(self.code_a)

    @property
    def prob(self) -> np.ndarray:
        return self.weight / self.weight.sum()

    def d_a(self, z_a: int, z_b: int) -> np.ndarray:
        return self.bits_a[:, z_a * 2 + z_b]

    def d_b(self, z_a: int, z_b: int) -> np.ndarray:
        return self.bits_b[:, z_b * 2 + z_a]

    def realized(self, z_a: int, z_b: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        da, db = self.d_a(z_a, z_b), self.d_b(z_a, z_b)
        return da, db, self.y[np.arange(len(self)), da * 2 + db]

    def pairs(self) -> Iterator[SyntheticPair]:
        for i in range(len(self)):
            yield SyntheticPair(
                ComplianceMap(code_to_bits(int(self.code_a[i]))),
                ComplianceMap(code_to_bits(int(self.code_b[i]))),
                PotentialOutcomes(*map(float, self.y[i])),
                float(self.weight[i]),
            )

    @classmethod
    def from_pairs(cls, pairs: list[SyntheticPair], k: float = 100.0, mode: str = UNRESTRICTED) -> Population:
        return cls(
            code_a=np.array([bits_to_code(p.map_a.bits) for p in pairs], dtype=np.int64),
            code_b=np.array([bits_to_code(p.map_b.bits) for p in pairs], dtype=np.int64),
            y=np.array([[p.po.y00, p.po.y01, p.po.y10, p.po.y11] for p in pairs], dtype=float),
            weight=np.array([p.weight for p in pairs], dtype=float),
            k=k,
            mode=mode,
        )

    # -- assumption checks on the actual pairs ---------------------------
    def a_labels_within(self, allowed: tuple[str, ...]) -> bool:
        return bool(np.all(np.isin(self.labels_a, allowed)))

    def b_labels_within(self, allowed: tuple[str, ...]) -> bool:
        return bool(np.all(np.isin(self.labels_b, allowed)))

    def outcomes_bounded(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.y >= -tol) and np.all(self.y <= self.k + tol))

    def monotone_response(self, tol: float = 1e-12) -> bool:
        y00, y01, y10 = self.y[:, 0], self.y[:, 1], self.y[:, 2]
        return bool(np.all(y10 >= y00 - tol) and np.all(y01 >= y00 - tol))

    def y11_ge_y00(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.y[:, 3] >= self.y[:, 0] - tol))

    def y11_ge_max(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.y[:, 3] >= np.maximum(self.y[:, 1], self.y[:, 2]) - tol))


def _largest_remainder(probs: np.ndarray, n: int) -> np.ndarray:
    raw = probs * n
    counts = np.floor(raw).astype(int)
    short = n - counts.sum()
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def _draw_outcomes(spec: OutcomeSpec, profile_idx: np.ndarray, n_profiles: int, rng: np.random.Generator) -> np.ndarray:
    n, k = len(profile_idx), spec.k
    if spec.family == "additive":
        tau_a, tau_b, tau_ab = spec.taus
        eff = np.empty((n, 3))
        eff[:] = (tau_a, tau_b, tau_ab)
        if spec.noise > 0:
            eff = eff + rng.uniform(-spec.noise, spec.noise, size=(n, 3))
            if spec.monotone:
                eff[:, :2] = np.maximum(eff[:, :2], 0.0)
        lo_room = np.maximum(0.0, -np.minimum.reduce([np.zeros(n), eff[:, 0], eff[:, 1], eff.sum(axis=1)]))
        hi_need = np.maximum.reduce([np.zeros(n), eff[:, 0], eff[:, 1], eff.sum(axis=1)])
        if np.any(lo_room + hi_need > k):
            raise SpecError("additive effects do not fit in [0, k]")
        y00 = lo_room + rng.uniform(0.0, 1.0, n) * (k - hi_need - lo_room)
        y = np.column_stack([y00, y00 + eff[:, 1], y00 + eff[:, 0], y00 + eff.sum(axis=1)])
        return np.clip(y, 0.0, k)
    if spec.family == "uniform":
        y = rng.uniform(0.0, k, size=(n, 4))
    elif spec.family == "profile":
        edges = np.sort(rng.uniform(0.0, k, size=(n_profiles, 2)), axis=1)
        lo, hi = edges[profile_idx, 0], edges[profile_idx, 1]
        y = lo[:, None] + rng.uniform(0.0, 1.0, size=(n, 4)) * (hi - lo)[:, None]
    else:
        y = k * (rng.uniform(size=(n, 4)) < rng.uniform(0.1, 0.9)).astype(float)
    # columns: y00, y01, y10, y11
    if spec.monotone or spec.y11_ge_max:
        s = np.sort(y, axis=1)
        out = np.empty_like(y)
        out[:, 0] = s[:, 0]
        if spec.y11_ge_max:
            swap = rng.uniform(size=n) < 0.5
            out[:, 1] = np.where(swap, s[:, 1], s[:, 2])
            out[:, 2] = np.where(swap, s[:, 2], s[:, 1])
            out[:, 3] = s[:, 3]
        else:
            perm = np.argsort(rng.uniform(size=(n, 3)), axis=1) + 1
            out[:, 1:] = np.take_along_axis(s, perm, axis=1)
        y = out
    if spec.y11_ge_y00 and not spec.y11_ge_max:
        lo, hi = np.minimum(y[:, 0], y[:, 3]), np.maximum(y[:, 0], y[:, 3])
        y[:, 0], y[:, 3] = lo, hi
    return y


def make_population(spec: PopulationSpec, n_pairs: int | None = None) -> Population:
    """Deterministic population whose profile counts follow ``spec.profile_probs``."""
    n = spec.n_pairs if n_pairs is None else n_pairs
    if n < 1:
        raise SpecError("n_pairs must be at least 1")
    rng = np.random.default_rng(spec.seed)
    keys = sorted(spec.profile_probs)
    probs = np.array([spec.profile_probs[k] for k in keys], dtype=float)
    counts = _largest_remainder(probs, n)
    profile_idx = np.repeat(np.arange(len(keys)), counts)
    profiles = [parse_profile(k) for k in keys]
    code_a = np.array([code_of_label(profiles[i][0]) for i in profile_idx], dtype=np.int64)
    code_b = np.array([code_of_label(profiles[i][1]) for i in profile_idx], dtype=np.int64)
    y = _draw_outcomes(spec.outcome, profile_idx, len(keys), rng)
    if spec.weights == "random":
        weight = rng.uniform(0.5, 2.0, size=n)
    else:
        weight = np.ones(n)
    return Population(code_a, code_b, y, weight, k=spec.outcome.k, mode=spec.mode)


def exact_cell_table(pop: Population, assignment_probs: Mapping[str, float] | None = None) -> CellTable:
    """Probability-limit cell table: every pair in every instrument cell, weighted."""
    probs = assignment_vector(assignment_probs or {cell_key(*c): 0.25 for c in CELLS})
    pw = pop.prob
    cols: dict[str, list[np.ndarray]] = {k: [] for k in ("y", "d_a", "d_b", "z_a", "z_b", "weight")}
    for (za, zb), pz in zip(CELLS, probs):
        da, db, y = pop.realized(za, zb)
        n = len(pop)
        cols["y"].append(y)
        cols["d_a"].append(da)
        cols["d_b"].append(db)
        cols["z_a"].append(np.full(n, za))
        cols["z_b"].append(np.full(n, zb))
        cols["weight"].append(pw * pz)
    ds = Dataset(**{k: np.concatenate(v) for k, v in cols.items()})
    table = build_cell_table(ds)
    return CellTable(table.mass, table.ybar, table.y_cell, table.da_cell, table.db_cell, table.dab_cell, table.cell_mass, source="exact")


def sample_dataset(pop: Population, n: int, seed: int, assignment_probs: Mapping[str, float] | None = None) -> Dataset:
    """``n`` iid draws: a pair by weight, an instrument cell by ``assignment_probs``."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    probs = assignment_vector(assignment_probs or {cell_key(*c): 0.25 for c in CELLS})
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(pop), size=n, p=pop.prob)
    cell = rng.choice(4, size=n, p=probs)
    z = np.array(CELLS)[cell]
    z_a, z_b = z[:, 0], z[:, 1]
    da = pop.bits_a[idx, z_a * 2 + z_b]
    db = pop.bits_b[idx, z_b * 2 + z_a]
    y = pop.y[idx, da * 2 + db]
    return Dataset(y=y, d_a=da, d_b=db, z_a=z_a, z_b=z_b, weight=np.ones(n))


def application_like_spec(n_pairs: int = 100, seed: int = 0, outcome: OutcomeSpec | None = None) -> PopulationSpec:
    """Profiles matching the published tutoring/incentive takeup shares."""
    return PopulationSpec(
        mode=ONE_SIDED,
        profile_probs={"s,s": 0.28, "j,s": 0.21, "n,s": 0.32, "n,d": 0.12, "n,n": 0.07},
        n_pairs=n_pairs,
        outcome=outcome or OutcomeSpec(),
        seed=seed,
    )


def random_spec(
    mode: str,
    seed: int,
    n_pairs: int = 60,
    exclude_a: tuple[str, ...] = (),
    exclude_b: tuple[str, ...] = (),
    no_nj_pairs: bool = False,
    outcome: OutcomeSpec | None = None,
    max_profiles: int = 8,
) -> PopulationSpec:
    """A random valid spec for ``mode``.

    The ``(s, s)`` profile always carries mass so that every first stage the
    estimands divide by is positive.
    """
    rng = np.random.default_rng(seed)
    allowed_a, allowed_b = MODES[mode]
    labels_all = [label_of_code(c) for c in range(16)]
    pool_a = [t for t in (allowed_a or labels_all) if t not in exclude_a]
    pool_b = [t for t in (allowed_b or labels_all) if t not in exclude_b]
    candidates = [
        (a, b) for a in pool_a for b in pool_b
        if not (no_nj_pairs and ((a == "n" and b == "j") or (a == "j" and b == "n")))
    ]
    n_prof = int(rng.integers(1, min(max_profiles, len(candidates)) + 1))
    chosen = {("s", "s")} | {candidates[i] for i in rng.choice(len(candidates), size=n_prof, replace=False)}
    keys = sorted(f"{a},{b}" for a, b in chosen)
    w = rng.dirichlet(np.ones(len(keys)))
    w = 0.8 * w + 0.1 / len(keys)
    probs = {k: float(p) for k, p in zip(keys, w)}
    probs["s,s"] += 0.1
    fix = 1.0 - sum(probs.values())
    probs[keys[0]] += fix
    if outcome is None:
        family = FAMILIES[int(rng.integers(0, 3))]
        flag = int(rng.integers(0, 3))
        outcome = OutcomeSpec(family=family, k=100.0, monotone=True, y11_ge_y00=flag >= 1, y11_ge_max=flag == 2)
    a = rng.dirichlet(np.ones(4)) * 0.8 + 0.05
    assign = {cell_key(*c): float(p) for c, p in zip(CELLS, a)}
    assign["z00"] += 1.0 - sum(assign.values())
    return PopulationSpec(
        mode=mode,
        profile_probs=probs,
        n_pairs=n_pairs,
        outcome=outcome,
        assignment_probs=assign,
        weights="random" if rng.uniform() < 0.5 else "equal",
        seed=int(rng.integers(0, 2**31)),
    )
