"""Exact finite-population simulator and theorem verification harness."""

from .population import (
    BASIC,
    MODES,
    MONOTONE,
    MONOTONE_A_ONESIDED_B,
    ONE_SIDED,
    ONESIDED_A_MONOTONE_B,
    TYPE_BITS,
    UNRESTRICTED,
    ComplianceMap,
    OutcomeSpec,
    Population,
    PopulationSpec,
    PotentialOutcomes,
    SyntheticPair,
    application_like_spec,
    exact_cell_table,
    make_population,
    random_spec,
    sample_dataset,
)
from .truth import PairSet, a_is, b_is, effect_mass, everyone, share, true_effect, where
from .verify import THEOREMS, Check, VerificationReport, applicable, verify
