"""IV estimands, type shares, bounds and sensitivity analysis for 2x2
factorial designs with endogenous, possibly coordinated, treatment takeup."""

from .bounds import (
    BoundInputs,
    bound_aux_moments,
    bound_joint_cc,
    bound_laie_direct,
    bound_laie_indirect,
    bound_y00_cc,
)
from .core import (
    AssumedInterval,
    Assumption,
    CellTable,
    Dataset,
    Observation,
    build_cell_table,
    check_one_sided,
    ingest,
    read_csv,
)
from .estimands import IvEstimates, first_stage, reduced_form, robust_se, saturated_iv, wald
from .identification import (
    IdentifiedMoments,
    Restrictions,
    TypeShares,
    compliance_diagnostics,
    identified_moments,
    type_shares,
)
from .moments import load_moments
from .sensitivity import (
    LambdaModel,
    bound_over_box,
    direct_lambda_model,
    indirect_lambda_model,
    level_set_grid,
    write_grid,
)

__version__ = "0.1.0"
