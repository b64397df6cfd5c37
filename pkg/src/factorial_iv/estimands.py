"""Point estimands: split-sample Wald ratios, first stage, reduced form and the
saturated IV coefficients, plus a heteroscedasticity-robust covariance.

Every coefficient is computed in closed form from cell means. Because the
saturated system is just identified, these are the exact IV estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CellTable, Dataset
from .errors import IdentificationError, MissingCellError, ValidationError, WeakFirstStageError

WEAK_TOL = 1e-8
COEF_NAMES = ("const", "D_A", "D_B", "D_AD_B")


def _require_cells(table: CellTable, *cells: tuple[int, int]) -> None:
    for za, zb in cells:
        if not table.nonempty(za, zb):
            raise MissingCellError((za, zb))


def _contrasts(f: np.ndarray) -> np.ndarray:
    """Saturated-regression coefficients (intercept, Z_A, Z_B, Z_AZ_B) of a cell function."""
    return np.array([
        f[0, 0],
        f[1, 0] - f[0, 0],
        f[0, 1] - f[0, 0],
        f[1, 1] - f[0, 1] - f[1, 0] + f[0, 0],
    ])


def wald(table: CellTable, side: str, partner_z: int) -> float:
    """Wald ratio for one treatment holding the partner's instrument fixed."""
    side = side.upper()
    if side not in ("A", "B") or partner_z not in (0, 1):
        raise ValueError("side must be 'A' or 'B' and partner_z 0 or 1")
    if side == "A":
        hi, lo = (1, partner_z), (0, partner_z)
        take = table.d_a
    else:
        hi, lo = (partner_z, 1), (partner_z, 0)
        take = table.d_b
    _require_cells(table, hi, lo)
    den = take(*hi) - take(*lo)
    if abs(den) < WEAK_TOL:
        raise WeakFirstStageError(f"Wald ratio for {side} with partner instrument {partner_z}", den)
    return (table.y(*hi) - table.y(*lo)) / den


@dataclass(frozen=True)
class FirstStage:
    """``gamma[i, j]``: coefficient on instrument term j in the regression of
    treatment term i, rows (D_A, D_B, D_AD_B), columns (Z_A, Z_B, Z_AZ_B)."""

    gamma: np.ndarray
    intercepts: np.ndarray


def first_stage(table: CellTable) -> FirstStage:
    _require_cells(table, (0, 0), (0, 1), (1, 0), (1, 1))
    rows = [_contrasts(table.da_cell), _contrasts(table.db_cell), _contrasts(table.dab_cell)]
    gamma = np.array([r[1:] for r in rows])
    intercepts = np.array([r[0] for r in rows])
    gamma.setflags(write=False)
    intercepts.setflags(write=False)
    return FirstStage(gamma, intercepts)


def reduced_form(table: CellTable) -> tuple[np.ndarray, float]:
    """Return ``(pi, pi0)`` with ``pi = (pi_A, pi_B, pi_AB)``."""
    _require_cells(table, (0, 0), (0, 1), (1, 0), (1, 1))
    c = _contrasts(table.y_cell)
    return c[1:].copy(), float(c[0])


@dataclass(frozen=True)
class IvEstimates:
    delta_a0: float
    delta_a1: float
    delta_b0: float
    delta_b1: float
    beta: np.ndarray
    pi: np.ndarray
    pi0: float
    gamma: np.ndarray
    gamma0: np.ndarray
    robust_cov: np.ndarray | None = None

    @property
    def beta_0(self) -> float:
        return float(self.beta[0])

    @property
    def beta_a(self) -> float:
        return float(self.beta[1])

    @property
    def beta_b(self) -> float:
        return float(self.beta[2])

    @property
    def beta_ab(self) -> float:
        return float(self.beta[3])

    def se(self) -> np.ndarray | None:
        if self.robust_cov is None:
            return None
        return np.sqrt(np.clip(np.diag(self.robust_cov), 0.0, None))

    def with_cov(self, cov: np.ndarray) -> IvEstimates:
        return IvEstimates(
            self.delta_a0, self.delta_a1, self.delta_b0, self.delta_b1,
            self.beta, self.pi, self.pi0, self.gamma, self.gamma0, cov,
        )


def saturated_iv(table: CellTable) -> IvEstimates:
    """Closed-form saturated IV coefficients ``(beta_0, beta_A, beta_B, beta_AB)``.

    The reduced form satisfies ``pi = Gamma' beta`` with ``Gamma'`` from
    :func:`first_stage`, so ``beta`` solves that 3x3 system and the intercept
    follows from ``pi_0 = beta_0 + gamma_0 . beta``.
    """
    fs = first_stage(table)
    pi, pi0 = reduced_form(table)
    names = ("P(s or d, .) [gamma_A,A]", "P(., s or d) [gamma_B,B]", "P(c, c) [gamma_AB,AB]")
    for i, name in enumerate(names):
        if abs(fs.gamma[i, i]) < WEAK_TOL:
            raise IdentificationError(f"first-stage matrix is singular: diagonal entry {name} = {fs.gamma[i, i]:.3g}")
    try:
        slopes = np.linalg.solve(fs.gamma.T, pi)
    except np.linalg.LinAlgError as exc:
        raise IdentificationError(f"first-stage matrix is singular: {exc}") from None
    beta0 = pi0 - float(fs.intercepts @ slopes)
    beta = np.concatenate([[beta0], slopes])
    beta.setflags(write=False)

    def safe_wald(side: str, pz: int) -> float:
        try:
            return wald(table, side, pz)
        except WeakFirstStageError:
            return float("nan")

    return IvEstimates(
        delta_a0=safe_wald("A", 0),
        delta_a1=safe_wald("A", 1),
        delta_b0=safe_wald("B", 0),
        delta_b1=safe_wald("B", 1),
        beta=beta,
        pi=pi,
        pi0=pi0,
        gamma=fs.gamma,
        gamma0=fs.intercepts,
    )


def robust_se(dataset: Dataset, beta: np.ndarray, hc: str = "HC1") -> np.ndarray:
    """Sandwich covariance of the just-identified IV estimator.

    Regressors are ``(1, D_A, D_B, D_AD_B)`` and instruments
    ``(1, Z_A, Z_B, Z_AZ_B)``. Weights are treated as sampling weights, so the
    result is unchanged when all weights are multiplied by a constant. ``hc``
    selects HC0 or HC1 (``n / (n - 4)`` correction, ``n`` the number of
    positively weighted rows).
    """
    hc = hc.upper()
    if hc not in ("HC0", "HC1"):
        raise ValueError("hc must be 'HC0' or 'HC1'")
    if len(dataset) == 0:
        raise ValidationError("dataset is empty")
    keep = dataset.weight > 0
    w = dataset.weight[keep]
    w = w / w.mean()
    d_a = dataset.d_a[keep].astype(float)
    d_b = dataset.d_b[keep].astype(float)
    z_a = dataset.z_a[keep].astype(float)
    z_b = dataset.z_b[keep].astype(float)
    ones = np.ones_like(d_a)
    x = np.column_stack([ones, d_a, d_b, d_a * d_b])
    z = np.column_stack([ones, z_a, z_b, z_a * z_b])
    u = dataset.y[keep] - x @ np.asarray(beta, dtype=float)
    zwx = z.T @ (w[:, None] * x)
    try:
        bread = np.linalg.inv(zwx)
    except np.linalg.LinAlgError:
        raise IdentificationError("instrument moment matrix is singular") from None
    if not np.all(np.isfinite(bread)) or np.linalg.cond(zwx) > 1e12:
        raise IdentificationError("instrument moment matrix is singular")
    zu = z * (w * u)[:, None]
    meat = zu.T @ zu
    cov = bread @ meat @ bread.T
    n = int(keep.sum())
    if hc == "HC1":
        if n <= 4:
            raise ValidationError("HC1 needs more than four observations")
        cov = cov * n / (n - 4)
    return cov
