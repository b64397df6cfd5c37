"""Command-line front end.

Subcommands:

* ``analyze``: descriptive cell table, takeup shares, identified moments,
  Wald estimands and the saturated IV regression.
* ``bounds``: every partial-identification interval with assumption tags.
* ``sensitivity``: multiplier models, box bounds and level-set grids.
* ``simulate``: sample a dataset from a population spec.
* ``verify``: run the oracle checks over spec files or random specs.

Exit codes: 0 success, 2 invalid input, 3 identification or assumption
failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import bounds as bd
from . import sensitivity as sens
from .core import CELLS, AssumedInterval, CellTable, Dataset, build_cell_table, cell_key, check_one_sided, read_csv
from .errors import (
    AssumptionViolation,
    FactorialIVError,
    IdentificationError,
    PreconditionError,
    ValidationError,
    VerificationFailure,
)
from .estimands import COEF_NAMES, IvEstimates, robust_se, saturated_iv, wald
from .identification import Restrictions, TypeShares, compliance_diagnostics, identified_moments, type_shares
from .moments import load_moments, table_to_moments
from .oracle.population import (
    MODES,
    PopulationSpec,
    exact_cell_table,
    make_population,
    random_spec,
    sample_dataset,
)
from .oracle.verify import THEOREMS, applicable, verify

REPORT_SCHEMA_VERSION = 1
EXIT_OK, EXIT_VALIDATION, EXIT_IDENTIFICATION, EXIT_VERIFICATION = 0, 2, 3, 4
# consistency tolerance between closed-form and published coefficients
REPORTED_BETA_TOL = 0.08


@dataclass
class Inputs:
    table: CellTable
    dataset: Dataset | None
    k: float
    k_source: str
    reported_beta: np.ndarray | None
    reported_se: np.ndarray | None
    source: str
    population: Any = None
    assignment_probs: Any = None


# ---------------------------------------------------------------- parsing


def _p_j_b(text: str) -> float | str:
    if text.strip().lower() == "free":
        return "free"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a share in [0, 1] or 'free', got {text!r}") from None
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError("P(.,j) must lie in [0, 1]")
    return value


def _lambda_box(text: str) -> tuple[str | None, tuple[float, float]]:
    name, _, rng = text.rpartition("=")
    try:
        lo, hi = (float(v) for v in rng.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI or NAME=LO,HI, got {text!r}") from None
    if not 0 <= lo <= hi:
        raise argparse.ArgumentTypeError("a multiplier box needs 0 <= LO <= HI")
    return (name or None), (lo, hi)


def _data_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    src = p.add_argument_group("input (choose one)")
    mx = src.add_mutually_exclusive_group()
    mx.add_argument("--input", metavar="CSV", help="raw data with columns y, d_a, d_b, z_a, z_b and optional weight")
    mx.add_argument("--moments", metavar="JSON", help="published cell moments; 'application' loads the bundled example")
    mx.add_argument("--spec", metavar="JSON", help="population spec; its exact cell table is the input")
    for col in ("y", "d_a", "d_b", "z_a", "z_b", "weight"):
        src.add_argument(f"--col-{col.replace('_', '-')}", dest=f"col_{col}", metavar="NAME", help=f"CSV column holding {col}")
    src.add_argument("--lenient", action="store_true", help="accept any nonzero number as 1 in binary columns")

    r = p.add_argument_group("restrictions and outcome range")
    r.add_argument("--no-cross-defiers-a", action="store_true", help="member A has no cross-defiers")
    r.add_argument("--no-cross-defiers-b", action="store_true", help="member B has no cross-defiers")
    r.add_argument("--no-joint-compliers-a", action="store_true", help="member A has no joint compliers")
    r.add_argument("--no-joint-compliers-b", action="store_true", help="member B has no joint compliers")
    r.add_argument("--k", type=float, help="upper end of the outcome range [0, K]")
    r.add_argument("--y11-ge-y00", action="store_true", help="assume Y(11) >= Y(00) for joint compliers")
    r.add_argument("--y11-ge-max", action="store_true", help="assume Y(11) >= max(Y(10), Y(01)); implies --y11-ge-y00")
    r.add_argument("--allow-violations", action="store_true", help="continue when one-sided noncompliance fails")

    iv = p.add_argument_group("IV coefficients")
    iv.add_argument("--hc0", action="store_true", help="HC0 instead of HC1 robust standard errors")
    iv.add_argument(
        "--iv-source", choices=("auto", "computed", "reported"), default="auto",
        help="coefficients feeding bounds and sensitivity; auto prefers reported values from a moments file",
    )
    _output_args(p)
    return p


def _output_args(p: argparse.ArgumentParser) -> None:
    o = p.add_argument_group("output")
    o.add_argument("--format", choices=("json", "csv", "text"), default="text")
    o.add_argument("--out", metavar="DIR", help="write reports and grids into this directory instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factorial-iv",
        description="IV estimands, bounds and sensitivity analysis for 2x2 factorial designs with endogenous takeup.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    data = _data_parent()

    sub.add_parser("analyze", parents=[data], help="cell tables, type shares, Wald and IV estimates")

    b = sub.add_parser("bounds", parents=[data], help="bounds on joint and interaction effects")
    b.add_argument("--p-j-b", type=_p_j_b, default=None, help="share of B joint compliers, or 'free' for its feasible range")
    b.add_argument("--no-clip", action="store_true", help="keep component intervals unclipped (diagnostics)")

    s = sub.add_parser("sensitivity", parents=[data], help="multiplier models and level-set grids")
    s.add_argument("--p-j-b", type=_p_j_b, default=None, help="share of B joint compliers, or 'free'")
    s.add_argument("--lambda-box", type=_lambda_box, action="append", default=[], metavar="[NAME=]LO,HI")
    s.add_argument("--grid-res", type=int, default=sens.DEFAULT_RESOLUTION, help="grid points per axis")
    s.add_argument("--grid-format", choices=("csv", "gnuplot", "json"), default="csv")

    sim = sub.add_parser("simulate", help="sample a dataset from a population spec")
    sim.add_argument("--spec", metavar="JSON", help="population spec; omit for a random spec")
    sim.add_argument("--mode", choices=sorted(MODES), default="ONE_SIDED", help="mode of the random spec")
    sim.add_argument("--n", type=int, default=1000, help="number of rows")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--exact-moments", action="store_true", help="also write the exact cell moments as JSON")
    _output_args(sim)

    v = sub.add_parser("verify", help="check identification results on exact populations")
    v.add_argument("--spec", metavar="JSON", action="append", default=[], help="population spec (repeatable)")
    v.add_argument("--mode", choices=sorted(MODES), default="ONE_SIDED", help="mode of random specs")
    v.add_argument("--count", type=int, default=100, help="number of random specs when no --spec is given")
    v.add_argument("--theorem", action="append", choices=THEOREMS, help="restrict to these checks (repeatable)")
    v.add_argument("--seed", type=int, default=0, help="master seed; case i uses seed + i")
    _output_args(v)
    return parser


# ---------------------------------------------------------------- inputs


def _restrictions(args: argparse.Namespace) -> Restrictions:
    return Restrictions(
        no_cross_defiers_a=args.no_cross_defiers_a,
        no_cross_defiers_b=args.no_cross_defiers_b,
        no_joint_compliers_a=args.no_joint_compliers_a,
        no_joint_compliers_b=args.no_joint_compliers_b,
    )


def load_inputs(args: argparse.Namespace) -> Inputs:
    if args.k is not None and not args.k > 0:
        raise ValidationError("--k must be positive")
    if args.input:
        schema = {c: getattr(args, f"col_{c}") for c in ("y", "d_a", "d_b", "z_a", "z_b", "weight") if getattr(args, f"col_{c}")}
        data = read_csv(args.input, schema=schema, lenient=args.lenient)
        table = build_cell_table(data)
        k, k_source = _resolve_k(args.k, None, float(data.y.max()), float(data.y.min()))
        return Inputs(table, data, k, k_source, None, None, f"csv:{args.input}")
    if args.moments:
        mf = load_moments(args.moments)
        k, k_source = _resolve_k(args.k, mf.k, None, None)
        if _max_cell_mean(mf.table) > k:
            raise ValidationError(f"a cell mean {_max_cell_mean(mf.table):.6g} exceeds K = {k:.6g}")
        return Inputs(mf.table, None, k, k_source, mf.reported_beta, mf.reported_se, f"moments:{args.moments}")
    if args.spec:
        spec = PopulationSpec.load(args.spec)
        pop = make_population(spec)
        table = exact_cell_table(pop, spec.assignment_probs)
        k, k_source = _resolve_k(args.k, pop.k, None, None)
        return Inputs(table, None, k, k_source, None, None, f"spec:{args.spec}", pop, spec.assignment_probs)
    raise ValidationError("give one of --input, --moments or --spec")


def _max_cell_mean(table: CellTable) -> float:
    # a cell mean above K means some outcome is above K
    return max(table.y(za, zb) for za in (0, 1) for zb in (0, 1))


def _resolve_k(flag: float | None, declared: float | None, y_max: float | None, y_min: float | None) -> tuple[float, str]:
    if y_min is not None and y_min < 0:
        raise ValidationError(f"outcomes must be nonnegative, found {y_min:.6g}")
    if flag is not None:
        if y_max is not None and y_max > flag:
            raise ValidationError(f"observed outcome {y_max:.6g} exceeds K = {flag:.6g}")
        return float(flag), "flag"
    if declared is not None:
        return float(declared), "input"
    if y_max is not None and y_max > 0:
        return y_max, "observed maximum"
    raise ValidationError("cannot infer K; pass --k")


def _one_sided_gate(inputs: Inputs, args: argparse.Namespace, notes: list[str]) -> bool:
    report = check_one_sided(inputs.table)
    if report.passed:
        return True
    msg = (
        f"one-sided noncompliance fails: treated-A mass without Z_A {report.violation_a:.4g}, "
        f"treated-B mass without Z_B {report.violation_b:.4g}"
    )
    if not args.allow_violations:
        raise AssumptionViolation(msg + "; rerun with --allow-violations to see the estimates that do not need it")
    notes.append(msg + "; estimands that need it are suppressed")
    return False


def _iv(inputs: Inputs, args: argparse.Namespace, notes: list[str]) -> tuple[IvEstimates, np.ndarray, str]:
    """Closed-form IV estimates and the coefficients used downstream."""
    est = saturated_iv(inputs.table)
    if inputs.dataset is not None:
        cov = robust_se(inputs.dataset, est.beta, hc="HC0" if args.hc0 else "HC1")
        est = est.with_cov(cov)
    choice = args.iv_source
    if choice == "reported" and inputs.reported_beta is None:
        raise ValidationError("--iv-source reported needs a moments file with reported coefficients")
    if choice == "reported" or (choice == "auto" and inputs.reported_beta is not None):
        notes.append("bounds and sensitivity use the reported coefficients")
        return est, inputs.reported_beta, "reported"
    return est, est.beta, "computed"


# ---------------------------------------------------------------- reports


def _pvalue(t: float) -> float:
    return math.erfc(abs(t) / math.sqrt(2.0))


def _coef_table(beta: np.ndarray, se: np.ndarray | None) -> list[dict[str, Any]]:
    rows = []
    for i, name in enumerate(COEF_NAMES):
        row: dict[str, Any] = {"term": name, "coef": float(beta[i])}
        if se is not None:
            t = beta[i] / se[i] if se[i] > 0 else float("nan")
            row.update(se=float(se[i]), t=float(t), p=_pvalue(t) if math.isfinite(t) else float("nan"))
        rows.append(row)
    return rows


def _base_report(command: str, inputs: Inputs | None, args: argparse.Namespace) -> dict[str, Any]:
    rep: dict[str, Any] = {"schema_version": REPORT_SCHEMA_VERSION, "command": command, "version": __version__}
    if inputs is not None:
        rep["input"] = {"source": inputs.source, "k": inputs.k, "k_source": inputs.k_source}
        if inputs.dataset is not None:
            rep["input"].update(rows=len(inputs.dataset), dropped_missing_outcome=inputs.dataset.n_dropped)
        rep["restrictions"] = _restrictions(args).tags()
    return rep


def cmd_analyze(args: argparse.Namespace) -> dict[str, Any]:
    inputs = load_inputs(args)
    rep = _base_report("analyze", inputs, args)
    notes: list[str] = []
    t = inputs.table
    rep["cells"] = [
        {
            "cell": cell_key(za, zb), "n": t.n(za, zb), "y": t.y(za, zb),
            "d_a": t.d_a(za, zb), "d_b": t.d_b(za, zb), "d_ab": t.d_ab(za, zb),
        }
        for za, zb in CELLS if t.nonempty(za, zb)
    ]
    rep["takeup"] = {
        cell_key(za, zb): {f"d{da}{db}": t.prob(za, zb, da, db) for da, db in CELLS}
        for za, zb in CELLS if t.nonempty(za, zb)
    }
    rep["cond_means"] = {
        cell_key(za, zb): {f"d{da}{db}": t.mean(za, zb, da, db) for da, db in CELLS}
        for za, zb in CELLS if t.nonempty(za, zb)
    }
    one_sided = _one_sided_gate(inputs, args, notes)
    rep["one_sided"] = check_one_sided(t).as_dict()
    if one_sided:
        shares = type_shares(t, _restrictions(args))
        rep["type_shares"] = shares.as_dict()
        rep["diagnostics"] = [{"side": d.side, "contrast": d.contrast, "statement": d.statement} for d in compliance_diagnostics(t)]
        rep["identified_moments"] = identified_moments(t, shares).as_dict()
        rep["wald"] = {
            "delta_A0": wald(t, "A", 0), "delta_A1": wald(t, "A", 1),
            "delta_B0": wald(t, "B", 0), "delta_B1": wald(t, "B", 1),
        }
    est, _, _ = _iv(inputs, args, [])
    se = est.se()
    rep["iv"] = {"coefficients": _coef_table(est.beta, se), "hc": None if se is None else ("HC0" if args.hc0 else "HC1")}
    if se is None:
        notes.append("standard errors need raw data and are unavailable from moments")
    if inputs.reported_beta is not None:
        diff = np.abs(est.beta - inputs.reported_beta)
        rep["iv"]["reported"] = _coef_table(inputs.reported_beta, inputs.reported_se)
        rep["iv"]["max_abs_diff_to_reported"] = float(diff.max())
        rep["iv"]["consistent_with_reported"] = bool(np.all(diff <= REPORTED_BETA_TOL))
    rep["notes"] = notes
    return rep


def _bound_inputs(inputs: Inputs, args: argparse.Namespace, restrictions: Restrictions, clip: bool = True) -> bd.BoundInputs:
    shares = type_shares(inputs.table, restrictions)
    return bd.BoundInputs(shares, identified_moments(inputs.table, shares), inputs.k, args.y11_ge_y00, args.y11_ge_max, clip)


def _p_j_b_choice(args: argparse.Namespace, shares: TypeShares) -> float | tuple[float, float]:
    value = args.p_j_b
    if args.no_joint_compliers_b:
        if value not in (None, 0.0):
            raise ValidationError("--p-j-b contradicts --no-joint-compliers-b")
        return 0.0
    if value is None or value == "free":
        return shares.p_j_b_range()
    return float(value)


def cmd_bounds(args: argparse.Namespace) -> dict[str, Any]:
    inputs = load_inputs(args)
    rep = _base_report("bounds", inputs, args)
    notes: list[str] = []
    if not _one_sided_gate(inputs, args, notes):
        raise AssumptionViolation(f"{args.command} needs one-sided noncompliance")
    r = _restrictions(args)
    inp = _bound_inputs(inputs, args, r, clip=not args.no_clip)
    out: dict[str, Any] = {
        "y00_cc": bd.bound_y00_cc(inp).as_dict(),
        "y00_cc_clipped": bd.bound_y00_cc(inp, clip=True).as_dict(),
        "joint_cc": bd.bound_joint_cc(inp).as_dict(),
    }
    direct = None
    if r.no_cross_defiers_a and r.no_joint_compliers_b:
        direct = bd.bound_laie_direct(inp)
        out["laie_direct"] = direct.as_dict()
    else:
        notes.append("direct interaction bounds need --no-cross-defiers-a and --no-joint-compliers-b")
    if r.no_cross_defiers_a and inp.shares.p_j_a > bd.SHARE_TOL:
        out["aux_a"] = bd.bound_aux_a(inp).as_dict()
    if r.no_joint_compliers_b and inp.shares.p_d_b > bd.SHARE_TOL:
        out["aux_b"] = bd.bound_aux_b(inp).as_dict()
    if r.no_cross_defiers_a:
        _, beta, beta_source = _iv(inputs, args, notes)
        p = _p_j_b_choice(args, inp.shares)
        ind = bd.bound_laie_indirect(inp, beta[3], beta[1], beta[2], p)
        out["laie_indirect"] = ind.as_dict() | {"p_j_b_input": list(p) if isinstance(p, tuple) else p, "beta_source": beta_source}
        if direct is not None:
            out["laie_combined"] = direct.laie.intersect(ind.laie).as_dict()
    else:
        notes.append("indirect interaction bounds need --no-cross-defiers-a")
    rep["bounds"] = out
    if inputs.population is not None:
        check = verify(inputs.population, inputs.assignment_probs, "BOUNDS_CONTAIN")
        rep["truth_containment"] = {"passed": check.passed, "checks": len(check.checks), "failures": [c.as_dict() for c in check.failures()]}
    rep["notes"] = notes
    return rep


def _boxes(args: argparse.Namespace) -> tuple[Any, Any]:
    default = sens.DEFAULT_BOX
    named: dict[str, tuple[float, float]] = {}
    for name, rng in args.lambda_box:
        if name is None:
            default = rng
        else:
            named[name] = rng
    known = {"lambda_A", "lambda_B", "lambda_1", "lambda_2", "lambda_3"}
    unknown = set(named) - known
    if unknown:
        raise ValidationError(f"unknown multipliers {sorted(unknown)}; choose from {sorted(known)}")
    direct = {n: named.get(n, default) for n in ("lambda_A", "lambda_B")}
    indirect = {n: named.get(n, default) for n in ("lambda_1", "lambda_2", "lambda_3")}
    return direct, indirect


def _grid_report(grid: sens.LevelSetGrid) -> dict[str, Any]:
    return {"x": grid.x_name, "y": grid.y_name, "levels": grid.levels, "zero_contour": [list(p) for p in grid.zero_contour],
            "min": float(grid.values.min()), "max": float(grid.values.max())}


def cmd_sensitivity(args: argparse.Namespace) -> dict[str, Any]:
    inputs = load_inputs(args)
    rep = _base_report("sensitivity", inputs, args)
    notes: list[str] = []
    if not _one_sided_gate(inputs, args, notes):
        raise AssumptionViolation(f"{args.command} needs one-sided noncompliance")
    if args.grid_res < 1:
        raise ValidationError("--grid-res must be at least 1")
    r = _restrictions(args)
    inp = _bound_inputs(inputs, args, r)
    _, beta, beta_source = _iv(inputs, args, notes)
    direct_box, indirect_box = _boxes(args)
    grids: dict[str, sens.LevelSetGrid] = {}

    joint = bd.bound_joint_cc(inp)
    lower, upper = sens.direct_lambda_model(joint, beta[1], beta[2], direct_box)
    direct: dict[str, Any] = {"beta_source": beta_source}
    for model in (lower, upper):
        direct[model.label] = model.as_dict() | {"box_bound": sens.bound_over_box(model).as_dict()}
        grids[f"direct_{model.label}"] = sens.level_set_grid(model, "lambda_A", "lambda_B", args.grid_res)
        direct[model.label]["grid"] = _grid_report(grids[f"direct_{model.label}"])
    rep["direct"] = direct

    if r.no_cross_defiers_a:
        p = args.p_j_b
        if args.no_joint_compliers_b:
            if p not in (None, 0.0):
                raise ValidationError("--p-j-b contradicts --no-joint-compliers-b")
            p = 0.0
        lo, hi = inp.shares.p_j_b_range()
        if isinstance(p, float) and not lo - 1e-12 <= p <= hi + 1e-12:
            raise AssumptionViolation(f"P(.,j) = {p} is incompatible with the data; feasible range [{lo:.4g}, {hi:.4g}]")
        share = None if p in (None, "free") else p
        model = sens.indirect_lambda_model(inp.shares, beta[3], beta[1], beta[2], share, indirect_box)
        box = sens.bound_over_box(model)
        indirect: dict[str, Any] = model.as_dict() | {"box_bound": box.as_dict(), "p_j_b_feasible": [lo, hi], "beta_source": beta_source}
        shares_for_grid = [share] if share is not None else sorted({0.0, hi})
        indirect["grids"] = {}
        for s in shares_for_grid:
            for vx, vy in (("lambda_1", "lambda_2"), ("lambda_1", "lambda_3"), ("lambda_2", "lambda_3")):
                if s == 0.0 and "lambda_3" in (vx, vy):
                    continue
                name = f"indirect_{vx}_{vy}_P{s:.4g}"
                grids[name] = sens.level_set_grid(model, vx, vy, args.grid_res, share=s)
                indirect["grids"][name] = _grid_report(grids[name])
        rep["indirect"] = indirect
    else:
        notes.append("the indirect model needs --no-cross-defiers-a")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        ext = {"csv": "csv", "gnuplot": "dat", "json": "json"}[args.grid_format]
        written = []
        for name, grid in grids.items():
            path = out / f"{name}.{ext}"
            sens.write_grid(grid, path, args.grid_format)
            written.append(path.name)
        rep["grid_files"] = written
    else:
        notes.append("grids are written only with --out")
    rep["notes"] = notes
    return rep


def cmd_simulate(args: argparse.Namespace) -> dict[str, Any]:
    if args.n < 1:
        raise ValidationError("--n must be at least 1")
    spec = PopulationSpec.load(args.spec) if args.spec else random_spec(args.mode, args.seed)
    pop = make_population(spec)
    data = sample_dataset(pop, args.n, args.seed, spec.assignment_probs)
    rep = _base_report("simulate", None, args)
    rep.update(spec=json.loads(spec.to_json()), rows=args.n, seed=args.seed)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        data.write_csv(out / "simulated.csv")
        spec.save(out / "spec.json")
        files = ["simulated.csv", "spec.json"]
        if args.exact_moments:
            doc = table_to_moments(exact_cell_table(pop, spec.assignment_probs), pop.k)
            (out / "exact_moments.json").write_text(json.dumps(doc, indent=1))
            files.append("exact_moments.json")
        rep["files"] = files
    else:
        buf = io.StringIO()
        _write_dataset(data, buf)
        rep["csv"] = buf.getvalue()
    return rep


def _write_dataset(data: Dataset, fh: Any) -> None:
    writer = csv.writer(fh)
    writer.writerow(["y", "d_a", "d_b", "z_a", "z_b"])
    for y, da, db, za, zb in zip(data.y, data.d_a, data.d_b, data.z_a, data.z_b):
        writer.writerow([repr(float(y)), int(da), int(db), int(za), int(zb)])


def cmd_verify(args: argparse.Namespace) -> dict[str, Any]:
    if args.spec:
        specs = [PopulationSpec.load(p) for p in args.spec]
    else:
        if args.count < 1:
            raise ValidationError("--count must be at least 1")
        specs = [random_spec(args.mode, args.seed + i) for i in range(args.count)]
    theorems = args.theorem or list(THEOREMS)
    rep = _base_report("verify", None, args)
    summary = {th: {"run": 0, "passed": 0, "skipped": 0} for th in theorems}
    failures = []
    for i, spec in enumerate(specs):
        pop = make_population(spec)
        for th in theorems:
            if not applicable(th, spec.mode):
                summary[th]["skipped"] += 1
                continue
            try:
                result = verify(pop, spec.assignment_probs, th)
            except PreconditionError:
                summary[th]["skipped"] += 1
                continue
            summary[th]["run"] += 1
            if result.passed:
                summary[th]["passed"] += 1
            else:
                failures.append({"case": i, "theorem": th, "spec": json.loads(spec.to_json()),
                                 "checks": [c.as_dict() for c in result.failures()]})
    rep.update(cases=len(specs), summary=summary, failures=failures, passed=not failures)
    return rep


COMMANDS = {
    "analyze": cmd_analyze,
    "bounds": cmd_bounds,
    "sensitivity": cmd_sensitivity,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------- rendering


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, AssumedInterval):
        return obj.as_dict()
    return obj


def _flatten(obj: Any, prefix: str = "") -> list[tuple[str, Any]]:
    if isinstance(obj, dict):
        rows: list[tuple[str, Any]] = []
        for k, v in obj.items():
            rows.extend(_flatten(v, f"{prefix}.{k}" if prefix else str(k)))
        return rows
    if isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        rows = []
        for i, v in enumerate(obj):
            rows.extend(_flatten(v, f"{prefix}[{i}]"))
        return rows
    if isinstance(obj, list):
        return [(prefix, ";".join(str(v) for v in obj))]
    return [(prefix, obj)]


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if v is None:
        return "NA"
    return str(v)


def render(report: dict[str, Any], fmt: str) -> str:
    doc = _jsonable(report)
    if fmt == "json":
        return json.dumps(doc, indent=1) + "\n"
    csv_payload = doc.pop("csv", None)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["key", "value"])
        for k, v in _flatten(doc):
            writer.writerow([k, "" if v is None else v])
        return buf.getvalue()
    lines = [f"{k}: {_fmt(v)}" for k, v in _flatten(doc)]
    text = "\n".join(lines) + "\n"
    return text + (csv_payload or "")


def _emit(report: dict[str, Any], args: argparse.Namespace) -> None:
    if args.command == "simulate" and not args.out:
        sys.stdout.write(report["csv"])
        return
    text = render(report, args.format)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        ext = {"json": "json", "csv": "csv", "text": "txt"}[args.format]
        (out / f"{args.command}_report.{ext}").write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = COMMANDS[args.command](args)
        _emit(report, args)
        if args.command == "verify" and not report["passed"]:
            raise VerificationFailure(f"{len(report['failures'])} verification failures")
    except VerificationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    except (IdentificationError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IDENTIFICATION
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FactorialIVError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
