"""Command-line surface: solve, evaluate, validate, verify, expand, report.

Exit codes: 0 success, 1 infeasible mapping/workload, 2 configuration error,
3 verification mismatch, 4 time limit expired with a nonzero optimality gap.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config_io import (
    ConfigError,
    RunRecord,
    WORKLOAD_SCHEMA,
    config_digest,
    load_hardware,
    load_mapping,
    load_run,
    load_workload,
    pad_workload,
    write_run,
)
from .energy import InvalidMappingError, edp, energy_total
from .model import GemmInstance, InfeasibleError, ModelError, validate
from .solver import SolveOptions, solve
from .verification import (
    oracle_equivalence_sweep,
    solver_spot_check,
    toy_hardware,
)
from .workload import LlmModelDesc, expand_llm_prefill

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_CONFIG = 2
EXIT_MISMATCH = 3
EXIT_TIME_LIMIT = 4


def _expand(workload, seq_len: int | None) -> list[GemmInstance]:
    if isinstance(workload, LlmModelDesc):
        return expand_llm_prefill(workload)
    return workload


def _load_gemms(args) -> list[GemmInstance]:
    workload = load_workload(args.workload, getattr(args, "seq_len", None))
    gemms = _expand(workload, getattr(args, "seq_len", None))
    pad = getattr(args, "pad", None)
    if pad is not None:
        gemms = [pad_workload(g, pad) for g in gemms]
    return gemms


def _solve_one(gemm: GemmInstance, hw, opts: SolveOptions) -> RunRecord:
    mapping, bd, cert = solve(gemm, hw, opts)
    delay, product = edp(bd, gemm, hw, active_pes=mapping.spatial_pes)
    return RunRecord(
        label=gemm.label,
        dims=gemm.dims,
        weight=gemm.weight,
        mapping=mapping,
        breakdown=bd,
        delay_s=delay,
        edp_pj_s=product,
        certificate=cert,
    )


def _cmd_solve(args) -> int:
    hw = load_hardware(args.hw)
    gemms = _load_gemms(args)
    opts = SolveOptions(
        time_limit=args.time_limit,
        pe_relax=args.pe_relax,
        include_leak=args.leak,
        pad_slack=args.pad if args.pad is not None else 0.0,
    )
    workers = args.threads if args.threads > 0 else (os.cpu_count() or 1)

    records: list[RunRecord | None] = [None] * len(gemms)
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(_solve_one, g, hw, opts): i for i, g in enumerate(gemms)}
        for fut in concurrent.futures.as_completed(futures):
            records[futures[fut]] = fut.result()  # InfeasibleError propagates

    done = [r for r in records if r is not None]
    case = sum(r.weight * r.edp_pj_s for r in done)
    digests = {"hardware": config_digest(args.hw), "workload": config_digest(args.workload)}
    write_run(
        args.out,
        done,
        hardware_id=hw.name,
        workload_id=Path(args.workload).stem,
        digests=digests,
        case_edp_pj_s=case,
    )
    worst_gap = max((r.certificate.gap for r in done if r.certificate), default=0.0)
    for r in done:
        cert = r.certificate
        print(
            f"{r.label or 'gemm'} dims={r.dims} weight={r.weight}: "
            f"energy={r.breakdown.e_total_abs:.6g} pJ "
            f"delay={r.delay_s:.6g} s edp={r.edp_pj_s:.6g} pJ*s "
            f"gap={cert.gap:.3g} ({cert.proof_kind}, {cert.wall_time:.2f} s)"
        )
    print(f"case EDP = {case:.6g} pJ*s -> {args.out}")
    if worst_gap > 0.0:
        print(f"warning: time limit expired; worst gap {worst_gap:.3g}", file=sys.stderr)
        return EXIT_TIME_LIMIT
    return EXIT_OK


def _single_gemm(args) -> tuple:
    hw = load_hardware(args.hw)
    gemms = _load_gemms(args)
    if args.index >= len(gemms):
        raise ConfigError(
            f"--index {args.index} out of range; workload has {len(gemms)} GEMMs"
        )
    return hw, gemms[args.index]


def _cmd_evaluate(args) -> int:
    hw, gemm = _single_gemm(args)
    mapping = load_mapping(args.mapping)
    try:
        bd = energy_total(mapping, gemm, hw, include_leak=args.leak, pe_relax=args.pe_relax)
    except InvalidMappingError as exc:
        print(f"infeasible mapping: {exc.report}", file=sys.stderr)
        return EXIT_INFEASIBLE
    delay, product = edp(bd, gemm, hw, active_pes=mapping.spatial_pes)
    out = {
        "label": gemm.label,
        "dims": list(gemm.dims),
        "energy": bd.as_dict(),
        "delay_s": delay,
        "edp_pj_s": product,
    }
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def _cmd_validate(args) -> int:
    hw, gemm = _single_gemm(args)
    mapping = load_mapping(args.mapping)
    report = validate(mapping, gemm, hw, pe_relax=args.pe_relax)
    print(str(report))
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def _cmd_verify(args) -> int:
    hw = toy_hardware()
    print(f"oracle equivalence sweep (dims up to {args.max_dims}, hw {hw.name}) ...")
    outcome = oracle_equivalence_sweep(hw, max_dims=args.max_dims)
    print(f"  {outcome.mappings_checked} mappings checked")
    for line in outcome.count_mismatches:
        print(f"  COUNT MISMATCH {line}", file=sys.stderr)
    for line in outcome.energy_mismatches:
        print(f"  ENERGY MISMATCH {line}", file=sys.stderr)
    print("solver vs exhaustive spot check ...")
    problems = solver_spot_check(hw)
    for line in problems:
        print(f"  SOLVER MISMATCH {line}", file=sys.stderr)
    if not outcome.ok or problems:
        print("verification FAILED", file=sys.stderr)
        return EXIT_MISMATCH
    print("verification passed")
    return EXIT_OK


def _cmd_expand(args) -> int:
    workload = load_workload(args.model, args.seq_len)
    if not isinstance(workload, LlmModelDesc):
        raise ConfigError(f"{args.model}: expected an LLM model descriptor")
    gemms = expand_llm_prefill(workload)
    out = {
        "schema": WORKLOAD_SCHEMA,
        "name": f"{workload.name}-seq{workload.seq_len}",
        "gemms": [
            {
                "label": g.label,
                "dim_x": g.dim_x,
                "dim_y": g.dim_y,
                "dim_z": g.dim_z,
                "weight": g.weight,
            }
            for g in gemms
        ],
    }
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def _cmd_report(args) -> int:
    runs = [(path, load_run(path)) for path in args.runs]
    baseline = load_run(args.baseline) if args.baseline else None
    base_by_label = {}
    base_case = None
    if baseline is not None:
        base_by_label = {g["label"]: g["edp_pj_s"] for g in baseline["gemms"]}
        base_case = baseline["case_edp_pj_s"]

    case_rows = []
    layer_rows = []
    for path, run in runs:
        run_id = Path(path).stem
        case = run["case_edp_pj_s"]
        norm = case / base_case if base_case else ""
        case_rows.append([run_id, run["hardware"], run["workload"], case, norm])
        for g in run["gemms"]:
            b = base_by_label.get(g["label"])
            layer_rows.append([
                run_id,
                g["label"],
                g["weight"],
                g["energy"]["e_total_pj"],
                g["delay_s"],
                g["edp_pj_s"],
                g["edp_pj_s"] / b if b else "",
            ])

    with open(args.out_case, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "hardware", "workload", "case_edp_pj_s", "case_edp_norm"])
        w.writerows(case_rows)
    with open(args.out_layers, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "label", "weight", "energy_pj", "delay_s", "edp_pj_s", "edp_norm"])
        w.writerows(layer_rows)
    print(f"wrote {args.out_case} ({len(case_rows)} runs) and {args.out_layers} "
          f"({len(layer_rows)} rows)")
    return EXIT_OK


def _add_workload_args(p, with_mapping=False):
    p.add_argument("--hw", required=True, help="hardware spec JSON")
    p.add_argument("--workload", required=True, help="GEMM list or LLM model JSON")
    p.add_argument("--seq-len", type=int, default=None, help="prefill length for model files")
    p.add_argument("--pad", type=float, default=None,
                   help="pad extents to divisor-rich values within this slack factor (>= 1)")
    p.add_argument("--pe-relax", action="store_true",
                   help="allow spatial unrolling product <= num_pe instead of ==")
    if with_mapping:
        p.add_argument("--mapping", required=True, help="mapping JSON")
        p.add_argument("--index", type=int, default=0, help="GEMM index within the workload")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gemmopt",
        description="Closed-form energy evaluation and provably optimal GEMM "
                    "mapping for spatial accelerators.",
    )
    parser.add_argument("--version", action="version", version=f"gemmopt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="find the optimal mapping per GEMM")
    _add_workload_args(p)
    p.add_argument("--time-limit", type=float, default=0.0, help="seconds per GEMM; 0 = none")
    p.add_argument("--leak", action="store_true", help="include leakage in the objective")
    p.add_argument("--threads", type=int, default=0, help="worker count; 0 = machine parallelism")
    p.add_argument("--out", required=True, help="output run JSON")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("evaluate", help="closed-form energy of a given mapping")
    _add_workload_args(p, with_mapping=True)
    p.add_argument("--leak", action="store_true")
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("validate", help="feasibility report for a given mapping")
    _add_workload_args(p, with_mapping=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("verify", help="oracle-equivalence and solver self-checks")
    p.add_argument("--max-dims", type=int, default=8, help="largest power-of-two extent swept")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("expand", help="emit the eight prefill GEMMs of a model")
    p.add_argument("--model", required=True, help="LLM model descriptor JSON")
    p.add_argument("--seq-len", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_expand)

    p = sub.add_parser("report", help="CSV tables from run files")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--baseline", default=None, help="run file that normalizes to 1")
    p.add_argument("--out-case", default="report_case.csv")
    p.add_argument("--out-layers", default="report_layers.csv")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ModelError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        binding = ", ".join(exc.binding) if exc.binding else "constraints"
        print(f"infeasible ({binding}): {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
