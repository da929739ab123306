#!/usr/bin/env python3
"""Solve the prefill GEMMs of an LLM on a hardware template and print a
per-GEMM table plus the weighted case energy-delay product.

Example:
    python3 scripts/solve_llm_case.py \
        --hw configs/hardware/eyeriss_like.json \
        --model configs/models/llama3_2_1b.json --seq-len 1024
"""

import argparse
import sys
import time

from gemmopt.config_io import load_hardware, load_workload
from gemmopt.energy import edp
from gemmopt.solver import solve
from gemmopt.workload import case_edp, expand_llm_prefill


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--hw", default="configs/hardware/eyeriss_like.json")
    ap.add_argument("--model", default="configs/models/llama3_2_1b.json")
    ap.add_argument("--seq-len", type=int, default=1024)
    args = ap.parse_args()

    hw = load_hardware(args.hw)
    desc = load_workload(args.model, seq_len=args.seq_len)
    gemms = expand_llm_prefill(desc)

    print(f"{desc.name or args.model} @ seq_len={args.seq_len} on {hw.name}")
    header = (
        f"{'gemm':<14} {'x':>6} {'y':>6} {'z':>6} {'w':>4} "
        f"{'pJ/MAC':>10} {'delay s':>10} {'EDP pJ.s':>12} {'gap':>5} {'t s':>6}"
    )
    print(header)
    print("-" * len(header))
    results = []
    for g in gemms:
        t0 = time.perf_counter()
        mapping, bd, cert = solve(g, hw)
        dt = time.perf_counter() - t0
        delay, edp_val = edp(bd, g, hw, active_pes=mapping.spatial_pes)
        results.append((g, bd.e_total_abs, delay))
        print(
            f"{g.label:<14} {g.dim_x:>6} {g.dim_y:>6} {g.dim_z:>6} "
            f"{g.weight:>4} {bd.e_total_norm:>10.4f} {delay:>10.3e} "
            f"{edp_val:>12.4e} {cert.gap:>5.2f} {dt:>6.2f}"
        )
    case = case_edp(results)
    print(f"\ncase EDP (weighted): {case.case_edp_pj_s:.6e} pJ.s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
