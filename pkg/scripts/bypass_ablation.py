#!/usr/bin/env python3
"""Measure how much per-axis buffer-bypass freedom saves on each shipped
hardware template.

For every GEMM of an LLM prefill case, solves twice — once with free
per-axis residency choices at the SRAM and regfile levels, once with both
levels forced all-resident — and reports the energy ratio.  Templates whose
regfile cannot hold all three operand tiles (e.g. a 1-word regfile) are
reported as infeasible under forced residency.

Example:
    python3 scripts/bypass_ablation.py --model configs/models/llama3_2_1b.json
"""

import argparse
import dataclasses
import sys

from gemmopt.config_io import load_hardware, load_workload
from gemmopt.model import InfeasibleError
from gemmopt.solver import solve
from gemmopt.workload import expand_llm_prefill

TEMPLATES = [
    "configs/hardware/eyeriss_like.json",
    "configs/hardware/gemmini_like.json",
    "configs/hardware/a100_like.json",
    "configs/hardware/tpu_v1_like.json",
]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default="configs/models/llama3_2_1b.json")
    ap.add_argument("--seq-len", type=int, default=256)
    ap.add_argument("--hw", action="append", default=None,
                    help="hardware template(s); default: all shipped ones")
    args = ap.parse_args()

    desc = load_workload(args.model, seq_len=args.seq_len)
    gemms = expand_llm_prefill(desc)

    for path in args.hw or TEMPLATES:
        hw = load_hardware(path)
        frozen_hw = dataclasses.replace(hw, bypass_freedom=(False, False))
        print(f"\n{hw.name} ({hw.num_pe} PEs, RF {hw.cap_rf} words)")
        print(f"{'gemm':<14} {'free pJ/MAC':>12} {'frozen pJ/MAC':>14} {'ratio':>7}")
        for g in gemms:
            try:
                _, bd_free, _ = solve(g, hw)
            except InfeasibleError as exc:
                print(f"{g.label:<14} infeasible even when free: {exc.binding}")
                continue
            try:
                _, bd_frozen, _ = solve(g, frozen_hw)
            except InfeasibleError:
                print(f"{g.label:<14} {bd_free.e_total_norm:>12.4f} "
                      f"{'infeasible':>14} {'—':>7}")
                continue
            ratio = bd_frozen.e_total_norm / bd_free.e_total_norm
            print(f"{g.label:<14} {bd_free.e_total_norm:>12.4f} "
                  f"{bd_frozen.e_total_norm:>14.4f} {ratio:>7.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
