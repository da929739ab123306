"""Self-check harness: closed-form vs. traversal-oracle equivalence sweeps
and solver-vs-exhaustive spot checks.

Shared by the ``verify`` CLI subcommand and the acceptance test suite so both
run the identical procedure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .energy import (
    _energy_unchecked,
    traffic_src1,
    traffic_src3,
    traffic_src4,
)
from .model import (
    AXES,
    GemmInstance,
    HardwareSpec,
    Mapping,
    divisor_chains,
)
from .oracle import assemble_tally, exhaustive_optimum, walk_structural
from .solver import SolveOptions, solve

ALL_BYPASS = list(itertools.product((False, True), repeat=3))


def toy_hardware(num_pe: int = 4) -> HardwareSpec:
    """Small spec with distinct, non-round energy constants so that count
    errors cannot cancel, and capacities large enough to never bind."""
    return HardwareSpec(
        name=f"toy-{num_pe}pe",
        num_pe=num_pe,
        cap_sram=1 << 30,
        cap_rf=1 << 30,
        e_dram_read=211.0,
        e_dram_write=223.5,
        e_sram_read=6.375,
        e_sram_write=7.125,
        e_rf_read=1.03125,
        e_rf_write=1.21875,
        e_macc=0.5625,
        e_spatial_reduce=0.328125,
        cycle_period=1e-9,
    )


@dataclass
class SweepOutcome:
    mappings_checked: int
    count_mismatches: list[str]
    energy_mismatches: list[str]

    @property
    def ok(self) -> bool:
        return not self.count_mismatches and not self.energy_mismatches


def _dims_values(max_dims: int) -> list[int]:
    vals = [1]
    v = 2
    while v <= max_dims:
        vals.append(v)
        v *= 2
    return vals


def oracle_equivalence_sweep(
    hw: HardwareSpec,
    max_dims: int = 8,
    rel_tol: float = 1e-9,
    max_report: int = 20,
) -> SweepOutcome:
    """Compare closed-form traffic counts and energy against the traversal
    oracle for every feasible tiling x walking-axis pair x bypass combination
    of every GEMM with power-of-two dims up to ``max_dims``.

    One structural walk per (tiling, walking axes) serves all 64 bypass
    combinations, which is what makes the full sweep tractable.
    """
    vals = _dims_values(max_dims)
    checked = 0
    count_bad: list[str] = []
    energy_bad: list[str] = []

    for dx, dy, dz in itertools.product(vals, repeat=3):
        gemm = GemmInstance(dx, dy, dz)
        chain_sets = [divisor_chains(n) for n in gemm.dims]
        for cx, cy, cz in itertools.product(*chain_sets):
            f = (cx[1] // cx[2]) * (cy[1] // cy[2]) * (cz[1] // cz[2])
            if f != hw.num_pe:
                continue
            tiles = (
                (cx[0], cy[0], cz[0]),
                (cx[1], cy[1], cz[1]),
                (cx[2], cy[2], cz[2]),
            )
            for w01, w12 in itertools.product(AXES, repeat=2):
                base = Mapping(tiles=tiles, walk_01=w01, walk_12=w12)
                counts = walk_structural(base, gemm)
                for b1 in ALL_BYPASS:
                    for b3 in ALL_BYPASS:
                        mapping = Mapping(
                            tiles=tiles, walk_01=w01, walk_12=w12,
                            bypass_sram=b1, bypass_rf=b3,
                        )
                        tally = assemble_tally(counts, b1, b3, hw)
                        n01 = traffic_src1(mapping, gemm)
                        n3 = traffic_src3(mapping, gemm)
                        n4 = traffic_src4(gemm)
                        where = (
                            f"gemm={gemm.dims} tiles={tiles} walk=({w01},{w12}) "
                            f"b1={b1} b3={b3}"
                        )
                        if n01 != tally.link01 or n3 != tally.src3 or n4 != tally.src4:
                            if len(count_bad) < max_report:
                                count_bad.append(
                                    f"{where}: closed {n01}/{n3} vs oracle "
                                    f"{tally.link01}/{tally.src3}"
                                )
                        bd = _energy_unchecked(mapping, gemm, hw, False)
                        ref = tally.energy_pj
                        err = abs(bd.e_total_abs - ref) / max(abs(ref), 1e-30)
                        if err > rel_tol:
                            if len(energy_bad) < max_report:
                                energy_bad.append(
                                    f"{where}: closed {bd.e_total_abs!r} vs "
                                    f"oracle {ref!r} (rel {err:.2e})"
                                )
                        checked += 1
    return SweepOutcome(checked, count_bad, energy_bad)


SOLVER_CHECK_GEMMS = (
    (4, 4, 4),
    (8, 4, 2),
    (8, 8, 1),
    (6, 6, 2),
    (12, 2, 2),
)


def solver_spot_check(hw: HardwareSpec, limit: int = 10**6) -> list[str]:
    """Solve a handful of enumerable instances and compare against the
    brute-force optimum, including tie-breaking and certificate gaps."""
    problems: list[str] = []
    for dims in SOLVER_CHECK_GEMMS:
        gemm = GemmInstance(*dims)
        ref_mapping, ref_energy = exhaustive_optimum(gemm, hw, limit=limit)
        mapping, bd, cert = solve(gemm, hw, SolveOptions())
        if bd.e_total_norm != ref_energy:
            problems.append(
                f"gemm={dims}: solver energy {bd.e_total_norm!r} != "
                f"exhaustive {ref_energy!r}"
            )
        if mapping != ref_mapping:
            problems.append(f"gemm={dims}: solver mapping differs from exhaustive optimum")
        if cert.gap != 0.0 or cert.upper_bound != cert.lower_bound:
            problems.append(f"gemm={dims}: certificate not tight (gap={cert.gap})")
        replay = _energy_unchecked(mapping, gemm, hw, False)
        if replay.e_total_norm != cert.upper_bound:
            problems.append(f"gemm={dims}: UB replay mismatch")
    return problems
