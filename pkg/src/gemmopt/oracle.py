"""Event-counting traversal reference for the closed-form energy model.

This module explicitly walks the hierarchical tiling -- SRAM tiles advancing
innermost along the stage-0/1 walking axis, array phases within each SRAM
tile advancing innermost along the stage-1/2 walking axis, spatial unrolling
across PEs, and per-point MACs -- and tallies word transfers per link and
per-level reads/writes.  It never uses the closed-form traffic expressions;
it only applies the stepwise transfer rules:

* a projection parallel to the walking direction is (re)loaded at every step;
* the projection orthogonal to the walking direction is loaded once per
  column, at the column head;
* reduction-axis transfers are write-backs; the old value is additionally
  read (and staged into the receiving buffer) except on the first
  accumulation touch of each output element at that receiver;
* a bypassed level forwards demand to the nearest upper resident level;
* spatial multicast/reduction shares one upper-level word among the PEs that
  differ only along the shared axis.

It exists solely to falsify the closed form and is never on the solve path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .model import (
    AXES,
    AXIS_INDEX,
    GemmInstance,
    HardwareSpec,
    InfeasibleError,
    Mapping,
    divisor_chains,
    rf_capacity_usage,
    sram_capacity_usage,
    validate,
)
from .energy import InvalidMappingError, _energy_unchecked, leak_norm

MAX_ORACLE_STEPS = 10**7


class OracleScaleError(RuntimeError):
    """The tile/phase walk would exceed the enumeration guard."""


class SpaceSizeError(RuntimeError):
    """The exhaustive mapping space exceeds the caller's limit."""


@dataclass(frozen=True)
class AccessTally:
    """Per-link word transfers plus per-level read/write word counts."""

    link01: dict[str, int]
    src3: dict[str, int]
    src4: dict[str, int]
    dram_read: int
    dram_write: int
    sram_read: int
    sram_write: int
    rf_read: int
    rf_write: int
    spatial_reduce_words: int
    macs: int
    energy_pj: float


@dataclass(frozen=True)
class StructuralCounts:
    """Bypass-independent event counts from one traversal walk.

    ``s1_words`` / ``s3_arr_words`` are transfer words on the 0-1 link and
    the array-side of the multicast link (write-back words for z);
    ``*_ro`` are read-old words; ``s4_groups`` are upper-side supply words
    for the MACC link after spatial sharing; ``macs`` is the stepped MAC
    count.
    """

    s1_words: dict[str, int]
    s1_ro_z: int
    s3_arr_words: dict[str, int]
    s3_ro_z_arr: int
    s4_groups: dict[str, int]
    s4_ro_z_groups: int
    macs: int
    spatial: dict[str, int]


def _loop_axes(walk: str, orth_order: str) -> list[str]:
    """Outer-to-inner axis order: the two orthogonal axes then the walk axis."""
    orth = [d for d in AXES if d != walk]
    if orth_order == "swapped":
        orth.reverse()
    elif orth_order != "canonical":
        raise ValueError(f"unknown orth_order {orth_order!r}")
    return orth + [walk]


def walk_structural(
    mapping: Mapping, gemm: GemmInstance, orth_order: str = "canonical"
) -> StructuralCounts:
    l0 = gemm.dims
    l1, l2 = mapping.tiles[0], mapping.tiles[1]
    f = {d: mapping.spatial(d) for d in AXES}
    n1 = [l0[i] // l1[i] for i in range(3)]
    n12 = [l1[i] // l2[i] for i in range(3)]
    n1prod = n1[0] * n1[1] * n1[2]
    n12prod = n12[0] * n12[1] * n12[2]
    if n1prod * n12prod > MAX_ORACLE_STEPS:
        raise OracleScaleError(
            f"oracle scale exceeded: {n1prod} tiles x {n12prod} phases > {MAX_ORACLE_STEPS}"
        )

    l1prod = l1[0] * l1[1] * l1[2]
    l2prod = l2[0] * l2[1] * l2[2]
    xi, yi, zi = AXIS_INDEX["x"], AXIS_INDEX["y"], AXIS_INDEX["z"]

    order1 = _loop_axes(mapping.walk_01, orth_order)
    order2 = _loop_axes(mapping.walk_12, orth_order)
    walk1_i = AXIS_INDEX[mapping.walk_01]
    walk2_i = AXIS_INDEX[mapping.walk_12]

    s1_words = {d: 0 for d in AXES}
    s1_ro_z = 0
    s3_arr = {d: 0 for d in AXES}
    s3_ro_z = 0
    s4_groups = {d: 0 for d in AXES}
    s4_ro_groups = 0
    macs = 0

    seen1: set[tuple[int, int]] = set()
    seen3: set[tuple[int, int]] = set()
    seen4: set[tuple[int, int]] = set()

    phase_steps_z = l2[zi] // f["z"]
    phase_xy = l2[xi] * l2[yi]

    for combo1 in itertools.product(*(range(n1[AXIS_INDEX[a]]) for a in order1)):
        t_idx = [0, 0, 0]
        for a, v in zip(order1, combo1):
            t_idx[AXIS_INDEX[a]] = v
        col_head1 = t_idx[walk1_i] == 0

        for i, d in enumerate(AXES):
            if d == mapping.walk_01 and not col_head1:
                continue
            words = l1prod // l1[i]
            s1_words[d] += words
            if d == "z":
                block = (t_idx[xi], t_idx[yi])
                if block in seen1:
                    s1_ro_z += words
                else:
                    seen1.add(block)

        base = [t_idx[i] * n12[i] for i in range(3)]  # tile origin in level-2 units

        for combo2 in itertools.product(*(range(n12[AXIS_INDEX[a]]) for a in order2)):
            p_idx = [0, 0, 0]
            for a, v in zip(order2, combo2):
                p_idx[AXIS_INDEX[a]] = v
            col_head2 = p_idx[walk2_i] == 0
            abs_xy = (base[xi] + p_idx[xi], base[yi] + p_idx[yi])

            for i, d in enumerate(AXES):
                if d == mapping.walk_12 and not col_head2:
                    continue
                words = l2prod // l2[i]
                s3_arr[d] += words
                if d == "z":
                    if abs_xy in seen3:
                        s3_ro_z += words
                    else:
                        seen3.add(abs_xy)

            s4_groups["x"] += l2prod // f["x"]
            s4_groups["y"] += l2prod // f["y"]
            s4_groups["z"] += phase_xy * phase_steps_z
            if abs_xy in seen4:
                s4_ro_groups += phase_xy * phase_steps_z
            else:
                s4_ro_groups += phase_xy * (phase_steps_z - 1)
                seen4.add(abs_xy)
            macs += l2prod

    return StructuralCounts(
        s1_words=s1_words,
        s1_ro_z=s1_ro_z,
        s3_arr_words=s3_arr,
        s3_ro_z_arr=s3_ro_z,
        s4_groups=s4_groups,
        s4_ro_z_groups=s4_ro_groups,
        macs=macs,
        spatial=f,
    )


def assemble_tally(
    counts: StructuralCounts,
    bypass_sram: tuple[bool, bool, bool],
    bypass_rf: tuple[bool, bool, bool],
    hw: HardwareSpec,
    include_leak: bool = False,
) -> AccessTally:
    """Route the structural counts through a bypass configuration and price
    the resulting per-level accesses."""
    f = counts.spatial
    v = counts.macs
    dr = dw = sr = sw = rr = rw = spa = 0

    link01 = {}
    src3 = {}
    for i, d in enumerate(("x", "y")):
        b1, b3 = bypass_sram[i], bypass_rf[i]
        link01[d] = counts.s1_words[d] if b1 else 0
        src3[d] = counts.s3_arr_words[d] * f[d] if b3 else 0
        if b1:
            dr += counts.s1_words[d]
            sw += counts.s1_words[d]
        if b3:
            rw += counts.s3_arr_words[d] * f[d]
            if b1:
                sr += counts.s3_arr_words[d]
            else:
                dr += counts.s3_arr_words[d]
            rr += v
        else:
            if b1:
                sr += counts.s4_groups[d]
            else:
                dr += counts.s4_groups[d]

    b1z, b3z = bypass_sram[2], bypass_rf[2]
    link01["z"] = counts.s1_words["z"] if b1z else 0
    src3["z"] = counts.s3_arr_words["z"] * f["z"] if b3z else 0
    if b1z:
        dw += counts.s1_words["z"]
        dr += counts.s1_ro_z
        sw += counts.s1_ro_z
    if b3z:
        wb_arr, ro_arr = counts.s3_arr_words["z"], counts.s3_ro_z_arr
        rw += ro_arr * f["z"]
        spa += wb_arr * f["z"]
        if b1z:
            sw += wb_arr
            sr += ro_arr
        else:
            dw += wb_arr
            dr += ro_arr
        rw += v
        rr += counts.s4_ro_z_groups * f["z"]
    else:
        if b1z:
            sw += counts.s4_groups["z"]
            sr += counts.s4_ro_z_groups
        else:
            dw += counts.s4_groups["z"]
            dr += counts.s4_ro_z_groups

    energy = (
        dr * hw.e_dram_read
        + dw * hw.e_dram_write
        + sr * hw.e_sram_read
        + sw * hw.e_sram_write
        + rr * hw.e_rf_read
        + rw * hw.e_rf_write
        + spa * hw.e_spatial_reduce
        + v * hw.e_macc
    )
    if include_leak:
        energy += v * leak_norm(hw)

    return AccessTally(
        link01=link01,
        src3=src3,
        src4={d: v for d in AXES},
        dram_read=dr,
        dram_write=dw,
        sram_read=sr,
        sram_write=sw,
        rf_read=rr,
        rf_write=rw,
        spatial_reduce_words=spa,
        macs=v,
        energy_pj=energy,
    )


def simulate_traversal(
    mapping: Mapping,
    gemm: GemmInstance,
    hw: HardwareSpec,
    include_leak: bool = False,
    orth_order: str = "canonical",
    pe_relax: bool = False,
) -> AccessTally:
    """Walk the full hierarchical traversal of a valid mapping and tally
    per-link transfers and energy."""
    report = validate(mapping, gemm, hw, pe_relax=pe_relax)
    if not report.feasible:
        raise InvalidMappingError(report)
    counts = walk_structural(mapping, gemm, orth_order=orth_order)
    return assemble_tally(counts, mapping.bypass_sram, mapping.bypass_rf, hw, include_leak)


def _bypass_choices(free: bool):
    if free:
        return list(itertools.product((False, True), repeat=3))
    return [(True, True, True)]


def mapping_space_size(gemm: GemmInstance, hw: HardwareSpec) -> int:
    """Upper bound on the enumeration: chain combinations x walking-axis
    pairs x bypass combinations, before feasibility filtering."""
    n_chains = 1
    for extent in gemm.dims:
        n_chains *= len(divisor_chains(extent))
    n_bypass = len(_bypass_choices(hw.bypass_freedom[0])) * len(
        _bypass_choices(hw.bypass_freedom[1])
    )
    return n_chains * 9 * n_bypass


def exhaustive_optimum(
    gemm: GemmInstance,
    hw: HardwareSpec,
    limit: int = 10**6,
    include_leak: bool = False,
    pe_relax: bool = False,
) -> tuple[Mapping, float]:
    """Brute-force minimum over every feasible mapping, with deterministic
    lexicographic tie-breaking over (energy, walking axes, bypass, tiles)."""
    size = mapping_space_size(gemm, hw)
    if size > limit:
        raise SpaceSizeError(f"mapping space has {size} candidates, exceeds limit {limit}")

    chains = [divisor_chains(extent) for extent in gemm.dims]
    b1_choices = _bypass_choices(hw.bypass_freedom[0])
    b3_choices = _bypass_choices(hw.bypass_freedom[1])
    num_pe = hw.num_pe

    best: tuple | None = None
    for cx in chains[0]:
        for cy in chains[1]:
            for cz in chains[2]:
                fx = cx[1] // cx[2]
                fy = cy[1] // cy[2]
                fz = cz[1] // cz[2]
                product = fx * fy * fz
                if pe_relax:
                    if product > num_pe:
                        continue
                else:
                    if product != num_pe:
                        continue
                tiles = (
                    (cx[0], cy[0], cz[0]),
                    (cx[1], cy[1], cz[1]),
                    (cx[2], cy[2], cz[2]),
                )
                l1t, l3t = tiles[0], tiles[2]
                for b1 in b1_choices:
                    if sram_capacity_usage(l1t, b1) > hw.cap_sram:
                        continue
                    for b3 in b3_choices:
                        if rf_capacity_usage(l3t, b3) > hw.cap_rf:
                            continue
                        for w01 in AXES:
                            for w12 in AXES:
                                mapping = Mapping(
                                    tiles=tiles,
                                    walk_01=w01,
                                    walk_12=w12,
                                    bypass_sram=b1,
                                    bypass_rf=b3,
                                )
                                bd = _energy_unchecked(mapping, gemm, hw, include_leak)
                                key = (bd.e_total_norm, mapping.sort_key())
                                if best is None or key < best[0]:
                                    best = (key, mapping, bd.e_total_norm)
    if best is None:
        raise InfeasibleError(
            f"no feasible mapping for gemm {gemm.dims} on {hw.name or 'hardware'}",
            binding=("pe-count", "cap-sram", "cap-rf"),
        )
    return best[1], best[2]
