"""Closed-form energy model: per-link traffic counts, reduction-axis boundary
coefficients, per-level unit weights and receiver-centric aggregation.

Every quantity here is evaluable in a fixed number of arithmetic operations,
independent of the GEMM volume.  Traffic counts are exact wide integers;
normalized energies avoid materializing the volume by working with the
per-MAC ratios directly (count / V reduces to a reciprocal of tile lengths).
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    AXES,
    AXIS_INDEX,
    GemmInstance,
    HardwareSpec,
    Mapping,
    validate,
)


class InvalidMappingError(ValueError):
    """Evaluation refused: the mapping failed feasibility checks."""

    def __init__(self, report):
        self.report = report
        super().__init__(f"invalid mapping: {report}")


class CountError(AssertionError):
    """A traffic division was not exact; an invalid mapping slipped through."""


def _exact_div(num: int, den: int, what: str) -> int:
    if num % den != 0:
        raise CountError(f"{what}: {num} not divisible by {den}")
    return num // den


def traffic_src1(mapping: Mapping, gemm: GemmInstance) -> dict[str, int]:
    """Words moved over the DRAM<->SRAM link, per axis (write-backs for z).

    The projection whose normal is the stage walking axis is compressed to
    once per global column head; the other two reload per SRAM tile.
    """
    v = gemm.total_macs
    out = {}
    for i, d in enumerate(AXES):
        if not mapping.bypass_sram[i]:
            out[d] = 0
            continue
        den = gemm.dims[i] if d == mapping.walk_01 else mapping.tiles[0][i]
        out[d] = _exact_div(v, den, f"N01_{d}")
    return out


def traffic_src3(mapping: Mapping, gemm: GemmInstance) -> dict[str, int]:
    """Regfile-side words received over the spatial-multicast link, per axis.

    Column-head compression is inherited from the SRAM->array walking axis,
    since the 2->3 hop introduces no temporal walking axis of its own.
    """
    v = gemm.total_macs
    out = {}
    for i, d in enumerate(AXES):
        if not mapping.bypass_rf[i]:
            out[d] = 0
            continue
        den = mapping.tiles[2][i]
        if d == mapping.walk_12:
            den *= _exact_div(mapping.tiles[0][i], mapping.tiles[1][i], f"L1/L2 on {d}")
        out[d] = _exact_div(v, den, f"Nsrc3_{d}")
    return out


def traffic_src4(gemm: GemmInstance) -> dict[str, int]:
    """MACC-side trigger words: the full volume for every axis."""
    v = gemm.total_macs
    return {d: v for d in AXES}


@dataclass(frozen=True)
class BoundaryCoeffs:
    """Effective reduction-column counts per receiver and the resulting
    first-accumulation boundary ratios (read-old words per write-back word)."""

    l_tilde_src1: int
    l_tilde_src3: int
    l_tilde_src4: int
    rho_src1: float
    rho_src3: float
    rho_src4: float


def boundary_coeffs(mapping: Mapping, gemm: GemmInstance) -> BoundaryCoeffs:
    zi = AXIS_INDEX["z"]
    l0z = gemm.dims[zi]
    l1z, l2z = mapping.tiles[0][zi], mapping.tiles[1][zi]

    if mapping.walk_01 == "z":
        lt1 = 1
    else:
        lt1 = _exact_div(l0z, l1z, "Ltilde_src1")
    lt3 = _exact_div(l0z, l1z if mapping.walk_12 == "z" else l2z, "Ltilde_src3")
    lt4 = _exact_div(l0z, mapping.spatial("z"), "Ltilde_src4")

    return BoundaryCoeffs(
        l_tilde_src1=lt1,
        l_tilde_src3=lt3,
        l_tilde_src4=lt4,
        rho_src1=1.0 - 1.0 / lt1,
        rho_src3=1.0 - 1.0 / lt3,
        rho_src4=1.0 - 1.0 / lt4,
    )


@dataclass(frozen=True)
class LevelWeights:
    """Unit energy weights e^(p,dir)_d for one boundary-ratio binding.

    ``down[p][d]`` is the cost charged at level p when it feeds the link
    below; ``up[p][d]`` the cost charged when it receives from the link
    above.  PE-array weights (level 2) are zero in both directions; the MACC
    level has no storage-side weights.
    """

    down: tuple[dict, dict, dict, dict]
    up: tuple[dict, dict, dict, dict]


def _weights_for_rho(hw: HardwareSpec, rho: float) -> LevelWeights:
    down0 = {
        "x": hw.e_dram_read,
        "y": hw.e_dram_read,
        "z": hw.e_dram_write + rho * hw.e_dram_read,
    }
    up1 = {
        "x": hw.e_sram_write,
        "y": hw.e_sram_write,
        "z": rho * hw.e_sram_write,
    }
    down1 = {
        "x": hw.e_sram_read,
        "y": hw.e_sram_read,
        "z": hw.e_sram_write + rho * hw.e_sram_read,
    }
    zero = {"x": 0.0, "y": 0.0, "z": 0.0}
    up3 = {
        "x": hw.e_rf_write,
        "y": hw.e_rf_write,
        "z": rho * hw.e_rf_write + hw.e_spatial_reduce,
    }
    down3 = {
        "x": hw.e_rf_read,
        "y": hw.e_rf_read,
        "z": hw.e_rf_write + rho * hw.e_rf_read,
    }
    return LevelWeights(down=(down0, down1, zero, down3), up=(zero, up1, zero, up3))


@dataclass(frozen=True)
class UnitWeights:
    """The seven weight tables, instantiated once per receiver binding."""

    src1: LevelWeights
    src3: LevelWeights
    src4: LevelWeights


def unit_weights(hw: HardwareSpec, coeffs: BoundaryCoeffs) -> UnitWeights:
    return UnitWeights(
        src1=_weights_for_rho(hw, coeffs.rho_src1),
        src3=_weights_for_rho(hw, coeffs.rho_src3),
        src4=_weights_for_rho(hw, coeffs.rho_src4),
    )


@dataclass(frozen=True)
class EnergyBreakdown:
    """Normalized (pJ/MAC) energy components and per-axis sub-terms."""

    e_src1: float
    e_src3: float
    e_src4: float
    e_macc_term: float
    e_leak_term: float
    e_total_norm: float
    e_total_abs: float
    per_axis_src1: dict[str, float]
    per_axis_src3: dict[str, float]
    per_axis_src4: dict[str, float]

    def as_dict(self) -> dict:
        return {
            "e_src1_per_mac_pj": self.e_src1,
            "e_src3_per_mac_pj": self.e_src3,
            "e_src4_per_mac_pj": self.e_src4,
            "e_macc_per_mac_pj": self.e_macc_term,
            "e_leak_per_mac_pj": self.e_leak_term,
            "e_total_per_mac_pj": self.e_total_norm,
            "e_total_pj": self.e_total_abs,
            "per_axis_src1_pj": self.per_axis_src1,
            "per_axis_src3_pj": self.per_axis_src3,
            "per_axis_src4_pj": self.per_axis_src4,
        }


def _axis_term(
    hw: HardwareSpec,
    d: str,
    l0: int,
    l1: int,
    l2: int,
    l3: int,
    is_walk01: bool,
    is_walk12: bool,
    b1: bool,
    b3: bool,
) -> tuple[float, float, float]:
    """Normalized (src1, src3, src4) contributions of one axis.

    For the reduction axis the three boundary ratios are bound to their own
    receivers; the x/y operands carry no boundary correction.  This function
    is the single source of truth for the objective: both the full evaluator
    and the solver's bounds sum exactly these terms.
    """
    f23 = l2 // l3
    if d == "z":
        rho1 = 0.0 if is_walk01 else 1.0 - l1 / l0
        rho3 = 1.0 - (l1 if is_walk12 else l2) / l0
        rho4 = 1.0 - f23 / l0
        down0_1 = hw.e_dram_write + rho1 * hw.e_dram_read
        up1_1 = rho1 * hw.e_sram_write
        up3_3 = rho3 * hw.e_rf_write + hw.e_spatial_reduce
        down1_3 = hw.e_sram_write + rho3 * hw.e_sram_read
        down0_3 = hw.e_dram_write + rho3 * hw.e_dram_read
        down3_4 = hw.e_rf_write + rho4 * hw.e_rf_read
        down1_4 = hw.e_sram_write + rho4 * hw.e_sram_read
        down0_4 = hw.e_dram_write + rho4 * hw.e_dram_read
    else:
        down0_1 = hw.e_dram_read
        up1_1 = hw.e_sram_write
        up3_3 = hw.e_rf_write
        down1_3 = hw.e_sram_read
        down0_3 = hw.e_dram_read
        down3_4 = hw.e_rf_read
        down1_4 = hw.e_sram_read
        down0_4 = hw.e_dram_read

    t1 = (down0_1 + up1_1) / (l0 if is_walk01 else l1) if b1 else 0.0

    if b3:
        n3 = l3 * (l1 // l2) if is_walk12 else l3
        t3 = (up3_3 + (down1_3 if b1 else down0_3) / f23) / n3
    else:
        t3 = 0.0

    if b3:
        t4 = down3_4
    else:
        t4 = (down1_4 if b1 else down0_4) / f23

    return t1, t3, t4


def axis_terms(
    mapping: Mapping, gemm: GemmInstance, hw: HardwareSpec
) -> dict[str, tuple[float, float, float]]:
    out = {}
    for i, d in enumerate(AXES):
        out[d] = _axis_term(
            hw,
            d,
            gemm.dims[i],
            mapping.tiles[0][i],
            mapping.tiles[1][i],
            mapping.tiles[2][i],
            d == mapping.walk_01,
            d == mapping.walk_12,
            mapping.bypass_sram[i],
            mapping.bypass_rf[i],
        )
    return out


def leak_norm(hw: HardwareSpec) -> float:
    """Per-MAC leakage under the compute-bound delay (constant per hardware)."""
    return (hw.leak_sram + hw.leak_rf * hw.num_pe) / hw.num_pe


def energy_total(
    mapping: Mapping,
    gemm: GemmInstance,
    hw: HardwareSpec,
    include_leak: bool = False,
    pe_relax: bool = False,
) -> EnergyBreakdown:
    """Total normalized energy of a valid mapping, with full breakdown.

    Raises :class:`InvalidMappingError` for infeasible candidates.
    """
    report = validate(mapping, gemm, hw, pe_relax=pe_relax)
    if not report.feasible:
        raise InvalidMappingError(report)
    return _energy_unchecked(mapping, gemm, hw, include_leak)


def _energy_unchecked(
    mapping: Mapping, gemm: GemmInstance, hw: HardwareSpec, include_leak: bool
) -> EnergyBreakdown:
    terms = axis_terms(mapping, gemm, hw)
    tx, ty, tz = terms["x"], terms["y"], terms["z"]
    e_macc = hw.e_macc
    e_leak = leak_norm(hw) if include_leak else 0.0
    # Summation order matches the solver's bound accumulation (x, y, z, const)
    # so certificate replay is bit-exact.
    total = sum(tx) + sum(ty) + sum(tz) + e_macc + e_leak
    e_src1 = tx[0] + ty[0] + tz[0]
    e_src3 = tx[1] + ty[1] + tz[1]
    e_src4 = tx[2] + ty[2] + tz[2]
    return EnergyBreakdown(
        e_src1=e_src1,
        e_src3=e_src3,
        e_src4=e_src4,
        e_macc_term=e_macc,
        e_leak_term=e_leak,
        e_total_norm=total,
        e_total_abs=total * gemm.total_macs,
        per_axis_src1={d: terms[d][0] for d in AXES},
        per_axis_src3={d: terms[d][1] for d in AXES},
        per_axis_src4={d: terms[d][2] for d in AXES},
    )


def delay_seconds(gemm: GemmInstance, hw: HardwareSpec, active_pes: int | None = None) -> float:
    """Compute-bound delay: ceil(V / PEs) cycles times the cycle period."""
    pes = hw.num_pe if active_pes is None else active_pes
    cycles = -(-gemm.total_macs // pes)
    return cycles * hw.cycle_period


def edp(
    breakdown: EnergyBreakdown,
    gemm: GemmInstance,
    hw: HardwareSpec,
    active_pes: int | None = None,
) -> tuple[float, float]:
    """(delay in s, energy-delay product in pJ*s)."""
    t = delay_seconds(gemm, hw, active_pes)
    return t, breakdown.e_total_abs * t
