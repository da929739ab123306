"""Workload, hardware and mapping domain types plus feasibility checking.

Axis convention: ``d in ("x", "y", "z")`` indexes both the compute-grid axes
and the three data operands via plane normals (x -> B, y -> A, z -> partial
sums / output).  ``z`` is the reduction axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

AXES = ("x", "y", "z")
AXIS_INDEX = {"x": 0, "y": 1, "z": 2}

LEVEL_NAMES = ("DRAM", "SRAM", "PE-array", "regfile", "MACC")

MAX_EXTENT = 1 << 20


class ModelError(ValueError):
    """Raised for malformed workload/hardware/mapping descriptions."""


class InfeasibleError(RuntimeError):
    """No feasible mapping exists; carries the binding constraints."""

    def __init__(self, message: str, binding: tuple[str, ...] = ()):
        super().__init__(message)
        self.binding = binding


@dataclass(frozen=True)
class GemmInstance:
    """A single GEMM workload: compute grid extents plus an occurrence weight."""

    dim_x: int
    dim_y: int
    dim_z: int
    weight: int = 1
    label: str = ""

    def __post_init__(self):
        for name in ("dim_x", "dim_y", "dim_z"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ModelError(f"{name} must be a positive integer, got {v!r}")
            if v > MAX_EXTENT:
                raise ModelError(f"{name}={v} exceeds supported maximum {MAX_EXTENT}")
        if not isinstance(self.weight, int) or self.weight < 1:
            raise ModelError(f"weight must be a positive integer, got {self.weight!r}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.dim_x, self.dim_y, self.dim_z)

    @property
    def total_macs(self) -> int:
        # Exact wide-integer product; extents up to 2^20 each never overflow.
        return self.dim_x * self.dim_y * self.dim_z


@dataclass(frozen=True)
class HardwareSpec:
    """Five-level accelerator template with access-energy constants.

    Capacities are in words; energies in pJ/word (pJ/MAC for ``e_macc``);
    leakage in pJ/cycle; ``cycle_period`` in seconds.
    ``bypass_freedom`` states whether the SRAM-level and regfile-level
    per-axis bypass bits are free decisions or frozen to resident.
    """

    cap_sram: int
    cap_rf: int
    num_pe: int
    e_dram_read: float
    e_dram_write: float
    e_sram_read: float
    e_sram_write: float
    e_rf_read: float
    e_rf_write: float
    e_macc: float
    cycle_period: float
    e_spatial_reduce: float = 0.0
    leak_sram: float = 0.0
    leak_rf: float = 0.0
    bypass_freedom: tuple[bool, bool] = (True, True)
    name: str = ""
    level_names: tuple[str, str, str, str, str] = LEVEL_NAMES

    def __post_init__(self):
        if self.num_pe < 1:
            raise ModelError(f"num_pe must be >= 1, got {self.num_pe}")
        if self.cycle_period <= 0:
            raise ModelError(f"cycle_period must be > 0, got {self.cycle_period}")
        for name in (
            "cap_sram",
            "cap_rf",
            "e_dram_read",
            "e_dram_write",
            "e_sram_read",
            "e_sram_write",
            "e_rf_read",
            "e_rf_write",
            "e_macc",
            "e_spatial_reduce",
            "leak_sram",
            "leak_rf",
        ):
            if getattr(self, name) < 0:
                raise ModelError(f"{name} must be >= 0, got {getattr(self, name)}")
        if len(self.level_names) != 5:
            raise ModelError("level_names must name exactly five levels")

    def energy_scaled(self, c: float) -> "HardwareSpec":
        """Copy of this spec with every energy constant multiplied by ``c``."""
        return HardwareSpec(
            cap_sram=self.cap_sram,
            cap_rf=self.cap_rf,
            num_pe=self.num_pe,
            e_dram_read=self.e_dram_read * c,
            e_dram_write=self.e_dram_write * c,
            e_sram_read=self.e_sram_read * c,
            e_sram_write=self.e_sram_write * c,
            e_rf_read=self.e_rf_read * c,
            e_rf_write=self.e_rf_write * c,
            e_macc=self.e_macc * c,
            cycle_period=self.cycle_period,
            e_spatial_reduce=self.e_spatial_reduce * c,
            leak_sram=self.leak_sram * c,
            leak_rf=self.leak_rf * c,
            bypass_freedom=self.bypass_freedom,
            name=self.name,
            level_names=self.level_names,
        )


@dataclass(frozen=True)
class Mapping:
    """The decision vector: per-level tile lengths, stage walking axes and
    per-axis bypass bits.

    ``tiles[p-1][AXIS_INDEX[d]]`` is the tile length of level ``p`` (1=SRAM,
    2=PE-array, 3=regfile) along axis ``d``.  Level 0 is bound to the GEMM
    extents and level 4 is fixed at (1, 1, 1).  Bypass bits are True when the
    level is resident for the axis.
    """

    tiles: tuple[tuple[int, int, int], tuple[int, int, int], tuple[int, int, int]]
    walk_01: str
    walk_12: str
    bypass_sram: tuple[bool, bool, bool] = (True, True, True)
    bypass_rf: tuple[bool, bool, bool] = (True, True, True)

    def __post_init__(self):
        if self.walk_01 not in AXES or self.walk_12 not in AXES:
            raise ModelError(f"walking axes must be in {AXES}")
        if len(self.tiles) != 3 or any(len(level) != 3 for level in self.tiles):
            raise ModelError("tiles must be a 3x3 grid of tile lengths")
        for level in self.tiles:
            for v in level:
                if not isinstance(v, int) or v < 1:
                    raise ModelError(f"tile lengths must be positive integers, got {v!r}")

    def tile(self, p: int, d: str) -> int:
        return self.tiles[p - 1][AXIS_INDEX[d]]

    def spatial(self, d: str) -> int:
        """Level-2 -> level-3 tile ratio (PE unrolling) along ``d``; exact."""
        i = AXIS_INDEX[d]
        l2, l3 = self.tiles[1][i], self.tiles[2][i]
        if l2 % l3 != 0:
            raise ModelError(f"level-2 tile {l2} not divisible by level-3 tile {l3} on {d}")
        return l2 // l3

    @property
    def spatial_pes(self) -> int:
        return self.spatial("x") * self.spatial("y") * self.spatial("z")

    def sort_key(self) -> tuple:
        """Canonical lexicographic key used for deterministic tie-breaking."""
        return (
            AXIS_INDEX[self.walk_01],
            AXIS_INDEX[self.walk_12],
            self.bypass_sram,
            self.bypass_rf,
            self.tiles,
        )


@dataclass(frozen=True)
class Violation:
    constraint: str
    context: str
    measured: int
    bound: int

    def __str__(self) -> str:
        return f"{self.constraint} [{self.context}]: measured {self.measured}, bound {self.bound}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def feasible(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.feasible:
            return "feasible"
        return "; ".join(str(v) for v in self.violations)


def rf_capacity_usage(l3: tuple[int, int, int], bypass_rf: tuple[bool, bool, bool]) -> int:
    """Regfile words held by one PE, with bypassed operands excluded."""
    l3x, l3y, l3z = l3
    bx, by, bz = bypass_rf
    return by * l3x * l3z + bx * l3y * l3z + bz * l3x * l3y


def sram_capacity_usage(l1: tuple[int, int, int], bypass_sram: tuple[bool, bool, bool]) -> int:
    l1x, l1y, l1z = l1
    bx, by, bz = bypass_sram
    return by * l1x * l1z + bx * l1y * l1z + bz * l1x * l1y


def validate(
    mapping: Mapping,
    gemm: GemmInstance,
    hw: HardwareSpec,
    pe_relax: bool = False,
) -> ValidationReport:
    """Check a candidate mapping; collects every violation, never raises.

    Checks, in order: per-axis divisibility chains (including level 1 into the
    GEMM extents), PE-count equality (or an at-most bound when ``pe_relax``),
    regfile and SRAM capacity with bypassed operands excluded, and bypass bits
    frozen to resident where the hardware disallows bypass.
    """
    violations: list[Violation] = []

    chain_ok = True
    for i, d in enumerate(AXES):
        lengths = (gemm.dims[i], mapping.tiles[0][i], mapping.tiles[1][i], mapping.tiles[2][i])
        for p in range(3):
            outer, inner = lengths[p], lengths[p + 1]
            if outer % inner != 0:
                chain_ok = False
                violations.append(
                    Violation("divisibility", f"axis {d}, level {p}->{p + 1}", inner, outer)
                )

    if chain_ok:
        product = mapping.spatial_pes
        if pe_relax:
            if product > hw.num_pe:
                violations.append(Violation("pe-count", "spatial unrolling", product, hw.num_pe))
        elif product != hw.num_pe:
            violations.append(Violation("pe-count", "spatial unrolling", product, hw.num_pe))

    rf_used = rf_capacity_usage(mapping.tiles[2], mapping.bypass_rf)
    if rf_used > hw.cap_rf:
        violations.append(Violation("cap-rf", "regfile words/PE", rf_used, hw.cap_rf))

    sram_used = sram_capacity_usage(mapping.tiles[0], mapping.bypass_sram)
    if sram_used > hw.cap_sram:
        violations.append(Violation("cap-sram", "SRAM words", sram_used, hw.cap_sram))

    sram_free, rf_free = hw.bypass_freedom
    if not sram_free:
        for i, d in enumerate(AXES):
            if not mapping.bypass_sram[i]:
                violations.append(Violation("bypass-frozen", f"SRAM axis {d}", 0, 1))
    if not rf_free:
        for i, d in enumerate(AXES):
            if not mapping.bypass_rf[i]:
                violations.append(Violation("bypass-frozen", f"regfile axis {d}", 0, 1))

    return ValidationReport(tuple(violations))


def divisors(n: int) -> list[int]:
    """Ascending divisors of n."""
    small, large = [], []
    i = 1
    while i * i <= n:
        if n % i == 0:
            small.append(i)
            if i != n // i:
                large.append(n // i)
        i += 1
    return small + large[::-1]


def divisor_chains(n: int) -> list[tuple[int, int, int]]:
    """All chains (L1, L2, L3) with L3 | L2 | L1 | n, in ascending
    lexicographic order, each exactly once."""
    if n < 1:
        raise ModelError(f"n must be >= 1, got {n}")
    if n > MAX_EXTENT:
        raise ModelError(f"n={n} exceeds supported maximum {MAX_EXTENT}")
    out = []
    for l1 in divisors(n):
        for l2 in divisors(l1):
            for l3 in divisors(l2):
                out.append((l1, l2, l3))
    return out
