"""Analytical energy modeling and exact mapping optimization for GEMM on
spatial accelerators.

The library evaluates any hierarchical tiling/walking/bypass mapping of a
GEMM onto a five-level accelerator (DRAM, SRAM, PE array, regfile, MACC) in
closed form, and finds the provably optimal mapping with an upper/lower-bound
certificate.
"""

__version__ = "0.1.0"

from .energy import (
    EnergyBreakdown,
    InvalidMappingError,
    boundary_coeffs,
    delay_seconds,
    edp,
    energy_total,
    traffic_src1,
    traffic_src3,
    traffic_src4,
    unit_weights,
)
from .model import (
    AXES,
    GemmInstance,
    HardwareSpec,
    InfeasibleError,
    Mapping,
    ModelError,
    ValidationReport,
    divisor_chains,
    divisors,
    validate,
)
from .oracle import (
    AccessTally,
    exhaustive_optimum,
    mapping_space_size,
    simulate_traversal,
)
from .solver import Certificate, SolveOptions, solve
from .workload import (
    CaseResult,
    GEMM_LABELS,
    GemmMetric,
    LlmModelDesc,
    case_edp,
    expand_llm_prefill,
)

__all__ = [
    "AXES",
    "AccessTally",
    "CaseResult",
    "Certificate",
    "EnergyBreakdown",
    "GEMM_LABELS",
    "GemmInstance",
    "GemmMetric",
    "HardwareSpec",
    "InfeasibleError",
    "InvalidMappingError",
    "LlmModelDesc",
    "Mapping",
    "ModelError",
    "SolveOptions",
    "ValidationReport",
    "boundary_coeffs",
    "case_edp",
    "delay_seconds",
    "divisor_chains",
    "divisors",
    "edp",
    "energy_total",
    "exhaustive_optimum",
    "expand_llm_prefill",
    "mapping_space_size",
    "simulate_traversal",
    "solve",
    "traffic_src1",
    "traffic_src3",
    "traffic_src4",
    "unit_weights",
    "validate",
    "__version__",
]
