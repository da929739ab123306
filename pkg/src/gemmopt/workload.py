"""LLM prefill workload expansion and case-level metric aggregation.

A prefill pass decomposes into eight GEMM types.  Shapes follow the standard
decoder-only block: the K and V projections are fused (factor 2), as are the
gate and up MLP projections; attention score/context are per-head GEMMs and
carry a num_layers * num_heads occurrence weight.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import GemmInstance, ModelError

GEMM_LABELS = (
    "attn_q_proj",
    "attn_kv_proj",
    "attn_score",
    "attn_context",
    "attn_output",
    "mlp_gate_up",
    "mlp_down",
    "lm_head",
)


@dataclass(frozen=True)
class LlmModelDesc:
    num_layers: int
    hidden_size: int
    num_heads: int
    intermediate_size: int
    vocab_size: int
    seq_len: int
    num_kv_heads: int | None = None
    head_dim: int | None = None
    name: str = ""

    def __post_init__(self):
        for fname in ("num_layers", "hidden_size", "num_heads", "intermediate_size", "vocab_size", "seq_len"):
            v = getattr(self, fname)
            if not isinstance(v, int) or v < 1:
                raise ModelError(f"{fname} must be a positive integer, got {v!r}")
        if self.head_dim is None and self.hidden_size % self.num_heads != 0:
            raise ModelError(
                f"hidden_size {self.hidden_size} not divisible by num_heads "
                f"{self.num_heads}; give head_dim explicitly"
            )
        kv = self.num_kv_heads
        if kv is not None and (kv < 1 or self.num_heads % kv != 0):
            raise ModelError(
                f"num_kv_heads {kv} must be positive and divide num_heads {self.num_heads}"
            )

    @property
    def resolved_head_dim(self) -> int:
        return self.head_dim if self.head_dim is not None else self.hidden_size // self.num_heads

    @property
    def resolved_kv_heads(self) -> int:
        return self.num_kv_heads if self.num_kv_heads is not None else self.num_heads


def expand_llm_prefill(model: LlmModelDesc) -> list[GemmInstance]:
    """The eight prefill GEMM types with occurrence weights, in fixed order.

    Dimensions are (X, Y, Z) with Z the reduction axis.
    """
    s = model.seq_len
    h = model.hidden_size
    hd = model.resolved_head_dim
    nh = model.num_heads
    kvh = model.resolved_kv_heads
    inter = model.intermediate_size
    nl = model.num_layers

    return [
        GemmInstance(s, nh * hd, h, weight=nl, label="attn_q_proj"),
        GemmInstance(s, 2 * kvh * hd, h, weight=nl, label="attn_kv_proj"),
        GemmInstance(s, s, hd, weight=nl * nh, label="attn_score"),
        GemmInstance(s, hd, s, weight=nl * nh, label="attn_context"),
        GemmInstance(s, h, nh * hd, weight=nl, label="attn_output"),
        GemmInstance(s, 2 * inter, h, weight=nl, label="mlp_gate_up"),
        GemmInstance(s, h, inter, weight=nl, label="mlp_down"),
        GemmInstance(s, model.vocab_size, h, weight=1, label="lm_head"),
    ]


@dataclass(frozen=True)
class GemmMetric:
    label: str
    weight: int
    energy_pj: float
    delay_s: float
    edp_pj_s: float
    edp_norm: float | None = None


@dataclass(frozen=True)
class CaseResult:
    per_gemm: tuple[GemmMetric, ...]
    case_edp_pj_s: float
    case_edp_norm: float | None = None


def case_edp(
    results: list[tuple[GemmInstance, float, float]],
    reference: "CaseResult | None" = None,
) -> CaseResult:
    """Occurrence-weighted case EDP from per-GEMM (instance, energy, delay).

    With a reference result set, also reports EDPs normalized so that the
    reference is 1.
    """
    if not results:
        raise ModelError("case_edp requires at least one solved GEMM")
    ref_by_label = {}
    if reference is not None:
        ref_by_label = {m.label: m.edp_pj_s for m in reference.per_gemm}

    metrics = []
    total = 0.0
    for gemm, energy, delay in results:
        edp = energy * delay
        total += gemm.weight * edp
        norm = None
        if gemm.label in ref_by_label and ref_by_label[gemm.label] > 0:
            norm = edp / ref_by_label[gemm.label]
        metrics.append(
            GemmMetric(
                label=gemm.label,
                weight=gemm.weight,
                energy_pj=energy,
                delay_s=delay,
                edp_pj_s=edp,
                edp_norm=norm,
            )
        )
    case_norm = None
    if reference is not None and reference.case_edp_pj_s > 0:
        case_norm = total / reference.case_edp_pj_s
    return CaseResult(per_gemm=tuple(metrics), case_edp_pj_s=total, case_edp_norm=case_norm)
