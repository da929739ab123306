import pytest

from gemmopt.model import GemmInstance, ModelError
from gemmopt.workload import (
    CaseResult,
    GEMM_LABELS,
    GemmMetric,
    LlmModelDesc,
    case_edp,
    expand_llm_prefill,
)

TOY = LlmModelDesc(
    num_layers=2,
    hidden_size=32,
    num_heads=4,
    intermediate_size=64,
    vocab_size=100,
    seq_len=16,
)


def brute_force_weighted_macs(model: LlmModelDesc) -> int:
    """Independent oracle: walk the prefill graph operator by operator,
    layer by layer and head by head, accumulating MAC counts directly."""
    s = model.seq_len
    h = model.hidden_size
    hd = model.resolved_head_dim
    nh = model.num_heads
    kvh = model.resolved_kv_heads
    inter = model.intermediate_size
    total = 0
    for _layer in range(model.num_layers):
        total += s * (nh * hd) * h            # Q projection
        total += s * (kvh * hd) * h * 2       # K and V projections
        for _head in range(nh):
            total += s * s * hd               # scores Q.K^T
            total += s * hd * s               # context scores.V
        total += s * h * (nh * hd)            # output projection
        total += s * inter * h * 2            # gate and up projections
        total += s * h * inter                # down projection
    total += s * model.vocab_size * h         # LM head, once
    return total


class TestExpand:
    def test_eight_labeled_instances(self):
        gemms = expand_llm_prefill(TOY)
        assert tuple(g.label for g in gemms) == GEMM_LABELS
        assert len(gemms) == 8

    def test_shapes(self):
        by = {g.label: g for g in expand_llm_prefill(TOY)}
        assert by["attn_q_proj"].dims == (16, 4 * 8, 32)
        assert by["attn_kv_proj"].dims == (16, 2 * 4 * 8, 32)
        assert by["attn_score"].dims == (16, 16, 8)
        assert by["attn_context"].dims == (16, 8, 16)
        assert by["attn_output"].dims == (16, 32, 4 * 8)
        assert by["mlp_gate_up"].dims == (16, 128, 32)
        assert by["mlp_down"].dims == (16, 32, 64)
        assert by["lm_head"].dims == (16, 100, 32)

    def test_weights(self):
        by = {g.label: g for g in expand_llm_prefill(TOY)}
        assert by["attn_q_proj"].weight == 2
        assert by["attn_score"].weight == 2 * 4
        assert by["attn_context"].weight == 2 * 4
        assert by["lm_head"].weight == 1

    def test_single_layer_single_head_degenerate(self):
        model = LlmModelDesc(num_layers=1, hidden_size=8, num_heads=1,
                             intermediate_size=8, vocab_size=10, seq_len=4)
        assert all(g.weight == 1 for g in expand_llm_prefill(model))

    def test_weighted_macs_match_graph_walk(self):
        expanded = sum(g.weight * g.total_macs for g in expand_llm_prefill(TOY))
        assert expanded == brute_force_weighted_macs(TOY)

    def test_weighted_macs_match_graph_walk_gqa_explicit_head_dim(self):
        model = LlmModelDesc(num_layers=3, hidden_size=48, num_heads=6,
                             num_kv_heads=2, head_dim=16, intermediate_size=96,
                             vocab_size=77, seq_len=9)
        expanded = sum(g.weight * g.total_macs for g in expand_llm_prefill(model))
        assert expanded == brute_force_weighted_macs(model)


class TestModelDesc:
    def test_head_dim_default_requires_divisibility(self):
        with pytest.raises(ModelError):
            LlmModelDesc(num_layers=1, hidden_size=10, num_heads=3,
                         intermediate_size=8, vocab_size=10, seq_len=4)

    def test_explicit_head_dim_may_disagree_with_hidden(self):
        # grouped-query models publish head_dim != hidden/num_heads
        m = LlmModelDesc(num_layers=1, hidden_size=1024, num_heads=16,
                         head_dim=128, intermediate_size=8, vocab_size=10, seq_len=4)
        assert m.resolved_head_dim == 128

    def test_kv_heads_must_divide_heads(self):
        with pytest.raises(ModelError):
            LlmModelDesc(num_layers=1, hidden_size=8, num_heads=4, num_kv_heads=3,
                         intermediate_size=8, vocab_size=10, seq_len=4)


class TestCaseEdp:
    def test_single_term(self):
        res = case_edp([(GemmInstance(1, 1, 1, weight=1, label="a"), 2.0, 3.0)])
        assert res.case_edp_pj_s == 6.0
        assert res.per_gemm[0].edp_pj_s == 6.0

    def test_weighted_sum(self):
        res = case_edp([
            (GemmInstance(1, 1, 1, weight=3, label="a"), 5.0, 2.0),  # EDP 10
            (GemmInstance(1, 1, 1, weight=1, label="b"), 1.0, 2.0),  # EDP 2
        ])
        assert res.case_edp_pj_s == 32.0

    def test_exact_weighted_sum_invariant(self):
        results = [
            (GemmInstance(2, 3, 4, weight=w, label=f"g{w}"), 1.25 * w, 0.5 / w)
            for w in (1, 2, 7, 16)
        ]
        res = case_edp(results)
        assert res.case_edp_pj_s == sum(m.weight * m.edp_pj_s for m in res.per_gemm)

    def test_self_normalization_is_one(self):
        results = [
            (GemmInstance(1, 1, 1, weight=2, label="a"), 4.0, 0.5),
            (GemmInstance(1, 1, 1, weight=1, label="b"), 3.0, 2.0),
        ]
        ref = case_edp(results)
        res = case_edp(results, reference=ref)
        assert all(m.edp_norm == 1.0 for m in res.per_gemm)
        assert res.case_edp_norm == 1.0

    def test_empty_input_is_an_error(self):
        with pytest.raises(ModelError):
            case_edp([])

    def test_reference_types(self):
        ref = CaseResult(
            per_gemm=(GemmMetric(label="a", weight=1, energy_pj=1.0,
                                 delay_s=1.0, edp_pj_s=2.0),),
            case_edp_pj_s=2.0,
        )
        res = case_edp([(GemmInstance(1, 1, 1, label="a"), 1.0, 1.0)], reference=ref)
        assert res.per_gemm[0].edp_norm == 0.5
