import itertools

import pytest
from hypothesis import given, settings, strategies as st

from gemmopt.energy import energy_total
from gemmopt.model import AXES, GemmInstance, InfeasibleError, Mapping, validate
from gemmopt.oracle import exhaustive_optimum
from gemmopt.solver import (
    SolveOptions,
    lower_bound,
    solve,
    spatial_factorizations,
)
from gemmopt.verification import toy_hardware

HW = toy_hardware()


_EXHAUSTIVE_CACHE: dict = {}


def _cached_exhaustive(dims):
    if dims not in _EXHAUSTIVE_CACHE:
        _EXHAUSTIVE_CACHE[dims] = exhaustive_optimum(
            GemmInstance(*dims), HW, limit=10**7
        )
    return _EXHAUSTIVE_CACHE[dims]


def _config_candidates(g, b1, b3, f):
    """Feasible (tiles, usage-checked) completions for a fixed configuration."""
    from gemmopt.model import rf_capacity_usage, sram_capacity_usage
    from gemmopt.solver import _chains_for_factor

    per_axis = [_chains_for_factor(g.dims[i], f[i]) for i in range(3)]
    for cx in per_axis[0]:
        for cy in per_axis[1]:
            for cz in per_axis[2]:
                tiles = (
                    (cx[0], cy[0], cz[0]),
                    (cx[1], cy[1], cz[1]),
                    (cx[2], cy[2], cz[2]),
                )
                if sram_capacity_usage(tiles[0], b1) > HW.cap_sram:
                    continue
                if rf_capacity_usage(tiles[2], b3) > HW.cap_rf:
                    continue
                yield tiles, (cx, cy, cz)


def _config_optimum(g, w01, w12, b1, b3, f):
    best = float("inf")
    for tiles, _ in _config_candidates(g, b1, b3, f):
        m = Mapping(tiles=tiles, walk_01=w01, walk_12=w12,
                    bypass_sram=b1, bypass_rf=b3)
        best = min(best, energy_total(m, g, HW).e_total_norm)
    return best


def _best_x_chain(g, w01, w12, b1, b3, f):
    best = None
    for tiles, (cx, _, _) in _config_candidates(g, b1, b3, f):
        m = Mapping(tiles=tiles, walk_01=w01, walk_12=w12,
                    bypass_sram=b1, bypass_rf=b3)
        e = energy_total(m, g, HW).e_total_norm
        if best is None or e < best[0]:
            best = (e, cx)
    return best[1]


class TestSpatialFactorizations:
    def test_strict_product(self):
        g = GemmInstance(8, 8, 8)
        fs = spatial_factorizations(g, HW, pe_relax=False)
        assert fs and all(fx * fy * fz == 4 for fx, fy, fz in fs)
        assert len(set(fs)) == len(fs)
        assert (1, 2, 2) in fs and (4, 1, 1) in fs

    def test_factors_divide_extents(self):
        g = GemmInstance(2, 6, 1)
        fs = spatial_factorizations(g, HW, pe_relax=False)
        assert all(g.dims[i] % f[i] == 0 for f in fs for i in range(3))
        assert all(f[2] == 1 for f in fs)

    def test_relaxed_allows_smaller_products(self):
        g = GemmInstance(3, 3, 3)
        assert spatial_factorizations(g, HW, pe_relax=False) == []
        relaxed = spatial_factorizations(g, HW, pe_relax=True)
        assert relaxed and all(fx * fy * fz <= 4 for fx, fy, fz in relaxed)


class TestSolve:
    def test_single_mac(self):
        hw = toy_hardware(num_pe=1)
        g = GemmInstance(1, 1, 1)
        mapping, bd, cert = solve(g, hw)
        assert bd.e_total_norm == 2 * hw.e_dram_read + hw.e_dram_write + hw.e_macc
        assert mapping.bypass_sram == mapping.bypass_rf == (False, False, False)
        assert cert.gap == 0.0 and cert.upper_bound == cert.lower_bound

    def test_matches_exhaustive_with_ties(self):
        for dims in [(4, 4, 4), (8, 2, 4), (2, 2, 2), (6, 2, 6), (1, 8, 8)]:
            g = GemmInstance(*dims)
            try:
                ref_m, ref_e = exhaustive_optimum(g, HW)
            except InfeasibleError:
                continue
            m, bd, cert = solve(g, HW)
            assert bd.e_total_norm == ref_e
            assert m == ref_m  # same lexicographic tie-break

    def test_returned_mapping_is_feasible(self):
        g = GemmInstance(16, 8, 4)
        m, _, _ = solve(g, HW)
        assert validate(m, g, HW).feasible

    def test_certificate_replay_bit_exact(self):
        g = GemmInstance(24, 16, 36)
        m, bd, cert = solve(g, HW)
        replay = energy_total(m, g, HW)
        assert replay.e_total_norm == cert.upper_bound == bd.e_total_norm

    def test_pe_count_infeasible(self):
        hw = toy_hardware(num_pe=256)
        with pytest.raises(InfeasibleError) as exc:
            solve(GemmInstance(1, 1, 1), hw)
        assert exc.value.binding == ("pe-count",)

    def test_capacity_infeasible_when_bypass_frozen(self):
        hw = toy_hardware(num_pe=1)
        hw = type(hw)(**{**hw.__dict__, "cap_rf": 1, "bypass_freedom": (True, False)})
        # all-resident regfile needs >= 3 words even at unit tiles
        with pytest.raises(InfeasibleError) as exc:
            solve(GemmInstance(4, 4, 4), hw)
        assert "cap" in " ".join(exc.value.binding)

    def test_pe_relax_recovers_feasibility(self):
        hw = toy_hardware(num_pe=256)
        g = GemmInstance(4, 4, 4)
        m, bd, cert = solve(g, hw, SolveOptions(pe_relax=True))
        assert m.spatial_pes <= 256
        assert cert.gap == 0.0
        assert validate(m, g, hw, pe_relax=True).feasible

    def test_time_limit_never_claims_optimality_silently(self):
        g = GemmInstance(720, 720, 720)
        try:
            m, bd, cert = solve(g, toy_hardware(), SolveOptions(time_limit=0.05))
        except InfeasibleError as exc:
            # limit expired before any feasible leaf: reported, not silent
            assert exc.binding == ("time-limit",)
            return
        if cert.proof_kind == "branch-and-bound":
            assert cert.gap == 0.0
        else:
            assert cert.proof_kind == "branch-and-bound-incomplete"
            assert cert.gap > 0.0
            assert cert.lower_bound <= cert.upper_bound

    def test_deterministic(self):
        g = GemmInstance(12, 8, 6)
        r1 = solve(g, HW)
        r2 = solve(g, HW)
        assert r1[0] == r2[0]
        assert r1[1].e_total_norm == r2[1].e_total_norm
        assert r1[2].upper_bound == r2[2].upper_bound

    def test_leak_constant_does_not_change_argmin(self):
        hw = toy_hardware()
        leaky = type(hw)(**{**hw.__dict__, "leak_sram": 50.0, "leak_rf": 2.0})
        g = GemmInstance(16, 8, 8)
        m_plain, bd_plain, _ = solve(g, hw)
        m_leak, bd_leak, _ = solve(g, leaky, SolveOptions(include_leak=True))
        assert m_plain == m_leak
        assert bd_leak.e_total_norm > bd_plain.e_total_norm


class TestLowerBound:
    def test_fully_assigned_node_is_exact(self):
        g = GemmInstance(8, 8, 8)
        m, bd, _ = solve(g, HW)
        chains = {
            d: (m.tiles[0][i], m.tiles[1][i], m.tiles[2][i])
            for i, d in enumerate(AXES)
        }
        b = lower_bound(g, HW, m.walk_01, m.walk_12, m.bypass_sram, m.bypass_rf,
                        tuple(m.spatial(d) for d in AXES), chains)
        assert b == bd.e_total_norm

    @settings(max_examples=25, deadline=None)
    @given(
        dims=st.tuples(*[st.sampled_from([1, 2, 4, 6, 8]) for _ in range(3)]),
        data=st.data(),
    )
    def test_bound_admissible_for_its_configuration(self, dims, data):
        """A node's bound never exceeds the best feasible completion of that
        node's configuration (walking axes, bypass, factorization fixed)."""
        g = GemmInstance(*dims)
        fs = spatial_factorizations(g, HW, pe_relax=False)
        if not fs:
            return
        w01 = data.draw(st.sampled_from(AXES))
        w12 = data.draw(st.sampled_from(AXES))
        b1 = tuple(data.draw(st.booleans()) for _ in range(3))
        b3 = tuple(data.draw(st.booleans()) for _ in range(3))
        f = data.draw(st.sampled_from(fs))
        best = _config_optimum(g, w01, w12, b1, b3, f)
        root = lower_bound(g, HW, w01, w12, b1, b3, f, {})
        assert root <= best
        # partial node: fix the x chain of the best completion when one exists
        if best != float("inf"):
            partial = lower_bound(
                g, HW, w01, w12, b1, b3, f, {"x": _best_x_chain(g, w01, w12, b1, b3, f)}
            )
            assert partial <= best

    def test_min_root_bound_below_global_optimum(self):
        g = GemmInstance(2, 2, 2)
        _, opt = _cached_exhaustive(g.dims)
        fs = spatial_factorizations(g, HW, pe_relax=False)
        combos = list(itertools.product((False, True), repeat=3))
        roots = [
            lower_bound(g, HW, w01, w12, b1, b3, f, {})
            for w01 in AXES for w12 in AXES for f in fs
            for b1 in combos for b3 in combos
        ]
        assert min(roots) <= opt
