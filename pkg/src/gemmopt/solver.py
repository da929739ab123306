"""Exact global minimization of the closed-form energy objective.

The search space decomposes as: 9 walking-axis pairs x free bypass
combinations x factorizations of the PE count into per-axis spatial ratios.
For a fixed configuration the objective is separable per axis, so each axis
contributes an independent list of (divisor chain, energy term) candidates;
only the SRAM/regfile capacity sums couple the axes.  Depth-first search over
term-sorted candidate lists with an admissible sum-of-minima bound yields the
global optimum with a zero-gap certificate.

Tie-breaking is lexicographic over (energy, walk_01, walk_12, bypass bits,
tiles), so results are reproducible across machines.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .energy import EnergyBreakdown, _axis_term, _energy_unchecked, leak_norm
from .model import (
    AXES,
    GemmInstance,
    HardwareSpec,
    InfeasibleError,
    Mapping,
    divisors,
)

# Axis terms and the evaluator share arithmetic, but bound accumulation may
# differ from the leaf sum by a few ulps; prune only beyond this margin.
_PRUNE_GUARD = 1.0 - 1e-12


@dataclass(frozen=True)
class SolveOptions:
    time_limit: float = 0.0  # seconds; 0 = no limit
    pe_relax: bool = False  # allow spatial product <= num_pe
    include_leak: bool = False
    pad_slack: float = 0.0  # informational; padding is applied by the caller
    tie_break: str = "lexicographic"


@dataclass(frozen=True)
class Certificate:
    upper_bound: float
    lower_bound: float
    gap: float
    nodes_explored: int
    nodes_pruned: int
    configs_enumerated: int
    wall_time: float
    proof_kind: str

    def as_dict(self) -> dict:
        return {
            "upper_bound_per_mac_pj": self.upper_bound,
            "lower_bound_per_mac_pj": self.lower_bound,
            "gap": self.gap,
            "nodes_explored": self.nodes_explored,
            "nodes_pruned": self.nodes_pruned,
            "configs_enumerated": self.configs_enumerated,
            "wall_time_s": self.wall_time,
            "proof_kind": self.proof_kind,
        }


class _TimeLimitExpired(Exception):
    pass


def spatial_factorizations(gemm: GemmInstance, hw: HardwareSpec, pe_relax: bool):
    """Ordered triples (fx, fy, fz) of per-axis PE-array unrollings.

    Strict mode requires fx*fy*fz == num_pe; relaxed mode allows <=.  Each
    factor must divide its axis extent so a divisor chain exists."""
    out = []
    dx, dy, dz = gemm.dims
    fx_c = [f for f in divisors(dx) if pe_relax or hw.num_pe % f == 0]
    fy_c = [f for f in divisors(dy) if pe_relax or hw.num_pe % f == 0]
    fz_c = [f for f in divisors(dz) if pe_relax or hw.num_pe % f == 0]
    for fx in fx_c:
        if fx > hw.num_pe:
            continue
        for fy in fy_c:
            if fx * fy > hw.num_pe:
                continue
            rest = hw.num_pe // (fx * fy)
            if pe_relax:
                for fz in fz_c:
                    if fx * fy * fz <= hw.num_pe:
                        out.append((fx, fy, fz))
            else:
                if hw.num_pe % (fx * fy) != 0:
                    continue
                if rest in fz_c:
                    out.append((fx, fy, rest))
    return out


def _chains_for_factor(extent: int, f: int) -> list[tuple[int, int, int]]:
    """Divisor chains (l1, l2, l3) of ``extent`` with l2 == l3 * f."""
    out = []
    for l1 in divisors(extent):
        if l1 % f != 0:
            continue
        for l3 in divisors(l1 // f):
            out.append((l1, l3 * f, l3))
    return out


def _axis_list(cache: dict, gemm, hw, axis_i, f, is_w01, is_w12, b1, b3):
    """Memoized term-sorted candidate chains for one axis configuration."""
    key = (axis_i, f, is_w01, is_w12, b1, b3)
    hit = cache.get(key)
    if hit is not None:
        return hit
    d = AXES[axis_i]
    l0 = gemm.dims[axis_i]
    entries = []
    for l1, l2, l3 in _chains_for_factor(l0, f):
        term = sum(_axis_term(hw, d, l0, l1, l2, l3, is_w01, is_w12, b1, b3))
        entries.append((term, l1, l2, l3))
    entries.sort()
    cache[key] = entries
    return entries


def lower_bound(
    gemm: GemmInstance,
    hw: HardwareSpec,
    walk_01: str,
    walk_12: str,
    bypass_sram: tuple[bool, bool, bool],
    bypass_rf: tuple[bool, bool, bool],
    spatial: tuple[int, int, int],
    fixed_chains: dict[str, tuple[int, int, int]],
    include_leak: bool = False,
) -> float:
    """Admissible bound for a partial node: exact terms for fixed axes plus
    the unconstrained per-axis minimum for the rest, ignoring the capacity
    coupling.  A fully assigned node evaluates exactly."""
    if len(fixed_chains) == 3:
        tiles = tuple(
            tuple(fixed_chains[d][p] for d in AXES) for p in range(3)
        )
        mapping = Mapping(
            tiles=tiles,  # type: ignore[arg-type]
            walk_01=walk_01,
            walk_12=walk_12,
            bypass_sram=bypass_sram,
            bypass_rf=bypass_rf,
        )
        return _energy_unchecked(mapping, gemm, hw, include_leak).e_total_norm

    cache: dict = {}
    const = hw.e_macc + (leak_norm(hw) if include_leak else 0.0)
    total = 0.0
    for i, d in enumerate(AXES):
        lst = _axis_list(
            cache, gemm, hw, i, spatial[i], d == walk_01, d == walk_12,
            bypass_sram[i], bypass_rf[i],
        )
        if not lst:
            return float("inf")
        if d in fixed_chains:
            l1, l2, l3 = fixed_chains[d]
            term = sum(
                _axis_term(
                    hw, d, gemm.dims[i], l1, l2, l3,
                    d == walk_01, d == walk_12, bypass_sram[i], bypass_rf[i],
                )
            )
            total += term
        else:
            total += lst[0][0]
    return (total + const) * _PRUNE_GUARD


def _axis_entries(cache, gemm, hw, axis_i, f, is_w01, is_w12, b1_free, b3_free):
    """Memoized term-sorted candidates for one axis of one configuration.

    The per-axis bypass bits are folded into the candidate list (they couple
    to nothing outside the axis except capacity), so a configuration is just
    (walking axes, spatial factorization).  Entries are
    (term, l1, l2, l3, b1, b3)."""
    key = (axis_i, f, is_w01, is_w12)
    hit = cache.get(key)
    if hit is not None:
        return hit
    d = AXES[axis_i]
    l0 = gemm.dims[axis_i]
    b1_opts = (False, True) if b1_free else (True,)
    b3_opts = (False, True) if b3_free else (True,)
    groups: dict[tuple, list[tuple[int, int]]] = {}
    for l1, l2, l3 in _chains_for_factor(l0, f):
        for b1 in b1_opts:
            for b3 in b3_opts:
                term = sum(_axis_term(hw, d, l0, l1, l2, l3, is_w01, is_w12, b1, b3))
                groups.setdefault((term, b1, b3), []).append((l1, l3))
    # Within an equal-term group, an entry with component-wise larger
    # (l1, l3) can never be preferred: it uses at least as much of both
    # capacities and is lexicographically greater in the tie-break.  Keep
    # only the Pareto-minimal front.
    entries = []
    for (term, b1, b3), pairs in groups.items():
        pairs.sort()
        best_l3 = None
        for l1, l3 in pairs:
            if best_l3 is None or l3 < best_l3:
                entries.append((term, l1, l3 * f, l3, b1, b3))
                best_l3 = l3
    entries.sort()
    cache[key] = entries
    return entries


def solve(
    gemm: GemmInstance,
    hw: HardwareSpec,
    options: SolveOptions | None = None,
) -> tuple[Mapping, EnergyBreakdown, Certificate]:
    """Globally optimal mapping with a verifiable certificate.

    Returns the optimum with gap 0 when the search completes; if the time
    limit expires first, returns the incumbent with a nonzero gap and an
    incomplete proof kind.  Raises :class:`InfeasibleError` when no mapping
    satisfies the constraints.
    """
    opts = options or SolveOptions()
    t0 = time.perf_counter()
    deadline = t0 + opts.time_limit if opts.time_limit > 0 else None

    factorizations = spatial_factorizations(gemm, hw, opts.pe_relax)
    if not factorizations:
        raise InfeasibleError(
            f"pe-count: num_pe={hw.num_pe} admits no per-axis spatial factorization "
            f"of gemm extents {gemm.dims} under "
            f"{'relaxed' if opts.pe_relax else 'strict'} PE equality",
            binding=("pe-count",),
        )

    b1_free, b3_free = hw.bypass_freedom
    const = hw.e_macc + (leak_norm(hw) if opts.include_leak else 0.0)
    cap_s, cap_r = hw.cap_sram, hw.cap_rf

    cache: dict = {}
    best_key: tuple | None = None
    best_mapping: Mapping | None = None
    best_bd: EnergyBreakdown | None = None
    inc = float("inf")

    nodes = 0
    pruned = 0
    configs = 0
    unprocessed_bounds: list[float] = []
    timed_out = False

    def check_time():
        if deadline is not None and time.perf_counter() > deadline:
            raise _TimeLimitExpired

    # A configuration is a walking-axis pair plus a spatial factorization;
    # per-axis bypass bits live inside the candidate lists.  Processing
    # configurations in ascending root-bound order finds a near-optimal
    # incumbent early, after which most configurations die at the root.
    config_list = []
    for w01 in AXES:
        for w12 in AXES:
            for f in factorizations:
                lists = []
                root = const
                for i, d in enumerate(AXES):
                    lst = _axis_entries(
                        cache, gemm, hw, i, f[i], d == w01, d == w12, b1_free, b3_free
                    )
                    if not lst:
                        break
                    lists.append(lst)
                    root += lst[0][0]
                if len(lists) == 3:
                    config_list.append((root, w01, w12, f, lists))
    config_list.sort(key=lambda c: c[0])

    try:
        for root, w01, w12, f, lists in config_list:
            configs += 1
            check_time()
            xs, ys, zs = lists
            min_y, min_z = ys[0][0], zs[0][0]
            if root * _PRUNE_GUARD > inc:
                pruned += 1
                continue

            for tx, l1x, l2x, l3x, b1x, b3x in xs:
                if (tx + min_y + min_z + const) * _PRUNE_GUARD > inc:
                    pruned += 1
                    break
                # Minimum completions of the capacity sums (unknown tile
                # lengths 1, unknown bypass bits off).
                if b1x > cap_s or b3x > cap_r:
                    continue
                check_time()
                for ty, l1y, l2y, l3y, b1y, b3y in ys:
                    if (tx + ty + min_z + const) * _PRUNE_GUARD > inc:
                        pruned += 1
                        break
                    if b1y * l1x + b1x * l1y > cap_s:
                        continue
                    if b3y * l3x + b3x * l3y > cap_r:
                        continue
                    for tz, l1z, l2z, l3z, b1z, b3z in zs:
                        bound = tx + ty + tz + const
                        if bound * _PRUNE_GUARD > inc:
                            pruned += 1
                            break
                        if b1y * l1x * l1z + b1x * l1y * l1z + b1z * l1x * l1y > cap_s:
                            continue
                        if b3y * l3x * l3z + b3x * l3y * l3z + b3z * l3x * l3y > cap_r:
                            continue
                        nodes += 1
                        mapping = Mapping(
                            tiles=((l1x, l1y, l1z), (l2x, l2y, l2z), (l3x, l3y, l3z)),
                            walk_01=w01,
                            walk_12=w12,
                            bypass_sram=(b1x, b1y, b1z),
                            bypass_rf=(b3x, b3y, b3z),
                        )
                        bd = _energy_unchecked(mapping, gemm, hw, opts.include_leak)
                        key = (bd.e_total_norm, mapping.sort_key())
                        if best_key is None or key < best_key:
                            best_key = key
                            best_mapping = mapping
                            best_bd = bd
                            inc = bd.e_total_norm
    except _TimeLimitExpired:
        timed_out = True
        # Root bounds of the partially processed configuration and of those
        # the search never reached.
        for root, *_ in config_list[max(configs - 1, 0):]:
            unprocessed_bounds.append(root * _PRUNE_GUARD)

    wall = time.perf_counter() - t0

    if best_mapping is None or best_bd is None:
        if timed_out:
            raise InfeasibleError(
                "time limit expired before any feasible mapping was found",
                binding=("time-limit",),
            )
        raise InfeasibleError(
            f"no feasible mapping: SRAM capacity {cap_s} / regfile capacity {cap_r} "
            f"admit no resident set for gemm {gemm.dims}",
            binding=("cap-sram", "cap-rf"),
        )

    ub = best_bd.e_total_norm
    if timed_out:
        lb = min([ub * _PRUNE_GUARD] + unprocessed_bounds)
        gap = (ub - lb) / ub if ub > 0 else 0.0
        proof = "branch-and-bound-incomplete"
    else:
        lb = ub
        gap = 0.0
        proof = "branch-and-bound"

    cert = Certificate(
        upper_bound=ub,
        lower_bound=lb,
        gap=gap,
        nodes_explored=nodes,
        nodes_pruned=pruned,
        configs_enumerated=configs,
        wall_time=wall,
        proof_kind=proof,
    )
    return best_mapping, best_bd, cert
