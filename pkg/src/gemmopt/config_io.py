"""Versioned JSON configuration ingestion, result records and padding.

All file formats carry a ``schema`` field and are validated strictly:
unknown keys are rejected so misspelled fields cannot silently fall back to
defaults.  Units are fixed by the schema (pJ, words, seconds).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .energy import EnergyBreakdown
from .model import (
    AXES,
    GemmInstance,
    HardwareSpec,
    Mapping,
    ModelError,
    divisors,
)
from .solver import Certificate
from .workload import LlmModelDesc

HARDWARE_SCHEMA = "gemmopt-hardware-v1"
MODEL_SCHEMA = "gemmopt-model-v1"
WORKLOAD_SCHEMA = "gemmopt-workload-v1"
MAPPING_SCHEMA = "gemmopt-mapping-v1"
RUN_SCHEMA = "gemmopt-run-v1"


class ConfigError(ValueError):
    """Parse/schema/unit violation, with file and field context."""


def _load_json(path: str | Path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{p}: file not found")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a JSON object")
    return data


def _check_keys(data: dict, required: set[str], optional: set[str], where: str):
    missing = required - data.keys()
    if missing:
        raise ConfigError(f"{where}: missing required keys {sorted(missing)}")
    unknown = data.keys() - required - optional
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)} (strict schema)")


def _pos_int(data: dict, key: str, where: str) -> int:
    v = data[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ConfigError(f"{where}.{key}: expected a positive integer, got {v!r}")
    return v


def _nonneg_num(data: dict, key: str, where: str) -> float:
    v = data[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0 or not math.isfinite(v):
        raise ConfigError(f"{where}.{key}: expected a number >= 0, got {v!r}")
    return float(v)


def config_digest(path: str | Path) -> str:
    data = _load_json(path)
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def load_hardware(path: str | Path) -> HardwareSpec:
    data = _load_json(path)
    where = str(path)
    _check_keys(
        data,
        required={
            "schema", "name", "num_pe", "cap_sram_words", "cap_rf_words",
            "energy_pj", "cycle_period_s",
        },
        optional={"notes", "leakage_pj_per_cycle", "bypass_freedom"},
        where=where,
    )
    if data["schema"] != HARDWARE_SCHEMA:
        raise ConfigError(f"{where}.schema: expected {HARDWARE_SCHEMA!r}, got {data['schema']!r}")

    e = data["energy_pj"]
    if not isinstance(e, dict):
        raise ConfigError(f"{where}.energy_pj: expected an object")
    _check_keys(
        e,
        required={"dram_read", "dram_write", "sram_read", "sram_write", "rf_read", "rf_write", "macc"},
        optional={"spatial_reduce"},
        where=f"{where}.energy_pj",
    )
    leak = data.get("leakage_pj_per_cycle", {})
    if not isinstance(leak, dict):
        raise ConfigError(f"{where}.leakage_pj_per_cycle: expected an object")
    _check_keys(leak, required=set(), optional={"sram", "rf"}, where=f"{where}.leakage_pj_per_cycle")
    freedom = data.get("bypass_freedom", {"sram": True, "rf": True})
    if not isinstance(freedom, dict):
        raise ConfigError(f"{where}.bypass_freedom: expected an object")
    _check_keys(freedom, required=set(), optional={"sram", "rf"}, where=f"{where}.bypass_freedom")

    cycle = data["cycle_period_s"]
    if not isinstance(cycle, (int, float)) or cycle <= 0:
        raise ConfigError(f"{where}.cycle_period_s: expected a number > 0, got {cycle!r}")

    try:
        return HardwareSpec(
            name=str(data["name"]),
            num_pe=_pos_int(data, "num_pe", where),
            cap_sram=_pos_int(data, "cap_sram_words", where),
            cap_rf=_pos_int(data, "cap_rf_words", where),
            e_dram_read=_nonneg_num(e, "dram_read", f"{where}.energy_pj"),
            e_dram_write=_nonneg_num(e, "dram_write", f"{where}.energy_pj"),
            e_sram_read=_nonneg_num(e, "sram_read", f"{where}.energy_pj"),
            e_sram_write=_nonneg_num(e, "sram_write", f"{where}.energy_pj"),
            e_rf_read=_nonneg_num(e, "rf_read", f"{where}.energy_pj"),
            e_rf_write=_nonneg_num(e, "rf_write", f"{where}.energy_pj"),
            e_macc=_nonneg_num(e, "macc", f"{where}.energy_pj"),
            e_spatial_reduce=_nonneg_num(e, "spatial_reduce", f"{where}.energy_pj")
            if "spatial_reduce" in e else 0.0,
            leak_sram=_nonneg_num(leak, "sram", f"{where}.leakage_pj_per_cycle")
            if "sram" in leak else 0.0,
            leak_rf=_nonneg_num(leak, "rf", f"{where}.leakage_pj_per_cycle")
            if "rf" in leak else 0.0,
            cycle_period=float(cycle),
            bypass_freedom=(bool(freedom.get("sram", True)), bool(freedom.get("rf", True))),
        )
    except ModelError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_workload(path: str | Path, seq_len: int | None = None):
    """Load either an explicit GEMM list or an LLM model descriptor.

    Returns ``list[GemmInstance]`` or :class:`LlmModelDesc`.
    """
    data = _load_json(path)
    where = str(path)
    schema = data.get("schema")
    if schema == WORKLOAD_SCHEMA:
        _check_keys(data, required={"schema", "gemms"}, optional={"name", "notes"}, where=where)
        gemms = []
        if not isinstance(data["gemms"], list) or not data["gemms"]:
            raise ConfigError(f"{where}.gemms: expected a non-empty list")
        for i, g in enumerate(data["gemms"]):
            gw = f"{where}.gemms[{i}]"
            if not isinstance(g, dict):
                raise ConfigError(f"{gw}: expected an object")
            _check_keys(
                g,
                required={"dim_x", "dim_y", "dim_z"},
                optional={"label", "weight"},
                where=gw,
            )
            try:
                gemms.append(
                    GemmInstance(
                        dim_x=_pos_int(g, "dim_x", gw),
                        dim_y=_pos_int(g, "dim_y", gw),
                        dim_z=_pos_int(g, "dim_z", gw),
                        weight=_pos_int(g, "weight", gw) if "weight" in g else 1,
                        label=str(g.get("label", f"gemm_{i}")),
                    )
                )
            except ModelError as exc:
                raise ConfigError(f"{gw}: {exc}") from exc
        return gemms
    if schema == MODEL_SCHEMA:
        _check_keys(
            data,
            required={"schema", "name", "num_layers", "hidden_size", "num_heads",
                      "intermediate_size", "vocab_size"},
            optional={"notes", "num_kv_heads", "head_dim", "seq_len"},
            where=where,
        )
        eff_seq = seq_len if seq_len is not None else data.get("seq_len")
        if eff_seq is None:
            raise ConfigError(f"{where}: seq_len missing; give it in the file or via --seq-len")
        try:
            return LlmModelDesc(
                name=str(data["name"]),
                num_layers=_pos_int(data, "num_layers", where),
                hidden_size=_pos_int(data, "hidden_size", where),
                num_heads=_pos_int(data, "num_heads", where),
                num_kv_heads=_pos_int(data, "num_kv_heads", where) if "num_kv_heads" in data else None,
                head_dim=_pos_int(data, "head_dim", where) if "head_dim" in data else None,
                intermediate_size=_pos_int(data, "intermediate_size", where),
                vocab_size=_pos_int(data, "vocab_size", where),
                seq_len=int(eff_seq),
            )
        except ModelError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(
        f"{where}.schema: expected {WORKLOAD_SCHEMA!r} or {MODEL_SCHEMA!r}, got {schema!r}"
    )


def mapping_to_dict(mapping: Mapping) -> dict:
    return {
        "tiles": {
            "sram": list(mapping.tiles[0]),
            "pe_array": list(mapping.tiles[1]),
            "regfile": list(mapping.tiles[2]),
        },
        "walk_01": mapping.walk_01,
        "walk_12": mapping.walk_12,
        "bypass_sram": list(mapping.bypass_sram),
        "bypass_rf": list(mapping.bypass_rf),
    }


def mapping_from_dict(data: dict, where: str = "mapping") -> Mapping:
    _check_keys(
        data,
        required={"tiles", "walk_01", "walk_12", "bypass_sram", "bypass_rf"},
        optional={"schema"},
        where=where,
    )
    tiles = data["tiles"]
    if not isinstance(tiles, dict):
        raise ConfigError(f"{where}.tiles: expected an object")
    _check_keys(tiles, required={"sram", "pe_array", "regfile"}, optional=set(), where=f"{where}.tiles")
    levels = []
    for key in ("sram", "pe_array", "regfile"):
        level = tiles[key]
        if not isinstance(level, list) or len(level) != 3:
            raise ConfigError(f"{where}.tiles.{key}: expected [x, y, z] tile lengths")
        levels.append(tuple(int(v) for v in level))
    for key in ("bypass_sram", "bypass_rf"):
        v = data[key]
        if not isinstance(v, list) or len(v) != 3 or not all(isinstance(b, bool) for b in v):
            raise ConfigError(f"{where}.{key}: expected three booleans")
    try:
        return Mapping(
            tiles=tuple(levels),  # type: ignore[arg-type]
            walk_01=str(data["walk_01"]),
            walk_12=str(data["walk_12"]),
            bypass_sram=tuple(data["bypass_sram"]),
            bypass_rf=tuple(data["bypass_rf"]),
        )
    except ModelError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_mapping(path: str | Path) -> Mapping:
    data = _load_json(path)
    if data.get("schema") != MAPPING_SCHEMA:
        raise ConfigError(f"{path}.schema: expected {MAPPING_SCHEMA!r}, got {data.get('schema')!r}")
    return mapping_from_dict(data, where=str(path))


def pad_workload(gemm: GemmInstance, slack: float) -> GemmInstance:
    """Pad each extent to the divisor-richest candidate within the slack.

    Candidates for extent n are searched in [n, ceil(slack * n)]; the one
    with the most divisors wins, ties to the smallest value.  Padded MACs are
    counted honestly in the enlarged volume.
    """
    if slack < 1:
        raise ConfigError(f"padding slack must be >= 1, got {slack}")
    padded = []
    for n in gemm.dims:
        hi = math.ceil(slack * n)
        best = (len(divisors(n)), -n, n)
        for m in range(n + 1, hi + 1):
            cand = (len(divisors(m)), -m, m)
            if cand > best:
                best = cand
        padded.append(best[2])
    if tuple(padded) == gemm.dims:
        return gemm
    return GemmInstance(
        dim_x=padded[0], dim_y=padded[1], dim_z=padded[2],
        weight=gemm.weight, label=gemm.label,
    )


@dataclass(frozen=True)
class RunRecord:
    """Self-contained record of one solved/evaluated GEMM: re-evaluating the
    stored mapping reproduces the stored energy."""

    label: str
    dims: tuple[int, int, int]
    weight: int
    mapping: Mapping
    breakdown: EnergyBreakdown
    delay_s: float
    edp_pj_s: float
    certificate: Certificate | None = None

    def as_dict(self) -> dict:
        out = {
            "label": self.label,
            "dims": list(self.dims),
            "weight": self.weight,
            "mapping": mapping_to_dict(self.mapping),
            "energy": self.breakdown.as_dict(),
            "delay_s": self.delay_s,
            "edp_pj_s": self.edp_pj_s,
        }
        if self.certificate is not None:
            out["certificate"] = self.certificate.as_dict()
        return out


def write_run(
    path: str | Path,
    records: list[RunRecord],
    hardware_id: str,
    workload_id: str,
    digests: dict[str, str],
    case_edp_pj_s: float,
) -> None:
    data = {
        "schema": RUN_SCHEMA,
        "tool_version": __version__,
        "hardware": hardware_id,
        "workload": workload_id,
        "config_digests": digests,
        "gemms": [r.as_dict() for r in records],
        "case_edp_pj_s": case_edp_pj_s,
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def load_run(path: str | Path) -> dict:
    data = _load_json(path)
    if data.get("schema") != RUN_SCHEMA:
        raise ConfigError(f"{path}.schema: expected {RUN_SCHEMA!r}, got {data.get('schema')!r}")
    return data
