"""Strict YAML-based .cfg parsing, building, and serialization.

A config file declares one complete scenario: the pipeline topology, trigger
menus, beam conditions, hardware era, upgrade variants, and optionally sweep
axes or report tables.  Parsing is strict: every dimensioned quantity must
carry a unit suffix, unknown fields are rejected, and all problems are
collected and reported together with file:line locations instead of stopping
at the first one.

A file may name a single parent via `extends:`; the child's sections are
deep-merged over the parent's (scalars and lists replace, mappings merge).
Parents may not themselves extend.

serialize_config() emits canonical YAML that parses back into an equal
config, so programmatic edits can round-trip through files.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .calibration import EfficiencyCurve, MenuSpec, TriggerPath, build_menu
from .errors import ConfigError
from .functions import (
    ConstantFn,
    ConstantScaling,
    LinearFn,
    PowerLawFn,
    ProportionalScaling,
    TableFn,
    TableScaling,
)
from .graph import CommLink, OutputNode, PipelineGraph, ProcessNode, SensorNode
from .scenario import (
    VARIANT_NAMES,
    ExperimentConditions,
    GpuHlt,
    L1Tracks,
    SmartPixels,
    TechnologyEra,
    VariantConfig,
)
from .units import UnitError, format_quantity, parse_quantity, parse_ratio

__all__ = [
    "ModelConfig",
    "SweepAxes",
    "ReportSpec",
    "ReportTable",
    "ReportRow",
    "load_config",
    "parse_config",
    "serialize_config",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1

_LOC = "__loc__"


class _TaggedLoader(yaml.SafeLoader):
    """SafeLoader that stamps every mapping with its source line."""


def _tagged_mapping(loader: _TaggedLoader, node, deep=False):
    loader.flatten_mapping(node)
    mapping = yaml.SafeLoader.construct_mapping(loader, node, deep=deep)
    mapping[_LOC] = node.start_mark.line + 1
    return mapping


_TaggedLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _tagged_mapping)


def _stamp_filename(obj, filename: str):
    """Rewrite integer line stamps into 'file:line' strings, recursively."""
    if isinstance(obj, dict):
        if isinstance(obj.get(_LOC), int):
            obj[_LOC] = f"{filename}:{obj[_LOC]}"
        for v in obj.values():
            _stamp_filename(v, filename)
    elif isinstance(obj, list):
        for v in obj:
            _stamp_filename(v, filename)


def _load_yaml(text: str, filename: str) -> dict:
    try:
        data = yaml.load(text, Loader=_TaggedLoader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {filename}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{filename}: top level must be a mapping")
    _stamp_filename(data, filename)
    return data


def _merge(parent: dict, child: dict) -> dict:
    out = dict(parent)
    for key, value in child.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


class _Ctx:
    """Collects (location, message) pairs so one parse reports everything."""

    def __init__(self) -> None:
        self.errors: list[tuple[str, str]] = []

    def error(self, loc: str, message: str) -> None:
        self.errors.append((str(loc), message))

    def fail_if_errors(self) -> None:
        if self.errors:
            raise ConfigError(
                f"invalid configuration ({len(self.errors)} problem"
                f"{'s' if len(self.errors) != 1 else ''})",
                locations=self.errors,
            )


def _loc(mapping) -> str:
    if isinstance(mapping, dict):
        return str(mapping.get(_LOC, "?"))
    return "?"


def _check_fields(ctx: _Ctx, mapping: dict, section: str, allowed: set, required=()) -> bool:
    loc = _loc(mapping)
    for key in mapping:
        if key != _LOC and key not in allowed:
            ctx.error(loc, f"{section}: unknown field {key!r}")
    ok = True
    for key in required:
        if key not in mapping:
            ctx.error(loc, f"{section}: missing required field {key!r}")
            ok = False
    return ok


def _expect_mapping(ctx: _Ctx, value, section: str, loc: str) -> dict:
    if not isinstance(value, dict):
        ctx.error(loc, f"{section}: expected a mapping, got {type(value).__name__}")
        return {_LOC: loc}
    return value


def _num(ctx, mapping, section, key, default=None, minimum=None, maximum=None):
    if key not in mapping:
        return default
    v = mapping[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        ctx.error(_loc(mapping), f"{section}.{key}: expected a number, got {v!r}")
        return default
    v = float(v)
    if minimum is not None and v < minimum:
        ctx.error(_loc(mapping), f"{section}.{key}: must be >= {minimum}, got {v!r}")
        return default
    if maximum is not None and v > maximum:
        ctx.error(_loc(mapping), f"{section}.{key}: must be <= {maximum}, got {v!r}")
        return default
    return v


def _int(ctx, mapping, section, key, default=None, minimum=None):
    if key not in mapping:
        return default
    v = mapping[key]
    if isinstance(v, bool) or not isinstance(v, int):
        ctx.error(_loc(mapping), f"{section}.{key}: expected an integer, got {v!r}")
        return default
    if minimum is not None and v < minimum:
        ctx.error(_loc(mapping), f"{section}.{key}: must be >= {minimum}, got {v!r}")
        return default
    return v


def _bool(ctx, mapping, section, key, default=False):
    if key not in mapping:
        return default
    v = mapping[key]
    if not isinstance(v, bool):
        ctx.error(_loc(mapping), f"{section}.{key}: expected true/false, got {v!r}")
        return default
    return v


def _str(ctx, mapping, section, key, default=None, required=False):
    if key not in mapping:
        if required:
            ctx.error(_loc(mapping), f"{section}: missing required field {key!r}")
        return default
    v = mapping[key]
    if not isinstance(v, str) or not v:
        ctx.error(_loc(mapping), f"{section}.{key}: expected a non-empty string, got {v!r}")
        return default
    return v


def _qty(ctx, mapping, section, key, kind, default=None):
    if key not in mapping:
        return default
    try:
        return parse_quantity(mapping[key], kind)
    except UnitError as exc:
        ctx.error(_loc(mapping), f"{section}.{key}: {exc}")
        return default


def _ratio(ctx, mapping, section, key, default=None):
    if key not in mapping:
        return default
    try:
        return parse_ratio(mapping[key])
    except (UnitError, ValueError) as exc:
        ctx.error(_loc(mapping), f"{section}.{key}: {exc}")
        return default


# === section parsers ===


def _parse_conditions(ctx: _Ctx, mapping: dict) -> ExperimentConditions:
    _check_fields(
        ctx,
        mapping,
        "conditions",
        allowed={
            "pileup",
            "reference_pileup",
            "bunch_rate",
            "l1_reduction",
            "hlt_reduction",
            "relevant_fraction",
        },
        required=("pileup", "reference_pileup"),
    )
    pileup = _num(ctx, mapping, "conditions", "pileup", default=1.0)
    reference = _num(ctx, mapping, "conditions", "reference_pileup", default=1.0)
    try:
        return ExperimentConditions(
            pileup=pileup,
            reference_pileup=reference,
            bunch_rate=_qty(ctx, mapping, "conditions", "bunch_rate", "rate"),
            l1_reduction=_ratio(ctx, mapping, "conditions", "l1_reduction"),
            hlt_reduction=_ratio(ctx, mapping, "conditions", "hlt_reduction"),
            relevant_fraction=_num(ctx, mapping, "conditions", "relevant_fraction"),
        )
    except ValueError as exc:
        ctx.error(_loc(mapping), f"conditions: {exc}")
        return ExperimentConditions(pileup=1.0, reference_pileup=1.0)


def _parse_era(ctx: _Ctx, mapping: dict | None) -> TechnologyEra:
    if mapping is None:
        return TechnologyEra(year=2024, efficiency_factor=1.0)
    _check_fields(
        ctx,
        mapping,
        "era",
        allowed={"year", "efficiency_factor", "baseline_year", "scale_links"},
        required=("year", "efficiency_factor"),
    )
    try:
        return TechnologyEra(
            year=_int(ctx, mapping, "era", "year", default=2024),
            efficiency_factor=_num(ctx, mapping, "era", "efficiency_factor", default=1.0),
            baseline_year=_int(ctx, mapping, "era", "baseline_year", default=2024),
            scale_links=_bool(ctx, mapping, "era", "scale_links"),
        )
    except ValueError as exc:
        ctx.error(_loc(mapping), f"era: {exc}")
        return TechnologyEra(year=2024, efficiency_factor=1.0)


def _parse_variants(ctx: _Ctx, mapping: dict | None) -> VariantConfig:
    if mapping is None:
        return VariantConfig()
    _check_fields(ctx, mapping, "variants", allowed=set(VARIANT_NAMES))
    gpu_map = _expect_mapping(ctx, mapping.get("gpu_hlt", {}), "variants.gpu_hlt", _loc(mapping))
    l1_map = _expect_mapping(ctx, mapping.get("l1_tracks", {}), "variants.l1_tracks", _loc(mapping))
    smart_map = _expect_mapping(
        ctx, mapping.get("smart_pixels", {}), "variants.smart_pixels", _loc(mapping)
    )
    _check_fields(
        ctx, gpu_map, "variants.gpu_hlt", allowed={"enabled", "throughput_gain", "unit_power"}
    )
    _check_fields(ctx, l1_map, "variants.l1_tracks", allowed={"enabled", "skill_factor"})
    _check_fields(
        ctx,
        smart_map,
        "variants.smart_pixels",
        allowed={"enabled", "data_reduction", "detector_power"},
    )
    try:
        gpu = GpuHlt(
            enabled=_bool(ctx, gpu_map, "variants.gpu_hlt", "enabled"),
            throughput_gain=_num(ctx, gpu_map, "variants.gpu_hlt", "throughput_gain", default=0.5),
            unit_power_w=_qty(ctx, gpu_map, "variants.gpu_hlt", "unit_power", "power", default=400.0),
        )
        l1 = L1Tracks(
            enabled=_bool(ctx, l1_map, "variants.l1_tracks", "enabled"),
            skill_factor=_num(ctx, l1_map, "variants.l1_tracks", "skill_factor", default=1.4),
        )
        smart = SmartPixels(
            enabled=_bool(ctx, smart_map, "variants.smart_pixels", "enabled"),
            data_reduction=_num(
                ctx, smart_map, "variants.smart_pixels", "data_reduction", default=0.54
            ),
            detector_power_w=_qty(
                ctx, smart_map, "variants.smart_pixels", "detector_power", "power", default=2300.0
            ),
        )
        return VariantConfig(gpu_hlt=gpu, l1_tracks=l1, smart_pixels=smart)
    except ValueError as exc:
        ctx.error(_loc(mapping), f"variants: {exc}")
        return VariantConfig()


def _parse_path(ctx: _Ctx, mapping: dict, section: str) -> TriggerPath | None:
    ok = _check_fields(
        ctx,
        mapping,
        section,
        allowed={"name", "threshold", "width", "plateau", "empirical_rate", "input_rate"},
        required=("name", "threshold", "width", "plateau", "empirical_rate", "input_rate"),
    )
    if not ok:
        return None
    name = _str(ctx, mapping, section, "name", required=True)
    threshold = _qty(ctx, mapping, section, "threshold", "momentum")
    width = _qty(ctx, mapping, section, "width", "momentum")
    plateau = _num(ctx, mapping, section, "plateau", minimum=0.0, maximum=1.0)
    empirical_rate = _qty(ctx, mapping, section, "empirical_rate", "rate")
    input_rate = _qty(ctx, mapping, section, "input_rate", "rate")
    if None in (name, threshold, width, plateau, empirical_rate, input_rate):
        return None
    try:
        curve = EfficiencyCurve(
            object_name=name, threshold=threshold, width=width, plateau=plateau
        )
        return TriggerPath(
            object_name=name,
            curve=curve,
            empirical_rate=empirical_rate,
            input_rate=input_rate,
        )
    except ValueError as exc:
        ctx.error(_loc(mapping), f"{section}: {exc}")
        return None


def _parse_calibration(ctx: _Ctx, mapping: dict | None) -> dict[str, MenuSpec]:
    if mapping is None:
        return {}
    _check_fields(ctx, mapping, "calibration", allowed={"menus"}, required=("menus",))
    menus_map = _expect_mapping(ctx, mapping.get("menus", {}), "calibration.menus", _loc(mapping))
    menus: dict[str, MenuSpec] = {}
    for name, menu_map in menus_map.items():
        if name == _LOC:
            continue
        section = f"calibration.menus.{name}"
        menu_map = _expect_mapping(ctx, menu_map, section, _loc(menus_map))
        _check_fields(
            ctx,
            menu_map,
            section,
            allowed={"mode", "sample_count", "paths"},
            required=("mode", "paths"),
        )
        mode = _str(ctx, menu_map, section, "mode", default="summed")
        if mode not in ("summed", "one-at-a-time"):
            ctx.error(_loc(menu_map), f"{section}.mode: must be 'summed' or 'one-at-a-time'")
            mode = "summed"
        raw_paths = menu_map.get("paths", [])
        if not isinstance(raw_paths, list) or not raw_paths:
            ctx.error(_loc(menu_map), f"{section}.paths: expected a non-empty list")
            continue
        paths = []
        for i, p in enumerate(raw_paths):
            p = _expect_mapping(ctx, p, f"{section}.paths[{i}]", _loc(menu_map))
            path = _parse_path(ctx, p, f"{section}.paths[{i}]")
            if path is not None:
                paths.append(path)
        if len(paths) != len(raw_paths):
            continue
        kwargs = {}
        # the sampler itself refuses n < 1000, so catch that here with a location
        sample_count = _int(ctx, menu_map, section, "sample_count", minimum=1000)
        if sample_count is not None:
            kwargs["sample_count"] = sample_count
        menus[name] = MenuSpec(name=name, mode=mode, paths=tuple(paths), **kwargs)
    return menus


def _parse_fn(ctx: _Ctx, mapping, section: str):
    loc = _loc(mapping) if isinstance(mapping, dict) else "?"
    mapping = _expect_mapping(ctx, mapping, section, loc)
    form = _str(ctx, mapping, section, "form", required=True)
    try:
        if form == "constant":
            _check_fields(ctx, mapping, section, allowed={"form", "value"}, required=("value",))
            return ConstantFn(value=_num(ctx, mapping, section, "value", default=0.0, minimum=0.0))
        if form == "linear":
            _check_fields(ctx, mapping, section, allowed={"form", "slope", "intercept"}, required=("slope",))
            return LinearFn(
                slope=_num(ctx, mapping, section, "slope", default=0.0, minimum=0.0),
                intercept=_num(ctx, mapping, section, "intercept", default=0.0, minimum=0.0),
            )
        if form == "power_law":
            _check_fields(
                ctx,
                mapping,
                section,
                allowed={"form", "exponent", "value_at_reference", "reference"},
                required=("exponent", "value_at_reference", "reference"),
            )
            return PowerLawFn(
                exponent=_num(ctx, mapping, section, "exponent", default=1.0, minimum=0.0),
                value_at_reference=_num(
                    ctx, mapping, section, "value_at_reference", default=0.0, minimum=0.0
                ),
                reference=_qty(ctx, mapping, section, "reference", "size", default=1.0),
            )
        if form == "table":
            _check_fields(ctx, mapping, section, allowed={"form", "xs", "ys"}, required=("xs", "ys"))
            xs_raw = mapping.get("xs", [])
            ys_raw = mapping.get("ys", [])
            if not isinstance(xs_raw, list) or not isinstance(ys_raw, list):
                ctx.error(loc, f"{section}: xs and ys must be lists")
                return ConstantFn(0.0)
            xs = []
            for x in xs_raw:
                if isinstance(x, str):
                    try:
                        xs.append(parse_quantity(x, "size"))
                    except UnitError as exc:
                        ctx.error(loc, f"{section}.xs: {exc}")
                        return ConstantFn(0.0)
                elif isinstance(x, (int, float)) and not isinstance(x, bool):
                    xs.append(float(x))
                else:
                    ctx.error(loc, f"{section}.xs: expected numbers or size strings")
                    return ConstantFn(0.0)
            if not all(isinstance(y, (int, float)) and not isinstance(y, bool) for y in ys_raw):
                ctx.error(loc, f"{section}.ys: expected numbers")
                return ConstantFn(0.0)
            return TableFn(xs=tuple(xs), ys=tuple(float(y) for y in ys_raw))
    except ValueError as exc:
        ctx.error(loc, f"{section}: {exc}")
        return ConstantFn(0.0)
    if form is not None:
        ctx.error(loc, f"{section}.form: unknown form {form!r}")
    return ConstantFn(0.0)


def _parse_scaling(ctx: _Ctx, mapping, section: str):
    if mapping is None:
        return ConstantScaling()
    loc = _loc(mapping) if isinstance(mapping, dict) else "?"
    mapping = _expect_mapping(ctx, mapping, section, loc)
    form = _str(ctx, mapping, section, "form", required=True)
    try:
        if form == "constant":
            _check_fields(ctx, mapping, section, allowed={"form"})
            return ConstantScaling()
        if form == "proportional":
            _check_fields(ctx, mapping, section, allowed={"form", "reference"}, required=("reference",))
            return ProportionalScaling(
                reference=_num(ctx, mapping, section, "reference", default=1.0, minimum=1e-12)
            )
        if form == "table":
            _check_fields(
                ctx, mapping, section, allowed={"form", "pileups", "multipliers"},
                required=("pileups", "multipliers"),
            )
            pileups = mapping.get("pileups", [])
            multipliers = mapping.get("multipliers", [])
            if not (isinstance(pileups, list) and isinstance(multipliers, list)):
                ctx.error(loc, f"{section}: pileups and multipliers must be lists")
                return ConstantScaling()
            return TableScaling(
                pileups=tuple(float(p) for p in pileups),
                multipliers=tuple(float(m) for m in multipliers),
            )
    except (TypeError, ValueError) as exc:
        ctx.error(loc, f"{section}: {exc}")
        return ConstantScaling()
    if form is not None:
        ctx.error(loc, f"{section}.form: unknown form {form!r}")
    return ConstantScaling()


def _parse_nodes(ctx: _Ctx, data: dict, menus: dict[str, MenuSpec]):
    raw_nodes = data.get("nodes", [])
    if not isinstance(raw_nodes, list) or not raw_nodes:
        ctx.error(_loc(data), "nodes: expected a non-empty list")
        raw_nodes = []
    nodes = []
    classifier_refs: dict[str, str] = {}
    for i, raw in enumerate(raw_nodes):
        section = f"nodes[{i}]"
        raw = _expect_mapping(ctx, raw, section, _loc(data))
        kind = _str(ctx, raw, section, "kind", required=True)
        node_id = _str(ctx, raw, section, "id", required=True)
        if kind is None or node_id is None:
            continue
        section = f"nodes[{i}] ({node_id})"
        try:
            if kind == "sensor":
                _check_fields(
                    ctx,
                    raw,
                    section,
                    allowed={
                        "kind", "id", "role", "sample_size", "sample_rate",
                        "relevant_fraction", "pileup_scaling", "enabled_min_pileup",
                        "constant_power",
                    },
                    required=("sample_size", "sample_rate"),
                )
                nodes.append(
                    SensorNode(
                        id=node_id,
                        sample_size=_qty(ctx, raw, section, "sample_size", "size", default=1.0),
                        sample_rate=_qty(ctx, raw, section, "sample_rate", "rate", default=1.0),
                        relevant_fraction=_num(
                            ctx, raw, section, "relevant_fraction", default=0.0,
                            minimum=0.0, maximum=1.0,
                        ),
                        pileup_scaling=_parse_scaling(
                            ctx, raw.get("pileup_scaling"), f"{section}.pileup_scaling"
                        ),
                        role=_str(ctx, raw, section, "role"),
                        enabled_min_pileup=_num(ctx, raw, section, "enabled_min_pileup"),
                        constant_power_w=_qty(
                            ctx, raw, section, "constant_power", "power", default=0.0
                        ),
                    )
                )
            elif kind == "process":
                _check_fields(
                    ctx,
                    raw,
                    section,
                    allowed={
                        "kind", "id", "role", "complexity", "energy_per_op", "output_size",
                        "classifier", "reduction_target", "unit_power", "constant_power",
                    },
                    required=("complexity", "energy_per_op", "output_size"),
                )
                menu_name = _str(ctx, raw, section, "classifier")
                if menu_name is not None:
                    if menu_name not in menus:
                        ctx.error(
                            _loc(raw),
                            f"{section}.classifier: menu {menu_name!r} is not defined "
                            "under calibration.menus",
                        )
                    else:
                        classifier_refs[node_id] = menu_name
                nodes.append(
                    ProcessNode(
                        id=node_id,
                        complexity=(
                            _parse_fn(ctx, raw["complexity"], f"{section}.complexity")
                            if "complexity" in raw
                            else ConstantFn(0.0)
                        ),
                        energy_per_op=_qty(
                            ctx, raw, section, "energy_per_op", "energy_per_op", default=0.0
                        ),
                        output_size=(
                            _parse_fn(ctx, raw["output_size"], f"{section}.output_size")
                            if "output_size" in raw
                            else ConstantFn(0.0)
                        ),
                        classifier=None,
                        reduction_target=_ratio(ctx, raw, section, "reduction_target"),
                        role=_str(ctx, raw, section, "role"),
                        unit_power_w=_qty(ctx, raw, section, "unit_power", "power"),
                        constant_power_w=_qty(
                            ctx, raw, section, "constant_power", "power", default=0.0
                        ),
                    )
                )
            elif kind == "output":
                _check_fields(ctx, raw, section, allowed={"kind", "id"})
                nodes.append(OutputNode(id=node_id))
            else:
                ctx.error(_loc(raw), f"{section}.kind: unknown kind {kind!r}")
        except ValueError as exc:
            ctx.error(_loc(raw), f"{section}: {exc}")
    return tuple(nodes), classifier_refs


def _parse_links(ctx: _Ctx, data: dict):
    raw_links = data.get("links", [])
    if not isinstance(raw_links, list) or not raw_links:
        ctx.error(_loc(data), "links: expected a non-empty list")
        raw_links = []
    links = []
    for i, raw in enumerate(raw_links):
        section = f"links[{i}]"
        raw = _expect_mapping(ctx, raw, section, _loc(data))
        link_id = _str(ctx, raw, section, "id", required=True)
        if link_id is None:
            continue
        section = f"links[{i}] ({link_id})"
        ok = _check_fields(
            ctx,
            raw,
            section,
            allowed={
                "id", "source", "target", "energy_per_bit", "bandwidth_per_channel",
                "latency", "shoreline",
            },
            required=("source", "target", "energy_per_bit", "bandwidth_per_channel"),
        )
        if not ok:
            continue
        try:
            links.append(
                CommLink(
                    id=link_id,
                    source=_str(ctx, raw, section, "source", default=""),
                    target=_str(ctx, raw, section, "target", default=""),
                    energy_per_bit=_qty(
                        ctx, raw, section, "energy_per_bit", "energy_per_bit", default=0.0
                    ),
                    bandwidth_per_channel=_qty(
                        ctx, raw, section, "bandwidth_per_channel", "bandwidth", default=1.0
                    ),
                    latency=_qty(ctx, raw, section, "latency", "time", default=0.0),
                    shoreline=_qty(ctx, raw, section, "shoreline", "length", default=0.0),
                )
            )
        except ValueError as exc:
            ctx.error(_loc(raw), f"{section}: {exc}")
    return tuple(links)


@dataclass(frozen=True)
class SweepAxes:
    """Grid axes; a None entry means 'as configured' for that point."""

    pileup: tuple = (None,)
    reduction: tuple = (None,)
    skill: tuple = (None,)
    variants: tuple = (None,)


def _parse_sweep(ctx: _Ctx, mapping: dict | None) -> SweepAxes | None:
    if mapping is None:
        return None
    _check_fields(ctx, mapping, "sweep", allowed={"pileup", "reduction", "skill", "variants"})

    def axis(key, convert):
        if key not in mapping:
            return (None,)
        raw = mapping[key]
        if not isinstance(raw, list) or not raw:
            ctx.error(_loc(mapping), f"sweep.{key}: expected a non-empty list")
            return (None,)
        out = []
        for v in raw:
            try:
                out.append(convert(v))
            except (UnitError, ValueError, TypeError) as exc:
                ctx.error(_loc(mapping), f"sweep.{key}: {exc}")
        return tuple(out) if out else (None,)

    def as_float(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueError(f"expected a number, got {v!r}")
        return float(v)

    def as_variant(v):
        if not isinstance(v, str):
            raise ValueError(f"expected a variant name string, got {v!r}")
        entry = v.strip()
        if entry not in ("", "none"):
            for name in entry.split("+"):
                if name.strip() not in VARIANT_NAMES:
                    raise ValueError(
                        f"unknown variant {name.strip()!r} "
                        f"(known: {', '.join(VARIANT_NAMES)}, combine with '+')"
                    )
        return entry

    return SweepAxes(
        pileup=axis("pileup", as_float),
        reduction=axis("reduction", parse_ratio),
        skill=axis("skill", as_float),
        variants=axis("variants", as_variant),
    )


@dataclass(frozen=True)
class ReportRow:
    label: str
    config_path: str


@dataclass(frozen=True)
class ReportTable:
    title: str
    rows: tuple[ReportRow, ...]


@dataclass(frozen=True)
class ReportSpec:
    tables: tuple[ReportTable, ...]


def _parse_report(ctx: _Ctx, mapping: dict | None, base_dir: Path | None) -> ReportSpec | None:
    if mapping is None:
        return None
    _check_fields(ctx, mapping, "report", allowed={"tables"}, required=("tables",))
    raw_tables = mapping.get("tables", [])
    if not isinstance(raw_tables, list) or not raw_tables:
        ctx.error(_loc(mapping), "report.tables: expected a non-empty list")
        return None
    tables = []
    for i, raw in enumerate(raw_tables):
        section = f"report.tables[{i}]"
        raw = _expect_mapping(ctx, raw, section, _loc(mapping))
        _check_fields(ctx, raw, section, allowed={"title", "rows"}, required=("title", "rows"))
        title = _str(ctx, raw, section, "title", default="")
        raw_rows = raw.get("rows", [])
        if not isinstance(raw_rows, list) or not raw_rows:
            ctx.error(_loc(raw), f"{section}.rows: expected a non-empty list")
            continue
        rows = []
        for j, rr in enumerate(raw_rows):
            rsec = f"{section}.rows[{j}]"
            rr = _expect_mapping(ctx, rr, rsec, _loc(raw))
            _check_fields(ctx, rr, rsec, allowed={"label", "config"}, required=("label", "config"))
            label = _str(ctx, rr, rsec, "label")
            ref = _str(ctx, rr, rsec, "config")
            if label is None or ref is None:
                continue
            if base_dir is None:
                ctx.error(_loc(rr), f"{rsec}.config: report references need a file-based config")
                continue
            path = (base_dir / ref).resolve()
            if not path.is_file():
                ctx.error(_loc(rr), f"{rsec}.config: referenced config not found: {ref}")
                continue
            rows.append(ReportRow(label=label, config_path=str(path)))
        tables.append(ReportTable(title=title, rows=tuple(rows)))
    return ReportSpec(tables=tuple(tables))


@dataclass(frozen=True)
class ModelConfig:
    schema_version: int
    conditions: ExperimentConditions
    era: TechnologyEra
    variants: VariantConfig
    nodes: tuple
    links: tuple[CommLink, ...]
    classifier_refs: dict
    menus: dict
    seeds: dict
    description: str = ""
    sweep: SweepAxes | None = None
    report: ReportSpec | None = None
    source_path: str | None = field(default=None, compare=False)

    def build_graph(self, seed: int = 0) -> PipelineGraph:
        """Materialize the pipeline: fit menus at `seed`, attach classifiers."""
        models = {
            name: build_menu(self.menus[name], seed)
            for name in sorted(set(self.classifier_refs.values()))
        }
        nodes = tuple(
            replace(n, classifier=models[self.classifier_refs[n.id]])
            if isinstance(n, ProcessNode) and n.id in self.classifier_refs
            else n
            for n in self.nodes
        )
        return PipelineGraph(nodes=nodes, links=self.links)


_TOP_LEVEL = {
    "schema_version",
    "description",
    "seeds",
    "conditions",
    "era",
    "variants",
    "nodes",
    "links",
    "calibration",
    "sweep",
    "report",
}


def _build_config(data: dict, base_dir: Path | None, source: str | None) -> ModelConfig:
    ctx = _Ctx()
    _check_fields(
        ctx, data, "config", allowed=_TOP_LEVEL, required=("schema_version", "nodes", "links")
    )
    version = data.get("schema_version")
    if not isinstance(version, int) or isinstance(version, bool) or version != SCHEMA_VERSION:
        ctx.error(
            _loc(data),
            f"schema_version: expected {SCHEMA_VERSION}, got {version!r}",
        )
        version = SCHEMA_VERSION

    description = data.get("description", "")
    if not isinstance(description, str):
        ctx.error(_loc(data), f"description: expected a string, got {description!r}")
        description = ""

    seeds: dict[str, int] = {}
    raw_seeds = data.get("seeds")
    if raw_seeds is not None:
        raw_seeds = _expect_mapping(ctx, raw_seeds, "seeds", _loc(data))
        for k, v in raw_seeds.items():
            if k == _LOC:
                continue
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                ctx.error(_loc(raw_seeds), f"seeds.{k}: expected a nonnegative integer, got {v!r}")
            else:
                seeds[k] = v

    if "conditions" not in data:
        ctx.error(_loc(data), "config: missing required field 'conditions'")
        conditions = ExperimentConditions(pileup=1.0, reference_pileup=1.0)
    else:
        conditions = _parse_conditions(
            ctx, _expect_mapping(ctx, data["conditions"], "conditions", _loc(data))
        )
    era = _parse_era(
        ctx,
        _expect_mapping(ctx, data["era"], "era", _loc(data)) if "era" in data else None,
    )
    variants = _parse_variants(
        ctx,
        _expect_mapping(ctx, data["variants"], "variants", _loc(data))
        if "variants" in data
        else None,
    )
    menus = _parse_calibration(
        ctx,
        _expect_mapping(ctx, data["calibration"], "calibration", _loc(data))
        if "calibration" in data
        else None,
    )
    nodes, classifier_refs = _parse_nodes(ctx, data, menus)
    links = _parse_links(ctx, data)
    sweep_axes = _parse_sweep(
        ctx,
        _expect_mapping(ctx, data["sweep"], "sweep", _loc(data)) if "sweep" in data else None,
    )
    report = _parse_report(
        ctx,
        _expect_mapping(ctx, data["report"], "report", _loc(data)) if "report" in data else None,
        base_dir,
    )
    ctx.fail_if_errors()
    return ModelConfig(
        schema_version=version,
        conditions=conditions,
        era=era,
        variants=variants,
        nodes=nodes,
        links=links,
        classifier_refs=classifier_refs,
        menus=menus,
        seeds=seeds,
        description=description,
        sweep=sweep_axes,
        report=report,
        source_path=source,
    )


def _resolve_extends(data: dict, base_dir: Path | None, filename: str) -> dict:
    ref = data.pop("extends", None)
    if ref is None:
        return data
    if not isinstance(ref, str):
        raise ConfigError(f"{filename}: extends must be a path string, got {ref!r}")
    if base_dir is None:
        raise ConfigError(f"{filename}: extends needs a file-based config to resolve against")
    parent_path = (base_dir / ref).resolve()
    if not parent_path.is_file():
        raise ConfigError(f"{filename}: extended config not found: {ref}")
    parent = _load_yaml(parent_path.read_text(), parent_path.name)
    if "extends" in parent:
        raise ConfigError(
            f"{filename}: extends chains are limited to one level, "
            f"but {parent_path.name} itself extends another config"
        )
    return _merge(parent, data)


def load_config(path) -> ModelConfig:
    """Parse a .cfg file into a ModelConfig, resolving a single extends level."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    data = _load_yaml(p.read_text(), p.name)
    data = _resolve_extends(data, p.parent, p.name)
    return _build_config(data, base_dir=p.parent, source=str(p))


def parse_config(text: str, *, base_dir=None, filename: str = "<config>") -> ModelConfig:
    """Parse config text directly; extends resolves against base_dir if given."""
    data = _load_yaml(text, filename)
    base = Path(base_dir) if base_dir is not None else None
    data = _resolve_extends(data, base, filename)
    return _build_config(data, base_dir=base, source=None)


# === serialization ===


def _fn_spec(fn, what: str) -> dict:
    if isinstance(fn, ConstantFn):
        return {"form": "constant", "value": fn.value}
    if isinstance(fn, LinearFn):
        spec = {"form": "linear", "slope": fn.slope}
        if fn.intercept:
            spec["intercept"] = fn.intercept
        return spec
    if isinstance(fn, PowerLawFn):
        return {
            "form": "power_law",
            "exponent": fn.exponent,
            "value_at_reference": fn.value_at_reference,
            "reference": format_quantity(fn.reference, "size"),
        }
    if isinstance(fn, TableFn):
        return {
            "form": "table",
            "xs": [format_quantity(x, "size") for x in fn.xs],
            "ys": list(fn.ys),
        }
    raise ConfigError(f"{what}: cannot serialize function form {type(fn).__name__}")


def _scaling_spec(scaling, what: str) -> dict:
    if isinstance(scaling, ConstantScaling):
        return {"form": "constant"}
    if isinstance(scaling, ProportionalScaling):
        return {"form": "proportional", "reference": scaling.reference}
    if isinstance(scaling, TableScaling):
        return {
            "form": "table",
            "pileups": list(scaling.pileups),
            "multipliers": list(scaling.multipliers),
        }
    raise ConfigError(f"{what}: cannot serialize scaling form {type(scaling).__name__}")


def serialize_config(cfg: ModelConfig) -> str:
    """Emit canonical YAML that parses back into an equal ModelConfig."""
    data: dict = {"schema_version": cfg.schema_version}
    if cfg.description:
        data["description"] = cfg.description
    if cfg.seeds:
        data["seeds"] = dict(cfg.seeds)

    c = cfg.conditions
    cond: dict = {"pileup": c.pileup, "reference_pileup": c.reference_pileup}
    if c.bunch_rate is not None:
        cond["bunch_rate"] = format_quantity(c.bunch_rate, "rate")
    if c.l1_reduction is not None:
        cond["l1_reduction"] = c.l1_reduction
    if c.hlt_reduction is not None:
        cond["hlt_reduction"] = c.hlt_reduction
    if c.relevant_fraction is not None:
        cond["relevant_fraction"] = c.relevant_fraction
    data["conditions"] = cond

    e = cfg.era
    data["era"] = {
        "year": e.year,
        "efficiency_factor": e.efficiency_factor,
        "baseline_year": e.baseline_year,
        "scale_links": e.scale_links,
    }

    v = cfg.variants
    data["variants"] = {
        "gpu_hlt": {
            "enabled": v.gpu_hlt.enabled,
            "throughput_gain": v.gpu_hlt.throughput_gain,
            "unit_power": format_quantity(v.gpu_hlt.unit_power_w, "power"),
        },
        "l1_tracks": {
            "enabled": v.l1_tracks.enabled,
            "skill_factor": v.l1_tracks.skill_factor,
        },
        "smart_pixels": {
            "enabled": v.smart_pixels.enabled,
            "data_reduction": v.smart_pixels.data_reduction,
            "detector_power": format_quantity(v.smart_pixels.detector_power_w, "power"),
        },
    }

    node_specs = []
    for n in cfg.nodes:
        if isinstance(n, SensorNode):
            spec: dict = {
                "kind": "sensor",
                "id": n.id,
                "sample_size": format_quantity(n.sample_size, "size"),
                "sample_rate": format_quantity(n.sample_rate, "rate"),
            }
            if n.role is not None:
                spec["role"] = n.role
            if n.relevant_fraction:
                spec["relevant_fraction"] = n.relevant_fraction
            spec["pileup_scaling"] = _scaling_spec(n.pileup_scaling, f"sensor {n.id}")
            if n.enabled_min_pileup is not None:
                spec["enabled_min_pileup"] = n.enabled_min_pileup
            if n.constant_power_w:
                spec["constant_power"] = format_quantity(n.constant_power_w, "power")
        elif isinstance(n, ProcessNode):
            spec = {
                "kind": "process",
                "id": n.id,
                "complexity": _fn_spec(n.complexity, f"process {n.id} complexity"),
                "energy_per_op": format_quantity(n.energy_per_op, "energy_per_op"),
                "output_size": _fn_spec(n.output_size, f"process {n.id} output_size"),
            }
            if n.role is not None:
                spec["role"] = n.role
            if n.id in cfg.classifier_refs:
                spec["classifier"] = cfg.classifier_refs[n.id]
            if n.reduction_target is not None:
                spec["reduction_target"] = n.reduction_target
            if n.unit_power_w is not None:
                spec["unit_power"] = format_quantity(n.unit_power_w, "power")
            if n.constant_power_w:
                spec["constant_power"] = format_quantity(n.constant_power_w, "power")
        else:
            spec = {"kind": "output", "id": n.id}
        node_specs.append(spec)
    data["nodes"] = node_specs

    link_specs = []
    for l in cfg.links:
        spec = {
            "id": l.id,
            "source": l.source,
            "target": l.target,
            "energy_per_bit": format_quantity(l.energy_per_bit, "energy_per_bit"),
            "bandwidth_per_channel": format_quantity(l.bandwidth_per_channel, "bandwidth"),
        }
        if l.latency:
            spec["latency"] = format_quantity(l.latency, "time")
        if l.shoreline:
            spec["shoreline"] = format_quantity(l.shoreline, "length")
        link_specs.append(spec)
    data["links"] = link_specs

    if cfg.menus:
        menus = {}
        for name in cfg.menus:
            m = cfg.menus[name]
            menus[name] = {
                "mode": m.mode,
                "sample_count": m.sample_count,
                "paths": [
                    {
                        "name": p.object_name,
                        "threshold": format_quantity(p.curve.threshold, "momentum"),
                        "width": format_quantity(p.curve.width, "momentum"),
                        "plateau": p.curve.plateau,
                        "empirical_rate": format_quantity(p.empirical_rate, "rate"),
                        "input_rate": format_quantity(p.input_rate, "rate"),
                    }
                    for p in m.paths
                ],
            }
        data["calibration"] = {"menus": menus}

    if cfg.sweep is not None:
        sweep_spec = {}
        for axis in ("pileup", "reduction", "skill", "variants"):
            values = getattr(cfg.sweep, axis)
            if values != (None,):
                sweep_spec[axis] = list(values)
        data["sweep"] = sweep_spec

    if cfg.report is not None:
        data["report"] = {
            "tables": [
                {
                    "title": t.title,
                    "rows": [{"label": r.label, "config": r.config_path} for r in t.rows],
                }
                for t in cfg.report.tables
            ]
        }

    return yaml.safe_dump(data, sort_keys=False, default_flow_style=False)
