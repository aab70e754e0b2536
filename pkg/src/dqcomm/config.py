"""Experiment configuration documents: schema, defaults and object builders.

A config is a JSON document. It is validated (unknown keys rejected), then
resolved by filling in every default so the echoed copy in the output is
self-contained and reproduces the run.
"""

from __future__ import annotations

import copy
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .experiments import ScalingConfig, default_time_grid
from .lattice import (AbsorbingLayer, AntennaGeometry, LatticeSpec, Region, make_antenna_barrier,
                      v_antenna)
from .propagation import PropagatorConfig
from .states import FULLGRID, PRODUCT, StateVector, WavePacketSpec, inject_delta, make_wavepacket


class ConfigError(ValueError):
    """Config document is malformed or inconsistent."""


_INT_LIST = {"type": "array", "items": {"type": "integer"}, "minItems": 1}
_NUM_LIST = {"type": "array", "items": {"type": "number"}, "minItems": 1}

_BOX = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "origin": _INT_LIST, "size": _INT_LIST,
        "center": _INT_LIST, "side": {"type": "integer", "minimum": 1},
        "sites": {"type": "array", "items": _INT_LIST, "minItems": 1},
    },
    "oneOf": [
        {"required": ["origin", "size"]},
        {"required": ["center", "side"]},
        {"required": ["sites"]},
    ],
}

_ANTENNA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "apex": _INT_LIST,
        "arm_length": {"type": "integer", "minimum": 1},
        "opening": _INT_LIST,
        "thickness": {"type": "integer", "minimum": 1},
        "sites": {"type": "array", "items": _INT_LIST},
        "strength": {"type": "number"},
    },
    "required": ["strength"],
    "oneOf": [{"required": ["apex", "arm_length"]}, {"required": ["sites"]}],
}

_LATTICE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["extents"],
    "properties": {
        "extents": _INT_LIST,
        "potentials": {
            "type": "array",
            "items": {
                "type": "object", "additionalProperties": False, "required": ["site", "w"],
                "properties": {"site": _INT_LIST, "w": {"type": "number"}},
            },
        },
        "absorber": {
            "type": ["object", "null"], "additionalProperties": False, "required": ["width", "strength"],
            "properties": {"width": {"type": "integer", "minimum": 1}, "strength": {"type": "number", "exclusiveMinimum": 0}},
        },
        "antennas": {"type": "array", "items": _ANTENNA},
    },
}

_TRANSMITTER = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["wavepacket", "delta"]},
        "center": _NUM_LIST,
        "crop": _BOX,
        "sigma": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "sigma_grid": {"type": ["array", "null"], "items": {"type": "number", "exclusiveMinimum": 0}},
        "k0": {"type": ["array", "null"], "items": {"type": "number"}},
        "site": _INT_LIST,
    },
    "if": {"properties": {"kind": {"const": "delta"}}},
    "then": {"required": ["site"]},
    "else": {"required": ["center", "crop"]},
}

_ENGINE = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "method": {"enum": ["auto", "separable", "krylov"]},
        "krylov_dim": {"type": "integer", "minimum": 4},
        "substep_tolerance": {"type": "number", "exclusiveMinimum": 0},
        "max_substep": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "representation": {"enum": ["auto", "product", "fullgrid"]},
    },
}

_OUTPUT = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "dir": {"type": "string"},
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "formats": {"type": "array", "items": {"enum": ["csv", "json"]}, "minItems": 1},
    },
}

_TGRID = {
    "oneOf": [
        {"type": "null"},
        _NUM_LIST,
        {"type": "object", "additionalProperties": False, "required": ["start", "stop", "num"],
         "properties": {"start": {"type": "number"}, "stop": {"type": "number"}, "num": {"type": "integer", "minimum": 1}}},
    ]
}

SIMULATE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["lattice", "transmitter", "receiver"],
    "properties": {
        "command": {"const": "simulate"},
        "lattice": _LATTICE,
        "transmitter": _TRANSMITTER,
        "receiver": _BOX,
        "engine": _ENGINE,
        "experiment": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "t_grid": _TGRID,
                "refine": {"type": "boolean"},
                "compare_without_antennas": {"type": "boolean"},
            },
        },
        "output": _OUTPUT,
    },
}

SCALING_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["scaling"],
    "properties": {
        "command": {"const": "scaling"},
        "scaling": {
            "type": "object", "additionalProperties": False, "required": ["deltas", "targets"],
            "properties": {
                "deltas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "targets": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}, "minItems": 1},
                "c": {"type": "number", "exclusiveMinimum": 0},
                "sigma_coeff": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "sigma_factors": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "w_max": {"type": "integer", "minimum": 1},
                "dims": {"type": "integer", "minimum": 1},
                "extent": {"type": ["integer", "null"], "minimum": 2},
            },
        },
        "output": _OUTPUT,
    },
}

SCHEMAS = {"simulate": SIMULATE_SCHEMA, "scaling": SCALING_SCHEMA}


def load_document(path: str | Path) -> dict:
    """Read a config file; a previous run's summary JSON is unwrapped to its echoed config."""
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if isinstance(doc, dict) and "resolved_config" in doc:
        doc = doc["resolved_config"]
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def validate(doc: dict, command: str) -> None:
    try:
        jsonschema.validate(doc, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None


def _output_defaults(out: dict | None, name: str) -> dict:
    out = dict(out or {})
    out.setdefault("dir", "results")
    out.setdefault("name", name)
    out.setdefault("formats", ["csv", "json"])
    return out


def resolve(doc: dict, command: str, *, out_dir: str | None = None, fmt: str | None = None) -> dict:
    """Validate and fill defaults. Flag overrides are applied before validation."""
    doc = copy.deepcopy(doc)
    doc.setdefault("command", command)
    if out_dir is not None:
        doc.setdefault("output", {})["dir"] = out_dir
    if fmt is not None:
        doc.setdefault("output", {})["formats"] = [fmt]
    validate(doc, command)
    if command == "simulate":
        lat = doc["lattice"]
        lat.setdefault("potentials", [])
        lat.setdefault("absorber", None)
        lat.setdefault("antennas", [])
        for a in lat["antennas"]:
            if "apex" in a:
                a.setdefault("opening", [1, 1])
                a.setdefault("thickness", 1)
        tx = doc["transmitter"]
        if tx["kind"] == "wavepacket":
            tx.setdefault("sigma", None)
            tx.setdefault("sigma_grid", None)
            tx.setdefault("k0", None)
        eng = doc.setdefault("engine", {})
        defaults = PropagatorConfig()
        eng.setdefault("method", defaults.method)
        eng.setdefault("krylov_dim", defaults.krylov_dim)
        eng.setdefault("substep_tolerance", defaults.substep_tolerance)
        eng.setdefault("max_substep", defaults.max_substep)
        eng.setdefault("representation", "auto")
        exp = doc.setdefault("experiment", {})
        exp.setdefault("t_grid", None)
        exp.setdefault("refine", True)
        exp.setdefault("compare_without_antennas", False)
        doc["output"] = _output_defaults(doc.get("output"), "simulate")
        dims = len(lat["extents"])
        _check_dims(doc, dims)
    else:
        sc = doc["scaling"]
        d = ScalingConfig()
        sc.setdefault("c", d.c)
        sc.setdefault("sigma_coeff", d.sigma_coeff)
        sc.setdefault("sigma_factors", list(d.sigma_factors))
        sc.setdefault("w_max", d.w_max)
        sc.setdefault("dims", d.dims)
        sc.setdefault("extent", d.extent)
        doc["output"] = _output_defaults(doc.get("output"), "scaling")
    return doc


def _check_dims(doc: dict, dims: int) -> None:
    def coords(c, what):
        if len(c) != dims:
            raise ConfigError(f"{what} has {len(c)} coordinates, lattice has {dims} dimensions")

    tx = doc["transmitter"]
    if tx["kind"] == "delta":
        coords(tx["site"], "transmitter/site")
    else:
        coords(tx["center"], "transmitter/center")
        if tx.get("k0") is not None:
            coords(tx["k0"], "transmitter/k0")
    for p in doc["lattice"]["potentials"]:
        coords(p["site"], "lattice/potentials/site")


# --- builders -------------------------------------------------------------------

def build_region(spec: dict, lattice: LatticeSpec) -> Region:
    try:
        if "origin" in spec:
            region = Region.box(spec["origin"], spec["size"])
        elif "center" in spec:
            region = Region.centered_box(spec["center"], spec["side"])
        else:
            region = Region.mask(lattice.site_index(c) for c in spec["sites"])
        region.validate(lattice)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return region


def build_antennas(doc: dict, lattice: LatticeSpec) -> list[AntennaGeometry]:
    out = []
    for a in doc["lattice"]["antennas"]:
        try:
            if "apex" in a:
                out.append(v_antenna(lattice, a["apex"], a["arm_length"], a["strength"], a["opening"], a["thickness"]))
            else:
                out.append(AntennaGeometry((lattice.site_index(c) for c in a["sites"]), a["strength"]))
        except ValueError as exc:
            raise ConfigError(f"antenna: {exc}") from exc
    return out


def build_lattice(doc: dict, with_antennas: bool = True) -> LatticeSpec:
    lat = doc["lattice"]
    try:
        absorber = None if lat["absorber"] is None else AbsorbingLayer(lat["absorber"]["width"], lat["absorber"]["strength"])
        bare = LatticeSpec(lat["extents"], absorbing_layer=absorber)
        pots = [(bare.site_index(p["site"]), p["w"]) for p in lat["potentials"]]
        lattice = LatticeSpec(lat["extents"], pots, absorber)
    except ValueError as exc:
        raise ConfigError(f"lattice: {exc}") from exc
    if with_antennas:
        for geom in build_antennas(doc, lattice):
            lattice = make_antenna_barrier(lattice, geom)
    return lattice


def build_engine(doc: dict) -> PropagatorConfig:
    e = doc["engine"]
    return PropagatorConfig(method=e["method"], krylov_dim=e["krylov_dim"],
                            substep_tolerance=e["substep_tolerance"], max_substep=e["max_substep"])


def _representation(doc: dict) -> str | None:
    rep = doc["engine"]["representation"]
    return {"auto": None, "product": PRODUCT, "fullgrid": FULLGRID}[rep]


def sigma_candidates(doc: dict) -> list[float | None]:
    tx = doc["transmitter"]
    if tx["kind"] != "wavepacket":
        return [None]
    if tx.get("sigma_grid"):
        return [float(s) for s in tx["sigma_grid"]]
    return [tx.get("sigma")]


def build_transmitter(doc: dict, lattice: LatticeSpec, sigma: float | None = None) -> StateVector:
    tx = doc["transmitter"]
    rep = _representation(doc)
    if rep == PRODUCT and not lattice.is_uniform:
        raise ConfigError("engine/representation 'product' needs a lattice without potentials or absorber")
    try:
        if tx["kind"] == "delta":
            return inject_delta(lattice, tx["site"], rep)
        crop = build_region(tx["crop"], lattice)
        k0 = tuple(tx["k0"]) if tx.get("k0") is not None else None
        s = sigma if sigma is not None else tx.get("sigma")
        return make_wavepacket(lattice, WavePacketSpec(tuple(tx["center"]), crop, s, k0), rep)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"transmitter: {exc}") from exc


def transmitter_center(doc: dict) -> tuple[float, ...]:
    tx = doc["transmitter"]
    return tuple(float(c) for c in (tx["site"] if tx["kind"] == "delta" else tx["center"]))


def build_time_grid(doc: dict, receiver: Region, lattice: LatticeSpec) -> np.ndarray:
    tg = doc["experiment"]["t_grid"]
    if tg is None:
        if receiver.is_box:
            rc = receiver.center()
        else:
            rc = tuple(float(c) for c in np.mean([lattice.site_coords(s) for s in receiver.sites], axis=0))
        offset = max(abs(a - b) for a, b in zip(rc, transmitter_center(doc)))
        if offset == 0:
            return np.linspace(0.0, 1.0, 11)
        return default_time_grid(offset)
    if isinstance(tg, dict):
        grid = np.linspace(tg["start"], tg["stop"], tg["num"])
    else:
        grid = np.asarray(tg, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ConfigError("experiment/t_grid must be non-negative and strictly increasing")
    return grid


def build_scaling(doc: dict) -> tuple[list[float], list[float], ScalingConfig]:
    sc = doc["scaling"]
    cfg = ScalingConfig(c=sc["c"], sigma_coeff=sc["sigma_coeff"], sigma_factors=tuple(sc["sigma_factors"]),
                        w_max=sc["w_max"], dims=sc["dims"], extent=sc["extent"])
    return [float(d) for d in sc["deltas"]], [float(p) for p in sc["targets"]], cfg


def diagonal_distance(center_a, center_b) -> dict:
    """Euclidean and per-axis (max) separation, both recorded in run metadata."""
    diffs = [abs(a - b) for a, b in zip(center_a, center_b)]
    return {"euclidean": math.sqrt(sum(d * d for d in diffs)), "per_axis": max(diffs)}
