"""Workspace documents: manifolds, structures and maps loaded from JSON.

The built-in catalog uses the same format as user configs.  Loading runs in
two stages: schema and reference checks that never touch numerics, then a
numerical validation of every structure and map at its sample points.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import jsonschema
import numpy as np

from .expr import ExpressionError, evaluate, parse_expression
from .geometry import DEFAULT_SEED, DegenerateMetricError, EndomorphismField, ManifoldSpec
from .maps import SmoothMapSpec
from .structures import (
    POLY_TOL,
    InvalidStructureError,
    Kind,
    StructureField,
    eigen_ranks_at,
    polynomial_residual_at,
)

DEFAULT_POINTS = 100
DEFAULT_FIELDS = 20
DEFAULT_FLAG_TOL = 1e-8
DEFAULT_CROSS_TOL = 1e-8


class ConfigError(ValueError):
    """Invalid workspace document; the message names the offending field."""


@dataclass(frozen=True)
class Sampling:
    seed: int = DEFAULT_SEED
    points: int = DEFAULT_POINTS
    fields: int = DEFAULT_FIELDS


@dataclass(frozen=True)
class Tolerances:
    flag: float = DEFAULT_FLAG_TOL
    cross_check: float = DEFAULT_CROSS_TOL


@dataclass(frozen=True, eq=False)
class CatalogEntry:
    name: str
    manifold: ManifoldSpec
    structure: StructureField
    provenance: str = ""


@dataclass(frozen=True, eq=False)
class MapEntry:
    name: str
    map: SmoothMapSpec
    source_structure: StructureField | None
    target_structure: StructureField | None
    provenance: str = ""


@dataclass
class Workspace:
    manifolds: dict = field(default_factory=dict)
    entries: dict = field(default_factory=dict)
    maps: dict = field(default_factory=dict)
    sampling: Sampling = field(default_factory=Sampling)
    tolerances: Tolerances = field(default_factory=Tolerances)

    def names(self) -> list[str]:
        return list(self.entries) + list(self.maps)

    def select(self, names) -> "Workspace":
        """Sub-workspace with the named structure and map entries ("all" keeps everything)."""
        names = list(names)
        if not names or names == ["all"]:
            return self
        unknown = [n for n in names if n not in self.entries and n not in self.maps]
        if unknown:
            raise ConfigError(f"unknown catalog entries: {', '.join(unknown)} (known: {', '.join(self.names())})")
        return Workspace(
            self.manifolds,
            {n: e for n, e in self.entries.items() if n in names},
            {n: m for n, m in self.maps.items() if n in names},
            self.sampling,
            self.tolerances,
        )

    def with_overrides(self, seed=None, points=None, tol=None) -> "Workspace":
        s, t = self.sampling, self.tolerances
        return Workspace(
            self.manifolds,
            self.entries,
            self.maps,
            Sampling(s.seed if seed is None else seed, s.points if points is None else points, s.fields),
            Tolerances(t.flag if tol is None else tol, t.cross_check),
        )

    def sample(self, M: ManifoldSpec) -> np.ndarray:
        return M.sample_points(self.sampling.points, self.sampling.seed)

    def merge(self, other: "Workspace") -> "Workspace":
        clash = (set(self.manifolds) & set(other.manifolds)) | (set(self.names()) & set(other.names()))
        if clash:
            raise ConfigError(f"names defined twice: {', '.join(sorted(clash))}")
        return Workspace(
            {**self.manifolds, **other.manifolds},
            {**self.entries, **other.entries},
            {**self.maps, **other.maps},
            other.sampling,
            other.tolerances,
        )


# --------------------------------------------------------------------------
# Schema stage


@lru_cache(maxsize=1)
def workspace_schema() -> dict:
    return json.loads(resources.files("goldprod").joinpath("data/workspace.schema.json").read_text())


def _path(parts) -> str:
    out = "$"
    for part in parts:
        out += f"[{part}]" if isinstance(part, int) else f".{part}"
    return out


def check_schema(doc) -> None:
    validator = jsonschema.Draft202012Validator(workspace_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = [f"{_path(e.absolute_path)}: {e.message}" for e in errors]
        raise ConfigError("config failed schema validation:\n  " + "\n  ".join(lines))


def _parse(source: str, names, where: str):
    try:
        return parse_expression(source, names)
    except ExpressionError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _square(rows, n: int, where: str) -> None:
    if len(rows) != n or any(len(r) != n for r in rows):
        shape = f"{len(rows)}x{'/'.join(sorted({str(len(r)) for r in rows}))}"
        raise ConfigError(f"{where}: expected a {n}x{n} matrix, got {shape}")


def _unique(items, what: str, where: str) -> None:
    seen = set()
    for i, item in enumerate(items):
        if item["name"] in seen:
            raise ConfigError(f"{where}[{i}].name: duplicate {what} name {item['name']!r}")
        seen.add(item["name"])


def _check_symmetric(doc_m: dict, parsed, where: str) -> None:
    """Reject metrics whose (i, j) and (j, i) entries differ.

    Entries are compared as parsed trees first; trees that differ are then
    compared by value at the corners and centre of the sample box.
    """
    n = len(parsed)
    box = np.array(doc_m["sample_box"], dtype=float)
    probes = [box[:, 0], box[:, 1], box.mean(axis=1)]
    for i in range(n):
        for j in range(i + 1, n):
            a, b = parsed[i][j], parsed[j][i]
            if a == b:
                continue
            try:
                same = all(abs(evaluate(a, q) - evaluate(b, q)) <= 1e-12 * max(1.0, abs(evaluate(a, q)))
                           for q in probes)
            except ExpressionError:
                same = False
            if not same:
                raise ConfigError(
                    f"{where}.metric[{i}][{j}]: metric is not symmetric "
                    f"({doc_m['metric'][i][j]!r} vs {doc_m['metric'][j][i]!r})"
                )


def load_workspace(doc, validate_numerics: bool = True) -> Workspace:
    """Build a workspace from a parsed JSON document.

    Raises ConfigError for schema violations, unresolved references,
    dimension mismatches and structures that fail validation.
    """
    check_schema(doc)
    manifolds_doc = doc.get("manifolds", [])
    structures_doc = doc.get("structures", [])
    maps_doc = doc.get("maps", [])
    _unique(manifolds_doc, "manifold", "$.manifolds")
    _unique(structures_doc + maps_doc, "entry", "$.structures/$.maps")

    manifolds: dict[str, ManifoldSpec] = {}
    for i, m in enumerate(manifolds_doc):
        where = f"$.manifolds[{i}]"
        names = tuple(m["coordinates"])
        n = len(names)
        if len(m["sample_box"]) != n:
            raise ConfigError(f"{where}.sample_box: {len(m['sample_box'])} intervals for {n} coordinates")
        for k, (lo, hi) in enumerate(m["sample_box"]):
            if not lo < hi:
                raise ConfigError(f"{where}.sample_box[{k}]: empty interval [{lo}, {hi}]")
        _square(m["metric"], n, f"{where}.metric")
        parsed = tuple(
            tuple(_parse(e, names, f"{where}.metric[{a}][{b}]") for b, e in enumerate(row))
            for a, row in enumerate(m["metric"])
        )
        _check_symmetric(m, parsed, where)
        manifolds[m["name"]] = ManifoldSpec(m["name"], names, tuple(map(tuple, m["sample_box"])), parsed)

    def manifold_ref(name: str, where: str) -> ManifoldSpec:
        if name not in manifolds:
            raise ConfigError(f"{where}: unknown manifold {name!r}")
        return manifolds[name]

    entries: dict[str, CatalogEntry] = {}
    for i, s in enumerate(structures_doc):
        where = f"$.structures[{i}]"
        M = manifold_ref(s["manifold"], f"{where}.manifold")
        _square(s["components"], M.dim, f"{where}.components")
        comps = tuple(
            tuple(_parse(e, M.coordinate_names, f"{where}.components[{a}][{b}]") for b, e in enumerate(row))
            for a, row in enumerate(s["components"])
        )
        S = StructureField(Kind(s["kind"]), EndomorphismField(comps), s["name"])
        entries[s["name"]] = CatalogEntry(s["name"], M, S, s.get("provenance", ""))

    maps: dict[str, MapEntry] = {}
    for i, f in enumerate(maps_doc):
        where = f"$.maps[{i}]"
        src = manifold_ref(f["source"], f"{where}.source")
        tgt = manifold_ref(f["target"], f"{where}.target")
        if len(f["components"]) != tgt.dim:
            raise ConfigError(f"{where}.components: {len(f['components'])} components for a {tgt.dim}-dimensional target")
        comps = tuple(_parse(e, src.coordinate_names, f"{where}.components[{k}]") for k, e in enumerate(f["components"]))
        structs = []
        for key, M in (("source_structure", src), ("target_structure", tgt)):
            ref = f.get(key)
            if ref is None:
                structs.append(None)
                continue
            if ref not in entries:
                raise ConfigError(f"{where}.{key}: unknown structure {ref!r}")
            if entries[ref].manifold is not M:
                raise ConfigError(f"{where}.{key}: structure {ref!r} lives on {entries[ref].manifold.name!r}, not {M.name!r}")
            structs.append(entries[ref].structure)
        if (structs[0] is None) != (structs[1] is None):
            raise ConfigError(f"{where}: give both source_structure and target_structure or neither")
        F = SmoothMapSpec(f["name"], src, tgt, comps)
        maps[f["name"]] = MapEntry(f["name"], F, structs[0], structs[1], f.get("provenance", ""))

    sampling = Sampling(**{k: v for k, v in doc.get("sampling", {}).items()})
    tolerances = Tolerances(**{k: float(v) for k, v in doc.get("tolerances", {}).items()})
    ws = Workspace(manifolds, entries, maps, sampling, tolerances)
    if validate_numerics:
        validate_workspace(ws)
    return ws


# --------------------------------------------------------------------------
# Numerical stage


def validate_workspace(ws: Workspace) -> None:
    """Nondegenerate metrics, valid structures with constant eigen-ranks,
    and maps landing inside the target chart's domain of definition."""
    for name, M in ws.manifolds.items():
        try:
            M.validate(ws.sample(M))
        except (DegenerateMetricError, ExpressionError, ValueError) as exc:
            raise ConfigError(f"manifold {name!r}: {exc}") from None
    for name, e in ws.entries.items():
        pts = ws.sample(e.manifold)
        try:
            worst = max(polynomial_residual_at(e.structure, p) for p in pts)
            if worst > POLY_TOL:
                raise ConfigError(
                    f"structure {name!r}: not a {e.structure.kind.value} structure "
                    f"(polynomial residual {worst:.3e})"
                )
            ranks = {eigen_ranks_at(e.structure, p) for p in pts}
        except (InvalidStructureError, ExpressionError) as exc:
            raise ConfigError(f"structure {name!r}: {exc}") from None
        if len(ranks) > 1:
            raise ConfigError(f"structure {name!r}: eigendistribution ranks vary over the sample box {sorted(ranks)}")
    for name, m in ws.maps.items():
        try:
            m.map.validate(ws.sample(m.map.source))
        except (DegenerateMetricError, ExpressionError, ValueError) as exc:
            raise ConfigError(f"map {name!r}: {exc}") from None


def load_config(path) -> Workspace:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return load_workspace(doc)


def catalog_document() -> dict:
    return json.loads(resources.files("goldprod").joinpath("data/catalog.json").read_text())


@lru_cache(maxsize=1)
def builtin_catalog() -> Workspace:
    return load_workspace(catalog_document())
