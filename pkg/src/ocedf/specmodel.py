"""Parsing and validation of the declarative project spec.

A project spec bundles the design artifacts that drive extraction: the
conceptual schema (object types, is-a edges, object-to-object relation
types), the question-to-object-type matrix, the extraction matrix with
per-activity object multiplicities, the prioritization plan, and the
source-to-log mapping rules. The on-disk form is a single JSON document
with sections ``schema``, ``questions``, ``q2ot``, ``extraction_matrix``,
``plan``, ``mappings`` plus an optional ``extraction_epoch``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Any

from .errors import SpecError
from .extraction import E2ORule, EventRule, MappingRule, O2ORule, ObjectRule
from .timeutil import parse_iso

DEFAULT_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

_MULTIPLICITY = re.compile(r"^(\d+)(?:\.\.(\d+|\*))?$")


@dataclass(frozen=True)
class MultiplicityRange:
    """Closed integer interval; ``max`` is None for an unbounded upper end."""

    min: int
    max: int | None

    def contains(self, n: int) -> bool:
        return n >= self.min and (self.max is None or n <= self.max)

    def canonical(self) -> str:
        if self.max is None:
            return f"{self.min}..*"
        if self.min == self.max:
            return str(self.min)
        return f"{self.min}..{self.max}"


ZERO = MultiplicityRange(0, 0)


def parse_multiplicity(text: str) -> MultiplicityRange:
    """Parse ``1``, ``0..1``, ``1..*`` style quantity ranges."""
    m = _MULTIPLICITY.match(text.strip())
    if not m:
        raise SpecError(f"invalid multiplicity syntax {text!r}")
    lo = int(m.group(1))
    hi_raw = m.group(2)
    if hi_raw is None:
        return MultiplicityRange(lo, lo)
    if hi_raw == "*":
        return MultiplicityRange(lo, None)
    hi = int(hi_raw)
    if lo > hi:
        raise SpecError(f"inverted range {text!r}: min exceeds max")
    return MultiplicityRange(lo, hi)


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    priority: int


@dataclass
class ConceptualSchema:
    """Object types with is-a edges, o2o relation types, and discriminators."""

    object_types: tuple[str, ...]
    is_a: tuple[tuple[str, str], ...] = ()  # (subtype, supertype)
    o2o_types: tuple[tuple[str, str, str], ...] = ()
    discriminators: dict[str, str] = field(default_factory=dict)

    def parent_of(self, name: str) -> str | None:
        for sub, sup in self.is_a:
            if sub == name:
                return sup
        return None

    def subtypes_of(self, name: str) -> list[str]:
        return [sub for sub, sup in self.is_a if sup == name]

    def root_of(self, name: str) -> str:
        """Topmost supertype reachable from ``name`` (itself when plain)."""
        current = name
        for _ in range(len(self.object_types) + 1):
            parent = self.parent_of(current)
            if parent is None:
                return current
            current = parent
        raise SpecError(f"is-a cycle reached from {name!r}")

    def ancestors_of(self, name: str) -> list[str]:
        out = []
        current = self.parent_of(name)
        hops = 0
        while current is not None and hops <= len(self.object_types):
            out.append(current)
            current = self.parent_of(current)
            hops += 1
        return out

    def descendants_of(self, name: str) -> list[str]:
        out = []
        frontier = [name]
        while frontier:
            here = frontier.pop()
            for sub in self.subtypes_of(here):
                if sub not in out:
                    out.append(sub)
                    frontier.append(sub)
        return out

    def stored_types(self) -> list[str]:
        """Types objects are stored under: every type that is not a subtype."""
        subs = {sub for sub, _ in self.is_a}
        return [t for t in self.object_types if t not in subs]


@dataclass
class Q2OTMatrix:
    questions: tuple[Question, ...]
    marks: frozenset[tuple[str, str]]  # (question id, object type)

    def types_for(self, question_id: str) -> set[str]:
        return {t for q, t in self.marks if q == question_id}


@dataclass
class ExtractionMatrix:
    """Activities x object types; each present cell is a multiplicity range.

    An absent cell reads as 0..0 (the relation is forbidden), except for
    hierarchy columns whose family carries the expectation at another
    level; verification resolves that.
    """

    columns: tuple[str, ...]
    activities: tuple[str, ...]
    cells: dict[tuple[str, str], MultiplicityRange]

    def cell(self, activity: str, column: str) -> MultiplicityRange | None:
        return self.cells.get((activity, column))


@dataclass
class ProjectSpec:
    schema: ConceptualSchema
    q2ot: Q2OTMatrix
    xmatrix: ExtractionMatrix
    plan: tuple[str, ...]
    mappings: tuple[MappingRule, ...]
    extraction_epoch: datetime = DEFAULT_EPOCH


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity.upper()} {self.path} {self.message}"


# -- structural parsing ------------------------------------------------------


def _require(cond: bool, message: str, path: str) -> None:
    if not cond:
        raise SpecError(message, path)


def _parse_schema(raw: Any) -> ConceptualSchema:
    _require(isinstance(raw, dict), "schema section must be an object", "schema")
    types = raw.get("object_types", [])
    _require(isinstance(types, list) and types, "object_types must be a non-empty list", "schema.object_types")
    seen = set()
    for t in types:
        _require(isinstance(t, str) and t, "object type names must be non-empty strings", "schema.object_types")
        _require(t not in seen, f"duplicate object type {t!r}", "schema.object_types")
        seen.add(t)

    is_a = []
    for i, edge in enumerate(raw.get("is_a", [])):
        _require(isinstance(edge, (list, tuple)) and len(edge) == 2,
                 "is_a edges are [subtype, supertype] pairs", f"schema.is_a[{i}]")
        is_a.append((edge[0], edge[1]))

    o2o = []
    for i, entry in enumerate(raw.get("o2o_types", [])):
        _require(isinstance(entry, (list, tuple)) and len(entry) == 3,
                 "o2o_types entries are [source, target, qualifier]", f"schema.o2o_types[{i}]")
        o2o.append((entry[0], entry[1], entry[2]))

    disc = raw.get("discriminators", {})
    _require(isinstance(disc, dict), "discriminators must map supertype to attribute name", "schema.discriminators")
    return ConceptualSchema(tuple(types), tuple(is_a), tuple(o2o), dict(disc))


def _parse_questions(raw: Any) -> tuple[Question, ...]:
    out = []
    seen = set()
    for i, entry in enumerate(raw or []):
        path = f"questions[{i}]"
        _require(isinstance(entry, dict), "question entries must be objects", path)
        qid = entry.get("id")
        _require(isinstance(qid, str) and qid, "question id must be a non-empty string", path)
        _require(qid not in seen, f"duplicate question id {qid!r}", path)
        seen.add(qid)
        priority = entry.get("priority", i + 1)
        _require(isinstance(priority, int) and priority >= 1, "priority must be a positive integer", path)
        out.append(Question(qid, str(entry.get("text", "")), priority))
    return tuple(out)


def _parse_q2ot(raw: Any, questions: tuple[Question, ...]) -> Q2OTMatrix:
    marks = set()
    raw = raw or {}
    _require(isinstance(raw, dict), "q2ot must map question id to a list of object types", "q2ot")
    for qid, types in raw.items():
        _require(isinstance(types, list), "q2ot entries must be lists of object type names", f"q2ot.{qid}")
        for t in types:
            marks.add((qid, t))
    return Q2OTMatrix(questions, frozenset(marks))


def _parse_xmatrix(raw: Any) -> ExtractionMatrix:
    _require(isinstance(raw, dict), "extraction_matrix section must be an object", "extraction_matrix")
    columns = raw.get("columns", [])
    _require(isinstance(columns, list) and columns, "columns must be a non-empty list", "extraction_matrix.columns")
    _require(len(set(columns)) == len(columns), "duplicate column names", "extraction_matrix.columns")
    rows = raw.get("rows", {})
    _require(isinstance(rows, dict) and rows, "rows must map activity to cell ranges", "extraction_matrix.rows")
    cells: dict[tuple[str, str], MultiplicityRange] = {}
    for activity, row in rows.items():
        _require(isinstance(row, dict), "each row must map object type to a range string",
                 f"extraction_matrix.rows.{activity}")
        for col, text in row.items():
            path = f"extraction_matrix.rows.{activity}.{col}"
            _require(col in columns, f"cell references unknown column {col!r}", path)
            try:
                cells[(activity, col)] = parse_multiplicity(str(text))
            except SpecError as exc:
                raise SpecError(str(exc), path) from None
    return ExtractionMatrix(tuple(columns), tuple(rows.keys()), cells)


def _parse_plan(raw: Any) -> tuple[str, ...]:
    raw = raw or []
    _require(isinstance(raw, list), "plan must be a list of activity names", "plan")
    seen = set()
    for a in raw:
        _require(isinstance(a, str), "plan entries must be strings", "plan")
        _require(a not in seen, f"activity {a!r} listed twice in plan", "plan")
        seen.add(a)
    return tuple(raw)


def _str_or_none(raw: dict, key: str) -> str | None:
    value = raw.get(key)
    return value if isinstance(value, str) and value else None


def _parse_mapping(raw: Any, index: int) -> MappingRule:
    path = f"mappings[{index}]"
    _require(isinstance(raw, dict), "mapping rules must be objects", path)
    kind = raw.get("kind")
    table = raw.get("source_table")
    _require(isinstance(table, str) and table, "mapping rule needs a source_table", path)
    attrs = raw.get("attributes", {})
    _require(isinstance(attrs, dict), "attributes must map attribute name to column", path)

    if kind == "object":
        _require(bool(_str_or_none(raw, "id_column")), "object rule needs id_column", path)
        _require(bool(_str_or_none(raw, "object_type")), "object rule needs object_type", path)
        return ObjectRule(
            source_table=table,
            id_column=raw["id_column"],
            object_type=raw["object_type"],
            subtype_column=_str_or_none(raw, "subtype_column"),
            attribute_columns=dict(attrs),
            attribute_time_column=_str_or_none(raw, "attribute_time_column"),
        )
    if kind == "event":
        activity = _str_or_none(raw, "activity")
        activity_column = _str_or_none(raw, "activity_column")
        _require((activity is None) != (activity_column is None),
                 "event rule needs exactly one of activity / activity_column", path)
        _require(bool(_str_or_none(raw, "time_column")), "event rule needs time_column", path)
        _require(bool(_str_or_none(raw, "time_format")), "event rule needs time_format", path)
        return EventRule(
            source_table=table,
            time_column=raw["time_column"],
            time_format=raw["time_format"],
            activity=activity,
            activity_column=activity_column,
            id_column=_str_or_none(raw, "id_column"),
            attribute_columns=dict(attrs),
        )
    if kind == "o2o":
        _require(bool(_str_or_none(raw, "source_id_column")), "o2o rule needs source_id_column", path)
        _require(bool(_str_or_none(raw, "target_id_column")), "o2o rule needs target_id_column", path)
        return O2ORule(
            source_table=table,
            source_id_column=raw["source_id_column"],
            target_id_column=raw["target_id_column"],
            qualifier=str(raw.get("qualifier", "")),
        )
    if kind == "e2o":
        _require(bool(_str_or_none(raw, "object_id_column")), "e2o rule needs object_id_column", path)
        return E2ORule(
            source_table=table,
            object_id_column=raw["object_id_column"],
            event_id_column=_str_or_none(raw, "event_id_column"),
            qualifier=str(raw.get("qualifier", "")),
        )
    raise SpecError(f"unknown mapping rule kind {kind!r}", path)


def parse_spec_document(doc: Any) -> ProjectSpec:
    """Structural parse of a spec document; raises SpecError with a path.

    Cross-reference validation lives in :func:`validate_spec`; use
    :func:`parse_spec` to get both.
    """
    _require(isinstance(doc, dict), "spec document must be a JSON object", "")
    for key in ("schema", "extraction_matrix"):
        _require(key in doc, f"missing required section {key!r}", key)

    schema = _parse_schema(doc["schema"])
    questions = _parse_questions(doc.get("questions"))
    q2ot = _parse_q2ot(doc.get("q2ot"), questions)
    xmatrix = _parse_xmatrix(doc["extraction_matrix"])
    plan = _parse_plan(doc.get("plan"))
    mappings = tuple(_parse_mapping(m, i) for i, m in enumerate(doc.get("mappings", [])))

    epoch = DEFAULT_EPOCH
    if doc.get("extraction_epoch"):
        try:
            epoch = parse_iso(str(doc["extraction_epoch"]))
        except Exception as exc:
            raise SpecError(str(exc), "extraction_epoch") from None

    return ProjectSpec(schema, q2ot, xmatrix, plan, mappings, epoch)


# -- validation ---------------------------------------------------------------


def _hierarchy_errors(schema: ConceptualSchema) -> list[Diagnostic]:
    out = []
    declared = set(schema.object_types)
    parents: dict[str, str] = {}
    for i, (sub, sup) in enumerate(schema.is_a):
        path = f"schema.is_a[{i}]"
        for name in (sub, sup):
            if name not in declared:
                out.append(Diagnostic("error", path, f"is_a references undeclared type {name!r}"))
        if sub in parents:
            out.append(Diagnostic("error", path, f"subtype {sub!r} has two supertypes"))
        else:
            parents[sub] = sup

    # cycle check via parent-chain walking
    known_cyclic: set[str] = set()
    for start in parents:
        if start in known_cyclic:
            continue
        seen = {start}
        current = parents.get(start)
        while current is not None:
            if current in seen:
                known_cyclic.update(seen)
                out.append(Diagnostic("error", "schema.is_a", f"is-a cycle involving {current!r}"))
                break
            seen.add(current)
            current = parents.get(current)

    has_cycle = any("cycle" in d.message for d in out)
    if not has_cycle:
        for sup in sorted({sup for _, sup in schema.is_a}):
            if sup in declared and sup not in schema.discriminators:
                out.append(Diagnostic("error", "schema.discriminators",
                                      f"supertype {sup!r} has no discriminator attribute"))
    return out


def validate_spec(spec: ProjectSpec) -> list[Diagnostic]:
    """Cross-validate a parsed spec; returns diagnostics, errors first."""
    out: list[Diagnostic] = []
    schema = spec.schema
    declared = set(schema.object_types)

    out.extend(_hierarchy_errors(schema))
    cyclic = any(d.severity == "error" and "cycle" in d.message for d in out)

    for i, (src, tgt, _q) in enumerate(schema.o2o_types):
        for name in (src, tgt):
            if name not in declared:
                out.append(Diagnostic("error", f"schema.o2o_types[{i}]",
                                      f"o2o relation type references undeclared type {name!r}"))

    question_ids = {q.id for q in spec.q2ot.questions}
    for qid, otype in sorted(spec.q2ot.marks):
        if qid not in question_ids:
            out.append(Diagnostic("error", f"q2ot.{qid}", f"mark references undeclared question {qid!r}"))
        if otype not in declared:
            out.append(Diagnostic("error", f"q2ot.{qid}", f"mark references undeclared type {otype!r}"))

    for col in spec.xmatrix.columns:
        if col not in declared:
            out.append(Diagnostic("error", "extraction_matrix.columns",
                                  f"column references undeclared type {col!r}"))

    # supertype/subtype exclusivity: a row may scope an expectation at the
    # supertype level or at subtype level, never both at once
    if not cyclic:
        for activity in spec.xmatrix.activities:
            for sup in sorted({sup for _, sup in schema.is_a}):
                if sup not in spec.xmatrix.columns or sup not in declared:
                    continue
                sup_cell = spec.xmatrix.cell(activity, sup)
                if sup_cell is None or (sup_cell.max == 0):
                    continue
                for sub in schema.descendants_of(sup):
                    sub_cell = spec.xmatrix.cell(activity, sub)
                    if sub_cell is not None and sub_cell.max != 0:
                        out.append(Diagnostic(
                            "error", f"extraction_matrix.rows.{activity}",
                            f"both supertype {sup!r} and subtype {sub!r} carry nonzero ranges"))

    for activity in spec.plan:
        if activity not in spec.xmatrix.activities:
            out.append(Diagnostic("error", "plan", f"plan lists unknown activity {activity!r}"))

    for i, rule in enumerate(spec.mappings):
        path = f"mappings[{i}]"
        if isinstance(rule, ObjectRule):
            if rule.object_type not in declared:
                out.append(Diagnostic("error", path, f"object rule maps undeclared type {rule.object_type!r}"))
            elif not cyclic:
                root = schema.root_of(rule.object_type)
                needs_discriminator = rule.subtype_column is not None or root != rule.object_type
                if needs_discriminator and root not in schema.discriminators:
                    out.append(Diagnostic("error", path,
                                          f"rule needs a discriminator on supertype {root!r}"))
        elif isinstance(rule, EventRule) and rule.activity is not None:
            if rule.activity not in spec.xmatrix.activities:
                out.append(Diagnostic("error", path,
                                      f"event rule activity {rule.activity!r} is not an extraction matrix row"))

    # warnings: leaf types no question ever asks about (candidates for the
    # next modeling iteration)
    if not cyclic:
        marked = {t for _, t in spec.q2ot.marks}
        parents = {sup for _, sup in schema.is_a}
        for t in schema.object_types:
            if t in parents:
                continue
            if t not in marked:
                out.append(Diagnostic("warning", "q2ot", f"object type {t!r} is not marked by any question"))

    out.sort(key=lambda d: (0 if d.severity == "error" else 1))
    return out


def parse_spec(document: dict | str | Path | IO[str]) -> ProjectSpec:
    """Parse and fully cross-validate a project spec.

    ``document`` may be an already-loaded dict, a filesystem path, or an
    open text file. Raises SpecError carrying the first failure's path.
    """
    if isinstance(document, dict):
        doc = document
    else:
        raw = document.read() if hasattr(document, "read") else Path(document).read_text(encoding="utf-8")
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SpecError(f"malformed JSON: {exc}") from None
    spec = parse_spec_document(doc)
    errors = [d for d in validate_spec(spec) if d.severity == "error"]
    if errors:
        listing = "; ".join(f"{d.path}: {d.message}" for d in errors)
        raise SpecError(f"{len(errors)} validation error(s): {listing}")
    return spec


def extraction_order(spec: ProjectSpec) -> list[str]:
    """Planned activity order, with unplanned activities appended in matrix row order."""
    ordered = list(spec.plan)
    ordered.extend(a for a in spec.xmatrix.activities if a not in spec.plan)
    return ordered
