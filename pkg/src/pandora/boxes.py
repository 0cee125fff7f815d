"""Columnar box data model: fields, values, foreign keys, and wire serialization.

A box is a named columnar relation; a box set groups boxes with foreign-key
links. Box sets are the common currency of the engine: converters produce
them, prompts render their schemas, and the execution sandbox receives them
over the wire format implemented here. All types are immutable in practice
(nothing mutates them after construction) and safe to share across threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

# A cell payload: text, a number (int and float kept distinct), a boolean,
# or None for a missing value. None maps to JSON null on the wire.
Value = str | int | float | bool | None

_IDENT_RE = re.compile(r"[a-z_][a-z0-9_]*\Z")
_NON_ALNUM_RE = re.compile(r"[^a-z0-9]+")
_INT_RE = re.compile(r"[+-]?[0-9]+\Z")
_FLOAT_RE = re.compile(r"[+-]?(?:[0-9]+\.[0-9]*|\.[0-9]+|[0-9]+)(?:[eE][+-]?[0-9]+)?\Z")


class EmptyLabel(ValueError):
    """A field or table label was empty after trimming."""


class InvalidBox(ValueError):
    """A box or box set violates a structural invariant."""


class FieldName:
    """A sanitized identifier plus the verbatim source label.

    Equality and hashing use only the canonical identifier; the original
    label is display metadata and is not carried on the wire.
    """

    __slots__ = ("canonical", "original")

    def __init__(self, canonical: str, original: str | None = None):
        self.canonical = canonical
        self.original = canonical if original is None else original

    def __eq__(self, other: object) -> bool:
        if isinstance(other, FieldName):
            return self.canonical == other.canonical
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.canonical)

    def __repr__(self) -> str:
        if self.original != self.canonical:
            return f"FieldName({self.canonical!r}, original={self.original!r})"
        return f"FieldName({self.canonical!r})"


def sanitize_field(label: str, taken: set[str]) -> FieldName:
    """Turn a raw label into a unique snake_case identifier.

    Lowercase, collapse every non-alphanumeric run to one underscore, trim
    leading/trailing underscores, and prefix ``f_`` when the result starts
    with a digit. A label that reduces to nothing becomes ``f``. Collisions
    with `taken` get the first free ``_2``, ``_3``, ... suffix; the chosen
    name is added to `taken`.
    """
    if not label.strip():
        raise EmptyLabel("field label is empty")
    base = _NON_ALNUM_RE.sub("_", label.lower()).strip("_")
    if not base:
        base = "f"
    elif base[0].isdigit():
        base = "f_" + base
    name = base
    suffix = 2
    while name in taken:
        name = f"{base}_{suffix}"
        suffix += 1
    taken.add(name)
    return FieldName(name, label)


def parse_cell(text: str) -> Value:
    """Apply the eager number rule to a raw cell string.

    A cell that is an integer or float in full becomes a number (int and
    float distinguished); a blank cell becomes a missing value; anything
    else stays text, verbatim.
    """
    stripped = text.strip()
    if not stripped:
        return None
    if _INT_RE.match(stripped):
        return int(stripped)
    if _FLOAT_RE.match(stripped):
        return float(stripped)
    return text


@dataclass
class Box:
    """A named columnar relation with row-aligned columns."""

    name: FieldName
    fields: list[FieldName]
    columns: dict[str, list[Value]]
    row_count: int

    @classmethod
    def from_columns(
        cls, name: FieldName, fields: list[FieldName], columns: dict[str, list[Value]]
    ) -> "Box":
        row_count = len(columns[fields[0].canonical]) if fields else 0
        box = cls(name=name, fields=fields, columns=columns, row_count=row_count)
        box.validate()
        return box

    def validate(self) -> None:
        if not self.name.canonical or not _IDENT_RE.match(self.name.canonical):
            raise InvalidBox(f"bad box name {self.name.canonical!r}")
        seen: set[str] = set()
        for f in self.fields:
            if not _IDENT_RE.match(f.canonical):
                raise InvalidBox(f"bad field name {f.canonical!r} in box {self.name.canonical}")
            if f.canonical in seen:
                raise InvalidBox(f"duplicate field {f.canonical!r} in box {self.name.canonical}")
            seen.add(f.canonical)
        if seen != set(self.columns):
            raise InvalidBox(
                f"field list and column keys differ in box {self.name.canonical}: "
                f"{sorted(seen)} vs {sorted(self.columns)}"
            )
        for key, col in self.columns.items():
            if len(col) != self.row_count:
                raise InvalidBox(
                    f"column {key!r} of box {self.name.canonical} has {len(col)} "
                    f"values, expected {self.row_count}"
                )

    def rows(self) -> list[list[Value]]:
        cols = [self.columns[f.canonical] for f in self.fields]
        return [list(r) for r in zip(*cols)] if cols else []


@dataclass(frozen=True)
class ForeignKey:
    """A link between two (box, field) endpoints."""

    src: tuple[str, str]
    dst: tuple[str, str]


@dataclass
class BoxSet:
    """An ordered collection of boxes plus their foreign-key links."""

    boxes: list[Box]
    foreign_keys: list[ForeignKey] = field(default_factory=list)

    def validate(self) -> None:
        names: set[str] = set()
        for box in self.boxes:
            box.validate()
            if box.name.canonical in names:
                raise InvalidBox(f"duplicate box name {box.name.canonical!r}")
            names.add(box.name.canonical)
        by_name = {b.name.canonical: b for b in self.boxes}
        for fk in self.foreign_keys:
            if fk.src == fk.dst:
                raise InvalidBox(f"self-referential foreign key {fk}")
            for box_name, field_name in (fk.src, fk.dst):
                box = by_name.get(box_name)
                if box is None or field_name not in box.columns:
                    raise InvalidBox(f"foreign key endpoint {box_name}.{field_name} unresolved")

    def box(self, name: str) -> Box:
        for b in self.boxes:
            if b.name.canonical == name:
                return b
        raise KeyError(name)


def _display(name: FieldName) -> str:
    # Show the raw label only when it carries information the identifier
    # lost (i.e. beyond case folding).
    if name.original.lower() != name.canonical:
        return f"{name.canonical} ({name.original})"
    return name.canonical


def render_schema(box_set: BoxSet, sample_values: int = 0) -> str:
    """Render a deterministic, values-free schema listing for prompts.

    One line per box with its ordered field identifiers, optionally followed
    by up to `sample_values` sample values per field, then one line per
    foreign key. Byte-identical output for identical input.
    """
    lines: list[str] = []
    for box in box_set.boxes:
        fields = ", ".join(_display(f) for f in box.fields)
        lines.append(f"Box {_display(box.name)}({fields})")
        if sample_values > 0:
            for f in box.fields:
                sample = box.columns[f.canonical][:sample_values]
                rendered = ", ".join(json.dumps(v, ensure_ascii=False) for v in sample)
                lines.append(f"  {f.canonical}: {rendered}")
    for fk in box_set.foreign_keys:
        lines.append(f"FK: {fk.src[0]}.{fk.src[1]} = {fk.dst[0]}.{fk.dst[1]}")
    return "\n".join(lines)


def boxset_to_obj(box_set: BoxSet) -> dict:
    """Build the wire-format object for a box set (see `serialize_boxset`)."""
    return {
        "boxes": [
            {
                "name": box.name.canonical,
                "fields": [f.canonical for f in box.fields],
                "columns": {f.canonical: box.columns[f.canonical] for f in box.fields},
            }
            for box in box_set.boxes
        ],
        "foreign_keys": [
            {"from": list(fk.src), "to": list(fk.dst)} for fk in box_set.foreign_keys
        ],
    }


def serialize_boxset(box_set: BoxSet) -> bytes:
    """Serialize to compact UTF-8 JSON; lossless through `parse_boxset`."""
    return json.dumps(
        boxset_to_obj(box_set), ensure_ascii=False, separators=(",", ":"), allow_nan=False
    ).encode("utf-8")


def _check_value(v: object, where: str) -> Value:
    if v is None or isinstance(v, (str, int, float, bool)):
        return v
    raise InvalidBox(f"unsupported value {v!r} in {where}")


def boxset_from_obj(obj: dict) -> BoxSet:
    """Rebuild a box set from its wire-format object."""
    boxes = []
    for box_obj in obj.get("boxes", []):
        name = FieldName(box_obj["name"])
        fields = [FieldName(f) for f in box_obj["fields"]]
        columns = {
            f.canonical: [
                _check_value(v, f"{box_obj['name']}.{f.canonical}")
                for v in box_obj["columns"][f.canonical]
            ]
            for f in fields
        }
        boxes.append(Box.from_columns(name, fields, columns))
    fks = [
        ForeignKey(src=tuple(fk["from"]), dst=tuple(fk["to"]))
        for fk in obj.get("foreign_keys", [])
    ]
    box_set = BoxSet(boxes=boxes, foreign_keys=fks)
    box_set.validate()
    return box_set


def parse_boxset(data: bytes | str) -> BoxSet:
    """Inverse of `serialize_boxset`."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    obj = json.loads(data)
    if not isinstance(obj, dict):
        raise InvalidBox("box set wire payload must be a JSON object")
    return boxset_from_obj(obj)
