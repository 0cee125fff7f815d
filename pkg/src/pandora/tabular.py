"""Table and database ingestion: file loading and conversion to boxes.

Tables map one-to-one onto boxes (column -> field, cell -> value); databases
map onto box sets with their declared foreign keys carried over. Loaders are
pure functions over file contents, so concurrent ingestion is safe.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .boxes import Box, BoxSet, FieldName, ForeignKey, parse_cell, sanitize_field


class ParseError(ValueError):
    """A source file failed to parse; message carries location diagnostics."""


class RaggedRow(ParseError):
    """A data row's width does not match the header."""


class BadForeignKey(ValueError):
    """A declared foreign-key endpoint does not resolve."""


@dataclass
class TableSource:
    """An in-memory table: raw labels and raw cell strings."""

    name: str | None
    column_labels: list[str]
    rows: list[list[str]]

    def validate(self) -> None:
        width = len(self.column_labels)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise RaggedRow(f"row {i + 1} has {len(row)} cells, expected {width}")


@dataclass
class DatabaseSource:
    """A set of tables plus foreign keys as ((table idx, label), (table idx, label))."""

    tables: list[TableSource]
    foreign_keys: list[tuple[tuple[int, str], tuple[int, str]]] = field(default_factory=list)


def table_to_box(table: TableSource) -> Box:
    """Convert a table to a single box.

    Fields are the sanitized column labels in order; column k holds the k-th
    cell of every row in order (numbers parsed eagerly, blanks to missing).
    The box is named after the table, or ``table`` when the name is absent.
    """
    table.validate()
    name = sanitize_field(table.name, set()) if table.name else FieldName("table", "table")
    taken: set[str] = set()
    fields = [sanitize_field(label, taken) for label in table.column_labels]
    columns: dict[str, list] = {f.canonical: [] for f in fields}
    for row in table.rows:
        for f, cell in zip(fields, row):
            columns[f.canonical].append(parse_cell(cell))
    return Box.from_columns(name, fields, columns)


def db_to_boxset(db: DatabaseSource) -> BoxSet:
    """Convert a database to a box set, one box per table, foreign keys kept."""
    boxes = []
    field_maps: list[dict[str, str]] = []  # per table: raw label -> canonical
    box_names: set[str] = set()
    for table in db.tables:
        box = table_to_box(table)
        # Dedup box names across the set the same way field names dedup.
        if box.name.canonical in box_names:
            box = Box(
                name=sanitize_field(box.name.original, box_names),
                fields=box.fields,
                columns=box.columns,
                row_count=box.row_count,
            )
        else:
            box_names.add(box.name.canonical)
        boxes.append(box)
        mapping: dict[str, str] = {}
        for label, f in zip(table.column_labels, box.fields):
            mapping.setdefault(label, f.canonical)
        field_maps.append(mapping)

    fks = []
    for (src_t, src_col), (dst_t, dst_col) in db.foreign_keys:
        for t, col in ((src_t, src_col), (dst_t, dst_col)):
            if not 0 <= t < len(db.tables) or col not in field_maps[t]:
                raise BadForeignKey(f"endpoint table {t} column {col!r} does not resolve")
        fks.append(
            ForeignKey(
                src=(boxes[src_t].name.canonical, field_maps[src_t][src_col]),
                dst=(boxes[dst_t].name.canonical, field_maps[dst_t][dst_col]),
            )
        )
    box_set = BoxSet(boxes=boxes, foreign_keys=fks)
    box_set.validate()
    return box_set


def load_table(path: str | Path, format: str | None = None) -> TableSource:
    """Load a table from CSV (header row required) or table JSON.

    CSV tables are named after the file stem; JSON tables carry an optional
    ``name`` key. The format is inferred from the extension when not given.
    """
    path = Path(path)
    if format is None:
        format = "json" if path.suffix.lower() == ".json" else "csv"
    if format == "csv":
        return _load_csv(path)
    if format == "json":
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
        return _table_from_obj(obj, str(path))
    raise ParseError(f"unknown table format {format!r}")


def _load_csv(path: Path) -> TableSource:
    with open(path, newline="", encoding="utf-8") as fp:
        reader = csv.reader(fp)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row required") from None
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise RaggedRow(
                    f"{path}: line {reader.line_num} has {len(row)} cells, "
                    f"expected {len(header)}"
                )
            rows.append(row)
    return TableSource(name=path.stem, column_labels=header, rows=rows)


def _coerce_cell(v: object, where: str) -> str:
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return str(v)
    raise ParseError(f"{where}: cell {v!r} is not a scalar")


def _table_from_obj(obj: dict, where: str) -> TableSource:
    if not isinstance(obj, dict) or "columns" not in obj or "rows" not in obj:
        raise ParseError(f"{where}: table JSON needs 'columns' and 'rows'")
    labels = [str(c) for c in obj["columns"]]
    rows = []
    for i, row in enumerate(obj["rows"]):
        if len(row) != len(labels):
            raise RaggedRow(f"{where}: row {i + 1} has {len(row)} cells, expected {len(labels)}")
        rows.append([_coerce_cell(c, f"{where} row {i + 1}") for c in row])
    return TableSource(name=obj.get("name"), column_labels=labels, rows=rows)


def load_database(path: str | Path) -> DatabaseSource:
    """Load a database JSON file: tables plus name-addressed foreign keys."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(obj, dict) or "tables" not in obj:
        raise ParseError(f"{path}: database JSON needs a 'tables' list")
    tables = [_table_from_obj(t, f"{path} table {i + 1}") for i, t in enumerate(obj["tables"])]
    index = {t.name: i for i, t in enumerate(tables) if t.name}
    fks = []
    for fk in obj.get("foreign_keys", []):
        endpoints = []
        for key in ("from", "to"):
            table_name, col = fk[key]
            if table_name not in index:
                raise ParseError(f"{path}: foreign key references unknown table {table_name!r}")
            endpoints.append((index[table_name], col))
        fks.append((endpoints[0], endpoints[1]))
    return DatabaseSource(tables=tables, foreign_keys=fks)
