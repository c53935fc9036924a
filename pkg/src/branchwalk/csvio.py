"""Deterministic CSV output with a commented provenance header.

Every file written by the CLI starts with '#' metadata lines (schema name and
version, tool version, config hash) followed by one CSV header row and data
rows. Floats are rendered with %.17g so a reread reproduces the doubles
bit-exactly and reruns diff clean.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from . import __version__

#: bumped when any column set changes shape or meaning
SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """Metadata header missing or from an unsupported schema version."""


def format_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def render_csv(schema: str, config_hash: str, columns, rows,
               extra_meta=()) -> str:
    """Render one table to text. ``rows`` is an iterable of sequences."""
    buf = io.StringIO()
    buf.write(f"# schema: {schema} v{SCHEMA_VERSION}\n")
    buf.write(f"# tool: branchwalk {__version__}\n")
    buf.write(f"# config_hash: {config_hash}\n")
    for key, value in extra_meta:
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row width {len(row)} != header width {len(columns)}")
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(path, schema: str, config_hash: str, columns, rows,
              extra_meta=()) -> None:
    text = render_csv(schema, config_hash, columns, rows, extra_meta)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


@dataclass(frozen=True)
class CsvTable:
    schema: str
    schema_version: int
    meta: dict
    columns: tuple
    rows: tuple

    def column(self, name: str) -> list:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]


def read_csv(path_or_text) -> CsvTable:
    """Parse a file path or raw text back into (meta, header, typed rows).

    Numeric-looking cells come back as int or float; anything else stays str.
    """
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        text = path_or_text
    else:
        with open(path_or_text, "r", encoding="utf-8") as fh:
            text = fh.read()
    meta = {}
    body_lines = []
    for line in text.splitlines():
        if line.startswith("#"):
            stripped = line[1:].strip()
            key, sep, value = stripped.partition(":")
            if sep:
                meta[key.strip()] = value.strip()
        elif line:
            body_lines.append(line)
    if "schema" not in meta:
        raise SchemaError("missing '# schema:' header line")
    name, _, ver = meta["schema"].rpartition(" v")
    if not name or not ver.isdigit():
        raise SchemaError(f"malformed schema line {meta['schema']!r}")
    version = int(ver)
    if version > SCHEMA_VERSION:
        raise SchemaError(f"schema v{version} is newer than supported v{SCHEMA_VERSION}")
    parsed = list(csv.reader(body_lines))
    if not parsed:
        raise SchemaError("no header row after metadata")
    columns = tuple(parsed[0])
    rows = tuple(tuple(_coerce(cell) for cell in row) for row in parsed[1:])
    return CsvTable(schema=name, schema_version=version, meta=meta,
                    columns=columns, rows=rows)


def _coerce(cell: str):
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell
