"""CSV layer: commented metadata header, exact float text, typed reread.

Oracles: the render/read round trip must reproduce ints and doubles
bit-exactly (%.17g is lossless for IEEE doubles), and the version gate must
refuse files from a newer schema while accepting current and older ones.
"""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from branchwalk import __version__
from branchwalk.csvio import (
    SCHEMA_VERSION,
    SchemaError,
    format_value,
    read_csv,
    render_csv,
    write_csv,
)


# ---------------------------------------------------------------------------
# value formatting
# ---------------------------------------------------------------------------


def test_bools_render_as_bits_not_floats():
    assert format_value(True) == "1"
    assert format_value(False) == "0"


def test_floats_render_shortest_exact():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(1.0) == "1"
    assert float(format_value(math.pi)) == math.pi


def test_ints_and_strings_pass_through():
    assert format_value(42) == "42"
    assert format_value("abc") == "abc"


@given(st.floats(allow_nan=False))
def test_float_text_round_trips_bit_exactly(x):
    assert float(format_value(x)) == x


@given(st.integers(min_value=-(1 << 63), max_value=(1 << 63) - 1))
def test_int_text_round_trips(n):
    assert int(format_value(n)) == n


# ---------------------------------------------------------------------------
# render
# ---------------------------------------------------------------------------


def test_header_layout():
    text = render_csv("demo", "cafe" * 16, ("a", "b"), [(1, 2.5)],
                      extra_meta=(("note", "hello"),))
    lines = text.splitlines()
    assert lines[0] == f"# schema: demo v{SCHEMA_VERSION}"
    assert lines[1] == f"# tool: branchwalk {__version__}"
    assert lines[2] == "# config_hash: " + "cafe" * 16
    assert lines[3] == "# note: hello"
    assert lines[4] == "a,b"
    assert lines[5] == "1,2.5"


def test_row_width_is_enforced():
    with pytest.raises(ValueError, match="width"):
        render_csv("demo", "x" * 64, ("a", "b"), [(1,)])


def test_cells_with_commas_survive_quoting():
    text = render_csv("demo", "x" * 64, ("label", "k"), [("a,b", 1)])
    table = read_csv(text)
    assert table.rows == (("a,b", 1),)


# ---------------------------------------------------------------------------
# read
# ---------------------------------------------------------------------------


def test_file_round_trip_types_and_meta(tmp_path):
    rows = [(0, 0.1, "ok", True), (1, -2.5e-300, "no", False)]
    path = tmp_path / "t.csv"
    write_csv(path, "demo", "f" * 64, ("i", "x", "tag", "flag"), rows,
              extra_meta=(("n", "7"),))
    table = read_csv(path)
    assert table.schema == "demo"
    assert table.schema_version == SCHEMA_VERSION
    assert table.meta["config_hash"] == "f" * 64
    assert table.meta["n"] == "7"
    assert table.columns == ("i", "x", "tag", "flag")
    # bools were rendered as 0/1 so they reread as ints; floats bit-exact
    assert table.rows == ((0, 0.1, "ok", 1), (1, -2.5e-300, "no", 0))
    assert table.column("x") == [0.1, -2.5e-300]


def test_missing_schema_header_is_refused():
    with pytest.raises(SchemaError, match="schema"):
        read_csv("# tool: branchwalk 0\na,b\n1,2\n")


def test_newer_schema_version_is_refused():
    newer = SCHEMA_VERSION + 1
    text = f"# schema: demo v{newer}\na\n1\n"
    with pytest.raises(SchemaError, match="newer"):
        read_csv(text)


def test_malformed_schema_line_is_refused():
    with pytest.raises(SchemaError, match="malformed"):
        read_csv("# schema: demo\na\n1\n")


def test_empty_body_is_refused():
    with pytest.raises(SchemaError, match="header row"):
        read_csv("# schema: demo v1\n")


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(min_value=-(1 << 53), max_value=1 << 53),
                          st.floats(allow_nan=False, allow_infinity=False)),
                max_size=20))
def test_render_read_round_trip(rows):
    text = render_csv("demo", "0" * 64, ("n", "x"), rows)
    table = read_csv(text)
    assert list(table.rows) == [tuple(row) for row in rows]
