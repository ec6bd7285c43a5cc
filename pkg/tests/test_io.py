import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hetdag import io


@given(X=arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 4)),
                elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_matrix_round_trip_is_bit_exact(tmp_path_factory, X):
    path = tmp_path_factory.mktemp("m") / "x.csv"
    io.write_matrix(path, X)
    Y, header = io.read_matrix(path)
    assert header is None
    np.testing.assert_array_equal(Y.view(np.uint64), X.view(np.uint64))


def test_header_detected(tmp_path):
    path = tmp_path / "h.csv"
    io.write_matrix(path, [[1.0, 2.0]], header=["a", "b"])
    X, header = io.read_matrix(path)
    assert header == ["a", "b"] and X.tolist() == [[1.0, 2.0]]


def test_parse_errors_carry_location(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,oops\n")
    with pytest.raises(io.ParseError, match=r"row 2, column 2"):
        io.read_matrix(path)
    path.write_text("1,2\n3\n")
    with pytest.raises(io.ParseError, match=r"row 2: expected 2 columns"):
        io.read_matrix(path)
    path.write_text("1,nan\n")
    with pytest.raises(io.ParseError, match="non-finite"):
        io.read_matrix(path)
    path.write_text("a,b\n")
    with pytest.raises(io.ParseError, match="no data"):
        io.read_matrix(path)


def test_missing_file_names_the_path(tmp_path):
    with pytest.raises(OSError, match="nope.csv"):
        io.read_matrix(tmp_path / "nope.csv")


def test_edges_round_trip(tmp_path):
    B = np.zeros((4, 4), dtype=int)
    B[0, 1] = B[3, 2] = 1
    path = tmp_path / "g.edges"
    io.write_edges(path, B)
    assert path.read_text() == "0 1\n3 2\n"
    np.testing.assert_array_equal(io.read_edges(path, 4), B)
    assert io.read_edges(path).shape == (4, 4)


def test_edge_parse_errors(tmp_path):
    path = tmp_path / "g.edges"
    path.write_text("0 1 2\n")
    with pytest.raises(io.ParseError, match="line 1"):
        io.read_edges(path)
    path.write_text("0 x\n")
    with pytest.raises(io.ParseError):
        io.read_edges(path)
    path.write_text("0 5\n")
    with pytest.raises(io.ParseError, match="out of range"):
        io.read_edges(path, n_nodes=3)


def test_json_errors(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{bad")
    with pytest.raises(io.ParseError, match="line 1"):
        io.read_json(path)
    io.write_json(path, {"b": 1, "a": [1.5]})
    assert io.read_json(path) == {"a": [1.5], "b": 1}
