import numpy as np
import pytest

from durlab.errors import ParseError
from durlab.kvfile import dump_kv, parse_kv, read_kv, to_matrix, to_vector, write_kv


def test_parse_comments_and_values():
    kv = parse_kv("# header\na = 1\n\nb = 1,2,3\n")
    assert kv == {"a": "1", "b": "1,2,3"}


def test_duplicate_key_reports_line():
    with pytest.raises(ParseError, match="line 2"):
        parse_kv("a = 1\na = 2\n")


def test_missing_equals():
    with pytest.raises(ParseError):
        parse_kv("just text\n")


def test_roundtrip(tmp_path):
    M = np.array([[1.0, 0.5], [0.5, 2.0]])
    write_kv({"v": np.array([0.1, 0.2]), "M": M, "n": 3, "flag": True}, tmp_path / "x.kv")
    kv = read_kv(tmp_path / "x.kv")
    np.testing.assert_array_equal(to_vector(kv["v"], "v"), [0.1, 0.2])
    np.testing.assert_array_equal(to_matrix(kv["M"], "M"), M)
    assert kv["n"] == "3" and kv["flag"] == "true"


def test_dump_is_deterministic():
    assert dump_kv({"a": 1.0, "b": "x"}) == "a = 1\nb = x\n"


def test_missing_file():
    with pytest.raises(ParseError):
        read_kv("/nonexistent/file.kv")
