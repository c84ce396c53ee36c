import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gmminit.core import GmmParams
from gmminit.io import (
    CsvFormatError,
    gmm_from_dict,
    gmm_to_dict,
    read_dataset_csv,
    read_gmm_json,
    write_dataset_csv,
    write_gmm_json,
)

from conftest import random_spd


def test_plain_csv(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1,2\n3.5,-4e-3\n\n5,6\n")
    data, labels, header = read_dataset_csv(p)
    np.testing.assert_array_equal(data, [[1, 2], [3.5, -4e-3], [5, 6]])
    assert labels is None and header is None


def test_header_and_label_columns(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b,cls\n1,2,0\n3,4,1\n5,6,-1\n")
    data, labels, header = read_dataset_csv(p, ["cls"])
    assert header == ["a", "b", "cls"]
    np.testing.assert_array_equal(data, [[1, 2], [3, 4], [5, 6]])
    np.testing.assert_array_equal(labels, [0, 1, -1])
    by_index, _, _ = read_dataset_csv(p, [-1])
    np.testing.assert_array_equal(by_index, data)


def test_unflagged_label_text_is_an_error(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1,2,red\n3,4,blue\n")
    with pytest.raises(CsvFormatError) as err:
        read_dataset_csv(p)
    # the non-numeric first row reads as a header, so the error lands on line 2
    assert err.value.line == 2


def test_error_line_numbers(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("x,y\n1,2\n3,4\n5,oops\n")
    with pytest.raises(CsvFormatError, match=r"x\.csv:4:"):
        read_dataset_csv(p)
    p.write_text("1,2\n3\n")
    with pytest.raises(CsvFormatError) as err:
        read_dataset_csv(p)
    assert err.value.line == 2


def test_empty_and_nonfinite(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("\n")
    with pytest.raises(CsvFormatError):
        read_dataset_csv(p)
    p.write_text("1,nan\n")
    with pytest.raises(CsvFormatError):
        read_dataset_csv(p)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_dataset_csv(p, ["c"])


@given(st.integers(0, 2**32 - 1))
def test_dataset_round_trip(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(int(rng.integers(1, 20)), int(rng.integers(1, 5)))) * 10.0 ** rng.integers(-8, 8)
    labels = rng.integers(-1, 5, size=len(data))
    p = tmp_path_factory.mktemp("csv") / "d.csv"
    write_dataset_csv(p, data, labels, header=bool(seed % 2))
    back, back_labels, _ = read_dataset_csv(p, [-1])
    np.testing.assert_array_equal(back, data)
    np.testing.assert_array_equal(back_labels, labels)


def test_gmm_json_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    theta = GmmParams.from_arrays([0.2, 0.3, 0.5], rng.normal(size=(3, 4)), [random_spd(rng, 4) for _ in range(3)])
    write_gmm_json(tmp_path / "m.json", theta, {"note": 1})
    assert read_gmm_json(tmp_path / "m.json") == theta
    assert gmm_from_dict(gmm_to_dict(theta)) == theta
