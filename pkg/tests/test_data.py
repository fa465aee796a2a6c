import numpy as np
import pytest

from dctm.data import Dataset, IngestError, from_dict, ingest_csv


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_ingest_counts(tmp_path):
    p = write(tmp_path, "y,z\n0,0.1\n5,0.2\n2,0.3\n")
    ds = ingest_csv(p, {"y": "integer-count", "z": "continuous"})
    assert ds.n == 3
    assert np.array_equal(ds["y"], [0, 5, 2])
    assert ds["y"].dtype.kind == "i"
    assert np.allclose(ds["z"], [0.1, 0.2, 0.3])


def test_ingest_negative_count(tmp_path):
    p = write(tmp_path, "y\n0\n-1\n")
    with pytest.raises(IngestError, match=r":3.*y"):
        ingest_csv(p, {"y": "integer-count"})


def test_ingest_non_integer_count(tmp_path):
    p = write(tmp_path, "y\n1.5\n")
    with pytest.raises(IngestError, match="non-integer"):
        ingest_csv(p, {"y": "integer-count"})


def test_ingest_missing_value(tmp_path):
    p = write(tmp_path, "y,z\n1,\n")
    with pytest.raises(IngestError, match="missing value"):
        ingest_csv(p, {"y": "integer-count", "z": "continuous"})


def test_ingest_ordinal_levels(tmp_path):
    p = write(tmp_path, "grade\nno\nsevere\nweak\nno\n")
    schema = {"grade": "ordinal-category",
              "ordinal_levels": {"grade": ["no", "weak", "severe"]}}
    ds = ingest_csv(p, schema)
    assert np.array_equal(ds["grade"], [1, 3, 2, 1])


def test_ingest_undeclared_level(tmp_path):
    p = write(tmp_path, "grade\nno\nterminal\n")
    schema = {"grade": "ordinal-category",
              "ordinal_levels": {"grade": ["no", "weak", "severe"]}}
    with pytest.raises(IngestError, match="terminal"):
        ingest_csv(p, schema)


def test_ingest_ordinal_without_levels(tmp_path):
    p = write(tmp_path, "grade\nno\n")
    with pytest.raises(IngestError, match="declared levels"):
        ingest_csv(p, {"grade": "ordinal-category"})


def test_ingest_non_numeric(tmp_path):
    p = write(tmp_path, "z\nabc\n")
    with pytest.raises(IngestError, match="non-numeric"):
        ingest_csv(p, {"z": "continuous"})


def test_ingest_schema_column_missing(tmp_path):
    p = write(tmp_path, "a\n1\n")
    with pytest.raises(IngestError, match="missing from"):
        ingest_csv(p, {"b": "continuous"})


def test_ingest_ragged_row(tmp_path):
    p = write(tmp_path, "a,b\n1,2\n3\n")
    with pytest.raises(IngestError, match="expected 2 fields"):
        ingest_csv(p, {"a": "continuous"})


def test_ingest_empty_file(tmp_path):
    p = write(tmp_path, "")
    with pytest.raises(IngestError, match="empty"):
        ingest_csv(p, {"a": "continuous"})


def test_ingest_unknown_kind(tmp_path):
    p = write(tmp_path, "a\n1\n")
    with pytest.raises(IngestError, match="unknown column kind"):
        ingest_csv(p, {"a": "complex"})


def test_ingest_group_column(tmp_path):
    p = write(tmp_path, "g\nnorth\nsouth\nnorth\n")
    ds = ingest_csv(p, {"g": "categorical-group"})
    assert list(ds["g"]) == ["north", "south", "north"]


def test_dataset_subset():
    ds = from_dict({"y": [1, 2, 3, 4], "z": [0.1, 0.2, 0.3, 0.4]})
    sub = ds.subset([0, 2])
    assert sub.n == 2
    assert np.array_equal(sub["y"], [1, 3])
    assert "y" in sub and "q" not in sub


def test_undeclared_columns_default_continuous(tmp_path):
    p = write(tmp_path, "y,extra\n1,2.5\n", name="e.csv")
    ds = ingest_csv(p, {"y": "integer-count"})
    assert ds["extra"].dtype.kind == "f"
