"""Tests for the columnar dataset container."""

import numpy as np
import numpy.testing as npt
import pytest

from sorted_effects.data import (
    Column,
    DataError,
    Dataset,
    FACTOR,
    NA_STRINGS,
    NUMERIC,
)


def small():
    return Dataset.from_arrays({
        "y": [1.0, 2.0, 3.0, 4.0],
        "g": ["b", "a", "b", "c"],
        "w": [1.0, 0.0, 2.0, 1.0],
    })


# ----------------------------------------------------------------------
# construction
# ----------------------------------------------------------------------


def test_from_arrays_detects_string_columns_as_factors():
    ds = small()
    assert ds.n_rows == 4
    assert ds.kind("y") == NUMERIC
    assert ds.kind("g") == FACTOR
    assert ds.levels("g") == ("b", "a", "c")  # first appearance, not sorted
    npt.assert_array_equal(ds.codes("g"), [0, 1, 0, 2])


def test_from_arrays_declared_factor_on_numbers():
    ds = Dataset.from_arrays({"g": [2, 1, 2, 5]}, factors=("g",))
    assert ds.kind("g") == FACTOR
    assert ds.levels("g") == ("2", "1", "5")
    npt.assert_array_equal(ds.codes("g"), [0, 1, 0, 2])


def test_from_arrays_rejects_bad_columns():
    with pytest.raises(DataError, match="non-finite"):
        Dataset.from_arrays({"y": [1.0, np.nan]})
    with pytest.raises(DataError, match="non-finite"):
        Dataset.from_arrays({"y": [1.0, np.inf]})
    with pytest.raises(DataError, match="missing values"):
        Dataset.from_arrays({"g": ["a", "NA"]})
    with pytest.raises(DataError, match="expected 2"):
        Dataset.from_arrays({"a": [1.0, 2.0], "b": [1.0, 2.0, 3.0]})


def test_column_validation():
    with pytest.raises(DataError, match="unknown column kind"):
        Column("text", np.zeros(2))
    with pytest.raises(DataError, match="level list"):
        Column(FACTOR, np.zeros(2, dtype=np.int64))
    with pytest.raises(DataError, match="out of range"):
        Column(FACTOR, np.array([0, 2]), ("a", "b"))


def test_empty_dataset():
    ds = Dataset.from_arrays({})
    assert ds.n_rows == 0
    assert ds.names == []


# ----------------------------------------------------------------------
# access
# ----------------------------------------------------------------------


def test_accessors_enforce_column_kind():
    ds = small()
    assert "g" in ds and "nope" not in ds
    with pytest.raises(DataError, match="is a factor"):
        ds.numeric("g")
    with pytest.raises(DataError, match="expected a factor"):
        ds.codes("y")
    with pytest.raises(DataError, match="unknown column"):
        ds.column("nope")


def test_labels_expand_factor_codes():
    ds = small()
    npt.assert_array_equal(ds.column("g").labels(), ["b", "a", "b", "c"])
    npt.assert_array_equal(ds.column("y").labels(), [1.0, 2.0, 3.0, 4.0])


def test_weights_resolution():
    ds = small()
    npt.assert_array_equal(ds.weights(None), np.ones(4))
    npt.assert_array_equal(ds.weights("w"), [1.0, 0.0, 2.0, 1.0])
    bad = ds.with_column("w", Column(NUMERIC, np.array([1.0, -1.0, 0.0, 0.0])))
    with pytest.raises(DataError, match="negative"):
        bad.weights("w")
    zero = ds.with_column("w", Column(NUMERIC, np.zeros(4)))
    with pytest.raises(DataError, match="sums to zero"):
        zero.weights("w")


def test_na_strings_cover_common_spellings():
    assert {"", "NA", "NaN", "null"} <= NA_STRINGS
    assert "0" not in NA_STRINGS


# ----------------------------------------------------------------------
# derived tables
# ----------------------------------------------------------------------


def test_with_column_leaves_original_untouched():
    ds = small()
    out = ds.with_column("z", Column(NUMERIC, np.arange(4.0)))
    assert out.names == ["y", "g", "w", "z"]
    assert ds.names == ["y", "g", "w"]
    replaced = ds.with_column("y", Column(NUMERIC, np.zeros(4)))
    npt.assert_array_equal(replaced.numeric("y"), np.zeros(4))
    npt.assert_array_equal(ds.numeric("y"), [1.0, 2.0, 3.0, 4.0])


def test_take_by_mask_and_index_preserves_levels():
    ds = small()
    mask = np.array([True, False, True, False])
    sub = ds.take(mask)
    assert sub.n_rows == 2
    npt.assert_array_equal(sub.numeric("y"), [1.0, 3.0])
    # level "a" and "c" disappear from the rows but stay in the legend
    assert sub.levels("g") == ("b", "a", "c")
    npt.assert_array_equal(sub.codes("g"), [0, 0])

    idx = ds.take(np.array([3, 0]))
    assert idx.n_rows == 2
    npt.assert_array_equal(idx.numeric("y"), [4.0, 1.0])
    npt.assert_array_equal(idx.codes("g"), [2, 0])
