import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from cattrees.data import (
    CsvParseError,
    Dataset,
    column_variance,
    load_csv,
    save_csv,
    split,
    standardize,
)


def _write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_basic_parse(self, tmp_path):
        d = load_csv(_write(tmp_path, "a,b\n1,2\n3,4\n5,6\n"))
        assert d.n == 3 and d.p == 2
        assert d.columns == ["a", "b"]
        assert d.values[2, 1] == 6.0

    def test_nan_cell_reports_location(self, tmp_path):
        with pytest.raises(CsvParseError, match=r"row 3, column 1"):
            load_csv(_write(tmp_path, "a,b\n1,2\nNaN,3\n4,5\n"))

    def test_unparseable_cell(self, tmp_path):
        with pytest.raises(CsvParseError, match=r"row 2, column 1"):
            load_csv(_write(tmp_path, "a,b\nfoo,2\n3,4\n"))

    def test_headerless_default_names(self, tmp_path):
        d = load_csv(_write(tmp_path, "1,2\n3,4\n"), has_header=False)
        assert d.columns == ["X1", "X2"]
        assert d.n == 2

    def test_empty_file(self, tmp_path):
        with pytest.raises(CsvParseError, match="empty"):
            load_csv(_write(tmp_path, ""))

    def test_too_few_columns(self, tmp_path):
        with pytest.raises(CsvParseError, match="2 columns"):
            load_csv(_write(tmp_path, "a\n1\n2\n"))

    def test_ragged_rows(self, tmp_path):
        with pytest.raises(CsvParseError, match="row 3"):
            load_csv(_write(tmp_path, "a,b\n1,2\n3,4,5\n"))

    @given(
        rows=st.lists(
            st.lists(
                st.floats(min_value=-1e12, max_value=1e12, allow_nan=False),
                min_size=3,
                max_size=3,
            ),
            min_size=2,
            max_size=20,
        )
    )
    @settings(max_examples=30, deadline=None)
    def test_save_load_roundtrip(self, rows, tmp_path_factory):
        d = Dataset(columns=["u", "v", "w"], values=np.array(rows))
        path = tmp_path_factory.mktemp("rt") / "d.csv"
        save_csv(d, path)
        back = load_csv(path)
        assert back.columns == d.columns
        np.testing.assert_array_equal(back.values, d.values)


class TestDatasetInvariants:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="non-finite"):
            Dataset(columns=["a", "b"], values=np.array([[1.0, np.inf], [0.0, 1.0]]))

    def test_rejects_duplicate_names(self):
        with pytest.raises(ValueError, match="unique"):
            Dataset(columns=["a", "a"], values=np.zeros((2, 2)))

    def test_values_are_readonly(self):
        d = Dataset(columns=["a", "b"], values=np.zeros((2, 2)))
        with pytest.raises(ValueError):
            d.values[0, 0] = 1.0


class TestSplit:
    def test_half_split(self):
        d = Dataset(columns=["a", "b"], values=np.arange(200.0).reshape(100, 2))
        sd = split(d, 0.5, seed=7)
        assert sd.main.n == 50 and sd.auxiliary.n == 50
        main_rows = {tuple(r) for r in sd.main.values}
        aux_rows = {tuple(r) for r in sd.auxiliary.values}
        assert not main_rows & aux_rows

    def test_floor_rule(self):
        d = Dataset(columns=["a", "b"], values=np.arange(6.0).reshape(3, 2))
        sd = split(d, 0.5, seed=0)
        assert sd.auxiliary.n == 1 and sd.main.n == 2

    def test_deterministic(self):
        d = Dataset(columns=["a", "b"], values=np.random.default_rng(0).normal(size=(40, 2)))
        s1 = split(d, 0.3, seed=5)
        s2 = split(d, 0.3, seed=5)
        np.testing.assert_array_equal(s1.main.values, s2.main.values)
        np.testing.assert_array_equal(s1.auxiliary.values, s2.auxiliary.values)

    def test_empty_half_rejected(self):
        d = Dataset(columns=["a", "b"], values=np.arange(6.0).reshape(3, 2))
        with pytest.raises(ValueError, match="empty half"):
            split(d, 0.05, seed=0)

    @given(n=st.integers(4, 60), frac=st.floats(0.1, 0.9), seed=st.integers(0, 1000))
    @settings(max_examples=50, deadline=None)
    def test_partition_property(self, n, frac, seed):
        assume(1 <= int(n * frac) <= n - 1)
        vals = np.random.default_rng(seed).normal(size=(n, 2))
        d = Dataset(columns=["a", "b"], values=vals)
        sd = split(d, frac, seed=seed)
        merged = np.vstack([sd.main.values, sd.auxiliary.values])
        assert sorted(map(tuple, merged)) == sorted(map(tuple, vals))
        assert sd.auxiliary.n == int(n * frac)


class TestColumnVariance:
    def test_constant_column_flags(self):
        d = Dataset(columns=["a", "b"], values=np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]]))
        with pytest.warns(RuntimeWarning, match="degenerate"):
            v = column_variance(d, 0)
        assert v == 0.0

    def test_hand_values(self):
        d = Dataset(columns=["a", "b"], values=np.array([[0.0, 0.0], [2.0, 1.0]]))
        assert column_variance(d, 0) == pytest.approx(1.0)
        d2 = Dataset(columns=["a", "b"], values=np.array([[-1.0, 0], [0.0, 0], [1.0, 1]]))
        assert column_variance(d2, 0) == pytest.approx(2.0 / 3.0)

    def test_standardize_unit_variance(self):
        rng = np.random.default_rng(3)
        d = Dataset(columns=["a", "b"], values=rng.normal(0, [3.0, 0.2], size=(500, 2)))
        out = standardize(d)
        for i in range(2):
            assert column_variance(out, i) == pytest.approx(1.0, abs=1e-12)
