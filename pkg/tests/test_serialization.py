import csv
import json

import numpy as np
import pytest

from cnn_cs import exceptions, serialization
from cnn_cs.constants import FILTERBANK_MAGIC
from cnn_cs.models import Histogram, RipReport
from cnn_cs.operator import FilterBank, new_random_filterbank


class TestFilterBankFile:
    def test_save_then_load(self, tmp_path):
        bank = new_random_filterbank(3, 2, 3, dims=2, seed=5)
        path = tmp_path / "bank.mripfb"

        serialization.save_filterbank(bank, path)
        actual = serialization.load_filterbank(path)

        np.testing.assert_array_equal(actual.weights, bank.weights)

    def test_layout(self, tmp_path):
        path = tmp_path / "bank.mripfb"

        serialization.save_filterbank(FilterBank([[[1.0, 2.0]]]), path)

        raw = path.read_bytes()
        assert raw[:8] == FILTERBANK_MAGIC
        assert np.frombuffer(raw[8:28], dtype="<u4").tolist() == [1, 1, 1, 2, 0]
        assert np.frombuffer(raw[28:], dtype="<f8").tolist() == [1.0, 2.0]

    @pytest.mark.parametrize(
        "content",
        (
            b"NOTABANK" + bytes(20),
            FILTERBANK_MAGIC + bytes(4),
            FILTERBANK_MAGIC + np.array([3, 1, 1, 1, 0], dtype="<u4").tobytes(),
            FILTERBANK_MAGIC + np.array([1, 1, 1, 1, 7], dtype="<u4").tobytes() + bytes(8),
            FILTERBANK_MAGIC + np.array([1, 1, 1, 2, 0], dtype="<u4").tobytes() + bytes(8),
            FILTERBANK_MAGIC
            + np.array([1, 1, 1, 1, 0], dtype="<u4").tobytes()
            + np.array([np.nan], dtype="<f8").tobytes(),
        ),
    )
    def test_load__where_malformed(self, tmp_path, content):
        path = tmp_path / "bad.mripfb"
        path.write_bytes(content)

        with pytest.raises(exceptions.FilterBankFormatError):
            serialization.load_filterbank(path)


def test_write_histogram(tmp_path):
    path = tmp_path / "hist.csv"

    serialization.write_histogram(path, Histogram(edges=[0.0, 0.1, 0.2], counts=[2, 0]))

    with path.open(newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["bin_lo", "bin_hi", "count"]
    assert rows[1:] == [["0", "0.10000000000000001", "2"], ["0.10000000000000001", "0.20000000000000001", "0"]]


def test_write_table__keeps_full_precision(tmp_path):
    path = tmp_path / "series.csv"

    serialization.write_table(path, ("iter", "relative_residual"), [(1, 1 / 3)])

    assert path.read_text() == "iter,relative_residual\n1,0.33333333333333331\n"
    assert float(path.read_text().splitlines()[1].split(",")[1]) == 1 / 3


def test_write_table__is_utf8(tmp_path):
    path = tmp_path / "labels.csv"

    serialization.write_table(path, ("δ_hat", "label"), [(0.5, "μ")])

    assert path.read_bytes() == "δ_hat,label\n0.5,μ\n".encode("utf-8")


def test_write_json__uses_aliases(tmp_path):
    path = tmp_path / "report.json"
    report = RipReport(
        ratios=[1.0], mean=1.0, stddev=0.0, minimum=1.0, maximum=1.0, delta_hat=0.0
    )

    serialization.write_json(path, report)

    assert set(json.loads(path.read_text())) == {
        "ratios",
        "mean",
        "stddev",
        "min",
        "max",
        "delta_hat",
        "params",
    }


class TestLoadVector:
    def test_load(self, tmp_path):
        path = tmp_path / "x.txt"
        np.savetxt(path, [1.5, -2.0, 0.25])

        actual = serialization.load_vector(path)

        np.testing.assert_array_equal(actual, [1.5, -2.0, 0.25])

    def test_where_missing(self, tmp_path):
        with pytest.raises(exceptions.ConfigError):
            serialization.load_vector(tmp_path / "missing.txt")

    def test_where_not_numeric(self, tmp_path):
        path = tmp_path / "x.txt"
        path.write_text("one two\n")

        with pytest.raises(exceptions.ConfigError):
            serialization.load_vector(path)
