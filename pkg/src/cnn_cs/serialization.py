"""Filter bank files, CSV tables and JSON reports."""

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np
from pydantic import BaseModel

from . import exceptions
from .constants import FILTERBANK_MAGIC, LOGGER
from .models import Histogram
from .operator import FilterBank
from .utils import format_float

# magic, then little-endian u32 dims, K, M, ℓ, reserved
HEADER_DTYPE = np.dtype("<u4")
HEADER_FIELDS = 5
HEADER_SIZE = len(FILTERBANK_MAGIC) + HEADER_FIELDS * HEADER_DTYPE.itemsize
WEIGHT_DTYPE = np.dtype("<f8")


def save_filterbank(bank: FilterBank, path: Path) -> None:
    """Write a filter bank as a header followed by row-major float64 weights."""
    header = np.array(
        [bank.dims, bank.num_filters, bank.num_channels, bank.filter_len, 0],
        dtype=HEADER_DTYPE,
    )
    Path(path).write_bytes(
        FILTERBANK_MAGIC + header.tobytes() + bank.weights.astype(WEIGHT_DTYPE).tobytes()
    )


def load_filterbank(path: Path) -> FilterBank:
    """Read a filter bank written by ``save_filterbank``."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE or not raw.startswith(FILTERBANK_MAGIC):
        raise exceptions.FilterBankFormatError(f"{path} is not a filter bank file")

    dims, num_filters, num_channels, filter_len, reserved = (
        int(value)
        for value in np.frombuffer(
            raw, dtype=HEADER_DTYPE, count=HEADER_FIELDS, offset=len(FILTERBANK_MAGIC)
        )
    )
    if dims not in (1, 2) or reserved:
        raise exceptions.FilterBankFormatError(f"{path}: bad header")

    shape = (num_filters, num_channels) + (filter_len,) * dims
    body = raw[HEADER_SIZE:]
    if len(body) != int(np.prod(shape)) * WEIGHT_DTYPE.itemsize:
        raise exceptions.FilterBankFormatError(
            f"{path}: expected weights of shape {shape}, found {len(body)} bytes"
        )

    try:
        return FilterBank(np.frombuffer(body, dtype=WEIGHT_DTYPE).reshape(shape))
    except ValueError as ex:
        raise exceptions.FilterBankFormatError(f"{path}: {ex}") from ex


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    return str(value)


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Write a CSV table; floats keep full precision."""
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([_cell(value) for value in row] for row in rows)
    LOGGER.debug("Wrote %s", path)


def write_histogram(path: Path, hist: Histogram) -> None:
    """Histogram as bin_lo, bin_hi, count rows."""
    write_table(path, ("bin_lo", "bin_hi", "count"), hist.rows())


def write_json(path: Path, report: Union[BaseModel, dict]) -> None:
    """Pretty-printed JSON; models use their aliases."""
    if isinstance(report, BaseModel):
        text = report.json(by_alias=True, indent=2)
    else:
        text = json.dumps(report, indent=2, sort_keys=True, default=str)
    Path(path).write_text(text + "\n", encoding="utf-8")
    LOGGER.debug("Wrote %s", path)


def load_vector(path: Path) -> np.ndarray:
    """Whitespace separated real values, as written by ``numpy.savetxt``."""
    try:
        return np.loadtxt(path, dtype=np.float64, ndmin=1).reshape(-1)
    except (OSError, ValueError) as ex:
        raise exceptions.ConfigError(f"Cannot read input vector {path}: {ex}") from ex
