from pathlib import Path
import sys
from typing import Callable

import numpy as np
import pytest

HERE = Path(__file__).parent
SRC = (HERE.parent / "src").absolute()
sys.path.insert(0, SRC.as_posix())

from cnn_cs.operator import (  # noqa: E402
    FilterBank,
    InputGeometry,
    StructuredOperator,
    build_operator,
)


@pytest.fixture
def configs() -> Path:
    return HERE / "fixtures" / "configs"


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20170531)


@pytest.fixture
def matrix_operator() -> Callable[[np.ndarray], StructuredOperator]:
    """Wrap a dense K × M matrix as an operator with ℓ = D = 1 (n = 1)."""

    def factory(matrix) -> StructuredOperator:
        weights = np.asarray(matrix, dtype=np.float64)[:, :, None]
        return build_operator(FilterBank(weights), InputGeometry(1))

    return factory
