"""Constants used by the package."""

from enum import Enum
from importlib import metadata
import logging
from typing import Final

LOGGER = logging.getLogger(__package__)

try:
    VERSION = metadata.version("cnn-compressive-sensing")
except metadata.PackageNotFoundError:  # Running from a source checkout
    VERSION = "0.0.0"

FILTERBANK_MAGIC: Final[bytes] = b"MRIPFB1\0"

# Tolerance used when checking rows of W for unit norm
NORMALIZED_TOLERANCE: Final[float] = 1e-9

# Exact delta enumeration cap (number of supports or support pairs)
ENUMERATION_CAP: Final[int] = 10**6

MAX_SEED: Final[int] = 2**64 - 1


class PoolingMode(str, Enum):
    """How shift positions of each filter are grouped for pooling."""

    FullBlock = "full-block"
    Regions = "regions"


class Upsampling(str, Enum):
    """Where pooled values are placed when restoring the activation size."""

    Naive = "naive"
    Switches = "switches"


class Command(str, Enum):
    """Experiment subcommands."""

    Rip1d = "rip-1d"
    Rip2d = "rip-2d"
    Recover = "recover"
    Coherence = "coherence"
    Iht = "iht"
