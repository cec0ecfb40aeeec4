"""Fock-space simulation of loss correction for continuous-variable
teleportation with a noiseless linear amplifier."""

from .errors import (
    CvqecError,
    DegenerateHeraldError,
    DomainError,
    GridTooCoarseError,
    InvalidDimensionError,
    InvalidParameterError,
    OutOfModelError,
    ResourceError,
    TruncationLeakageError,
    UnphysicalOutputError,
    ValidationError,
)
from .fock import DensityOperator, FockKet, FockOperator, fidelity
from .nla import NlaConfig, effective_epr_params, success_bound
from .protocol import ProtocolConfig, corrected_transmission, max_gain
from .states import EprParams, QuantumChannel, loss_channel
from .teleport import BellGrid, TeleportGain

__version__ = "0.1.0"
