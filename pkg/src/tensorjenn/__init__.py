"""Randomized, numerically stable decomposition of symmetric order-3 tensors."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DimError,
    DivByZero,
    EigFailure,
    Infeasible,
    NotDiagonalisable,
    PrecisionTooLow,
    RepeatedEigenvalues,
    SingularMatrix,
    TensorFormatError,
    TensorJennError,
    WrongConditionEstimate,
    ZeroDenominator,
)
from .numerics import EXACT, FpContext  # noqa: E402
from .fptensor import SymTensor3, from_rank_ones, read_tensor, write_tensor  # noqa: E402
from .tscb import tscb  # noqa: E402
from .jennrich import DecompParams, DecompResult, decompose_exact, decompose_fp  # noqa: E402
from .benchverify import generate_instance, match_factors  # noqa: E402

__all__ = [
    "DecompParams", "DecompResult", "DimError", "DivByZero", "EXACT", "EigFailure",
    "FpContext", "Infeasible", "NotDiagonalisable", "PrecisionTooLow", "RepeatedEigenvalues",
    "SingularMatrix", "SymTensor3", "TensorFormatError", "TensorJennError",
    "WrongConditionEstimate", "ZeroDenominator", "decompose_exact", "decompose_fp",
    "from_rank_ones", "generate_instance", "match_factors", "read_tensor", "tscb",
    "write_tensor",
]
