"""Row encoders and decoders for coded matrix-vector products."""

from .lt import (
    LtCodeSpec,
    LtSymbol,
    OverheadEstimate,
    PeelResult,
    PeelingDecoder,
    ideal_soliton,
    lt_decode_peel,
    lt_encode,
    lt_required_overhead,
    lt_success_rate,
    robust_soliton,
    sample_degrees,
    sample_neighbors,
)
from .rlc import DecodeError, RlcBlock, rlc_decode, rlc_encode

__all__ = [
    "DecodeError",
    "LtCodeSpec",
    "LtSymbol",
    "OverheadEstimate",
    "PeelResult",
    "PeelingDecoder",
    "RlcBlock",
    "ideal_soliton",
    "lt_decode_peel",
    "lt_encode",
    "lt_required_overhead",
    "lt_success_rate",
    "rlc_decode",
    "rlc_encode",
    "robust_soliton",
    "sample_degrees",
    "sample_neighbors",
]
