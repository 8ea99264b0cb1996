"""Word-aligned attention with multi-source segmentation fusion, backed by the C++ core."""

from ._core import (
    ConfigError,
    Error,
    InputError,
    IoError,
    ShapeError,
    align,
    char_attention_scores,
    fuse,
    mwa_forward,
    segment,
    softmax_rows,
)

__all__ = [
    "ConfigError",
    "Error",
    "InputError",
    "IoError",
    "ShapeError",
    "align",
    "char_attention_scores",
    "fuse",
    "mwa_forward",
    "segment",
    "softmax_rows",
]
