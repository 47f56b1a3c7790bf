"""Fixed-width two's-complement helpers.

Values travel through the pipeline as unsigned bit patterns in
[0, 2**width); signed interpretation happens only at explicit decode
points (model boundary, range clamping, report rendering).
"""

from __future__ import annotations


def mask(value: int, width: int) -> int:
    """Truncate *value* to *width* bits (two's-complement wrap)."""
    return value & ((1 << width) - 1)


def to_signed(pattern: int, width: int) -> int:
    """Decode a *width*-bit pattern as a two's-complement integer."""
    if pattern & (1 << (width - 1)):
        return pattern - (1 << width)
    return pattern


def sign_extend(pattern: int, width: int, new_width: int) -> int:
    """Extend a *width*-bit pattern to *new_width* bits, replicating the
    sign bit."""
    if new_width <= width:
        return mask(pattern, new_width)
    return mask(to_signed(pattern, width), new_width)


def decode(pattern: int, width: int, signed: bool) -> int:
    """Interpret a bit pattern per declared signedness."""
    return to_signed(pattern, width) if signed else pattern
