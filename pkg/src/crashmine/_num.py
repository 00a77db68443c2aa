"""Number rendering shared by the text exporters."""

import math


def fmt_real(value) -> str:
    """Shortest round-trip rendering of a float; ``-0.0`` becomes ``0.0``."""
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {value}")
    if value == 0.0:
        return "0.0"
    return repr(value)
