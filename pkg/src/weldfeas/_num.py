"""Decimal-string numbers with symbolic pi, as stored in scenario and model files."""

from __future__ import annotations

import math
import re

_PI_TERM = re.compile(
    r"^\s*(?P<sign>[+-]?)\s*(?:(?P<coef>\d+(?:\.\d*)?)\s*\*\s*)?pi\s*(?:/\s*(?P<den>\d+(?:\.\d*)?))?\s*$"
)


def parse_number(value) -> float:
    """Parse ``0.5``, ``"-0.3"``, ``"pi"``, ``"-pi/2"``, ``"3*pi/4"`` into a float.

    Raises ValueError for anything else.
    """
    if isinstance(value, bool):
        raise ValueError(f"not a number: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"not a number: {value!r}")
    m = _PI_TERM.match(value)
    if m:
        x = math.pi
        if m.group("coef"):
            x *= float(m.group("coef"))
        if m.group("den"):
            x /= float(m.group("den"))
        return -x if m.group("sign") == "-" else x
    return float(value)


def format_number(x: float) -> str:
    """Inverse of :func:`parse_number` for the common multiples of pi."""
    for den in (1, 2, 3, 4, 6, 8, 12):
        for num in range(-8, 9):
            if num == 0:
                continue
            if x == num * math.pi / den:
                coef = "" if abs(num) == 1 else f"{abs(num)}*"
                sign = "-" if num < 0 else ""
                tail = "" if den == 1 else f"/{den}"
                return f"{sign}{coef}pi{tail}"
    return repr(float(x))
