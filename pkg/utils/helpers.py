import math
import re
from typing import Any, Hashable, Iterable, List

import numpy as np

FLOAT_DIGITS = 9

_ANGLE_PATTERN = re.compile(r'^\s*(-?\d*\.?\d*)\s*\*?\s*(pi)?\s*(?:/\s*(\d+\.?\d*))?\s*$')


def parse_angle(angle_str):
    """Convert input like 'pi/4', '3pi/2', '0.5' or '2*pi' into radians."""
    if angle_str is None:
        raise ValueError("angle is required")

    match = _ANGLE_PATTERN.match(str(angle_str).lower())
    if not match or (not match.group(1) and not match.group(2)):
        raise ValueError(f"cannot parse angle {angle_str!r}")

    coefficient, has_pi, divisor = match.groups()
    if coefficient in ('', '-'):
        value = -1.0 if coefficient == '-' else 1.0
    else:
        value = float(coefficient)
    if has_pi:
        value *= math.pi
    if divisor:
        value /= float(divisor)
    return value


def format_float(value):
    """Format a number with the fixed artifact precision."""
    return f"{float(value):.{FLOAT_DIGITS}f}"


def round_floats(obj: Any) -> Any:
    """Recursively round floats so JSON artifacts are diffable."""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, (float, np.floating)):
        value = round(float(obj), FLOAT_DIGITS)
        # avoid '-0.0' in artifacts
        return 0.0 if value == 0 else value
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {key: round_floats(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(value) for value in obj]
    return obj


def format_label(label: Hashable) -> str:
    """Render an element identifier as a stable string."""
    if isinstance(label, tuple):
        return "(" + ",".join(format_label(part) for part in label) + ")"
    if isinstance(label, (float, np.floating)):
        return format_float(label)
    return str(label)


def format_labels(labels: Iterable[Hashable]) -> List[str]:
    return [format_label(label) for label in labels]


def make_sampler(seed: int, stream: int = 0) -> np.random.Generator:
    """
    Build a counter-based random generator for one sampling stream.

    Args:
        seed (int): Run seed (64-bit)
        stream (int): Independent stream id, so parallel scans draw disjoint sequences

    Returns:
        np.random.Generator: Philox-backed generator
    """
    key = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream)])
    return np.random.Generator(np.random.Philox(key))
