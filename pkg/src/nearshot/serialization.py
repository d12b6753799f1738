"""Textual serialization of lab features: the "0.52 sec QTc" clause.

Shared by question rendering and the dataset builder so the two can never
drift apart.
"""

from __future__ import annotations

import math
from typing import Sequence

from .errors import InvalidParamsError
from .types import LabFeature


def format_value(value: float) -> str:
    """Minimal decimal rendering: no trailing zeros, integers bare."""
    if math.isnan(value) or math.isinf(value):
        raise InvalidParamsError(f"cannot format non-finite value {value!r}")
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def serialize_features(features: Sequence[LabFeature]) -> str:
    """Comma-separated text form of lab features: "0.52 sec QTc, ...".

    Each feature renders as "{value} {unit} {label}", dropping the unit
    (and its space) when empty; features whose value is missing are
    skipped entirely.
    """
    parts: list[str] = []
    for feature in features:
        if feature.missing:
            continue
        rendered = format_value(feature.value)
        if feature.unit:
            parts.append(f"{rendered} {feature.unit} {feature.label}")
        else:
            parts.append(f"{rendered} {feature.label}")
    return ", ".join(parts)
