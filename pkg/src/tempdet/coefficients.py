"""Closed-form softmax temperature estimation from task shape.

The estimate is a clipped affine model in simple task descriptors:

    T = clip(alpha * sqrt(m) + beta + gamma * ln(csg) + delta * ln(cn),
             clip_lo, clip_hi)

where m is the width of the feature vector feeding the output layer,
csg is a dataset difficulty score (see tempdet.csg) and cn is the class
count. Logarithms are natural. Which terms participate is selected by a
variant tag:

    unit    T = 1 (baseline)
    sqrt_m  T = sqrt(m) (baseline)
    plain   alpha, beta
    csg     alpha, beta, gamma
    cn      alpha, beta, delta
    csgcn   alpha, beta, gamma, delta

Default coefficients for the four fitted variants ship with the package
and are frozen; refitting lives in tempdet.fitting.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping

from .errors import InputError, NumericError

VARIANTS = ("unit", "sqrt_m", "plain", "csg", "cn", "csgcn")
COEFFICIENT_VARIANTS = ("plain", "csg", "cn", "csgcn")

CLIP_LO_DEFAULT = 1.0
CLIP_HI_DEFAULT = 512.0


@dataclass(frozen=True)
class TemperatureCoefficients:
    """Coefficients of the clipped affine temperature model."""

    alpha: float
    beta: float
    gamma: float = 0.0
    delta: float = 0.0
    clip_lo: float = CLIP_LO_DEFAULT
    clip_hi: float = CLIP_HI_DEFAULT

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma", "delta", "clip_lo", "clip_hi"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise InputError(f"coefficient {name} must be a real number")
            if not math.isfinite(value):
                raise InputError(f"coefficient {name} must be finite, got {value!r}")
        if self.clip_lo <= 0:
            raise InputError(f"clip_lo must be positive, got {self.clip_lo}")
        if self.clip_hi <= self.clip_lo:
            raise InputError(
                f"clip bounds must satisfy clip_lo < clip_hi, got "
                f"[{self.clip_lo}, {self.clip_hi}]"
            )


@dataclass(frozen=True)
class TaskDescriptor:
    """Shape of a classification task, as seen by the estimator.

    m: width of the feature vector entering the output layer (required).
    cn: class count, needed by the cn and csgcn variants.
    csg: dataset difficulty score, needed by the csg and csgcn variants.
    """

    m: int
    cn: int | None = None
    csg: float | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.m, int) or isinstance(self.m, bool):
            raise InputError(f"m must be an int, got {type(self.m).__name__}")
        if self.m < 1:
            raise InputError(f"m must be >= 1, got {self.m}")
        if self.cn is not None:
            if not isinstance(self.cn, int) or isinstance(self.cn, bool):
                raise InputError(f"cn must be an int, got {type(self.cn).__name__}")
            if self.cn < 1:
                raise InputError(f"cn must be >= 1, got {self.cn}")
        if self.csg is not None:
            csg = self.csg
            if not isinstance(csg, (int, float)) or isinstance(csg, bool):
                raise InputError("csg must be a real number")
            if not math.isfinite(csg) or csg <= 0:
                raise InputError(f"csg must be finite and > 0, got {csg}")


_DEFAULTS: dict[str, TemperatureCoefficients] = {
    "plain": TemperatureCoefficients(alpha=0.7239, beta=-4.706),
    "csg": TemperatureCoefficients(alpha=0.4111, beta=6.848, gamma=-2.024),
    "cn": TemperatureCoefficients(alpha=0.4051, beta=6.656, delta=-1.973),
    "csgcn": TemperatureCoefficients(alpha=0.3192, beta=20.74, gamma=3.746, delta=-7.380),
}


def default_coefficients(variant: str) -> TemperatureCoefficients:
    """Frozen default coefficients for a fitted variant."""
    _check_variant(variant)
    if variant not in _DEFAULTS:
        raise InputError(f"variant {variant!r} has no coefficients")
    return _DEFAULTS[variant]


def _check_variant(variant: str) -> None:
    if variant not in VARIANTS:
        raise InputError(
            f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}"
        )


def _uses_csg(variant: str) -> bool:
    return variant in ("csg", "csgcn")


def _uses_cn(variant: str) -> bool:
    return variant in ("cn", "csgcn")


def _raw_estimate(task: TaskDescriptor, variant: str,
                  coeffs: TemperatureCoefficients) -> float:
    raw = coeffs.alpha * math.sqrt(task.m) + coeffs.beta
    if _uses_csg(variant):
        if task.csg is None:
            raise InputError(f"variant {variant!r} needs the csg descriptor")
        raw += coeffs.gamma * math.log(task.csg)
    if _uses_cn(variant):
        if task.cn is None:
            raise InputError(f"variant {variant!r} needs the cn descriptor")
        if task.cn < 2:
            raise InputError(f"variant {variant!r} needs cn >= 2, got {task.cn}")
        raw += coeffs.delta * math.log(task.cn)
    if not math.isfinite(raw):
        raise NumericError(f"temperature model produced a non-finite value: {raw!r}")
    return raw


def estimate_temperature(task: TaskDescriptor, variant: str,
                         coeffs: TemperatureCoefficients | None = None) -> float:
    """Estimated softmax temperature for a task under a variant.

    Falls back to the shipped default coefficients when coeffs is None.
    Baseline variants (unit, sqrt_m) ignore coeffs.
    """
    temperature, _ = estimate_temperature_detail(task, variant, coeffs)
    return temperature


def estimate_temperature_detail(
    task: TaskDescriptor, variant: str,
    coeffs: TemperatureCoefficients | None = None,
) -> tuple[float, dict]:
    """Like estimate_temperature, plus a detail dict (raw value, clip flag)."""
    _check_variant(variant)
    if variant == "unit":
        return 1.0, {"raw": 1.0, "clipped": False}
    if variant == "sqrt_m":
        value = math.sqrt(task.m)
        return value, {"raw": value, "clipped": False}
    if coeffs is None:
        coeffs = default_coefficients(variant)
    raw = _raw_estimate(task, variant, coeffs)
    clipped = min(max(raw, coeffs.clip_lo), coeffs.clip_hi)
    return clipped, {"raw": raw, "clipped": clipped != raw}


def coefficients_to_document(variant: str,
                             coeffs: TemperatureCoefficients) -> dict:
    """JSON-ready mapping for a coefficient set.

    Floats survive a JSON round trip bit for bit (json emits repr-style
    shortest representations, >= 15 significant digits when needed).
    """
    _check_variant(variant)
    if variant not in COEFFICIENT_VARIANTS:
        raise InputError(f"variant {variant!r} has no coefficients to serialize")
    return {
        "variant": variant,
        "alpha": float(coeffs.alpha),
        "beta": float(coeffs.beta),
        "gamma": float(coeffs.gamma),
        "delta": float(coeffs.delta),
        "clip_lo": float(coeffs.clip_lo),
        "clip_hi": float(coeffs.clip_hi),
    }


def coefficients_from_document(doc: Mapping) -> tuple[str, TemperatureCoefficients]:
    """Inverse of coefficients_to_document. Raises InputError on bad docs."""
    if not isinstance(doc, Mapping):
        raise InputError("coefficient document must be a JSON object")
    try:
        variant = doc["variant"]
    except KeyError:
        raise InputError("coefficient document is missing the 'variant' field") from None
    _check_variant(str(variant))
    if variant not in COEFFICIENT_VARIANTS:
        raise InputError(f"variant {variant!r} cannot carry coefficients")
    values = {}
    for field in ("alpha", "beta"):
        if field not in doc:
            raise InputError(f"coefficient document is missing the {field!r} field")
    for field in ("alpha", "beta", "gamma", "delta", "clip_lo", "clip_hi"):
        if field in doc:
            raw = doc[field]
            if not isinstance(raw, (int, float)) or isinstance(raw, bool):
                raise InputError(f"coefficient field {field!r} must be a number")
            values[field] = float(raw)
    return str(variant), TemperatureCoefficients(**values)


def save_coefficients(path: str, variant: str,
                      coeffs: TemperatureCoefficients) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(coefficients_to_document(variant, coeffs), fh, indent=2)
        fh.write("\n")


def load_coefficients(path: str) -> tuple[str, TemperatureCoefficients]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: not valid JSON: {exc}") from exc
    return coefficients_from_document(doc)
