"""Group-adaptive exponential quantization of latent tensors.

Each channel group k gets a bias ``upper_bound - step * k``.  A latent value
splits into round part and fractional part (``frac = v - trunc(v)``, so the
fraction carries the sign); the fraction's magnitude is warped by

    warp(f) = expm1(f * b) / expm1(b),      b = 2 * ln((1 - bias) / bias)

which fixes warp(0)=0, warp(1)=1, warp(0.5)=bias and, for bias < 0.5, pulls
fractions toward zero (a deadzone that widens as k grows).  bias == 0.5 makes
b == 0; that group uses the exact identity warp (the analytic limit).  The
warped value is then rounded half away from zero to an integer symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

DEFAULT_UPPER_BOUND = 0.5
DEFAULT_STEP = 0.04


@dataclass(frozen=True)
class QuantizerConfig:
    upper_bound: float = DEFAULT_UPPER_BOUND
    step: float = DEFAULT_STEP
    group_index: int = 0

    @property
    def bias(self) -> float:
        return self.upper_bound - self.step * self.group_index


@dataclass(frozen=True)
class QuantizerConstants:
    """Closed-form constants (a, b, c) of one group's warp.

    For the degenerate identity warp (bias == 0.5) b is 0 and a, c are NaN:
    the defining expressions 1/(e^b - 1) diverge there.
    """

    a: float
    b: float
    c: float
    bias: float

    @property
    def is_identity(self) -> bool:
        return self.b == 0.0


def derive_constants(config: QuantizerConfig) -> QuantizerConstants:
    """Derive warp constants for one group; rejects invalid biases."""
    bias = config.bias
    if bias > config.upper_bound:
        raise ConfigError(
            f"invalid-config: bias {bias:g} exceeds upper bound "
            f"{config.upper_bound:g} (negative group index?)"
        )
    if bias <= 0.0:
        raise ConfigError(
            f"invalid-group: group {config.group_index} has bias {bias:g} <= 0 "
            f"(step {config.step:g} too large for this group index)"
        )
    if bias > 0.5:
        raise ConfigError(f"invalid-config: bias {bias:g} > 0.5")
    if bias == 0.5:
        return QuantizerConstants(a=math.nan, b=0.0, c=math.nan, bias=bias)
    b = 2.0 * math.log((1.0 - bias) / bias)
    c = -1.0 / math.expm1(b)
    a = math.log(-c) / b
    return QuantizerConstants(a=a, b=b, c=c, bias=bias)


def warp_value(v: float, constants: QuantizerConstants) -> float:
    """Warp one real value; integers are exact fixed points."""
    frac = v - math.trunc(v)
    rnd = v - frac
    sign = 1.0 if frac >= 0 else -1.0
    f = abs(frac)
    if constants.is_identity:
        return rnd + sign * f
    return rnd + sign * (math.expm1(f * constants.b) / math.expm1(constants.b))


def warp_array(v: np.ndarray, constants: QuantizerConstants) -> np.ndarray:
    """Vectorized ``warp_value`` (float64)."""
    v = np.asarray(v, dtype=np.float64)
    frac = v - np.trunc(v)
    rnd = v - frac
    if constants.is_identity:
        return rnd + frac
    sign = np.where(frac >= 0, 1.0, -1.0)
    wf = np.expm1(np.abs(frac) * constants.b) / np.expm1(constants.b)
    return rnd + sign * wf


def round_half_away(v: np.ndarray) -> np.ndarray:
    """Round half away from zero (2.5 -> 3, -2.5 -> -3)."""
    v = np.asarray(v, dtype=np.float64)
    return np.trunc(v + np.copysign(0.5, v))


def constants_for_plan(
    group_sizes, upper_bound: float = DEFAULT_UPPER_BOUND, step: float = DEFAULT_STEP
) -> list[QuantizerConstants]:
    return [
        derive_constants(QuantizerConfig(upper_bound, step, k))
        for k in range(len(group_sizes))
    ]


def quantize_latent(
    y: np.ndarray,
    group_sizes,
    upper_bound: float = DEFAULT_UPPER_BOUND,
    step: float = DEFAULT_STEP,
    symbol_bound: int | None = None,
) -> np.ndarray:
    """Warp each channel group with its constants, then round to symbols.

    ``y`` is (N, C, H, W) with C equal to the plan's channel total.  Returns
    int32 symbols; when ``symbol_bound`` is given they are clipped to
    [-bound, bound] so downstream frequency tables always cover them.
    """
    y = np.asarray(y)
    if y.ndim != 4:
        raise ConfigError("quantize_latent: expected a 4-D latent tensor")
    total = int(sum(group_sizes))
    if y.shape[1] != total:
        raise ConfigError(
            f"quantize_latent: latent has {y.shape[1]} channels, "
            f"group plan covers {total}"
        )
    out = np.empty(y.shape, dtype=np.int64)
    start = 0
    for size, constants in zip(
        group_sizes, constants_for_plan(group_sizes, upper_bound, step)
    ):
        sl = y[:, start : start + size].astype(np.float64)
        out[:, start : start + size] = round_half_away(warp_array(sl, constants))
        start += size
    if symbol_bound is not None:
        np.clip(out, -symbol_bound, symbol_bound, out=out)
    return out.astype(np.int32)
