"""Minimal deterministic inference kernels.

Tensors are plain numpy arrays in NCHW layout (batch, channels, height,
width), dtype float32, C-order.  Every kernel is pure and accumulates in
float32 with a fixed loop order, so two runs with identical inputs and
weights produce bit-identical outputs on one platform:

* ``conv2d``   seeds the accumulator with the bias, then accumulates
  contributions in (in_channel, kernel_y, kernel_x) order.
* ``deconv2d`` accumulates in (in_channel, kernel_y, kernel_x) order into a
  zero buffer and adds the bias last.

No reduction is ever delegated to a library call whose summation order is
unspecified.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

LAYER_KINDS = ("conv", "deconv", "relu", "channel_softmax")


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a network chain.

    ``name`` is the dot-separated parameter path ("g_a.0"); weights resolve as
    ``<name>.weight`` / ``<name>.bias``.  Activation layers carry no channel
    or kernel fields.
    """

    name: str
    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 0
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigError(f"{self.name}: unknown layer kind {self.kind!r}")
        if self.kind in ("conv", "deconv"):
            if self.in_channels < 1 or self.out_channels < 1:
                raise ConfigError(f"{self.name}: channel counts must be >= 1")
            if self.kernel < 1 or self.stride < 1 or self.padding < 0:
                raise ConfigError(f"{self.name}: bad kernel/stride/padding")
            if self.kind == "conv" and self.kernel % 2 == 0:
                # Transposed convs may use even kernels (needed for exact
                # stride-2 upsampling); plain convs stay odd.
                raise ConfigError(f"{self.name}: conv kernel must be odd")


def ensure_nchw(x: np.ndarray, what: str = "input") -> np.ndarray:
    if not isinstance(x, np.ndarray) or x.ndim != 4:
        raise ConfigError(f"{what}: expected a 4-D (N, C, H, W) array")
    if min(x.shape) < 1:
        raise ConfigError(f"{what}: all dimensions must be >= 1")
    return np.ascontiguousarray(x, dtype=np.float32)


def conv_output_hw(spec: LayerSpec, h: int, w: int) -> tuple[int, int]:
    if spec.kind == "conv":
        oh = (h + 2 * spec.padding - spec.kernel) // spec.stride + 1
        ow = (w + 2 * spec.padding - spec.kernel) // spec.stride + 1
    elif spec.kind == "deconv":
        oh = (h - 1) * spec.stride - 2 * spec.padding + spec.kernel
        ow = (w - 1) * spec.stride - 2 * spec.padding + spec.kernel
    else:
        return h, w
    if oh < 1 or ow < 1:
        raise ConfigError(
            f"{spec.name}: output dims {oh}x{ow} from input {h}x{w} are invalid"
        )
    return oh, ow


def _layer_params(spec: LayerSpec, weights) -> tuple[np.ndarray, np.ndarray]:
    w = weights[f"{spec.name}.weight"]
    b = weights[f"{spec.name}.bias"]
    if spec.kind == "conv":
        want = (spec.out_channels, spec.in_channels, spec.kernel, spec.kernel)
    else:
        want = (spec.in_channels, spec.out_channels, spec.kernel, spec.kernel)
    if w.shape != want:
        raise ConfigError(
            f"{spec.name}.weight: shape {w.shape} does not match spec {want}"
        )
    if b.shape != (spec.out_channels,):
        raise ConfigError(
            f"{spec.name}.bias: shape {b.shape} does not match ({spec.out_channels},)"
        )
    return w, b


def conv2d(x: np.ndarray, spec: LayerSpec, weights) -> np.ndarray:
    """Strided 2-D convolution with zero padding.

    Weight layout (out_channels, in_channels, k, k).  The accumulator starts
    at the bias and sums in fixed (in_channel, ky, kx) order.
    """
    if spec.kind != "conv":
        raise ConfigError(f"{spec.name}: conv2d called on kind {spec.kind!r}")
    x = ensure_nchw(x, spec.name)
    n, c, h, w = x.shape
    if c != spec.in_channels:
        raise ConfigError(
            f"{spec.name}: input has {c} channels, spec wants {spec.in_channels}"
        )
    wt, bias = _layer_params(spec, weights)
    oh, ow = conv_output_hw(spec, h, w)
    p, s, k = spec.padding, spec.stride, spec.kernel
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    out = np.empty((n, spec.out_channels, oh, ow), dtype=np.float32)
    out[:] = bias[None, :, None, None]
    for ci in range(spec.in_channels):
        for ky in range(k):
            for kx in range(k):
                patch = xp[:, ci, ky : ky + oh * s : s, kx : kx + ow * s : s]
                out += wt[None, :, ci, ky, kx, None, None] * patch[:, None, :, :]
    return out


def deconv2d(x: np.ndarray, spec: LayerSpec, weights) -> np.ndarray:
    """Transposed 2-D convolution, the exact adjoint of ``conv2d``.

    Weight layout (in_channels, out_channels, k, k); with the same underlying
    array, <conv2d(x), y> == <x, deconv2d(y)> for zero biases.
    """
    if spec.kind != "deconv":
        raise ConfigError(f"{spec.name}: deconv2d called on kind {spec.kind!r}")
    x = ensure_nchw(x, spec.name)
    n, c, h, w = x.shape
    if c != spec.in_channels:
        raise ConfigError(
            f"{spec.name}: input has {c} channels, spec wants {spec.in_channels}"
        )
    wt, bias = _layer_params(spec, weights)
    oh, ow = conv_output_hw(spec, h, w)
    p, s, k = spec.padding, spec.stride, spec.kernel
    full = np.zeros(
        (n, spec.out_channels, (h - 1) * s + k, (w - 1) * s + k), dtype=np.float32
    )
    for ci in range(spec.in_channels):
        for ky in range(k):
            for kx in range(k):
                full[:, :, ky : ky + h * s : s, kx : kx + w * s : s] += (
                    wt[None, ci, :, ky, kx, None, None] * x[:, ci, None, :, :]
                )
    out = full[:, :, p : p + oh, p : p + ow]
    return out + bias[None, :, None, None]


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, v)."""
    return np.maximum(np.asarray(x, dtype=np.float32), np.float32(0.0))


def channel_softmax(x: np.ndarray) -> np.ndarray:
    """Softmax over the channel axis, stabilized by max subtraction.

    At every (batch, y, x) position the outputs are positive and sum to 1.
    """
    x = ensure_nchw(x, "channel_softmax")
    m = x.max(axis=1, keepdims=True)
    e = np.exp(x - m, dtype=np.float32)
    return e / e.sum(axis=1, keepdims=True, dtype=np.float32)


def apply_layer(x: np.ndarray, spec: LayerSpec, weights) -> np.ndarray:
    if spec.kind == "conv":
        return conv2d(x, spec, weights)
    if spec.kind == "deconv":
        return deconv2d(x, spec, weights)
    if spec.kind == "relu":
        return relu(x)
    return channel_softmax(x)


def run_chain(x: np.ndarray, specs: list[LayerSpec], weights) -> np.ndarray:
    """Apply a sequence of layers in order."""
    for spec in specs:
        x = apply_layer(x, spec, weights)
    return x


def chain_output(specs: list[LayerSpec], channels: int, h: int, w: int):
    """Walk a chain and return its output (channels, h, w), validating wiring."""
    for spec in specs:
        if spec.kind in ("conv", "deconv"):
            if spec.in_channels != channels:
                raise ConfigError(
                    f"{spec.name}: expects {spec.in_channels} channels, "
                    f"chain provides {channels}"
                )
            h, w = conv_output_hw(spec, h, w)
            channels = spec.out_channels
    return channels, h, w


def layer_macs(spec: LayerSpec, h: int, w: int) -> int:
    """Multiply-accumulate count of one layer at the given input dims.

    conv:   k^2 * c_in * c_out * h_out * w_out
    deconv: k^2 * c_in * c_out * h_in  * w_in
    Activations cost zero MACs.
    """
    if spec.kind == "conv":
        oh, ow = conv_output_hw(spec, h, w)
        return spec.kernel**2 * spec.in_channels * spec.out_channels * oh * ow
    if spec.kind == "deconv":
        return spec.kernel**2 * spec.in_channels * spec.out_channels * h * w
    return 0


def chain_macs(specs: list[LayerSpec], channels: int, h: int, w: int) -> int:
    """Total MACs of a chain; additive over its layers."""
    total = 0
    for spec in specs:
        if spec.kind in ("conv", "deconv"):
            if spec.in_channels != channels:
                raise ConfigError(
                    f"{spec.name}: expects {spec.in_channels} channels, "
                    f"chain provides {channels}"
                )
            total += layer_macs(spec, h, w)
            h, w = conv_output_hw(spec, h, w)
            channels = spec.out_channels
    return total


def chain_strides(specs: list[LayerSpec]) -> int:
    """Product of conv strides along a chain (total downsampling factor)."""
    f = 1
    for spec in specs:
        if spec.kind == "conv":
            f *= spec.stride
    return f
