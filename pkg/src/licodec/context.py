"""Hyper transforms, channel grouping, checkerboard scheduling, and the
conditional (mu, sigma) head.

Latent channels are split into ordered groups (uneven by default, small
groups first); each group is coded in two spatial phases, anchors
((y+x) even) before nonanchors.  Earlier units condition later ones: the
context input to a group's network is the hyper output concatenated with the
full latent plane masked down to exactly the already-coded positions, so
causality is enforced structurally no matter what the caller leaves in the
not-yet-coded cells.

Each group g owns a small network ``ctx.g<g>``: a 1x1 stem conv, ReLU, a
channel-attention block, and a 1x1 head conv producing 2*group_size planes:
the first half is mu, the second half maps to sigma through exp.

The channel-attention block gates a 5x5 conv feature branch with per-position
channel weights from a 1x1 conv -> ReLU -> 1x1 conv -> channel softmax path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CodecError, ConfigError
from .quantizer import round_half_away
from .runtime import LayerSpec, conv2d, ensure_nchw, relu, channel_softmax, run_chain

ANCHOR = "anchor"
NONANCHOR = "nonanchor"

# exponent clamp keeping sigma = exp(head) finite and well past the scale
# table's ends in both directions
_SIGMA_LOG_CLIP = 16.0


def default_group_split(channels: int, groups: int = 5) -> tuple[int, ...]:
    """Uneven split with small groups first: fractions (1/20, 1/20, 1/10, 1/5)
    of the channel count, remainder in the last group; every group >= 1."""
    if groups != 5:
        raise ConfigError("default split is defined for five groups")
    fracs = (1 / 20, 1 / 20, 1 / 10, 1 / 5)
    sizes = [max(1, round(channels * f)) for f in fracs]
    rest = channels - sum(sizes)
    if rest < 1:
        raise ConfigError(
            f"cannot split {channels} channels into five nonempty groups"
        )
    return (*sizes, rest)


@dataclass(frozen=True)
class GroupPlan:
    group_sizes: tuple[int, ...]

    def __post_init__(self):
        if len(self.group_sizes) < 1 or any(s < 1 for s in self.group_sizes):
            raise ConfigError("group sizes must all be >= 1")

    @property
    def channels(self) -> int:
        return sum(self.group_sizes)

    @property
    def offsets(self) -> tuple[int, ...]:
        offs = [0]
        for s in self.group_sizes:
            offs.append(offs[-1] + s)
        return tuple(offs)


@dataclass(frozen=True)
class CodingUnit:
    """One (group, parity phase) slice of the latent tensor."""

    group: int
    phase: str
    chan_start: int
    chan_stop: int

    @property
    def size(self) -> int:
        return self.chan_stop - self.chan_start


def schedule(plan: GroupPlan) -> list[CodingUnit]:
    """Deterministic total coding order: groups ascending, anchor first.

    Always 2 * len(groups) units; degenerate grids may give a unit an empty
    spatial mask but it stays scheduled.
    """
    units = []
    offs = plan.offsets
    for g, size in enumerate(plan.group_sizes):
        for phase in (ANCHOR, NONANCHOR):
            units.append(
                CodingUnit(
                    group=g, phase=phase, chan_start=offs[g], chan_stop=offs[g] + size
                )
            )
    return units


def anchor_mask(h: int, w: int) -> np.ndarray:
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    return (yy + xx) % 2 == 0


def unit_spatial_mask(unit: CodingUnit, h: int, w: int) -> np.ndarray:
    m = anchor_mask(h, w)
    return m if unit.phase == ANCHOR else ~m


def causal_input_mask(plan: GroupPlan, unit: CodingUnit, h: int, w: int) -> np.ndarray:
    """(channels, h, w) float32 mask of everything coded strictly before
    ``unit``: all prior groups everywhere, plus this group's anchors when the
    unit is the nonanchor phase."""
    offs = plan.offsets
    if not (0 <= unit.group < len(plan.group_sizes)):
        raise CodecError(f"unit group {unit.group} outside the plan")
    if (unit.chan_start, unit.chan_stop) != (offs[unit.group], offs[unit.group + 1]):
        raise CodecError("unit channel slice does not match the group plan")
    mask = np.zeros((plan.channels, h, w), dtype=np.float32)
    mask[: unit.chan_start] = 1.0
    if unit.phase == NONANCHOR:
        mask[unit.chan_start : unit.chan_stop, anchor_mask(h, w)] = 1.0
    return mask


def context_layer_specs(
    latent_channels: int, ctx_width: int, group_sizes
) -> dict[int, list[LayerSpec]]:
    """Conv specs of each group's context network (for weight validation and
    MAC accounting; the wiring itself is in ``entropy_parameters``)."""
    in_ch = 3 * latent_channels  # hyper output (2M) + masked latent plane (M)
    specs = {}
    for g, size in enumerate(group_sizes):
        prefix = f"ctx.g{g}"
        specs[g] = [
            LayerSpec(f"{prefix}.stem", "conv", in_ch, ctx_width, 1, 1, 0),
            LayerSpec(f"{prefix}.catt.branch", "conv", ctx_width, ctx_width, 5, 1, 2),
            LayerSpec(f"{prefix}.catt.att1", "conv", ctx_width, ctx_width, 1, 1, 0),
            LayerSpec(f"{prefix}.catt.att2", "conv", ctx_width, ctx_width, 1, 1, 0),
            LayerSpec(f"{prefix}.head", "conv", ctx_width, 2 * size, 1, 1, 0),
        ]
    return specs


def chann_atten_block(features: np.ndarray, prefix: str, weights) -> np.ndarray:
    """Feature branch (5x5 conv) gated by channel-softmax attention weights.

    Attention path: 1x1 conv -> ReLU -> 1x1 conv -> channel softmax.  Output
    shape equals input shape; at every position the attention weights sum
    to 1 over channels.
    """
    features = ensure_nchw(features, prefix)
    c = features.shape[1]
    branch = conv2d(
        features, LayerSpec(f"{prefix}.branch", "conv", c, c, 5, 1, 2), weights
    )
    att = conv2d(
        features, LayerSpec(f"{prefix}.att1", "conv", c, c, 1, 1, 0), weights
    )
    att = relu(att)
    att = conv2d(att, LayerSpec(f"{prefix}.att2", "conv", c, c, 1, 1, 0), weights)
    att = channel_softmax(att)
    return branch * att


@dataclass(frozen=True)
class GaussianParams:
    """Per-element conditional mean and scale for one coding unit."""

    mu: np.ndarray  # (unit channels, h, w) float32
    sigma: np.ndarray  # same shape, positive

    def __post_init__(self):
        if self.mu.shape != self.sigma.shape:
            raise ConfigError("mu and sigma shapes differ")


def entropy_parameters(
    p: np.ndarray,
    latent_plane: np.ndarray,
    unit: CodingUnit,
    plan: GroupPlan,
    ctx_width: int,
    weights,
) -> GaussianParams:
    """(mu, sigma) for exactly the elements of ``unit``.

    ``latent_plane`` is the (1, M, h, w) plane of reconstructed symbol values;
    positions not yet coded may hold anything; the causal mask zeroes them
    before the network sees them, so encoder and decoder get bit-identical
    parameters from bit-identical hyper output and coded-so-far symbols.
    """
    p = ensure_nchw(p, "hyper output")
    latent_plane = ensure_nchw(latent_plane, "latent plane")
    m = plan.channels
    if latent_plane.shape[1] != m:
        raise ConfigError(
            f"latent plane has {latent_plane.shape[1]} channels, plan has {m}"
        )
    if p.shape[1] != 2 * m:
        raise ConfigError(
            f"hyper output has {p.shape[1]} channels, expected {2 * m}"
        )
    if p.shape[2:] != latent_plane.shape[2:]:
        raise ConfigError("hyper output and latent plane dims differ")
    h, w = latent_plane.shape[2:]
    mask = causal_input_mask(plan, unit, h, w)
    ctx_in = np.concatenate([p[0], latent_plane[0] * mask])[None]
    prefix = f"ctx.g{unit.group}"
    x = conv2d(
        ctx_in,
        LayerSpec(f"{prefix}.stem", "conv", 3 * m, ctx_width, 1, 1, 0),
        weights,
    )
    x = relu(x)
    x = chann_atten_block(x, f"{prefix}.catt", weights)
    out = conv2d(
        x,
        LayerSpec(f"{prefix}.head", "conv", ctx_width, 2 * unit.size, 1, 1, 0),
        weights,
    )
    mu = out[0, : unit.size]
    log_sigma = np.clip(out[0, unit.size :], -_SIGMA_LOG_CLIP, _SIGMA_LOG_CLIP)
    sigma = np.exp(log_sigma, dtype=np.float32)
    return GaussianParams(mu=mu, sigma=sigma)


def hyper_analyze(
    y: np.ndarray, h_a_specs: list[LayerSpec], weights, symbol_bound: int
) -> np.ndarray:
    """Run the hyper analysis chain and quantize by plain rounding (half away
    from zero); hyper latents bypass the exponential warp.  Returns int32
    symbols clipped to the coding bound."""
    y = ensure_nchw(y, "latent")
    z = run_chain(y, h_a_specs, weights)
    z_hat = round_half_away(z.astype(np.float64))
    return np.clip(z_hat, -symbol_bound, symbol_bound).astype(np.int32)


def hyper_synthesize(
    z_hat: np.ndarray, h_s_specs: list[LayerSpec], weights
) -> np.ndarray:
    """Synthesize the hyper output p from quantized hyper symbols."""
    z = np.ascontiguousarray(z_hat, dtype=np.float32)
    return run_chain(z, h_s_specs, weights)
