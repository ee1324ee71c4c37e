"""Model configuration, loading, the toy-model generator, and MAC accounting.

The network definition file is a flat key-value text document, one layer per
line::

    # comment
    g_a.0 = conv 3 24 5 2 2        # kind in_ch out_ch kernel stride padding
    g_a.1 = relu
    ...
    groups = 1 1 2 4 12
    ctx_width = 24
    quant_upper_bound = 0.5
    quant_step = 0.04
    precision = 16
    scale_table_id = 0
    symbol_bound = 16

Context networks are not listed: they are derived from (latent channels,
ctx_width, groups); see ``context.context_layer_specs``.  A model directory
holds one ``model.cfg`` plus one weight file per rate point, named
``weights_<lambda_index>.lwt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import context as ctx
from .errors import ConfigError
from .gaussian import quantize_sigma_array, scale_table_by_id
from .quantizer import DEFAULT_STEP, DEFAULT_UPPER_BOUND, constants_for_plan
from .runtime import LayerSpec, chain_macs, chain_output, chain_strides, run_chain
from .weights import WeightStore, load_weights, save_weights, weight_file_hash

CONFIG_NAME = "model.cfg"
CHAIN_NAMES = ("g_a", "g_s", "h_a", "h_s")
DEFAULT_SYMBOL_BOUND = 16
DEFAULT_PRECISION = 16


@dataclass
class ModelConfig:
    chains: dict[str, list[LayerSpec]]
    group_sizes: tuple[int, ...]
    ctx_width: int
    quant_upper_bound: float = DEFAULT_UPPER_BOUND
    quant_step: float = DEFAULT_STEP
    precision: int = DEFAULT_PRECISION
    scale_table_id: int = 0
    symbol_bound: int = DEFAULT_SYMBOL_BOUND

    def __post_init__(self):
        for name in CHAIN_NAMES:
            if name not in self.chains or not self.chains[name]:
                raise ConfigError(f"model config missing chain {name!r}")
        m = self.latent_channels
        if sum(self.group_sizes) != m:
            raise ConfigError(
                f"groups sum to {sum(self.group_sizes)}, latent has {m} channels"
            )
        if any(s < 1 or s > 255 for s in self.group_sizes):
            raise ConfigError("group sizes must be in [1, 255]")
        if len(self.group_sizes) > 255:
            raise ConfigError("at most 255 groups")
        first = self.chains["g_a"][0]
        if first.in_channels != 3:
            raise ConfigError("g_a must take 3 input channels")
        # wiring checks at one downsampling multiple
        ref = self.downsample_multiple
        _, h, w = chain_output(self.chains["g_a"], 3, ref, ref)
        cz, hz, wz = chain_output(self.chains["h_a"], m, h, w)
        pc, ph, pw = chain_output(self.chains["h_s"], cz, hz, wz)
        if pc != 2 * m:
            raise ConfigError(
                f"h_s must output {2 * m} channels (2x latent), got {pc}"
            )
        if (ph, pw) != (h, w):
            raise ConfigError("h_s output dims do not mirror the latent dims")
        rc, rh, rw = chain_output(self.chains["g_s"], m, h, w)
        if rc != 3 or (rh, rw) != (ref, ref):
            raise ConfigError("g_s does not mirror g_a back to the image dims")
        if self.ctx_width < 1:
            raise ConfigError("ctx_width must be >= 1")
        if self.symbol_bound < 1 or self.symbol_bound > 127:
            raise ConfigError("symbol_bound must be in [1, 127]")
        # every group index must yield a valid bias
        constants_for_plan(self.group_sizes, self.quant_upper_bound, self.quant_step)

    @property
    def latent_channels(self) -> int:
        return self.chains["g_a"][-1].out_channels

    @property
    def hyper_channels(self) -> int:
        return self.chains["h_a"][-1].out_channels

    @property
    def downsample_multiple(self) -> int:
        """Images are padded to a multiple of this before analysis."""
        return chain_strides(self.chains["g_a"]) * chain_strides(self.chains["h_a"])

    @property
    def plan(self) -> ctx.GroupPlan:
        return ctx.GroupPlan(self.group_sizes)

    def context_specs(self) -> dict[int, list[LayerSpec]]:
        return ctx.context_layer_specs(
            self.latent_channels, self.ctx_width, self.group_sizes
        )

    def all_parameter_specs(self) -> list[LayerSpec]:
        specs = []
        for name in CHAIN_NAMES:
            specs.extend(s for s in self.chains[name] if s.kind in ("conv", "deconv"))
        for group_specs in self.context_specs().values():
            specs.extend(group_specs)
        return specs


def _parse_layer(name: str, value: str) -> LayerSpec:
    parts = value.split()
    kind = parts[0]
    if kind in ("relu", "channel_softmax"):
        if len(parts) != 1:
            raise ConfigError(f"{name}: {kind} takes no arguments")
        return LayerSpec(name=name, kind=kind)
    if kind in ("conv", "deconv"):
        if len(parts) != 6:
            raise ConfigError(
                f"{name}: expected '{kind} in out kernel stride padding'"
            )
        try:
            cin, cout, k, s, p = (int(v) for v in parts[1:])
        except ValueError:
            raise ConfigError(f"{name}: non-integer layer argument") from None
        return LayerSpec(name, kind, cin, cout, k, s, p)
    raise ConfigError(f"{name}: unknown layer kind {kind!r}")


def parse_model_config(text: str, origin: str = "<config>") -> ModelConfig:
    chains: dict[str, dict[int, LayerSpec]] = {n: {} for n in CHAIN_NAMES}
    scalars: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        head = key.split(".", 1)[0]
        if head in CHAIN_NAMES:
            try:
                idx = int(key.split(".", 1)[1])
            except (IndexError, ValueError):
                raise ConfigError(f"{origin}:{lineno}: bad layer key {key!r}") from None
            if idx in chains[head]:
                raise ConfigError(f"{origin}:{lineno}: duplicate layer {key!r}")
            chains[head][idx] = _parse_layer(key, value)
        else:
            if key in scalars:
                raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
            scalars[key] = value
    ordered: dict[str, list[LayerSpec]] = {}
    for name, members in chains.items():
        if sorted(members) != list(range(len(members))):
            raise ConfigError(f"{origin}: {name} layer indices must be 0..n-1")
        ordered[name] = [members[i] for i in range(len(members))]

    def scalar(key, conv, default=None):
        if key not in scalars:
            if default is None:
                raise ConfigError(f"{origin}: missing key {key!r}")
            return default
        try:
            return conv(scalars.pop(key))
        except ValueError:
            raise ConfigError(f"{origin}: bad value for {key!r}") from None

    groups = scalar("groups", lambda v: tuple(int(t) for t in v.split()))
    cfg = ModelConfig(
        chains=ordered,
        group_sizes=groups,
        ctx_width=scalar("ctx_width", int),
        quant_upper_bound=scalar("quant_upper_bound", float, DEFAULT_UPPER_BOUND),
        quant_step=scalar("quant_step", float, DEFAULT_STEP),
        precision=scalar("precision", int, DEFAULT_PRECISION),
        scale_table_id=scalar("scale_table_id", int, 0),
        symbol_bound=scalar("symbol_bound", int, DEFAULT_SYMBOL_BOUND),
    )
    known = {"groups"}
    leftovers = set(scalars) - known
    if leftovers:
        raise ConfigError(f"{origin}: unknown keys {sorted(leftovers)}")
    return cfg


def write_model_config(cfg: ModelConfig, path) -> None:
    lines = ["# licodec model definition"]
    for name in CHAIN_NAMES:
        for spec in cfg.chains[name]:
            if spec.kind in ("conv", "deconv"):
                lines.append(
                    f"{spec.name} = {spec.kind} {spec.in_channels} "
                    f"{spec.out_channels} {spec.kernel} {spec.stride} {spec.padding}"
                )
            else:
                lines.append(f"{spec.name} = {spec.kind}")
    lines.append(f"groups = {' '.join(str(s) for s in cfg.group_sizes)}")
    lines.append(f"ctx_width = {cfg.ctx_width}")
    lines.append(f"quant_upper_bound = {cfg.quant_upper_bound!r}")
    lines.append(f"quant_step = {cfg.quant_step!r}")
    lines.append(f"precision = {cfg.precision}")
    lines.append(f"scale_table_id = {cfg.scale_table_id}")
    lines.append(f"symbol_bound = {cfg.symbol_bound}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


Z_SIGMA_PARAM = "hyper_prior.sigma"


@dataclass
class Model:
    """Config + weights + identity; everything a codec session needs."""

    config: ModelConfig
    weights: WeightStore
    weight_hash: int
    lambda_index: int = 0
    _z_sigma_idx: np.ndarray = field(default=None, repr=False)

    def validate(self) -> None:
        for spec in self.config.all_parameter_specs():
            for suffix, shape in _expected_shapes(spec):
                arr = self.weights[f"{spec.name}.{suffix}"]
                if arr.shape != shape:
                    raise ConfigError(
                        f"{spec.name}.{suffix}: shape {arr.shape}, expected {shape}"
                    )
        zs = self.weights[Z_SIGMA_PARAM]
        if zs.shape != (self.config.hyper_channels,):
            raise ConfigError(
                f"{Z_SIGMA_PARAM}: shape {zs.shape}, expected "
                f"({self.config.hyper_channels},)"
            )

    @property
    def scale_table(self) -> np.ndarray:
        return scale_table_by_id(self.config.scale_table_id)

    def z_sigma_indices(self) -> np.ndarray:
        if self._z_sigma_idx is None:
            self._z_sigma_idx = quantize_sigma_array(
                self.weights[Z_SIGMA_PARAM].astype(np.float64), self.scale_table
            )
        return self._z_sigma_idx


def _expected_shapes(spec: LayerSpec):
    if spec.kind == "conv":
        yield "weight", (spec.out_channels, spec.in_channels, spec.kernel, spec.kernel)
    else:
        yield "weight", (spec.in_channels, spec.out_channels, spec.kernel, spec.kernel)
    yield "bias", (spec.out_channels,)


def load_model(config_path, weights_path, lambda_index: int = 0) -> Model:
    cfg_path = Path(config_path)
    if not cfg_path.exists():
        raise ConfigError(f"model config not found: {cfg_path}")
    cfg = parse_model_config(cfg_path.read_text(encoding="ascii"), str(cfg_path))
    model = Model(
        config=cfg,
        weights=load_weights(weights_path),
        weight_hash=weight_file_hash(weights_path),
        lambda_index=lambda_index,
    )
    model.validate()
    return model


def model_from_dir(model_dir, lambda_index: int = 0) -> Model:
    d = Path(model_dir)
    return load_model(
        d / CONFIG_NAME, d / f"weights_{lambda_index}.lwt", lambda_index
    )


def available_lambdas(model_dir) -> list[int]:
    d = Path(model_dir)
    out = []
    for p in sorted(d.glob("weights_*.lwt")):
        stem = p.stem.split("_", 1)[1]
        if stem.isdigit():
            out.append(int(stem))
    return out


# ----------------------------------------------------------------------
# toy model
# ----------------------------------------------------------------------

def make_toy_config(
    latent_channels: int = 20,
    base_channels: int = 24,
    hyper_channels: int = 16,
    ctx_width: int = 24,
    symbol_bound: int = DEFAULT_SYMBOL_BOUND,
) -> ModelConfig:
    """Documented toy default: four stride-2 analysis convs, mirrored
    transposed-conv synthesis, two-stage hyper pair.  A stand-in backbone:
    the codec logic, not the backbone, is the subject here."""
    n, m, hc = base_channels, latent_channels, hyper_channels

    def conv(name, i, cin, cout, k=5, s=2, p=2):
        return LayerSpec(f"{name}.{i}", "conv", cin, cout, k, s, p)

    def deconv(name, i, cin, cout):
        return LayerSpec(f"{name}.{i}", "deconv", cin, cout, 4, 2, 1)

    def act(name, i):
        return LayerSpec(f"{name}.{i}", "relu")

    chains = {
        "g_a": [
            conv("g_a", 0, 3, n), act("g_a", 1),
            conv("g_a", 2, n, n), act("g_a", 3),
            conv("g_a", 4, n, n), act("g_a", 5),
            conv("g_a", 6, n, m),
        ],
        "g_s": [
            deconv("g_s", 0, m, n), act("g_s", 1),
            deconv("g_s", 2, n, n), act("g_s", 3),
            deconv("g_s", 4, n, n), act("g_s", 5),
            deconv("g_s", 6, n, 3),
        ],
        "h_a": [
            LayerSpec("h_a.0", "conv", m, hc, 3, 2, 1), act("h_a", 1),
            LayerSpec("h_a.2", "conv", hc, hc, 3, 2, 1),
        ],
        "h_s": [
            deconv("h_s", 0, hc, n), act("h_s", 1),
            deconv("h_s", 2, n, 2 * m),
        ],
    }
    return ModelConfig(
        chains=chains,
        group_sizes=ctx.default_group_split(m),
        ctx_width=ctx_width,
        symbol_bound=symbol_bound,
    )


def make_toy_weights(
    cfg: ModelConfig, seed: int = 0, latent_gain: float = 4.0
) -> WeightStore:
    """Seeded random weights at toy scale.

    ``latent_gain`` scales the final analysis layer, spreading latent symbols
    over several integers; per-channel hyper-prior sigmas are calibrated by
    pushing seeded noise images through the analysis/hyper pair.
    """
    rng = np.random.default_rng(seed)
    store = WeightStore()
    for spec in cfg.all_parameter_specs():
        fan_in = spec.in_channels * spec.kernel * spec.kernel
        for suffix, shape in _expected_shapes(spec):
            if suffix == "weight":
                w = rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=shape)
                if spec.name == cfg.chains["g_a"][-1].name:
                    w = w * latent_gain
                store.add(f"{spec.name}.weight", w.astype(np.float32))
            else:
                b = rng.normal(0.0, 0.05, size=shape)
                store.add(f"{spec.name}.bias", b.astype(np.float32))
    # calibrate the static hyper prior on seeded noise
    cal_rng = np.random.default_rng(seed + 1)
    zs = []
    mult = cfg.downsample_multiple
    for _ in range(6):
        img = cal_rng.random((1, 3, mult, mult), dtype=np.float32)
        y = run_chain(img, cfg.chains["g_a"], store)
        z_hat = ctx.hyper_analyze(y, cfg.chains["h_a"], store, cfg.symbol_bound)
        zs.append(z_hat.astype(np.float64).reshape(cfg.hyper_channels, -1))
    stacked = np.concatenate(zs, axis=1)
    sigma = np.maximum(stacked.std(axis=1) * 1.25, 0.25)
    store.add(Z_SIGMA_PARAM, sigma.astype(np.float32))
    return store


TOY_LAMBDA_GAINS = (2.0, 3.0, 4.5, 6.5, 9.0)


def write_toy_model_dir(path, seed: int = 0, n_lambdas: int = 5) -> Path:
    """Write model.cfg plus one weight file per rate point.

    Rate points come from scaling the last analysis layer (bigger latents,
    more bits), a toy device standing in for actually trained rate points.
    """
    if not 1 <= n_lambdas <= len(TOY_LAMBDA_GAINS):
        raise ConfigError(f"n_lambdas must be in [1, {len(TOY_LAMBDA_GAINS)}]")
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    cfg = make_toy_config()
    write_model_config(cfg, d / CONFIG_NAME)
    for lam in range(n_lambdas):
        store = make_toy_weights(cfg, seed=seed, latent_gain=TOY_LAMBDA_GAINS[lam])
        save_weights(store, d / f"weights_{lam}.lwt")
    return d


# ----------------------------------------------------------------------
# MAC accounting
# ----------------------------------------------------------------------

def flops_report(cfg: ModelConfig, width: int, height: int) -> dict:
    """Per-module multiply-accumulate counts at the given image size.

    Context networks run once per parity phase, so their chain MACs count
    twice.  ``hyper_context_ratio`` is (h_a + h_s + ctx) / total in percent.
    """
    if width < cfg.downsample_multiple or height < cfg.downsample_multiple:
        raise ConfigError(
            f"image must be at least {cfg.downsample_multiple} pixels per side"
        )
    m = cfg.latent_channels
    g_a = chain_macs(cfg.chains["g_a"], 3, height, width)
    _, h, w = chain_output(cfg.chains["g_a"], 3, height, width)
    g_s = chain_macs(cfg.chains["g_s"], m, h, w)
    h_a = chain_macs(cfg.chains["h_a"], m, h, w)
    cz, hz, wz = chain_output(cfg.chains["h_a"], m, h, w)
    h_s = chain_macs(cfg.chains["h_s"], cz, hz, wz)
    ctx_macs = 0
    for specs in cfg.context_specs().values():
        ctx_macs += 2 * chain_macs(specs, 3 * m, h, w)
    total = g_a + g_s + h_a + h_s + ctx_macs
    return {
        "g_a": g_a,
        "g_s": g_s,
        "h_a": h_a,
        "h_s": h_s,
        "ctx": ctx_macs,
        "total": total,
        "hyper_context_ratio": 100.0 * (h_a + h_s + ctx_macs) / total,
    }
