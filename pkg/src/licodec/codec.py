"""End-to-end image encode/decode and the bit-exact container format.

Container layout, version 1, all multi-octet integers little-endian::

    offset  size  field
    0       4     magic "LCC1"
    4       1     version (1)
    5       1     lambda index
    6       2     image width  (original, pre-padding)
    8       2     image height (original, pre-padding)
    10      8     model hash (64-bit, binds the stream to one weight file)
    18      4     quantizer upper bound (float32)
    22      4     quantizer step (float32)
    26      1     group count G
    27      G     group sizes (one octet each)
    27+G    1     scale table id
    28+G    1     precision
    29+G    1     symbol bound
    30+G    4     hyper (AE2) payload length in bytes
    34+G    ...   AE2 payload, then the single AE1 payload
    end-4   4     CRC32 over every preceding byte

All coding units share one AE1 stream (units decode strictly in schedule
order, so no per-unit framing is needed); the AE2 stream carries the hyper
symbols under the model's static per-channel prior.  Reported bpp uses the
full container size; a payload-only figure is reported alongside.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import context as ctx
from .errors import (
    ChecksumError,
    ConfigError,
    ContainerError,
    ModelMismatchError,
    UnsupportedVersionError,
)
from .gaussian import TablePool, quantize_sigma_array, split_mu
from .model import Model
from .quantizer import quantize_latent
from .rangecoder import RangeDecoder, RangeEncoder
from .runtime import chain_output, run_chain

MAGIC = b"LCC1"
VERSION = 1
_FIXED_HEAD = struct.Struct("<4sBBHHQffB")
_TAIL = struct.Struct("<BBBI")


@dataclass(frozen=True)
class Container:
    lambda_index: int
    width: int
    height: int
    model_hash: int
    quant_upper_bound: float
    quant_step: float
    group_sizes: tuple[int, ...]
    scale_table_id: int
    precision: int
    symbol_bound: int
    z_data: bytes
    y_data: bytes

    def __post_init__(self):
        # header floats travel as float32; normalize so parse(serialize(c)) == c
        object.__setattr__(
            self, "quant_upper_bound", float(np.float32(self.quant_upper_bound))
        )
        object.__setattr__(self, "quant_step", float(np.float32(self.quant_step)))


def serialize_container(c: Container) -> bytes:
    if not (0 < c.width <= 0xFFFF and 0 < c.height <= 0xFFFF):
        raise ContainerError("image dims must fit in 16 bits")
    buf = bytearray()
    buf += _FIXED_HEAD.pack(
        MAGIC,
        VERSION,
        c.lambda_index,
        c.width,
        c.height,
        c.model_hash,
        c.quant_upper_bound,
        c.quant_step,
        len(c.group_sizes),
    )
    buf += bytes(c.group_sizes)
    buf += _TAIL.pack(c.scale_table_id, c.precision, c.symbol_bound, len(c.z_data))
    buf += c.z_data
    buf += c.y_data
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    return bytes(buf)


def parse_container(data: bytes) -> Container:
    """Validate structure and checksum; no model or entropy work."""
    if len(data) < _FIXED_HEAD.size + _TAIL.size + 4:
        raise ContainerError("container shorter than a minimal header")
    magic, version, lam, width, height, mhash, ub, step, ngroups = _FIXED_HEAD.unpack(
        data[: _FIXED_HEAD.size]
    )
    if magic != MAGIC:
        raise ContainerError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported container version {version}")
    pos = _FIXED_HEAD.size
    if len(data) < pos + ngroups + _TAIL.size + 4:
        raise ContainerError("truncated header")
    sizes = tuple(data[pos : pos + ngroups])
    pos += ngroups
    table_id, precision, bound, z_len = _TAIL.unpack(data[pos : pos + _TAIL.size])
    pos += _TAIL.size
    if len(data) < pos + z_len + 4:
        raise ContainerError("truncated payload")
    (crc_stored,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != crc_stored:
        raise ChecksumError("container checksum mismatch")
    z_data = data[pos : pos + z_len]
    y_data = data[pos + z_len : -4]
    if ngroups < 1 or any(s < 1 for s in sizes):
        raise ContainerError("invalid group plan in header")
    return Container(
        lambda_index=lam,
        width=width,
        height=height,
        model_hash=mhash,
        quant_upper_bound=ub,
        quant_step=step,
        group_sizes=sizes,
        scale_table_id=table_id,
        precision=precision,
        symbol_bound=bound,
        z_data=z_data,
        y_data=y_data,
    )


@dataclass
class EncodeResult:
    container: bytes
    bpp: float
    payload_bpp: float
    estimated_bits: float
    z_bits_estimate: float
    y_bits_estimate: float
    y_symbols: np.ndarray
    z_symbols: np.ndarray
    reconstruction: np.ndarray  # encoder-side synthesis, uint8 (H, W, 3)


@dataclass
class DecodeResult:
    image: np.ndarray  # uint8 (H, W, 3)
    y_symbols: np.ndarray
    z_symbols: np.ndarray


def _check_image(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ConfigError("expected an (H, W, 3) uint8 image")
    h, w = image.shape[:2]
    if not (0 < w <= 0xFFFF and 0 < h <= 0xFFFF):
        raise ConfigError("image dims must be in [1, 65535]")
    return image


def _pad_image(image: np.ndarray, multiple: int) -> np.ndarray:
    h, w = image.shape[:2]
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph or pw:
        image = np.pad(image, ((0, ph), (0, pw), (0, 0)), mode="edge")
    return image


def _to_uint8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(x * 255.0), 0, 255).astype(np.uint8)


def _latent_dims(model: Model, padded_h: int, padded_w: int):
    cfg = model.config
    m, h, w = chain_output(cfg.chains["g_a"], 3, padded_h, padded_w)
    cz, hz, wz = chain_output(cfg.chains["h_a"], m, h, w)
    return (m, h, w), (cz, hz, wz)


def _z_table_args(model: Model, hz: int, wz: int):
    idx = np.repeat(model.z_sigma_indices(), hz * wz)
    offs = np.zeros(idx.size, dtype=np.int64)
    return offs, idx


def encode_image(image: np.ndarray, model: Model) -> EncodeResult:
    """Compress one image; also returns the encoder-side reconstruction the
    decoder must reproduce byte for byte."""
    image = _check_image(image)
    cfg = model.config
    orig_h, orig_w = image.shape[:2]
    padded = _pad_image(image, cfg.downsample_multiple)
    x = (padded.astype(np.float32) / np.float32(255.0)).transpose(2, 0, 1)[None]

    y = run_chain(x, cfg.chains["g_a"], model.weights)
    y_hat = quantize_latent(
        y,
        cfg.group_sizes,
        cfg.quant_upper_bound,
        cfg.quant_step,
        cfg.symbol_bound,
    )
    z_hat = ctx.hyper_analyze(y, cfg.chains["h_a"], model.weights, cfg.symbol_bound)
    p = ctx.hyper_synthesize(z_hat, cfg.chains["h_s"], model.weights)
    if p.shape[2:] != y.shape[2:]:
        raise ConfigError(
            "hyper path does not mirror latent dims; pad multiple misconfigured"
        )

    bound = cfg.symbol_bound
    pool = TablePool(-2 * bound, 2 * bound, cfg.precision, model.scale_table)

    # AE2: hyper symbols under the static per-channel prior
    _, hz, wz = z_hat.shape[1:]
    z_sym = z_hat.reshape(-1).astype(np.int64)
    z_offs, z_idx = _z_table_args(model, hz, wz)
    z_tables = pool.tables(z_offs, z_idx)
    enc_z = RangeEncoder()
    for table, s in zip(z_tables, z_sym):
        enc_z.encode_symbol(table, int(s))
    z_stream = enc_z.flush()
    z_bits = pool.estimate_bits(z_sym, z_offs, z_idx)

    # AE1: all coding units, one stream, schedule order
    plan = cfg.plan
    h, w = y.shape[2:]
    latent_plane = y_hat.astype(np.float32)
    enc_y = RangeEncoder()
    y_bits = 0.0
    for unit in ctx.schedule(plan):
        mask = ctx.unit_spatial_mask(unit, h, w)
        if not mask.any():
            continue
        params = ctx.entropy_parameters(
            p, latent_plane, unit, plan, cfg.ctx_width, model.weights
        )
        mu_u = params.mu[:, mask].reshape(-1)
        sig_u = params.sigma[:, mask].reshape(-1)
        sym_u = y_hat[0, unit.chan_start : unit.chan_stop][:, mask].reshape(-1)
        mu_round, off_int = split_mu(mu_u, bound)
        sig_idx = quantize_sigma_array(sig_u, pool.scale_table)
        res = sym_u.astype(np.int64) - mu_round
        for table, r in zip(pool.tables(off_int, sig_idx), res):
            enc_y.encode_symbol(table, int(r))
        y_bits += pool.estimate_bits(res, off_int, sig_idx)
    y_stream = enc_y.flush()

    container = serialize_container(
        Container(
            lambda_index=model.lambda_index,
            width=orig_w,
            height=orig_h,
            model_hash=model.weight_hash,
            quant_upper_bound=cfg.quant_upper_bound,
            quant_step=cfg.quant_step,
            group_sizes=cfg.group_sizes,
            scale_table_id=cfg.scale_table_id,
            precision=cfg.precision,
            symbol_bound=bound,
            z_data=z_stream.data,
            y_data=y_stream.data,
        )
    )

    recon = run_chain(latent_plane, cfg.chains["g_s"], model.weights)
    recon = _to_uint8(recon[0].transpose(1, 2, 0)[:orig_h, :orig_w])

    pixels = orig_w * orig_h
    return EncodeResult(
        container=container,
        bpp=8.0 * len(container) / pixels,
        payload_bpp=8.0 * (len(z_stream.data) + len(y_stream.data)) / pixels,
        estimated_bits=z_bits + y_bits,
        z_bits_estimate=z_bits,
        y_bits_estimate=y_bits,
        y_symbols=y_hat,
        z_symbols=z_hat,
        reconstruction=recon,
    )


def decode_image(container: bytes, model: Model) -> DecodeResult:
    """Recover the symbol planes exactly, then synthesize deterministically."""
    c = parse_container(container)
    if c.model_hash != model.weight_hash:
        raise ModelMismatchError(
            f"container was written by model {c.model_hash:016x}, "
            f"supplied model is {model.weight_hash:016x}"
        )
    if c.lambda_index != model.lambda_index:
        raise ModelMismatchError(
            f"container lambda index {c.lambda_index} != model {model.lambda_index}"
        )
    cfg = model.config
    if tuple(c.group_sizes) != cfg.group_sizes:
        raise ModelMismatchError("header group plan differs from the model's")
    if (
        c.scale_table_id != cfg.scale_table_id
        or c.precision != cfg.precision
        or c.symbol_bound != cfg.symbol_bound
    ):
        raise ModelMismatchError("header coding profile differs from the model's")

    mult = cfg.downsample_multiple
    padded_h = c.height + (-c.height) % mult
    padded_w = c.width + (-c.width) % mult
    (m, h, w), (cz, hz, wz) = _latent_dims(model, padded_h, padded_w)

    bound = c.symbol_bound
    pool = TablePool(-2 * bound, 2 * bound, c.precision, model.scale_table)

    z_offs, z_idx = _z_table_args(model, hz, wz)
    z_tables = pool.tables(z_offs, z_idx)
    dec_z = RangeDecoder(c.z_data)
    z_sym = np.array(
        [dec_z.decode_symbol(t) for t in z_tables], dtype=np.int32
    )
    z_hat = z_sym.reshape(1, cz, hz, wz)
    p = ctx.hyper_synthesize(z_hat, cfg.chains["h_s"], model.weights)

    plan = cfg.plan
    latent_plane = np.zeros((1, m, h, w), dtype=np.float32)
    y_hat = np.zeros((1, m, h, w), dtype=np.int32)
    dec_y = RangeDecoder(c.y_data)
    for unit in ctx.schedule(plan):
        mask = ctx.unit_spatial_mask(unit, h, w)
        if not mask.any():
            continue
        params = ctx.entropy_parameters(
            p, latent_plane, unit, plan, cfg.ctx_width, model.weights
        )
        mu_u = params.mu[:, mask].reshape(-1)
        sig_u = params.sigma[:, mask].reshape(-1)
        mu_round, off_int = split_mu(mu_u, bound)
        sig_idx = quantize_sigma_array(sig_u, pool.scale_table)
        tables = pool.tables(off_int, sig_idx)
        res = np.array([dec_y.decode_symbol(t) for t in tables], dtype=np.int64)
        sym = (res + mu_round).reshape(unit.size, -1)
        y_hat[0, unit.chan_start : unit.chan_stop][:, mask] = sym
        latent_plane[0, unit.chan_start : unit.chan_stop][:, mask] = sym

    recon = run_chain(latent_plane, cfg.chains["g_s"], model.weights)
    image = _to_uint8(recon[0].transpose(1, 2, 0)[: c.height, : c.width])
    return DecodeResult(image=image, y_symbols=y_hat, z_symbols=z_hat)
