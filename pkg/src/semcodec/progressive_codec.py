"""Channel-progressive latent bitstream with semantic prefix blocks.

A latent tensor of C channels is split into three blocks at boundaries
(k1, k2, k3 = C).  Each block is entropy-coded under parameters derived
only from earlier blocks (block-causal masking), so any prefix of whole
blocks decodes on its own; within a block, symbols travel in descending
predicted-sigma order so that an interrupted stream yields the most
uncertain symbols first.

Stream layout (little-endian):

    magic   4s   "SPC1"
    version u8   1
    flags   u8   bit 0: raster symbol order instead of sigma order
    k1 k2 k3     u16 each (k3 = channel count)
    H W          u16 each (latent spatial dims)
    C_z Hz Wz    u16 each (hyperlatent dims)
    hash    32s  model-bundle content hash
    lengths 4*u32  segment byte lengths (hyperlatent, blocks 1..3)

followed by the four segments.  The hyperlatent is coded losslessly
under the bundle's static per-channel prior and is never truncated.
Whether delta refinement applies is an encode/decode agreement, not a
header field: a bundle whose delta tensors are all zero must produce a
byte-identical stream either way.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import context_models as cm
from . import entropycoder as ec
from .context_models import GaussianField, ModelBundle
from .errors import (
    CorruptHeader,
    HeaderIncomplete,
    InvalidBlock,
    ShapeMismatch,
    SymbolOutOfSupport,
    WeightsHashMismatch,
)

MAGIC = b"SPC1"
VERSION = 1
FLAG_RASTER = 0x01
_HEADER_FMT = "<4sBB8H32s4I"
HEADER_SIZE = struct.calcsize(_HEADER_FMT)


@dataclass(frozen=True)
class ChannelConfig:
    k1: int
    k2: int
    k3: int

    def __post_init__(self):
        if not 0 < self.k1 < self.k2 < self.k3:
            raise ValueError(f"boundaries must satisfy 0 < k1 < k2 < k3, got {self}")

    @property
    def channels(self) -> int:
        return self.k3

    def block_range(self, block: int) -> tuple[int, int]:
        if block not in (1, 2, 3):
            raise InvalidBlock(f"block must be 1, 2 or 3, got {block}")
        bounds = (0, self.k1, self.k2, self.k3)
        return bounds[block - 1], bounds[block]


@dataclass(frozen=True)
class StreamHeader:
    cfg: ChannelConfig
    h: int
    w: int
    c_z: int
    h_z: int
    w_z: int
    weights_hash: bytes
    seg_lens: tuple[int, int, int, int]
    raster: bool = False

    def pack(self) -> bytes:
        flags = FLAG_RASTER if self.raster else 0
        return struct.pack(
            _HEADER_FMT, MAGIC, VERSION, flags,
            self.cfg.k1, self.cfg.k2, self.cfg.k3,
            self.h, self.w, self.c_z, self.h_z, self.w_z,
            self.weights_hash, *self.seg_lens,
        )


def parse_header(data: bytes) -> StreamHeader:
    if len(data) < HEADER_SIZE:
        raise HeaderIncomplete(f"need {HEADER_SIZE} header bytes, have {len(data)}")
    magic, version, flags, k1, k2, k3, h, w, c_z, h_z, w_z, whash, s0, s1, s2, s3 = (
        struct.unpack_from(_HEADER_FMT, data)
    )
    if magic != MAGIC:
        raise CorruptHeader(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptHeader(f"unsupported version {version}")
    if flags & ~FLAG_RASTER:
        raise CorruptHeader(f"unknown flag bits 0x{flags:02x}")
    if not 0 < k1 < k2 < k3:
        raise CorruptHeader(f"bad block boundaries ({k1}, {k2}, {k3})")
    if min(h, w, c_z, h_z, w_z) < 1:
        raise CorruptHeader("zero dimension in header")
    return StreamHeader(
        cfg=ChannelConfig(k1, k2, k3), h=h, w=w, c_z=c_z, h_z=h_z, w_z=w_z,
        weights_hash=whash, seg_lens=(s0, s1, s2, s3),
        raster=bool(flags & FLAG_RASTER),
    )


def prefix_mask(latent: np.ndarray, cfg: ChannelConfig, block: int) -> np.ndarray:
    """Zero all channels visible only at or after the given block.

    Block b may condition on channels below k_{b-1} (with k_0 = 0), so
    the mask for block 1 is all-zero.
    """
    lo, _ = cfg.block_range(block)
    out = np.array(latent, dtype=np.float64, copy=True)
    out[lo:] = 0.0
    return out


def sigma_order(params: GaussianField) -> np.ndarray:
    """Flat transmission order: sigma descending, ties by (c, h, w)."""
    flat = params.sigma.reshape(-1)
    return np.argsort(-flat, kind="stable")


def block_parameters(
    latent: np.ndarray,
    hyperlatent: np.ndarray,
    bundle: ModelBundle,
    use_delta: bool = True,
) -> list[GaussianField]:
    """Coding distributions for blocks 1..3, as the encoder derives them."""
    cfg, _, p = _prepare(latent, hyperlatent, bundle)
    lat = np.asarray(latent)
    return [
        _derive(lat, p, bundle, cfg, block, use_delta) for block in (1, 2, 3)
    ]


def encode(
    latent: np.ndarray,
    hyperlatent: np.ndarray,
    bundle: ModelBundle,
    cfg: ChannelConfig | None = None,
    use_delta: bool = True,
    raster_order: bool = False,
) -> bytes:
    """Encode integer latents into a progressive bitstream."""
    bcfg, z, p = _prepare(latent, hyperlatent, bundle, cfg)
    if bundle.recompute_hash() != bundle.content_hash:
        raise WeightsHashMismatch("bundle tensors changed after load")
    lat = np.asarray(latent)
    _check_support(lat, "latent")

    meta = bundle.config
    z_tables = _hyper_tables(bundle, z.shape[1], z.shape[2])
    segments = [ec.encode_with_tables(z.reshape(-1), z_tables)]
    for block in (1, 2, 3):
        gf = _derive(lat, p, bundle, bcfg, block, use_delta)
        order = _order_for(gf, raster_order)
        lo, hi = bcfg.block_range(block)
        symbols = lat[lo:hi].reshape(-1)[order]
        tables = ec.quantize_cdf(gf.mu.reshape(-1)[order], gf.sigma.reshape(-1)[order])
        segments.append(ec.encode_with_tables(symbols, tables))

    header = StreamHeader(
        cfg=bcfg, h=lat.shape[1], w=lat.shape[2],
        c_z=meta.c_z, h_z=z.shape[1], w_z=z.shape[2],
        weights_hash=bundle.content_hash,
        seg_lens=tuple(len(s) for s in segments),
        raster=raster_order,
    )
    return header.pack() + b"".join(segments)


def decode(
    data: bytes,
    bundle: ModelBundle,
    up_to_block: int = 3,
    use_delta: bool = True,
) -> np.ndarray:
    """Decode a complete stream through the requested block.

    Channels of later blocks are zero in the result.
    """
    hdr = parse_header(data)
    if up_to_block not in (1, 2, 3):
        raise InvalidBlock(f"up_to_block must be 1, 2 or 3, got {up_to_block}")
    if len(data) != HEADER_SIZE + sum(hdr.seg_lens):
        raise CorruptHeader(
            f"file length {len(data)} does not match header accounting "
            f"{HEADER_SIZE + sum(hdr.seg_lens)}"
        )
    latent, counts = _decode_segments(data, hdr, bundle, up_to_block, use_delta)
    for block in range(1, up_to_block + 1):
        lo, hi = hdr.cfg.block_range(block)
        expect = (hi - lo) * hdr.h * hdr.w
        if counts[block - 1] != expect:
            raise CorruptHeader(f"segment {block} truncated mid-stream")
    return latent


def decode_truncated(
    prefix: bytes,
    bundle: ModelBundle,
    use_delta: bool = True,
) -> tuple[np.ndarray, tuple[int, int, int]]:
    """Decode a byte-prefix of a stream.

    Whole segments decode normally.  The first partial block segment
    yields its exactly-decodable sigma-order prefix, with the remaining
    symbols of that block filled with round(mu) of their coding
    distribution; later blocks are left zero.  Returns the latent and
    per-block exact symbol counts.
    """
    hdr = parse_header(prefix)
    total = HEADER_SIZE + sum(hdr.seg_lens)
    if len(prefix) > total:
        raise CorruptHeader(f"prefix of {len(prefix)} bytes exceeds stream length {total}")
    if len(prefix) < HEADER_SIZE + hdr.seg_lens[0]:
        raise HeaderIncomplete(
            "prefix must contain the header and the whole hyperlatent segment"
        )
    latent, counts = _decode_segments(
        prefix, hdr, bundle, up_to_block=3, use_delta=use_delta, allow_partial=True
    )
    return latent, counts


def rate_report(data: bytes, cfg: ChannelConfig | None = None) -> tuple[float, float, float]:
    """Cumulative bits per nominal pixel after each block."""
    hdr = parse_header(data)
    if cfg is not None and cfg != hdr.cfg:
        raise CorruptHeader(f"stream uses {hdr.cfg}, caller expected {cfg}")
    pixels = (16 * hdr.h) * (16 * hdr.w)
    base = HEADER_SIZE + hdr.seg_lens[0]
    out = []
    for level in (1, 2, 3):
        total = base + sum(hdr.seg_lens[1:1 + level])
        out.append(8.0 * total / pixels)
    return tuple(out)


def _prepare(latent, hyperlatent, bundle: ModelBundle, cfg: ChannelConfig | None = None):
    meta = bundle.config
    bcfg = ChannelConfig(meta.k1, meta.k2, meta.k3)
    if cfg is not None and cfg != bcfg:
        raise ShapeMismatch(f"bundle is built for {bcfg}, caller requested {cfg}")
    lat = np.asarray(latent)
    if lat.ndim != 3 or lat.shape[0] != bcfg.channels:
        raise ShapeMismatch(
            f"latent must be ({bcfg.channels}, H, W), got {lat.shape}"
        )
    h, w = int(lat.shape[1]), int(lat.shape[2])
    if not (1 <= h <= 0xFFFF and 1 <= w <= 0xFFFF):
        raise ShapeMismatch(f"latent spatial dims out of range: {lat.shape}")
    z = np.asarray(hyperlatent)
    want_z = (meta.c_z, -(-h // 4), -(-w // 4))
    if z.shape != want_z:
        raise ShapeMismatch(f"hyperlatent must be {want_z}, got {z.shape}")
    _check_support(z, "hyperlatent")
    p = cm.upsample_to(cm.hyper_features(z, bundle), h, w)
    return bcfg, z, p


def _check_support(tensor: np.ndarray, name: str) -> None:
    if tensor.size and (tensor.min() < ec.S_MIN or tensor.max() > ec.S_MAX):
        raise SymbolOutOfSupport(
            f"{name} symbols must lie in [{ec.S_MIN}, {ec.S_MAX}]"
        )


def _hyper_tables(bundle: ModelBundle, h_z: int, w_z: int) -> np.ndarray:
    per_channel = ec.quantize_cdf(bundle.f64("z.prior.mu"), bundle.f64("z.prior.sigma"))
    return np.repeat(per_channel, h_z * w_z, axis=0)


def _derive(
    lat: np.ndarray,
    p: np.ndarray,
    bundle: ModelBundle,
    cfg: ChannelConfig,
    block: int,
    use_delta: bool,
) -> GaussianField:
    masked = prefix_mask(lat, cfg, block)
    ctx = cm.context_features(masked, bundle)
    gf = cm.entropy_params(p, ctx, bundle, block)
    if use_delta and block in (2, 3):
        gf = cm.delta_refine(p, ctx, gf, bundle, block)
    return gf


def _order_for(gf: GaussianField, raster: bool) -> np.ndarray:
    if raster:
        return np.arange(gf.sigma.size)
    return sigma_order(gf)


def _decode_segments(
    data: bytes,
    hdr: StreamHeader,
    bundle: ModelBundle,
    up_to_block: int,
    use_delta: bool,
    allow_partial: bool = False,
):
    if bundle.content_hash != hdr.weights_hash:
        raise WeightsHashMismatch("stream was encoded with different weights")
    meta = bundle.config
    cfg = hdr.cfg
    if (meta.k1, meta.k2, meta.k3, meta.c_z) != (cfg.k1, cfg.k2, cfg.k3, hdr.c_z):
        raise CorruptHeader("header channel configuration does not match bundle")

    offsets = [HEADER_SIZE]
    for n in hdr.seg_lens:
        offsets.append(offsets[-1] + n)

    seg0 = data[offsets[0]:offsets[1]]
    z_tables = _hyper_tables(bundle, hdr.h_z, hdr.w_z)
    z_flat, z_count = ec.decode_with_tables(seg0, z_tables)
    if z_count != z_flat.size:
        raise CorruptHeader("hyperlatent segment truncated")
    z = z_flat.reshape(hdr.c_z, hdr.h_z, hdr.w_z)
    p = cm.upsample_to(cm.hyper_features(z, bundle), hdr.h, hdr.w)

    latent = np.zeros((cfg.channels, hdr.h, hdr.w), dtype=np.int32)
    counts = [0, 0, 0]
    for block in range(1, up_to_block + 1):
        seg_len = hdr.seg_lens[block]
        avail = data[offsets[block]:offsets[block + 1]]
        if allow_partial and len(avail) == 0:
            break
        gf = _derive(latent, p, bundle, cfg, block, use_delta)
        order = _order_for(gf, hdr.raster)
        lo, hi = cfg.block_range(block)
        tables = ec.quantize_cdf(gf.mu.reshape(-1)[order], gf.sigma.reshape(-1)[order])
        symbols, count = ec.decode_with_tables(avail, tables)
        counts[block - 1] = count
        flat = np.empty(order.size, dtype=np.int32)
        if count < order.size:
            if not allow_partial:
                latent[lo:hi] = 0
                return latent, tuple(counts)
            fill = np.clip(
                np.rint(gf.mu.reshape(-1)[order]), ec.S_MIN, ec.S_MAX
            ).astype(np.int32)
            flat[:] = fill
        flat[:count] = symbols[:count]
        inverse = np.empty_like(order)
        inverse[order] = np.arange(order.size)
        latent[lo:hi] = flat[inverse].reshape(hi - lo, hdr.h, hdr.w)
        if count < order.size:
            break
    return latent, tuple(counts)
