"""Deterministic inference networks with loadable weights.

Three small networks drive the codec's probability models:

* context_features: one 5x5 same-padded convolution + ReLU over the
  masked latent, producing a fixed 128-feature field.
* entropy_params: two pointwise (1x1) layers over the concatenated
  hyper features and context features, emitting per-channel (mu,
  sigma_raw); sigma = softplus(sigma_raw + log(e-1)) so a zero input
  maps to sigma = 1, then clamped at SIGMA_MIN.
* delta_refine: per-block refinement for the second and third blocks: a
  depthwise 3x3 residual stage, single-head attention over a fixed 8x8
  window grid, and a pointwise head emitting additive (dmu, dsigma).

Weights travel in a named-tensor container (magic `SCMB`): u32 tensor
count, then per tensor a u16 name length, UTF-8 name, u8 dtype (0 =
f32), u8 ndim, little-endian u32 dims and payload; the file ends with a
32-byte SHA-256 over everything before it.  All inference runs in
float64 regardless of the stored f32 weights.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ContainerHashMismatch, DataError, InvalidBlock, ShapeMismatch
from .entropycoder import SIGMA_MIN

BUNDLE_MAGIC = b"SCMB"
F_CTX = 128
CONV_K = 5
WINDOW = 8
# softplus(x + _SIGMA_SHIFT) equals 1 at x = 0
_SIGMA_SHIFT = math.log(math.e - 1.0)


class BundleConfig(NamedTuple):
    k1: int
    k2: int
    k3: int
    c_z: int
    f_p: int
    f_ctx: int
    f_hidden: int


@dataclass(frozen=True)
class GaussianField:
    """Per-symbol (mu, sigma) over one block, shape (channels, H, W)."""

    mu: np.ndarray
    sigma: np.ndarray


@dataclass
class ModelBundle:
    tensors: dict[str, np.ndarray]
    content_hash: bytes
    _f64: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "ModelBundle":
        canon = {n: np.ascontiguousarray(t, dtype=np.float32) for n, t in tensors.items()}
        bundle = cls(tensors=canon, content_hash=b"")
        bundle.content_hash = hashlib.sha256(_serialize(canon)).digest()
        _validate_shapes(bundle)
        return bundle

    @property
    def config(self) -> BundleConfig:
        raw = self.tensors["meta.config"]
        return BundleConfig(*(int(v) for v in raw))

    def f64(self, name: str) -> np.ndarray:
        got = self._f64.get(name)
        if got is None:
            got = self.tensors[name].astype(np.float64)
            self._f64[name] = got
        return got

    def recompute_hash(self) -> bytes:
        return hashlib.sha256(_serialize(self.tensors)).digest()


def dump_bundle(b: ModelBundle) -> bytes:
    body = _serialize(b.tensors)
    return body + hashlib.sha256(body).digest()


def load_bundle(data: bytes) -> ModelBundle:
    if len(data) < 40 or data[:4] != BUNDLE_MAGIC:
        raise DataError("not a model bundle (bad magic)")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ContainerHashMismatch("bundle content hash does not match")
    tensors: dict[str, np.ndarray] = {}
    off = 4
    (count,) = struct.unpack_from("<I", body, off)
    off += 4
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", body, off)
        off += 2
        name = body[off:off + nlen].decode("utf-8")
        off += nlen
        dtype_code, ndim = struct.unpack_from("<BB", body, off)
        off += 2
        if dtype_code != 0:
            raise DataError(f"tensor '{name}': unsupported dtype code {dtype_code}")
        dims = struct.unpack_from(f"<{ndim}I", body, off)
        off += 4 * ndim
        n_bytes = 4 * int(np.prod(dims, dtype=np.int64)) if ndim else 4
        n_items = n_bytes // 4
        flat = np.frombuffer(body, dtype="<f4", count=n_items, offset=off)
        off += n_bytes
        tensors[name] = flat.reshape(dims).copy()
    if off != len(body):
        raise DataError("trailing bytes after last tensor")
    bundle = ModelBundle(tensors=tensors, content_hash=hashlib.sha256(body).digest())
    _validate_shapes(bundle)
    return bundle


def load_bundle_file(path) -> ModelBundle:
    with open(path, "rb") as fh:
        return load_bundle(fh.read())


def write_bundle_file(path, b: ModelBundle) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_bundle(b))


def _serialize(tensors: dict[str, np.ndarray]) -> bytes:
    parts = [BUNDLE_MAGIC, struct.pack("<I", len(tensors))]
    for name in sorted(tensors):
        t = np.ascontiguousarray(tensors[name], dtype="<f4")
        enc = name.encode("utf-8")
        parts.append(struct.pack("<H", len(enc)))
        parts.append(enc)
        parts.append(struct.pack("<BB", 0, t.ndim))
        parts.append(struct.pack(f"<{t.ndim}I", *t.shape))
        parts.append(t.tobytes())
    return b"".join(parts)


def expected_shapes(cfg: BundleConfig) -> dict[str, tuple[int, ...]]:
    k1, k2, k3, c_z, f_p, f_ctx, f_h = cfg
    f_in = f_p + f_ctx
    shapes = {
        "meta.config": (7,),
        "ctx.conv.weight": (f_ctx, k3, CONV_K, CONV_K),
        "ctx.conv.bias": (f_ctx,),
        "hyper.expand.weight": (f_p, c_z),
        "hyper.expand.bias": (f_p,),
        "ep.l1.weight": (f_h, f_in),
        "ep.l1.bias": (f_h,),
        "ep.l2.weight": (2 * k3, f_h),
        "ep.l2.bias": (2 * k3,),
        "z.prior.mu": (c_z,),
        "z.prior.sigma": (c_z,),
    }
    for b, n_b in ((2, k2 - k1), (3, k3 - k2)):
        shapes[f"delta{b}.dw.weight"] = (f_in, 3, 3)
        shapes[f"delta{b}.dw.bias"] = (f_in,)
        for proj in ("q", "k", "v"):
            shapes[f"delta{b}.{proj}.weight"] = (f_in, f_in)
            shapes[f"delta{b}.{proj}.bias"] = (f_in,)
        shapes[f"delta{b}.head.weight"] = (2 * n_b, f_in)
        shapes[f"delta{b}.head.bias"] = (2 * n_b,)
    return shapes


def _validate_shapes(b: ModelBundle) -> None:
    if "meta.config" not in b.tensors:
        raise ShapeMismatch("bundle lacks meta.config")
    cfg = b.config
    if not (0 < cfg.k1 < cfg.k2 < cfg.k3):
        raise ShapeMismatch(f"invalid block boundaries {cfg[:3]}")
    if cfg.f_ctx != F_CTX:
        raise ShapeMismatch(f"context feature count must be {F_CTX}, got {cfg.f_ctx}")
    want = expected_shapes(cfg)
    for name, shape in want.items():
        if name not in b.tensors:
            raise ShapeMismatch(f"bundle lacks tensor '{name}'")
        got = b.tensors[name].shape
        if got != shape:
            raise ShapeMismatch(f"tensor '{name}': expected {shape}, got {got}")
    extra = set(b.tensors) - set(want)
    if extra:
        raise ShapeMismatch(f"unexpected tensors: {sorted(extra)}")


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigma_map(sigma_raw: np.ndarray) -> np.ndarray:
    """Positive map for sigma outputs: 0 -> 1, clamped at SIGMA_MIN."""
    return np.maximum(_softplus(sigma_raw + _SIGMA_SHIFT), SIGMA_MIN)


def context_features(masked_latent: np.ndarray, w: ModelBundle) -> np.ndarray:
    """5x5 same-padded convolution + ReLU over the masked latent."""
    kern = w.f64("ctx.conv.weight")
    bias = w.f64("ctx.conv.bias")
    x = np.asarray(masked_latent, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != kern.shape[1]:
        raise ShapeMismatch(
            f"latent must be ({kern.shape[1]}, H, W), got {x.shape}"
        )
    if not x.any():
        # the first block's context input is identically zero
        f, h, wd = kern.shape[0], x.shape[1], x.shape[2]
        return np.broadcast_to(_relu(bias)[:, None, None], (f, h, wd)).copy()
    return _relu(_conv2d_same(x, kern, bias))


def _conv2d_same(x: np.ndarray, kern: np.ndarray, bias: np.ndarray) -> np.ndarray:
    f, c, kh, kw = kern.shape
    _, h, wd = x.shape
    ph, pw = kh // 2, kw // 2
    padded = np.zeros((c, h + kh - 1, wd + kw - 1), dtype=np.float64)
    padded[:, ph:ph + h, pw:pw + wd] = x
    cols = np.empty((c, kh, kw, h, wd), dtype=np.float64)
    for dy in range(kh):
        for dx in range(kw):
            cols[:, dy, dx] = padded[:, dy:dy + h, dx:dx + wd]
    out = kern.reshape(f, c * kh * kw) @ cols.reshape(c * kh * kw, h * wd)
    out += bias[:, None]
    return out.reshape(f, h, wd)


def hyper_features(z: np.ndarray, w: ModelBundle) -> np.ndarray:
    """Expand a decoded hyperlatent into conditioning features.

    The hyperlatent sits at 1/4 the latent resolution; each latent
    position (h, w) reads z at (h // 4, w // 4), then a pointwise affine
    maps the C_z values to F_p features.  The caller passes z at shape
    (C_z, ceil(H/4), ceil(W/4)) and slices/upsamples via `upsample_to`.
    """
    weight = w.f64("hyper.expand.weight")
    bias = w.f64("hyper.expand.bias")
    zf = np.asarray(z, dtype=np.float64)
    if zf.ndim != 3 or zf.shape[0] != weight.shape[1]:
        raise ShapeMismatch(f"hyperlatent must be ({weight.shape[1]}, H', W'), got {zf.shape}")
    c_z, hz, wz = zf.shape
    out = weight @ zf.reshape(c_z, hz * wz)
    out += bias[:, None]
    return out.reshape(weight.shape[0], hz, wz)


def upsample_to(p_small: np.ndarray, h: int, w: int) -> np.ndarray:
    """Nearest-neighbour 4x expansion of a quarter-resolution field."""
    _, hz, wz = p_small.shape
    if hz != -(-h // 4) or wz != -(-w // 4):
        raise ShapeMismatch(
            f"quarter-resolution field {p_small.shape[1:]} does not cover ({h}, {w})"
        )
    rows = np.arange(h) // 4
    cols = np.arange(w) // 4
    return p_small[:, rows[:, None], cols[None, :]]


def entropy_params(p: np.ndarray, c: np.ndarray, w: ModelBundle, block: int) -> GaussianField:
    """Base (mu, sigma) for one block from hyper + context features."""
    cfg = w.config
    lo, hi = _block_range(cfg, block)
    if p.ndim != 3 or c.ndim != 3 or p.shape[1:] != c.shape[1:]:
        raise ShapeMismatch(f"feature fields misaligned: {p.shape} vs {c.shape}")
    if p.shape[0] != cfg.f_p or c.shape[0] != cfg.f_ctx:
        raise ShapeMismatch(
            f"expected {cfg.f_p} hyper + {cfg.f_ctx} context features, "
            f"got {p.shape[0]} + {c.shape[0]}"
        )
    _, h, wd = p.shape
    x = np.concatenate([p, c], axis=0).reshape(cfg.f_p + cfg.f_ctx, h * wd)
    hid = _relu(w.f64("ep.l1.weight") @ x + w.f64("ep.l1.bias")[:, None])
    out = w.f64("ep.l2.weight") @ hid + w.f64("ep.l2.bias")[:, None]
    mu = out[lo:hi].reshape(hi - lo, h, wd)
    sigma = sigma_map(out[cfg.k3 + lo:cfg.k3 + hi]).reshape(hi - lo, h, wd)
    return GaussianField(mu=mu, sigma=sigma)


def delta_refine(
    p: np.ndarray, c: np.ndarray, base: GaussianField, w: ModelBundle, block: int
) -> GaussianField:
    """Additive refinement of base parameters for blocks 2 and 3."""
    if block not in (2, 3):
        raise InvalidBlock(f"no refinement network for block {block}")
    cfg = w.config
    lo, hi = _block_range(cfg, block)
    n_b = hi - lo
    if base.mu.shape != (n_b,) + p.shape[1:]:
        raise ShapeMismatch(f"base field {base.mu.shape} does not match block {block}")
    pre = f"delta{block}"
    x = np.concatenate([np.asarray(p, np.float64), np.asarray(c, np.float64)], axis=0)

    h1 = _relu(x + _depthwise3(x, w.f64(f"{pre}.dw.weight"), w.f64(f"{pre}.dw.bias")))
    h2 = h1 + _window_attention(
        h1,
        w.f64(f"{pre}.q.weight"), w.f64(f"{pre}.q.bias"),
        w.f64(f"{pre}.k.weight"), w.f64(f"{pre}.k.bias"),
        w.f64(f"{pre}.v.weight"), w.f64(f"{pre}.v.bias"),
    )
    f_in, h, wd = h2.shape
    head = w.f64(f"{pre}.head.weight") @ h2.reshape(f_in, h * wd)
    head += w.f64(f"{pre}.head.bias")[:, None]
    d_mu = head[:n_b].reshape(n_b, h, wd)
    d_sg = head[n_b:].reshape(n_b, h, wd)
    return GaussianField(
        mu=base.mu + d_mu,
        sigma=np.maximum(base.sigma + d_sg, SIGMA_MIN),
    )


def _block_range(cfg: BundleConfig, block: int) -> tuple[int, int]:
    bounds = (0, cfg.k1, cfg.k2, cfg.k3)
    if block not in (1, 2, 3):
        raise InvalidBlock(f"block must be 1, 2 or 3, got {block}")
    return bounds[block - 1], bounds[block]


def _depthwise3(x: np.ndarray, kern: np.ndarray, bias: np.ndarray) -> np.ndarray:
    f, h, wd = x.shape
    padded = np.zeros((f, h + 2, wd + 2), dtype=np.float64)
    padded[:, 1:1 + h, 1:1 + wd] = x
    out = np.zeros_like(x)
    for dy in range(3):
        for dx in range(3):
            out += kern[:, dy, dx, None, None] * padded[:, dy:dy + h, dx:dx + wd]
    out += bias[:, None, None]
    return out


def _window_attention(h1, wq, bq, wk, bk, wv, bv) -> np.ndarray:
    f, h, wd = h1.shape
    scale = 1.0 / math.sqrt(f)
    out = np.empty_like(h1)
    for y0 in range(0, h, WINDOW):
        for x0 in range(0, wd, WINDOW):
            win = h1[:, y0:y0 + min(WINDOW, h - y0), x0:x0 + min(WINDOW, wd - x0)]
            _, wh, ww = win.shape
            tokens = win.reshape(f, wh * ww).T
            q = tokens @ wq.T + bq
            k = tokens @ wk.T + bk
            v = tokens @ wv.T + bv
            scores = (q @ k.T) * scale
            scores -= scores.max(axis=1, keepdims=True)
            np.exp(scores, out=scores)
            scores /= scores.sum(axis=1, keepdims=True)
            att = scores @ v
            out[:, y0:y0 + wh, x0:x0 + ww] = att.T.reshape(f, wh, ww)
    return out
