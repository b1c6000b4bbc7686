"""Seeded synthetic inputs: weights, latents, taxonomies, embeddings.

Everything here is a pure function of its seed via the portable
generator in `rng`, so fixtures regenerate byte-identically.  Weight
scales follow inverse square-root fan-in, which keeps the derived
sigma fields spread over roughly [0.2, 3]: wide enough that sigma
ordering, refinement and truncation behave like they would on trained
weights, at desk scale.
"""

from __future__ import annotations

import numpy as np

from . import context_models as cm
from . import progressive_codec as pc
from .clustering import EmbeddingSet, normalize
from .context_models import ModelBundle, expected_shapes, BundleConfig, F_CTX
from .entropycoder import S_MAX, S_MIN
from .rng import SplitMix64

DEFAULT_SEED = 613


def make_bundle(
    seed: int,
    boundaries: tuple[int, int, int] = (128, 224, 320),
    c_z: int = 64,
    f_p: int = 64,
    f_hidden: int = 128,
) -> ModelBundle:
    """Random but reproducible weights for a channel configuration."""
    cfg = BundleConfig(*boundaries, c_z=c_z, f_p=f_p, f_ctx=F_CTX, f_hidden=f_hidden)
    gen = SplitMix64(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in sorted(expected_shapes(cfg).items()):
        if name == "meta.config":
            tensors[name] = np.asarray(cfg, dtype=np.float32)
            continue
        n = int(np.prod(shape))
        draw = gen.gaussian_array(n).reshape(shape)
        if name == "z.prior.mu":
            t = draw
        elif name == "z.prior.sigma":
            t = np.clip(np.exp(0.5 * draw), 0.2, 4.0)
        else:
            t = draw * _weight_scale(name, shape)
        tensors[name] = t.astype(np.float32)
    return ModelBundle.from_tensors(tensors)


def _weight_scale(name: str, shape: tuple[int, ...]) -> float:
    if name.endswith(".bias"):
        return 0.5 if name == "ep.l2.bias" else 0.1
    fan_in = int(np.prod(shape[1:]))
    scale = 1.0 / np.sqrt(fan_in)
    if ".head." in name:
        scale *= 0.5
    return scale


def zero_bundle(
    boundaries: tuple[int, int, int] = (128, 224, 320),
    c_z: int = 64,
    f_p: int = 64,
    f_hidden: int = 128,
) -> ModelBundle:
    """All-zero weights; the model stack collapses to its bias constants."""
    cfg = BundleConfig(*boundaries, c_z=c_z, f_p=f_p, f_ctx=F_CTX, f_hidden=f_hidden)
    tensors = {
        name: np.zeros(shape, dtype=np.float32)
        for name, shape in expected_shapes(cfg).items()
    }
    tensors["meta.config"] = np.asarray(cfg, dtype=np.float32)
    # a zero prior sigma would be degenerate; pin it at 1
    tensors["z.prior.sigma"][:] = 1.0
    return ModelBundle.from_tensors(tensors)


def zero_delta_bundle(seed: int, **kwargs) -> ModelBundle:
    """Random weights with every refinement tensor zeroed (ablation)."""
    base = make_bundle(seed, **kwargs)
    tensors = {
        name: (np.zeros_like(t) if name.startswith("delta") else t)
        for name, t in base.tensors.items()
    }
    return ModelBundle.from_tensors(tensors)


def sample_latents(
    bundle: ModelBundle, h: int, w: int, seed: int, use_delta: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Draw (latent, hyperlatent) from the bundle's own distributions.

    Blocks are sampled in coding order so each block's draw uses the
    parameters its earlier blocks induce, exactly as a trained analysis
    transform would correlate them.
    """
    meta = bundle.config
    cfg = pc.ChannelConfig(meta.k1, meta.k2, meta.k3)
    gen = SplitMix64(seed)
    h_z, w_z = -(-h // 4), -(-w // 4)
    mu_z = bundle.f64("z.prior.mu")[:, None, None]
    sg_z = bundle.f64("z.prior.sigma")[:, None, None]
    noise = gen.gaussian_array(meta.c_z * h_z * w_z).reshape(meta.c_z, h_z, w_z)
    z = _quantize(mu_z + sg_z * noise)

    p = cm.upsample_to(cm.hyper_features(z, bundle), h, w)
    latent = np.zeros((cfg.channels, h, w), dtype=np.int32)
    for block in (1, 2, 3):
        gf = pc._derive(latent, p, bundle, cfg, block, use_delta)
        lo, hi = cfg.block_range(block)
        noise = gen.gaussian_array(gf.mu.size).reshape(gf.mu.shape)
        latent[lo:hi] = _quantize(gf.mu + gf.sigma * noise)
    return latent, z


def _quantize(x: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(x), S_MIN, S_MAX).astype(np.int32)


def fixture_taxonomy() -> str:
    """Tree with one heavy branch: 5 groups, one holding 80 of 120 leaves.

    A depth cut targeting 12 clusters lands at depth 2 (5 groups, the
    closest available count) and puts two thirds of the classes into one
    cluster, while the paired embeddings resolve 12 balanced bundles.
    """
    lines = ["root\t-"]
    for g in range(5):
        lines.append(f"group{g}\troot")
    for b in range(8):
        for i in range(10):
            lines.append(f"class{b:02d}_{i:02d}\tgroup0")
    for g in range(1, 5):
        for i in range(10):
            lines.append(f"class{7 + g:02d}_{i:02d}\tgroup{g}")
    return "\n".join(lines) + "\n"


def fixture_embeddings(seed: int = DEFAULT_SEED, dim: int = 16) -> EmbeddingSet:
    """Embeddings for the fixture taxonomy: 12 tight unit-sphere bundles.

    The eight bundles inside group0 plus one per small group line up
    with the visual-bundle structure k-means is meant to find.
    """
    if dim < 12:
        raise ValueError("fixture embeddings need dim >= 12")
    gen = SplitMix64(seed)
    # near-orthogonal centers: separation ~sqrt(2) dwarfs the 0.05 spread,
    # so every seeding recovers the same 12 bundles
    centers = np.eye(12, dim) + 0.1 * gen.gaussian_array(12 * dim).reshape(12, dim)
    centers /= np.sqrt((centers * centers).sum(axis=1))[:, None]
    labels = []
    rows = []
    for b in range(12):
        for i in range(10):
            labels.append(f"class{b:02d}_{i:02d}")
            rows.append(centers[b] + 0.05 * gen.gaussian_array(dim))
    return normalize(EmbeddingSet(labels=tuple(labels), vectors=np.stack(rows)))


def skewed_taxonomy() -> str:
    """Micro tree where the best depth cut is dominated by one cluster."""
    lines = ["root\t-", "heavy\troot"]
    for i in range(90):
        lines.append(f"h{i:02d}\theavy")
    for i in range(9):
        lines.append(f"solo{i}\troot")
    return "\n".join(lines) + "\n"


def two_bundle_points() -> EmbeddingSet:
    """Eight unit-circle points in two tight antipodal bundles."""
    angles = [0.0, 0.07, -0.07, 0.14] + [np.pi, np.pi + 0.07, np.pi - 0.07, np.pi + 0.14]
    labels = tuple(f"p{i}" for i in range(8))
    vectors = np.stack([[np.cos(a), np.sin(a)] for a in angles])
    return EmbeddingSet(labels=labels, vectors=vectors)
