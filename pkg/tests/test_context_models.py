"""Conditional-model inference against straightline references.

netref.py recomputes every kernel with scipy correlations and explicit
per-pixel/per-token loops; agreement is required to 1e-5 max-abs (the
actual gap is float64 summation-order noise, orders tighter).
"""

import numpy as np
import pytest

import netref
from semcodec.context_models import (
    BundleConfig,
    GaussianField,
    ModelBundle,
    context_features,
    delta_refine,
    dump_bundle,
    entropy_params,
    expected_shapes,
    hyper_features,
    load_bundle,
    sigma_map,
    upsample_to,
)
from semcodec.errors import (
    ContainerHashMismatch,
    DataError,
    InvalidBlock,
    ShapeMismatch,
)
from semcodec.fixtures import make_bundle, zero_bundle

CFG = dict(boundaries=(4, 7, 10), c_z=3, f_p=6, f_hidden=12)


def _bundle(seed=1):
    return make_bundle(seed, **CFG)


def _case(seed, h, w):
    rng = np.random.default_rng(seed)
    b = _bundle(seed)
    cfg = b.config
    latent = rng.integers(-30, 31, size=(cfg.k3, h, w)).astype(np.int32)
    z = rng.integers(-10, 11, size=(cfg.c_z, -(-h // 4), -(-w // 4))).astype(np.int32)
    return b, cfg, latent, z


# -- context stack --------------------------------------------------------------


@pytest.mark.parametrize("h,w", [(1, 1), (3, 5), (6, 6), (5, 2)])
def test_context_features_match_correlation_oracle(h, w):
    b, cfg, latent, _ = _case(7, h, w)
    masked = latent.astype(np.float64)
    got = context_features(masked, b)
    want = netref.context_features(
        masked, b.f64("ctx.conv.weight"), b.f64("ctx.conv.bias"))
    assert got.shape == (128, h, w)
    assert np.abs(got - want).max() < 1e-5


def test_all_zero_input_shortcut_equals_oracle():
    b, cfg, _, _ = _case(9, 4, 4)
    zeros = np.zeros((cfg.k3, 4, 4))
    got = context_features(zeros, b)
    want = netref.context_features(
        zeros, b.f64("ctx.conv.weight"), b.f64("ctx.conv.bias"))
    assert np.abs(got - want).max() < 1e-12
    # constant over space: only the bias survives
    assert np.abs(got - got[:, :1, :1]).max() == 0.0


def test_context_features_channel_mismatch():
    b, cfg, _, _ = _case(3, 2, 2)
    with pytest.raises(ShapeMismatch):
        context_features(np.zeros((cfg.k3 + 1, 2, 2)), b)


def test_hyper_features_and_upsample_match_oracle():
    b, cfg, _, z = _case(11, 7, 9)
    got_small = hyper_features(z.astype(np.float64), b)
    want_small = netref.hyper_features(
        z.astype(np.float64), b.f64("hyper.expand.weight"),
        b.f64("hyper.expand.bias"))
    assert np.abs(got_small - want_small).max() < 1e-5
    got = upsample_to(got_small, 7, 9)
    assert np.abs(got - netref.upsample4(want_small, 7, 9)).max() < 1e-5


def test_upsample_rejects_wrong_grid():
    with pytest.raises(ShapeMismatch):
        upsample_to(np.zeros((4, 2, 2)), 12, 4)  # needs a 3-row source


def test_hyper_features_linearity():
    b, cfg, _, z = _case(13, 4, 4)
    zf = z.astype(np.float64)
    base = hyper_features(np.zeros_like(zf), b)
    one = hyper_features(zf, b)
    two = hyper_features(2.0 * zf, b)
    assert np.abs((two - base) - 2.0 * (one - base)).max() < 1e-9


# -- entropy parameters ------------------------------------------------------------


@pytest.mark.parametrize("block", [1, 2, 3])
def test_entropy_params_match_per_pixel_oracle(block):
    b, cfg, latent, z = _case(17 + block, 4, 5)
    p = upsample_to(hyper_features(z.astype(np.float64), b), 4, 5)
    ctx = context_features(latent.astype(np.float64), b)
    got = entropy_params(p, ctx, b, block)
    bounds = (0, cfg.k1, cfg.k2, cfg.k3)
    lo, hi = bounds[block - 1], bounds[block]
    mu, sigma = netref.entropy_params(
        p, ctx, netref.weights_of(b), lo, hi, cfg.k3)
    assert np.abs(got.mu - mu).max() < 1e-5
    assert np.abs(got.sigma - sigma).max() < 1e-5
    assert got.sigma.min() >= 0.11


def test_entropy_params_bias_only_network():
    b = zero_bundle(**CFG)
    cfg = b.config
    p = upsample_to(hyper_features(np.zeros((cfg.c_z, 1, 1)), b), 2, 2)
    ctx = context_features(np.zeros((cfg.k3, 2, 2)), b)
    field = entropy_params(p, ctx, b, 1)
    # zero weights push every pre-activation to the bias, mapped to 1.0
    assert np.abs(field.sigma - 1.0).max() < 1e-12
    assert np.abs(field.mu - field.mu[:, :1, :1]).max() == 0.0


def test_entropy_params_alignment_errors():
    b, cfg, latent, z = _case(23, 3, 3)
    p = upsample_to(hyper_features(z.astype(np.float64), b), 3, 3)
    ctx = context_features(latent.astype(np.float64), b)
    with pytest.raises(ShapeMismatch):
        entropy_params(p[:, :2, :], ctx, b, 1)
    with pytest.raises(ShapeMismatch):
        entropy_params(p[:-1], ctx, b, 1)
    with pytest.raises(InvalidBlock):
        entropy_params(p, ctx, b, 4)


def test_sigma_map_fixed_points():
    assert sigma_map(np.array([0.0]))[0] == pytest.approx(1.0, abs=1e-15)
    assert sigma_map(np.array([-50.0]))[0] == 0.11
    big = sigma_map(np.array([40.0]))[0]
    assert big == pytest.approx(40.0 + netref.SIGMA_SHIFT, rel=1e-6)
    x = np.linspace(-20, 20, 200)
    y = sigma_map(x)
    assert (np.diff(y) >= 0.0).all()


# -- delta refinement -----------------------------------------------------------


@pytest.mark.parametrize("block,h,w", [(2, 4, 5), (3, 4, 5), (2, 1, 1),
                                       (3, 9, 11), (2, 8, 8)])
def test_delta_refine_matches_straightline_oracle(block, h, w):
    b, cfg, latent, z = _case(100 + block + h, h, w)
    p = upsample_to(hyper_features(z.astype(np.float64), b), h, w)
    ctx = context_features(latent.astype(np.float64), b)
    base = entropy_params(p, ctx, b, block)
    got = delta_refine(p, ctx, base, b, block)
    bounds = (0, cfg.k1, cfg.k2, cfg.k3)
    n_b = bounds[block] - bounds[block - 1]
    mu, sigma = netref.delta_refine(
        p, ctx, base.mu, base.sigma, netref.weights_of(b), block, n_b)
    assert np.abs(got.mu - mu).max() < 1e-5
    assert np.abs(got.sigma - sigma).max() < 1e-5
    assert got.sigma.min() >= 0.11


def test_delta_refine_zero_weights_identity():
    b = zero_bundle(**CFG)
    cfg = b.config
    h = w = 3
    p = upsample_to(hyper_features(np.zeros((cfg.c_z, 1, 1)), b), h, w)
    ctx = context_features(np.zeros((cfg.k3, h, w)), b)
    base = entropy_params(p, ctx, b, 2)
    got = delta_refine(p, ctx, base, b, 2)
    assert np.array_equal(got.mu, base.mu)
    assert np.array_equal(got.sigma, base.sigma)


def test_delta_sigma_floor():
    b = _bundle(31)
    cfg = b.config
    # force a huge negative correction through the head bias
    tensors = dict(b.tensors)
    bias = tensors["delta2.head.bias"].copy()
    n_b = cfg.k2 - cfg.k1
    bias[n_b:] = -100.0
    tensors["delta2.head.bias"] = bias
    b2 = ModelBundle.from_tensors(tensors)
    h = w = 3
    p = upsample_to(hyper_features(np.zeros((cfg.c_z, 1, 1)), b2), h, w)
    ctx = context_features(np.zeros((cfg.k3, h, w)), b2)
    base = entropy_params(p, ctx, b2, 2)
    got = delta_refine(p, ctx, base, b2, 2)
    assert (got.sigma == 0.11).all()


def test_delta_refine_invalid_block():
    b, cfg, latent, z = _case(37, 2, 2)
    p = upsample_to(hyper_features(z.astype(np.float64), b), 2, 2)
    ctx = context_features(latent.astype(np.float64), b)
    base = entropy_params(p, ctx, b, 1)
    for bad in (1, 4, 0):
        with pytest.raises(InvalidBlock):
            delta_refine(p, ctx, base, b, bad)


def test_delta_refine_base_shape_check():
    b, cfg, latent, z = _case(41, 2, 2)
    p = upsample_to(hyper_features(z.astype(np.float64), b), 2, 2)
    ctx = context_features(latent.astype(np.float64), b)
    wrong = GaussianField(mu=np.zeros((1, 2, 2)), sigma=np.ones((1, 2, 2)))
    with pytest.raises(ShapeMismatch):
        delta_refine(p, ctx, wrong, b, 2)


def test_attention_rows_sum_to_one():
    from semcodec.context_models import _window_attention
    rng = np.random.default_rng(5)
    f, h, w = 6, 10, 13  # ragged 8x8 tiling
    x = rng.normal(size=(f, h, w))
    eye = np.eye(f)
    zero = np.zeros(f)
    # v = identity makes the output a convex combination of inputs
    out = _window_attention(x, eye, zero, eye, zero, eye, zero)
    assert out.shape == x.shape
    assert out.min() >= x.min() - 1e-9
    assert out.max() <= x.max() + 1e-9


# -- bundle container -----------------------------------------------------------


def test_bundle_round_trip():
    b = _bundle(2)
    back = load_bundle(dump_bundle(b))
    assert back.content_hash == b.content_hash
    assert set(back.tensors) == set(b.tensors)
    for name in b.tensors:
        assert np.array_equal(back.tensors[name], b.tensors[name])


def test_bundle_payload_corruption_detected():
    blob = bytearray(dump_bundle(_bundle(2)))
    blob[len(blob) // 2] ^= 0x40
    with pytest.raises(ContainerHashMismatch):
        load_bundle(bytes(blob))


def test_bundle_bad_magic():
    blob = bytearray(dump_bundle(_bundle(2)))
    blob[:4] = b"XXXX"
    with pytest.raises(DataError, match="magic"):
        load_bundle(bytes(blob))


def test_bundle_trailing_garbage():
    import hashlib
    blob = dump_bundle(_bundle(2))
    # appended bytes shift the digest window: integrity failure
    with pytest.raises(ContainerHashMismatch):
        load_bundle(blob + b"\x00")
    # junk inside a correctly hashed body is a format error instead
    body = blob[:-32] + b"\x00\x00"
    with pytest.raises(DataError, match="trailing"):
        load_bundle(body + hashlib.sha256(body).digest())


def test_bundle_shape_validation():
    b = _bundle(2)
    good = dict(b.tensors)

    missing = dict(good)
    del missing["ep.l1.bias"]
    with pytest.raises(ShapeMismatch, match="lacks"):
        ModelBundle.from_tensors(missing)

    wrong = dict(good)
    wrong["ctx.conv.bias"] = np.zeros(5, dtype=np.float32)
    with pytest.raises(ShapeMismatch, match="ctx.conv.bias"):
        ModelBundle.from_tensors(wrong)

    extra = dict(good)
    extra["rogue"] = np.zeros(1, dtype=np.float32)
    with pytest.raises(ShapeMismatch, match="unexpected"):
        ModelBundle.from_tensors(extra)

    bad_cfg = dict(good)
    meta = bad_cfg["meta.config"].copy()
    meta[0], meta[1] = meta[1], meta[0]  # k1 > k2
    bad_cfg["meta.config"] = meta
    with pytest.raises(ShapeMismatch, match="boundaries"):
        ModelBundle.from_tensors(bad_cfg)


def test_expected_shapes_cover_bundle_exactly():
    b = _bundle(4)
    assert set(expected_shapes(b.config)) == set(b.tensors)


def test_config_round_trip():
    cfg = BundleConfig(4, 7, 10, c_z=3, f_p=6, f_ctx=128, f_hidden=12)
    b = make_bundle(5, boundaries=(4, 7, 10), c_z=3, f_p=6, f_hidden=12)
    assert b.config == cfg
