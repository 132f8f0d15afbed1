"""The restoration GAN's computation graph.

Four sub-networks over the autodiff tensor:

* identity encoder     7x7/1@64 -> three 3x3/2 stages @128/256/512, each
                       conv + BN + ReLU; output spatial size = input / 8
* identity separator   per input: 3 residual blocks; channel-concat; then
                       3 residual blocks back to the feature width
* face restorer        three (2x nearest upsample + 3x3 conv + BN + ReLU)
                       stages @256/128/64, then 7x7 conv to RGB + Tanh
* pair discriminator   channel-concatenated image pair -> three 3x3/2
                       convs @64/128/256 (BN from the second on, LeakyReLU)
                       -> FC -> sigmoid

`width_divisor` scales every channel width down for toy configurations;
the architecture is otherwise fixed. Residual blocks are
conv-BN-ReLU-conv-BN with the skip added before a final ReLU, using a
1x1 projection (+BN) when the channel count changes.
"""

import io
import json
import zipfile
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import layers as ly
from .errors import ShapeError

CHECKPOINT_FORMAT_VERSION = 1

ENCODER_WIDTHS = (64, 128, 256, 512)
RESTORER_WIDTHS = (256, 128, 64)
DISCRIMINATOR_WIDTHS = (64, 128, 256)


@dataclass(frozen=True)
class NetConfig:
    image_size: int = 128
    width_divisor: int = 1
    bn_eps: float = 1e-5
    bn_momentum: float = 0.9
    leaky_slope: float = 0.2

    def __post_init__(self):
        s = self.image_size
        if s < 16 or (s & (s - 1)) != 0:
            raise ShapeError(f"image_size must be a power of two >= 16, got {s}")
        if self.width_divisor < 1 or ENCODER_WIDTHS[0] % self.width_divisor:
            raise ShapeError(f"width_divisor must divide 64, got {self.width_divisor}")

    def scaled(self, widths):
        return tuple(w // self.width_divisor for w in widths)

    @property
    def encoder_widths(self):
        return self.scaled(ENCODER_WIDTHS)

    @property
    def feature_channels(self):
        return self.encoder_widths[-1]

    @property
    def feature_size(self):
        return self.image_size // 8

    @property
    def restorer_widths(self):
        return self.scaled(RESTORER_WIDTHS)

    @property
    def discriminator_widths(self):
        return self.scaled(DISCRIMINATOR_WIDTHS)

    def to_dict(self):
        return {
            "image_size": self.image_size,
            "width_divisor": self.width_divisor,
            "bn_eps": self.bn_eps,
            "bn_momentum": self.bn_momentum,
            "leaky_slope": self.leaky_slope,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _check_image_batch(x, cfg, name):
    if x.data.ndim != 4 or x.data.shape[3] != 3:
        raise ShapeError(f"{name} must be NHWC with 3 channels, got {x.data.shape}")
    if x.data.shape[1] != cfg.image_size or x.data.shape[2] != cfg.image_size:
        raise ShapeError(
            f"{name} must be {cfg.image_size}x{cfg.image_size}, got {x.data.shape}"
        )


# ---------------------------------------------------------------------------
# initialization


def _init_residual_block(params, state, rng, name, cin, cout):
    ly.init_conv(params, rng, f"{name}.conv1", 3, 3, cin, cout, bias=False)
    ly.init_bn(params, state, f"{name}.bn1", cout)
    ly.init_conv(params, rng, f"{name}.conv2", 3, 3, cout, cout, bias=False)
    ly.init_bn(params, state, f"{name}.bn2", cout)
    if cin != cout:
        ly.init_conv(params, rng, f"{name}.proj", 1, 1, cin, cout, bias=False)
        ly.init_bn(params, state, f"{name}.bnp", cout)


def init_encoder_into(params, state, cfg, rng):
    w = cfg.encoder_widths
    ly.init_conv(params, rng, "enc.conv1", 7, 7, 3, w[0], bias=False)
    ly.init_bn(params, state, "enc.bn1", w[0])
    for i in range(1, 4):
        ly.init_conv(params, rng, f"enc.conv{i + 1}", 3, 3, w[i - 1], w[i], bias=False)
        ly.init_bn(params, state, f"enc.bn{i + 1}", w[i])


def init_generator(cfg, rng):
    params = {}
    state = {}
    init_encoder_into(params, state, cfg, rng)

    fc = cfg.feature_channels
    for branch in ("aux", "morph"):
        for b in range(3):
            _init_residual_block(params, state, rng, f"sep.{branch}.b{b}", fc, fc)
    _init_residual_block(params, state, rng, "sep.joint.b0", 2 * fc, fc)
    _init_residual_block(params, state, rng, "sep.joint.b1", fc, fc)
    _init_residual_block(params, state, rng, "sep.joint.b2", fc, fc)

    rw = cfg.restorer_widths
    cin = fc
    for i, cout in enumerate(rw):
        ly.init_conv(params, rng, f"res.up{i + 1}", 3, 3, cin, cout, bias=False)
        ly.init_bn(params, state, f"res.bn{i + 1}", cout)
        cin = cout
    ly.init_conv(params, rng, "res.out", 7, 7, cin, 3)
    return params, state


def init_discriminator(cfg, rng):
    params = {}
    state = {}
    w = cfg.discriminator_widths
    ly.init_conv(params, rng, "disc.conv1", 3, 3, 6, w[0])
    ly.init_conv(params, rng, "disc.conv2", 3, 3, w[0], w[1], bias=False)
    ly.init_bn(params, state, "disc.bn2", w[1])
    ly.init_conv(params, rng, "disc.conv3", 3, 3, w[1], w[2], bias=False)
    ly.init_bn(params, state, "disc.bn3", w[2])
    feat = (cfg.image_size // 8) ** 2 * w[2]
    ly.init_dense(params, rng, "disc.fc", feat, 1)
    return params, state


# ---------------------------------------------------------------------------
# forward passes


def encode(params, state, x, cfg, ctx):
    """Identity encoder: image batch -> feature map at 1/8 resolution."""
    _check_image_batch(x, cfg, "encoder input")
    h = ly.conv(params, "enc.conv1", x, 1, 3)
    h = ly.batch_norm(params, state, "enc.bn1", h, ctx, cfg.bn_eps)
    h = ad.relu(h)
    for i in (2, 3, 4):
        h = ly.conv(params, f"enc.conv{i}", h, 2, 1)
        h = ly.batch_norm(params, state, f"enc.bn{i}", h, ctx, cfg.bn_eps)
        h = ad.relu(h)
    return h


def _residual_block(params, state, name, x, cfg, ctx, cin, cout):
    h = ly.conv(params, f"{name}.conv1", x, 1, 1)
    h = ly.batch_norm(params, state, f"{name}.bn1", h, ctx, cfg.bn_eps)
    h = ad.relu(h)
    h = ly.conv(params, f"{name}.conv2", h, 1, 1)
    h = ly.batch_norm(params, state, f"{name}.bn2", h, ctx, cfg.bn_eps)
    if cin != cout:
        skip = ly.conv(params, f"{name}.proj", x, 1, 0)
        skip = ly.batch_norm(params, state, f"{name}.bnp", skip, ctx, cfg.bn_eps)
    else:
        skip = x
    return ad.relu(h + skip)


def separate(params, state, f_aux, f_morph, cfg, ctx):
    """Identity separator: (contributor feature, morph feature) -> restored
    identity feature of the other contributor."""
    if f_aux.data.shape != f_morph.data.shape:
        raise ShapeError(
            f"separator inputs differ in shape: {f_aux.data.shape} vs {f_morph.data.shape}"
        )
    fc = cfg.feature_channels
    if f_aux.data.ndim != 4 or f_aux.data.shape[3] != fc:
        raise ShapeError(
            f"separator expects {fc}-channel feature maps, got {f_aux.data.shape}"
        )
    ha = f_aux
    hm = f_morph
    for b in range(3):
        ha = _residual_block(params, state, f"sep.aux.b{b}", ha, cfg, ctx, fc, fc)
        hm = _residual_block(params, state, f"sep.morph.b{b}", hm, cfg, ctx, fc, fc)
    h = ad.concat_channels(ha, hm)
    h = _residual_block(params, state, "sep.joint.b0", h, cfg, ctx, 2 * fc, fc)
    h = _residual_block(params, state, "sep.joint.b1", h, cfg, ctx, fc, fc)
    h = _residual_block(params, state, "sep.joint.b2", h, cfg, ctx, fc, fc)
    return h


def restore(params, state, f, cfg, ctx):
    """Face restorer: identity feature map -> RGB image batch in [-1, 1]."""
    if f.data.ndim != 4 or f.data.shape[3] != cfg.feature_channels:
        raise ShapeError(
            f"restorer expects {cfg.feature_channels}-channel features, got {f.data.shape}"
        )
    h = f
    for i in range(len(cfg.restorer_widths)):
        h = ad.upsample2x(h)
        h = ly.conv(params, f"res.up{i + 1}", h, 1, 1)
        h = ly.batch_norm(params, state, f"res.bn{i + 1}", h, ctx, cfg.bn_eps)
        h = ad.relu(h)
    h = ly.conv(params, "res.out", h, 1, 3)
    return ad.tanh(h)


def generate(params, state, aux, morphed, cfg, ctx):
    """Full generator: (contributor image, morph image) -> (restored image
    of the other contributor, its separated identity feature)."""
    f_aux = encode(params, state, aux, cfg, ctx)
    f_morph = encode(params, state, morphed, cfg, ctx)
    feat = separate(params, state, f_aux, f_morph, cfg, ctx)
    img = restore(params, state, feat, cfg, ctx)
    return img, feat


def discriminate(params, state, ref, candidate, cfg, ctx):
    """Pair discriminator: per-pair realness score in (0, 1), shape (n,)."""
    _check_image_batch(ref, cfg, "discriminator ref")
    _check_image_batch(candidate, cfg, "discriminator candidate")
    if ref.data.shape != candidate.data.shape:
        raise ShapeError(
            f"discriminator pair shapes differ: {ref.data.shape} vs {candidate.data.shape}"
        )
    h = ad.concat_channels(ref, candidate)
    h = ly.conv(params, "disc.conv1", h, 2, 1)
    h = ad.leaky_relu(h, cfg.leaky_slope)
    h = ly.conv(params, "disc.conv2", h, 2, 1)
    h = ly.batch_norm(params, state, "disc.bn2", h, ctx, cfg.bn_eps)
    h = ad.leaky_relu(h, cfg.leaky_slope)
    h = ly.conv(params, "disc.conv3", h, 2, 1)
    h = ly.batch_norm(params, state, "disc.bn3", h, ctx, cfg.bn_eps)
    h = ad.leaky_relu(h, cfg.leaky_slope)
    n = h.data.shape[0]
    h = ad.reshape(h, (n, -1))
    h = ly.dense(params, "disc.fc", h)
    return ad.reshape(ad.sigmoid(h), (n,))


# ---------------------------------------------------------------------------
# checkpoint container: zip of manifest.json + one .npy per tensor


def save_checkpoint(path, config, tensors):
    """Write a checkpoint: config dict + named float64 tensors.

    Tensors may be autodiff Tensors or ndarrays. Round-trips bit-exactly.
    """
    arrays = {
        name: (t.data if isinstance(t, ad.Tensor) else np.asarray(t))
        for name, t in tensors.items()
    }
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": config,
        "tensors": {
            name: {"shape": list(a.shape), "dtype": str(a.dtype)}
            for name, a in sorted(arrays.items())
        },
    }
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=1, sort_keys=True))
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.save(buf, arrays[name])
            zf.writestr(f"tensors/{name}.npy", buf.getvalue())


def load_checkpoint(path):
    """Read a checkpoint; returns (config dict, {name: ndarray})."""
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        if manifest["format_version"] != CHECKPOINT_FORMAT_VERSION:
            raise ShapeError(
                f"unsupported checkpoint format version {manifest['format_version']}"
            )
        tensors = {}
        for name in manifest["tensors"]:
            tensors[name] = np.load(io.BytesIO(zf.read(f"tensors/{name}.npy")))
    return manifest["config"], tensors


def params_to_tensors(arrays, requires_grad=True):
    return {k: ad.Tensor(v, requires_grad=requires_grad) for k, v in arrays.items()}


def split_prefixed(tensors, prefix):
    plen = len(prefix)
    return {k[plen:]: v for k, v in tensors.items() if k.startswith(prefix)}
