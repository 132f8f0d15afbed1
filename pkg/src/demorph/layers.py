"""Parameter initialization and named-layer wrappers over autodiff ops.

Parameters live in a flat {name: Tensor} dict; batch-norm running
statistics live in a separate {name: ndarray} state dict so they are never
touched by the optimizer or the gradient checks. Forward passes are pure:
training-mode batch statistics are recorded on the ForwardContext and the
trainer folds them into the state afterwards.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad


def truncated_normal(rng, shape, std=0.02):
    """Normal samples with |z| > 2 sigma redrawn, scaled by std."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return out * std


@dataclass
class ForwardContext:
    """Per-pass mode flags and the batch-norm statistics recorder."""

    training: bool = False
    bn_batch_stats: list = field(default_factory=list)

    def record_bn(self, name, mean, var):
        if self.training:
            self.bn_batch_stats.append((name, mean, var))


def init_conv(params, rng, name, kh, kw, cin, cout, bias=True):
    params[f"{name}.w"] = ad.Tensor(truncated_normal(rng, (kh, kw, cin, cout)), requires_grad=True)
    if bias:
        params[f"{name}.b"] = ad.Tensor(np.zeros(cout), requires_grad=True)


def init_bn(params, state, name, c):
    params[f"{name}.gamma"] = ad.Tensor(np.ones(c), requires_grad=True)
    params[f"{name}.beta"] = ad.Tensor(np.zeros(c), requires_grad=True)
    state[f"{name}.mean"] = np.zeros(c)
    state[f"{name}.var"] = np.ones(c)


def init_dense(params, rng, name, fin, fout):
    params[f"{name}.w"] = ad.Tensor(truncated_normal(rng, (fin, fout)), requires_grad=True)
    params[f"{name}.b"] = ad.Tensor(np.zeros(fout), requires_grad=True)


def conv(params, name, x, stride=1, padding=0):
    return ad.conv2d(x, params[f"{name}.w"], params.get(f"{name}.b"), stride, padding)


def batch_norm(params, state, name, x, ctx, eps=1e-5):
    out, mu, var = ad.batch_norm(
        x,
        params[f"{name}.gamma"],
        params[f"{name}.beta"],
        state[f"{name}.mean"],
        state[f"{name}.var"],
        training=ctx.training,
        eps=eps,
    )
    if ctx.training:
        ctx.record_bn(name, mu, var)
    return out


def dense(params, name, x):
    return ad.matmul(x, params[f"{name}.w"]) + params[f"{name}.b"]


def apply_bn_updates(state, ctx, momentum=0.9):
    """Fold recorded batch statistics into the running buffers (EMA), in
    recording order."""
    for name, mean, var in ctx.bn_batch_stats:
        state[f"{name}.mean"] = momentum * state[f"{name}.mean"] + (1.0 - momentum) * mean
        state[f"{name}.var"] = momentum * state[f"{name}.var"] + (1.0 - momentum) * var
    ctx.bn_batch_stats.clear()
