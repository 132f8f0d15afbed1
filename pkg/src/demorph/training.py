"""Symmetric dual training loop.

Each step runs one discriminator update (real pair vs detached restored
pair) followed by one generator update on the weighted total loss. The
dual forward feeds the stage-1 restorations back through the generator,
so one parameter set serves all four generator invocations; the morph
encoding is computed once and shared, which is mathematically identical
to re-encoding per pass.

Ablation flags: disabled loss terms are excluded from the generator
objective and logged as 0.0, keeping the logged identity
gen = pix + beta1*sym + lambda1*feat + lambda2*adv intact. no_sdn skips
the stage-2 passes entirely (two pixel/symmetry terms instead of four,
feature loss identically zero).
"""

import math
import os
from dataclasses import dataclass, field, fields

import numpy as np

from . import autodiff as ad
from . import losses as ls
from . import networks as nets
from .errors import ConfigurationError, TrainingDivergedError
from .layers import ForwardContext, apply_bn_updates


@dataclass
class TrainConfig:
    image_size: int = 64
    width_divisor: int = 4
    batch_size: int = 4
    steps: int = 2000
    learning_rate: float = 2e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    lambda1: float = 10.0
    lambda2: float = 1.0
    beta1: float = 1.0
    no_pix: bool = False
    no_sym: bool = False
    no_f: bool = False
    no_sdn: bool = False
    seed: int = 0
    checkpoint_interval: int = 500

    @property
    def weights(self):
        return ls.LossWeights(self.lambda1, self.lambda2, self.beta1)

    def net_config(self):
        return nets.NetConfig(image_size=self.image_size, width_divisor=self.width_divisor)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


class Adam:
    """Adaptive-moment gradient descent with bias correction.

    Updates reassign each parameter's array instead of mutating it in
    place, so graphs captured before the step keep their values.
    """

    def __init__(self, param_names, lr=2e-4, beta1=0.5, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: None for k in param_names}
        self.v = {k: None for k in param_names}

    def step(self, params):
        self.t += 1
        b1 = self.beta1
        b2 = self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for name, p in params.items():
            g = p.grad
            if g is None:
                continue
            if self.m[name] is None:
                self.m[name] = np.zeros_like(p.data)
                self.v[name] = np.zeros_like(p.data)
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * (g * g)
            mhat = self.m[name] / c1
            vhat = self.v[name] / c2
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def zero_grads(params):
    for p in params.values():
        p.grad = None


def dual_forward(gen_params, gen_state, criminal, accomplice, morph, cfg, ctx, dual=True):
    """Run the dual generator topology over one triplet batch.

    criminal/accomplice/morph: NHWC arrays or Tensors. Stage 1 restores
    each contributor from the other's image plus the morph; stage 2 (when
    dual) re-restores each contributor from the stage-1 output of the
    other, reusing the shared morph encoding.
    """
    crim = ad.as_tensor(criminal)
    acc = ad.as_tensor(accomplice)
    mor = ad.as_tensor(morph)

    f_crim = nets.encode(gen_params, gen_state, crim, cfg, ctx)
    f_acc = nets.encode(gen_params, gen_state, acc, cfg, ctx)
    f_morph = nets.encode(gen_params, gen_state, mor, cfg, ctx)

    feat_acc_1 = nets.separate(gen_params, gen_state, f_crim, f_morph, cfg, ctx)
    rest_acc_1 = nets.restore(gen_params, gen_state, feat_acc_1, cfg, ctx)
    feat_crim_1 = nets.separate(gen_params, gen_state, f_acc, f_morph, cfg, ctx)
    rest_crim_1 = nets.restore(gen_params, gen_state, feat_crim_1, cfg, ctx)

    out = ls.DualPassOutputs(
        restored_accomplice_1=rest_acc_1,
        restored_criminal_1=rest_crim_1,
        feat_accomplice_1=feat_acc_1,
        feat_criminal_1=feat_crim_1,
    )
    if dual:
        f_rc1 = nets.encode(gen_params, gen_state, rest_crim_1, cfg, ctx)
        out.feat_accomplice_2 = nets.separate(gen_params, gen_state, f_rc1, f_morph, cfg, ctx)
        out.restored_accomplice_2 = nets.restore(gen_params, gen_state, out.feat_accomplice_2, cfg, ctx)
        f_ra1 = nets.encode(gen_params, gen_state, rest_acc_1, cfg, ctx)
        out.feat_criminal_2 = nets.separate(gen_params, gen_state, f_ra1, f_morph, cfg, ctx)
        out.restored_criminal_2 = nets.restore(gen_params, gen_state, out.feat_criminal_2, cfg, ctx)
    return out


def train_step(batch, gen_params, gen_state, disc_params, disc_state, gen_opt, disc_opt, cfg):
    """One alternating update; returns the step's loss metrics."""
    net_cfg = cfg.net_config()
    crim = np.stack([t.criminal_image for t in batch])
    acc = np.stack([t.accomplice_image for t in batch])
    mor = np.stack([t.morph_image for t in batch])
    gt_acc = ad.Tensor(acc)

    ctx_gen = ForwardContext(training=True)
    outputs = dual_forward(
        gen_params, gen_state, crim, acc, mor, net_cfg, ctx_gen, dual=not cfg.no_sdn
    )

    # discriminator update: genuine pair vs detached restored pair
    ctx_d = ForwardContext(training=True)
    d_real = nets.discriminate(disc_params, disc_state, gt_acc, gt_acc, net_cfg, ctx_d)
    d_fake_det = nets.discriminate(
        disc_params, disc_state, gt_acc, outputs.restored_accomplice_1.detach(), net_cfg, ctx_d
    )
    loss_d = ls.discriminator_loss(d_real, d_fake_det)
    zero_grads(disc_params)
    loss_d.backward()
    disc_opt.step(disc_params)
    apply_bn_updates(disc_state, ctx_d, net_cfg.bn_momentum)

    # generator update against the freshly updated discriminator
    ctx_d2 = ForwardContext(training=True)
    outputs.d_fake = nets.discriminate(
        disc_params, disc_state, gt_acc, outputs.restored_accomplice_1, net_cfg, ctx_d2
    )
    l_pix = ls.pixel_wise_loss(outputs, ad.Tensor(crim), gt_acc)
    l_sym = ls.symmetry_loss(outputs)
    l_f = ls.feature_loss(outputs)
    l_adv = ls.adversarial_gen_loss(outputs.d_fake)

    w = cfg.weights
    objective = ad.Tensor(0.0)
    if not cfg.no_pix:
        objective = objective + l_pix
    if not cfg.no_sym:
        objective = objective + w.beta1 * l_sym
    if not cfg.no_f:
        objective = objective + w.lambda1 * l_f
    objective = objective + w.lambda2 * l_adv

    zero_grads(gen_params)
    zero_grads(disc_params)
    objective.backward()
    gen_opt.step(gen_params)
    zero_grads(disc_params)
    apply_bn_updates(gen_state, ctx_gen, net_cfg.bn_momentum)
    apply_bn_updates(disc_state, ctx_d2, net_cfg.bn_momentum)

    metrics = {
        "pix": 0.0 if cfg.no_pix else l_pix.item(),
        "sym": 0.0 if cfg.no_sym else l_sym.item(),
        "feat": 0.0 if cfg.no_f else l_f.item(),
        "adv": l_adv.item(),
        "gen": objective.item(),
        "disc": loss_d.item(),
        "pix_terms": len(outputs.restorations()),
        "sym_terms": len(outputs.restorations()),
    }
    if not all(math.isfinite(metrics[k]) for k in ls.LOSS_LOG_FIELDS):
        raise TrainingDivergedError("non-finite loss", metrics)
    return metrics


@dataclass
class TrainResult:
    gen_params: dict
    gen_state: dict
    disc_params: dict
    disc_state: dict
    metrics_log: list = field(default_factory=list)
    checkpoint_path: str = ""


def init_models(cfg):
    net_cfg = cfg.net_config()
    ss = np.random.SeedSequence([cfg.seed, 0])
    gen_rng, disc_rng = [np.random.default_rng(s) for s in ss.spawn(2)]
    gen_params, gen_state = nets.init_generator(net_cfg, gen_rng)
    disc_params, disc_state = nets.init_discriminator(net_cfg, disc_rng)
    return gen_params, gen_state, disc_params, disc_state


def save_train_checkpoint(path, cfg, step, gen_params, gen_state, disc_params, disc_state):
    tensors = {}
    for prefix, group in (
        ("gen.param.", gen_params),
        ("gen.state.", gen_state),
        ("disc.param.", disc_params),
        ("disc.state.", disc_state),
    ):
        for k, v in group.items():
            tensors[prefix + k] = v
    config = {"net": cfg.net_config().to_dict(), "train": cfg.to_dict(), "step": step}
    nets.save_checkpoint(path, config, tensors)


def load_generator(path):
    """Read a training checkpoint; returns (net config, params, state)."""
    config, tensors = nets.load_checkpoint(path)
    net_cfg = nets.NetConfig.from_dict(config["net"])
    params = nets.params_to_tensors(nets.split_prefixed(tensors, "gen.param."))
    state = nets.split_prefixed(tensors, "gen.state.")
    return net_cfg, params, state


def train(cfg, dataset, out_dir=None, log_path=None):
    """Run the configured number of steps over a triplet dataset.

    Fully reproducible from cfg.seed: initialization and batch order carry
    all the stochasticity. Writes loss-log lines and periodic checkpoints
    when paths are given.
    """
    if not dataset:
        raise ConfigurationError("training dataset is empty")
    gen_params, gen_state, disc_params, disc_state = init_models(cfg)
    gen_opt = Adam(gen_params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    disc_opt = Adam(disc_params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))

    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    result = TrainResult(gen_params, gen_state, disc_params, disc_state)
    try:
        order = []
        for step in range(1, cfg.steps + 1):
            while len(order) < cfg.batch_size:
                order.extend(shuffle_rng.permutation(len(dataset)).tolist())
            batch = [dataset[i] for i in order[: cfg.batch_size]]
            del order[: cfg.batch_size]
            metrics = train_step(
                batch, gen_params, gen_state, disc_params, disc_state, gen_opt, disc_opt, cfg
            )
            result.metrics_log.append(metrics)
            if log_fh:
                log_fh.write(ls.format_loss_line(step, metrics) + "\n")
            if out_dir and cfg.checkpoint_interval and step % cfg.checkpoint_interval == 0:
                p = os.path.join(out_dir, f"checkpoint_{step:06d}.ckpt")
                save_train_checkpoint(
                    p, cfg, step, gen_params, gen_state, disc_params, disc_state
                )
    finally:
        if log_fh:
            log_fh.close()
    if out_dir:
        result.checkpoint_path = os.path.join(out_dir, "checkpoint.ckpt")
        save_train_checkpoint(
            result.checkpoint_path,
            cfg,
            cfg.steps,
            gen_params,
            gen_state,
            disc_params,
            disc_state,
        )
    return result
