"""Training objectives.

All L1 terms are elementwise means, not raw sums, so the documented loss
weights behave the same at every resolution. The symmetry term averages
|img(i, j) - img(i, w - j + 1)| over each mirror pair once, which equals
the elementwise mean over the left half vs the mirrored right half.

Adversarial terms are least-squares: the generator drives the pair score
toward 1 via mean((d_fake - 1)^2); the discriminator minimizes
mean((d_real - 1)^2) + mean(d_fake^2). Expectations are minibatch means.
"""

import math
from dataclasses import dataclass
from typing import Optional

from . import autodiff as ad
from .errors import ParameterError, ShapeError

LOSS_LOG_FIELDS = ("pix", "sym", "feat", "adv", "gen", "disc")


@dataclass(frozen=True)
class LossWeights:
    """lambda1 scales the feature loss, lambda2 the adversarial loss,
    beta1 the symmetry loss."""

    lambda1: float = 10.0
    lambda2: float = 1.0
    beta1: float = 1.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "beta1"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ParameterError(f"{name} must be finite and >= 0, got {v}")


@dataclass
class DualPassOutputs:
    """Everything a symmetric dual forward pass produces.

    Stage-1 restorations come straight from the ground-truth inputs;
    stage-2 restorations feed a stage-1 output back through the generator
    and are None when the dual topology is disabled. d_fake is filled in
    by the trainer before the adversarial term is computed.
    """

    restored_accomplice_1: ad.Tensor
    restored_criminal_1: ad.Tensor
    feat_accomplice_1: ad.Tensor
    feat_criminal_1: ad.Tensor
    restored_accomplice_2: Optional[ad.Tensor] = None
    restored_criminal_2: Optional[ad.Tensor] = None
    feat_accomplice_2: Optional[ad.Tensor] = None
    feat_criminal_2: Optional[ad.Tensor] = None
    d_fake: Optional[ad.Tensor] = None

    @property
    def dual(self):
        return self.restored_accomplice_2 is not None

    def accomplice_restorations(self):
        out = [self.restored_accomplice_1]
        if self.restored_accomplice_2 is not None:
            out.append(self.restored_accomplice_2)
        return out

    def criminal_restorations(self):
        out = [self.restored_criminal_1]
        if self.restored_criminal_2 is not None:
            out.append(self.restored_criminal_2)
        return out

    def restorations(self):
        return self.accomplice_restorations() + self.criminal_restorations()


def l1_mean(x, y):
    """Mean absolute difference over all elements."""
    x = ad.as_tensor(x)
    y = ad.as_tensor(y)
    if x.data.shape != y.data.shape:
        raise ShapeError(f"l1_mean shapes differ: {x.data.shape} vs {y.data.shape}")
    return ad.mean_all(ad.abs_(x - y))


def pixel_wise_loss(outputs, gt_criminal, gt_accomplice):
    """Sum of L1 terms pulling every restoration to its ground truth."""
    total = None
    for img in outputs.accomplice_restorations():
        term = l1_mean(img, gt_accomplice)
        total = term if total is None else total + term
    for img in outputs.criminal_restorations():
        total = total + l1_mean(img, gt_criminal)
    return total


def symmetry_loss_single(img):
    """Horizontal-asymmetry penalty for one image batch (NHWC, even width)."""
    img = ad.as_tensor(img)
    if img.data.ndim != 4:
        raise ShapeError("symmetry_loss_single expects an NHWC tensor")
    w = img.data.shape[2]
    if w % 2:
        raise ParameterError(f"symmetry loss needs an even width, got {w}")
    half = w // 2
    left = ad.narrow(img, 2, 0, half)
    right = ad.flip_w(ad.narrow(img, 2, half, half))
    return ad.mean_all(ad.abs_(left - right))


def symmetry_loss(outputs):
    """Sum of the per-image symmetry penalties over all restorations."""
    total = None
    for img in outputs.restorations():
        term = symmetry_loss_single(img)
        total = term if total is None else total + term
    return total


def feature_loss(outputs):
    """Consistency between stage-1 and stage-2 separated identity features.

    Zero (no term) when the dual topology is disabled: there is no
    second-stage feature to compare.
    """
    if not outputs.dual:
        return ad.Tensor(0.0)
    return l1_mean(outputs.feat_accomplice_2, outputs.feat_accomplice_1) + l1_mean(
        outputs.feat_criminal_2, outputs.feat_criminal_1
    )


def adversarial_gen_loss(d_fake):
    """Least-squares generator objective: mean((d_fake - 1)^2)."""
    d = ad.as_tensor(d_fake)
    e = d - 1.0
    return ad.mean_all(e * e)


def discriminator_loss(d_real, d_fake):
    """Least-squares discriminator objective:
    mean((d_real - 1)^2) + mean(d_fake^2)."""
    dr = ad.as_tensor(d_real)
    df = ad.as_tensor(d_fake)
    er = dr - 1.0
    return ad.mean_all(er * er) + ad.mean_all(df * df)


def generator_total_loss(l_pix, l_sym, l_f, l_adv, weights):
    """(l_pix + beta1 * l_sym) + lambda1 * l_f + lambda2 * l_adv."""
    l_pxl = ad.as_tensor(l_pix) + weights.beta1 * ad.as_tensor(l_sym)
    return l_pxl + weights.lambda1 * ad.as_tensor(l_f) + weights.lambda2 * ad.as_tensor(l_adv)


def format_loss_line(step, metrics):
    """One log line: step then pix/sym/feat/adv/gen/disc as decimal floats."""
    vals = " ".join(repr(float(metrics[k])) for k in LOSS_LOG_FIELDS)
    return f"{step} {vals}"


def parse_loss_line(line):
    parts = line.split()
    if len(parts) != 1 + len(LOSS_LOG_FIELDS):
        raise ValueError(f"malformed loss line: {line!r}")
    out = {"step": int(parts[0])}
    for key, raw in zip(LOSS_LOG_FIELDS, parts[1:]):
        out[key] = float(raw)
    return out
