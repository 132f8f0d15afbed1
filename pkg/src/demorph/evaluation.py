"""Restoration-accuracy evaluation against a pluggable face matcher.

The matcher interface is a similarity score (higher = more similar) plus a
decision threshold calibrated to a false-accept rate on impostor pairs.
The shipped matcher embeds faces with a dedicated identity encoder
(trained with a classification head on identities disjoint from the
evaluation identities; the head is discarded) and compares embeddings by
cosine similarity.

Decision rules use a strict > for "matches" and <= for "does not match":

* attack success      score(morph, contributor1) > t and
                      score(morph, contributor2) > t
* restoration success score(restored, accomplice) > t and
                      score(restored, criminal) <= t
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import losses as ls
from . import networks as nets
from .errors import InsufficientDataError, ParameterError, ShapeError
from .layers import ForwardContext, apply_bn_updates, init_dense
from .training import Adam, zero_grads

MATCHER_FORMAT_KIND = "embedding-matcher"


class Matcher:
    """Interface: symmetric deterministic similarity plus a threshold."""

    threshold = float("-inf")

    def score(self, img1, img2):
        raise NotImplementedError


def cosine_similarity(a, b, eps=1e-12):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na < eps or nb < eps:
        return 0.0
    return float(a @ b) / (na * nb)


class EmbeddingMatcher(Matcher):
    """Cosine similarity of average-pooled identity-encoder features."""

    def __init__(self, net_cfg, params, state, threshold=float("-inf")):
        self.net_cfg = net_cfg
        self.params = params
        self.state = state
        self.threshold = threshold

    def embed_batch(self, images):
        """(n, h, w, 3) array -> (n, c) embeddings, inference mode."""
        ctx = ForwardContext(training=False)
        with ad.no_grad():
            feat = nets.encode(self.params, self.state, ad.Tensor(images), self.net_cfg, ctx)
            emb = ad.mean_hw(feat)
        return emb.data

    def embed(self, img):
        return self.embed_batch(np.asarray(img)[None])[0]

    def score(self, img1, img2):
        return cosine_similarity(self.embed(img1), self.embed(img2))

    def save(self, path):
        tensors = {}
        for k, v in self.params.items():
            tensors[f"param.{k}"] = v
        for k, v in self.state.items():
            tensors[f"state.{k}"] = v
        config = {
            "kind": MATCHER_FORMAT_KIND,
            "net": self.net_cfg.to_dict(),
            "threshold": self.threshold,
        }
        nets.save_checkpoint(path, config, tensors)

    @classmethod
    def load(cls, path):
        config, tensors = nets.load_checkpoint(path)
        if config.get("kind") != MATCHER_FORMAT_KIND:
            raise ShapeError(f"not a matcher checkpoint: {path}")
        net_cfg = nets.NetConfig.from_dict(config["net"])
        params = nets.params_to_tensors(nets.split_prefixed(tensors, "param."))
        state = nets.split_prefixed(tensors, "state.")
        return cls(net_cfg, params, state, config["threshold"])


def train_matcher(images, labels, n_classes, net_cfg, seed=0, steps=600, batch_size=16, lr=1e-3):
    """Train the matcher encoder with an identity-classification head.

    images: (n, h, w, 3) float array; labels: (n,) ints in [0, n_classes).
    The classification head is dropped from the returned matcher.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    if images.ndim != 4 or images.shape[0] != labels.shape[0]:
        raise ShapeError("matcher training needs matching image/label counts")
    if images.shape[0] < batch_size:
        raise InsufficientDataError("fewer matcher training images than one batch")

    rng = np.random.default_rng(np.random.SeedSequence([seed, 10]))
    params, state = {}, {}
    nets.init_encoder_into(params, state, net_cfg, rng)
    init_dense(params, rng, "head.fc", net_cfg.feature_channels, n_classes)
    opt = Adam(params, lr=lr, beta1=0.9, beta2=0.999)

    order = []
    for _ in range(steps):
        while len(order) < batch_size:
            order.extend(rng.permutation(images.shape[0]).tolist())
        idx = order[:batch_size]
        del order[:batch_size]
        ctx = ForwardContext(training=True)
        feat = nets.encode(params, state, ad.Tensor(images[idx]), net_cfg, ctx)
        logits = ad.matmul(ad.mean_hw(feat), params["head.fc.w"]) + params["head.fc.b"]
        loss = ad.softmax_cross_entropy(logits, labels[idx])
        zero_grads(params)
        loss.backward()
        opt.step(params)
        apply_bn_updates(state, ctx, net_cfg.bn_momentum)

    for k in list(params):
        if k.startswith("head."):
            del params[k]
    return EmbeddingMatcher(net_cfg, params, state)


def calibrate_threshold(impostor_scores, far):
    """Smallest threshold t with (fraction of impostor scores > t) <= far.

    Ties break upward: with duplicated scores the threshold lands on the
    duplicate value itself. far = 1.0 degenerates to -inf (accept all).
    """
    if not (0.0 < far <= 1.0):
        raise ParameterError(f"far must be in (0, 1], got {far}")
    scores = np.asarray(list(impostor_scores), dtype=np.float64)
    n = scores.size
    if n * far + 1e-9 < 1.0:
        raise InsufficientDataError(
            f"need at least {math.ceil(1.0 / far)} impostor scores for far={far}, got {n}"
        )
    allowed = int(math.floor(n * far + 1e-9))
    if allowed >= n:
        return float("-inf")
    desc = np.sort(scores)[::-1]
    return float(desc[allowed])


def attack_success(morphed, contributor1, contributor2, matcher):
    """Both contributors must clear the matcher threshold against the morph."""
    t = matcher.threshold
    return matcher.score(morphed, contributor1) > t and matcher.score(morphed, contributor2) > t


def restoration_success(restored, accomplice_gt, criminal_gt, matcher):
    """Restored face must match the accomplice and not the criminal."""
    t = matcher.threshold
    return (
        matcher.score(restored, accomplice_gt) > t
        and matcher.score(restored, criminal_gt) <= t
    )


@dataclass
class EvalReport:
    total: int
    successes: int
    accuracy: float
    threshold: float
    items: list = field(default_factory=list)

    def to_json(self):
        payload = {
            "T": self.total,
            "N": self.successes,
            "accuracy": self.accuracy,
            "threshold": self.threshold,
            "items": self.items,
        }
        return json.dumps(payload, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["T"], d["N"], d["accuracy"], d["threshold"], d["items"])


def restore_faces(gen_params, gen_state, net_cfg, criminal_batch, morph_batch):
    """Inference-mode generator pass: restored accomplice images."""
    ctx = ForwardContext(training=False)
    with ad.no_grad():
        img, _ = nets.generate(
            gen_params, gen_state, ad.Tensor(criminal_batch), ad.Tensor(morph_batch),
            net_cfg, ctx,
        )
    return img.data


def evaluate(triplets, gen_params, gen_state, net_cfg, matcher, chunk=16):
    """Run the generator over test triplets and score restorations.

    Returns an EvalReport whose accuracy is successes/total; items carry
    the per-triplet matcher scores and verdicts.
    """
    triplets = list(triplets)
    if not triplets:
        raise InsufficientDataError("no test triplets to evaluate")
    items = []
    n_success = 0
    for lo in range(0, len(triplets), chunk):
        part = triplets[lo : lo + chunk]
        crim = np.stack([t.criminal_image for t in part])
        mor = np.stack([t.morph_image for t in part])
        restored = restore_faces(gen_params, gen_state, net_cfg, crim, mor)
        for t, rest in zip(part, restored):
            emb_r = matcher.embed(rest)
            s_acc = cosine_similarity(emb_r, matcher.embed(t.accomplice_image))
            s_crim = cosine_similarity(emb_r, matcher.embed(t.criminal_image))
            ok = bool(s_acc > matcher.threshold and s_crim <= matcher.threshold)
            n_success += ok
            items.append(
                {
                    "id": t.triplet_id,
                    "score_accomplice": s_acc,
                    "score_criminal": s_crim,
                    "success": ok,
                }
            )
    total = len(items)
    return EvalReport(
        total=total,
        successes=n_success,
        accuracy=n_success / total,
        threshold=matcher.threshold,
        items=items,
    )


def restoration_metrics(metrics_log):
    """Aggregate helper for smoke checks: mean of each logged loss."""
    out = {}
    for key in ls.LOSS_LOG_FIELDS:
        out[key] = float(np.mean([m[key] for m in metrics_log]))
    return out
