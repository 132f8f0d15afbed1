"""Command-line interface.

Subcommands:

    morph    blend two faces: images + 68-point landmark files + factors
    dataset  synthesize the toy corpus and morph triplets
    train    run the restoration GAN training loop
    matcher  train and calibrate the embedding matcher
    demorph  restore the second contributor from a morph + one live image
    eval     score restorations on a test split -> JSON report

Module errors exit 1 with a message on stderr; usage errors exit 2.
"""

import argparse
import os
import sys

import numpy as np

from . import datasets as ds
from . import evaluation as ev
from . import networks as nets
from . import training as tr
from .configfile import config_from_file
from .errors import ConfigurationError, DemorphError, InsufficientDataError
from .image_io import load_image, save_image
from .landmarks import load_landmarks, morph_landmarks_from_68
from .warping import MorphParams, morph


def _add_common(p):
    p.add_argument("--seed", type=int, default=None, help="master random seed")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--out", required=True, help="output path")


def build_parser():
    ap = argparse.ArgumentParser(prog="demorph", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("morph", help="generate a morphed face image")
    p.add_argument("--image1", required=True)
    p.add_argument("--image2", required=True)
    p.add_argument("--landmarks1", required=True, help="68-point JSON for image1")
    p.add_argument("--landmarks2", required=True, help="68-point JSON for image2")
    p.add_argument("--alpha", type=float, required=True, help="pixel fusion factor")
    p.add_argument("--beta", type=float, default=0.5, help="location fusion factor")
    _add_common(p)

    p = sub.add_parser("dataset", help="build the synthetic corpus")
    _add_common(p)

    p = sub.add_parser("train", help="train the restoration network")
    p.add_argument("--data", required=True, help="dataset root (manifest.json inside)")
    p.add_argument("--steps", type=int, default=None, help="override step count")
    _add_common(p)

    p = sub.add_parser("matcher", help="train + calibrate the embedding matcher")
    p.add_argument("--data", required=True)
    p.add_argument("--far", type=float, default=0.001, help="false-accept rate")
    p.add_argument("--matcher-steps", type=int, default=600)
    _add_common(p)

    p = sub.add_parser("demorph", help="restore the second contributor's face")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--aux", required=True, help="live image of the known contributor")
    p.add_argument("--morphed", required=True, help="morphed image")
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate restoration accuracy")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--matcher", required=True, help="matcher checkpoint")
    _add_common(p)
    return ap


def cmd_morph(args):
    img1 = load_image(args.image1)
    img2 = load_image(args.image2)
    h, w = img1.shape[:2]
    k1 = morph_landmarks_from_68(load_landmarks(args.landmarks1), w, h)
    k2 = morph_landmarks_from_68(load_landmarks(args.landmarks2), w, h)
    out = morph(img1, k1, img2, k2, MorphParams(alpha=args.alpha, beta=args.beta))
    save_image(args.out, out)
    print(f"wrote {args.out}")


def cmd_dataset(args):
    overrides = {"seed": args.seed}
    cfg = config_from_file(ds.DatasetConfig, args.config, overrides)
    manifest = ds.build_corpus(cfg, args.out)
    n = {s: len(v["triplets"]) for s, v in manifest["splits"].items()}
    print(f"wrote corpus to {args.out}: {cfg.identities} identities, triplets {n}")


def cmd_train(args):
    overrides = {"seed": args.seed, "steps": args.steps}
    cfg = config_from_file(tr.TrainConfig, args.config, overrides)
    manifest = ds.load_manifest(args.data)
    if manifest["image_size"] != cfg.image_size:
        raise ConfigurationError(
            f"dataset is {manifest['image_size']}px but train config wants {cfg.image_size}px"
        )
    triplets = ds.load_split_triplets(args.data, manifest, "train")
    os.makedirs(args.out, exist_ok=True)
    log_path = os.path.join(args.out, "loss_log.txt")
    result = tr.train(cfg, triplets, out_dir=args.out, log_path=log_path)
    print(f"trained {cfg.steps} steps; checkpoint at {result.checkpoint_path}")


def cmd_matcher(args):
    manifest = ds.load_manifest(args.data)
    seed = 0 if args.seed is None else args.seed
    net_cfg = nets.NetConfig(image_size=manifest["image_size"], width_divisor=4)
    by_id = ds.load_identity_images(args.data, manifest, "train")
    names = sorted(by_id)
    images, labels = [], []
    for li, name in enumerate(names):
        for img in by_id[name]:
            images.append(img)
            labels.append(li)
    matcher = ev.train_matcher(
        np.stack(images), np.array(labels), len(names), net_cfg,
        seed=seed, steps=args.matcher_steps,
    )
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(4,)))
    scores = impostor_scores(matcher, by_id, rng, need=max(1000, int(np.ceil(1 / args.far))))
    matcher.threshold = ev.calibrate_threshold(scores, args.far)
    matcher.save(args.out)
    print(f"matcher saved to {args.out}; threshold {matcher.threshold:.6f} at far={args.far}")


def impostor_scores(matcher, images_by_id, rng, need=1000):
    """Cosine scores of randomly drawn cross-identity image pairs."""
    names = sorted(images_by_id)
    embeds = {n: [matcher.embed(img) for img in images_by_id[n]] for n in names}
    pairs = [
        (a, i, b, j)
        for ai, a in enumerate(names)
        for b in names[ai + 1 :]
        for i in range(len(embeds[a]))
        for j in range(len(embeds[b]))
    ]
    if len(pairs) > need:
        idx = rng.choice(len(pairs), size=need, replace=False)
        pairs = [pairs[k] for k in idx]
    return [ev.cosine_similarity(embeds[a][i], embeds[b][j]) for a, i, b, j in pairs]


def cmd_demorph(args):
    net_cfg, params, state = tr.load_generator(args.checkpoint)
    aux = load_image(args.aux)
    morphed = load_image(args.morphed)
    restored = ev.restore_faces(params, state, net_cfg, aux[None], morphed[None])[0]
    save_image(args.out, restored)
    print(f"wrote {args.out}")


def cmd_eval(args):
    net_cfg, params, state = tr.load_generator(args.checkpoint)
    manifest = ds.load_manifest(args.data)
    triplets = ds.load_split_triplets(args.data, manifest, args.split)
    matcher = ev.EmbeddingMatcher.load(args.matcher)
    report = ev.evaluate(triplets, params, state, net_cfg, matcher)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    print(
        f"evaluated {report.total} restorations: accuracy {report.accuracy:.4f} "
        f"(N={report.successes}, threshold={report.threshold:.6f})"
    )


COMMANDS = {
    "morph": cmd_morph,
    "dataset": cmd_dataset,
    "train": cmd_train,
    "matcher": cmd_matcher,
    "demorph": cmd_demorph,
    "eval": cmd_eval,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except InsufficientDataError as e:
        print(f"error: insufficient data: {e}", file=sys.stderr)
        return 1
    except DemorphError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
