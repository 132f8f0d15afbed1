"""Corpus assembly: synthetic identities, aligned renders, morph triplets.

The corpus layout on disk:

    <root>/images/<identity>/v<k>.png        aligned face renders
    <root>/images/<identity>/v<k>.json       aligned 68-point landmarks
    <root>/morphs/<triplet base>.png         morphed faces
    <root>/manifest.json                     index of everything

Identities are split disjointly into train/dev/test with the 28/7/28
ratio. Each morph is generated from the two aligned templates with a
pixel fusion factor drawn from {0.1, ..., 0.9} and location factor 0.5,
and is recorded twice, once per contributor ordering (criminal,
accomplice).
"""

import json
import os
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigurationError
from .image_io import load_image, save_image
from .landmarks import (
    five_point_subset,
    load_landmarks,
    morph_landmarks_from_68,
    save_landmarks,
)
from .synthfaces import make_identity, render_synthetic_face
from .warping import MorphParams, align_face, apply_affine, morph

MANIFEST_VERSION = 1
SPLIT_RATIO = {"train": 28, "dev": 7, "test": 28}
ALPHA_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
RENDER_SIZE = 128


@dataclass
class DatasetConfig:
    identities: int = 40
    variations: int = 6
    image_size: int = 64
    train_pairs: int = 100
    dev_pairs: int = 10
    test_pairs: int = 40
    beta: float = 0.5
    aux_mode: str = "template"  # or "varied": aux drawn from non-template renders
    seed: int = 0

    def __post_init__(self):
        if self.identities < 3:
            raise ConfigurationError(f"need at least 3 identities, got {self.identities}")
        if self.variations < 2:
            raise ConfigurationError("need at least 2 variations per identity")
        if self.aux_mode not in ("template", "varied"):
            raise ConfigurationError(f"aux_mode must be template|varied, got {self.aux_mode}")

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown dataset config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Triplet:
    """One training/evaluation record: live criminal capture, accomplice
    ground truth, and the morph both contributed to."""

    triplet_id: str
    criminal_id: str
    accomplice_id: str
    alpha: float
    beta: float
    criminal_image: np.ndarray
    accomplice_image: np.ndarray
    morph_image: np.ndarray


def split_identities(n, ratio=SPLIT_RATIO):
    """Deterministic identity-disjoint split by the configured ratio."""
    total = sum(ratio.values())
    n_train = max(1, round(n * ratio["train"] / total))
    n_dev = max(1, round(n * ratio["dev"] / total))
    n_test = n - n_train - n_dev
    if n_test < 1:
        raise ConfigurationError(f"too few identities ({n}) for a 3-way split")
    idx = list(range(n))
    return {
        "train": idx[:n_train],
        "dev": idx[n_train : n_train + n_dev],
        "test": idx[n_train + n_dev :],
    }


def _identity_name(i):
    return f"id{i:04d}"


def build_corpus(cfg, out_dir):
    """Render, align and morph a full synthetic corpus; returns the manifest."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(3,)))
    os.makedirs(out_dir, exist_ok=True)

    manifest = {
        "version": MANIFEST_VERSION,
        "config": cfg.to_dict(),
        "image_size": cfg.image_size,
        "identities": {},
        "splits": {},
    }

    aligned = {}
    for i in range(cfg.identities):
        name = _identity_name(i)
        identity = make_identity(cfg.seed, i)
        img_dir = os.path.join(out_dir, "images", name)
        os.makedirs(img_dir, exist_ok=True)
        entry = {"variations": []}
        aligned[name] = []
        for v in range(cfg.variations):
            img, lms = render_synthetic_face(identity, v, RENDER_SIZE)
            out, m = align_face(img, five_point_subset(lms), cfg.image_size)
            lms_out = apply_affine(m, lms)
            img_path = os.path.join(img_dir, f"v{v}.png")
            lms_path = os.path.join(img_dir, f"v{v}.json")
            save_image(img_path, out)
            save_landmarks(lms_path, lms_out)
            entry["variations"].append(
                {
                    "image": os.path.relpath(img_path, out_dir),
                    "landmarks": os.path.relpath(lms_path, out_dir),
                }
            )
        manifest["identities"][name] = entry

    split_idx = split_identities(cfg.identities)
    morph_dir = os.path.join(out_dir, "morphs")
    os.makedirs(morph_dir, exist_ok=True)
    pairs_per_split = {"train": cfg.train_pairs, "dev": cfg.dev_pairs, "test": cfg.test_pairs}

    for split, members in split_idx.items():
        names = [_identity_name(i) for i in members]
        combos = [
            (a, b, alpha)
            for ai, a in enumerate(names)
            for b in names[ai + 1 :]
            for alpha in ALPHA_GRID
        ]
        want = min(pairs_per_split[split], len(combos))
        chosen = [combos[k] for k in rng.choice(len(combos), size=want, replace=False)]
        triplets = []
        for n_pair, (ida, idb, alpha) in enumerate(chosen):
            morph_img = _make_morph(out_dir, manifest, ida, idb, alpha, cfg)
            base = f"{split}_{n_pair:04d}_{ida}_{idb}"
            morph_path = os.path.join(morph_dir, base + ".png")
            save_image(morph_path, morph_img)
            rel = os.path.relpath(morph_path, out_dir)
            for crim, acc in ((ida, idb), (idb, ida)):
                triplets.append(
                    {
                        "id": f"{base}_{crim}",
                        "criminal": crim,
                        "accomplice": acc,
                        "alpha": alpha,
                        "beta": cfg.beta,
                        "morph": rel,
                        "aux_variation": _aux_variation(cfg, rng),
                    }
                )
        manifest["splits"][split] = {"identities": names, "triplets": triplets}

    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return manifest


def _aux_variation(cfg, rng):
    if cfg.aux_mode == "template":
        return 0
    return int(rng.integers(1, cfg.variations))


def _make_morph(root, manifest, ida, idb, alpha, cfg):
    img_a, lms_a = _load_identity_template(root, manifest, ida)
    img_b, lms_b = _load_identity_template(root, manifest, idb)
    ka = morph_landmarks_from_68(lms_a, cfg.image_size, cfg.image_size)
    kb = morph_landmarks_from_68(lms_b, cfg.image_size, cfg.image_size)
    return morph(img_a, ka, img_b, kb, MorphParams(alpha=alpha, beta=cfg.beta))


def _load_identity_template(root, manifest, name):
    entry = manifest["identities"][name]["variations"][0]
    img = load_image(os.path.join(root, entry["image"]))
    lms = load_landmarks(os.path.join(root, entry["landmarks"]))
    return img, lms


def load_manifest(root):
    with open(os.path.join(root, "manifest.json"), encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("version") != MANIFEST_VERSION:
        raise ConfigurationError(f"unsupported manifest version in {root}")
    return manifest


def load_split_triplets(root, manifest, split):
    """Materialize a split's triplets as in-memory arrays."""
    if split not in manifest["splits"]:
        raise ConfigurationError(f"no such split: {split}")
    out = []
    cache = {}

    def img_of(name, variation):
        key = (name, variation)
        if key not in cache:
            entry = manifest["identities"][name]["variations"][variation]
            cache[key] = load_image(os.path.join(root, entry["image"]))
        return cache[key]

    for rec in manifest["splits"][split]["triplets"]:
        out.append(
            Triplet(
                triplet_id=rec["id"],
                criminal_id=rec["criminal"],
                accomplice_id=rec["accomplice"],
                alpha=rec["alpha"],
                beta=rec["beta"],
                criminal_image=img_of(rec["criminal"], rec["aux_variation"]),
                accomplice_image=img_of(rec["accomplice"], 0),
                morph_image=load_image(os.path.join(root, rec["morph"])),
            )
        )
    return out


def load_identity_images(root, manifest, split, include_template=True):
    """Bona fide images per identity for matcher training/calibration."""
    names = manifest["splits"][split]["identities"]
    out = {}
    for name in names:
        imgs = []
        for v, entry in enumerate(manifest["identities"][name]["variations"]):
            if not include_template and v == 0:
                continue
            imgs.append(load_image(os.path.join(root, entry["image"])))
        out[name] = imgs
    return out
