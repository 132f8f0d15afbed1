import numpy as np
import pytest

from demorph import autodiff as ad
from demorph import losses as ls
from demorph import networks as nets
from demorph import training as tr
from demorph.datasets import Triplet
from demorph.errors import ConfigurationError
from demorph.layers import ForwardContext

SIZE = 16
CFG = tr.TrainConfig(image_size=SIZE, width_divisor=16, batch_size=2, steps=3, seed=5)


def toy_triplets(n=6, size=SIZE, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        crim = rng.uniform(-0.9, 0.9, (size, size, 3))
        acc = rng.uniform(-0.9, 0.9, (size, size, 3))
        out.append(
            Triplet(
                triplet_id=f"t{i}",
                criminal_id=f"a{i}",
                accomplice_id=f"b{i}",
                alpha=0.5,
                beta=0.5,
                criminal_image=crim,
                accomplice_image=acc,
                morph_image=0.5 * (crim + acc),
            )
        )
    return out


def test_dual_forward_four_restorations():
    net_cfg = CFG.net_config()
    gp, gs, _, _ = tr.init_models(CFG)
    t = toy_triplets(2)
    crim = np.stack([x.criminal_image for x in t])
    acc = np.stack([x.accomplice_image for x in t])
    mor = np.stack([x.morph_image for x in t])
    ctx = ForwardContext(training=True)
    out = tr.dual_forward(gp, gs, crim, acc, mor, net_cfg, ctx, dual=True)
    assert len(out.restorations()) == 4
    assert out.dual
    for img in out.restorations():
        assert img.shape == (2, SIZE, SIZE, 3)
    for f in (out.feat_accomplice_1, out.feat_criminal_1, out.feat_accomplice_2, out.feat_criminal_2):
        assert f.shape[0] == 2


def test_dual_forward_no_sdn_two_restorations():
    net_cfg = CFG.net_config()
    gp, gs, _, _ = tr.init_models(CFG)
    t = toy_triplets(1)
    ctx = ForwardContext(training=True)
    out = tr.dual_forward(
        gp, gs, t[0].criminal_image[None], t[0].accomplice_image[None],
        t[0].morph_image[None], net_cfg, ctx, dual=False,
    )
    assert len(out.restorations()) == 2
    assert not out.dual
    assert out.feat_accomplice_2 is None
    assert ls.feature_loss(out).item() == 0.0


def test_dual_forward_inference_deterministic():
    net_cfg = CFG.net_config()
    gp, gs, _, _ = tr.init_models(CFG)
    t = toy_triplets(1)[0]
    args = (t.criminal_image[None], t.accomplice_image[None], t.morph_image[None])
    with ad.no_grad():
        a = tr.dual_forward(gp, gs, *args, net_cfg, ForwardContext(training=False))
        b = tr.dual_forward(gp, gs, *args, net_cfg, ForwardContext(training=False))
    assert np.array_equal(a.restored_accomplice_1.data, b.restored_accomplice_1.data)
    assert np.array_equal(a.restored_criminal_2.data, b.restored_criminal_2.data)


def test_dual_forward_swap_symmetry():
    # swapping the two contributor images swaps the roles of the stage-1
    # restorations
    net_cfg = CFG.net_config()
    gp, gs, _, _ = tr.init_models(CFG)
    t = toy_triplets(1)[0]
    crim, acc, mor = t.criminal_image[None], t.accomplice_image[None], t.morph_image[None]
    with ad.no_grad():
        fwd = tr.dual_forward(gp, gs, crim, acc, mor, net_cfg, ForwardContext(training=False))
        swp = tr.dual_forward(gp, gs, acc, crim, mor, net_cfg, ForwardContext(training=False))
    assert np.array_equal(fwd.restored_accomplice_1.data, swp.restored_criminal_1.data)
    assert np.array_equal(fwd.restored_criminal_1.data, swp.restored_accomplice_1.data)


def test_train_step_returns_consistent_metrics():
    gp, gs, dp, ds = tr.init_models(CFG)
    gen_opt = tr.Adam(gp, CFG.learning_rate, CFG.adam_beta1, CFG.adam_beta2)
    disc_opt = tr.Adam(dp, CFG.learning_rate, CFG.adam_beta1, CFG.adam_beta2)
    batch = toy_triplets(CFG.batch_size)
    m = tr.train_step(batch, gp, gs, dp, ds, gen_opt, disc_opt, CFG)
    w = CFG.weights
    expected = m["pix"] + w.beta1 * m["sym"] + w.lambda1 * m["feat"] + w.lambda2 * m["adv"]
    assert abs(m["gen"] - expected) < 1e-6
    assert m["pix_terms"] == 4 and m["sym_terms"] == 4
    assert all(np.isfinite(m[k]) for k in ls.LOSS_LOG_FIELDS)


def test_train_step_zero_lr_keeps_params():
    cfg = tr.TrainConfig(image_size=SIZE, width_divisor=16, batch_size=2, steps=1,
                         learning_rate=0.0, seed=5)
    gp, gs, dp, ds = tr.init_models(cfg)
    before_g = {k: v.data.copy() for k, v in gp.items()}
    before_d = {k: v.data.copy() for k, v in dp.items()}
    gen_opt = tr.Adam(gp, 0.0, cfg.adam_beta1, cfg.adam_beta2)
    disc_opt = tr.Adam(dp, 0.0, cfg.adam_beta1, cfg.adam_beta2)
    tr.train_step(toy_triplets(2), gp, gs, dp, ds, gen_opt, disc_opt, cfg)
    for k in gp:
        assert np.array_equal(gp[k].data, before_g[k]), k
    for k in dp:
        assert np.array_equal(dp[k].data, before_d[k]), k


def test_updates_do_not_cross_networks():
    gp, gs, dp, ds = tr.init_models(CFG)
    gen_opt = tr.Adam(gp, CFG.learning_rate, CFG.adam_beta1, CFG.adam_beta2)
    disc_opt = tr.Adam(dp, 0.0)  # freeze D: lr 0
    before_d = {k: v.data.copy() for k, v in dp.items()}
    tr.train_step(toy_triplets(2), gp, gs, dp, ds, gen_opt, disc_opt, CFG)
    # generator stepped, discriminator params bitwise unchanged
    for k in dp:
        assert np.array_equal(dp[k].data, before_d[k]), k


def test_gen_update_direction_matches_enabled_terms():
    # with no_pix, the generator gradient equals that of the remaining terms
    batch = toy_triplets(CFG.batch_size)
    grads = {}
    for flag in (False, True):
        cfg = tr.TrainConfig(image_size=SIZE, width_divisor=16, batch_size=2, steps=1,
                             seed=5, no_pix=flag)
        gp, gs, dp, ds = tr.init_models(cfg)
        net_cfg = cfg.net_config()
        crim = np.stack([t.criminal_image for t in batch])
        acc = np.stack([t.accomplice_image for t in batch])
        mor = np.stack([t.morph_image for t in batch])
        ctx = ForwardContext(training=True)
        out = tr.dual_forward(gp, gs, crim, acc, mor, net_cfg, ctx, dual=True)
        out.d_fake = nets.discriminate(dp, ds, ad.Tensor(acc), out.restored_accomplice_1,
                                       net_cfg, ForwardContext(training=True))
        w = cfg.weights
        terms = []
        if not flag:
            terms.append(ls.pixel_wise_loss(out, ad.Tensor(crim), ad.Tensor(acc)))
        terms.append(w.beta1 * ls.symmetry_loss(out))
        terms.append(w.lambda1 * ls.feature_loss(out))
        terms.append(w.lambda2 * ls.adversarial_gen_loss(out.d_fake))
        obj = terms[0]
        for t in terms[1:]:
            obj = obj + t
        tr.zero_grads(gp)
        obj.backward()
        grads[flag] = {k: (v.grad.copy() if v.grad is not None else None) for k, v in gp.items()}
    # sanity: removing the pixel term changes the gradient
    diff = sum(
        np.abs(grads[False][k] - grads[True][k]).sum()
        for k in grads[False]
        if grads[False][k] is not None and grads[True][k] is not None
    )
    assert diff > 0


def test_train_empty_dataset_rejected():
    with pytest.raises(ConfigurationError):
        tr.train(CFG, [])


def test_train_zero_steps_equals_init(tmp_path):
    cfg = tr.TrainConfig(image_size=SIZE, width_divisor=16, batch_size=2, steps=0, seed=5)
    result = tr.train(cfg, toy_triplets(4), out_dir=str(tmp_path))
    init_g, _, init_d, _ = tr.init_models(cfg)
    for k, v in result.gen_params.items():
        assert np.array_equal(v.data, init_g[k].data)
    config, tensors = nets.load_checkpoint(result.checkpoint_path)
    assert config["step"] == 0
    for k, v in result.gen_params.items():
        assert np.array_equal(tensors[f"gen.param.{k}"], v.data)


def test_train_reproducible_loss_logs(tmp_path):
    cfg = tr.TrainConfig(image_size=SIZE, width_divisor=16, batch_size=2, steps=4, seed=9)
    data = toy_triplets(5)
    log1 = tmp_path / "a.log"
    log2 = tmp_path / "b.log"
    tr.train(cfg, data, log_path=str(log1))
    tr.train(cfg, data, log_path=str(log2))
    assert log1.read_text() == log2.read_text()
    lines = log1.read_text().splitlines()
    assert len(lines) == 4
    first = ls.parse_loss_line(lines[0])
    assert first["step"] == 1


def test_train_different_seed_differs(tmp_path):
    data = toy_triplets(5)
    cfg_a = tr.TrainConfig(image_size=SIZE, width_divisor=16, batch_size=2, steps=2, seed=1)
    cfg_b = tr.TrainConfig(image_size=SIZE, width_divisor=16, batch_size=2, steps=2, seed=2)
    ra = tr.train(cfg_a, data)
    rb = tr.train(cfg_b, data)
    assert ra.metrics_log[0]["gen"] != rb.metrics_log[0]["gen"]


def test_ablation_flags_zero_logged_terms():
    data = toy_triplets(4)
    cfg = tr.TrainConfig(image_size=SIZE, width_divisor=16, batch_size=2, steps=1, seed=3,
                         no_sym=True, no_f=True)
    res = tr.train(cfg, data)
    m = res.metrics_log[0]
    assert m["sym"] == 0.0 and m["feat"] == 0.0
    assert abs(m["gen"] - (m["pix"] + m["adv"])) < 1e-9


def test_no_sdn_two_terms_and_zero_feature():
    data = toy_triplets(4)
    cfg = tr.TrainConfig(image_size=SIZE, width_divisor=16, batch_size=2, steps=1, seed=3,
                         no_sdn=True)
    res = tr.train(cfg, data)
    m = res.metrics_log[0]
    assert m["pix_terms"] == 2 and m["sym_terms"] == 2
    assert m["feat"] == 0.0


def test_checkpoint_roundtrip_through_loader(tmp_path):
    cfg = tr.TrainConfig(image_size=SIZE, width_divisor=16, batch_size=2, steps=1, seed=4,
                         checkpoint_interval=1)
    res = tr.train(cfg, toy_triplets(3), out_dir=str(tmp_path))
    net_cfg, params, state = tr.load_generator(res.checkpoint_path)
    assert net_cfg.image_size == SIZE
    for k, v in res.gen_params.items():
        assert np.array_equal(params[k].data, v.data)
    for k, v in res.gen_state.items():
        assert np.array_equal(state[k], v)
    assert (tmp_path / "checkpoint_000001.ckpt").exists()


def test_adam_known_first_step():
    # one Adam step with bias correction: delta = lr * g/ (|g| + eps)
    p = ad.Tensor(np.array([1.0, -2.0]), requires_grad=True)
    p.grad = np.array([0.5, -1.5])
    opt = tr.Adam({"p": None}, lr=0.1, beta1=0.5, beta2=0.999, eps=1e-8)
    opt.m = {"p": None}
    opt.v = {"p": None}
    opt.step({"p": p})
    expected = np.array([1.0, -2.0]) - 0.1 * np.array([0.5, -1.5]) / (np.array([0.5, 1.5]) + 1e-8)
    assert np.allclose(p.data, expected, atol=1e-9)
