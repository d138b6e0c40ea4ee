# Folder: platter/tests/unit_core
# File:   test_trainer.py

import math

import pytest
import torch
from pydantic import ValidationError

from pl_core.block_1_data.b1f0_dataset import ImageDataset
from pl_core.block_1_data.b1f3_synthesize_dataset import SynthSpec, b1f3_synthesize_dataset
from pl_core.block_2_model.b2f2_init_params import b2f2_init_params, make_generator, sample_latent
from pl_core.block_2_model.b2f3_forward import b2f3_discriminate, b2f3_encode, b2f3_generate, images_to_tensor
from pl_core.block_3_objective.b3f0_loss_config import LossConfig
from pl_core.block_3_objective.b3f1_adversarial import b3f1_d_adv_loss
from pl_core.block_3_objective.b3f2_reconstruction import b3f2_recon_loss
from pl_core.block_3_objective.b3f3_r1_penalty import b3f3_r1_from_logits
from pl_core.block_4_trainer.b4f0_train_config import TrainConfig
from pl_core.block_4_trainer.b4f1_schedule import b4f1_lr_at
from pl_core.block_4_trainer.b4f2_stage_d import AbortGuard, b4f2_train_step_d
from pl_core.block_4_trainer.b4f3_stage_eg import b4f3_train_step_eg
from pl_core.block_4_trainer.b4f4_train_log import TrainLog
from pl_core.block_4_trainer.b4f5_train_loop import CHECKPOINT_DIR, TRAIN_LOG_NAME, b4f5_train
from pl_core.errors import ConfigError, NumericError

TINY = dict(latent_dim=8, feature_channels=8, base_channels=8, max_channels=16)


def _sets(n=16, k=2):
    res = b1f3_synthesize_dataset(SynthSpec(num_images=n, num_categories=k, image_size=32, seed=3))
    return res["shape_set"], res["texture_set"]


def _config(**kw):
    base = dict(epochs_total=2, phase1_epochs=1, batch_size=4, checkpoint_every=1, seed=11, **TINY)
    base.update(kw)
    return TrainConfig(**base)


def _step_inputs(cfg, shape_set, texture_set, n=4):
    p = b2f2_init_params(32, latent_dim=8, seed=cfg.seed, feature_channels=8, base_channels=8, max_channels=16)
    p.ensure_optimizers(cfg.lr_phase1, cfg.betas)
    shape_t = images_to_tensor(shape_set.images(range(n)), p)
    tex_t = images_to_tensor(texture_set.images(range(n)), p)
    z = sample_latent(n, 8, make_generator(0))
    return p, shape_t, tex_t, z


def _params_equal(a, b):
    return a.keys() == b.keys() and all(torch.equal(a[k], b[k]) for k in a)


# ---- config and schedule ----

def test_defaults():
    cfg = TrainConfig()
    assert cfg.loss.lambda_recon == 50.0
    assert cfg.batch_size == 64
    assert (cfg.phase1_epochs, cfg.epochs_total - cfg.phase1_epochs) == (100, 150)
    assert (cfg.lr_phase1, cfg.lr_phase2) == (1e-4, 1e-5)
    assert cfg.g_ema_decay is None


def test_generator_ema_cannot_be_enabled():
    with pytest.raises(ValidationError):
        TrainConfig(g_ema_decay=0.999)


def test_lr_schedule_steps_once():
    cfg = TrainConfig()
    assert [b4f1_lr_at(cfg, e) for e in (0, 99, 100, 249)] == [1e-4, 1e-4, 1e-5, 1e-5]
    with pytest.raises(ConfigError):
        b4f1_lr_at(cfg, 250)


def test_truncated_keeps_schedule_shape():
    cfg = TrainConfig().truncated(3)
    assert (cfg.epochs_total, cfg.phase1_epochs) == (3, 3)


# ---- stages ----

def test_d_step_leaves_encoder_and_generator_alone():
    cfg = _config()
    shape_set, texture_set = _sets()
    p, shape_t, tex_t, z = _step_inputs(cfg, shape_set, texture_set)
    eg_before = {**p.snapshot("encoder"), **p.snapshot("generator")}
    d_before = p.snapshot("discriminator", buffers=False)

    p, m = b4f2_train_step_d(p, shape_t, tex_t, z, None, cfg)
    assert m["status"] == "OK" and m["stage"] == "d"
    assert math.isfinite(m["d_loss"]) and m["r1"] >= 0.0
    assert _params_equal(eg_before, {**p.snapshot("encoder"), **p.snapshot("generator")})
    assert not _params_equal(d_before, p.snapshot("discriminator", buffers=False))


def test_eg_step_leaves_discriminator_alone():
    cfg = _config()
    shape_set, texture_set = _sets()
    p, shape_t, _, z = _step_inputs(cfg, shape_set, texture_set)
    d_before = p.snapshot("discriminator")
    eg_before = {**p.snapshot("encoder"), **p.snapshot("generator")}

    p, m = b4f3_train_step_eg(p, shape_t, z, None, cfg)
    assert m["status"] == "OK" and m["stage"] == "eg"
    assert m["recon"] >= 0.0
    assert m["eg_total"] == pytest.approx(m["g_adv"] + 50.0 * m["recon"], rel=1e-5)
    assert _params_equal(d_before, p.snapshot("discriminator"))
    assert not _params_equal(eg_before, {**p.snapshot("encoder"), **p.snapshot("generator")})
    assert all(q.requires_grad for q in p.discriminator.parameters())


def test_zero_learning_rate_freezes_discriminator():
    cfg = _config()
    shape_set, texture_set = _sets()
    p, shape_t, tex_t, z = _step_inputs(cfg, shape_set, texture_set)
    p.set_lr(0.0)
    before = p.snapshot("discriminator", buffers=False)
    p, m = b4f2_train_step_d(p, shape_t, tex_t, z, None, cfg)
    assert m["status"] == "OK"
    assert _params_equal(before, p.snapshot("discriminator", buffers=False))


def _d_objective(p, shape_t, tex_t, z, gamma):
    with torch.no_grad():
        fake = b2f3_generate(p, b2f3_encode(p, shape_t), z)
    x = tex_t.detach().requires_grad_(True)
    real = b2f3_discriminate(p, x)
    return float(b3f1_d_adv_loss(real, b2f3_discriminate(p, fake)) + b3f3_r1_from_logits(real, x, gamma))


def test_d_step_descends_its_own_objective():
    cfg = _config()
    shape_set, texture_set = _sets()
    after = {}
    # the lr=0 twin sees the same spectral-norm updates, so only the Adam step differs
    for lr in (0.0, 1e-5):
        p, shape_t, tex_t, z = _step_inputs(cfg, shape_set, texture_set)
        p.set_lr(lr)
        p, m = b4f2_train_step_d(p, shape_t, tex_t, z, None, cfg)
        assert m["status"] == "OK"
        after[lr] = _d_objective(p, shape_t, tex_t, z, cfg.loss.gamma_r1)
    assert after[1e-5] < after[0.0]


def _recon(p, shape_t, z):
    with torch.no_grad():
        f = b2f3_encode(p, shape_t)
        return float(b3f2_recon_loss(f, b2f3_encode(p, b2f3_generate(p, f, z))))


def test_eg_step_without_adversarial_term_reduces_recon():
    cfg = _config(loss=LossConfig(adv_weight=0.0))
    shape_set, texture_set = _sets()
    p, shape_t, _, z = _step_inputs(cfg, shape_set, texture_set)
    p.set_lr(1e-5)
    before = _recon(p, shape_t, z)
    p, m = b4f3_train_step_eg(p, shape_t, z, None, cfg)
    assert m["status"] == "OK"
    assert m["recon"] == pytest.approx(before, rel=1e-5)
    assert m["eg_total"] == pytest.approx(50.0 * m["recon"], rel=1e-6)
    assert _recon(p, shape_t, z) < before


def test_non_finite_batch_aborts_step():
    cfg = _config()
    shape_set, texture_set = _sets()
    p, shape_t, tex_t, z = _step_inputs(cfg, shape_set, texture_set)
    before = p.snapshot("discriminator", buffers=False)
    guard = AbortGuard()
    p, m = b4f2_train_step_d(p, shape_t, torch.full_like(tex_t, float("nan")), z, None, cfg, guard=guard)
    assert m["status"] == "ABORT"
    assert guard.consecutive == 1
    assert _params_equal(before, p.snapshot("discriminator", buffers=False))


def test_abort_guard_raises_on_third_in_a_row():
    guard = AbortGuard()
    guard.abort("d", "nan")
    guard.ok()
    guard.abort("d", "nan")
    guard.abort("eg", "nan")
    with pytest.raises(NumericError):
        guard.abort("d", "nan")


# ---- log ----

def test_train_log_is_ordered_and_mirrored(tmp_path):
    log = TrainLog(tmp_path / "log.csv")
    log.append({"epoch": 0, "step": 0, "stage": "d", "status": "OK", "d_loss": 1.0, "r1": 0.1, "lr": 1e-4})
    log.append({"epoch": 0, "step": 1, "stage": "eg", "status": "OK", "g_adv": 0.7, "recon": 0.2, "lr": 1e-4})
    with pytest.raises(ValueError):
        log.append({"epoch": 0, "step": 1, "stage": "d", "status": "OK"})
    assert len((tmp_path / "log.csv").read_text().strip().splitlines()) == 3
    assert log.epoch_mean("recon", 0) == pytest.approx(0.2)
    assert math.isnan(log.epoch_mean("recon", 1))
    assert {r["name"] for r in log.telemetry()} == {"train.d_loss", "train.r1", "train.lr", "train.g_adv", "train.recon"}


# ---- loop ----

def test_two_epoch_run_logs_every_stage(tmp_path):
    shape_set, texture_set = _sets()
    res = b4f5_train(shape_set, texture_set, _config(), output_dir=tmp_path)
    assert res["status"] == "OK"
    log = res["log"]
    assert len(log) == 2 * math.ceil(shape_set.size / 4) * 2
    assert [r["stage"] for r in log.records[:2]] == ["d", "eg"]
    assert [r["step"] for r in log.records] == list(range(len(log)))
    assert {r["lr"] for r in log.records if r["epoch"] == 1} == {1e-5}
    assert (tmp_path / TRAIN_LOG_NAME).is_file()
    assert sorted(p.name for p in (tmp_path / CHECKPOINT_DIR).iterdir()) == ["ckpt_epoch0000.pt", "ckpt_epoch0001.pt"]
    assert res["params"].all_finite()
    assert res["diag"]["epochs_run"] == 2
    assert math.isfinite(res["diag"]["final_recon"])


def test_same_seed_same_metrics():
    shape_set, texture_set = _sets()
    a = b4f5_train(shape_set, texture_set, _config(epochs_total=1))
    b = b4f5_train(shape_set, texture_set, _config(epochs_total=1))
    assert a["log"].metric_sequence() == b["log"].metric_sequence()


def test_resume_matches_uninterrupted_run(tmp_path):
    shape_set, texture_set = _sets()
    cfg = _config(conditional=True)
    full = b4f5_train(shape_set, texture_set, cfg, output_dir=tmp_path / "full")
    resumed = b4f5_train(
        shape_set, texture_set, cfg,
        output_dir=tmp_path / "resumed",
        resume_from=tmp_path / "full" / CHECKPOINT_DIR / "ckpt_epoch0000.pt",
    )
    assert resumed["diag"]["epochs_run"] == 1

    tail = [r for r in full["log"].records if r["epoch"] == 1]
    assert [(r["step"], r["stage"]) for r in tail] == [(r["step"], r["stage"]) for r in resumed["log"].records]
    for a, b in zip(tail, resumed["log"].records):
        for key in ("d_loss", "g_adv", "recon", "r1"):
            if a[key] is None:
                assert b[key] is None
            else:
                assert b[key] == pytest.approx(a[key], rel=1e-5, abs=1e-7)

    sa, sb = full["params"].snapshot(), resumed["params"].snapshot()
    assert sa.keys() == sb.keys()
    for k in sa:
        assert torch.allclose(sa[k].double(), sb[k].double(), rtol=1e-5, atol=1e-6), k


def test_conditional_needs_labelled_textures():
    shape_set, texture_set = _sets()
    unlabelled = ImageDataset(items=tuple(it.model_copy(update={"category": None}) for it in texture_set.items))
    with pytest.raises(ConfigError) as err:
        b4f5_train(shape_set, unlabelled, _config(conditional=True))
    assert any("labels" in p for p in err.value.problems)


def test_mismatched_image_sizes_fail_preflight():
    shape_set, _ = _sets()
    res = b1f3_synthesize_dataset(SynthSpec(num_images=8, num_categories=2, image_size=64, seed=3))
    with pytest.raises(ConfigError):
        b4f5_train(shape_set, res["texture_set"], _config())


def test_epoch_hook_sees_each_epoch():
    shape_set, texture_set = _sets()
    seen = []
    b4f5_train(shape_set, texture_set, _config(), on_epoch_end=lambda e, p, log: seen.append((e, len(log))))
    assert seen == [(0, 4), (1, 8)]
