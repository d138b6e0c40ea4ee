# Folder: platter/tests/unit_core
# File:   test_model.py

import pytest
import torch

from pl_core.block_2_model.b2f1_networks import halvings
from pl_core.block_2_model.b2f2_init_params import b2f2_init_params, make_generator, one_hot, sample_latent
from pl_core.block_2_model.b2f3_forward import b2f3_discriminate, b2f3_encode, b2f3_generate
from pl_core.block_2_model.b2f4_checkpoint import b2f4_load_checkpoint, b2f4_save_checkpoint
from pl_core.errors import ConfigError, DataError

TINY = dict(latent_dim=8, feature_channels=8, base_channels=8, max_channels=16, latent_channels=4, class_channels=4)


def _params(size=32, k=None, seed=0):
    return b2f2_init_params(size, num_categories=k, seed=seed, **TINY)


def _images(n, size, seed=0, dtype=torch.float32):
    g = torch.Generator().manual_seed(seed)
    return torch.rand(n, 3, size, size, generator=g, dtype=dtype) * 2 - 1


def test_halvings_reach_feature_grid():
    assert [halvings(s) for s in (32, 64, 128, 256)] == [1, 2, 3, 4]
    assert halvings(96) == 3


@pytest.mark.parametrize("size", [32, 64, 128, 256])
def test_shape_contract(size):
    p = _params(size, k=3)
    x = _images(2, size)
    f = b2f3_encode(p, x)
    assert tuple(f.shape) == (2, 8, 16, 16)
    z = sample_latent(2, 8, make_generator(1))
    y = b2f3_generate(p, f, z, one_hot([0, 2], 3))
    assert tuple(y.shape) == (2, 3, size, size)
    assert float(y.min()) >= -1.0 and float(y.max()) <= 1.0
    d = b2f3_discriminate(p, y, one_hot([0, 2], 3))
    assert tuple(d.shape) == (2,)


def test_init_is_seeded_and_leaves_global_rng_alone():
    state = torch.get_rng_state()
    a, b, c = _params(seed=4), _params(seed=4), _params(seed=5)
    assert torch.equal(state, torch.get_rng_state())
    sa, sb, sc = a.snapshot(), b.snapshot(), c.snapshot()
    assert sa.keys() == sb.keys()
    assert all(torch.equal(sa[k], sb[k]) for k in sa)
    assert any(not torch.equal(sa[k], sc[k]) for k in sa if sa[k].is_floating_point())


def test_invalid_image_size_is_config_error():
    with pytest.raises(ConfigError):
        b2f2_init_params(48, **TINY)


def test_generate_is_deterministic_given_inputs():
    p = _params()
    x = _images(3, 32)
    z = sample_latent(3, 8, make_generator(9))
    with torch.no_grad():
        y1 = b2f3_generate(p, b2f3_encode(p, x), z)
        y2 = b2f3_generate(p, b2f3_encode(p, x), z)
    assert torch.equal(y1, y2)


def test_category_rules():
    plain = _params()
    cond = _params(k=2)
    f = b2f3_encode(plain, _images(1, 32))
    z = sample_latent(1, 8, make_generator(0))
    with pytest.raises(ConfigError):
        b2f3_generate(plain, f, z, one_hot([1], 2))
    with pytest.raises(ConfigError):
        b2f3_generate(cond, b2f3_encode(cond, _images(1, 32)), z, None)
    with pytest.raises(ConfigError):
        one_hot([2], 2)


def test_wrong_image_shape_is_data_error():
    p = _params()
    with pytest.raises(DataError):
        b2f3_encode(p, _images(1, 64))


def test_discriminate_without_stats_update_is_pure():
    p = _params(k=2)
    x = _images(2, 32)
    before = p.snapshot("discriminator")
    d1 = b2f3_discriminate(p, x, one_hot([0, 1], 2))
    d2 = b2f3_discriminate(p, x, one_hot([0, 1], 2))
    after = p.snapshot("discriminator")
    assert torch.equal(d1, d2)
    assert all(torch.equal(before[k], after[k]) for k in before)


def test_discriminator_input_gradient_matches_finite_differences():
    p = _params(seed=2).to(dtype=torch.float64)
    x = _images(1, 32, seed=3, dtype=torch.float64).requires_grad_(True)
    (grad,) = torch.autograd.grad(b2f3_discriminate(p, x).sum(), x)

    eps = 1e-6
    with torch.no_grad():
        for idx in [(0, 0, 5, 7), (0, 1, 16, 16), (0, 2, 30, 2)]:
            bump = torch.zeros_like(x)
            bump[idx] = eps
            fd = (b2f3_discriminate(p, x + bump) - b2f3_discriminate(p, x - bump)) / (2 * eps)
            assert float(grad[idx]) == pytest.approx(float(fd), rel=1e-4, abs=1e-6)


def test_checkpoint_round_trip(tmp_path):
    p = _params(k=2, seed=6)
    p.ensure_optimizers(1e-4, (0.0, 0.99))
    path = b2f4_save_checkpoint(tmp_path / "ck.pt", p, epoch=3, rng_state={"zc": make_generator(1).get_state()}, extra={"next_step": 12})

    loaded = b2f4_load_checkpoint(path, expected_config=p.config)
    q = loaded["params"]
    assert loaded["epoch"] == 3
    assert loaded["extra"]["next_step"] == 12
    assert q.opt_d is not None and q.opt_eg is not None
    sp, sq = p.snapshot(), q.snapshot()
    assert all(torch.equal(sp[k], sq[k]) for k in sp)

    x = _images(2, 32)
    z = sample_latent(2, 8, make_generator(0))
    with torch.no_grad():
        assert torch.equal(
            b2f3_generate(p, b2f3_encode(p, x), z, one_hot([1, 0], 2)),
            b2f3_generate(q, b2f3_encode(q, x), z, one_hot([1, 0], 2)),
        )


def test_checkpoint_rejects_mismatches(tmp_path):
    p = _params(seed=1)
    path = b2f4_save_checkpoint(tmp_path / "ck.pt", p, epoch=0)

    with pytest.raises(ConfigError):
        b2f4_load_checkpoint(path, expected_config=_params(k=2).config)

    blob = torch.load(path, weights_only=True)
    blob["config_hash"] = "0" * 40
    torch.save(blob, tmp_path / "bad.pt")
    with pytest.raises(DataError):
        b2f4_load_checkpoint(tmp_path / "bad.pt")

    with pytest.raises(DataError):
        b2f4_load_checkpoint(tmp_path / "missing.pt")


def _parameter_fd(module, loss_fn, n, seed, eps=1e-6):
    """Analytic vs central-difference derivatives at n seeded parameter coordinates."""
    params = [q for q in module.parameters() if q.requires_grad]
    grads = torch.autograd.grad(loss_fn(), params, allow_unused=True)
    g = torch.Generator().manual_seed(seed)
    pairs = []
    for _ in range(n):
        j = int(torch.randint(len(params), (1,), generator=g))
        i = int(torch.randint(params[j].numel(), (1,), generator=g))
        flat = params[j].data.view(-1)
        keep = float(flat[i])
        with torch.no_grad():
            flat[i] = keep + eps
            up = float(loss_fn())
            flat[i] = keep - eps
            down = float(loss_fn())
            flat[i] = keep
        analytic = 0.0 if grads[j] is None else float(grads[j].reshape(-1)[i])
        pairs.append((analytic, (up - down) / (2 * eps)))
    return pairs


def test_encoder_parameter_gradient_matches_finite_differences():
    p = _params(seed=7).to(dtype=torch.float64)
    x = _images(2, 32, seed=8, dtype=torch.float64)
    weights = torch.randn(2, 8, 16, 16, dtype=torch.float64, generator=torch.Generator().manual_seed(9))

    def loss():
        return (b2f3_encode(p, x) * weights).sum()

    for analytic, fd in _parameter_fd(p.encoder, loss, n=5, seed=10):
        assert analytic == pytest.approx(fd, rel=1e-4, abs=1e-6)


def test_encoder_on_blank_image_is_finite_with_finite_gradient():
    p = _params(seed=7).to(dtype=torch.float64)
    x = torch.zeros(1, 3, 32, 32, dtype=torch.float64, requires_grad=True)
    f = b2f3_encode(p, x)
    assert bool(torch.isfinite(f).all())
    grads = torch.autograd.grad(f.pow(2).sum(), [x, *p.encoder.parameters()], allow_unused=True)
    assert all(g is None or bool(torch.isfinite(g).all()) for g in grads)


def test_generator_gradient_matches_finite_differences():
    p = _params(seed=11).to(dtype=torch.float64)
    g = torch.Generator().manual_seed(12)
    f = torch.randn(1, 8, 16, 16, dtype=torch.float64, generator=g).requires_grad_(True)
    z = torch.randn(1, 8, dtype=torch.float64, generator=g).requires_grad_(True)
    weights = torch.randn(1, 3, 32, 32, dtype=torch.float64, generator=g)

    def loss(ff=f, zz=z):
        return (b2f3_generate(p, ff, zz) * weights).sum()

    g_f, g_z = torch.autograd.grad(loss(), (f, z))
    eps = 1e-6
    with torch.no_grad():
        for i in (0, 3, 7):
            bump = torch.zeros_like(z)
            bump[0, i] = eps
            fd = (loss(zz=z + bump) - loss(zz=z - bump)) / (2 * eps)
            assert float(g_z[0, i]) == pytest.approx(float(fd), rel=1e-4, abs=1e-6)
        for idx in [(0, 0, 0, 0), (0, 4, 8, 9), (0, 7, 15, 3)]:
            bump = torch.zeros_like(f)
            bump[idx] = eps
            fd = (loss(ff=f + bump) - loss(ff=f - bump)) / (2 * eps)
            assert float(g_f[idx]) == pytest.approx(float(fd), rel=1e-4, abs=1e-6)

    for analytic, fd in _parameter_fd(p.generator, loss, n=5, seed=13):
        assert analytic == pytest.approx(fd, rel=1e-4, abs=1e-6)


def test_different_latents_give_different_images():
    p = _params(seed=14)
    f = b2f3_encode(p, _images(1, 32, seed=15))
    with torch.no_grad():
        a = b2f3_generate(p, f, sample_latent(1, 8, make_generator(1)))
        b = b2f3_generate(p, f, sample_latent(1, 8, make_generator(2)))
    assert float((a - b).abs().mean()) > 0.0
