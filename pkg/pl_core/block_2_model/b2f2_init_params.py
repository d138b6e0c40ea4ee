# Folder: platter/pl_core/block_2_model
# File:   b2f2_init_params.py

from __future__ import annotations

import logging
from typing import Any, Dict, Iterator, Optional, Tuple

import torch
from pydantic import ValidationError

from pl_core.block_2_model.b2f1_networks import Discriminator, Encoder, Generator, ModelConfig
from pl_core.errors import ConfigError

__all__ = [
    "ModelParams",
    "b2f2_init_params",
    "one_hot",
    "sample_latent",
    "sample_categories",
    "make_generator",
    "build_from_config",
]

log = logging.getLogger(__name__)

NETWORKS = ("encoder", "generator", "discriminator")


class ModelParams:
    """Parameter sets of E, G and D with their config echo and (once training starts) optimizer state."""

    def __init__(self, config: ModelConfig, encoder: Encoder, generator: Generator, discriminator: Discriminator):
        self.config = config
        self.encoder = encoder
        self.generator = generator
        self.discriminator = discriminator
        self.opt_d: Optional[torch.optim.Adam] = None
        self.opt_eg: Optional[torch.optim.Adam] = None

    # ---- optimizers ----

    def ensure_optimizers(self, lr: float, betas: Tuple[float, float]) -> None:
        if self.opt_d is None:
            self.opt_d = torch.optim.Adam(self.discriminator.parameters(), lr=lr, betas=betas)
        if self.opt_eg is None:
            eg = list(self.encoder.parameters()) + list(self.generator.parameters())
            self.opt_eg = torch.optim.Adam(eg, lr=lr, betas=betas)

    def set_lr(self, lr: float) -> None:
        for opt in (self.opt_d, self.opt_eg):
            if opt is None:
                continue
            for group in opt.param_groups:
                group["lr"] = lr

    # ---- views ----

    def networks(self) -> Dict[str, torch.nn.Module]:
        return {"encoder": self.encoder, "generator": self.generator, "discriminator": self.discriminator}

    def named_tensors(self, network: Optional[str] = None) -> Iterator[Tuple[str, torch.Tensor]]:
        """Every parameter and buffer, prefixed with its network name."""
        for name, net in self.networks().items():
            if network is not None and name != network:
                continue
            for key, t in net.state_dict().items():
                yield f"{name}.{key}", t

    def snapshot(self, network: Optional[str] = None, buffers: bool = True) -> Dict[str, torch.Tensor]:
        if buffers:
            return {k: t.detach().clone() for k, t in self.named_tensors(network)}
        return {
            f"{name}.{key}": p.detach().clone()
            for name, net in self.networks().items() if network is None or name == network
            for key, p in net.named_parameters()
        }

    @property
    def device(self) -> torch.device:
        return next(self.encoder.parameters()).device

    @property
    def dtype(self) -> torch.dtype:
        return next(self.encoder.parameters()).dtype

    def to(self, device: Any = None, dtype: Optional[torch.dtype] = None) -> "ModelParams":
        for net in self.networks().values():
            net.to(device=device, dtype=dtype)
        return self

    def eval(self) -> "ModelParams":
        for net in self.networks().values():
            net.eval()
        return self

    def all_finite(self) -> bool:
        return all(bool(torch.isfinite(t).all()) for _, t in self.named_tensors() if t.is_floating_point())


def b2f2_init_params(
    image_size: int,
    num_categories: Optional[int] = None,
    latent_dim: int = 128,
    seed: int = 0,
    **overrides: Any,
) -> ModelParams:
    """
    B2F2 — Model.InitParams
    Builds E, G, D for image_size (multiple of 32, >= 32). E and G use ceil(log2(image_size/16))
    halvings/doublings so the shape features stay 16×16. Weights come from a forked RNG seeded with
    `seed`; the global torch RNG is left untouched.
    """
    try:
        cfg = ModelConfig(image_size=image_size, num_categories=num_categories, latent_dim=latent_dim, **overrides)
    except ValidationError as e:
        raise ConfigError("invalid model config", [f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors()])
    return build_from_config(cfg, seed)


def build_from_config(cfg: ModelConfig, seed: int = 0) -> ModelParams:
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(seed))
        enc = Encoder(cfg)
        gen = Generator(cfg)
        disc = Discriminator(cfg)
    log.debug("init params: size=%d K=%s halvings=%d seed=%d", cfg.image_size, cfg.num_categories, enc.n_halvings, seed)
    return ModelParams(cfg, enc, gen, disc)


# ------------------------- stochastic inputs -------------------------

def make_generator(seed: int, device: Any = "cpu") -> torch.Generator:
    g = torch.Generator(device=device)
    g.manual_seed(int(seed))
    return g


def one_hot(labels: Any, num_categories: int, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    idx = torch.as_tensor(labels, dtype=torch.long).reshape(-1)
    if idx.numel() and (int(idx.min()) < 0 or int(idx.max()) >= num_categories):
        raise ConfigError(f"category id outside [0, {num_categories})")
    return torch.nn.functional.one_hot(idx, num_categories).to(dtype)


def sample_latent(n: int, latent_dim: int, generator: torch.Generator, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """z ~ N(0, I), drawn only from the explicit generator."""
    return torch.randn(n, latent_dim, generator=generator, dtype=dtype, device=generator.device)


def sample_categories(n: int, num_categories: int, generator: torch.Generator) -> torch.Tensor:
    return torch.randint(0, num_categories, (n,), generator=generator, device=generator.device)
