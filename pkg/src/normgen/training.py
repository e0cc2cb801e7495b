"""Adversarial training loop: alternating clipped critic steps and
generator steps, both under RMSProp.

Each iteration runs critic_steps_per_gen critic updates (every one followed
by weight clipping) and one generator update. Per-iteration loss components
are appended to <run_dir>/losses.csv with header iter,critic,adv,l1,mask.
Checkpoints land at <run_dir>/ckpt_<iter> and carry enough state (models,
optimizers, RNG streams, history) for a bitwise-identical resume when
noise_mode is off.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .codec import encode_normals
from .dataset import DatasetManifest, load_batch
from .errors import ConfigurationError, DatasetError, NonFiniteLossError
from .losses import critic_loss, generator_loss
from .models import Discriminator, Generator, UNetConfig, clip_weights

LOSS_CSV_HEADER = ("iter", "critic", "adv", "l1", "mask")

GENERATOR_IN_CHANNELS = 4  # sketch x3 + hint mask
CRITIC_IN_CHANNELS = 7  # generator condition + normal map


@dataclass
class TrainConfig:
    lambda_l1: float = 100.0
    lambda_mask: float = 100.0
    learning_rate: float = 5e-5
    clip_c: float = 0.01
    critic_steps_per_gen: int = 5
    batch_size: int = 2
    max_iterations: int = 2000
    seed: int = 0
    noise_mode: str = "off"  # "off" | "dropout"
    composite_scope: str = "critic_only"  # "critic_only" | "everywhere"
    checkpoint_interval: int = 500
    augment: bool = False
    rmsprop_alpha: float = 0.99
    rmsprop_eps: float = 1e-8

    def validate(self) -> None:
        if min(self.lambda_l1, self.lambda_mask, self.learning_rate) < 0:
            raise ConfigurationError("rates and lambdas must be >= 0")
        if self.critic_steps_per_gen < 1:
            raise ConfigurationError("critic_steps_per_gen must be >= 1")
        if self.batch_size < 1 or self.max_iterations < 0:
            raise ConfigurationError("batch_size and max_iterations must be positive")
        if self.noise_mode not in ("off", "dropout"):
            raise ConfigurationError(f"unknown noise_mode {self.noise_mode!r}")
        if self.composite_scope not in ("critic_only", "everywhere"):
            raise ConfigurationError(f"unknown composite_scope {self.composite_scope!r}")


@dataclass
class TrainState:
    iteration: int
    generator: Generator
    discriminator: Discriminator
    g_opt: torch.optim.RMSprop
    d_opt: torch.optim.RMSprop
    history: list = field(default_factory=list)  # rows of (iter, critic, adv, l1, mask)


def default_model_configs(depth: int = 16, base_channels: int = 64):
    gen = UNetConfig(in_channels=GENERATOR_IN_CHANNELS, out_channels=3,
                     depth=depth, base_channels=base_channels)
    disc = UNetConfig(in_channels=CRITIC_IN_CHANNELS, out_channels=1,
                      depth=depth, base_channels=base_channels)
    return gen, disc


def _make_optimizer(model, cfg: TrainConfig):
    return torch.optim.RMSprop(
        model.parameters(), lr=cfg.learning_rate,
        alpha=cfg.rmsprop_alpha, eps=cfg.rmsprop_eps,
    )


def _append_csv(path: Path, rows, write_header: bool):
    mode = "w" if write_header else "a"
    with open(path, mode, newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if write_header:
            writer.writerow(LOSS_CSV_HEADER)
        for row in rows:
            writer.writerow([row[0]] + [f"{v:.8f}" for v in row[1:]])


class _BatchSource:
    """Deterministic batch sampler over preloaded pairs."""

    def __init__(self, manifest: DatasetManifest, cfg: TrainConfig):
        self.ids = manifest.ids("train")
        if not self.ids:
            raise DatasetError("training split is empty")
        inputs, targets, masks = load_batch(manifest, self.ids)
        self.inputs = torch.from_numpy(inputs)
        self.targets = torch.from_numpy(targets)
        self.masks = torch.from_numpy(masks)
        self.batch_size = cfg.batch_size
        self.augment = cfg.augment

    def draw(self, rng: np.random.Generator):
        idx = rng.choice(len(self.ids), size=self.batch_size,
                         replace=len(self.ids) < self.batch_size)
        x = self.inputs[idx]
        y = self.targets[idx]
        m = self.masks[idx]
        if self.augment and rng.random() < 0.5:
            x = torch.flip(x, dims=[-1])
            m = torch.flip(m, dims=[-1])
            y = torch.flip(y, dims=[-1])
            y = torch.cat([-y[:, :1], y[:, 1:]], dim=1)
        batch_ids = [self.ids[i] for i in idx]
        return x, y, m, batch_ids


def train(
    manifest: DatasetManifest,
    gen_cfg: UNetConfig,
    disc_cfg: UNetConfig,
    cfg: TrainConfig,
    run_dir,
    resume_from=None,
) -> TrainState:
    """Run the adversarial loop and return the final TrainState."""
    cfg.validate()
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    source = _BatchSource(manifest, cfg)

    torch.manual_seed(cfg.seed)
    generator = Generator(gen_cfg)
    discriminator = Discriminator(disc_cfg)
    g_opt = _make_optimizer(generator, cfg)
    d_opt = _make_optimizer(discriminator, cfg)
    rng = np.random.default_rng(cfg.seed)
    start_iter = 0
    history = []

    if resume_from is not None:
        snap = torch.load(resume_from, map_location="cpu", weights_only=False)
        generator.load_state_dict(snap["generator_state"])
        discriminator.load_state_dict(snap["discriminator_state"])
        g_opt.load_state_dict(snap["g_opt_state"])
        d_opt.load_state_dict(snap["d_opt_state"])
        rng.bit_generator.state = snap["np_rng_state"]
        torch.set_rng_state(snap["torch_rng_state"])
        start_iter = snap["iteration"]
        history = [tuple(r) for r in snap["history"]]

    state = TrainState(start_iter, generator, discriminator, g_opt, d_opt, history)
    _append_csv(run_dir / "losses.csv", history, write_header=True)

    def snapshot(tag):
        torch.save(
            {
                "generator_config": asdict(gen_cfg),
                "discriminator_config": asdict(disc_cfg),
                "train_config": asdict(cfg),
                "generator_state": generator.state_dict(),
                "discriminator_state": discriminator.state_dict(),
                "g_opt_state": g_opt.state_dict(),
                "d_opt_state": d_opt.state_dict(),
                "np_rng_state": rng.bit_generator.state,
                "torch_rng_state": torch.get_rng_state(),
                "iteration": state.iteration,
                "history": state.history,
            },
            run_dir / tag,
        )

    for it in range(start_iter + 1, cfg.max_iterations + 1):
        generator.train()
        discriminator.train()

        d_loss_val = 0.0
        for _ in range(cfg.critic_steps_per_gen):
            x, y, m, batch_ids = source.draw(rng)
            with torch.no_grad():
                y_gen = generator(x, noise_mode=cfg.noise_mode)
            d_opt.zero_grad()
            d_loss = critic_loss(discriminator, x, y, y_gen, m)
            _abort_if_not_finite(d_loss, it, batch_ids, snapshot)
            d_loss.backward()
            d_opt.step()
            clip_weights(discriminator, cfg.clip_c)
            d_loss_val = float(d_loss.detach())

        x, y, m, batch_ids = source.draw(rng)
        g_opt.zero_grad()
        y_gen = generator(x, noise_mode=cfg.noise_mode)
        g_loss, (adv, l1, lm) = generator_loss(
            discriminator, x, y, y_gen, m,
            lambda_l1=cfg.lambda_l1, lambda_mask=cfg.lambda_mask,
            composite_scope=cfg.composite_scope,
        )
        _abort_if_not_finite(g_loss, it, batch_ids, snapshot)
        g_loss.backward()
        g_opt.step()

        row = (it, d_loss_val, adv, l1, lm)
        state.history.append(row)
        state.iteration = it
        _append_csv(run_dir / "losses.csv", [row], write_header=False)
        if cfg.checkpoint_interval and it % cfg.checkpoint_interval == 0:
            snapshot(f"ckpt_{it}")

    snapshot(f"ckpt_{state.iteration}")
    return state


def _abort_if_not_finite(loss, iteration, batch_ids, snapshot):
    if not torch.isfinite(loss):
        snapshot(f"ckpt_diag_{iteration}")
        raise NonFiniteLossError(
            f"non-finite loss at iteration {iteration} on batch {batch_ids}"
        )


def generate_normal_map(generator: Generator, sketch: np.ndarray, hint_bits) -> np.ndarray:
    """Run the generator on one sketch (+ optional hint mask) and encode the result.

    sketch is an H×W byte image (0 = stroke); hint_bits is an H×W boolean
    array or None for an all-zero hint channel.
    """
    stroke = (np.asarray(sketch) == 0).astype(np.float32)
    if hint_bits is None:
        hint = np.zeros_like(stroke)
    else:
        hint = np.asarray(hint_bits).astype(np.float32)
    x = torch.from_numpy(np.stack([stroke, stroke, stroke, hint])[None])
    generator.eval()
    with torch.no_grad():
        y = generator(x, noise_mode="off")[0].numpy()
    return encode_normals(y.transpose(1, 2, 0))
