"""U-Net generator and U-Net critic.

Both networks share one encoder-decoder backbone: depth/2 stride-2
convolution blocks (conv 4x4 -> batchnorm -> leaky ReLU) halving the
spatial size and growing channels up to a cap of 8x base, mirrored by
depth/2 stride-2 up-convolution blocks. Decoder block j consumes the
previous decoder features concatenated with the encoder features of
matching spatial size; skips are tapped after batch normalization. The
first encoder block and the output block carry no batch norm.

The generator ends in tanh (3 channels in [-1, 1]). The critic keeps the
decoder head linear (an unbounded per-pixel score map) and adds a global
scalar score read from the bottleneck; its combined value is
mean(score map) + global score. Lipschitz control is plain weight
clipping to [-c, c].
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigurationError, ShapeMismatchError

CHANNEL_CAP_FACTOR = 8
NOISE_DROPOUT_P = 0.5
NOISE_DROPOUT_BLOCKS = 3  # innermost decoder blocks that carry dropout noise


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int
    out_channels: int
    depth: int = 16
    base_channels: int = 64
    norm: bool = True
    leaky_slope: float = 0.2

    def validate(self) -> None:
        if self.depth < 2 or self.depth % 2 != 0:
            raise ConfigurationError(f"depth must be a positive even count, got {self.depth}")
        if min(self.in_channels, self.out_channels, self.base_channels) < 1:
            raise ConfigurationError("channel counts must be positive")

    @property
    def half_depth(self) -> int:
        return self.depth // 2

    def encoder_channels(self):
        cap = self.base_channels * CHANNEL_CAP_FACTOR
        return [min(self.base_channels * 2**i, cap) for i in range(self.half_depth)]


class _Backbone(nn.Module):
    """Shared U-Net body; subclasses pick the output head."""

    def __init__(self, cfg: UNetConfig, final_out_channels: int):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        k = cfg.half_depth
        enc = cfg.encoder_channels()

        self.down_convs = nn.ModuleList()
        self.down_norms = nn.ModuleList()
        prev = cfg.in_channels
        for i, ch in enumerate(enc):
            self.down_convs.append(nn.Conv2d(prev, ch, 4, stride=2, padding=1))
            use_norm = cfg.norm and i > 0
            self.down_norms.append(nn.BatchNorm2d(ch) if use_norm else nn.Identity())
            prev = ch

        # decoder block j: in = prev decoder out + skip of equal spatial size
        self.up_convs = nn.ModuleList()
        self.up_norms = nn.ModuleList()
        self.decoder_in_channels = []
        self.decoder_out_channels = []
        prev = enc[k - 1]
        for j in range(1, k + 1):
            in_ch = prev if j == 1 else prev + enc[k - j]
            out_ch = final_out_channels if j == k else enc[k - j - 1]
            self.up_convs.append(nn.ConvTranspose2d(in_ch, out_ch, 4, stride=2, padding=1))
            use_norm = cfg.norm and j < k
            self.up_norms.append(nn.BatchNorm2d(out_ch) if use_norm else nn.Identity())
            self.decoder_in_channels.append(in_ch)
            self.decoder_out_channels.append(out_ch)
            prev = out_ch

    def _check_input(self, x: torch.Tensor) -> None:
        if x.ndim != 4 or x.shape[1] != self.cfg.in_channels:
            raise ShapeMismatchError(
                f"expected (B, {self.cfg.in_channels}, H, W), got {tuple(x.shape)}"
            )
        k = self.cfg.half_depth
        h, w = x.shape[2], x.shape[3]
        if h != w or h % 2**k != 0 or h // 2**k < 1:
            raise ConfigurationError(
                f"spatial size {h}x{w} incompatible with depth {self.cfg.depth} "
                f"(needs a square size divisible by {2**k})"
            )

    def _encode(self, x: torch.Tensor):
        skips = []
        h = x
        for conv, norm in zip(self.down_convs, self.down_norms):
            h = norm(conv(h))
            skips.append(h)  # skip tapped after batch normalization
            h = F.leaky_relu(h, self.cfg.leaky_slope)
        return h, skips

    def _decode(self, bottleneck: torch.Tensor, skips, noise_mode: str):
        k = self.cfg.half_depth
        h = bottleneck
        for j in range(1, k + 1):
            if j > 1:
                h = torch.cat([h, skips[k - j]], dim=1)
            h = self.up_norms[j - 1](self.up_convs[j - 1](h))
            if noise_mode == "dropout" and j <= NOISE_DROPOUT_BLOCKS and j < k:
                h = F.dropout(h, p=NOISE_DROPOUT_P, training=True)
            if j < k:
                h = F.leaky_relu(h, self.cfg.leaky_slope)
        return h


class Generator(_Backbone):
    def __init__(self, cfg: UNetConfig):
        super().__init__(cfg, cfg.out_channels)

    def forward(self, x: torch.Tensor, noise_mode: str = "off") -> torch.Tensor:
        if noise_mode not in ("off", "dropout"):
            raise ConfigurationError(f"unknown noise_mode {noise_mode!r}")
        self._check_input(x)
        bottleneck, skips = self._encode(x)
        return torch.tanh(self._decode(bottleneck, skips, noise_mode))


class Discriminator(_Backbone):
    """WGAN critic with a per-pixel score map and a global bottleneck score."""

    def __init__(self, cfg: UNetConfig):
        super().__init__(cfg, 1)
        enc = cfg.encoder_channels()
        self.global_head = nn.Conv2d(enc[-1], 1, 1)

    def forward(self, x: torch.Tensor):
        self._check_input(x)
        bottleneck, skips = self._encode(x)
        pixel_map = self._decode(bottleneck, skips, "off")
        global_score = self.global_head(bottleneck).mean(dim=(1, 2, 3))
        return global_score, pixel_map

    def critic_value(self, x: torch.Tensor) -> torch.Tensor:
        """Combined per-sample score: mean of the pixel map plus the global score."""
        global_score, pixel_map = self.forward(x)
        return pixel_map.mean(dim=(1, 2, 3)) + global_score


def build_generator(cfg: UNetConfig) -> Generator:
    return Generator(cfg)


def build_discriminator(cfg: UNetConfig) -> Discriminator:
    return Discriminator(cfg)


def clip_weights(model: nn.Module, c: float = 0.01) -> None:
    """Clamp every learnable parameter to [-c, c] in place."""
    if c <= 0:
        raise ConfigurationError(f"clip bound must be positive, got {c}")
    with torch.no_grad():
        for p in model.parameters():
            p.clamp_(-c, c)


def save_checkpoint(path, generator: Generator, discriminator: Discriminator, extra=None):
    """Single-archive checkpoint: configs plus all parameter tensors by layer path."""
    payload = {
        "generator_config": asdict(generator.cfg),
        "discriminator_config": asdict(discriminator.cfg),
        "generator_state": generator.state_dict(),
        "discriminator_state": discriminator.state_dict(),
    }
    if extra:
        payload["extra"] = extra
    torch.save(payload, path)


def load_checkpoint(path):
    payload = torch.load(path, map_location="cpu", weights_only=False)
    gen = Generator(UNetConfig(**payload["generator_config"]))
    gen.load_state_dict(payload["generator_state"])
    disc = Discriminator(UNetConfig(**payload["discriminator_config"]))
    disc.load_state_dict(payload["discriminator_state"])
    if "extra" in payload:
        return gen, disc, payload["extra"]
    model_keys = {
        "generator_config", "discriminator_config",
        "generator_state", "discriminator_state",
    }
    return gen, disc, {k: v for k, v in payload.items() if k not in model_keys}
