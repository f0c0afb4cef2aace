"""Four-level U-shaped restoration backbone.

Encoder levels run at widths c, 2c, 4c, 8c (pixel-unshuffle downsampling),
the bottleneck optionally passes through the dual-domain module, and the
decoder mirrors the encoder with gated (or plain) skip fusion at levels
1-3.  A refinement stage at full resolution feeds a 3x3 projection whose
output is added to the input image, so the network always predicts a
residual.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import ops
from .attention import TransformerBlock
from .errors import ConfigError, ShapeError
from .fusion import GatedSkipFusion, PlainSkipFusion
from .layers import Conv2d
from .params import ParamStore
from .prompts import DegradationContext, PromptConfig, PromptGenerator
from .spectral import DualDomainBottleneck
from .tensor import Tensor


@dataclass
class ModelConfig:
    base_channels: int = 48
    enc_blocks: tuple = (4, 6, 6, 8)      # levels 1-3 plus bottleneck; decoder mirrors 1-3
    refinement_blocks: int = 4
    heads: tuple = (1, 2, 4, 8)
    num_scales: int = 3
    global_dim: int = 256
    ffn_expansion: float = 2.66
    norm_eps: float = 1e-6
    gn_groups: int = 4
    se_reduction: int = 4
    use_agf: bool = True                  # gated skip fusion (off: plain concat+1x1)
    use_cgdm: bool = True                 # dual-domain bottleneck
    use_caga: bool = True                 # prompt-modulated attention (off: plain attention)
    use_adaptive_temp: bool = True        # sub-toggles, only active while use_caga
    use_gated_output: bool = True
    seed: int = 0

    def level_widths(self) -> list[int]:
        return [self.base_channels * (2 ** i) for i in range(4)]

    def wants_temperature(self) -> bool:
        return self.use_caga and self.use_adaptive_temp

    def wants_gate(self) -> bool:
        return self.use_caga and self.use_gated_output

    def needs_prompts(self) -> bool:
        return self.use_cgdm or self.wants_temperature() or self.wants_gate()

    def validate(self):
        if len(self.enc_blocks) != 4 or len(self.heads) != 4:
            raise ConfigError("enc_blocks and heads must have one entry per level (4)")
        if self.base_channels < 4:
            raise ConfigError("base_channels must be at least 4")
        if any(b < 1 for b in self.enc_blocks) or self.refinement_blocks < 0:
            raise ConfigError("block counts must be positive")
        for w, h in zip(self.level_widths(), self.heads):
            if w % h:
                raise ConfigError(f"heads={h} does not divide width {w}")
        if self.base_channels % self.gn_groups:
            raise ConfigError("gn_groups must divide base_channels")
        if self.ffn_expansion <= 0 or self.global_dim < 1:
            raise ConfigError("ffn_expansion and global_dim must be positive")


def full_config(seed: int = 0) -> ModelConfig:
    return ModelConfig(seed=seed)


def small_config(seed: int = 0) -> ModelConfig:
    return ModelConfig(base_channels=32, seed=seed)


def tiny_config(seed: int = 0) -> ModelConfig:
    """Desk-scale variant for tests and smoke training."""
    return ModelConfig(base_channels=8, enc_blocks=(1, 1, 1, 1), refinement_blocks=1,
                       heads=(1, 1, 2, 2), seed=seed)


def config_by_name(name: str, seed: int = 0) -> ModelConfig:
    table = {"full": full_config, "small": small_config, "tiny": tiny_config}
    if name not in table:
        raise ConfigError(f"unknown model size '{name}' (expected full/small/tiny)")
    return table[name](seed)


class RestorationModel:
    """Image in, restored image out; all parameters live in ``self.store``."""

    DOWNSCALE = 8  # three pixel-unshuffle stages

    def __init__(self, config: ModelConfig, dtype=np.float32):
        config.validate()
        self.config = config
        self.store = ParamStore(seed=config.seed, dtype=dtype)
        store = self.store
        c = config.base_channels
        widths = config.level_widths()
        temp, gate = config.wants_temperature(), config.wants_gate()

        def block(name: str, level: int) -> TransformerBlock:
            prompt_dim = widths[level] if (temp or gate) else None
            return TransformerBlock(store, name, widths[level], config.heads[level],
                                    prompt_dim, temp, gate,
                                    config.ffn_expansion, config.norm_eps)

        self.conv_in = Conv2d(store, "conv_in", 3, c, 3)
        self.prompts = None
        if config.needs_prompts():
            # level prompts only exist when some block consumes them; the
            # bottleneck alone just needs the global vector
            pc = PromptConfig(channels=c, num_scales=config.num_scales,
                              global_dim=config.global_dim,
                              num_levels=4 if (temp or gate) else 0)
            self.prompts = PromptGenerator(store, "prompts", pc)

        self.encoder = [
            [block(f"encoder{lvl + 1}.block{i}", lvl) for i in range(config.enc_blocks[lvl])]
            for lvl in range(3)
        ]
        self.down = [
            Conv2d(store, f"down{lvl + 1}", 4 * widths[lvl], widths[lvl + 1], 1, bias=False)
            for lvl in range(3)
        ]
        self.latent = [block(f"latent.block{i}", 3) for i in range(config.enc_blocks[3])]
        self.bottleneck = None
        if config.use_cgdm:
            self.bottleneck = DualDomainBottleneck(store, "bottleneck", widths[3], config.global_dim)

        self.up = [
            Conv2d(store, f"up{lvl + 1}", widths[lvl + 1], 4 * widths[lvl], 1, bias=False)
            for lvl in reversed(range(3))
        ]  # ordered deepest-first: up3 (8c->4c), up2, up1
        fusion_cls = GatedSkipFusion if config.use_agf else PlainSkipFusion
        self.fusion = [
            fusion_cls(store, f"fusion{lvl + 1}", widths[lvl],
                       gn_groups=config.gn_groups, se_reduction=config.se_reduction)
            for lvl in reversed(range(3))
        ]
        self.decoder = [
            [block(f"decoder{lvl + 1}.block{i}", lvl) for i in range(config.enc_blocks[lvl])]
            for lvl in reversed(range(3))
        ]
        self.refinement = [block(f"refinement.block{i}", 0) for i in range(config.refinement_blocks)]
        self.conv_out = Conv2d(store, "conv_out", c, 3, 3)

    # -- plumbing ---------------------------------------------------------
    @property
    def dtype(self):
        return self.store.dtype

    def param_count(self) -> int:
        return self.store.total_parameters()

    def _downsample(self, x: Tensor, level: int) -> Tensor:
        return self.down[level](ops.pixel_unshuffle(x, 2))

    def _upsample(self, x: Tensor, idx: int) -> Tensor:
        return ops.pixel_shuffle(self.up[idx](x), 2)

    def _run(self, blocks, x: Tensor, prompt: Tensor | None) -> Tensor:
        for b in blocks:
            x = b(x, prompt)
        return x

    def context(self, shallow: Tensor) -> DegradationContext | None:
        return self.prompts(shallow) if self.prompts is not None else None

    def forward(self, x) -> Tensor:
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.store.dtype))
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"expected (n, 3, h, w) input, got {x.shape}")
        n, _, h, w = x.shape
        if h % self.DOWNSCALE or w % self.DOWNSCALE:
            raise ShapeError(f"spatial dims must be multiples of {self.DOWNSCALE}, got {h}x{w}")
        if x.data.dtype != self.store.dtype:
            x = Tensor(x.data.astype(self.store.dtype), requires_grad=x.requires_grad)

        shallow = self.conv_in(x)
        ctx = self.context(shallow)

        def prompt(level: int):
            if ctx is None or not ctx.level_prompts:
                return None
            return ctx.prompt(level)

        skips = []
        feat = shallow
        for lvl in range(3):
            feat = self._run(self.encoder[lvl], feat, prompt(lvl + 1))
            skips.append(feat)
            feat = self._downsample(feat, lvl)
        feat = self._run(self.latent, feat, prompt(4))
        if self.bottleneck is not None:
            feat = self.bottleneck(feat, ctx.global_feature)

        for idx, lvl in enumerate(reversed(range(3))):  # lvl = 2, 1, 0
            feat = self._upsample(feat, idx)
            feat = self.fusion[idx](skips[lvl], feat)
            feat = self._run(self.decoder[idx], feat, prompt(lvl + 1))

        feat = self._run(self.refinement, feat, prompt(1))
        return ops.add(x, self.conv_out(feat))

    __call__ = forward


def ablation_variants(base: ModelConfig | None = None) -> list[tuple[str, ModelConfig]]:
    """Module on/off matrix: single/pair/full toggles plus modulation sub-toggles."""
    from dataclasses import replace

    base = base or full_config()
    rows = [
        ("skip-fusion only",        dict(use_agf=True, use_cgdm=False, use_caga=False)),
        ("dual-domain only",        dict(use_agf=False, use_cgdm=True, use_caga=False)),
        ("gated-attention only",    dict(use_agf=False, use_cgdm=False, use_caga=True)),
        ("skip-fusion+dual-domain", dict(use_agf=True, use_cgdm=True, use_caga=False)),
        ("dual-domain+gated-attn",  dict(use_agf=False, use_cgdm=True, use_caga=True)),
        ("skip-fusion+gated-attn",  dict(use_agf=True, use_cgdm=False, use_caga=True)),
        ("full",                    dict(use_agf=True, use_cgdm=True, use_caga=True)),
        ("plain baseline",          dict(use_agf=False, use_cgdm=False, use_caga=False)),
        ("temperature only",        dict(use_agf=False, use_cgdm=False, use_caga=True,
                                         use_adaptive_temp=True, use_gated_output=False)),
        ("output-gate only",        dict(use_agf=False, use_cgdm=False, use_caga=True,
                                         use_adaptive_temp=False, use_gated_output=True)),
        ("temperature+gate",        dict(use_agf=False, use_cgdm=False, use_caga=True,
                                         use_adaptive_temp=True, use_gated_output=True)),
    ]
    return [(label, replace(base, **flags)) for label, flags in rows]


def config_to_dict(config: ModelConfig) -> dict:
    d = asdict(config)
    d["enc_blocks"] = list(config.enc_blocks)
    d["heads"] = list(config.heads)
    return d


def config_from_dict(d: dict) -> ModelConfig:
    known = {f.name for f in ModelConfig.__dataclass_fields__.values()}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    d = dict(d)
    for key in ("enc_blocks", "heads"):
        if key in d:
            d[key] = tuple(d[key])
    cfg = ModelConfig(**d)
    cfg.validate()
    return cfg
