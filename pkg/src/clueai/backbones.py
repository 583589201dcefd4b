"""Per-frame visual feature extractors: VGG16, AlexNet, ResNet18 topologies.

All three keep only their convolutional trunk (the classification dense
layers are dropped); width_multiplier scales every channel count so the
same geometry trains from scratch at desk size.  Residual blocks are
conv-ReLU-conv plus shortcut with ReLU after the sum; no batch norm.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .manifest import export_weights, import_weights
from .tensor import Parameter, Tensor, conv2d, maxpool2d, relu, reshape, spatial_mean

VGG_CHANNELS = [64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512]
VGG_POOL_AFTER = {2, 4, 7, 10, 13}                       # 1-based conv indices
ALEX_PLAN = [  # (channels, kernel, stride, pad, pool_after)
    (64, 11, 4, 2, True),
    (192, 5, 1, 2, True),
    (384, 3, 1, 1, False),
    (256, 3, 1, 1, False),
    (256, 3, 1, 1, True),
]
RESNET_STAGES = [64, 128, 256, 512]


def _width(wm: float, c: int) -> int:
    return int(math.ceil(wm * c))


@dataclass
class BackboneConfig:
    kind: str = "vgg16"                  # vgg16 | alexnet | resnet18
    width_multiplier: float = 1.0
    input_size: int = 224
    with_avg_pool: bool = False
    feature_dim: int = field(init=False)

    def __post_init__(self):
        if self.kind not in ("vgg16", "alexnet", "resnet18"):
            raise ConfigError(f"unknown backbone kind {self.kind!r}")
        if not 0.0 < self.width_multiplier <= 1.0:
            raise ConfigError(f"width_multiplier must be in (0, 1], got {self.width_multiplier}")
        if self.kind in ("vgg16", "resnet18") and self.input_size % 32 != 0:
            raise ConfigError(f"{self.kind} needs input_size divisible by 32, got {self.input_size}")
        if self.kind == "alexnet" and self.input_size < 63:
            raise ConfigError(f"alexnet needs input_size >= 63, got {self.input_size}")
        self.feature_dim = _feature_dim(self)


def _conv_out(size: int, k: int, s: int, p: int) -> int:
    out = (size + 2 * p - k) // s + 1
    if out < 1:
        raise ConfigError(f"input collapses below 1: size {size}, kernel {k}, stride {s}, pad {p}")
    return out


def _feature_dim(cfg: BackboneConfig) -> int:
    """Channels and spatial extent after the conv trunk, walked layer by layer."""
    s = cfg.input_size
    wm = cfg.width_multiplier
    if cfg.kind == "vgg16":
        for i in range(1, 14):
            s = _conv_out(s, 3, 1, 1)
            if i in VGG_POOL_AFTER:
                s = _conv_out(s, 2, 2, 0)
        c = _width(wm, VGG_CHANNELS[-1])
    elif cfg.kind == "alexnet":
        for channels, k, st, p, pool in ALEX_PLAN:
            s = _conv_out(s, k, st, p)
            if pool:
                s = _conv_out(s, 3, 2, 0)
        c = _width(wm, ALEX_PLAN[-1][0])
    else:  # resnet18
        s = _conv_out(s, 7, 2, 3)       # stem conv
        s = _conv_out(s, 3, 2, 0)       # stem max pool
        for stage in range(1, 4):       # stride-2 entry conv of stages 2..4
            s = _conv_out(s, 3, 2, 1)
        c = _width(wm, RESNET_STAGES[-1])
    if cfg.with_avg_pool:
        return c
    return c * s * s


class Backbone:
    """A built feature extractor: ordered parameters plus a forward pass.

    `forward` accepts [3,S,S] or [N,3,S,S] and returns [feature_dim] or
    [N, feature_dim].  When a cache dict is supplied, the post-ReLU output
    of the last convolution (before any flatten/pool) is stored under
    "last_conv" for class-activation mapping.
    """

    def __init__(self, cfg: BackboneConfig, seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        self.params: OrderedDict[str, Parameter] = OrderedDict()
        self._rng = np.random.default_rng(np.random.SeedSequence([seed, _KIND_TAG[cfg.kind]]))
        self._build()

    # -- parameter helpers ---------------------------------------------------

    def _conv_param(self, name: str, c_out: int, c_in: int, kh: int, kw: int):
        fan_in = c_in * kh * kw
        bound = math.sqrt(6.0 / fan_in)
        w = self._rng.uniform(-bound, bound, size=(c_out, c_in, kh, kw))
        self.params[f"{name}.weight"] = Parameter(w.astype(self.dtype), f"{name}.weight")
        self.params[f"{name}.bias"] = Parameter(np.zeros(c_out, dtype=self.dtype), f"{name}.bias")

    def _wb(self, name: str) -> tuple[Parameter, Parameter]:
        return self.params[f"{name}.weight"], self.params[f"{name}.bias"]

    # -- construction ----------------------------------------------------------

    def _build(self):
        cfg = self.cfg
        wm = cfg.width_multiplier
        if cfg.kind == "vgg16":
            c_in = 3
            for i, base in enumerate(VGG_CHANNELS, start=1):
                c_out = _width(wm, base)
                self._conv_param(f"conv{i:02d}", c_out, c_in, 3, 3)
                c_in = c_out
        elif cfg.kind == "alexnet":
            c_in = 3
            for i, (base, k, _, _, _) in enumerate(ALEX_PLAN, start=1):
                c_out = _width(wm, base)
                self._conv_param(f"conv{i}", c_out, c_in, k, k)
                c_in = c_out
        else:
            c_stem = _width(wm, RESNET_STAGES[0])
            self._conv_param("stem", c_stem, 3, 7, 7)
            c_in = c_stem
            for stage, base in enumerate(RESNET_STAGES, start=1):
                c_out = _width(wm, base)
                for block in (1, 2):
                    pre = f"stage{stage}.block{block}"
                    self._conv_param(f"{pre}.conv1", c_out, c_in, 3, 3)
                    self._conv_param(f"{pre}.conv2", c_out, c_out, 3, 3)
                    if block == 1 and (c_in != c_out or stage > 1):
                        self._conv_param(f"{pre}.proj", c_out, c_in, 1, 1)
                    c_in = c_out

    @property
    def feature_dim(self) -> int:
        return self.cfg.feature_dim

    # -- forward ----------------------------------------------------------------

    def forward(self, x: Tensor, cache: dict | None = None,
                conv_delta: np.ndarray | None = None) -> Tensor:
        """Run the trunk.  `conv_delta` (same shape as the last conv map) is
        an additive probe on that map, used by the finite-difference check
        of the class-activation weighting."""
        single = x.data.ndim == 3
        if x.shape[-3:] != (3, self.cfg.input_size, self.cfg.input_size):
            raise DimensionError(
                f"backbone expects [...,3,{self.cfg.input_size},{self.cfg.input_size}], got {x.shape}")

        def at_last_conv(h: Tensor) -> Tensor:
            # post-ReLU map of the final conv, before any flatten/pool
            if conv_delta is not None:
                from .tensor import add
                h = add(h, Tensor(np.asarray(conv_delta, dtype=h.dtype)))
            if cache is not None:
                cache["last_conv"] = h
            return h

        if self.cfg.kind == "vgg16":
            out = self._forward_vgg(x, at_last_conv, cache)
        elif self.cfg.kind == "alexnet":
            out = self._forward_alexnet(x, at_last_conv, cache)
        else:
            out = at_last_conv(self._forward_resnet(x, cache))
        if self.cfg.with_avg_pool:
            feat = spatial_mean(out)
        else:
            if single:
                feat = reshape(out, (self.feature_dim,))
            else:
                feat = reshape(out, (out.shape[0], self.feature_dim))
        return feat

    def _forward_vgg(self, x: Tensor, at_last_conv, cache) -> Tensor:
        h = x
        for i in range(1, 14):
            w, b = self._wb(f"conv{i:02d}")
            h = relu(conv2d(h, w, b, stride=(1, 1), padding=(1, 1)))
            if i == 13:
                h = at_last_conv(h)
            elif cache is not None:
                cache[f"conv{i:02d}"] = h
            if i in VGG_POOL_AFTER:
                h, _ = maxpool2d(h, (2, 2), (2, 2))
        return h

    def _forward_alexnet(self, x: Tensor, at_last_conv, cache) -> Tensor:
        h = x
        for i, (_, k, st, p, pool) in enumerate(ALEX_PLAN, start=1):
            w, b = self._wb(f"conv{i}")
            h = relu(conv2d(h, w, b, stride=(st, st), padding=(p, p)))
            if i == len(ALEX_PLAN):
                h = at_last_conv(h)
            elif cache is not None:
                cache[f"conv{i}"] = h
            if pool:
                h, _ = maxpool2d(h, (3, 3), (2, 2))
        return h

    def _forward_resnet(self, x: Tensor, cache=None) -> Tensor:
        from .tensor import add
        w, b = self._wb("stem")
        h = relu(conv2d(x, w, b, stride=(2, 2), padding=(3, 3)))
        h, _ = maxpool2d(h, (3, 3), (2, 2))
        for stage in range(1, 5):
            for block in (1, 2):
                pre = f"stage{stage}.block{block}"
                stride = 2 if (stage > 1 and block == 1) else 1
                w1, b1 = self._wb(f"{pre}.conv1")
                w2, b2 = self._wb(f"{pre}.conv2")
                branch = conv2d(h, w1, b1, stride=(stride, stride), padding=(1, 1))
                branch = conv2d(relu(branch), w2, b2, stride=(1, 1), padding=(1, 1))
                if f"{pre}.proj.weight" in self.params:
                    wp, bp = self._wb(f"{pre}.proj")
                    shortcut = conv2d(h, wp, bp, stride=(stride, stride), padding=(0, 0))
                else:
                    shortcut = h
                h = relu(add(branch, shortcut))
            if cache is not None and not (stage == 4):
                cache[f"stage{stage}"] = h
        return h

    # -- weights ------------------------------------------------------------------

    def save_weights(self, directory):
        export_weights(self.params, directory)

    def load_weights(self, directory):
        import_weights(self.params, directory)
        return self


_KIND_TAG = {"vgg16": 1, "alexnet": 2, "resnet18": 3}


def build_backbone(cfg: BackboneConfig, seed: int = 0, dtype=np.float32) -> Backbone:
    return Backbone(cfg, seed=seed, dtype=dtype)


def build_vgg16(cfg: BackboneConfig, seed: int = 0, dtype=np.float32) -> Backbone:
    if cfg.kind != "vgg16":
        raise ConfigError(f"build_vgg16 called with kind {cfg.kind!r}")
    return Backbone(cfg, seed=seed, dtype=dtype)


def build_alexnet(cfg: BackboneConfig, seed: int = 0, dtype=np.float32) -> Backbone:
    if cfg.kind != "alexnet":
        raise ConfigError(f"build_alexnet called with kind {cfg.kind!r}")
    return Backbone(cfg, seed=seed, dtype=dtype)


def build_resnet18(cfg: BackboneConfig, seed: int = 0, dtype=np.float32) -> Backbone:
    if cfg.kind != "resnet18":
        raise ConfigError(f"build_resnet18 called with kind {cfg.kind!r}")
    return Backbone(cfg, seed=seed, dtype=dtype)


def extract_features(backbone: Backbone, frame: np.ndarray | Tensor) -> np.ndarray:
    """Deterministic forward of one [3,S,S] frame; returns [feature_dim]."""
    t = frame if isinstance(frame, Tensor) else Tensor(np.asarray(frame, dtype=backbone.dtype))
    return backbone.forward(t).data
