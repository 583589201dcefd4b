"""The three-stream classifier: visual LSTM + self-attention, auditory CNN
on MFCC matrices, proprioceptive CNN on gripper traces, late fusion head.

Disabled modalities are removed structurally: their parameters are never
created and the fusion input shrinks.  Likewise switching attention off
removes the attention projections from the parameter list.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .backbones import Backbone, BackboneConfig
from .errors import ConfigError, DimensionError, InputError
from .tensor import Parameter, Tensor

SQUARE_AUDIO_KERNELS = (((3, 3), (1, 1)),) * 4
# Fig-11-style rectangular variant: two time-major kernels with stride equal
# to the kernel, then two size-preserving square layers.
RECT_AUDIO_KERNELS = (((16, 4), (16, 4)), ((16, 5), (16, 5)),
                      ((3, 3), (1, 1)), ((3, 3), (1, 1)))


@dataclass
class ModelConfig:
    backbone: BackboneConfig = field(default_factory=lambda: BackboneConfig(
        kind="vgg16", width_multiplier=1 / 16, input_size=32))
    lstm_hidden: int = 64
    lstm_layers: int = 1
    recurrent_kind: str = "lstm"         # lstm | rnn
    attention: bool = True
    use_visual: bool = True
    use_audio: bool = True
    use_proprio: bool = True
    audio_channels: tuple[int, ...] = (8, 16, 32, 32)
    audio_kernels: tuple = SQUARE_AUDIO_KERNELS
    audio_pool: tuple[int, int] = (4, 4)            # single max-pool after the convs
    audio_input_shape: tuple[int, int] = (61, 13)   # (n_frames, n_mfcc)
    audio_input_scale: float = 1.0 / 64.0
    audio_out: int = 64
    proprio_channels: tuple[int, ...] = (16,)
    proprio_kernel: int = 5
    proprio_len: int = 50
    proprio_out: int = 64
    dropout_visual: float = 0.4
    dropout_fusion: float = 0.4
    dropout_proprio: float = 0.4
    fusion_hidden: int = 256
    num_classes: int = 7

    def __post_init__(self):
        if not (self.use_visual or self.use_audio or self.use_proprio):
            raise ConfigError("at least one modality must be enabled")
        if self.recurrent_kind not in ("lstm", "rnn"):
            raise ConfigError(f"recurrent_kind must be lstm or rnn, got {self.recurrent_kind!r}")
        if len(self.audio_channels) != 4:
            raise ConfigError("the auditory stream uses exactly four conv layers")
        if len(self.audio_kernels) != 4:
            raise ConfigError("audio_kernels must describe four layers")
        if self.num_classes < 2:
            raise ConfigError("need at least two classes")
        (kh, kw), _ = self.audio_kernels[0]
        fr, co = self.audio_input_shape
        if fr < kh or co < kw:
            raise ConfigError(
                f"MFCC input {self.audio_input_shape} too short for the first audio kernel "
                f"({kh},{kw}); need at least ({kh},{kw}) frames x coefficients")
        for p in (self.dropout_visual, self.dropout_fusion, self.dropout_proprio):
            if not 0.0 <= p < 1.0:
                raise ConfigError(f"dropout probability {p} outside [0, 1)")

    @property
    def modality_mask(self) -> tuple[bool, bool, bool]:
        return (self.use_visual, self.use_audio, self.use_proprio)

    @property
    def visual_dim(self) -> int:
        return 2 * self.lstm_hidden

    @property
    def fused_dim(self) -> int:
        return (self.visual_dim * self.use_visual
                + self.audio_out * self.use_audio
                + self.proprio_out * self.use_proprio)


@dataclass
class StreamFeatures:
    r_v: np.ndarray | None
    r_a: np.ndarray | None
    r_p: np.ndarray | None
    r_fused: np.ndarray


@dataclass
class Prediction:
    logits: np.ndarray
    probs: np.ndarray
    predicted: int                        # argmax, ties to the lowest index


@dataclass
class ModelInputs:
    """Per-episode arrays, already resized/featurized for the model."""
    frames: np.ndarray | None = None      # [T,3,S,S] in [0,1]
    mfcc: np.ndarray | None = None        # [n_frames, n_mfcc]
    proprio: np.ndarray | None = None     # [T_p,2]


class ForwardResult:
    def __init__(self, prediction: Prediction, features: StreamFeatures, cache: dict):
        self.prediction = prediction
        self.features = features
        self.cache = cache


def _audio_pad(kh, kw, sh, sw, h, w):
    """Size-preserving pad for 3x3/s1; otherwise the minimal pad that lets
    the kernel fit at least once (deeper rectangular layers on tiny maps)."""
    if (kh, kw) == (3, 3) and (sh, sw) == (1, 1):
        return 1, 1
    ph = max(0, math.ceil((kh - h) / 2))
    pw = max(0, math.ceil((kw - w) / 2))
    return ph, pw


def _audio_geometry(cfg: ModelConfig) -> tuple[int, int, int]:
    """Walk the four conv layers + pool; returns (channels, h, w) at flatten."""
    h, w = cfg.audio_input_shape
    for (kh, kw), (sh, sw) in cfg.audio_kernels:
        ph, pw = _audio_pad(kh, kw, sh, sw, h, w)
        if kh > h + 2 * ph or kw > w + 2 * pw:
            raise ConfigError(f"audio kernel ({kh},{kw}) cannot fit input ({h},{w})")
        h = (h + 2 * ph - kh) // sh + 1
        w = (w + 2 * pw - kw) // sw + 1
    ph, pw = min(cfg.audio_pool[0], h), min(cfg.audio_pool[1], w)
    h, w = h // ph, w // pw
    return cfg.audio_channels[-1], h, w


class ClueModel:
    """Built three-stream classifier with named parameters and seeded dropout."""

    def __init__(self, cfg: ModelConfig, seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        self.seed = seed
        self.params: OrderedDict[str, Parameter] = OrderedDict()
        self._init_rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
        self.backbone: Backbone | None = None
        self._build()
        self.reseed_dropout(seed)

    # -- construction -------------------------------------------------------

    def _dense_param(self, name: str, n_out: int, n_in: int):
        bound = math.sqrt(6.0 / n_in)
        w = self._init_rng.uniform(-bound, bound, size=(n_out, n_in)).astype(self.dtype)
        self.params[f"{name}.weight"] = Parameter(w, f"{name}.weight")
        self.params[f"{name}.bias"] = Parameter(np.zeros(n_out, dtype=self.dtype), f"{name}.bias")

    def _conv_param(self, name: str, c_out: int, c_in: int, kh: int, kw: int):
        fan_in = c_in * kh * kw
        bound = math.sqrt(6.0 / fan_in)
        w = self._init_rng.uniform(-bound, bound, size=(c_out, c_in, kh, kw)).astype(self.dtype)
        self.params[f"{name}.weight"] = Parameter(w, f"{name}.weight")
        self.params[f"{name}.bias"] = Parameter(np.zeros(c_out, dtype=self.dtype), f"{name}.bias")

    def _square_param(self, name: str, n: int):
        bound = math.sqrt(6.0 / n)
        w = self._init_rng.uniform(-bound, bound, size=(n, n)).astype(self.dtype)
        self.params[name] = Parameter(w, name)

    def _build(self):
        cfg = self.cfg
        if cfg.use_visual:
            self.backbone = Backbone(cfg.backbone, seed=self.seed, dtype=self.dtype)
            for name, p in self.backbone.params.items():
                self.params[f"visual.backbone.{name}"] = p
            d_in = cfg.backbone.feature_dim
            gates = 4 if cfg.recurrent_kind == "lstm" else 1
            for layer in range(cfg.lstm_layers):
                h = cfg.lstm_hidden
                fan = d_in + h
                bound = math.sqrt(6.0 / fan)
                name = f"visual.{cfg.recurrent_kind}{layer}"
                w = self._init_rng.uniform(-bound, bound, size=(fan, gates * h)).astype(self.dtype)
                self.params[f"{name}.weight"] = Parameter(w, f"{name}.weight")
                self.params[f"{name}.bias"] = Parameter(
                    np.zeros(gates * h, dtype=self.dtype), f"{name}.bias")
                d_in = h
            if cfg.attention:
                h = cfg.lstm_hidden
                for proj in ("wq", "wk", "wv"):
                    self._square_param(f"visual.attn.{proj}", h)
                self._dense_param("visual.attn.dense", h, h)
        if cfg.use_audio:
            c_in = 1
            for i, c_out in enumerate(cfg.audio_channels, start=1):
                (kh, kw), _ = cfg.audio_kernels[i - 1]
                self._conv_param(f"audio.conv{i}", c_out, c_in, kh, kw)
                c_in = c_out
            c, h, w = _audio_geometry(cfg)
            self._dense_param("audio.dense", cfg.audio_out, c * h * w)
        if cfg.use_proprio:
            c_in = 2
            for i, c_out in enumerate(cfg.proprio_channels, start=1):
                self._conv_param(f"proprio.conv{i}", c_out, c_in, cfg.proprio_kernel, 1)
                c_in = c_out
            pooled = cfg.proprio_len // min(2, cfg.proprio_len)
            self._dense_param("proprio.dense", cfg.proprio_out, c_in * pooled)
        self._dense_param("fusion.dense1", cfg.fusion_hidden, cfg.fused_dim)
        self._dense_param("fusion.dense2", cfg.num_classes, cfg.fusion_hidden)

    def reseed_dropout(self, seed: int):
        self._dropout_rng = np.random.default_rng(np.random.SeedSequence([seed, 202]))

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    # -- streams --------------------------------------------------------------

    def visual_stream(self, frames: np.ndarray, mode: str, cache: dict,
                      conv_delta: np.ndarray | None = None) -> Tensor:
        cfg = self.cfg
        frames = np.asarray(frames, dtype=self.dtype)
        if frames.ndim != 4 or frames.shape[0] < 1:
            raise InputError(f"visual stream needs [T,3,S,S] frames, got {frames.shape}")
        steps = frames.shape[0]
        feats = self.backbone.forward(Tensor(frames), cache=cache, conv_delta=conv_delta)
        if mode == "train" and cfg.dropout_visual > 0:
            feats = T.dropout(feats, cfg.dropout_visual, mode, self._dropout_rng)

        hdim = cfg.lstm_hidden
        seq = feats
        for layer in range(cfg.lstm_layers):
            name = f"visual.{cfg.recurrent_kind}{layer}"
            w = self.params[f"{name}.weight"]
            b = self.params[f"{name}.bias"]
            h = Tensor(np.zeros((1, hdim), dtype=self.dtype))
            c = Tensor(np.zeros((1, hdim), dtype=self.dtype))
            rows = []
            for t_idx in range(steps):
                x_t = T.narrow(seq, 0, t_idx, 1)
                if cfg.recurrent_kind == "lstm":
                    h, c = T.lstm_cell(x_t, h, c, w, b)
                else:
                    h = T.rnn_cell(x_t, h, w, b)
                rows.append(h)
            seq = T.concat(rows, axis=0)                  # [T,H]
        cache["hidden_seq"] = seq
        h_last = T.reshape(T.narrow(seq, 0, steps - 1, 1), (hdim,))

        if cfg.attention:
            ctx = self.self_attention(seq, cache)
            ctx = T.dense(ctx, self.params["visual.attn.dense.weight"],
                          self.params["visual.attn.dense.bias"])
            context = T.mean(ctx, axis=0)
        else:
            context = T.mean(seq, axis=0)
        return T.concat([context, h_last], axis=0)        # [2H]

    def self_attention(self, seq: Tensor, cache: dict) -> Tensor:
        """Single-head scaled dot-product self-attention over [T,H]."""
        hdim = self.cfg.lstm_hidden
        q = T.matmul(seq, self.params["visual.attn.wq"])
        k = T.matmul(seq, self.params["visual.attn.wk"])
        v = T.matmul(seq, self.params["visual.attn.wv"])
        scores = T.scale(T.matmul(q, T.transpose(k)), 1.0 / math.sqrt(hdim))
        attn = T.softmax(scores, axis=-1)                 # rows sum to 1
        cache["attention"] = attn
        return T.matmul(attn, v)

    def auditory_stream(self, mfcc_mat: np.ndarray, mode: str, cache: dict) -> Tensor:
        cfg = self.cfg
        m = np.asarray(mfcc_mat, dtype=self.dtype)
        if m.ndim != 2:
            raise InputError(f"auditory stream needs a 2-D MFCC matrix, got {m.shape}")
        if m.shape != cfg.audio_input_shape:
            raise DimensionError(
                f"MFCC matrix {m.shape} does not match configured {cfg.audio_input_shape}")
        x = Tensor((m[None] * cfg.audio_input_scale).astype(self.dtype))
        h, w = cfg.audio_input_shape
        for i in range(1, 5):
            (kh, kw), (sh, sw) = cfg.audio_kernels[i - 1]
            ph, pw = _audio_pad(kh, kw, sh, sw, h, w)
            x = T.relu(T.conv2d(x, self.params[f"audio.conv{i}.weight"],
                                self.params[f"audio.conv{i}.bias"],
                                stride=(sh, sw), padding=(ph, pw)))
            h = (h + 2 * ph - kh) // sh + 1
            w = (w + 2 * pw - kw) // sw + 1
        x, _ = T.maxpool2d(x, (min(cfg.audio_pool[0], h), min(cfg.audio_pool[1], w)))
        flat = T.reshape(x, (int(np.prod(x.shape)),))
        return T.dense(flat, self.params["audio.dense.weight"], self.params["audio.dense.bias"])

    def proprio_stream(self, trace: np.ndarray, mode: str, cache: dict) -> Tensor:
        cfg = self.cfg
        g = np.asarray(trace, dtype=self.dtype)
        if g.ndim != 2 or g.shape[1] != 2:
            raise InputError(f"proprio stream needs [T_p,2] (openness, force), got {g.shape}")
        if g.shape[0] != cfg.proprio_len:
            raise DimensionError(f"proprio trace length {g.shape[0]} != configured {cfg.proprio_len}")
        if g.shape[0] < cfg.proprio_kernel:
            raise DimensionError("proprio trace shorter than the conv kernel")
        x = Tensor(np.ascontiguousarray(g.T[:, :, None]))   # [2, T_p, 1]
        pad = cfg.proprio_kernel // 2
        for i in range(1, len(cfg.proprio_channels) + 1):
            x = T.relu(T.conv2d(x, self.params[f"proprio.conv{i}.weight"],
                                self.params[f"proprio.conv{i}.bias"],
                                stride=(1, 1), padding=(pad, 0)))
        x, _ = T.maxpool2d(x, (min(2, x.shape[1]), 1))
        flat = T.reshape(x, (int(np.prod(x.shape)),))
        out = T.dense(flat, self.params["proprio.dense.weight"], self.params["proprio.dense.bias"])
        if mode == "train" and cfg.dropout_proprio > 0:
            out = T.dropout(out, cfg.dropout_proprio, mode, self._dropout_rng)
        return out

    def fuse_and_classify(self, parts: list[Tensor], mode: str, cache: dict) -> Tensor:
        cfg = self.cfg
        fused = T.concat(parts, axis=0) if len(parts) > 1 else parts[0]
        if fused.shape != (cfg.fused_dim,):
            raise ConfigError(f"fused vector {fused.shape} != configured ({cfg.fused_dim},)")
        cache["fused"] = fused
        h = T.dense(fused, self.params["fusion.dense1.weight"], self.params["fusion.dense1.bias"])
        if mode == "train" and cfg.dropout_fusion > 0:
            h = T.dropout(h, cfg.dropout_fusion, mode, self._dropout_rng)
        logits = T.dense(h, self.params["fusion.dense2.weight"], self.params["fusion.dense2.bias"])
        cache["logits"] = logits
        probs = T.softmax(logits)
        cache["probs"] = probs
        return probs

    # -- full pass ----------------------------------------------------------

    def forward(self, inputs: ModelInputs, mode: str = "eval",
                visual_conv_delta: np.ndarray | None = None) -> ForwardResult:
        if mode not in ("train", "eval"):
            raise InputError(f"mode must be train or eval, got {mode!r}")
        cfg = self.cfg
        cache: dict = {}
        parts: list[Tensor] = []
        r_v = r_a = r_p = None
        if cfg.use_visual:
            if inputs.frames is None:
                raise InputError("visual stream enabled but no frames given")
            v = self.visual_stream(inputs.frames, mode, cache, conv_delta=visual_conv_delta)
            parts.append(v)
            r_v = v.data
        if cfg.use_audio:
            if inputs.mfcc is None:
                raise InputError("auditory stream enabled but no MFCC matrix given")
            a = self.auditory_stream(inputs.mfcc, mode, cache)
            parts.append(a)
            r_a = a.data
        if cfg.use_proprio:
            if inputs.proprio is None:
                raise InputError("proprioceptive stream enabled but no gripper trace given")
            p = self.proprio_stream(inputs.proprio, mode, cache)
            parts.append(p)
            r_p = p.data
        probs = self.fuse_and_classify(parts, mode, cache)
        logits = cache["logits"].data
        pred = Prediction(logits=logits.copy(), probs=probs.data.copy(),
                          predicted=int(np.argmax(probs.data)))
        feats = StreamFeatures(r_v=r_v, r_a=r_a, r_p=r_p, r_fused=cache["fused"].data.copy())
        return ForwardResult(pred, feats, cache)

    # -- persistence ----------------------------------------------------------

    def save_weights(self, directory):
        from .manifest import export_weights
        export_weights(self.params, directory)

    def load_weights(self, directory):
        from .manifest import import_weights
        import_weights(self.params, directory)
        if self.backbone is not None:
            # backbone params are shared objects; refresh its view after import
            for name in self.backbone.params:
                self.backbone.params[name] = self.params[f"visual.backbone.{name}"]
        return self


def model_forward(model: ClueModel, inputs: ModelInputs, mode: str = "eval"):
    """Spec-shaped entry point: returns (Prediction, StreamFeatures)."""
    res = model.forward(inputs, mode=mode)
    return res.prediction, res.features


def desk_config(**overrides) -> ModelConfig:
    """Desk-scale trimodal default: trains from scratch on a CPU in minutes
    while keeping every dimension relationship of the full-size model."""
    return ModelConfig(**overrides)


def paper_config(**overrides) -> ModelConfig:
    """Full-size instantiation: VGG16 trunk at 224 px, hidden size 512, so
    the stream widths come out at (1024, 64, 64) and 1152 fused."""
    base = dict(
        backbone=BackboneConfig(kind="vgg16", width_multiplier=1.0, input_size=224),
        lstm_hidden=512,
    )
    base.update(overrides)
    return ModelConfig(**base)
