"""Flat key=value run configuration.

One namespace covers model, training, MFCC and generator settings.  Files
hold one `key=value` per line ('#' starts a comment); command-line
overrides use the same syntax.  Unknown keys fail before any work starts,
and every run echoes its fully resolved configuration so it can be
reproduced from that file alone.
"""
from __future__ import annotations

from pathlib import Path

from .audio import MfccParams, n_frames_for
from .backbones import BackboneConfig
from .datagen import GenParams
from .errors import ConfigError
from .model import ModelConfig, RECT_AUDIO_KERNELS, SQUARE_AUDIO_KERNELS


def _parse_bool(s: str) -> bool:
    if s in ("on", "true", "1", "yes"):
        return True
    if s in ("off", "false", "0", "no"):
        return False
    raise ConfigError(f"expected on/off, got {s!r}")


def _parse_ints(s: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in s.split(",") if x != "")
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {s!r}") from None


def _parse_floats(s: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in s.split(",") if x != "")
    except ValueError:
        raise ConfigError(f"expected comma-separated floats, got {s!r}") from None


def _parse_pair(s: str) -> tuple[int, int]:
    parts = s.lower().split("x")
    if len(parts) != 2:
        raise ConfigError(f"expected HxW, got {s!r}")
    return int(parts[0]), int(parts[1])


def _parse_choice(options):
    def parse(s):
        if s not in options:
            raise ConfigError(f"expected one of {options}, got {s!r}")
        return s
    return parse


def _parse_modality(s: str) -> tuple[bool, bool, bool]:
    parts = [p for p in s.split(",") if p]
    bad = [p for p in parts if p not in ("v", "a", "p")]
    if bad or not parts:
        raise ConfigError(f"modality must be a non-empty subset of v,a,p, got {s!r}")
    return ("v" in parts, "a" in parts, "p" in parts)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, tuple):
        if value and isinstance(value[0], bool):       # modality mask
            return ",".join(n for n, b in zip(("v", "a", "p"), value) if b)
        if len(value) == 2 and all(isinstance(v, int) for v in value):
            return f"{value[0]}x{value[1]}"
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


# key -> (default value, parser)
KNOWN = {
    # model
    "backbone": ("vgg16", _parse_choice(("vgg16", "alexnet", "resnet18"))),
    "width_mult": (1 / 16, float),
    "input_size": (32, int),
    "avg_pool": (False, _parse_bool),
    "lstm_hidden": (64, int),
    "lstm_layers": (1, int),
    "recurrent": ("lstm", _parse_choice(("lstm", "rnn"))),
    "attention": (True, _parse_bool),
    "modality": ((True, True, True), _parse_modality),
    "audio_kernel": ("3x3", _parse_choice(("3x3", "rect"))),
    "audio_channels": ((8, 16, 32, 32), _parse_ints),
    "audio_pool": ((4, 4), _parse_pair),
    "audio_out": (64, int),
    "audio_scale": (1 / 64, float),
    "proprio_channels": ((16,), _parse_ints),
    "proprio_kernel": (5, int),
    "proprio_out": (64, int),
    "dropout_visual": (0.4, float),
    "dropout_fusion": (0.4, float),
    "dropout_proprio": (0.4, float),
    "fusion_hidden": (256, int),
    # training
    "epochs": (40, int),
    "lr": (1e-4, float),
    "beta1": (0.9, float),
    "beta2": (0.999, float),
    "epsilon": (1e-8, float),
    "train_frac": (0.8, float),
    "sweep_epochs": (15, int),
    "frame_rate_hz": (0.125, float),
    # MFCC front end
    "mfcc_frame_len": (512, int),
    "mfcc_hop": (256, int),
    "mfcc_n_mels": (26, int),
    "mfcc_n_mfcc": (13, int),
    "mfcc_fmin": (0.0, float),
    "mfcc_fmax": (8000.0, float),
    "mfcc_preemphasis": (0.0, float),
    "mfcc_lifter": (0, int),
    # generator
    "gen_size": (32, int),
    "gen_frames": (8, int),
    "gen_duration": (64.0, float),
    "gen_audio_seconds": (1.0, float),
    "gen_sample_rate": (16000, int),
    "gen_proprio_len": (50, int),
    "gen_pixel_noise": (0.012, float),
    "gen_texture_noise": (0.03, float),
}


def resolve(config_file: str | None = None, overrides: list[str] | None = None) -> dict:
    """Defaults, then file entries, then key=value overrides; unknown keys
    raise before any work happens."""
    cfg = {k: v for k, (v, _) in KNOWN.items()}

    def apply(key: str, raw: str, where: str):
        if key not in KNOWN:
            raise ConfigError(f"unknown config key {key!r} ({where})")
        parser = KNOWN[key][1]
        try:
            cfg[key] = parser(raw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad value for {key!r}: {raw!r} ({e})") from None

    if config_file:
        path = Path(config_file)
        if not path.is_file():
            raise ConfigError(f"config file not found: {config_file}")
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"{config_file}:{lineno}: expected key=value")
            key, raw = body.split("=", 1)
            apply(key.strip(), raw.strip(), f"{config_file}:{lineno}")
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, raw = item.split("=", 1)
        apply(key.strip(), raw.strip(), "command line")
    return cfg


def format_resolved(cfg: dict, extra: dict | None = None) -> str:
    lines = ["# resolved configuration (rerun with: --config <this file>)"]
    for k in sorted(cfg):
        lines.append(f"{k}={_fmt(cfg[k])}")
    for k in sorted(extra or {}):
        lines.append(f"# {k}={extra[k]}")
    return "\n".join(lines) + "\n"


def gen_params(cfg: dict) -> GenParams:
    return GenParams(
        S=cfg["gen_size"], T=cfg["gen_frames"], duration=cfg["gen_duration"],
        audio_seconds=cfg["gen_audio_seconds"], sample_rate=cfg["gen_sample_rate"],
        T_p=cfg["gen_proprio_len"], pixel_noise=cfg["gen_pixel_noise"],
        texture_noise=cfg["gen_texture_noise"])


def mfcc_params(cfg: dict) -> MfccParams:
    return MfccParams(
        frame_len=cfg["mfcc_frame_len"], hop=cfg["mfcc_hop"],
        n_mels=cfg["mfcc_n_mels"], n_mfcc=cfg["mfcc_n_mfcc"],
        f_min=cfg["mfcc_fmin"], f_max=cfg["mfcc_fmax"],
        preemphasis=cfg["mfcc_preemphasis"], lifter=cfg["mfcc_lifter"])


def model_config(cfg: dict, data_params: GenParams | None = None) -> ModelConfig:
    """Build the model description; audio/proprio input geometry follows the
    dataset parameters when a dataset is at hand."""
    dp = data_params or gen_params(cfg)
    n_samples = int(dp.audio_seconds * dp.sample_rate)
    n_frames = n_frames_for(n_samples, cfg["mfcc_frame_len"], cfg["mfcc_hop"])
    s_v, s_a, s_p = cfg["modality"]
    return ModelConfig(
        backbone=BackboneConfig(kind=cfg["backbone"], width_multiplier=cfg["width_mult"],
                                input_size=cfg["input_size"], with_avg_pool=cfg["avg_pool"]),
        lstm_hidden=cfg["lstm_hidden"], lstm_layers=cfg["lstm_layers"],
        recurrent_kind=cfg["recurrent"], attention=cfg["attention"],
        use_visual=s_v, use_audio=s_a, use_proprio=s_p,
        audio_channels=tuple(cfg["audio_channels"]),
        audio_kernels=RECT_AUDIO_KERNELS if cfg["audio_kernel"] == "rect" else SQUARE_AUDIO_KERNELS,
        audio_pool=cfg["audio_pool"],
        audio_input_shape=(n_frames, cfg["mfcc_n_mfcc"]),
        audio_input_scale=cfg["audio_scale"],
        audio_out=cfg["audio_out"],
        proprio_channels=tuple(cfg["proprio_channels"]),
        proprio_kernel=cfg["proprio_kernel"], proprio_len=dp.T_p,
        proprio_out=cfg["proprio_out"],
        dropout_visual=cfg["dropout_visual"], dropout_fusion=cfg["dropout_fusion"],
        dropout_proprio=cfg["dropout_proprio"],
        fusion_hidden=cfg["fusion_hidden"],
    )
