"""Seeded synthetic multimodal episodes mirroring the 7-class anomaly layout.

Each class gets a distinct multimodal signature rendered with plain
arithmetic (anti-aliased discs and rectangles on a textured background):

    SAFE  object blob glides smoothly; silent audio; neutral grip profile
    LOC   blob teleports mid-sequence; silent audio; neutral grip
    DIS   blob vanishes mid-sequence; silent audio; neutral grip
    EUA   stacked column scatters late; loud broadband burst; force drop
    OTA   blob elongates/rotates while pushed; single thud; force spike
    SPC   small blobs spill out of a container; granular burst train; neutral grip
    FCA   one blob exits the container and lands outside; thud; brief spike

SAFE, LOC, DIS and SPC share the same grip-profile family on purpose, so
the proprioceptive channel alone cannot separate them; audio is silent for
SAFE/LOC/DIS so those three are separable only visually.  The frame
quadrant where the discriminative event lands is recorded as
`signal_region` together with the event frame index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import Waveform, read_wav, write_wav
from .errors import ConfigError, DataError, FormatError, InputError
from .imageops import read_ppm, write_ppm

CLASSES = ("SAFE", "LOC", "DIS", "EUA", "OTA", "SPC", "FCA")
CLASS_INDEX = {c: i for i, c in enumerate(CLASSES)}
PAPER_COUNTS = {"SAFE": 68, "LOC": 22, "DIS": 41, "EUA": 33, "OTA": 18, "SPC": 43, "FCA": 24}
QUADRANTS = ("TL", "TR", "BL", "BR")


@dataclass
class GenParams:
    S: int = 32                   # square frame size
    T: int = 8                    # frames per episode
    duration: float = 64.0        # seconds covered by the frames (0.125 Hz)
    audio_seconds: float = 1.0
    sample_rate: int = 16000
    T_p: int = 50                 # proprio samples
    pixel_noise: float = 0.012
    texture_noise: float = 0.03

    def validate(self):
        if self.S < 16 or self.T < 2 or self.T_p < 10:
            raise ConfigError("generator needs S >= 16, T >= 2, T_p >= 10")
        if self.audio_seconds * self.sample_rate < 1024:
            raise ConfigError("audio clip too short for MFCC analysis")

    def timestamps(self) -> np.ndarray:
        return np.arange(self.T) * (self.duration / self.T)

    def as_dict(self) -> dict:
        return {"S": self.S, "T": self.T, "duration": self.duration,
                "audio_seconds": self.audio_seconds, "sample_rate": self.sample_rate,
                "T_p": self.T_p, "pixel_noise": self.pixel_noise,
                "texture_noise": self.texture_noise}


@dataclass
class Episode:
    id: str
    label: str
    frames: np.ndarray            # [T,3,S,S] in [0,1]
    frame_timestamps: np.ndarray  # seconds, strictly ascending
    audio: Waveform
    proprio: np.ndarray           # [T_p,2]: openness, normalized force
    seed: int
    signal_region: str            # quadrant tag of the discriminative event
    event_frame: int


def quadrant_of(x: float, y: float, size: int) -> str:
    half = size / 2.0
    if y < half:
        return "TL" if x < half else "TR"
    return "BL" if x < half else "BR"


# ---------------------------------------------------------------------------
# rendering primitives (pure arithmetic, anti-aliased)

def _grid(size: int):
    yy, xx = np.mgrid[0:size, 0:size]
    return xx.astype(np.float64), yy.astype(np.float64)


def _paint(img, coverage, color):
    cov = np.clip(coverage, 0.0, 1.0)
    for ch in range(3):
        img[ch] = img[ch] * (1.0 - cov) + color[ch] * cov


def draw_disc(img, cx, cy, r, color):
    xx, yy = _grid(img.shape[-1])
    dist = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
    _paint(img, r + 0.5 - dist, color)


def draw_ellipse(img, cx, cy, a, b, theta, color):
    xx, yy = _grid(img.shape[-1])
    dx, dy = xx - cx, yy - cy
    u = (dx * math.cos(theta) + dy * math.sin(theta)) / max(a, 0.5)
    v = (-dx * math.sin(theta) + dy * math.cos(theta)) / max(b, 0.5)
    q = np.sqrt(u * u + v * v)
    _paint(img, (1.0 - q) * max(a, b) + 0.5, color)


def draw_rect(img, x0, y0, x1, y1, color):
    xx, yy = _grid(img.shape[-1])
    covx = np.clip(np.minimum(xx - x0 + 0.5, x1 - xx + 0.5), 0.0, 1.0)
    covy = np.clip(np.minimum(yy - y0 + 0.5, y1 - yy + 0.5), 0.0, 1.0)
    _paint(img, covx * covy, color)


def _background(rng: np.random.Generator, p: GenParams) -> np.ndarray:
    img = np.empty((3, p.S, p.S))
    _, yy = _grid(p.S)
    base = 0.42 + 0.08 * (yy / p.S)
    for ch, tint in enumerate((1.0, 0.98, 0.94)):
        img[ch] = base * tint
    img += rng.normal(0.0, p.texture_noise, size=(3, p.S, p.S))
    return np.clip(img, 0.0, 1.0)


def _object_color(rng) -> tuple:
    return (0.85 + rng.uniform(-0.04, 0.05),
            0.16 + rng.uniform(-0.04, 0.04),
            0.12 + rng.uniform(-0.04, 0.04))

CONTAINER_COLOR = (0.30, 0.34, 0.48)


def _rand_point(rng, p: GenParams, margin: float = 0.2) -> np.ndarray:
    return rng.uniform(margin * p.S, (1 - margin) * p.S, size=2)


FILLER_COLOR = (0.62, 0.52, 0.30)     # dull contents, distinct from object red


def _quadrant_point(rng, p: GenParams, quad: str, margin: float = 0.12) -> np.ndarray:
    """A point inside `quad`, at least margin*S away from the quadrant split."""
    half = p.S / 2.0
    lo, hi = margin * p.S, half - margin * p.S
    x = rng.uniform(lo, hi)
    y = rng.uniform(lo, hi)
    if quad in ("TR", "BR"):
        x += half
    if quad in ("BL", "BR"):
        y += half
    return np.array([x, y])


# ---------------------------------------------------------------------------
# audio and grip profiles

def _audio_floor(rng, n):
    return rng.normal(0.0, 0.004, size=n)


def _audio_burst(rng, n, rate):
    sig = _audio_floor(rng, n)
    start = int(rng.uniform(0.2, 0.4) * rate)
    length = int(0.35 * rate)
    env = np.hanning(length)
    sig[start:start + length] += 0.5 * env * rng.normal(0.0, 1.0, size=length)
    return sig


def _audio_thud(rng, n, rate):
    sig = _audio_floor(rng, n)
    t0 = int(rng.uniform(0.3, 0.5) * rate)
    t = np.arange(n - t0) / rate
    f = rng.uniform(140.0, 260.0)
    body = np.exp(-t / 0.07) * (np.sin(2 * np.pi * f * t) + 0.3 * np.sin(4 * np.pi * f * t))
    sig[t0:] += 0.55 * body
    return sig


def _audio_granular(rng, n, rate):
    sig = _audio_floor(rng, n)
    for _ in range(int(rng.integers(6, 10))):
        start = int(rng.uniform(0.05, 0.9) * rate)
        length = int(rng.uniform(0.008, 0.02) * rate)
        stop = min(start + length, n)
        sig[start:stop] += 0.22 * np.hanning(stop - start) * rng.normal(0.0, 1.0, size=stop - start)
    return sig


def _grip_neutral(rng, n):
    k = np.arange(n)
    openness = 0.32 + 0.68 / (1.0 + np.exp((k - 12) / 2.0))
    force = 0.05 + 0.50 / (1.0 + np.exp(-(k - 16) / 2.5))
    return openness, force


def _grip(rng, label: str, n: int, event_sample: int):
    openness, force = _grip_neutral(rng, n)
    k = np.arange(n)
    if label == "EUA":
        drop = k >= event_sample
        force = np.where(drop, 0.08 + (force - 0.08) * np.exp(-(k - event_sample) / 2.0), force)
    elif label == "OTA":
        force = force + 0.38 * np.exp(-0.5 * ((k - event_sample) / 2.2) ** 2)
    elif label == "FCA":
        force = force + 0.32 * np.exp(-0.5 * ((k - event_sample) / 1.1) ** 2)
    trace = np.stack([openness, force], axis=1)
    trace += rng.normal(0.0, 0.01, size=trace.shape)
    return np.clip(trace, 0.0, 1.0)


# ---------------------------------------------------------------------------
# per-class storyboards
#
# Every scene contains one container (a table fixture common to all seven
# classes, so its mere presence carries no class information) plus the
# class-specific object story.

def _scene(rng, p: GenParams, container_center) -> np.ndarray:
    img = _background(rng, p)
    _draw_container(img, _container_box(p, container_center))
    return img


def _frames_basic_motion(rng, p, container, jump_at=None, vanish_at=None):
    """Shared renderer for SAFE / LOC / DIS: one blob on a path."""
    color = _object_color(rng)
    r = 0.09 * p.S * rng.uniform(0.9, 1.15)
    p0 = _rand_point(rng, p)
    while True:
        p1 = _rand_point(rng, p)
        if np.linalg.norm(p1 - p0) > 0.35 * p.S:
            break
    frames = []
    pos_at_event = p0
    for t in range(p.T):
        img = _scene(rng, p, container)
        frac = t / max(p.T - 1, 1)
        pos = p0 + (p1 - p0) * frac
        if jump_at is not None and t >= jump_at:
            pos = pos + np.array([p.S * 0.45, -p.S * 0.35]) * (1 if p0[0] < p.S / 2 else -1)
            pos = np.clip(pos, 0.1 * p.S, 0.9 * p.S)
            if t == jump_at:
                pos_at_event = pos
        if vanish_at is None or t < vanish_at:
            draw_disc(img, pos[0], pos[1], r, color)
            if vanish_at is not None:
                pos_at_event = pos
        frames.append(img)
    return frames, pos_at_event


def _gen_safe(rng, p):
    container = _rand_point(rng, p, margin=0.3)
    frames, pos = _frames_basic_motion(rng, p, container)
    return frames, pos, p.T - 1


def _gen_loc(rng, p):
    container = _rand_point(rng, p, margin=0.3)
    j = int(rng.integers(p.T // 2 - 1, p.T // 2 + 2))
    frames, pos = _frames_basic_motion(rng, p, container, jump_at=j)
    return frames, pos, j


def _gen_dis(rng, p):
    container = _rand_point(rng, p, margin=0.3)
    j = int(rng.integers(p.T // 2 - 1, p.T // 2 + 2))
    frames, pos = _frames_basic_motion(rng, p, container, vanish_at=j)
    return frames, pos, j


def _gen_eua(rng, p):
    color = _object_color(rng)
    r = 0.07 * p.S
    cquad, squad = rng.choice(QUADRANTS, size=2, replace=False)
    container = _quadrant_point(rng, p, cquad, margin=0.16)
    center = _quadrant_point(rng, p, squad, margin=0.18)
    j = int(rng.integers(p.T // 2, p.T // 2 + 2))
    offsets = rng.uniform(-1.0, 1.0, size=(3, 2))
    offsets[:, 1] = np.abs(offsets[:, 1])          # debris falls downward
    offsets = offsets * 0.18 * p.S + np.array([0.0, 0.04 * p.S])
    frames = []
    for t in range(p.T):
        img = _scene(rng, p, container)
        sway = 0.3 * math.sin(t * 1.3)
        if t < j:
            for i in range(3):
                draw_disc(img, center[0] + sway * i, center[1] - 1.9 * r * i, r, color)
        else:
            for i in range(3):
                q = center + offsets[i]
                draw_disc(img, q[0], q[1], r, color)
        frames.append(img)
    return frames, center, j


def _gen_ota(rng, p):
    color = _object_color(rng)
    r = 0.09 * p.S
    container = _rand_point(rng, p, margin=0.3)
    start = _rand_point(rng, p, margin=0.25)
    direction = np.array([1.0 if start[0] < p.S / 2 else -1.0, 0.0])
    j = int(rng.integers(p.T // 2, p.T // 2 + 2))
    frames = []
    pos_event = start
    for t in range(p.T):
        img = _scene(rng, p, container)
        pos = start + direction * (0.04 * p.S) * t
        k = max(0, t - j + 1)
        ecc = min(k * 0.45, 1.0)
        draw_ellipse(img, pos[0], pos[1], r * (1 + 0.9 * ecc), r * (1 - 0.45 * ecc),
                     ecc * 0.9, color)
        if t == j:
            pos_event = pos
        frames.append(img)
    return frames, pos_event, j


def _container_box(p, center):
    w, h = 0.20 * p.S, 0.13 * p.S
    return center[0] - w, center[1] - h, center[0] + w, center[1] + h


def _draw_container(img, box):
    x0, y0, x1, y1 = box
    draw_rect(img, x0, y0, x1, y1, CONTAINER_COLOR)
    draw_rect(img, x0 + 1.2, y0 + 1.2, x1 - 1.2, y1 - 1.2, (0.22, 0.25, 0.38))


def _gen_spc(rng, p):
    cquad, squad = rng.choice(QUADRANTS, size=2, replace=False)
    center = _quadrant_point(rng, p, cquad, margin=0.16)
    spill_center = _quadrant_point(rng, p, squad, margin=0.16)
    color = _object_color(rng)
    j = int(rng.integers(p.T // 2, p.T // 2 + 2))
    n_spill = int(rng.integers(5, 9))
    spots = spill_center + rng.normal(0.0, 0.07 * p.S, size=(n_spill, 2))
    frames = []
    for t in range(p.T):
        img = _scene(rng, p, center)
        for i in range(3):
            draw_disc(img, center[0] + (i - 1) * 1.6, center[1] - 0.4, 1.3, FILLER_COLOR)
        if t >= j:
            grown = min(n_spill, 3 + 2 * (t - j + 1))
            for q in spots[:grown]:
                draw_disc(img, q[0], q[1], 1.3, color)
        frames.append(img)
    return frames, spill_center, j


def _gen_fca(rng, p):
    cquad, lquad = rng.choice(QUADRANTS, size=2, replace=False)
    center = _quadrant_point(rng, p, cquad, margin=0.16)
    landing = _quadrant_point(rng, p, lquad, margin=0.16)
    color = _object_color(rng)
    r = 0.10 * p.S
    j = int(rng.integers(p.T // 2, p.T // 2 + 2))
    start = np.array([center[0], 0.08 * p.S])
    frames = []
    for t in range(p.T):
        img = _scene(rng, p, center)
        for i in range(3):
            draw_disc(img, center[0] + (i - 1) * 2.0, center[1], 1.4, FILLER_COLOR)
        if t < j:
            frac = t / max(j, 1)
            pos = start + (np.array([center[0], center[1] - 0.1 * p.S]) - start) * frac
            draw_disc(img, pos[0], pos[1], r, color)
        else:
            draw_disc(img, landing[0], landing[1], r, color)
        frames.append(img)
    return frames, landing, j


_STORYBOARDS = {
    "SAFE": _gen_safe, "LOC": _gen_loc, "DIS": _gen_dis, "EUA": _gen_eua,
    "OTA": _gen_ota, "SPC": _gen_spc, "FCA": _gen_fca,
}

_AUDIO = {
    "SAFE": _audio_floor, "LOC": _audio_floor, "DIS": _audio_floor,
    "EUA": _audio_burst, "OTA": _audio_thud, "SPC": _audio_granular, "FCA": _audio_thud,
}


def generate_episode(label: str, seed: int, params: GenParams | None = None,
                     episode_id: str = "e000") -> Episode:
    """Render one episode; identical (label, seed, params) gives identical bits."""
    if label not in CLASSES:
        raise ConfigError(f"unknown class label {label!r}")
    p = params or GenParams()
    p.validate()
    rng = np.random.default_rng(seed)

    frame_list, event_pos, event_frame = _STORYBOARDS[label](rng, p)
    frames = np.stack(frame_list)
    frames += rng.normal(0.0, p.pixel_noise, size=frames.shape)
    frames = np.clip(frames, 0.0, 1.0)

    n = int(p.audio_seconds * p.sample_rate)
    audio_fn = _AUDIO[label]
    samples = (audio_fn(rng, n) if audio_fn is _audio_floor
               else audio_fn(rng, n, p.sample_rate))
    samples = np.clip(samples, -1.0, 1.0)

    event_sample = int(round((event_frame / max(p.T - 1, 1)) * 0.6 * (p.T_p - 1))) + p.T_p // 4
    proprio = _grip(rng, label, p.T_p, min(event_sample, p.T_p - 4))

    return Episode(
        id=episode_id,
        label=label,
        frames=frames,
        frame_timestamps=p.timestamps(),
        audio=Waveform(samples, p.sample_rate),
        proprio=proprio,
        seed=seed,
        signal_region=quadrant_of(event_pos[0], event_pos[1], p.S),
        event_frame=event_frame,
    )


# ---------------------------------------------------------------------------
# persistence

def save_episode(ep: Episode, directory: str | Path):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(ep.frames.shape[0]):
        write_ppm(ep.frames[i], directory / f"frame_{i:03d}.ppm")
    write_wav(ep.audio, directory / "audio.wav")
    lines = ["t,openness,force"]
    span = ep.frame_timestamps[-1] if len(ep.frame_timestamps) > 1 else 1.0
    times = np.linspace(0.0, float(span), ep.proprio.shape[0])
    for t, (o, f) in zip(times, ep.proprio):
        lines.append(f"{t:.6f},{o:.6f},{f:.6f}")
    (directory / "proprio.csv").write_text("\n".join(lines) + "\n")


def load_proprio_csv(path: Path) -> np.ndarray:
    text = path.read_text().splitlines()
    if not text or text[0].strip() != "t,openness,force":
        raise FormatError(f"{path}: byte 0: expected header 't,openness,force'")
    rows = []
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise FormatError(f"{path}: line {lineno}: expected 3 comma-separated values")
        try:
            rows.append([float(parts[1]), float(parts[2])])
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: non-numeric field") from None
    return np.asarray(rows)


@dataclass
class ManifestRow:
    id: str
    label: str
    path: str
    seed: int
    signal_region: str
    event_frame: int


@dataclass
class DatasetManifest:
    root: Path
    dataset_seed: int
    params: GenParams
    rows: list[ManifestRow] = field(default_factory=list)

    @property
    def counts(self) -> dict[str, int]:
        out = {c: 0 for c in CLASSES}
        for r in self.rows:
            out[r.label] += 1
        return out

    def ids(self) -> list[str]:
        return [r.id for r in self.rows]

    def row(self, episode_id: str) -> ManifestRow:
        for r in self.rows:
            if r.id == episode_id:
                return r
        raise DataError(f"episode id {episode_id!r} not in manifest")

    def load_episode(self, episode_id: str) -> Episode:
        r = self.row(episode_id)
        directory = self.root / r.path
        if not directory.is_dir():
            raise FormatError(f"manifest references missing episode {episode_id!r} at {directory}")
        frame_files = sorted(directory.glob("frame_*.ppm"))
        if not frame_files:
            raise FormatError(f"episode {episode_id!r}: no frames in {directory}")
        frames = np.stack([read_ppm(f) for f in frame_files])
        audio = read_wav(directory / "audio.wav")
        proprio = load_proprio_csv(directory / "proprio.csv")
        p = self.params
        return Episode(
            id=r.id, label=r.label, frames=frames,
            frame_timestamps=p.timestamps(),
            audio=audio, proprio=proprio, seed=r.seed,
            signal_region=r.signal_region, event_frame=r.event_frame,
        )


def episode_seed(dataset_seed: int, label: str, index: int) -> int:
    ss = np.random.SeedSequence([dataset_seed, CLASS_INDEX[label], index])
    return int(ss.generate_state(1)[0])


def generate_dataset(counts: dict[str, int], dataset_seed: int, out_dir: str | Path,
                     params: GenParams | None = None) -> DatasetManifest:
    """Write a full dataset (episode dirs + manifest.tsv); fully deterministic."""
    p = params or GenParams()
    p.validate()
    for c in CLASSES:
        if counts.get(c, 0) < 1:
            raise ConfigError(f"class {c} needs at least 1 episode, got {counts.get(c, 0)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    manifest = DatasetManifest(root=out_dir, dataset_seed=dataset_seed, params=p)
    idx = 0
    for label in CLASSES:
        for k in range(counts[label]):
            eid = f"e{idx:03d}"
            seed = episode_seed(dataset_seed, label, k)
            ep = generate_episode(label, seed, p, episode_id=eid)
            save_episode(ep, out_dir / eid)
            manifest.rows.append(ManifestRow(
                id=eid, label=label, path=eid, seed=seed,
                signal_region=ep.signal_region, event_frame=ep.event_frame))
            idx += 1
    write_manifest(manifest)
    return manifest


def write_manifest(manifest: DatasetManifest):
    lines = ["# clueai dataset manifest", f"# dataset_seed={manifest.dataset_seed}"]
    for k, v in manifest.params.as_dict().items():
        lines.append(f"# {k}={v}")
    lines.append("id\tlabel\tpath\tseed\tsignal_region\tevent_frame")
    for r in manifest.rows:
        lines.append(f"{r.id}\t{r.label}\t{r.path}\t{r.seed}\t{r.signal_region}\t{r.event_frame}")
    (manifest.root / "manifest.tsv").write_text("\n".join(lines) + "\n")


def load_manifest(directory: str | Path) -> DatasetManifest:
    directory = Path(directory)
    path = directory / "manifest.tsv"
    if not path.is_file():
        raise FormatError(f"no manifest.tsv under {directory}")
    meta: dict[str, str] = {}
    rows: list[ManifestRow] = []
    header_seen = False
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                meta[k.strip()] = v.strip()
            continue
        if not header_seen:
            header_seen = True
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise FormatError(f"{path}: line {lineno}: expected 6 tab-separated fields")
        try:
            rows.append(ManifestRow(parts[0], parts[1], parts[2], int(parts[3]),
                                    parts[4], int(parts[5])))
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: bad numeric field") from None
        if parts[1] not in CLASSES:
            raise FormatError(f"{path}: line {lineno}: unknown label {parts[1]!r}")
    params = GenParams(
        S=int(meta.get("S", 32)), T=int(meta.get("T", 8)),
        duration=float(meta.get("duration", 64.0)),
        audio_seconds=float(meta.get("audio_seconds", 1.0)),
        sample_rate=int(meta.get("sample_rate", 16000)),
        T_p=int(meta.get("T_p", 50)),
        pixel_noise=float(meta.get("pixel_noise", 0.012)),
        texture_noise=float(meta.get("texture_noise", 0.03)),
    )
    return DatasetManifest(root=directory, dataset_seed=int(meta.get("dataset_seed", 0)),
                           params=params, rows=rows)


# ---------------------------------------------------------------------------
# frame subsampling, splitting, class weights

def temporal_subsample(frames: np.ndarray, timestamps: np.ndarray, rate_hz: float):
    """Keep the earliest frame inside each 1/rate_hz window (first frame always kept)."""
    if len(frames) == 0 or len(timestamps) == 0:
        raise InputError("temporal_subsample needs at least one frame")
    if len(frames) != len(timestamps):
        raise InputError("frames and timestamps length mismatch")
    ts = np.asarray(timestamps, dtype=np.float64)
    if (np.diff(ts) <= 0).any():
        raise InputError("timestamps must be strictly ascending")
    if rate_hz <= 0:
        raise ConfigError("rate_hz must be > 0")
    window = np.floor((ts - ts[0]) * rate_hz + 1e-9).astype(int)
    keep = np.concatenate([[True], window[1:] != window[:-1]])
    return frames[keep], ts[keep]


def stratified_split(manifest: DatasetManifest, train_frac: float = 0.8,
                     seed: int = 0) -> tuple[list[str], list[str]]:
    """Per-class shuffled split; test size is max(1, round((1-frac) * N_c))."""
    if not 0.0 < train_frac < 1.0:
        raise ConfigError(f"train_frac must be in (0,1), got {train_frac}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 303]))
    train: list[str] = []
    test: list[str] = []
    for label in CLASSES:
        ids = sorted(r.id for r in manifest.rows if r.label == label)
        if len(ids) < 2:
            raise DataError(f"class {label} has {len(ids)} episode(s); need >= 2 to split")
        perm = rng.permutation(len(ids))
        n_test = max(1, int(math.floor((1.0 - train_frac) * len(ids) + 0.5)))
        picks = [ids[i] for i in perm]
        test.extend(picks[:n_test])
        train.extend(picks[n_test:])
    return sorted(train), sorted(test)


def class_weights(manifest_or_counts) -> np.ndarray:
    """Inverse-frequency weights w_c ~ N_total / (K * N_c), rescaled to mean 1."""
    if isinstance(manifest_or_counts, DatasetManifest):
        counts = manifest_or_counts.counts
    else:
        counts = dict(manifest_or_counts)
    n = np.array([counts.get(c, 0) for c in CLASSES], dtype=np.float64)
    if (n <= 0).any():
        missing = CLASSES[int(np.argmin(n))]
        raise DataError(f"class {missing} has no episodes")
    w = n.sum() / (len(CLASSES) * n)
    return w / w.mean()
