"""Gradient-weighted class activation maps over the visual backbone.

The map for class y on frame t weights the last conv layer's channels by
the spatial mean of dy/dA (gradient taken through fusion, attention and
the recurrence), clamps the weighted sum at zero, min-max normalizes and
bilinearly upsamples to the input size.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor as T
from .errors import DimensionError, InputError
from .imageops import bilinear_resize, write_ppm
from .model import ClueModel, ModelInputs


@dataclass
class ActivationMap:
    values: np.ndarray            # [h,w] in [0,1]
    target_class: int
    frame_index: int
    upsampled: np.ndarray         # [S,S] in [0,1]
    flagged_zero: bool            # all gradient-weighted activations were <= 0
    channel_weights: np.ndarray   # alpha_k, for diagnostics


def grad_cam(model: ClueModel, inputs: ModelInputs, target_class: int,
             frame_index: int, layer: str = "last_conv") -> ActivationMap:
    """Full forward on the episode, backward from the target class logit.

    `layer` picks the conv map the weighting runs over; the default is the
    trunk's final conv.  At small input sizes that map is only 2x2 with a
    near-global receptive field, so localization analyses usually pass a
    mid-depth name instead (e.g. "conv07" for the VGG trunk)."""
    if not model.cfg.use_visual:
        raise InputError("grad_cam needs the visual stream enabled")
    frames = inputs.frames
    if frames is None:
        raise InputError("grad_cam needs frames")
    if not 0 <= frame_index < frames.shape[0]:
        raise InputError(f"frame_index {frame_index} out of range for {frames.shape[0]} frames")
    if not 0 <= target_class < model.cfg.num_classes:
        raise InputError(f"target class {target_class} out of range")

    model.zero_grad()
    res = model.forward(inputs, mode="eval")
    logits = res.cache["logits"]
    score = T.narrow(logits, 0, target_class, 1)
    score.backward()

    if layer not in res.cache:
        known = sorted(k for k in res.cache if k.startswith(("conv", "stage", "last")))
        raise InputError(f"unknown activation layer {layer!r}; available: {known}")
    act_node = res.cache[layer]                    # [T,C,h,w]
    acts = act_node.data[frame_index]
    grads = (act_node.grad[frame_index] if act_node.grad is not None
             else np.zeros_like(acts))
    alpha = grads.mean(axis=(1, 2))                # [C]
    cam = np.maximum((alpha[:, None, None] * acts).sum(axis=0), 0.0)

    lo, hi = float(cam.min()), float(cam.max())
    flagged = hi <= lo
    values = np.zeros_like(cam) if flagged else (cam - lo) / (hi - lo)
    size = model.cfg.backbone.input_size
    upsampled = bilinear_resize(values, size, size)
    return ActivationMap(values=values, target_class=target_class,
                         frame_index=frame_index, upsampled=upsampled,
                         flagged_zero=flagged, channel_weights=alpha)


def quadrant_mass_fraction(cam: ActivationMap, quadrant: str) -> float:
    """Share of upsampled CAM mass inside one quadrant (TL/TR/BL/BR)."""
    up = cam.upsampled
    total = float(up.sum())
    if total <= 0:
        return 0.0
    half = up.shape[0] // 2
    rows = slice(0, half) if quadrant[0] == "T" else slice(half, None)
    cols = slice(0, half) if quadrant[1] == "L" else slice(half, None)
    return float(up[rows, cols].sum()) / total


def overlay(cam: ActivationMap, frame: np.ndarray) -> np.ndarray:
    """Blend the frame 50/50 with a blue-to-red colormap of the map."""
    if frame.shape[-2:] != cam.upsampled.shape:
        raise DimensionError(
            f"frame {frame.shape} does not match map {cam.upsampled.shape}")
    v = cam.upsampled
    heat = np.stack([v, np.zeros_like(v), 1.0 - v])
    return 0.5 * frame + 0.5 * heat


def save_map(cam: ActivationMap, frame: np.ndarray, out_dir: str | Path,
             episode_id: str, class_name: str):
    """Write the Fig-9-style artifacts: overlay PPM plus raw map TSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"cam_{episode_id}_{class_name}_{cam.frame_index}"
    write_ppm(overlay(cam, frame), out_dir / f"{stem}.ppm")
    lines = ["\t".join(f"{v:.6f}" for v in row) for row in cam.values]
    (out_dir / f"{stem}.tsv").write_text("\n".join(lines) + "\n")
    return out_dir / f"{stem}.ppm", out_dir / f"{stem}.tsv"
