"""Plain-numpy image helpers: bilinear resize, center crop, binary PPM I/O."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError


def center_crop_square(img: np.ndarray) -> np.ndarray:
    """Crop [C,H,W] to its centered square."""
    _, h, w = img.shape
    side = min(h, w)
    y0 = (h - side) // 2
    x0 = (w - side) // 2
    return img[:, y0:y0 + side, x0:x0 + side]


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of [C,H,W] or [H,W] (half-pixel centers, clamped edges)."""
    squeeze = img.ndim == 2
    if squeeze:
        img = img[None]
    c, h, w = img.shape
    if (h, w) == (out_h, out_w):
        out = img.copy()
        return out[0] if squeeze else out

    sy = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    sx = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    sy = np.clip(sy, 0, h - 1)
    sx = np.clip(sx, 0, w - 1)
    y0 = np.floor(sy).astype(int)
    x0 = np.floor(sx).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (sy - y0)[None, :, None]
    fx = (sx - x0)[None, None, :]

    tl = img[:, y0[:, None], x0[None, :]]
    tr = img[:, y0[:, None], x1[None, :]]
    bl = img[:, y1[:, None], x0[None, :]]
    br = img[:, y1[:, None], x1[None, :]]
    top = tl * (1 - fx) + tr * fx
    bot = bl * (1 - fx) + br * fx
    out = top * (1 - fy) + bot * fy
    return out[0] if squeeze else out


def fit_frame(img: np.ndarray, size: int) -> np.ndarray:
    """Center-crop to square then bilinear-resize to [C,size,size]."""
    return bilinear_resize(center_crop_square(img), size, size)


# ---------------------------------------------------------------------------
# binary PPM (P6, maxval 255)

def write_ppm(img: np.ndarray, path: str | Path):
    """Write [3,H,W] float image in [0,1] as binary P6 (8-bit quantized)."""
    if img.ndim != 3 or img.shape[0] != 3:
        raise FormatError(f"write_ppm expects [3,H,W], got {img.shape}")
    _, h, w = img.shape
    data = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.transpose(1, 2, 0).tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    """Read binary P6 into [3,H,W] float in [0,1] (values are i/255)."""
    path = Path(path)
    raw = path.read_bytes()
    pos = 0

    def fail(msg):
        raise FormatError(f"{path}: byte {pos}: {msg}")

    def token():
        nonlocal pos
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos:pos + 1] == b"#":   # comment to end of line
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            return token()
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            fail("unexpected end of header")
        return raw[start:pos]

    if token() != b"P6":
        fail("not a binary PPM (expected magic 'P6')")
    try:
        w = int(token())
        h = int(token())
        maxval = int(token())
    except ValueError:
        fail("non-numeric header field")
    if maxval != 255:
        fail(f"unsupported maxval {maxval} (expected 255)")
    pos += 1                                              # single whitespace after maxval
    need = w * h * 3
    if len(raw) - pos < need:
        fail(f"truncated pixel data ({len(raw) - pos} of {need} bytes)")
    pix = np.frombuffer(raw[pos:pos + need], dtype=np.uint8)
    return pix.reshape(h, w, 3).transpose(2, 0, 1).astype(np.float64) / 255.0
