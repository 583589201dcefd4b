"""Weight manifest: one TSV index plus one raw binary file per parameter.

Layout of a manifest directory:

    manifest.tsv     rows: name<TAB>dtype<TAB>dim0,dim1,...<TAB>relative_path
    <name>.bin       little-endian, row-major raw values

Loading verifies that names, shapes and dtypes match the receiving model
exactly; anything missing, extra or mismatched is an error that names the
offending parameter.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import FormatError, ManifestError
from .tensor import Parameter

_DTYPE_CODES = {"float32": "<f4", "float64": "<f8"}


def _bin_name(name: str) -> str:
    return name.replace("/", "_") + ".bin"


def export_weights(params: dict[str, Parameter], out_dir: str | Path):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for name, p in params.items():
        rel = _bin_name(name)
        dtype = p.dtype.name
        if dtype not in _DTYPE_CODES:
            raise ManifestError(f"parameter {name} has unsupported dtype {dtype}")
        (out_dir / rel).write_bytes(np.ascontiguousarray(p.data).astype(_DTYPE_CODES[dtype]).tobytes())
        dims = ",".join(str(d) for d in p.data.shape)
        lines.append(f"{name}\t{dtype}\t{dims}\t{rel}")
    (out_dir / "manifest.tsv").write_text("\n".join(lines) + "\n")


def read_manifest(directory: str | Path) -> list[tuple[str, str, tuple[int, ...], str]]:
    directory = Path(directory)
    path = directory / "manifest.tsv"
    if not path.is_file():
        raise FormatError(f"no manifest.tsv in {directory}")
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise FormatError(f"{path}: line {lineno}: expected 4 tab-separated fields")
        name, dtype, dims, rel = parts
        if dtype not in _DTYPE_CODES:
            raise FormatError(f"{path}: line {lineno}: unknown dtype {dtype!r}")
        try:
            shape = tuple(int(d) for d in dims.split(",")) if dims else ()
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: bad dims field {dims!r}") from None
        rows.append((name, dtype, shape, rel))
    return rows


def import_weights(params: dict[str, Parameter], directory: str | Path):
    """Overwrite every parameter value from a manifest directory."""
    directory = Path(directory)
    rows = read_manifest(directory)
    seen = {r[0] for r in rows}
    wanted = set(params)
    missing = sorted(wanted - seen)
    extra = sorted(seen - wanted)
    if missing:
        raise ManifestError(f"manifest is missing parameter {missing[0]!r}")
    if extra:
        raise ManifestError(f"manifest has unknown parameter {extra[0]!r}")

    for name, dtype, shape, rel in rows:
        p = params[name]
        if shape != p.data.shape:
            raise ManifestError(
                f"shape mismatch for {name!r}: manifest {shape}, model {p.data.shape}")
        if dtype != p.dtype.name:
            raise ManifestError(
                f"dtype mismatch for {name!r}: manifest {dtype}, model {p.dtype.name}")
        fpath = directory / rel
        if not fpath.is_file():
            raise ManifestError(f"missing weight file {rel!r} for parameter {name!r}")
        raw = np.frombuffer(fpath.read_bytes(), dtype=_DTYPE_CODES[dtype])
        expected = int(np.prod(shape)) if shape else 1
        if raw.size != expected:
            raise ManifestError(
                f"weight file {rel!r} holds {raw.size} values, expected {expected}")
        p.data = np.ascontiguousarray(raw.reshape(shape).astype(p.dtype))
        p.grad = np.zeros_like(p.data)
