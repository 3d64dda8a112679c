"""File formats: binary PGM images, dictionary/sample-matrix pairs, and
corpus manifests.

A matrix on disk is a two-file pair sharing a path prefix:
  <prefix>.json  -- metadata: m, n, block list, optional sample fields
  <prefix>.f64   -- raw little-endian float64 values, column-major
"""

from __future__ import annotations

import json
import os

import numpy as np

from .core import Block, BlockedDictionary, ImageGrid
from .errors import OcclucodeError


class FormatError(OcclucodeError):
    """Malformed file contents."""


# ---------------------------------------------------------------------------
# PGM (portable graymap, binary "P5", maxval 255)


def write_pgm(path: str, img: ImageGrid) -> None:
    data = np.rint(img.values * 255.0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_pgm(path: str) -> ImageGrid:
    with open(path, "rb") as f:
        raw = f.read()
    if not raw.startswith(b"P5"):
        raise FormatError(f"{path}: not a binary PGM (missing P5 magic)")
    # header: magic, width, height, maxval; '#' comments allowed
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    if len(raw) - pos < width * height:
        raise FormatError(f"{path}: truncated pixel data")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=pos)
    return ImageGrid(height, width, pixels.reshape(height, width) / 255.0)


# ---------------------------------------------------------------------------
# matrix pairs


def save_matrix(prefix: str, mat: np.ndarray, blocks=None, extra: dict | None = None):
    m, n = mat.shape
    meta = {"m": int(m), "n": int(n)}
    if blocks is not None:
        meta["blocks"] = [
            {"label": b.label, "kind": b.kind, "start": b.start, "stop": b.stop}
            for b in blocks
        ]
    if extra:
        meta.update(extra)
    with open(prefix + ".json", "w") as f:
        json.dump(meta, f, indent=1, sort_keys=True)
        f.write("\n")
    np.asarray(mat, dtype="<f8").T.tofile(prefix + ".f64")  # column-major


def load_matrix(prefix: str) -> tuple[np.ndarray, dict]:
    with open(prefix + ".json") as f:
        meta = json.load(f)
    m, n = meta["m"], meta["n"]
    data = np.fromfile(prefix + ".f64", dtype="<f8")
    if data.size != m * n:
        raise FormatError(f"{prefix}.f64: expected {m * n} values, found {data.size}")
    return data.reshape(n, m).T.copy(), meta


def save_dictionary(prefix: str, dictionary: BlockedDictionary) -> None:
    save_matrix(prefix, dictionary.atoms, dictionary.blocks)


def load_dictionary(prefix: str) -> BlockedDictionary:
    mat, meta = load_matrix(prefix)
    if "blocks" not in meta:
        raise FormatError(f"{prefix}.json: missing block list")
    blocks = tuple(
        Block(b["label"], b["kind"], b["start"], b["stop"]) for b in meta["blocks"]
    )
    return BlockedDictionary(mat, blocks)


# ---------------------------------------------------------------------------
# corpus manifest

MANIFEST_FIELDS = ("path", "face_label", "occlusion_label", "mask_path", "role")
MANIFEST_NAME = "manifest.txt"


def write_manifest(corpus_dir: str, rows: list[dict]) -> str:
    path = os.path.join(corpus_dir, MANIFEST_NAME)
    with open(path, "w") as f:
        f.write("\t".join(MANIFEST_FIELDS) + "\n")
        for row in rows:
            f.write("\t".join(str(row.get(k, "-")) for k in MANIFEST_FIELDS) + "\n")
    return path


def read_manifest(corpus_dir: str) -> list[dict]:
    path = os.path.join(corpus_dir, MANIFEST_NAME)
    if not os.path.exists(path):
        raise FormatError(f"no {MANIFEST_NAME} in {corpus_dir}")
    with open(path) as f:
        header = f.readline().rstrip("\n").split("\t")
        if tuple(header) != MANIFEST_FIELDS:
            raise FormatError(f"{path}: unexpected manifest header {header}")
        rows = []
        for line in f:
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != len(MANIFEST_FIELDS):
                raise FormatError(f"{path}: bad manifest row: {line!r}")
            rows.append(dict(zip(MANIFEST_FIELDS, parts)))
    return rows
