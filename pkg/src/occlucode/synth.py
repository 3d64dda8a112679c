"""Deterministic synthetic corpus generation.

Faces are drawn from per-class cones of smooth nonnegative images
(low-pass filtered noise bases combined with positive weights).
Occlusions overwrite a contiguous region with a category-specific
texture; the ground-truth mask is returned alongside. Everything is
keyed on the corpus seed, so regeneration is byte-identical.
"""

from __future__ import annotations

import os
import zlib
from dataclasses import dataclass, field

import numpy as np

from .core import (
    FACE,
    Block,
    BlockedDictionary,
    ImageGrid,
    ImageVector,
    OcclusionMask,
    vectorize,
)
from .errors import BadSpecError, UnknownShapeError
from .imageio import write_manifest, write_pgm

RECTANGLE = "rectangle"
LOWER_BAND = "lower-band"
UPPER_BAND = "upper-band"
REGION_KINDS = (RECTANGLE, LOWER_BAND, UPPER_BAND)


@dataclass(frozen=True)
class OcclusionShape:
    name: str
    region: str  # rectangle | lower-band | upper-band
    fraction: float  # occluded area fraction

    def __post_init__(self):
        if self.region not in REGION_KINDS:
            raise BadSpecError(f"unknown region kind {self.region!r}")
        if not (0 < self.fraction < 1):
            raise BadSpecError("area fraction must lie in (0, 1)")


@dataclass(frozen=True)
class SynthSpec:
    classes: int = 20
    samples_per_class: int = 5
    height: int = 30
    width: int = 24
    subspace_dim: int = 3
    occlusion_shapes: tuple = ()
    noise_sigma: float = 0.0
    seed: int = 0
    test_per_class: int | None = None  # defaults to samples_per_class

    def __post_init__(self):
        if self.classes < 1 or self.samples_per_class < 1:
            raise BadSpecError("need at least one class and one sample")
        if self.height < 4 or self.width < 4:
            raise BadSpecError("grid too small")
        if not (1 <= self.subspace_dim <= self.samples_per_class):
            raise BadSpecError("subspace_dim must be in [1, samples_per_class]")
        if self.noise_sigma < 0:
            raise BadSpecError("noise_sigma must be >= 0")
        object.__setattr__(self, "occlusion_shapes", tuple(self.occlusion_shapes))

    @property
    def n_test(self) -> int:
        return self.test_per_class if self.test_per_class is not None else self.samples_per_class

    def shape_named(self, name: str) -> OcclusionShape:
        for s in self.occlusion_shapes:
            if s.name == name:
                return s
        raise UnknownShapeError(name)

    def class_label(self, i: int) -> str:
        return f"class{i:03d}"


# ---------------------------------------------------------------------------
# face generation

_BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _smooth(img: np.ndarray, passes: int = 2) -> np.ndarray:
    """Separable 5-tap binomial low-pass filtering (reflect boundary)."""
    out = img
    for _ in range(passes):
        for axis in (0, 1):
            padded = np.pad(out, [(2, 2) if a == axis else (0, 0) for a in (0, 1)],
                            mode="reflect")
            out = np.apply_along_axis(
                lambda r: np.convolve(r, _BINOMIAL5, mode="valid"), axis, padded
            )
    return out


def _rng(spec: SynthSpec, *tags) -> np.random.Generator:
    parts = [spec.seed & 0xFFFFFFFF]
    for t in tags:
        if isinstance(t, str):
            parts.append(zlib.crc32(t.encode()))
        else:
            parts.append(int(t) & 0xFFFFFFFF)
    return np.random.default_rng(parts)


def _class_bases(spec: SynthSpec, count: int) -> list[np.ndarray]:
    """One (dim, h, w) stack of smooth nonnegative basis images per class."""
    bases = []
    for i in range(count):
        rng = _rng(spec, "basis", i)
        stack = []
        for _ in range(spec.subspace_dim):
            raw = _smooth(rng.standard_normal((spec.height, spec.width)))
            lo, hi = raw.min(), raw.max()
            stack.append((raw - lo) / (hi - lo) if hi > lo else np.full_like(raw, 0.5))
        bases.append(np.stack(stack))
    return bases


def _draw_face(rng, basis: np.ndarray) -> np.ndarray:
    weights = rng.uniform(0.2, 1.0, size=basis.shape[0])
    img = np.tensordot(weights, basis, axes=1)
    top = img.max()
    return img / top if top > 0 else img


def _faces_for_class(spec, basis, class_idx, purpose, count) -> list[ImageGrid]:
    rng = _rng(spec, purpose, class_idx)
    return [
        ImageGrid(spec.height, spec.width, _draw_face(rng, basis))
        for _ in range(count)
    ]


def generate_gallery(
    spec: SynthSpec,
) -> tuple[BlockedDictionary, list[tuple[ImageVector, str]]]:
    """Training dictionary plus a disjoint labeled test set."""
    bases = _class_bases(spec, spec.classes)
    cols, blocks, test = [], [], []
    pos = 0
    for i, basis in enumerate(bases):
        label = spec.class_label(i)
        for g in _faces_for_class(spec, basis, i, "train", spec.samples_per_class):
            cols.append(vectorize(g, normalize=True).data)
        blocks.append(Block(label, FACE, pos, pos + spec.samples_per_class))
        pos += spec.samples_per_class
        for g in _faces_for_class(spec, basis, i, "test", spec.n_test):
            test.append((vectorize(g), label))
    train = BlockedDictionary(np.stack(cols, axis=1), tuple(blocks))
    return train, test


# ---------------------------------------------------------------------------
# occlusion


def _region_pixels(shape: OcclusionShape, h: int, w: int, rng) -> np.ndarray:
    """Row-major indices of a 4-connected region of exactly floor(f*h*w)
    pixels."""
    m = h * w
    target = int(shape.fraction * m)
    if target == 0:
        return np.empty(0, dtype=int)
    idx = np.arange(m).reshape(h, w)
    if shape.region == LOWER_BAND:
        flat = idx[::-1].ravel()[:target]  # fill bottom rows first
    elif shape.region == UPPER_BAND:
        flat = idx.ravel()[:target]
    else:  # rectangle window placed at a seeded random offset
        wr = min(w, max(int(np.ceil(np.sqrt(target))), int(np.ceil(target / h))))
        hr = int(np.ceil(target / wr))
        r0 = int(rng.integers(0, h - hr + 1))
        c0 = int(rng.integers(0, w - wr + 1))
        window = idx[r0 : r0 + hr, c0 : c0 + wr]
        flat = window.ravel()[:target]
    return flat


def _texture(spec: SynthSpec, shape: OcclusionShape) -> np.ndarray:
    rng = _rng(spec, "texture", shape.name)
    raw = _smooth(rng.standard_normal((spec.height, spec.width)), passes=1)
    lo, hi = raw.min(), raw.max()
    t = (raw - lo) / (hi - lo) if hi > lo else np.full_like(raw, 0.5)
    return 0.1 + 0.85 * t


def apply_occlusion(
    img: ImageVector, shape_name: str, spec: SynthSpec
) -> tuple[ImageVector, OcclusionMask]:
    """Overwrite a contiguous region with the category texture; returns the
    occluded image and its ground-truth mask. Deterministic per image."""
    shape = spec.shape_named(shape_name)
    h, w = img.shape
    rng = _rng(spec, "occlude", shape.name, zlib.crc32(img.data.tobytes()))
    region = _region_pixels(shape, h, w, rng)
    out = img.data.copy()
    out[region] = _texture(spec, shape).ravel()[region]
    if spec.noise_sigma > 0:
        out = np.clip(out + rng.normal(0.0, spec.noise_sigma, size=out.size), 0, 1)
    support = np.ones(h * w, dtype=np.int8)
    support[region] = 0
    return ImageVector(out, img.shape), OcclusionMask(support, img.shape)


# ---------------------------------------------------------------------------
# on-disk corpus


@dataclass
class CorpusPlan:
    """What to materialize beyond the clean gallery/test split."""

    collect_classes: int = 0  # classes contributing occluded collection images
    collect_per_class: int = 3  # occluded images per class and shape
    test_shapes: tuple = ()  # shapes applied to test faces ("" = clean)
    invalid_classes: int = 0  # extra classes kept out of the gallery
    invalid_per_class: int = 2
    unknown_shapes: tuple = ()  # shapes absent from training, for rejection runs


def generate_corpus(spec: SynthSpec, plan: CorpusPlan, out_dir: str) -> str:
    """Write PGM images, ground-truth masks and the manifest; returns the
    manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    n_total = spec.classes + plan.invalid_classes
    bases = _class_bases(spec, n_total)

    def emit(grid, name, face_label, occ_label, mask, role):
        path = name + ".pgm"
        write_pgm(os.path.join(out_dir, path), grid)
        mask_path = "-"
        if mask is not None:
            mask_path = name + "_mask.pgm"
            write_pgm(
                os.path.join(out_dir, mask_path),
                ImageGrid(*mask.shape, np.asarray(mask.support, dtype=float).reshape(mask.shape)),
            )
        rows.append(
            {
                "path": path,
                "face_label": face_label,
                "occlusion_label": occ_label,
                "mask_path": mask_path,
                "role": role,
            }
        )

    all_shapes = {s.name: s for s in spec.occlusion_shapes}
    for s in plan.unknown_shapes:
        all_shapes[s.name] = s

    def occlude(grid, shape_name):
        shape = all_shapes[shape_name]
        aug = SynthSpec(
            classes=spec.classes,
            samples_per_class=spec.samples_per_class,
            height=spec.height,
            width=spec.width,
            subspace_dim=spec.subspace_dim,
            occlusion_shapes=tuple(all_shapes.values()),
            noise_sigma=spec.noise_sigma,
            seed=spec.seed,
            test_per_class=spec.test_per_class,
        )
        return apply_occlusion(vectorize(grid), shape.name, aug)

    for i in range(spec.classes):
        label = spec.class_label(i)
        for j, g in enumerate(
            _faces_for_class(spec, bases[i], i, "train", spec.samples_per_class)
        ):
            emit(g, f"gallery_{label}_{j:02d}", label, "-", None, "gallery")
        for j, g in enumerate(_faces_for_class(spec, bases[i], i, "test", spec.n_test)):
            shapes = plan.test_shapes or ("",)
            shape_name = shapes[j % len(shapes)]
            if shape_name:
                occ, mask = occlude(g, shape_name)
                emit(occ.to_grid(), f"test_{label}_{j:02d}", label, shape_name, mask, "test")
            else:
                emit(g, f"test_{label}_{j:02d}", label, "-", None, "test")

    for i in range(min(plan.collect_classes, spec.classes)):
        label = spec.class_label(i)
        for shape in spec.occlusion_shapes:
            for j, g in enumerate(
                _faces_for_class(
                    spec, bases[i], i, f"collect-{shape.name}", plan.collect_per_class
                )
            ):
                occ, mask = occlude(g, shape.name)
                emit(
                    occ.to_grid(),
                    f"collect_{shape.name}_{label}_{j:02d}",
                    label,
                    shape.name,
                    mask,
                    "collect",
                )

    for i in range(spec.classes, n_total):
        label = f"invalid{i - spec.classes:03d}"
        for j, g in enumerate(
            _faces_for_class(spec, bases[i], i, "invalid", plan.invalid_per_class)
        ):
            shapes = plan.test_shapes or ("",)
            shape_name = shapes[j % len(shapes)]
            if shape_name:
                occ, mask = occlude(g, shape_name)
                emit(occ.to_grid(), f"invalid_{label}_{j:02d}", label, shape_name, mask, "invalid")
            else:
                emit(g, f"invalid_{label}_{j:02d}", label, "-", None, "invalid")

    return write_manifest(out_dir, rows)
