"""Synthetic stand-in for a vision encoder.

Produces (patches, attention) pairs from a scalar complexity dial in [0, 1]:
patch-norm entropy and attention-map dispersion both grow with the dial, so
a count policy trained on this data has real signal to learn from.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ValidationError
from .features import AttentionMap, PatchSet
from .rng import RngState

DATASET_MAGIC = b"AVDS1"
DATASET_VERSION = 1

DEFAULT_N_PATCHES = 64
DEFAULT_DIM = 32
DEFAULT_TIERS = (0.0, 0.5, 1.0)

_SPLIT_TAGS = {"train": 0, "val": 1}
_SPLIT_NAMES = {v: k for k, v in _SPLIT_TAGS.items()}


@dataclass(frozen=True)
class SceneSpec:
    complexity_dial: float
    n_patches: int = DEFAULT_N_PATCHES
    dim: int = DEFAULT_DIM
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.complexity_dial <= 1.0:
            raise ValidationError(f"complexity_dial must be in [0, 1], got {self.complexity_dial}")
        if self.n_patches < 2:
            raise ValidationError(f"n_patches must be >= 2, got {self.n_patches}")
        if self.dim < 1:
            raise ValidationError(f"dim must be >= 1, got {self.dim}")


@dataclass(frozen=True)
class GeneratorConfig:
    """Constants mapping the dial onto norm spread and attention sharpness.

    Patch norms are base_norm * max(norm_floor, 1 + spread * eps) with
    spread = spread_max * (1 - dial); one dominant patch gets an extra
    dominant_boost * (1 - dial) of norm. At dial 1 all norms are equal, so
    entropy is exactly log N; at dial 0 the dominant patch swallows the
    softmax and entropy collapses. Attention rows are softmax of Gaussian
    scores with standard deviation attn_sharpness * dial; dial 0 gives the
    exactly uniform map (zero variance).
    """

    base_norm: float = 1.0
    spread_max: float = 3.5
    dominant_boost: float = 12.0
    norm_floor: float = 0.05
    attn_sharpness: float = 5.0


@dataclass
class SyntheticDataset:
    scenes: list  # (SceneSpec, PatchSet, AttentionMap) triples
    split: str = "train"

    def __post_init__(self):
        if self.split not in _SPLIT_TAGS:
            raise ValidationError(f"split must be one of {sorted(_SPLIT_TAGS)}, got {self.split!r}")

    def __len__(self):
        return len(self.scenes)

    def dials(self) -> np.ndarray:
        return np.asarray([spec.complexity_dial for spec, _, _ in self.scenes])


def generate_scene(spec: SceneSpec, config: GeneratorConfig = GeneratorConfig()) -> tuple:
    """Deterministically realize one scene from its spec."""
    rng = RngState(spec.seed)
    n, d, dial = spec.n_patches, spec.dim, spec.complexity_dial

    directions = rng.normal(size=(n, d))
    lengths = np.linalg.norm(directions, axis=1)
    lengths[lengths < 1e-12] = 1.0
    directions /= lengths[:, None]

    spread = config.spread_max * (1.0 - dial)
    norms = config.base_norm * np.maximum(config.norm_floor, 1.0 + spread * rng.normal(size=n))
    norms[0] += config.base_norm * config.dominant_boost * (1.0 - dial)
    patches = PatchSet(directions * norms[:, None])

    scores = config.attn_sharpness * dial * rng.normal(size=(n, n))
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    attention = AttentionMap(e / e.sum(axis=1, keepdims=True))
    return patches, attention


def tier_dials(count: int, tiers=DEFAULT_TIERS) -> list:
    """Stratify `count` scenes over the tier grid, block by block.

    A single scene defaults to the 0.5 midpoint.
    """
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    tiers = tuple(float(t) for t in tiers)
    if count == 1:
        return [0.5]
    return [tiers[i * len(tiers) // count] for i in range(count)]


def build_dataset(count: int, seed: int, tiers=DEFAULT_TIERS,
                  n_patches: int = DEFAULT_N_PATCHES, dim: int = DEFAULT_DIM,
                  split: str = "train",
                  config: GeneratorConfig = GeneratorConfig()) -> SyntheticDataset:
    """Deterministic dataset: scene i gets a derived seed and a stratified dial."""
    dials = tier_dials(count, tiers)
    base = RngState(seed)
    scenes = []
    for i, dial in enumerate(dials):
        spec = SceneSpec(complexity_dial=dial, n_patches=n_patches, dim=dim,
                         seed=base.derive(i).seed)
        patches, attention = generate_scene(spec, config)
        scenes.append((spec, patches, attention))
    return SyntheticDataset(scenes=scenes, split=split)


def save_dataset(dataset: SyntheticDataset, path) -> None:
    """Binary layout: magic, version byte, split byte, u32 count, then per scene
    (f64 dial, u32 N, u32 d, u64 seed, N*d f64 patches, N*N f64 attention)."""
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<BB", DATASET_VERSION, _SPLIT_TAGS[dataset.split]))
        fh.write(struct.pack("<I", len(dataset.scenes)))
        for spec, patches, attention in dataset.scenes:
            fh.write(struct.pack("<dIIQ", spec.complexity_dial, spec.n_patches,
                                 spec.dim, spec.seed))
            fh.write(np.ascontiguousarray(patches.patches, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(attention.weights, dtype="<f8").tobytes())


def load_dataset(path) -> SyntheticDataset:
    with open(path, "rb") as fh:
        blob = fh.read()

    def take(offset, size, what):
        if offset + size > len(blob):
            raise FormatError(
                f"dataset truncated reading {what}: byte {offset + size} past end {len(blob)}"
            )
        return blob[offset:offset + size], offset + size

    head, off = take(0, len(DATASET_MAGIC), "magic")
    if head != DATASET_MAGIC:
        raise FormatError(f"bad dataset magic {head!r} at byte 0")
    raw, off = take(off, 2, "header")
    version, split_tag = struct.unpack("<BB", raw)
    if version != DATASET_VERSION:
        raise FormatError(f"unsupported dataset version {version} at byte 5")
    if split_tag not in _SPLIT_NAMES:
        raise FormatError(f"unknown split tag {split_tag} at byte 6")
    raw, off = take(off, 4, "scene count")
    (count,) = struct.unpack("<I", raw)
    scenes = []
    for i in range(count):
        raw, off = take(off, struct.calcsize("<dIIQ"), f"scene {i} spec")
        dial, n, d, seed = struct.unpack("<dIIQ", raw)
        spec = SceneSpec(complexity_dial=dial, n_patches=n, dim=d, seed=seed)
        raw, off = take(off, 8 * n * d, f"scene {i} patches")
        patches = PatchSet(np.frombuffer(raw, dtype="<f8").reshape(n, d).copy())
        raw, off = take(off, 8 * n * n, f"scene {i} attention")
        attention = AttentionMap(np.frombuffer(raw, dtype="<f8").reshape(n, n).copy())
        scenes.append((spec, patches, attention))
    if off != len(blob):
        raise FormatError(f"trailing bytes after offset {off}")
    return SyntheticDataset(scenes=scenes, split=_SPLIT_NAMES[split_tag])


def datasets_equal(a: SyntheticDataset, b: SyntheticDataset) -> bool:
    if a.split != b.split or len(a) != len(b):
        return False
    for (sa, pa, aa), (sb, pb, ab) in zip(a.scenes, b.scenes):
        if sa != sb:
            return False
        if not np.array_equal(pa.patches, pb.patches):
            return False
        if not np.array_equal(aa.weights, ab.weights):
            return False
    return True
