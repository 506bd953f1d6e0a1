"""Statistical complexity signals extracted from patch embeddings and attention.

The assembled feature vector is [mean, variance, entropy, attention variance]
with length 2d + 2. Natural logarithms throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError

DEFAULT_TAU_E = 1.0
ROW_SUM_TOL = 1e-9


@dataclass
class PatchSet:
    """N patch embeddings of dimension d, stored as an (N, d) float64 array."""

    patches: np.ndarray

    def __post_init__(self):
        self.patches = np.asarray(self.patches, dtype=np.float64)
        if self.patches.ndim != 2 or self.patches.shape[0] < 1 or self.patches.shape[1] < 1:
            raise ValidationError(f"patches must be (N>=1, d>=1), got {self.patches.shape}")
        if not np.all(np.isfinite(self.patches)):
            raise NumericError("patch embeddings contain non-finite entries")

    @property
    def count(self) -> int:
        return self.patches.shape[0]

    @property
    def dim(self) -> int:
        return self.patches.shape[1]


@dataclass
class AttentionMap:
    """Row-stochastic (N, N) self-attention weights.

    Rows are softmax outputs upstream, so inputs that are not row-stochastic
    are rejected rather than silently renormalized.
    """

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        n = self.weights.shape[0] if self.weights.ndim == 2 else -1
        if self.weights.ndim != 2 or self.weights.shape != (n, n) or n < 1:
            raise ValidationError(f"attention map must be square, got {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise NumericError("attention map contains non-finite entries")
        if np.any(self.weights < 0):
            raise ValidationError("attention weights must be nonnegative")
        row_sums = self.weights.sum(axis=1)
        worst = np.max(np.abs(row_sums - 1.0))
        if worst > ROW_SUM_TOL:
            raise ValidationError(f"attention rows must sum to 1 (worst deviation {worst:.3e})")

    @property
    def size(self) -> int:
        return self.weights.shape[0]


@dataclass
class ComplexityFeatures:
    mean: np.ndarray
    variance: np.ndarray
    entropy: float
    attention_variance: float
    assembled: np.ndarray


def mean_attention(maps) -> AttentionMap:
    """Reduce multiple attention heads to one map by averaging.

    With a single head this is the identity, which is the default everywhere.
    """
    maps = list(maps)
    if not maps:
        raise ValidationError("need at least one attention map")
    stacked = np.stack([m.weights for m in maps])
    return AttentionMap(stacked.mean(axis=0))


def patch_mean_variance(patches: PatchSet) -> tuple:
    """Per-coordinate empirical mean and population variance of the patches."""
    p = patches.patches
    mean = p.mean(axis=0)
    variance = ((p - mean) ** 2).mean(axis=0)
    return mean, variance


def _stable_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores)
    e = np.exp(shifted)
    return e / e.sum()


def patch_entropy(patches: PatchSet, tau_e: float = DEFAULT_TAU_E) -> float:
    """Shannon entropy of a softmax over patch L2 norms.

    q_i = softmax(||p_i|| / tau_e); H = -sum q_i log q_i, with the
    0 * log 0 := 0 convention. Lies in [0, log N], hitting log N exactly
    when all norms are equal.
    """
    if tau_e <= 0:
        raise ValidationError(f"tau_e must be > 0, got {tau_e}")
    norms = np.linalg.norm(patches.patches, axis=1)
    q = _stable_softmax(norms / tau_e)
    nonzero = q > 0.0
    h = float(-(q[nonzero] * np.log(q[nonzero])).sum())
    return max(h, 0.0)


def attention_variance(attn: AttentionMap) -> float:
    """Population variance over all N^2 attention entries."""
    w = attn.weights
    return float(((w - w.mean()) ** 2).mean())


def assemble_features(patches: PatchSet, attn: AttentionMap,
                      tau_e: float = DEFAULT_TAU_E) -> ComplexityFeatures:
    """Build the (2d + 2)-vector [mean, variance, entropy, attention variance]."""
    if attn.size != patches.count:
        raise ValidationError(
            f"attention map size {attn.size} does not match patch count {patches.count}"
        )
    mean, variance = patch_mean_variance(patches)
    entropy = patch_entropy(patches, tau_e)
    att_var = attention_variance(attn)
    assembled = np.concatenate([mean, variance, [entropy], [att_var]])
    return ComplexityFeatures(
        mean=mean,
        variance=variance,
        entropy=entropy,
        attention_variance=att_var,
        assembled=assembled,
    )


def feature_length(dim: int) -> int:
    return 2 * dim + 2
