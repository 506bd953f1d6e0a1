"""Dual-objective training signal for the rate predictor.

Rate loss: expected token count normalized by k_max, averaged over the batch.
Complexity loss: squared gap between the normalized expected count and a
per-sample target score built from entropy and attention variance. Both
consume the softmax probabilities, and their gradients are chained through
the softmax Jacobian into the MLP by hand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError
from .features import AttentionMap, PatchSet, attention_variance, patch_entropy
from .mlp import MlpGradients, MlpParams, accumulate_gradients, mlp_backward, mlp_forward, zero_gradients
from .predictor import CandidateSet, RatePolicy

DEFAULT_ALPHA = 0.5
DEFAULT_BETA = 0.5
DEFAULT_GAMMA_A = 1.0
DEFAULT_LAMBDA_RATE = 0.1
DEFAULT_LAMBDA_COMP = 1.0
DEFAULT_LAMBDA_TASK = 0.0
CALIBRATION_PERCENTILE = 95.0


@dataclass(frozen=True)
class LossConfig:
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    gamma_a: float = DEFAULT_GAMMA_A
    lambda_rate: float = DEFAULT_LAMBDA_RATE
    lambda_comp: float = DEFAULT_LAMBDA_COMP
    lambda_task: float = DEFAULT_LAMBDA_TASK

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValidationError(f"alpha/beta must be >= 0, got {self.alpha}, {self.beta}")
        if self.gamma_a <= 0:
            raise ValidationError(f"gamma_a must be > 0, got {self.gamma_a}")
        for name in ("lambda_rate", "lambda_comp", "lambda_task"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass
class BatchLosses:
    rate_loss: float
    comp_loss: float
    task_loss: float
    total: float
    per_sample_c: np.ndarray
    per_sample_expected_count: np.ndarray


def expected_count(policy: RatePolicy, candidates: CandidateSet) -> float:
    return float(policy.probs @ candidates.as_array())


def rate_loss(policies, candidates: CandidateSet) -> float:
    """Mean expected count over the batch, normalized by k_max."""
    policies = list(policies)
    if not policies:
        raise ValidationError("rate_loss needs a nonempty batch")
    total = sum(expected_count(p, candidates) for p in policies)
    return total / (len(policies) * candidates.k_max)


def target_complexity(patches: PatchSet, attn: AttentionMap, config: LossConfig,
                      tau_e: float) -> float:
    """Weighted, log-normalized entropy + attention-variance score, clamped to [0, 1].

    C = alpha * log(1 + H) / log(1 + log N) + beta * log(1 + Var(A)) / gamma_a.
    Needs N >= 2 so the entropy normalizer is positive.
    """
    n = patches.count
    if n < 2:
        raise ValidationError(f"target_complexity needs N >= 2 patches, got {n}")
    h = patch_entropy(patches, tau_e)
    var_a = attention_variance(attn)
    entropy_term = np.log1p(h) / np.log1p(np.log(n))
    attention_term = np.log1p(var_a) / config.gamma_a
    c = config.alpha * entropy_term + config.beta * attention_term
    return float(np.clip(c, 0.0, 1.0))


def calibrate_gamma_a(attention_maps) -> float:
    """Empirical gamma_a: 95th percentile of log(1 + Var(A)) over a calibration pass.

    Puts the attention term of the target score in [0, 1] for all but the
    most dispersed maps.
    """
    values = [np.log1p(attention_variance(a)) for a in attention_maps]
    if not values:
        raise ValidationError("calibration needs at least one attention map")
    p95 = float(np.percentile(values, CALIBRATION_PERCENTILE))
    if p95 <= 0:
        # All-uniform maps carry no variance signal; fall back to the default.
        return DEFAULT_GAMMA_A
    return p95


def comp_loss(policies, targets, candidates: CandidateSet) -> float:
    """Mean squared error between normalized expected counts and targets."""
    policies = list(policies)
    targets = np.asarray(targets, dtype=np.float64)
    if len(policies) != targets.shape[0]:
        raise ValidationError(
            f"batch mismatch: {len(policies)} policies vs {targets.shape[0]} targets"
        )
    if not policies:
        raise ValidationError("comp_loss needs a nonempty batch")
    errs = [
        (expected_count(p, candidates) / candidates.k_max - float(c)) ** 2
        for p, c in zip(policies, targets)
    ]
    return float(np.mean(errs))


def task_proxy_loss(policies, targets, candidates: CandidateSet) -> float:
    """Demo-only stand-in for a downstream task objective (off by default).

    Rewards spending expected count on high-target samples:
    mean over the batch of C * (1 - E[k]/k_max).
    """
    policies = list(policies)
    targets = np.asarray(targets, dtype=np.float64)
    vals = [
        float(c) * (1.0 - expected_count(p, candidates) / candidates.k_max)
        for p, c in zip(policies, targets)
    ]
    return float(np.mean(vals))


def rate_loss_logit_gradient(policy: RatePolicy, candidates: CandidateSet,
                             batch_size: int = 1) -> np.ndarray:
    """d rate_loss / d logits for one sample inside a batch of batch_size."""
    k = candidates.as_array()
    e = expected_count(policy, candidates)
    return policy.probs * (k - e) / (batch_size * candidates.k_max)


def comp_loss_logit_gradient(policy: RatePolicy, target: float, candidates: CandidateSet,
                             batch_size: int = 1) -> np.ndarray:
    """d comp_loss / d logits for one sample inside a batch of batch_size."""
    k = candidates.as_array()
    e = expected_count(policy, candidates)
    gap = e / candidates.k_max - target
    return 2.0 * gap * policy.probs * (k - e) / (batch_size * candidates.k_max)


def joint_loss_and_gradients(params: MlpParams, batch, candidates: CandidateSet,
                             config: LossConfig) -> tuple:
    """Total loss over a batch of (features, target) pairs plus MLP gradients.

    total = lambda_task * task + lambda_rate * rate + lambda_comp * comp.
    Per-sample terms are reduced in ascending sample order so results are
    bit-reproducible.
    """
    batch = list(batch)
    if not batch:
        raise ValidationError("joint loss needs a nonempty batch")
    b = len(batch)
    k = candidates.as_array()
    k_max = candidates.k_max

    grads = zero_gradients(params)
    rate_total = 0.0
    comp_total = 0.0
    task_total = 0.0
    expected_counts = np.zeros(b)
    targets = np.zeros(b)

    for i, (features, target) in enumerate(batch):
        target = float(target)
        logits, cache = mlp_forward(params, features.assembled)
        policy = RatePolicy(logits=logits)
        e = float(policy.probs @ k)
        u = e / k_max
        rate_i = u
        comp_i = (u - target) ** 2
        task_i = target * (1.0 - u)
        if not all(np.isfinite(v) for v in (rate_i, comp_i, task_i)):
            raise NumericError(f"non-finite loss at sample {i}")
        rate_total += rate_i
        comp_total += comp_i
        task_total += task_i
        expected_counts[i] = e
        targets[i] = target

        scale = (
            config.lambda_rate
            + 2.0 * config.lambda_comp * (u - target)
            - config.lambda_task * target
        ) / (b * k_max)
        d_logits = scale * policy.probs * (k - e)
        accumulate_gradients(grads, mlp_backward(params, cache, d_logits))

    losses = BatchLosses(
        rate_loss=rate_total / b,
        comp_loss=comp_total / b,
        task_loss=task_total / b,
        total=(
            config.lambda_task * task_total / b
            + config.lambda_rate * rate_total / b
            + config.lambda_comp * comp_total / b
        ),
        per_sample_c=targets,
        per_sample_expected_count=expected_counts,
    )
    if not np.isfinite(losses.total):
        raise NumericError("non-finite total loss")
    return losses, grads
