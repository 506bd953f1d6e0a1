"""Token-count policy: logits from the MLP, Gumbel-Softmax draws in training,
argmax at inference, plus the temperature annealing schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .features import ComplexityFeatures
from .mlp import MlpParams, mlp_forward
from .rng import RngState

PROB_FLOOR = 1e-10
UNIFORM_CLAMP = 1e-12

DEFAULT_CANDIDATES = (1, 2, 4)


@dataclass(frozen=True)
class CandidateSet:
    """Strictly increasing menu of allowed token counts."""

    counts: tuple = DEFAULT_CANDIDATES

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if not counts:
            raise ValidationError("candidate set must be nonempty")
        if counts[0] < 1 or any(b <= a for a, b in zip(counts, counts[1:])):
            raise ValidationError(f"counts must be strictly increasing and >= 1, got {counts}")

    def __len__(self):
        return len(self.counts)

    @property
    def k_min(self) -> int:
        return self.counts[0]

    @property
    def k_max(self) -> int:
        return self.counts[-1]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.float64)


@dataclass
class RatePolicy:
    """Logits over candidate counts and their softmax probabilities."""

    logits: np.ndarray
    probs: np.ndarray = field(init=False)

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.ndim != 1 or self.logits.size < 1:
            raise ValidationError(f"logits must be a nonempty vector, got {self.logits.shape}")
        shifted = self.logits - np.max(self.logits)
        e = np.exp(shifted)
        self.probs = e / e.sum()


@dataclass
class GumbelSample:
    relaxed: np.ndarray
    expected_count: float
    temperature: float


def predict_policy(params: MlpParams, features: ComplexityFeatures) -> RatePolicy:
    """Map a complexity feature vector to a count distribution."""
    if features.assembled.shape[0] != params.in_dim:
        raise ValidationError(
            f"feature length {features.assembled.shape[0]} != predictor in_dim {params.in_dim}"
        )
    logits, _ = mlp_forward(params, features.assembled)
    return RatePolicy(logits=logits)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - np.max(z)
    return shifted - np.log(np.exp(shifted).sum())


def floored_log_probs(policy: RatePolicy) -> np.ndarray:
    """log pi straight from the logits, floored at log(PROB_FLOOR)."""
    return np.maximum(log_softmax(policy.logits), np.log(PROB_FLOOR))


def gumbel_noise(rng: RngState, size) -> np.ndarray:
    u = np.clip(rng.uniform(size=size), UNIFORM_CLAMP, 1.0 - UNIFORM_CLAMP)
    return -np.log(-np.log(u))


def gumbel_softmax_sample(policy: RatePolicy, candidates: CandidateSet, tau_g: float,
                          rng: RngState) -> GumbelSample:
    """Relaxed categorical draw y = softmax((log pi + g) / tau_g).

    g = -log(-log u) with u ~ Uniform(0,1). The expected count is the inner
    product y . k, a convex combination of the candidates, and for fixed g
    it is differentiable in the logits.
    """
    if tau_g <= 0:
        raise ValidationError(f"tau_g must be > 0, got {tau_g}")
    if len(policy.probs) != len(candidates):
        raise ValidationError(
            f"policy arity {len(policy.probs)} != candidate count {len(candidates)}"
        )
    log_pi = floored_log_probs(policy)
    g = gumbel_noise(rng, size=log_pi.shape[0])
    scores = (log_pi + g) / tau_g
    shifted = scores - np.max(scores)
    e = np.exp(shifted)
    y = e / e.sum()
    expected = float(y @ candidates.as_array())
    return GumbelSample(relaxed=y, expected_count=expected, temperature=tau_g)


def gumbel_argmax_indices(policy: RatePolicy, n: int, rng: RngState) -> np.ndarray:
    """Vectorized hard draws: argmax_j(log pi_j + g_j) for n independent g.

    The argmax of Gumbel-perturbed log-probabilities is an exact Categorical(pi)
    sample regardless of any temperature.
    """
    if n < 1:
        raise ValidationError(f"need n >= 1 draws, got {n}")
    log_pi = floored_log_probs(policy)
    g = gumbel_noise(rng, size=(n, log_pi.shape[0]))
    return np.argmax(log_pi[None, :] + g, axis=1)


def relaxed_count_gradient(policy: RatePolicy, candidates: CandidateSet, tau_g: float,
                           noise: np.ndarray) -> tuple:
    """(y, expected_count, d expected_count / d logits) for fixed Gumbel noise.

    Chains softmax((log pi + g)/tau) through the log-softmax Jacobian; entries
    pinned by the probability floor contribute zero gradient.
    """
    if tau_g <= 0:
        raise ValidationError(f"tau_g must be > 0, got {tau_g}")
    log_pi_raw = log_softmax(policy.logits)
    floor = np.log(PROB_FLOOR)
    active = log_pi_raw > floor
    log_pi = np.maximum(log_pi_raw, floor)
    scores = (log_pi + np.asarray(noise, dtype=np.float64)) / tau_g
    shifted = scores - np.max(scores)
    e = np.exp(shifted)
    y = e / e.sum()
    k = candidates.as_array()
    expected = float(y @ k)
    # dE/ds_j = y_j (k_j - E); ds_j/dlogpi_j = 1/tau (where active);
    # dlogpi_j/dz_m = delta_jm - pi_m.
    d_score = y * (k - expected) / tau_g
    d_logpi = d_score * active
    grad = d_logpi - policy.probs * d_logpi.sum()
    return y, expected, grad


def infer_count(policy: RatePolicy, candidates: CandidateSet) -> int:
    """Deterministic choice k_argmax(logits); ties go to the smallest candidate."""
    if len(policy.logits) != len(candidates):
        raise ValidationError(
            f"policy arity {len(policy.logits)} != candidate count {len(candidates)}"
        )
    return candidates.counts[int(np.argmax(policy.logits))]


@dataclass(frozen=True)
class AnnealSchedule:
    """Exponential decay tau(step) = max(tau_min, tau_0 * exp(-rate * step)).

    The rate is fixed so the floor is reached at 80% of total_steps.
    """

    tau_0: float = 1.0
    tau_min: float = 0.1
    total_steps: int = 2000

    def __post_init__(self):
        if self.tau_0 <= 0 or self.tau_min <= 0 or self.tau_min > self.tau_0:
            raise ValidationError(
                f"need 0 < tau_min <= tau_0, got tau_0={self.tau_0} tau_min={self.tau_min}"
            )
        if self.total_steps < 1:
            raise ValidationError(f"total_steps must be >= 1, got {self.total_steps}")

    @property
    def rate(self) -> float:
        horizon = 0.8 * self.total_steps
        return np.log(self.tau_0 / self.tau_min) / horizon if horizon > 0 else 0.0

    def temperature(self, step: int) -> float:
        if step < 0:
            raise ValidationError(f"step must be >= 0, got {step}")
        return float(max(self.tau_min, self.tau_0 * np.exp(-self.rate * step)))


def anneal_temperature(step: int, schedule: AnnealSchedule) -> float:
    return schedule.temperature(step)
