"""Central finite-difference gradient oracle and comparison helpers."""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ValidationError

DEFAULT_STEP = 1e-5


def finite_difference_gradient(func, point: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Central differences: grad_i = (f(x + h e_i) - f(x - h e_i)) / (2h)."""
    if step <= 0:
        raise ValidationError(f"step must be > 0, got {step}")
    x = np.asarray(point, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        probe = x.copy()
        probe.flat[i] = x.flat[i] + step
        f_plus = func(probe)
        probe.flat[i] = x.flat[i] - step
        f_minus = func(probe)
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(f"non-finite function value probing coordinate {i}")
        grad.flat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max-norm difference scaled by the larger vector's max norm.

    Per-component ratios blow up on true-zero gradient entries, so the
    comparison is against the overall gradient scale instead.
    """
    a = np.asarray(analytic, dtype=np.float64).ravel()
    b = np.asarray(numeric, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValidationError(f"gradient shapes differ: {a.shape} vs {b.shape}")
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0), 1e-12)
    return float(np.max(np.abs(a - b), initial=0.0) / scale)


GRADCHECK_TOLERANCE = 1e-5
GRADCHECK_PATHS = ("mlp", "log_softmax", "gumbel_fixed_noise", "rate_loss", "comp_loss", "joint")


def _check_mlp(rng, corrupt=False):
    from .mlp import flatten_gradients, flatten_params, init_params, mlp_backward, mlp_forward, set_flat_params

    params = init_params(5, 6, 5, 3, rng)
    x = rng.normal(size=5)
    w = rng.normal(size=3)
    _, cache = mlp_forward(params, x)
    analytic = flatten_gradients(mlp_backward(params, cache, w))
    if corrupt:
        analytic = analytic.copy()
        analytic[0] += 1e-3

    probe = params.copy()

    def f(flat):
        set_flat_params(probe, flat)
        out, _ = mlp_forward(probe, x)
        return float(w @ out)

    numeric = finite_difference_gradient(f, flatten_params(params))
    return relative_error(analytic, numeric)


def _check_log_softmax(rng, corrupt=False):
    from .predictor import log_softmax

    z = rng.normal(size=4) * 2.0
    w = rng.normal(size=4)
    shifted = np.exp(z - np.max(z))
    pi = shifted / shifted.sum()
    analytic = w - pi * w.sum()
    numeric = finite_difference_gradient(lambda v: float(w @ log_softmax(v)), z)
    return relative_error(analytic, numeric)


def _check_gumbel_fixed_noise(rng, corrupt=False):
    from .predictor import CandidateSet, RatePolicy, relaxed_count_gradient
    from .rng import RngState

    candidates = CandidateSet()
    z = rng.normal(size=len(candidates)) * 2.0
    noise = -np.log(-np.log(np.clip(rng.uniform(size=len(candidates)), 1e-12, 1 - 1e-12)))
    tau = 0.3 + 1.7 * float(rng.uniform())
    _, _, analytic = relaxed_count_gradient(RatePolicy(logits=z), candidates, tau, noise)

    def f(v):
        _, expected, _ = relaxed_count_gradient(RatePolicy(logits=v), candidates, tau, noise)
        return expected

    numeric = finite_difference_gradient(f, z)
    return relative_error(analytic, numeric)


def _check_rate_loss(rng, corrupt=False):
    from .losses import rate_loss, rate_loss_logit_gradient
    from .predictor import CandidateSet, RatePolicy

    candidates = CandidateSet()
    b, arity = 3, len(candidates)
    zs = rng.normal(size=(b, arity)) * 2.0
    analytic = np.concatenate([
        rate_loss_logit_gradient(RatePolicy(logits=z), candidates, batch_size=b) for z in zs
    ])

    def f(flat):
        policies = [RatePolicy(logits=flat[i * arity:(i + 1) * arity]) for i in range(b)]
        return rate_loss(policies, candidates)

    numeric = finite_difference_gradient(f, zs.ravel())
    return relative_error(analytic, numeric)


def _check_comp_loss(rng, corrupt=False):
    from .losses import comp_loss, comp_loss_logit_gradient
    from .predictor import CandidateSet, RatePolicy

    candidates = CandidateSet()
    b, arity = 3, len(candidates)
    zs = rng.normal(size=(b, arity)) * 2.0
    targets = rng.uniform(size=b)
    analytic = np.concatenate([
        comp_loss_logit_gradient(RatePolicy(logits=z), float(c), candidates, batch_size=b)
        for z, c in zip(zs, targets)
    ])

    def f(flat):
        policies = [RatePolicy(logits=flat[i * arity:(i + 1) * arity]) for i in range(b)]
        return comp_loss(policies, targets, candidates)

    numeric = finite_difference_gradient(f, zs.ravel())
    return relative_error(analytic, numeric)


def _check_joint(rng, corrupt=False):
    from .features import AttentionMap, PatchSet, assemble_features
    from .losses import LossConfig, joint_loss_and_gradients
    from .mlp import flatten_gradients, flatten_params, init_params, set_flat_params
    from .predictor import CandidateSet

    candidates = CandidateSet()
    n, d = 4, 2
    batch = []
    for _ in range(2):
        patches = PatchSet(rng.normal(size=(n, d)))
        attention = AttentionMap(np.full((n, n), 1.0 / n))
        batch.append((assemble_features(patches, attention), float(rng.uniform())))
    config = LossConfig(lambda_rate=0.7, lambda_comp=1.3, lambda_task=0.4)
    params = init_params(2 * d + 2, 5, 4, len(candidates), rng)
    _, grads = joint_loss_and_gradients(params, batch, candidates, config)
    analytic = flatten_gradients(grads)

    probe = params.copy()

    def f(flat):
        set_flat_params(probe, flat)
        losses, _ = joint_loss_and_gradients(probe, batch, candidates, config)
        return losses.total

    numeric = finite_difference_gradient(f, flatten_params(params))
    return relative_error(analytic, numeric)


_CHECKS = {
    "mlp": _check_mlp,
    "log_softmax": _check_log_softmax,
    "gumbel_fixed_noise": _check_gumbel_fixed_noise,
    "rate_loss": _check_rate_loss,
    "comp_loss": _check_comp_loss,
    "joint": _check_joint,
}


def run_gradient_checks(instances: int = 20, seed: int = 0, corrupt: bool = False) -> dict:
    """Max relative error per differentiable path over `instances` random cases.

    The corrupt flag perturbs one analytic gradient on the mlp path; it exists
    so the harness around this function can be shown to fail loudly.
    """
    from .rng import RngState

    if instances < 0:
        raise ValidationError(f"instances must be >= 0, got {instances}")
    results = {}
    for path_index, (path, check) in enumerate(_CHECKS.items()):
        worst = 0.0
        for i in range(instances):
            rng = RngState(seed).derive(path_index * 100003 + i)
            err = check(rng, corrupt=corrupt and path == "mlp")
            worst = max(worst, err)
        results[path] = worst
    return results
