"""Mini-batch training of the count predictor on a synthetic dataset.

Features and targets are precomputed once per scene (they do not change
while the predictor trains). Every run is deterministic in the seed: the
same dataset, init, and batch order give a bit-identical checkpoint.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .errors import NumericError, ValidationError
from .features import assemble_features
from .losses import calibrate_gamma_a, joint_loss_and_gradients, target_complexity
from .mlp import MlpParams, init_params, optimizer_step
from .rng import RngState
from .synthetic import SyntheticDataset

LOG_COLUMNS = ("step", "rate_loss", "comp_loss", "total_loss",
               "mean_expected_count", "mean_target_complexity")


@dataclass
class TrainResult:
    params: MlpParams
    log_rows: list
    gamma_a: float
    features: list
    targets: np.ndarray


def prepare_inputs(dataset: SyntheticDataset, config: RunConfig) -> tuple:
    """Per-scene features and complexity targets; resolves gamma_a if auto."""
    if len(dataset) == 0:
        raise ValidationError("dataset is empty")
    dims = {spec.dim for spec, _, _ in dataset.scenes}
    if len(dims) != 1:
        raise ValidationError(f"scenes disagree on patch dimension: {sorted(dims)}")

    gamma_a = config.gamma_a
    if gamma_a is None:
        gamma_a = calibrate_gamma_a(attn for _, _, attn in dataset.scenes)
    loss_config = config.loss_config(gamma_a=gamma_a)

    features, targets = [], []
    for spec, patches, attention in dataset.scenes:
        features.append(assemble_features(patches, attention, config.tau_e))
        targets.append(target_complexity(patches, attention, loss_config, config.tau_e))
    return features, np.asarray(targets), gamma_a


def train(dataset: SyntheticDataset, config: RunConfig) -> TrainResult:
    features, targets, gamma_a = prepare_inputs(dataset, config)
    in_dim = features[0].assembled.shape[0]
    candidates = config.candidate_set()
    loss_config = config.loss_config(gamma_a=gamma_a)

    rng = RngState(config.seed)
    params = init_params(in_dim, config.hidden1, config.hidden2, len(candidates), rng)

    n = len(features)
    rows = []
    for step in range(config.steps):
        idx = rng.integers(0, n, size=config.batch_size)
        batch = [(features[i], targets[i]) for i in idx]
        try:
            losses, grads = joint_loss_and_gradients(params, batch, candidates, loss_config)
        except NumericError as exc:
            raise NumericError(f"step {step}: {exc}") from exc
        optimizer_step(params, grads, config.learning_rate, step)
        rows.append((
            step,
            losses.rate_loss,
            losses.comp_loss,
            losses.total,
            float(losses.per_sample_expected_count.mean()),
            float(losses.per_sample_c.mean()),
        ))
    return TrainResult(params=params, log_rows=rows, gamma_a=gamma_a,
                       features=features, targets=targets)


def write_training_log(rows, path) -> None:
    """Fixed-order CSV so downstream plotting stays trivial."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for step, rate, comp, total, mean_e, mean_c in rows:
            writer.writerow([step, f"{rate:.10g}", f"{comp:.10g}", f"{total:.10g}",
                             f"{mean_e:.10g}", f"{mean_c:.10g}"])
