"""Run configuration: defaults, key=value config files, env and flag overrides.

Precedence, lowest to highest: built-in defaults, config file, environment
variables (VOCORATE_SEED, VOCORATE_OUTDIR), command-line flags. Validation
happens before any command starts writing files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

from .errors import ValidationError
from .losses import LossConfig
from .predictor import AnnealSchedule, CandidateSet

ENV_SEED = "VOCORATE_SEED"
ENV_OUTDIR = "VOCORATE_OUTDIR"


@dataclass(frozen=True)
class RunConfig:
    seed: int = 7
    out_dir: str = "."

    # dataset
    count: int = 300
    n_patches: int = 64
    dim: int = 32

    # features
    tau_e: float = 1.0

    # policy
    candidates: tuple = (1, 2, 4)
    tau_0: float = 1.0
    tau_min: float = 0.1

    # losses; gamma_a None means "calibrate from the dataset"
    alpha: float = 0.5
    beta: float = 0.5
    gamma_a: float | None = None
    lambda_rate: float = 0.1
    lambda_comp: float = 1.0
    lambda_task: float = 0.0

    # predictor network and optimizer
    hidden1: int = 64
    hidden2: int = 64
    learning_rate: float = 1e-3
    batch_size: int = 32
    steps: int = 2000

    def __post_init__(self):
        if self.count < 1:
            raise ValidationError(f"count must be >= 1, got {self.count}")
        if self.n_patches < 2:
            raise ValidationError(f"n_patches must be >= 2, got {self.n_patches}")
        if self.dim < 1:
            raise ValidationError(f"dim must be >= 1, got {self.dim}")
        if self.tau_e <= 0:
            raise ValidationError(f"tau_e must be > 0, got {self.tau_e}")
        if self.batch_size < 1 or self.steps < 1:
            raise ValidationError(
                f"batch_size and steps must be >= 1, got {self.batch_size}, {self.steps}"
            )
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.hidden1 < 1 or self.hidden2 < 1:
            raise ValidationError(f"hidden sizes must be >= 1, got {self.hidden1}, {self.hidden2}")
        # These constructors enforce their own constraints.
        self.candidate_set()
        self.anneal_schedule()
        self.loss_config()

    def candidate_set(self) -> CandidateSet:
        return CandidateSet(counts=self.candidates)

    def anneal_schedule(self) -> AnnealSchedule:
        return AnnealSchedule(tau_0=self.tau_0, tau_min=self.tau_min, total_steps=self.steps)

    def loss_config(self, gamma_a: float | None = None) -> LossConfig:
        resolved = gamma_a if gamma_a is not None else self.gamma_a
        return LossConfig(
            alpha=self.alpha,
            beta=self.beta,
            gamma_a=resolved if resolved is not None else 1.0,
            lambda_rate=self.lambda_rate,
            lambda_comp=self.lambda_comp,
            lambda_task=self.lambda_task,
        )

    @property
    def feature_dim(self) -> int:
        return 2 * self.dim + 2


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key == "candidates":
        try:
            return tuple(int(part) for part in raw.split(",") if part.strip())
        except ValueError:
            raise ValidationError(f"config key candidates: bad list {raw!r}") from None
    if key == "gamma_a":
        if raw.lower() == "auto":
            return None
        return _parse_float(key, raw)
    if key in ("seed", "count", "n_patches", "dim", "hidden1", "hidden2",
               "batch_size", "steps"):
        try:
            return int(raw)
        except ValueError:
            raise ValidationError(f"config key {key}: expected integer, got {raw!r}") from None
    if key == "out_dir":
        return raw
    return _parse_float(key, raw)


def _parse_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ValidationError(f"config key {key}: expected number, got {raw!r}") from None


def parse_config_file(path) -> dict:
    """Read `key = value` lines; '#' starts a comment, blanks are skipped."""
    overrides = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ValidationError(f"{path}:{lineno}: expected key = value, got {line.rstrip()!r}")
            key, raw = (part.strip() for part in stripped.split("=", 1))
            if key not in _FIELD_TYPES:
                raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
            overrides[key] = _parse_value(key, raw)
    return overrides


def env_overrides(environ=os.environ) -> dict:
    overrides = {}
    if ENV_SEED in environ:
        overrides["seed"] = _parse_value("seed", environ[ENV_SEED])
    if ENV_OUTDIR in environ:
        overrides["out_dir"] = environ[ENV_OUTDIR]
    return overrides


def resolve_config(file_path=None, flag_overrides=None, environ=os.environ) -> RunConfig:
    """Merge defaults, file, environment, and flags, then validate once.

    flag_overrides must contain only keys the user actually supplied; values
    may be raw strings (parsed here) or already-typed.
    """
    merged = {}
    if file_path is not None:
        merged.update(parse_config_file(file_path))
    merged.update(env_overrides(environ))
    for key, value in (flag_overrides or {}).items():
        if key not in _FIELD_TYPES:
            raise ValidationError(f"unknown config key {key!r}")
        merged[key] = _parse_value(key, value) if isinstance(value, str) else value
    return RunConfig(**merged)
