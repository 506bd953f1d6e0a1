"""Benchmark retention arithmetic and trained-policy quality reports.

Retention normalizes a score between published lower and upper bounds:
100 * (result - lower) / (upper - lower). It is deliberately not clamped at
100 because a model can beat its upper bound on an individual benchmark.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import FormatError, ValidationError
from .features import assemble_features
from .mlp import MlpParams
from .predictor import CandidateSet, infer_count, predict_policy

UPPER_MODEL = "Upper Bound"
LOWER_MODEL = "Lower Bound"

# Published row averages the shipped score table must reproduce (+-0.05).
EXPECTED_AVERAGES = {
    "Q-Former": 57.2,
    "Avg. Pool": 64.1,
    "VoCo-LLaMA": 81.0,
    "Adaptive-VoCo": 89.3,
}

AVERAGE_TOLERANCE = 0.05


@dataclass(frozen=True)
class BenchmarkRow:
    name: str
    result: float
    upper: float
    lower: float

    def __post_init__(self):
        if not self.upper > self.lower:
            raise ValidationError(
                f"{self.name}: upper bound {self.upper} must exceed lower bound {self.lower}"
            )


def retention(row: BenchmarkRow) -> float:
    """Percentage of the lower-to-upper span recovered by the result."""
    return 100.0 * (row.result - row.lower) / (row.upper - row.lower)


def average_retention(rows) -> float:
    rows = list(rows)
    if not rows:
        raise ValidationError("average_retention needs at least one row")
    return float(np.mean([retention(r) for r in rows]))


def default_table_path():
    return resources.files("vocorate").joinpath("data/benchmark_scores.csv")


def load_score_table(path=None) -> dict:
    """Read the (model, benchmark, value) CSV into {model: {benchmark: value}}."""
    source = path if path is not None else default_table_path()
    table = {}
    with open(source, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["model", "benchmark", "value"]:
            raise FormatError(f"line 1: expected header model,benchmark,value, got {header}")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != 3:
                raise FormatError(f"line {lineno}: expected 3 fields, got {len(rec)}")
            model, benchmark, raw = rec
            try:
                value = float(raw)
            except ValueError:
                raise FormatError(f"line {lineno}: bad value {raw!r}") from None
            table.setdefault(model, {})[benchmark] = value
    for bound in (UPPER_MODEL, LOWER_MODEL):
        if bound not in table:
            raise FormatError(f"score table is missing the {bound!r} rows")
    return table


def retention_rows(table: dict, model: str) -> list:
    """Per-benchmark rows for one model, paired with the bound rows."""
    if model not in table:
        raise ValidationError(f"unknown model {model!r}")
    upper, lower = table[UPPER_MODEL], table[LOWER_MODEL]
    rows = []
    for benchmark, value in table[model].items():
        if benchmark not in upper or benchmark not in lower:
            raise FormatError(f"benchmark {benchmark!r} lacks bound rows")
        rows.append(BenchmarkRow(name=benchmark, result=value,
                                 upper=upper[benchmark], lower=lower[benchmark]))
    return rows


def retention_report(table: dict) -> dict:
    """{model: (per-benchmark retention dict, average)} for every non-bound model."""
    report = {}
    for model in table:
        if model in (UPPER_MODEL, LOWER_MODEL):
            continue
        rows = retention_rows(table, model)
        report[model] = ({r.name: retention(r) for r in rows}, average_retention(rows))
    return report


@dataclass
class PolicyReport:
    """Per-tier allocation behaviour of a count policy on a tiered dataset."""

    tiers: list  # ascending dial values
    tier_scene_counts: list
    tier_mean_expected: list
    tier_mean_inferred: list
    monotonic: bool
    mean_inferred: float


def policy_report(dials, policies, candidates: CandidateSet) -> PolicyReport:
    """Aggregate per-tier statistics from per-scene policies."""
    dials = np.asarray(list(dials), dtype=np.float64)
    policies = list(policies)
    if dials.shape[0] != len(policies) or not policies:
        raise ValidationError("need one policy per scene and at least one scene")
    k = candidates.as_array()
    expected = np.asarray([float(p.probs @ k) for p in policies])
    inferred = np.asarray([infer_count(p, candidates) for p in policies], dtype=np.float64)

    tiers = sorted(set(dials.tolist()))
    counts, mean_expected, mean_inferred = [], [], []
    for tier in tiers:
        mask = dials == tier
        counts.append(int(mask.sum()))
        mean_expected.append(float(expected[mask].mean()))
        mean_inferred.append(float(inferred[mask].mean()))
    monotonic = all(b >= a for a, b in zip(mean_inferred, mean_inferred[1:]))
    return PolicyReport(
        tiers=tiers,
        tier_scene_counts=counts,
        tier_mean_expected=mean_expected,
        tier_mean_inferred=mean_inferred,
        monotonic=monotonic,
        mean_inferred=float(inferred.mean()),
    )


def evaluate_policy(params: MlpParams, dataset, candidates: CandidateSet,
                    tau_e: float = 1.0) -> PolicyReport:
    """Run the predictor over a dataset and summarize counts per dial tier."""
    if len(dataset) == 0:
        raise ValidationError("cannot evaluate a policy on an empty dataset")
    dials, policies = [], []
    for spec, patches, attention in dataset.scenes:
        feats = assemble_features(patches, attention, tau_e)
        policies.append(predict_policy(params, feats))
        dials.append(spec.complexity_dial)
    return policy_report(dials, policies, candidates)
