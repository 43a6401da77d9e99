"""Campaign quality metrics and small aggregation helpers.

Regret is always reported in minimization space (best-found minus reference
minimum); recall metrics are fractions of a designated top set already
sampled. Both are computed from raw native-sense targets, never from the
engine's normalized values.
"""

from __future__ import annotations

import csv
import math

import numpy as np
from scipy.stats import rankdata

from .errors import UndefinedMetricError

LOG_IR_FLOOR = 1e-10


def immediate_regret(best_observed: float, reference_minimum: float) -> float:
    """best-so-far minus the reference minimum, clamped at zero.

    Tiny negative differences (within 1e-12) are rounding and clamp to 0;
    anything more negative means the reference is wrong and raises.
    """
    diff = best_observed - reference_minimum
    if diff < -1e-12:
        raise ValueError(
            f"best observed {best_observed!r} undercuts the reference minimum "
            f"{reference_minimum!r}"
        )
    return max(diff, 0.0)


def log10_regret(values, floor: float = LOG_IR_FLOOR) -> np.ndarray:
    """log10 of regret values with a positive floor so zeros stay plottable."""
    v = np.asarray(values, dtype=float)
    return np.log10(np.maximum(v, floor))


def top_fraction_set(targets: np.ndarray, sense: str, fraction: float) -> set[int]:
    """Indices of the best ceil(fraction * N) candidates by raw target.

    Cutoff ties resolve toward the lowest index, so the set has exactly
    ceil(fraction * N) members.
    """
    targets = np.asarray(targets, dtype=float)
    n = targets.size
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    m = math.ceil(fraction * n)
    key = -targets if sense == "maximize" else targets
    order = np.lexsort((np.arange(n), key))
    return {int(i) for i in order[:m]}


def recall_top_fraction(
    selected: set[int], targets: np.ndarray, sense: str, fraction: float = 0.01
) -> float:
    top = top_fraction_set(targets, sense, fraction)
    return len(top & set(selected)) / len(top)


def recall_above_threshold(selected: set[int], targets: np.ndarray, threshold: float) -> float:
    """Fraction of candidates with raw target above ``threshold`` found so far."""
    targets = np.asarray(targets, dtype=float)
    top = set(np.flatnonzero(targets > threshold).tolist())
    if not top:
        raise UndefinedMetricError(
            f"no candidate exceeds threshold {threshold!r}; recall is undefined"
        )
    return len(top & set(selected)) / len(top)


def average_rank(final_scores: np.ndarray, higher_better: bool = True):
    """Mean rank (1 = best) and standard error per method.

    ``final_scores`` has one row per repetition, one column per method. Ties
    within a repetition share the average of the tied ranks.
    """
    scores = np.asarray(final_scores, dtype=float)
    if scores.ndim != 2:
        raise ValueError("final_scores must be repetitions x methods")
    ranked = np.vstack([
        rankdata(-row if higher_better else row, method="average")
        for row in scores
    ])
    mean = ranked.mean(axis=0)
    r = scores.shape[0]
    se = ranked.std(axis=0, ddof=1) / math.sqrt(r) if r > 1 else np.zeros(scores.shape[1])
    return mean, se


def mean_and_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("no values to aggregate")
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


METRIC_CSV_HEADER = ["method", "seed", "iteration", "evals", "metric_name", "value"]


def write_metrics_csv(path: str, rows: list[dict]) -> None:
    """Write per-iteration metric rows in the canonical column order."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_CSV_HEADER, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_metrics_csv(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != METRIC_CSV_HEADER:
            raise ValueError(f"unexpected metrics header {reader.fieldnames!r}")
        out = []
        for row in reader:
            row["seed"] = int(row["seed"])
            row["iteration"] = int(row["iteration"])
            row["evals"] = int(row["evals"])
            row["value"] = float(row["value"])
            out.append(row)
        return out
