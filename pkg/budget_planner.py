"""
Repetition and token-budget arithmetic
Epochs, tokens per parameter, Chinchilla multipliers and the
weight-decay-vs-repeats rule (scale weight decay by sqrt(repeats)).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from corpus_io import CurationError

DEFAULT_RATIO = 20.0
DEFAULT_WEIGHT_DECAY = 0.0316
# Weight decay multipliers that were actually tried; grid mode snaps to these.
WD_GRID = (1, 2, 3)


class PlannerError(CurationError):
    pass


def _positive(name, value):
    if value is None or value <= 0:
        raise PlannerError(f"{name} must be positive, got {value}")


def chinchilla_tokens(params, ratio=DEFAULT_RATIO):
    """Compute-optimal token count: round(ratio * params)."""
    if params < 1:
        raise PlannerError(f"params must be >= 1, got {params}")
    _positive("ratio", ratio)
    return round(ratio * params)


def epochs(total_tokens, unique_tokens):
    """Passes over the unique pool, as a real number."""
    if unique_tokens is None or unique_tokens < 1:
        raise PlannerError(f"unique_tokens must be >= 1, got {unique_tokens}")
    if total_tokens < 1:
        raise PlannerError(f"total_tokens must be >= 1, got {total_tokens}")
    return total_tokens / unique_tokens


def full_passes(total_tokens, unique_tokens):
    return math.ceil(epochs(total_tokens, unique_tokens))


def weight_decay(base, repeats, grid=False):
    """
    Weight decay for a dataset repeated `repeats` times.

    Args:
        base: Single-epoch weight decay
        repeats: Epochs, at least 1
        grid: Snap the sqrt multiplier to the nearest of 1, 2, 3

    Returns:
        base * sqrt(repeats), or base * snapped multiplier
    """
    _positive("base weight decay", base)
    if repeats < 1:
        raise PlannerError(f"repeats must be >= 1, got {repeats}")
    multiplier = math.sqrt(repeats)
    if grid:
        multiplier = min(WD_GRID, key=lambda m: (abs(m - multiplier), m))
    return base * multiplier


def tokens_for_multiplier(params, multiplier, ratio=DEFAULT_RATIO):
    """Total tokens at `multiplier` times the Chinchilla-optimal count."""
    _positive("multiplier", multiplier)
    return round(multiplier * chinchilla_tokens(params, ratio))


def unique_tokens_for_epochs(total_tokens, n_epochs):
    """Unique pool size that `n_epochs` passes over would consume."""
    _positive("epochs", n_epochs)
    if n_epochs < 1:
        raise PlannerError(f"epochs must be >= 1, got {n_epochs}")
    return math.ceil(total_tokens / n_epochs)


@dataclass(frozen=True)
class ComputeAllocation:
    params: int
    unique_tokens: int
    total_tokens: int
    base_weight_decay: float
    ratio: float
    wd_grid: bool
    epochs: float
    full_passes: int
    tokens_per_param: float
    chinchilla_tokens: int
    chinchilla_multiplier: float
    recommended_weight_decay: float

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def recompute(self):
        return allocation_report(self.params, self.unique_tokens, self.total_tokens,
                                 self.base_weight_decay, self.ratio, self.wd_grid)


def allocation_report(params, unique_tokens, total_tokens, base_wd=DEFAULT_WEIGHT_DECAY,
                      ratio=DEFAULT_RATIO, wd_grid=False):
    """
    Full repetition plan for a model size and token pool.

    Args:
        params: Model parameters
        unique_tokens: Tokens in the (filtered) pool
        total_tokens: Tokens seen in training
        base_wd: Single-epoch weight decay
        ratio: Chinchilla tokens per parameter
        wd_grid: Snap the weight decay multiplier to the tested grid

    Returns:
        ComputeAllocation
    """
    for name, value in (("params", params), ("unique_tokens", unique_tokens),
                        ("total_tokens", total_tokens), ("base_wd", base_wd), ("ratio", ratio)):
        _positive(name, value)
    n_epochs = epochs(total_tokens, unique_tokens)
    optimal = chinchilla_tokens(params, ratio)
    return ComputeAllocation(
        params=int(params),
        unique_tokens=int(unique_tokens),
        total_tokens=int(total_tokens),
        base_weight_decay=base_wd,
        ratio=ratio,
        wd_grid=wd_grid,
        epochs=n_epochs,
        full_passes=math.ceil(n_epochs),
        tokens_per_param=total_tokens / params,
        chinchilla_tokens=optimal,
        chinchilla_multiplier=total_tokens / (ratio * params),
        recommended_weight_decay=weight_decay(base_wd, max(n_epochs, 1.0), wd_grid),
    )


def compare_repetition(params, unique_tokens, multiplier=1.0, superset_factor=10,
                       base_wd=DEFAULT_WEIGHT_DECAY, ratio=DEFAULT_RATIO, total_tokens=None):
    """
    Repeating a filtered pool versus one pass over a larger superset, at the
    same compute.

    total_tokens, when given, replaces the multiplier-derived budget.

    Returns:
        Dict with "repeat" and "superset" ComputeAllocations
    """
    total = total_tokens if total_tokens is not None else tokens_for_multiplier(params, multiplier, ratio)
    superset = unique_tokens * superset_factor
    if superset < total:
        raise PlannerError(f"superset of {superset} tokens cannot cover {total} tokens in one pass")
    return {
        "repeat": allocation_report(params, unique_tokens, total, base_wd, ratio),
        "superset": allocation_report(params, superset, total, base_wd, ratio),
    }


if __name__ == "__main__":
    import json
    import sys

    if len(sys.argv) < 4:
        print("Usage: python budget_planner.py <params> <unique_tokens> <total_tokens> [base_wd] [ratio]")
        print("\nExample:")
        print("  python budget_planner.py 12.6e9 25.2e9 252e9")
        sys.exit(1)

    report = allocation_report(
        int(float(sys.argv[1])),
        int(float(sys.argv[2])),
        int(float(sys.argv[3])),
        float(sys.argv[4]) if len(sys.argv) > 4 else DEFAULT_WEIGHT_DECAY,
        float(sys.argv[5]) if len(sys.argv) > 5 else DEFAULT_RATIO,
    )

    print(f"Parameters:        {report.params:,}")
    print(f"Unique tokens:     {report.unique_tokens:,}")
    print(f"Total tokens:      {report.total_tokens:,}")
    print("-" * 50)
    print(f"Epochs:            {report.epochs:.3f} ({report.full_passes} passes)")
    print(f"Tokens/param:      {report.tokens_per_param:.2f}")
    print(f"Chinchilla x:      {report.chinchilla_multiplier:.3f}")
    print(f"Weight decay:      {report.recommended_weight_decay:.5f}")
    print(f"  grid mode:       {weight_decay(report.base_weight_decay, max(report.epochs, 1.0), grid=True):.5f}")
    print("\n" + json.dumps(report.to_dict(), indent=2))
