"""Value types shared across the simulator: CPU categories, jobs, prices, contracts."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CategorySpec:
    """A CPU commodity class.

    ``index`` is 1-based; category 1 is the reference CPU with ratio 1.0.
    """

    index: int
    ratio: float

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"category index must be >= 1, got {self.index}")
        if self.ratio < 1.0:
            raise ValueError(f"performance ratio must be >= 1, got {self.ratio}")
        if self.index == 1 and self.ratio != 1.0:
            raise ValueError("reference category 1 must have ratio 1.0")


def make_categories(ratios) -> tuple[CategorySpec, ...]:
    """Build contiguous categories 1..n from strictly increasing ratios."""
    ratios = [float(r) for r in ratios]
    if not ratios:
        raise ValueError("at least one category is required")
    if any(b <= a for a, b in zip(ratios, ratios[1:])):
        raise ValueError(f"ratios must be strictly increasing: {ratios}")
    return tuple(CategorySpec(i + 1, r) for i, r in enumerate(ratios))


class JobState(enum.Enum):
    QUEUED = "queued"
    RUNNING = "running"
    DONE = "done"


@dataclass
class Job:
    id: int
    normalized_length: int
    remaining_work: float = -1.0
    state: JobState = JobState.QUEUED

    def __post_init__(self):
        if self.normalized_length < 1:
            raise ValueError(f"job length must be >= 1, got {self.normalized_length}")
        if self.remaining_work < 0:
            self.remaining_work = float(self.normalized_length)


def duration_on_category(job: Job, cat: CategorySpec) -> int:
    """Steps needed to run ``job`` on one CPU of ``cat`` (ceiling, at least 1)."""
    return max(1, math.ceil(job.normalized_length / cat.ratio))


def euclidean_norm(xi) -> float:
    """Residual norm of an excess-demand vector."""
    xi = np.asarray(xi, dtype=float)
    return float(np.sqrt(np.sum(xi * xi)))


class PriceVector(np.ndarray):
    """A 1-D float array of strictly positive prices, one per category."""

    def __new__(cls, prices):
        arr = np.array(prices, dtype=float).reshape(-1)
        if arr.size == 0:
            raise ValueError("price vector must be non-empty")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ValueError(f"prices must be finite and > 0, got {arr}")
        return arr.view(cls)


@dataclass(frozen=True)
class Contract:
    """A CPU lease, charged at ``rate_per_step`` every step the job runs."""

    consumer_id: int
    provider_id: int
    category_index: int
    rate_per_step: float
    job_id: int
    start_step: int
