"""Consumer and provider behaviour: category choice, demand sizing, supply rule."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .domain import CategorySpec, Contract, Job


@dataclass
class Consumer:
    id: int
    wallet: float
    valuation: np.ndarray
    allowance_period: int
    replenish_amount: float
    queue: deque = field(default_factory=deque)
    contracts: dict = field(default_factory=dict)  # job id -> Contract
    active: bool = True
    draining: bool = False

    def committed_rate(self) -> float:
        return float(sum(c.rate_per_step for c in self.contracts.values()))

    @property
    def running_jobs(self) -> int:
        return len(self.contracts)


@dataclass
class Provider:
    id: int
    capacity: np.ndarray
    mpr_seed: np.ndarray
    window: int = 20
    mpr_floor: float = 1e-2  # an all-zero revenue window must not yield MPR 0
    free: np.ndarray = None
    mpr_window: list = None
    active: bool = True
    draining: bool = False
    revenue: float = 0.0

    def __post_init__(self):
        self.capacity = np.asarray(self.capacity, dtype=np.int64)
        self.mpr_seed = np.asarray(self.mpr_seed, dtype=float)
        if np.any(self.capacity < 0):
            raise ValueError("capacities must be >= 0")
        if self.window < 1:
            raise ValueError("MPR window must be >= 1")
        if self.free is None:
            self.free = self.capacity.copy()
        if self.mpr_window is None:
            self.mpr_window = [deque(maxlen=self.window) for _ in self.capacity]

    def mpr(self, i: int) -> float:
        """Mean revenue per step and per CPU for 0-based category ``i``."""
        w = self.mpr_window[i]
        if not w:
            return float(self.mpr_seed[i])
        return max(float(sum(w) / len(w)), self.mpr_floor)

    def mpr_vector(self) -> np.ndarray:
        return np.array([self.mpr(i) for i in range(len(self.capacity))])

    @property
    def busy(self) -> bool:
        return bool(np.any(self.free < self.capacity))


def normalized_price(p_i: float, cat: CategorySpec, v_i: float) -> float:
    """Price per unit of performance, weighted by the consumer's valuation."""
    if p_i <= 0:
        raise ValueError(f"price must be > 0, got {p_i}")
    if v_i <= 0:
        raise ValueError(f"valuation must be > 0, got {v_i}")
    return p_i / (cat.ratio * v_i)


def spend_capacity_per_step(c: Consumer, current_step: int) -> float:
    """Per-step budget left after live contracts, spreading the wallet over
    the rest of the allowance period. ``current_step`` is 0-based."""
    remaining = c.allowance_period - (current_step % c.allowance_period)
    return max(0.0, c.wallet / remaining - c.committed_rate())


def choose_category(prices, ratios, valuation) -> int:
    """0-based index of the cheapest normalized price; ties go to the lowest index."""
    norm = np.asarray(prices, float) / (np.asarray(ratios, float) * np.asarray(valuation, float))
    return int(np.argmin(norm))


def demand_quantity(queue_len: int, cap: float, price: float, smoothed: bool) -> float:
    if queue_len <= 0 or cap <= 0:
        return 0.0
    q = min(float(queue_len), cap / price)
    return q if smoothed else float(math.floor(q))


def formulate_demand(c: Consumer, prices, ratios, current_step: int, smoothed: bool) -> np.ndarray:
    """Demand vector of one consumer: non-zero only in its preferred category."""
    prices = np.asarray(prices, float)
    if np.any(prices <= 0):
        raise ValueError("prices must be > 0")
    out = np.zeros(len(prices))
    k = choose_category(prices, ratios, c.valuation)
    out[k] = demand_quantity(len(c.queue), spend_capacity_per_step(c, current_step), prices[k], smoothed)
    return out


def supply_quantity(free: float, capacity: float, price: float, mpr: float, smoothed: bool) -> float:
    """Units offered at ``price``: a share ``min(1, price/mpr)`` of capacity, capped by free CPUs."""
    if capacity <= 0:
        return 0.0
    if mpr <= 0:
        raise RuntimeError(f"internal error: non-positive MPR {mpr}")
    q = capacity * min(1.0, price / mpr)
    if not smoothed:
        q = math.floor(q + 0.5)
    return float(min(free, q))


def provider_supply(prov: Provider, cat_index: int, p_i: float, smoothed: bool) -> float:
    """Supply of ``prov`` in 1-based category ``cat_index`` at price ``p_i``."""
    if p_i <= 0:
        raise ValueError(f"price must be > 0, got {p_i}")
    if not prov.active or prov.draining:
        return 0.0
    i = cat_index - 1
    return supply_quantity(prov.free[i], prov.capacity[i], p_i, prov.mpr(i), smoothed)


def update_mpr(prov: Provider, cat_index: int, revenue_this_step: float) -> None:
    """Record one per-CPU revenue sample for 1-based ``cat_index``."""
    i = cat_index - 1
    if prov.capacity[i] == 0:
        return
    prov.mpr_window[i].append(revenue_this_step / prov.capacity[i])


def make_contract(c: Consumer, prov: Provider, cat_index: int, rate: float, job: Job, step: int) -> Contract:
    return Contract(c.id, prov.id, cat_index, float(rate), job.id, step)
