"""Excess-demand evaluation over a frozen market snapshot, and trade clearing."""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass

import numpy as np

from .agents import Consumer, Provider, spend_capacity_per_step
from .domain import Contract, Job, JobState


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MarketSnapshot:
    """Quotation inputs of all active agents at the start of a pricing phase.

    Draining and inactive agents are excluded; they neither demand nor supply.
    """

    ratios: np.ndarray
    consumer_ids: np.ndarray
    queue_len: np.ndarray
    spend_cap: np.ndarray
    valuation: np.ndarray  # (consumers, categories)
    provider_ids: np.ndarray
    free: np.ndarray  # (providers, categories)
    capacity: np.ndarray
    mpr: np.ndarray

    @classmethod
    def build(cls, ratios, consumers, providers, step: int) -> "MarketSnapshot":
        n = len(ratios)
        cons = [c for c in consumers if c.active and not c.draining]
        provs = [p for p in providers if p.active and not p.draining]
        return cls(
            ratios=_frozen(ratios),
            consumer_ids=_frozen([c.id for c in cons], np.int64),
            queue_len=_frozen([len(c.queue) for c in cons]),
            spend_cap=_frozen([spend_capacity_per_step(c, step) for c in cons]),
            valuation=_frozen(np.reshape([c.valuation for c in cons], (len(cons), n))),
            provider_ids=_frozen([p.id for p in provs], np.int64),
            free=_frozen(np.reshape([p.free for p in provs], (len(provs), n))),
            capacity=_frozen(np.reshape([p.capacity for p in provs], (len(provs), n))),
            mpr=_frozen(np.reshape([p.mpr_vector() for p in provs], (len(provs), n))),
        )

    @property
    def n(self) -> int:
        return len(self.ratios)

    def consumer_quotes(self, p, smoothed: bool):
        """Chosen 0-based category and quantity for each consumer."""
        norm = p / (self.ratios * self.valuation)
        choice = np.argmin(norm, axis=1) if len(self.queue_len) else np.zeros(0, dtype=np.int64)
        with np.errstate(divide="ignore", invalid="ignore"):
            qty = np.minimum(self.queue_len, self.spend_cap / p[choice])
        qty = np.where((self.queue_len > 0) & (self.spend_cap > 0), qty, 0.0)
        if not smoothed:
            qty = np.floor(qty)
        return choice, qty

    def provider_quotes(self, p, smoothed: bool) -> np.ndarray:
        """Offered units per provider and category."""
        if np.any(self.mpr[self.capacity > 0] <= 0):
            raise RuntimeError("internal error: non-positive MPR in snapshot")
        with np.errstate(divide="ignore", invalid="ignore"):
            q = self.capacity * np.minimum(1.0, p / self.mpr)
        q = np.where(self.capacity > 0, q, 0.0)
        if not smoothed:
            q = np.floor(q + 0.5)
        return np.minimum(self.free, q)

    def demand(self, p, smoothed: bool) -> np.ndarray:
        choice, qty = self.consumer_quotes(p, smoothed)
        return np.bincount(choice, weights=qty, minlength=self.n).astype(float)

    def supply(self, p, smoothed: bool) -> np.ndarray:
        return self.provider_quotes(p, smoothed).sum(axis=0) if len(self.free) else np.zeros(self.n)


class ExcessDemandField:
    """Callable p -> excess demand, counting every evaluation.

    Calling the field uses the smoothed (real-valued) quotes the solver needs.
    """

    def __init__(self, snapshot: MarketSnapshot):
        self.snapshot = snapshot
        self.query_count = 0
        self._lock = threading.Lock()

    @property
    def n(self) -> int:
        return self.snapshot.n

    def evaluate(self, p, smoothed: bool = True) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n,):
            raise ValueError(f"expected {self.n} prices, got shape {p.shape}")
        if np.any(p <= 0):
            raise ValueError(f"prices must be > 0, got {p}")
        with self._lock:
            self.query_count += 1
        return self.snapshot.demand(p, smoothed) - self.snapshot.supply(p, smoothed)

    __call__ = evaluate


def evaluate_xi(field: ExcessDemandField, p, smoothed: bool = True) -> np.ndarray:
    return field.evaluate(p, smoothed)


def clear_trades(snapshot: MarketSnapshot, prices, rng, consumers: dict, providers: dict, step: int) -> list[tuple[Contract, Job]]:
    """Match integer demand against integer supply at ``prices``.

    Consumers are visited in a shuffled order; within each category the
    offering providers are shuffled once and filled front to back. Matched
    jobs leave the consumer queue FIFO and start running; provider free
    counts drop by one per contract.

    ``consumers`` and ``providers`` map ids to the live agents behind the
    snapshot.
    """
    p = np.asarray(prices, dtype=float)
    choice, qty = snapshot.consumer_quotes(p, smoothed=False)
    offered = snapshot.provider_quotes(p, smoothed=False).astype(np.int64)

    consumer_order = rng.permutation(len(snapshot.consumer_ids))
    queues = []
    for i in range(snapshot.n):
        idx = np.flatnonzero(offered[:, i] > 0)
        queues.append(deque(int(j) for j in idx[rng.permutation(len(idx))]))

    contracts = []
    for ci in consumer_order:
        want = int(qty[ci])
        if want <= 0:
            continue
        k = int(choice[ci])
        cons: Consumer = consumers[int(snapshot.consumer_ids[ci])]
        avail = queues[k]
        while want > 0 and avail:
            pj = avail[0]
            prov: Provider = providers[int(snapshot.provider_ids[pj])]
            job = cons.queue.popleft()
            job.state = JobState.RUNNING
            contract = Contract(cons.id, prov.id, k + 1, float(p[k]), job.id, step)
            cons.contracts[job.id] = contract
            prov.free[k] -= 1
            offered[pj, k] -= 1
            if offered[pj, k] == 0:
                avail.popleft()
            contracts.append((contract, job))
            want -= 1
    return contracts
