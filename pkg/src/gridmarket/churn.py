"""Active / potential pool dynamics with draining before deactivation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable


@dataclass
class Pool:
    """Membership of one agent kind. Every id sits in exactly one set."""

    active: set = field(default_factory=set)
    potential: set = field(default_factory=set)
    draining: set = field(default_factory=set)
    rate_active: float = 0.0  # per-step probability that an active agent leaves
    rate_potential: float = 0.0  # per-step probability that a potential agent joins

    def __post_init__(self):
        for r in (self.rate_active, self.rate_potential):
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"departure rate must lie in [0, 1], got {r}")
        if (self.active & self.potential) or (self.active & self.draining) or (self.potential & self.draining):
            raise ValueError("pool sets must be disjoint")

    @property
    def size(self) -> int:
        return len(self.active) + len(self.potential) + len(self.draining)


@dataclass
class PoolState:
    consumers: Pool
    providers: Pool


@dataclass
class Transitions:
    drained: list = field(default_factory=list)  # active -> draining
    activated: list = field(default_factory=list)  # potential -> active
    retired: list = field(default_factory=list)  # draining -> potential


def _step_pool(pool: Pool, rng, busy: Callable[[int], bool]) -> Transitions:
    # both draws happen before any move, so nobody joins and leaves in one step
    act = sorted(pool.active)
    pot = sorted(pool.potential)
    leave = rng.random(len(act)) < pool.rate_active
    join = rng.random(len(pot)) < pool.rate_potential
    t = Transitions()
    for i, go in zip(act, leave):
        if go:
            pool.active.remove(i)
            pool.draining.add(i)
            t.drained.append(i)
    for i, go in zip(pot, join):
        if go:
            pool.potential.remove(i)
            pool.active.add(i)
            t.activated.append(i)
    t.retired = complete_draining(pool, busy)
    return t


def complete_draining(pool: Pool, busy: Callable[[int], bool]) -> list:
    """Move draining agents with no running jobs to the potential pool."""
    done = [i for i in sorted(pool.draining) if not busy(i)]
    for i in done:
        pool.draining.remove(i)
        pool.potential.add(i)
    return done


def step_pools(state: PoolState, rng, consumer_busy=lambda i: False, provider_busy=lambda i: False):
    """One churn round: consumers first, then providers.

    Returns ``(consumer_transitions, provider_transitions)``.
    """
    return (_step_pool(state.consumers, rng, consumer_busy),
            _step_pool(state.providers, rng, provider_busy))
