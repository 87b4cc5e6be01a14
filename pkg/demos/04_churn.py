"""
Agents joining and leaving
==========================

With equal leave and join rates the active pool wanders around its starting
size. Busy agents drain before they leave.
"""
import numpy as np

from gridmarket.churn import Pool, PoolState, step_pools

rng = np.random.default_rng(7)
size = 2000
state = PoolState(Pool(set(range(size)), set(range(size, 2 * size)), rate_active=0.1, rate_potential=0.1),
                  Pool(set(range(size)), set(range(size, 2 * size)), rate_active=0.1, rate_potential=0.1))

# pretend every tenth provider still runs a job for the first 20 steps
busy = lambda pid: pid % 10 == 0 and step < 20

active = []
for step in range(300):
    step_pools(state, rng, provider_busy=busy)
    active.append(len(state.consumers.active))
    if step in (0, 19, 20):
        print(f"step {step:>3}: draining providers = {len(state.providers.draining)}")

active = np.array(active)
print(f"active consumers: mean {active.mean():.1f}, min {active.min()}, max {active.max()} (start {size})")
