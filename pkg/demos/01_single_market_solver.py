"""
Finding a market-clearing price
===============================

Builds a tiny two-category market by hand, evaluates its excess demand and
lets the pricing controller look for the zero.
"""
import numpy as np

from gridmarket.agents import Consumer, Provider
from gridmarket.domain import Job
from gridmarket.market import ExcessDemandField, MarketSnapshot
from gridmarket.solver import SolverConfig, find_equilibrium

ratios = [1.0, 2.0]

# %% Twenty consumers with a few jobs each, ten providers with one CPU of each kind
rng = np.random.default_rng(0)
consumers = []
for cid in range(20):
    c = Consumer(cid, wallet=5000.0, valuation=rng.uniform(1.0, 1.5, 2), allowance_period=50, replenish_amount=5000.0)
    c.queue.extend(Job(100 * cid + j, 4) for j in range(int(rng.integers(1, 6))))
    consumers.append(c)
providers = [Provider(pid, np.array([3, 2]), np.array(ratios)) for pid in range(10)]

snap = MarketSnapshot.build(ratios, consumers, providers, step=0)
field = ExcessDemandField(snap)

# %% Excess demand is positive at low prices and negative at high ones
for p in ([0.5, 1.0], [2.0, 4.0], [20.0, 40.0]):
    print(p, "->", field(np.array(p)))

# %% The controller runs damped Newton first and falls back to pattern search.
# The default acceptance threshold of 80 is met at once here, so ask for a tight fit.
result = find_equilibrium(field, np.array(ratios), SolverConfig(norm_threshold=1.0))
print("price   ", np.round(result.price, 3))
print("|xi|    ", round(result.residual_norm, 4))
print("stage   ", result.stage, "| queries", result.queries, "| accepted", result.accepted)
