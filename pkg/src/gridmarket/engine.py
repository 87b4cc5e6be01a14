"""Discrete-time market simulation.

Each step runs, in order: churn, job injection, pricing, trading, payments
(plus budget replenishment), job progress, and draining completions.
All randomness comes from one ``numpy.random.Generator`` drawn in a fixed
order: churn draws, then injections by ascending consumer id, then matching
shuffles.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .agents import Consumer, Provider, update_mpr
from .churn import Pool, PoolState, complete_draining, step_pools
from .domain import Job, JobState, make_categories
from .market import ExcessDemandField, MarketSnapshot, clear_trades
from .solver import SolverConfig, find_equilibrium

log = logging.getLogger(__name__)

MONEY_TOL = 1e-6


@dataclass(frozen=True)
class ScenarioConfig:
    """Every knob of a simulation run. Ranges are inclusive ``(lo, hi)`` pairs."""

    name: str = "custom"
    ratios: tuple = (1.0, 2.0, 3.0)
    cpus_per_provider: tuple = ((1, 30), (1, 15), (1, 10))
    active_consumers: int = 200
    potential_consumers: int = 200
    active_providers: int = 100
    potential_providers: int = 100
    consumer_rate_active: float = 0.1
    consumer_rate_potential: float = 0.1
    provider_rate_active: float = 0.1
    provider_rate_potential: float = 0.1
    job_length: tuple = (2, 10)
    injection_period: int = 50
    injection_batch: tuple = (1, 150)
    background_probability: float = 0.15
    initial_budget: tuple = (50_000.0, 125_000.0)
    allowance_period: int = 50
    replenish_factor: float = 1.0
    valuation: tuple = (1.0, 1.5)
    mpr_window: int = 20
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    total_steps: int = 150

    def __post_init__(self):
        # normalise containers so configs compare equal after a file round trip
        def pair(r, t):
            return (t(r[0]), t(r[1]))

        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        object.__setattr__(self, "cpus_per_provider", tuple(pair(r, int) for r in self.cpus_per_provider))
        object.__setattr__(self, "job_length", pair(self.job_length, int))
        object.__setattr__(self, "injection_batch", pair(self.injection_batch, int))
        object.__setattr__(self, "initial_budget", pair(self.initial_budget, float))
        object.__setattr__(self, "valuation", pair(self.valuation, float))

    @property
    def n_categories(self) -> int:
        return len(self.ratios)

    def validate(self) -> "ScenarioConfig":
        def fail(key, msg):
            raise ValueError(f"{key}: {msg}")

        try:
            make_categories(self.ratios)
        except ValueError as e:
            fail("market.ratios", str(e))
        if len(self.cpus_per_provider) != self.n_categories:
            fail("market.cpus_per_provider", f"need {self.n_categories} ranges, got {len(self.cpus_per_provider)}")
        ranges = {
            "market.cpus_per_provider": self.cpus_per_provider,
            "jobs.length": [self.job_length],
            "jobs.injection_batch": [self.injection_batch],
            "budget.initial": [self.initial_budget],
            "consumers.valuation": [self.valuation],
        }
        for key, rs in ranges.items():
            for lo, hi in rs:
                if lo > hi:
                    fail(key, f"empty range {lo}..{hi}")
        if any(lo < 0 for lo, _ in self.cpus_per_provider):
            fail("market.cpus_per_provider", "CPU counts must be >= 0")
        if self.job_length[0] < 1:
            fail("jobs.length", "job length must be >= 1")
        if self.injection_batch[0] < 0:
            fail("jobs.injection_batch", "batch size must be >= 0")
        if self.initial_budget[0] < 0:
            fail("budget.initial", "budget must be >= 0")
        if self.valuation[0] <= 0:
            fail("consumers.valuation", "valuation factors must be > 0")
        for key in ("active_consumers", "potential_consumers", "active_providers", "potential_providers"):
            if getattr(self, key) < 0:
                fail(key, "pool size must be >= 0")
        for key in ("consumer_rate_active", "consumer_rate_potential",
                    "provider_rate_active", "provider_rate_potential", "background_probability"):
            if not 0.0 <= getattr(self, key) <= 1.0:
                fail(key, "must lie in [0, 1]")
        if self.injection_period < 1:
            fail("jobs.injection_period", "must be >= 1")
        if self.allowance_period < 1:
            fail("budget.allowance_period", "must be >= 1")
        if self.replenish_factor < 0:
            fail("budget.replenish_factor", "must be >= 0")
        if self.mpr_window < 1:
            fail("providers.mpr_window", "must be >= 1")
        if self.total_steps < 0:
            fail("run.total_steps", "must be >= 0")
        return self

    def total_capacity(self) -> float:
        """Mean processing capacity per provider: sum of mean CPU count times ratio."""
        return float(sum((lo + hi) / 2 * r for (lo, hi), r in zip(self.cpus_per_provider, self.ratios)))


@dataclass
class StepMetrics:
    step: int
    prices: np.ndarray
    utilization: np.ndarray
    xi: np.ndarray  # integer-quote excess demand at the trading price
    residual_norm: float  # solver residual; nan when pricing was skipped
    queries: int
    solver_millis: float
    priced: bool
    accepted: bool
    stage: str
    trades: np.ndarray
    demand: np.ndarray
    spend: float
    active_consumers: int
    active_providers: int


class World:
    """Mutable simulation state built from a :class:`ScenarioConfig`."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg.validate()
        self.rng = np.random.default_rng(cfg.seed)
        self.categories = make_categories(cfg.ratios)
        self.ratios = np.array(cfg.ratios, dtype=float)
        n = cfg.n_categories
        rng = self.rng

        n_cons = cfg.active_consumers + cfg.potential_consumers
        self.consumers: dict[int, Consumer] = {}
        self.initial_budget = {}
        for cid in range(n_cons):
            budget = float(rng.uniform(*cfg.initial_budget))
            val = rng.uniform(cfg.valuation[0], cfg.valuation[1], size=n)
            self.consumers[cid] = Consumer(cid, budget, val, cfg.allowance_period, cfg.replenish_factor * budget)
            self.initial_budget[cid] = budget

        n_prov = cfg.active_providers + cfg.potential_providers
        self.providers: dict[int, Provider] = {}
        for pid in range(n_prov):
            cap = [int(rng.integers(lo, hi + 1)) for lo, hi in cfg.cpus_per_provider]
            self.providers[pid] = Provider(pid, np.array(cap), self.ratios.copy(), window=cfg.mpr_window,
                                           mpr_floor=cfg.solver.p_min)

        self.pools = PoolState(
            Pool(set(range(cfg.active_consumers)), set(range(cfg.active_consumers, n_cons)),
                 rate_active=cfg.consumer_rate_active, rate_potential=cfg.consumer_rate_potential),
            Pool(set(range(cfg.active_providers)), set(range(cfg.active_providers, n_prov)),
                 rate_active=cfg.provider_rate_active, rate_potential=cfg.provider_rate_potential),
        )
        self._sync_flags()

        self.prices = self.ratios.copy()  # warm start: one currency unit per unit of performance
        self.step_index = 0
        self.next_job_id = 0
        self.running: dict[int, tuple] = {}  # job id -> (Contract, Job)
        self.wallet_start = math.fsum(c.wallet for c in self.consumers.values())
        self.replenished = 0.0
        self.underflows = 0

    def _sync_flags(self):
        for pool, agents in ((self.pools.consumers, self.consumers), (self.pools.providers, self.providers)):
            for i, a in agents.items():
                a.active = i in pool.active or i in pool.draining
                a.draining = i in pool.draining

    def _consumer_busy(self, cid):
        return bool(self.consumers[cid].contracts)

    def _provider_busy(self, pid):
        return self.providers[pid].busy

    def _new_job(self) -> Job:
        length = int(self.rng.integers(self.cfg.job_length[0], self.cfg.job_length[1] + 1))
        job = Job(self.next_job_id, length)
        self.next_job_id += 1
        return job

    def _inject(self, k: int):
        cfg = self.cfg
        periodic = k % cfg.injection_period == 0
        for cid in sorted(self.pools.consumers.active):
            c = self.consumers[cid]
            if self.rng.random() < cfg.background_probability:
                c.queue.append(self._new_job())
            if periodic:
                for _ in range(int(self.rng.integers(cfg.injection_batch[0], cfg.injection_batch[1] + 1))):
                    c.queue.append(self._new_job())

    def market_providers(self):
        return [p for p in self.providers.values() if p.active]

    def run_step(self) -> StepMetrics:
        cfg = self.cfg
        k = self.step_index
        n = cfg.n_categories

        # 1. churn
        step_pools(self.pools, self.rng, self._consumer_busy, self._provider_busy)
        self._sync_flags()

        # 2. job queues
        self._inject(k)

        # 3. pricing
        snap = MarketSnapshot.build(self.ratios, self.consumers.values(), self.providers.values(), k)
        has_free = float(snap.free.sum()) > 0
        has_demand = bool(np.any((snap.queue_len > 0) & (snap.spend_cap > 0)))
        priced = has_free and has_demand
        residual, queries, millis, accepted, stage = math.nan, 0, 0.0, False, "none"
        if priced:
            fld = ExcessDemandField(snap)
            t0 = time.perf_counter()
            res = find_equilibrium(fld, self.prices, cfg.solver)
            millis = (time.perf_counter() - t0) * 1e3
            self.prices = np.array(res.price, dtype=float)
            residual, queries, accepted, stage = res.residual_norm, res.queries, res.accepted, res.stage
            if not res.accepted:
                log.debug("step %d: trading at best-effort price, |xi|=%.3f", k, residual)
        xi = snap.demand(self.prices, False) - snap.supply(self.prices, False)
        demand = snap.demand(self.prices, False)

        # 4. trading
        trades = np.zeros(n, dtype=np.int64)
        if priced:
            for contract, job in clear_trades(snap, self.prices, self.rng, self.consumers, self.providers, k):
                self.running[job.id] = (contract, job)
                trades[contract.category_index - 1] += 1

        total = np.zeros(n)
        for p in self.market_providers():
            total += p.capacity
        allocated = total - sum((p.free for p in self.market_providers()), np.zeros(n))
        utilization = np.divide(allocated, total, out=np.zeros(n), where=total > 0)

        # 5. payments, MPR samples, replenishment
        spend = self._charge()
        if (k + 1) % cfg.allowance_period == 0:
            for cid in sorted(self.pools.consumers.active):
                c = self.consumers[cid]
                c.wallet += c.replenish_amount
                self.replenished += c.replenish_amount

        # 6. job progress
        for jid in list(self.running):
            contract, job = self.running[jid]
            job.remaining_work -= self.ratios[contract.category_index - 1]
            if job.remaining_work <= 0:
                job.remaining_work = 0.0
                job.state = JobState.DONE
                self.providers[contract.provider_id].free[contract.category_index - 1] += 1
                del self.consumers[contract.consumer_id].contracts[jid]
                del self.running[jid]

        # 7. availability updates
        complete_draining(self.pools.consumers, self._consumer_busy)
        complete_draining(self.pools.providers, self._provider_busy)
        self._sync_flags()

        self.step_index += 1
        return StepMetrics(
            step=k, prices=self.prices.copy(), utilization=utilization, xi=xi,
            residual_norm=residual, queries=queries, solver_millis=millis, priced=priced,
            accepted=accepted, stage=stage, trades=trades, demand=demand, spend=spend,
            active_consumers=len(self.pools.consumers.active),
            active_providers=len(self.pools.providers.active),
        )

    def _charge(self) -> float:
        n = self.cfg.n_categories
        revenue = {pid: np.zeros(n) for pid, p in self.providers.items() if p.active}
        spend = 0.0
        for contract, _ in self.running.values():
            c = self.consumers[contract.consumer_id]
            pay = contract.rate_per_step
            if c.wallet < pay:
                pay = c.wallet
                self.underflows += 1
                log.warning("consumer %d cannot cover contract for job %d; paying %.6f",
                            c.id, contract.job_id, pay)
            c.wallet -= pay
            if c.wallet < 0:
                c.wallet = 0.0
            prov = self.providers[contract.provider_id]
            prov.revenue += pay
            revenue[prov.id][contract.category_index - 1] += pay
            spend += pay
        for pid, rev in revenue.items():
            for i in range(n):
                update_mpr(self.providers[pid], i + 1, rev[i])
        return spend

    def check_invariants(self):
        """Raise AssertionError if money, CPU or job-placement bookkeeping is off."""
        wallets = math.fsum(c.wallet for c in self.consumers.values())
        revenue = math.fsum(p.revenue for p in self.providers.values())
        drift = (self.wallet_start + self.replenished - wallets) - revenue
        assert abs(drift) <= MONEY_TOL, f"money drift {drift}"
        assert all(c.wallet >= 0 for c in self.consumers.values()), "negative wallet"

        n = self.cfg.n_categories
        held = {pid: np.zeros(n, dtype=np.int64) for pid in self.providers}
        seen = set()
        for jid, (contract, job) in self.running.items():
            assert jid not in seen and contract.job_id == jid == job.id, f"job {jid} placed twice"
            seen.add(jid)
            assert job.state is JobState.RUNNING
            held[contract.provider_id][contract.category_index - 1] += 1
            assert self.consumers[contract.consumer_id].contracts.get(jid) is contract
        n_contracts = sum(len(c.contracts) for c in self.consumers.values())
        assert n_contracts == len(self.running), "orphaned consumer contracts"
        for pid, p in self.providers.items():
            assert np.all(p.free >= 0) and np.all(p.free <= p.capacity), f"provider {pid} free count out of range"
            assert np.array_equal(held[pid] + p.free, p.capacity), f"provider {pid} CPU count mismatch"
            if not p.active:
                assert not p.busy, f"inactive provider {pid} still hosts jobs"
        for kind in (self.pools.consumers, self.pools.providers):
            assert not (kind.active & kind.potential or kind.active & kind.draining or kind.potential & kind.draining)
        assert self.pools.consumers.size == len(self.consumers)
        assert self.pools.providers.size == len(self.providers)


@dataclass
class Summary:
    steps: int = 0
    priced_steps: int = 0
    mean_price: list = field(default_factory=list)
    mean_utilization: list = field(default_factory=list)
    mean_xi: list = field(default_factory=list)
    residual_mean: float = math.nan
    residual_max: float = math.nan
    residual_ci95: tuple = (math.nan, math.nan)
    mean_queries: float = math.nan
    mean_millis: float = math.nan
    total_spend: float = 0.0

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "priced_steps": self.priced_steps,
            "mean_price": list(self.mean_price),
            "mean_utilization": list(self.mean_utilization),
            "mean_xi": list(self.mean_xi),
            "residual_mean": self.residual_mean,
            "residual_max": self.residual_max,
            "residual_ci95": list(self.residual_ci95),
            "mean_queries": self.mean_queries,
            "mean_millis": self.mean_millis,
            "total_spend": self.total_spend,
        }


def summarize(metrics: list[StepMetrics]) -> Summary:
    """Per-category means over all steps; solver statistics over priced steps.

    The 95% interval of the residual norm is mean +- 1.96 standard errors.
    """
    if not metrics:
        return Summary()
    prices = np.array([m.prices for m in metrics])
    util = np.array([m.utilization for m in metrics])
    xi = np.array([m.xi for m in metrics])
    s = Summary(
        steps=len(metrics),
        mean_price=[float(v) for v in prices.mean(axis=0)],
        mean_utilization=[float(v) for v in util.mean(axis=0)],
        mean_xi=[float(v) for v in xi.mean(axis=0)],
        total_spend=math.fsum(m.spend for m in metrics),
    )
    priced = [m for m in metrics if m.priced]
    s.priced_steps = len(priced)
    if priced:
        norms = np.array([m.residual_norm for m in priced])
        s.residual_mean = float(norms.mean())
        s.residual_max = float(norms.max())
        se = float(norms.std(ddof=1) / math.sqrt(len(norms))) if len(norms) > 1 else 0.0
        s.residual_ci95 = (s.residual_mean - 1.96 * se, s.residual_mean + 1.96 * se)
        s.mean_queries = float(np.mean([m.queries for m in priced]))
        s.mean_millis = float(np.mean([m.solver_millis for m in priced]))
    return s


def run_simulation(cfg: ScenarioConfig, on_step=None):
    """Run ``cfg.total_steps`` steps; returns ``(metrics, summary)``.

    ``on_step(world, metrics)`` is called after every step, e.g. to assert
    invariants.
    """
    world = World(cfg)
    series = []
    for _ in range(cfg.total_steps):
        m = world.run_step()
        series.append(m)
        if on_step is not None:
            on_step(world, m)
    return series, summarize(series)
