import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridmarket.agents import formulate_demand, provider_supply
from gridmarket.market import ExcessDemandField, MarketSnapshot, clear_trades, evaluate_xi

from conftest import make_consumer, make_provider

RATIOS = np.array([1.0, 2.0])


def snapshot(consumers, providers, ratios=RATIOS, step=0):
    return MarketSnapshot.build(ratios, consumers, providers, step)


def test_single_consumer_single_provider_hand_computed():
    # spend capacity 100 = 5000 / 50 remaining steps
    c = make_consumer(wallet=5000, valuation=(1, 1), jobs=10)
    prov = make_provider(capacity=(10, 10), seed=(10.0, 20.0))
    field = ExcessDemandField(snapshot([c], [prov]))
    p = np.array([10.0, 20.0])
    # both normalized prices are 10; the tie goes to category 1
    # demand_1 = min(10 jobs, 100 / 10) = 10; supply = 10 * min(1, p/MPR) = 10 in each category
    expected = np.array([10.0 - 10.0, 0.0 - 10.0])
    assert np.allclose(field(p), expected)
    assert field.query_count == 1


def test_field_matches_per_agent_quotes(rng):
    consumers = [make_consumer(i, wallet=rng.uniform(100, 5000), valuation=rng.uniform(1, 1.5, 2),
                               jobs=int(rng.integers(0, 12))) for i in range(15)]
    providers = [make_provider(i, capacity=rng.integers(0, 9, 2), seed=rng.uniform(1, 30, 2)) for i in range(6)]
    providers[0].free[0] = 0
    field = ExcessDemandField(snapshot(consumers, providers))
    for _ in range(20):
        p = rng.uniform(0.5, 60, 2)
        for smoothed in (True, False):
            d = sum(formulate_demand(c, p, RATIOS, 0, smoothed) for c in consumers)
            s = np.array([sum(provider_supply(pr, i + 1, p[i], smoothed) for pr in providers) for i in range(2)])
            assert np.allclose(evaluate_xi(field, p, smoothed), d - s)


def test_no_consumers_gives_non_positive_xi():
    field = ExcessDemandField(snapshot([], [make_provider(capacity=(5, 3))]))
    xi = field(np.array([4.0, 4.0]))
    assert np.all(xi <= 0) and xi.sum() < 0


def test_no_providers_gives_non_negative_xi():
    field = ExcessDemandField(snapshot([make_consumer(jobs=3)], []))
    xi = field(np.array([4.0, 4.0]))
    assert np.all(xi >= 0) and xi.sum() > 0


def test_inactive_agents_excluded():
    c = make_consumer(jobs=4)
    c.draining = True
    prov = make_provider()
    prov.draining = True
    snap = snapshot([c], [prov])
    assert len(snap.consumer_ids) == 0 and len(snap.provider_ids) == 0


def test_field_is_pure_and_counts(rng):
    consumers = [make_consumer(i, jobs=5) for i in range(3)]
    field = ExcessDemandField(snapshot(consumers, [make_provider()]))
    p = np.array([3.0, 5.0])
    a, b = field(p), field(p)
    assert np.array_equal(a, b)
    assert field.query_count == 2
    with pytest.raises(ValueError):
        field(np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        field.snapshot.queue_len[0] = 3


@settings(max_examples=40)
@given(st.floats(1.0, 200.0), st.floats(1.0, 200.0))
def test_own_price_monotone_with_fixed_choice(p1, p2):
    # one category: no switching, so excess demand falls as the price rises
    consumers = [make_consumer(i, wallet=1000 * (i + 1), valuation=(1.0,), jobs=20) for i in range(5)]
    providers = [make_provider(i, capacity=(8,), seed=(40.0,)) for i in range(3)]
    field = ExcessDemandField(snapshot(consumers, providers, ratios=np.array([1.0])))
    lo, hi = sorted((p1, p2))
    assert field(np.array([hi]))[0] <= field(np.array([lo]))[0] + 1e-9


def _market(rng, n_cons=6, n_prov=4):
    consumers = {i: make_consumer(i, wallet=rng.uniform(500, 5000), valuation=rng.uniform(1, 1.5, 2),
                                  jobs=int(rng.integers(0, 8))) for i in range(n_cons)}
    providers = {i: make_provider(i, capacity=rng.integers(1, 6, 2), seed=(5.0, 10.0)) for i in range(n_prov)}
    return consumers, providers


def test_clear_trades_respects_demand_and_supply(rng):
    for trial in range(20):
        consumers, providers = _market(rng)
        snap = snapshot(consumers.values(), providers.values())
        p = rng.uniform(2, 20, 2)
        d = snap.demand(p, False)
        s = snap.supply(p, False)
        queued_before = {i: len(c.queue) for i, c in consumers.items()}
        trades = clear_trades(snap, p, rng, consumers, providers, step=3)
        per_cat = np.bincount([c.category_index - 1 for c, _ in trades], minlength=2)
        assert np.all(per_cat <= np.minimum(d, s))
        assert np.array_equal(per_cat, np.minimum(d, s))  # greedy matching fills the short side
        for c, job in trades:
            assert c.rate_per_step == p[c.category_index - 1]
            assert c.start_step == 3 and job.state.value == "running"
        for i, c in consumers.items():
            assert queued_before[i] - len(c.queue) == len(c.contracts)
        for prov in providers.values():
            assert np.all(prov.free >= 0)


def test_demand_exceeds_supply():
    consumers = {0: make_consumer(0, wallet=50_000, valuation=(1.0, 1.0), jobs=5)}
    providers = {0: make_provider(0, capacity=(3, 0), seed=(1.0, 1.0))}
    snap = snapshot(consumers.values(), providers.values())
    trades = clear_trades(snap, np.array([1.0, 50.0]), np.random.default_rng(0), consumers, providers, 0)
    assert len(trades) == 3 and len(consumers[0].queue) == 2
    assert providers[0].free.tolist() == [0, 0]


def test_zero_demand_no_trades(rng):
    consumers = {0: make_consumer(0, jobs=0)}
    providers = {0: make_provider(0)}
    snap = snapshot(consumers.values(), providers.values())
    assert clear_trades(snap, np.array([1.0, 1.0]), rng, consumers, providers, 0) == []
    assert providers[0].free.tolist() == [10, 10]


def test_shortage_split_conserves_units():
    winners = set()
    for seed in range(30):
        consumers = {i: make_consumer(i, wallet=50_000, valuation=(1.0, 1.0), jobs=2) for i in range(2)}
        providers = {0: make_provider(0, capacity=(3, 0), seed=(1.0, 1.0))}
        snap = snapshot(consumers.values(), providers.values())
        trades = clear_trades(snap, np.array([1.0, 50.0]), np.random.default_rng(seed), consumers, providers, 0)
        assert len(trades) == 3
        winners.add(tuple(len(c.contracts) for c in consumers.values()))
    assert winners == {(2, 1), (1, 2)}
