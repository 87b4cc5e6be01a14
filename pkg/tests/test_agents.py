import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridmarket.agents import (formulate_demand, normalized_price, provider_supply, spend_capacity_per_step,
                               update_mpr)
from gridmarket.domain import CategorySpec, Contract

from conftest import make_consumer, make_provider


def cat(r):
    return CategorySpec(1, 1.0) if r == 1 else CategorySpec(int(r), float(r))


def test_normalized_price_examples():
    assert normalized_price(2.0, cat(2), 1.0) == pytest.approx(1.0, abs=1e-9)
    assert normalized_price(5.0, cat(1), 1.0) == pytest.approx(5.0, abs=1e-9)
    assert normalized_price(119.51, cat(6), 1.25) == pytest.approx(119.51 / 7.5, abs=1e-9)
    assert normalized_price(119.51, cat(6), 1.25) == pytest.approx(15.93, abs=0.01)


@pytest.mark.parametrize("p,v", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
def test_normalized_price_rejects_non_positive(p, v):
    with pytest.raises(ValueError):
        normalized_price(p, cat(1), v)


def _with_contracts(c, rates):
    for i, r in enumerate(rates):
        c.contracts[i] = Contract(c.id, 0, 1, r, i, 0)
    return c


@pytest.mark.parametrize("wallet,committed,expected", [(1000, [], 20.0), (1000, [15], 5.0), (100, [10], 0.0)])
def test_spend_capacity(wallet, committed, expected):
    c = _with_contracts(make_consumer(wallet=wallet), committed)
    # step 0 of a 50-step period leaves 50 steps
    assert spend_capacity_per_step(c, 0) == pytest.approx(expected)
    assert spend_capacity_per_step(c, 50) == pytest.approx(expected)


def test_spend_capacity_late_in_period():
    c = make_consumer(wallet=1000)
    assert spend_capacity_per_step(c, 49) == pytest.approx(1000.0)


def test_demand_budget_and_queue_bound():
    ratios = [1.0, 1.0]
    c = make_consumer(wallet=5000, jobs=7)  # 100 per step
    assert formulate_demand(c, [30.0, 40.0], ratios, 0, smoothed=False).tolist() == [3.0, 0.0]
    assert formulate_demand(c, [30.0, 40.0], ratios, 0, smoothed=True)[0] == pytest.approx(100 / 30)
    c2 = make_consumer(wallet=5000, jobs=2)
    assert formulate_demand(c2, [30.0, 40.0], ratios, 0, smoothed=False).tolist() == [2.0, 0.0]


def test_demand_category_choice():
    c = make_consumer(wallet=50_000, jobs=3)
    d = formulate_demand(c, [10.0, 19.0], [1.0, 2.0], 0, smoothed=False)
    assert d[0] == 0 and d[1] > 0
    tie = formulate_demand(c, [10.0, 20.0], [1.0, 2.0], 0, smoothed=False)
    assert tie[0] > 0 and tie[1] == 0


def test_demand_empty_queue_or_broke():
    assert not formulate_demand(make_consumer(jobs=0), [1.0, 1.0], [1.0, 2.0], 0, True).any()
    broke = _with_contracts(make_consumer(wallet=100, jobs=4), [10])
    assert not formulate_demand(broke, [1.0, 1.0], [1.0, 2.0], 0, True).any()


@given(st.lists(st.floats(0.1, 1e3), min_size=3, max_size=3),
       st.lists(st.floats(1.0, 1.5), min_size=3, max_size=3),
       st.floats(0.01, 100), st.integers(0, 40), st.floats(1, 1e6))
def test_demand_properties(prices, vals, scale, jobs, wallet):
    ratios = [1.0, 2.0, 3.0]
    c = make_consumer(wallet=wallet, valuation=vals, jobs=jobs)
    smooth = formulate_demand(c, prices, ratios, 0, True)
    integer = formulate_demand(c, prices, ratios, 0, False)
    assert np.count_nonzero(smooth) <= 1
    k = int(np.argmax(smooth))
    assert integer[k] <= smooth[k] < integer[k] + 1
    c.valuation = np.array(vals) * scale
    scaled = formulate_demand(c, np.array(prices) * scale, ratios, 0, True)
    if smooth.any():
        norm = np.array(prices) / (np.array(ratios) * np.array(vals))
        if np.sort(norm)[1] - norm.min() > 1e-9 * norm.min():  # skip floating near-ties
            assert int(np.argmax(scaled)) == k


def test_supply_examples():
    prov = make_provider(capacity=(10, 30), seed=(10.0, 7.0))
    assert provider_supply(prov, 1, 5.0, True) == pytest.approx(5.0)
    assert provider_supply(prov, 1, 15.0, True) == pytest.approx(10.0)
    prov.free[1] = 12
    assert provider_supply(prov, 2, 7.0, True) == pytest.approx(12.0)


def test_supply_integer_rounding_and_state():
    prov = make_provider(capacity=(10, 10), seed=(4.0, 4.0))
    assert provider_supply(prov, 1, 1.4, False) == 4.0  # 3.5 rounds to 4
    prov.free[0] = 2
    assert provider_supply(prov, 1, 1.4, False) == 2.0
    prov.draining = True
    assert provider_supply(prov, 1, 1.4, True) == 0.0
    prov.draining, prov.active = False, False
    assert provider_supply(prov, 1, 1.4, True) == 0.0


@given(st.integers(0, 50), st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 100))
def test_supply_monotone_and_bounded(pc, mpr, p1, p2):
    prov = make_provider(capacity=(pc,), seed=(mpr,))
    lo, hi = sorted((p1, p2))
    s_lo, s_hi = provider_supply(prov, 1, lo, True), provider_supply(prov, 1, hi, True)
    assert s_lo <= s_hi <= pc


def test_mpr_window():
    prov = make_provider(capacity=(2, 2), seed=(3.0, 3.0), window=2)
    assert prov.mpr(0) == 3.0
    update_mpr(prov, 1, 20.0)
    update_mpr(prov, 1, 40.0)
    assert prov.mpr(0) == pytest.approx(15.0)
    update_mpr(prov, 1, 0.0)
    assert prov.mpr(0) == pytest.approx(10.0)  # oldest sample evicted
    assert prov.mpr(1) == 3.0


def test_mpr_skips_zero_capacity():
    prov = make_provider(capacity=(0, 4), seed=(3.0, 3.0))
    update_mpr(prov, 1, 5.0)
    assert len(prov.mpr_window[0]) == 0


def test_one_step_window_makes_everything_available():
    prov = make_provider(capacity=(10,), seed=(50.0,), window=1)
    price = 8.0
    sold = 6
    update_mpr(prov, 1, sold * price)
    assert prov.mpr(0) == pytest.approx(price * sold / 10)
    assert provider_supply(prov, 1, price, True) == 10.0


def test_fewer_sales_lower_mpr_raise_offer():
    busy = make_provider(capacity=(10,), seed=(10.0,), window=3)
    idle = make_provider(capacity=(10,), seed=(10.0,), window=3)
    for _ in range(2):
        update_mpr(busy, 1, 10 * 10.0)
        update_mpr(idle, 1, 2 * 10.0)
    assert idle.mpr(0) < busy.mpr(0)
    assert provider_supply(idle, 1, 5.0, True) > provider_supply(busy, 1, 5.0, True)


def test_all_zero_window_is_floored():
    prov = make_provider(capacity=(10,), seed=(5.0,), window=2)
    update_mpr(prov, 1, 0.0)
    update_mpr(prov, 1, 0.0)
    assert prov.mpr(0) == prov.mpr_floor > 0
    assert provider_supply(prov, 1, 1.0, True) == 10.0
