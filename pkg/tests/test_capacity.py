import pytest
from hypothesis import given, strategies as st

from antrouting.capacity import (
    ANT_ROUTING_FORMULA_VALUE,
    CHAIN_PRESETS,
    AntRoutingCapacityParams,
    ChainCapacityParams,
    ant_routing_capacity,
    capacity_table,
    chain_capacity,
    evaluate_preset,
    match_probability,
)

# block_max / (tx_size * interblock_time), worked by hand
HAND = {
    "bitcoin-typical": 1e6 / 150_000,
    "bitcoin-min": 1e6 / 36_600,
    "monero": 1e6 / 66_000,
    "ethereum-min-gas": 1e7 / 315_000,
    "ethereum-max-gas": 1e7 / 3_000_000,
    "ethereum-observed": 36_630 / 7_500,
}


@pytest.mark.parametrize("name", sorted(CHAIN_PRESETS))
def test_chain_presets(name):
    value = evaluate_preset(name)
    assert value == pytest.approx(HAND[name], rel=1e-12)
    assert value == pytest.approx(CHAIN_PRESETS[name][1], rel=0.005)


def test_ant_routing_both_readings():
    assert evaluate_preset("ant-routing") == ANT_ROUTING_FORMULA_VALUE
    assert evaluate_preset("ant-routing-quoted") == 10_000.0


def test_table_rows():
    rows = {r["preset"]: r for r in capacity_table()}
    assert len(rows) == 8
    assert rows["bitcoin-typical"]["tx_per_s_2dp"] == 6.67
    assert rows["ant-routing"]["tx_per_s"] == 100_000.0 and rows["ant-routing"]["quoted"] == 10_000.0


def test_rejects_non_positive():
    with pytest.raises(ValueError):
        ChainCapacityParams(1e6, 0, 600)
    with pytest.raises(ValueError):
        AntRoutingCapacityParams(1e6, 100, -1)


pos = st.floats(1e-3, 1e9, allow_nan=False)


@given(pos, pos, pos, st.floats(1.01, 100))
def test_chain_monotone(b, s, t, k):
    base = chain_capacity(ChainCapacityParams(b, s, t))
    assert chain_capacity(ChainCapacityParams(b * k, s, t)) > base
    assert chain_capacity(ChainCapacityParams(b, s * k, t)) < base
    assert chain_capacity(ChainCapacityParams(b, s, t * k)) < base


@given(pos, pos, pos, st.floats(0.01, 100))
def test_homogeneous_degree_zero(m, d, eta, k):
    a = ant_routing_capacity(AntRoutingCapacityParams(m, d, eta))
    scaled = ant_routing_capacity(AntRoutingCapacityParams(m * k, d * k, eta))
    assert scaled == pytest.approx(a, rel=1e-9)


def test_match_probability_edges():
    assert match_probability(0.0, 1000) == 0.0
    assert match_probability(1.0, 1) == 1.0
    assert match_probability(0.5, 0) == 0.0
    assert match_probability(0.5, 1) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        match_probability(1.5, 10)


@given(st.floats(0, 1), st.integers(0, 500))
def test_match_probability_monotone(r, n):
    p = match_probability(r, n)
    assert 0.0 <= p <= 1.0
    assert match_probability(r, n + 1) >= p
    assert match_probability(min(1.0, r + 0.01), n) >= p - 1e-15
