import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kalls.errors import BudgetExhausted, InvalidInputError
from kalls.geometry import Pool
from kalls.oracle import BudgetedOracle
from kalls.problems import sample_pool


@pytest.fixture
def small_pool(linear):
    return sample_pool(linear, 20, 0)


def test_sure_label_is_charged(always_one, line_pool):
    oracle = BudgetedOracle(line_pool(0.3), always_one, 5)
    assert oracle.query(0) == 1
    assert oracle.charged == 1


def test_duplicate_is_cached_and_free(linear, small_pool):
    oracle = BudgetedOracle(small_pool, linear, 5, seed=1)
    first = oracle.query(3)
    assert oracle.query(3) == first
    assert oracle.charged == 1
    assert oracle.is_cached(3)


def test_duplicate_recharged_when_asked(linear, small_pool):
    oracle = BudgetedOracle(small_pool, linear, 5, seed=1, recharge_duplicates=True)
    first = oracle.query(3)
    assert oracle.query(3) == first
    assert oracle.charged == 2


def test_remaining(linear, small_pool):
    oracle = BudgetedOracle(small_pool, linear, 100)
    assert oracle.remaining() == 100
    for i in range(3):
        oracle.query(i)
    assert oracle.remaining() == 97


def test_exhaustion_signal(linear, small_pool):
    oracle = BudgetedOracle(small_pool, linear, 2)
    oracle.query(0)
    oracle.query(1)
    assert oracle.remaining() == 0
    with pytest.raises(BudgetExhausted):
        oracle.query(2)
    # cached labels stay available without a charge
    assert oracle.query(0) in (0, 1)
    assert oracle.charged == 2


def test_bad_inputs(linear, small_pool):
    with pytest.raises(InvalidInputError):
        BudgetedOracle(small_pool, linear, -1)
    with pytest.raises(InvalidInputError):
        BudgetedOracle(Pool(np.zeros((3, 2))), linear, 1)
    with pytest.raises(InvalidInputError):
        BudgetedOracle(small_pool, linear, 1).query(len(small_pool))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 19), max_size=60), st.integers(0, 30), st.booleans())
def test_charge_accounting(indices, budget, recharge):
    from kalls.problems import linear_1d

    spec = linear_1d()
    oracle = BudgetedOracle(sample_pool(spec, 20, 0), spec, budget, seed=2, recharge_duplicates=recharge)
    seen = {}
    for i in indices:
        try:
            label = oracle.query(i)
        except BudgetExhausted:
            continue
        assert seen.setdefault(i, label) == label
        assert oracle.charged <= budget
    if not recharge:
        assert oracle.charged == len(seen)
    assert [r.charged_total for r in oracle.log] == sorted(r.charged_total for r in oracle.log)


def test_label_frequency_matches_eta(linear):
    pool = Pool(np.array([[0.3]]))
    labels = [BudgetedOracle(pool, linear, 1, seed=s).query(0) for s in range(10_000)]
    # binomial 3 sigma: 3 * sqrt(0.21 / 1e4) ~ 0.0137
    assert abs(np.mean(labels) - 0.3) < 3 * np.sqrt(0.21 / 1e4)


def test_write_log(tmp_path, linear, small_pool):
    oracle = BudgetedOracle(small_pool, linear, 3, seed=4)
    for i in (2, 2, 5):
        oracle.query(i)
    path = tmp_path / "log.csv"
    oracle.write_log(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "order,pool_index,label,charged_total"
    assert [ln.split(",")[1] for ln in lines[1:]] == ["2", "2", "5"]
    assert [ln.split(",")[3] for ln in lines[1:]] == ["1", "1", "2"]
