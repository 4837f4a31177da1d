import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kalls.algorithm import (
    ActiveSet,
    ActiveSetEntry,
    KallsParams,
    confident_label,
    delta_hat,
    k_cap,
    learn,
    reliable,
    run_kalls,
    tau,
)
from kalls.errors import BudgetExhausted, InvalidInputError
from kalls.geometry import Pool
from kalls.oracle import BudgetedOracle
from kalls.problems import linear_1d, power_margin, sample_pool, uniform_problem


def params(epsilon=0.2, delta=0.1, n=100, **kw):
    values = dict(alpha=1.0, L=1.0, beta=1.0, C=2.0)
    values.update(kw)
    return KallsParams(delta=delta, epsilon=epsilon, budget_n=n, **values)


def entry(s, point, ones, total, index=0, early=False):
    queries = [(index, 1)] * ones + [(index, 0)] * (total - ones)
    return ActiveSetEntry(index, s, np.atleast_1d(np.asarray(point, float)), int(2 * ones >= total), queries, early)


class TestFormulas:
    def test_delta_hat(self):
        assert delta_hat(0.5, 1.0, 0.0) == 0.25
        assert delta_hat(0.1, 1.0, 1.0) == pytest.approx(math.sqrt(0.05), rel=1e-12)
        assert delta_hat(0.1, 5.0, 2.0) == pytest.approx(0.01 ** (1 / 3), rel=1e-12)

    def test_k_cap(self):
        assert k_cap(1, 0.5, 0.1) == 281
        assert k_cap(1, 0.9, 0.4) == 48
        assert k_cap(2, 0.5, 0.1) > k_cap(1, 0.5, 0.1)

    def test_tau(self):
        assert tau(4, 1, 4 * math.exp(-4)) == pytest.approx(1.0, rel=1e-12)
        assert tau(400, 1, 0.1) == pytest.approx(0.09603227913, rel=1e-10)
        assert tau(1600, 3, 0.2) == pytest.approx(tau(400, 3, 0.2) / 2, rel=1e-12)

    @pytest.mark.parametrize(
        "call",
        [
            lambda: delta_hat(0.0, 1, 1),
            lambda: delta_hat(0.5, 0.5, 1),
            lambda: k_cap(0, 0.5, 0.1),
            lambda: k_cap(1, 1.0, 0.1),
            lambda: tau(0, 1, 0.1),
            lambda: tau(1, 1, 1.0),
        ],
    )
    def test_invalid(self, call):
        with pytest.raises(InvalidInputError):
            call()

    @given(st.integers(1, 10**6), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    def test_k_cap_monotone_in_s(self, s, dh, delta):
        assert k_cap(s + 1, dh, delta) >= k_cap(s, dh, delta)

    def test_params_validation(self):
        with pytest.raises(InvalidInputError):
            params(alpha=0.0)
        with pytest.raises(InvalidInputError):
            params(n=-1)
        with pytest.raises(InvalidInputError):
            params(beta=2.0).check_dimension(1)
        params().check_dimension(1)


class TestConfidentLabel:
    def test_sure_labels_exit_at_fifteen(self, always_one):
        pool = sample_pool(always_one, 400, 0)
        oracle = BudgetedOracle(pool, always_one, 1000)
        # delta_hat = 0.1 makes k_cap far above 15
        res = confident_label(pool, oracle, 1, 0, params(), delta_hat_value=0.1)
        assert (len(res.queries), res.y_hat, res.stopped_early, res.truncated) == (15, 1, True, False)
        assert res.queries[0][0] == 0

    def test_small_budget_truncates(self, always_one):
        pool = sample_pool(always_one, 400, 0)
        oracle = BudgetedOracle(pool, always_one, 3)
        res = confident_label(pool, oracle, 1, 0, params(), delta_hat_value=0.1)
        assert len(res.queries) == 3
        assert not res.stopped_early and res.truncated
        assert oracle.charged == 3

    def test_no_budget_raises(self, always_one):
        pool = sample_pool(always_one, 10, 0)
        with pytest.raises(BudgetExhausted):
            confident_label(pool, BudgetedOracle(pool, always_one, 0), 1, 0, params())

    def test_fair_coin_rarely_stops_early(self, coin):
        pool = sample_pool(coin, 300, 0)
        early = 0
        for seed in range(50):
            oracle = BudgetedOracle(pool, coin, 300, seed=seed)
            res = confident_label(pool, oracle, 1, 0, params(), delta_hat_value=0.5)
            early += res.stopped_early
            if not res.stopped_early:
                assert len(res.queries) == k_cap(1, 0.5, 0.1) == 281
        # early exit has probability <= delta = 0.1; allow a binomial 3 sigma band
        assert early <= 5 + 3 * math.sqrt(50 * 0.09)

    def test_queries_are_nearest_first(self, linear):
        pool = sample_pool(linear, 500, 3)
        oracle = BudgetedOracle(pool, linear, 500, seed=1)
        res = confident_label(pool, oracle, 1, 7, params(), delta_hat_value=0.3)
        d = [abs(pool[i][0] - pool[7][0]) for i, _ in res.queries]
        assert d == sorted(d)


class TestReliable:
    def test_empty_active_set(self, line_pool):
        assert not reliable(line_pool(0, 1), ActiveSet(), 2, 1, params())

    @pytest.mark.parametrize("extra, expected", [(6, True), (7, False)])
    def test_worked_example(self, line_pool, extra, expected):
        # tau = 0.19207, pi = 0.20793, m = 42.66, threshold m * pi = 8.87 points
        fillers = np.linspace(0.55, 0.95, extra)
        pool = line_pool(1.0, 0.0, *fillers)
        witness = entry(1, 0.0, 90, 100, index=1)
        assert witness.tau(0.1) == pytest.approx(0.19207, abs=1e-5)
        assert witness.margin(0.1) == pytest.approx(0.20793, abs=1e-5)
        assert reliable(pool, ActiveSet([witness]), 2, 0, params()) is expected

    def test_undecided_entry_cannot_vouch(self, line_pool):
        pool = line_pool(0.0, 0.0)
        assert not reliable(pool, ActiveSet([entry(1, 0.0, 50, 100)]), 2, 1, params())

    def test_active_set_needs_increasing_steps(self):
        active = ActiveSet([entry(2, 0.0, 1, 1)])
        with pytest.raises(InvalidInputError):
            active.append(entry(2, 0.0, 1, 1))


class TestLearn:
    def test_keeps_only_confident_entries(self):
        kept = entry(1, 0.2, 15, 15, early=True)
        dropped = entry(2, 0.8, 50, 100)
        clf = learn(ActiveSet([kept, dropped]), params())
        assert len(clf) == 1 and not clf.degenerate
        assert clf.predict_many(np.linspace(0, 1, 11)[:, None]).tolist() == [1] * 11

    def test_all_filtered_is_degenerate(self):
        clf = learn(ActiveSet([entry(1, 0.5, 50, 100)]), params())
        assert clf.degenerate and len(clf) == 0
        assert clf.predict(0.3) == 1

    def test_empty_is_degenerate(self):
        clf = learn(ActiveSet(), params(), dim=1)
        assert clf.degenerate and clf.predict(0.3) == 0


class TestRun:
    def test_zero_budget(self, linear):
        pool = sample_pool(linear, 20, 0)
        run = run_kalls(pool, BudgetedOracle(pool, linear, 0), params(n=0))
        assert len(run.active_set) == 0 and run.degenerate
        assert [(r.decision, r.n_queries, r.charged_total) for r in run.trace] == [("budget-stop", 0, 0)]

    def test_single_point(self, always_one):
        pool = Pool(np.array([[0.4]]))
        run = run_kalls(pool, BudgetedOracle(pool, always_one, 50), params(n=50))
        assert len(run.active_set) == 1
        assert run.classifier.predict_many(np.array([[0.0], [0.9]])).tolist() == [1, 1]

    def test_deterministic(self, linear):
        def once():
            pool = sample_pool(linear, 2000, 5)
            run = run_kalls(pool, BudgetedOracle(pool, linear, 400, seed=6), params(n=400))
            return run.trace, [(e.center_index, e.queries) for e in run.active_set]

        assert once() == once()

    def test_budget_stop_closes_trace(self, linear):
        pool = sample_pool(linear, 2000, 1)
        run = run_kalls(pool, BudgetedOracle(pool, linear, 100, seed=1), params(n=100))
        assert run.charged <= 100
        assert run.trace[-1].decision in ("budget-stop", "skipped", "labeled")
        assert run.trace[-1].charged_total == run.charged

    def test_rejects_high_margin_exponent(self, linear):
        pool = sample_pool(linear, 10, 0)
        with pytest.raises(InvalidInputError):
            run_kalls(pool, BudgetedOracle(pool, linear, 5), params(beta=2.0, n=5))


def _literal_decisions(pool, run, p):
    """Recompute every skip decision with the reference Reliable test."""
    active = ActiveSet()
    entries = iter(run.active_set)
    upcoming = next(entries, None)
    out = []
    for row in run.trace:
        if row.decision == "budget-stop":
            break
        out.append(reliable(pool, active, row.s, row.s - 1, p))
        if row.decision == "labeled":
            active.append(upcoming)
            upcoming = next(entries, None)
    return out


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 10**6),
    w=st.integers(1, 300),
    n=st.integers(1, 400),
    epsilon=st.sampled_from([0.05, 0.2, 0.5, 0.9]),
    dim=st.sampled_from([1, 2]),
    recharge=st.booleans(),
)
def test_fast_index_matches_reference(seed, w, n, epsilon, dim, recharge):
    spec = linear_1d() if dim == 1 else power_margin(1.0, d=2)
    pool = sample_pool(spec, w, seed)
    p = KallsParams.for_problem(spec, 0.1, epsilon, n)
    run = run_kalls(pool, BudgetedOracle(pool, spec, n, seed=seed + 1, recharge_duplicates=recharge), p)
    decisions = [r.decision == "skipped" for r in run.trace if r.decision != "budget-stop"]
    assert decisions == _literal_decisions(pool, run, p)
    assert run.charged <= n


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), w=st.integers(2, 200))
def test_fast_index_matches_reference_with_ties(seed, w):
    # coarse grid coordinates produce many equal distances
    spec = uniform_problem(lambda X: X[:, 0], name="grid")
    rng = np.random.default_rng(seed)
    pool = Pool(np.round(rng.random((w, 1)) * 8) / 8)
    p = params(epsilon=0.5, n=3 * w)
    run = run_kalls(pool, BudgetedOracle(pool, spec, 3 * w, seed=seed), p)
    decisions = [r.decision == "skipped" for r in run.trace if r.decision != "budget-stop"]
    assert decisions == _literal_decisions(pool, run, p)
