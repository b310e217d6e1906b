import dataclasses
import json
from fractions import Fraction

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sidepir import schemas
from sidepir.combinatorics import optimal_cost, scheme_counts
from sidepir.engine import (
    MessageStore,
    SystemConfig,
    database_answer,
    from_hex,
    run_retrieval,
    to_hex,
    user_decode,
)
from sidepir.errors import DimensionError, ReconstructError
from sidepir.scheme import PrefetchPlan, QuerySpec, build_query_table, uniform_prefetch

TABLE1_PLAN = PrefetchPlan({1: [3], 2: [4]})


def retrieve(N, K, M, theta, plan, seed=0, width=None, store_seed=1, **kw):
    config = SystemConfig(N, K, M, width=width, seed=seed)
    c = config.counts
    store = MessageStore.random(K, c.L, config.field_width(), store_seed)
    return run_retrieval(config, plan, theta, store, **kw)


def test_table1_end_to_end():
    t = retrieve(2, 4, 2, 1, TABLE1_PLAN)
    assert t.config.field_width() == 4
    assert [len(a.parity) for a in t.answers] == [6, 6]
    assert t.downloaded_symbols == 12 and t.L == 8
    assert t.ratio == Fraction(3, 2)
    assert t.decode_ok


def test_table2_end_to_end():
    t = retrieve(2, 5, 2, 1, PrefetchPlan({1: [4], 2: [5]}))
    assert t.downloaded_symbols == 28 and t.L == 16
    assert t.ratio == Fraction(7, 4)
    assert t.decode_ok


def test_no_side_information():
    t = retrieve(2, 2, 0, 2, PrefetchPlan.empty(2))
    assert t.ratio == Fraction(3, 2) and t.decode_ok


def test_single_message_degenerate():
    t = retrieve(2, 1, 0, 1, PrefetchPlan.empty(2))
    assert t.config.field_width() == 1
    assert t.L == 2 and t.downloaded_symbols == 2 and t.decode_ok


def test_zero_store():
    config = SystemConfig(2, 4, 2)
    store = MessageStore.zeros(4, 8, 4)
    t = run_retrieval(config, TABLE1_PLAN, 2, store)
    assert all(v == 0 for a in t.answers for v in a.parity)
    assert not t.decoded.any() and t.decode_ok


@pytest.mark.parametrize("N,K,M", [(2, 3, 2), (2, 6, 4), (3, 4, 3), (3, 5, 3), (3, 3, 0), (4, 3, 0)])
def test_ratio_equals_optimum(N, K, M):
    for trial in range(3):
        plan = uniform_prefetch(N, K, M, seed=trial)
        theta = min(set(range(1, K + 1)) - plan.cached)
        t = retrieve(N, K, M, theta, plan, seed=trial, store_seed=trial)
        assert t.decode_ok
        assert t.ratio == optimal_cost(N, K, M)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([(2, 2, 0), (2, 3, 0), (2, 4, 2), (2, 5, 2), (3, 3, 0), (3, 4, 3)]),
       st.integers(0, 2**31), st.data())
def test_decode_random_instances(point, seed, data):
    N, K, M = point
    plan = uniform_prefetch(N, K, M, seed)
    theta = data.draw(st.sampled_from(sorted(set(range(1, K + 1)) - plan.cached)))
    t = retrieve(N, K, M, theta, plan, seed=seed, store_seed=seed + 1)
    assert t.decode_ok and t.ratio == optimal_cost(N, K, M)


def test_wider_field_still_decodes():
    t = retrieve(2, 4, 2, 1, TABLE1_PLAN, width=8)
    assert t.decode_ok and t.ratio == Fraction(3, 2)


def test_width_bounds():
    with pytest.raises(DimensionError):
        SystemConfig(2, 5, 2, width=4).field_width()
    with pytest.raises(DimensionError):
        SystemConfig(2, 4, 2, width=17).field_width()
    config = SystemConfig(2, 4, 2, width=5)
    with pytest.raises(DimensionError):
        run_retrieval(config, TABLE1_PLAN, 1, MessageStore.random(4, 8, 4, 0))


def test_determinism():
    a = retrieve(2, 5, 2, 1, PrefetchPlan({1: [4], 2: [5]}), seed=7)
    b = retrieve(2, 5, 2, 1, PrefetchPlan({1: [4], 2: [5]}), seed=7)
    assert a.to_json() == b.to_json()


def test_answer_depends_only_on_own_queries():
    table = build_query_table(2, 4, 2, 1, TABLE1_PLAN, seed=3)
    store = MessageStore.random(4, 8, 4, 0)
    before = database_answer(store, table, 1)
    other = dict(table.queries)
    other[2] = tuple(QuerySpec(((1, 1),)) for _ in other[2])
    altered = dataclasses.replace(table)
    object.__setattr__(altered, "queries", other)
    assert database_answer(store, altered, 1) == before


def test_concurrent_answers_match_serial():
    plan = PrefetchPlan({1: [4], 2: [5]})
    a = retrieve(2, 5, 2, 1, plan, seed=2)
    b = retrieve(2, 5, 2, 1, plan, seed=2, jobs=4)
    assert a.answers == b.answers
    assert np.array_equal(a.decoded, b.decoded)


def test_dimension_errors():
    table = build_query_table(2, 4, 2, 1, TABLE1_PLAN, seed=0)
    with pytest.raises(DimensionError):
        database_answer(MessageStore.random(4, 7, 4, 0), table, 1)
    with pytest.raises(DimensionError):
        database_answer(MessageStore.random(4, 8, 4, 0), table, 3)
    with pytest.raises(DimensionError):
        MessageStore(np.zeros(8, dtype=np.int64), 4)
    store = MessageStore.random(4, 8, 4, 0)
    answers = [database_answer(store, table, n) for n in (1, 2)]
    with pytest.raises(DimensionError):
        user_decode(table, answers, {3: store.message(3)}, 4)
    with pytest.raises(DimensionError):
        user_decode(table, answers[:1], {3: store.message(3), 4: store.message(4)}, 4)
    short = [dataclasses.replace(answers[0], parity=answers[0].parity[:-1]), answers[1]]
    with pytest.raises(DimensionError):
        user_decode(table, short, {3: store.message(3), 4: store.message(4)}, 4)


def test_store_is_read_only():
    store = MessageStore.random(3, 4, 2, 0)
    with pytest.raises(ValueError):
        store.symbols[0, 0] = 1


def test_corrupted_parity_gives_wrong_message():
    config = SystemConfig(2, 4, 2)
    store = MessageStore.random(4, 8, 4, 5)
    t = run_retrieval(config, TABLE1_PLAN, 1, store)
    bad = [dataclasses.replace(t.answers[0], parity=(t.answers[0].parity[0] ^ 1,) + t.answers[0].parity[1:]),
           t.answers[1]]
    cache = {k: store.message(k) for k in (3, 4)}
    assert not np.array_equal(user_decode(t.table, bad, cache, 4), store.message(1))


def test_transcript_schema_and_hex():
    t = retrieve(2, 5, 2, 1, PrefetchPlan({1: [4], 2: [5]}), seed=3)
    data = json.loads(t.to_json())
    jsonschema.validate(data, schemas.TRANSCRIPT)
    assert data["ratio"] == "7/4" and data["decode_ok"] is True
    assert from_hex(data["decoded"], 5) == t.decoded.tolist()
    assert to_hex([0, 15, 31], 5) == "000f1f"


def test_download_counts_match_counts_table():
    for N, K, M in [(2, 4, 2), (3, 4, 3), (2, 6, 4)]:
        c = scheme_counts(N, K, M)
        plan = uniform_prefetch(N, K, M, 0)
        theta = min(set(range(1, K + 1)) - plan.cached)
        assert retrieve(N, K, M, theta, plan).downloaded_symbols == c.downloaded


def test_reconstruct_error_type_exists():
    assert issubclass(ReconstructError, Exception)
