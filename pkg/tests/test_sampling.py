import json
import math
from collections import Counter

import numpy as np
import pytest

from minhash_dedup import DuplicateClusterTable
from sampling import (SamplingError, SamplingSpec, Target, dedup_then_subsample, duplicate_aware_subsample,
                      epoch_stream, floor_ceil_filter, keyed_uniform, run_sampling, uniform_subsample,
                      write_epoch_index)


def test_keyed_uniform_is_deterministic_and_in_range():
    draws = [keyed_uniform(7, "keep", i) for i in range(1000)]
    assert draws == [keyed_uniform(7, "keep", i) for i in range(1000)]
    assert all(0.0 <= u < 1.0 for u in draws)
    assert keyed_uniform(7, "keep", 1) != keyed_uniform(8, "keep", 1)
    assert abs(np.mean(draws) - 0.5) < 0.05


def test_target_needs_exactly_one_field():
    with pytest.raises(SamplingError):
        Target()
    with pytest.raises(SamplingError):
        Target(doc_count=1, fraction=0.5)
    with pytest.raises(SamplingError):
        Target(fraction=0.0)
    assert Target(token_budget=10).kind == "token_budget"


def test_sampling_spec_validation():
    with pytest.raises(SamplingError):
        SamplingSpec(mode="reservoir", target=Target(fraction=0.5))
    with pytest.raises(SamplingError):
        SamplingSpec(mode="uniform")
    with pytest.raises(SamplingError):
        SamplingSpec(mode="duplicate_aware", target=Target(doc_count=3))
    assert SamplingSpec(mode="floor_ceil", floor=7, ceil=1).target is None


def test_uniform_doc_count_is_exact_and_reproducible(make_doc):
    docs = [make_doc(f"d{i:03d}") for i in range(100)]
    first = uniform_subsample(docs, Target(doc_count=10), seed=3)
    again = uniform_subsample(docs, Target(doc_count=10), seed=3)
    other = uniform_subsample(docs, Target(doc_count=10), seed=4)

    assert len(first) == 10
    assert first == again
    assert first != other
    # input order is kept
    assert [d.id for d in first] == sorted(d.id for d in first)


def test_uniform_doc_count_zero_and_too_large(make_doc):
    docs = [make_doc("a"), make_doc("b")]
    assert uniform_subsample(docs, Target(doc_count=0)) == []
    with pytest.raises(SamplingError):
        uniform_subsample(docs, Target(doc_count=3))


def test_uniform_doc_count_is_unbiased(make_doc):
    docs = [make_doc(str(i)) for i in range(10)]
    hits = Counter()
    runs = 2000
    for seed in range(runs):
        hits.update(d.id for d in uniform_subsample(docs, Target(doc_count=3), seed=seed))
    # each document is kept with probability 0.3
    sd = math.sqrt(0.3 * 0.7 / runs)
    assert all(abs(hits[d.id] / runs - 0.3) < 5 * sd for d in docs)


def test_uniform_token_budget_overshoots_by_at_most_one_document(make_doc, rng):
    docs = [make_doc(f"d{i}", tokens=int(t)) for i, t in enumerate(rng.integers(1, 500, size=300))]
    budget = 20_000
    kept = uniform_subsample(docs, Target(token_budget=budget), seed=1)
    total = sum(d.token_count for d in kept)

    assert total >= budget
    assert total - budget < max(d.token_count for d in kept)


def test_uniform_token_budget_above_corpus_fails(make_doc):
    with pytest.raises(SamplingError):
        uniform_subsample([make_doc("a", tokens=5)], Target(token_budget=6))


def test_uniform_fraction(make_doc):
    docs = [make_doc(f"d{i}") for i in range(5000)]
    kept = uniform_subsample(docs, Target(fraction=0.2), seed=9)
    assert abs(len(kept) / 5000 - 0.2) < 5 * math.sqrt(0.2 * 0.8 / 5000)
    assert uniform_subsample(docs, Target(fraction=1.0)) == docs


def test_uniform_fraction_on_empty_corpus():
    assert uniform_subsample([], Target(fraction=0.5)) == []


def test_dedup_then_subsample_keeps_only_representatives(make_doc, cluster_table):
    table = cluster_table({"a": ["a", "b", "c"], "d": ["d"], "e": ["e", "f"]})
    docs = [make_doc(x, score=s) for x, s in zip("abcdef", [0.1, 0.5, 0.2, 0.3, 0.9, 0.8])]
    kept = dedup_then_subsample(docs, table, Target(fraction=1.0))
    assert [d.id for d in kept] == ["b", "d", "e"]

    two = dedup_then_subsample(docs, table, Target(doc_count=2), seed=5)
    assert len(two) == 2 and {d.id for d in two} <= {"b", "d", "e"}


def test_dedup_then_subsample_ignores_cluster_size(make_doc, cluster_table):
    table = cluster_table({"a0": ["a0", "a1", "a2", "a3"], "b0": ["b0"]})
    docs = [make_doc(x) for x in ["a0", "a1", "a2", "a3", "b0"]]
    runs = 2000
    from_big = 0
    for seed in range(runs):
        kept = dedup_then_subsample(docs, table, Target(doc_count=1), seed=seed)
        assert len(kept) == 1
        from_big += kept[0].id != "b0"
    # one representative per cluster, so either cluster wins half the time
    assert abs(from_big / runs - 0.5) < 5 * math.sqrt(0.25 / runs)


def test_duplicate_aware_keeps_or_drops_whole_clusters(make_doc, cluster_table):
    groups = {f"c{i:03d}": [f"c{i:03d}-{j}" for j in range(i % 4 + 1)] for i in range(200)}
    table = cluster_table(groups)
    docs = [make_doc(doc_id) for members in groups.values() for doc_id in members]
    kept = duplicate_aware_subsample(docs, table, 0.5, seed=2)

    kept_by_cluster = Counter(table.doc_to_cluster[d.id] for d in kept)
    assert all(count == table.cluster_sizes[c] for c, count in kept_by_cluster.items())
    assert duplicate_aware_subsample(docs, table, 0.5, seed=2) == kept


def test_duplicate_aware_preserves_duplication_profile(make_doc):
    rng = np.random.default_rng(2024)
    sizes = rng.choice([1, 2, 3, 5, 8], size=100_000, p=[0.5, 0.2, 0.15, 0.1, 0.05])
    doc_to_cluster, cluster_sizes, docs = {}, {}, []
    for i, size in enumerate(sizes):
        cluster_id = f"{i:06d}-0"
        cluster_sizes[cluster_id] = int(size)
        for j in range(size):
            doc_id = f"{i:06d}-{j}"
            doc_to_cluster[doc_id] = cluster_id
            docs.append(make_doc(doc_id, text="x"))
    table = DuplicateClusterTable(doc_to_cluster, cluster_sizes)

    kept = duplicate_aware_subsample(docs, table, 0.3, seed=11)
    kept_clusters = {table.doc_to_cluster[d.id] for d in kept}
    observed = Counter(cluster_sizes[c] for c in kept_clusters)
    population = Counter(int(s) for s in sizes)

    for size, n in population.items():
        sd = math.sqrt(n * 0.3 * 0.7)
        assert abs(observed[size] - 0.3 * n) <= 3 * sd


def test_count_weighted_keeps_large_clusters(make_doc, cluster_table):
    table = cluster_table({"big": [f"big{i}" for i in range(10)], "small": ["small"]})
    docs = [make_doc(doc_id) for doc_id in table.doc_to_cluster]
    kept = duplicate_aware_subsample(docs, table, 0.1, seed=0, weighting="count_weighted")
    assert {d.id for d in kept} >= {f"big{i}" for i in range(10)}


def test_duplicate_aware_rejects_unknown_documents(make_doc, cluster_table):
    with pytest.raises(SamplingError):
        duplicate_aware_subsample([make_doc("zzz")], cluster_table({"a": ["a"]}), 0.5)


def test_floor_ceil_keeps_one_copy_of_heavily_duplicated_content(make_doc, cluster_table):
    groups = {f"k{n:02d}-00": [f"k{n:02d}-{j:02d}" for j in range(n)] for n in range(1, 11)}
    table = cluster_table(groups)
    docs = [make_doc(doc_id) for members in groups.values() for doc_id in members]
    kept = floor_ceil_filter(docs, table, floor=7, ceil=1)

    assert [d.id for d in kept] == ["k07-00", "k08-00", "k09-00", "k10-00"]


def test_floor_ceil_without_ceiling_keeps_whole_clusters(make_doc, cluster_table):
    table = cluster_table({"a": ["a", "b", "c"], "d": ["d"]})
    docs = [make_doc(x) for x in "abcd"]
    assert [d.id for d in floor_ceil_filter(docs, table, floor=2)] == ["a", "b", "c"]
    assert floor_ceil_filter(docs, table, floor=4) == []
    assert len(floor_ceil_filter(docs, table, floor=1, ceil=2)) == 3


def test_floor_ceil_keeps_the_best_scored_copy(make_doc, cluster_table):
    table = cluster_table({"a": ["a", "b", "c"]})
    docs = [make_doc("a", score=0.1), make_doc("b", score=0.7), make_doc("c", score=0.3)]
    assert [d.id for d in floor_ceil_filter(docs, table, floor=1, ceil=1)] == ["b"]


def test_epoch_stream_repeats_in_shuffled_passes(make_doc):
    docs = [make_doc(f"d{i}", tokens=10) for i in range(20)]
    stream = epoch_stream(docs, total_tokens=500, seed=4)

    assert stream.epochs == 2.5
    assert stream.boundaries == [200, 400, 500]
    assert stream.realized_tokens == 500
    epochs = [[d.id for e, d in stream.items if e == k] for k in range(3)]
    assert sorted(epochs[0]) == sorted(epochs[1]) == sorted(d.id for d in docs)
    assert epochs[0] != epochs[1]
    assert len(epochs[2]) == 10


def test_epoch_stream_stops_after_crossing_document(make_doc):
    stream = epoch_stream([make_doc("a", tokens=7), make_doc("b", tokens=7)], total_tokens=8)
    assert len(stream.items) == 2
    assert stream.realized_tokens == 14
    assert stream.boundaries == [14]


def test_epoch_stream_errors(make_doc):
    with pytest.raises(SamplingError):
        epoch_stream([], 10)
    with pytest.raises(SamplingError):
        epoch_stream([make_doc("a", tokens=0)], 10)


def test_write_epoch_index(tmp_path, make_doc):
    stream = epoch_stream([make_doc("a", tokens=3)], total_tokens=7)
    write_epoch_index(stream, tmp_path / "epochs.json")
    index = json.loads((tmp_path / "epochs.json").read_text())
    assert index["boundaries"] == [3, 6, 9]
    assert index["requested_tokens"] == 7


def test_run_sampling_dispatch(make_doc, cluster_table):
    table = cluster_table({"a": ["a", "b"], "c": ["c"]})
    docs = [make_doc(x) for x in "abc"]
    assert run_sampling(docs, SamplingSpec(Target(fraction=1.0), mode="dedup_then_subsample"), table) == \
        [docs[0], docs[2]]
    assert run_sampling(docs, SamplingSpec(mode="floor_ceil", floor=2), table) == docs[:2]
    with pytest.raises(SamplingError, match="cluster table"):
        run_sampling(docs, SamplingSpec(Target(fraction=0.5), mode="duplicate_aware"))
