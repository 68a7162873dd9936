import math

import numpy as np
import pytest

from corpus_io import read_corpus
from minhash_dedup import (BandKeys, LshConfig, SignatureError, StreamingClusterer, band_keys,
                           band_keys_for_documents, cluster, collision_probability, compute_band_keys,
                           document_band_keys, duplicate_counts, estimate_jaccard, exact_cluster, jaccard,
                           normalize_text, read_band_cache, read_cluster_table, representatives, shingle, signature,
                           write_band_cache, write_cluster_table)


def test_normalize_text():
    assert normalize_text("Hello,  WORLD!\n\tAgain") == "hello world again"
    assert normalize_text("ﬁne") == "fine"


def test_shingle_windows_and_short_texts():
    assert len(shingle("a b c d e f", n=5)) == 2
    assert len(shingle("a b c d e a b c d e", n=5)) == 5
    short = shingle("only three words", n=5)
    assert short.too_short and len(short) == 0


def test_shingles_ignore_case_and_punctuation():
    a = shingle("The quick brown fox jumps over the lazy dog")
    b = shingle("the QUICK, brown fox -- jumps over the lazy dog!")
    assert np.array_equal(a.items, b.items)


def test_signature_is_deterministic_and_seeded():
    items = shingle("one two three four five six seven eight nine ten")
    first = signature(items, seed=3)
    assert np.array_equal(first.values, signature(items, seed=3).values)
    assert not np.array_equal(first.values, signature(items, seed=4).values)
    assert len(first.values) == 14 * 9
    assert len(band_keys(first)) == 14


def test_signature_does_not_depend_on_shingle_order(rng):
    items = rng.integers(0, 2**63, size=500, dtype=np.uint64)
    shuffled = rng.permutation(items)
    assert np.array_equal(signature(items).values, signature(shuffled).values)


def test_signature_minima_span_64_bits():
    sig = signature(shingle("one two three four five six seven eight nine ten"))
    assert sig.values.dtype == np.uint64
    assert int(sig.values.max()) > 2**32


def test_signature_rejects_empty_sets():
    with pytest.raises(SignatureError, match="too short"):
        signature(shingle("too short"))


def test_collision_probability_formula():
    assert collision_probability(0.0) == 0.0
    assert collision_probability(1.0) == 1.0
    assert collision_probability(0.5) == pytest.approx(1 - (1 - 0.5**9) ** 14)
    with pytest.raises(SignatureError):
        collision_probability(1.5)


def test_estimate_jaccard_tracks_true_jaccard(rng):
    shared = rng.integers(0, 2**63, size=600, dtype=np.uint64)
    a = np.concatenate([shared, rng.integers(0, 2**63, size=200, dtype=np.uint64)])
    b = np.concatenate([shared, rng.integers(0, 2**63, size=200, dtype=np.uint64)])
    config = dict(bands=40, rows=10)
    estimate = estimate_jaccard(signature(a, **config), signature(b, **config))
    # 600 / 1000 with 400 components: sd is about 0.025
    assert jaccard(a.tolist(), b.tolist()) == pytest.approx(0.6)
    assert abs(estimate - 0.6) < 0.1


@pytest.mark.parametrize("s, shared, unique_each", [(0.3, 30, 35), (0.5, 50, 25), (0.8, 80, 10)])
def test_band_collision_rate_follows_s_curve(s, shared, unique_each):
    pairs = 10_000
    rng = np.random.default_rng(int(s * 10))
    collisions = 0
    for _ in range(pairs):
        values = rng.integers(0, 2**63, size=shared + 2 * unique_each, dtype=np.uint64)
        a = values[:shared + unique_each]
        b = np.concatenate([values[:shared], values[shared + unique_each:]])
        if set(band_keys(signature(a))) & set(band_keys(signature(b))):
            collisions += 1

    expected = collision_probability(s)
    standard_error = math.sqrt(expected * (1 - expected) / pairs)
    assert abs(collisions / pairs - expected) <= 3 * standard_error


def test_short_doc_policies():
    exact = LshConfig(short_doc_policy="exact")
    singleton = LshConfig(short_doc_policy="singleton")
    assert len(document_band_keys("a", "tiny doc", exact).keys) == 1
    assert document_band_keys("a", "Tiny doc!", exact).keys == document_band_keys("b", "tiny doc", exact).keys
    assert document_band_keys("a", "tiny doc", singleton).keys == ()


def test_lsh_config_validation():
    with pytest.raises(SignatureError):
        LshConfig(bands=0)
    with pytest.raises(SignatureError):
        LshConfig(seed=-1)
    with pytest.raises(SignatureError):
        LshConfig(short_doc_policy="drop")
    assert LshConfig().num_perm == 126


def test_identical_documents_cluster_under_min_id(random_text, make_doc):
    text = random_text()
    docs = [make_doc("b", text), make_doc("a", text), make_doc("c", random_text()), make_doc("d", text)]
    table = cluster(band_keys_for_documents(docs, LshConfig()))

    assert table.doc_to_cluster == {"b": "a", "a": "a", "c": "c", "d": "a"}
    assert table.cluster_sizes == {"a": 3, "c": 1}
    assert duplicate_counts(table) == {"b": 3, "a": 3, "c": 1, "d": 3}


def test_near_duplicates_cluster(random_text, make_doc):
    base = random_text(200)
    edited = base.split()
    edited[100] = "changed"
    docs = [make_doc("a", base), make_doc("b", " ".join(edited))]
    table = cluster(band_keys_for_documents(docs, LshConfig()))
    assert table.num_clusters == 1


def test_clustering_is_transitive():
    entries = [BandKeys("a", (1, 2)), BandKeys("b", (2, 3)), BandKeys("c", (3, 4)), BandKeys("d", (9,))]
    table = cluster(entries)
    assert table.cluster_sizes == {"a": 3, "d": 1}


def test_sharded_mode_never_merges_across_shards():
    entries = [BandKeys("a", (1,), 0), BandKeys("b", (1,), 1), BandKeys("c", (1,), 0)]
    assert cluster(entries, mode="global").num_clusters == 1
    assert cluster(entries, mode="sharded").cluster_sizes == {"a": 2, "b": 1}


def test_duplicate_ids_and_mixed_configs_are_rejected():
    clusterer = StreamingClusterer()
    clusterer.add("a", (1,))
    with pytest.raises(SignatureError, match="twice"):
        clusterer.add("a", (2,))

    clusterer.add_band_keys(BandKeys("b", (1,), config=LshConfig(seed=1)))
    with pytest.raises(SignatureError, match="mixed"):
        clusterer.add_band_keys(BandKeys("c", (1,), config=LshConfig(seed=2)))


def test_count_of_unknown_id():
    with pytest.raises(SignatureError):
        cluster([BandKeys("a", (1,))]).count_of("zzz")


def test_exact_clusters_refine_fuzzy_clusters(random_text, make_doc):
    base = random_text(100)
    near = base.replace(base.split()[50], "edited", 1)
    docs = [make_doc("a", base), make_doc("b", base.upper()), make_doc("c", near),
            make_doc("d", "short one"), make_doc("e", "Short one."), make_doc("f", random_text())]
    exact = exact_cluster(docs)
    fuzzy = cluster(band_keys_for_documents(docs, LshConfig()))

    assert exact.cluster_sizes == {"a": 2, "c": 1, "d": 2, "f": 1}
    # every exact cluster sits inside one fuzzy cluster
    for members in exact.members().values():
        assert len({fuzzy.doc_to_cluster[m] for m in members}) == 1
    assert fuzzy.num_clusters <= exact.num_clusters


def test_exact_cluster_sharded_mode(make_doc):
    docs = [make_doc("a", "same text", shard=0), make_doc("b", "same text", shard=1)]
    assert exact_cluster(docs, mode="sharded").num_clusters == 2
    assert exact_cluster(docs, mode="global").num_clusters == 1


def test_representatives_prefer_score_then_min_id(make_doc, cluster_table):
    table = cluster_table({"a": ["a", "b", "c"], "d": ["d", "e"]})
    docs = [make_doc("a", score=0.1), make_doc("b", score=0.9), make_doc("c", score=0.9),
            make_doc("d"), make_doc("e")]
    reps = representatives(docs, table)
    assert reps["a"].id == "b"
    assert reps["d"].id == "d"


def test_cluster_table_round_trip(tmp_path, cluster_table):
    table = cluster_table({"a": ["a", "b"], "c": ["c"]})
    write_cluster_table(table, tmp_path / "clusters.jsonl")
    reread = read_cluster_table(tmp_path / "clusters.jsonl")
    assert reread.doc_to_cluster == table.doc_to_cluster
    assert reread.cluster_sizes == table.cluster_sizes


def test_band_cache_round_trip_and_header_check(tmp_path, random_text, make_doc):
    config = LshConfig(seed=5)
    docs = [make_doc("a", random_text()), make_doc("b", "short", shard=0)]
    entries = list(band_keys_for_documents(docs, config))
    write_band_cache(tmp_path / "a.npz", config, entries)
    write_band_cache(tmp_path / "b.npz", config, entries)

    assert read_band_cache(tmp_path / "a.npz", config) == entries
    assert (tmp_path / "a.npz").read_bytes() == (tmp_path / "b.npz").read_bytes()
    with pytest.raises(SignatureError, match="built with"):
        read_band_cache(tmp_path / "a.npz", LshConfig(seed=6))


def test_compute_band_keys_independent_of_workers(write_shards, duplicated_corpus):
    shards, _ = duplicated_corpus
    source = write_shards(shards)
    config = LshConfig(seed=7)
    progress = []

    inline = list(compute_band_keys(source, config, workers=1, progress_callback=lambda p, s: progress.append(p)))
    pooled = list(compute_band_keys(source, config, workers=3))

    assert inline == pooled
    assert progress[-1] == 100
    assert [e.doc_id for shard in inline for e in shard] == [d.id for d in read_corpus(source)]


def test_duplicated_corpus_clusters_to_known_counts(write_shards, duplicated_corpus):
    shards, members = duplicated_corpus
    source = write_shards(shards)
    table = cluster(e for shard in compute_band_keys(source, LshConfig()) for e in shard)

    assert table.num_docs == 15
    assert table.cluster_sizes == {ids[0]: len(ids) for ids in members.values()}
