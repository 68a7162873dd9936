import csv
import json
import math

import pytest

from minhash_dedup import LshConfig, band_keys_for_documents, cluster
from stats_report import (DupByScore, DuplicationProfile, GrowthPoint, ReportError, StatsBundle, default_bin_edges,
                          dup_by_score, duplication_growth_curve, duplication_profile, emit_report,
                          growth_curve_from_band_keys, read_report, score_distribution, unique_score_distribution)


def test_duplication_profile(cluster_table):
    table = cluster_table({"a": ["a"], "b": ["b", "c"], "d": ["d", "e"], "f": ["f", "g", "h", "i"]})
    profile = duplication_profile(table)

    assert profile.histogram == {1: 1, 2: 2, 4: 1}
    assert profile.total_docs == 9
    assert profile.total_clusters == 4
    assert profile.removal_rate == pytest.approx(5 / 9)
    assert sum(size * n for size, n in profile.histogram.items()) == profile.total_docs


def test_profile_of_empty_table(cluster_table):
    profile = duplication_profile(cluster_table({}))
    assert profile.histogram == {}
    assert profile.removal_rate == 0.0


@pytest.fixture
def growing_pool(make_doc, random_text):
    """Shard 0 holds m fresh documents; shard k adds m fresh ones plus copies of shard k-1's fresh ones."""
    m, shards, previous = 4, [], []
    for k in range(5):
        fresh = [make_doc(f"s{k}-fresh{i}", random_text(), shard=k) for i in range(m)]
        copies = [make_doc(f"s{k}-copy{i}", doc.text, shard=k) for i, doc in enumerate(previous)]
        shards.append(fresh + copies)
        previous = fresh
    return m, shards


def test_growth_curve_matches_constructed_removal_rates(growing_pool):
    m, shards = growing_pool
    points, table = duplication_growth_curve(shards, steps=5)

    for k, point in enumerate(points, start=1):
        assert point.docs_in_pool == m * (2 * k - 1)
        assert point.clusters == m * k
        assert point.removal_rate == 1.0 - (m * k) / (m * (2 * k - 1))

    whole = duplication_profile(cluster(band_keys_for_documents([d for s in shards for d in s], LshConfig())))
    assert points[-1].removal_rate == whole.removal_rate
    assert duplication_profile(table) == whole


def test_growth_curve_with_fewer_steps_samples_at_shard_boundaries(growing_pool):
    m, shards = growing_pool
    points, _ = duplication_growth_curve(shards, steps=2)
    # ceil(5/2) = 3 shards, then all 5
    assert [p.docs_in_pool for p in points] == [m * 5, m * 9]


def test_growth_curve_shuffle_keeps_the_endpoint(growing_pool):
    _, shards = growing_pool
    ordered, _ = duplication_growth_curve(shards, steps=5)
    shuffled, _ = duplication_growth_curve(shards, steps=5, shuffle_seed=3)
    assert shuffled[-1] == ordered[-1]


def test_growth_curve_step_limits(growing_pool):
    _, shards = growing_pool
    with pytest.raises(ReportError):
        duplication_growth_curve(shards, steps=1)
    with pytest.raises(ReportError):
        duplication_growth_curve(shards, steps=6)
    with pytest.raises(ReportError, match="empty"):
        growth_curve_from_band_keys([[], []], steps=2)


def test_default_bin_edges():
    assert default_bin_edges([0.0, 1.0], bins=4) == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert default_bin_edges([]) == pytest.approx([i / 20 for i in range(21)])
    assert default_bin_edges([2.0, 2.0], bins=1) == [2.0, 3.0]


def test_score_distribution_counts_and_clamps(make_doc):
    docs = [make_doc(str(i), score=s) for i, s in enumerate([0.1, 0.2, 0.6, 0.9, -1.0, 5.0])]
    clamped = score_distribution(docs, edges=[0.0, 0.5, 1.0])
    assert clamped.counts == [3, 3]
    assert sum(clamped.counts) == len(docs)

    split = score_distribution(docs, edges=[0.0, 0.5, 1.0], out_of_range="overflow")
    assert split.counts == [2, 2]
    assert (split.underflow, split.overflow) == (1, 1)


def test_score_distribution_missing_scores(make_doc):
    docs = [make_doc("a", score=0.5), make_doc("b")]
    with pytest.raises(ReportError, match="b"):
        score_distribution(docs)
    assert score_distribution(docs, strict=False).missing == 1


def test_score_distribution_of_empty_corpus():
    hist = score_distribution([])
    assert hist.counts == [0] * 20


def test_score_distribution_rejects_bad_edges(make_doc):
    with pytest.raises(ReportError):
        score_distribution([make_doc("a", score=0.5)], edges=[1.0, 0.0])
    with pytest.raises(ReportError):
        score_distribution([make_doc("a", score=0.5)], edges=[0.0])


def test_unique_score_distribution_counts_representatives(make_doc, cluster_table):
    table = cluster_table({"a": ["a", "b", "c"], "d": ["d"]})
    docs = [make_doc("a", score=0.9), make_doc("b", score=0.1), make_doc("c", score=0.2), make_doc("d", score=0.3)]
    hist = unique_score_distribution(docs, table, edges=[0.0, 0.5, 1.0])
    assert hist.counts == [1, 1]


def test_dup_by_score_means(make_doc, cluster_table):
    # bin 0 holds clusters of size 1 and 1, bin 1 holds sizes 4 and 2, bin 2 is empty
    table = cluster_table({"a": ["a"], "b": ["b"], "c": ["c", "c1", "c2", "c3"], "d": ["d", "d1"]})
    scores = {"a": 0.1, "b": 0.2, "c": 0.6, "c1": 0.5, "c2": 0.5, "c3": 0.5, "d": 0.7, "d1": 0.55}
    docs = [make_doc(doc_id, score=s) for doc_id, s in scores.items()]
    result = dup_by_score(docs, table, edges=[0.0, 0.5, 1.0, 1.5])

    assert result.unique_docs == [2, 2, 0]
    assert result.means == [1.0, 3.0, None]


def test_dup_by_score_tracks_score_driven_copy_counts(make_doc, cluster_table, rng):
    groups, docs = {}, []
    for k, score in enumerate(rng.uniform(0.001, 1.0, size=300)):
        copies = math.ceil(10 * score)
        members = [f"u{k:03d}-{j}" for j in range(copies)]
        groups[members[0]] = members
        docs.extend(make_doc(doc_id, score=float(score)) for doc_id in members)

    edges = default_bin_edges([0.0, 1.0], 10)
    result = dup_by_score(docs, cluster_table(groups), edges=edges)

    assert sum(result.unique_docs) == 300
    for left, right, mean in zip(edges, edges[1:], result.means):
        if mean is not None:
            assert abs(mean - 10 * (left + right) / 2) <= 1.0


def test_emit_report_writes_csv_and_json(tmp_path, cluster_table, make_doc):
    table = cluster_table({"a": ["a", "b"], "c": ["c"]})
    docs = [make_doc("a", score=0.25), make_doc("b", score=0.75), make_doc("c", score=0.5)]
    bundle = StatsBundle(
        profile=duplication_profile(table),
        growth=[GrowthPoint(2, 2, 0.0), GrowthPoint(3, 2, 1 / 3)],
        score_hist=score_distribution(docs, edges=[0.0, 0.5, 1.0], out_of_range="overflow"),
        dup_by_score=dup_by_score(docs, table, edges=[0.0, 0.5, 1.0]),
    )
    written = emit_report(bundle, tmp_path)

    assert sorted(p.name for p in written) == ["dup_by_score.csv", "growth.csv", "profile.csv", "report.json",
                                               "score_hist.csv"]
    with open(tmp_path / "profile.csv", newline="") as f:
        assert list(csv.reader(f)) == [["cluster_size", "clusters"], ["1", "1"], ["2", "1"]]
    with open(tmp_path / "growth.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert float(rows[2][2]) == 1 / 3

    assert read_report(tmp_path / "report.json") == bundle
    assert json.loads((tmp_path / "report.json").read_text())["profile"]["histogram"] == {"1": 1, "2": 1}


def test_emit_report_needs_a_statistic(tmp_path):
    with pytest.raises(ReportError, match="nothing to report"):
        emit_report(StatsBundle(), tmp_path)


def test_profile_dict_round_trip():
    profile = DuplicationProfile({1: 3, 5: 1}, 8, 4, 0.5)
    assert DuplicationProfile.from_dict(profile.to_dict()) == profile
    assert DupByScore([0.0, 1.0], [0], [None]) == DupByScore([0.0, 1.0], [0], [None])
