"""
Duplication and score diagnostics
Cluster-size histograms, dedup-removal growth curves over a growing pool,
score histograms and average duplicate count by score.

CSV outputs (one per statistic, header row first):
    profile.csv        cluster_size, clusters
    growth.csv         docs_in_pool, clusters, removal_rate
    score_hist.csv     bin_left, bin_right, count   (+ underflow/overflow rows)
    unique_score_hist.csv  same columns, representatives only
    dup_by_score.csv   bin_left, bin_right, unique_docs, mean_duplicate_count
report.json holds all of them together.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from corpus_io import CurationError, read_shard
from minhash_dedup import LshConfig, StreamingClusterer, band_keys_for_documents, representatives
from sampling import keyed_uniform

logger = logging.getLogger(__name__)

OUT_OF_RANGE = ("clamp", "overflow")


class ReportError(CurationError):
    pass


@dataclass
class DuplicationProfile:
    histogram: dict = field(default_factory=dict)
    total_docs: int = 0
    total_clusters: int = 0
    removal_rate: float = 0.0

    def to_dict(self):
        data = asdict(self)
        data["histogram"] = {str(size): count for size, count in sorted(self.histogram.items())}
        return data

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["histogram"] = {int(size): count for size, count in data["histogram"].items()}
        return cls(**data)


@dataclass
class GrowthPoint:
    docs_in_pool: int
    clusters: int
    removal_rate: float


@dataclass
class ScoreHistogram:
    edges: list = field(default_factory=list)
    counts: list = field(default_factory=list)
    underflow: int = 0
    overflow: int = 0
    missing: int = 0


@dataclass
class DupByScore:
    edges: list = field(default_factory=list)
    unique_docs: list = field(default_factory=list)
    means: list = field(default_factory=list)


@dataclass
class StatsBundle:
    profile: DuplicationProfile | None = None
    growth: list | None = None
    score_hist: ScoreHistogram | None = None
    unique_score_hist: ScoreHistogram | None = None
    dup_by_score: DupByScore | None = None

    def to_dict(self):
        return {
            "profile": self.profile.to_dict() if self.profile else None,
            "growth": [asdict(p) for p in self.growth] if self.growth is not None else None,
            "score_hist": asdict(self.score_hist) if self.score_hist else None,
            "unique_score_hist": asdict(self.unique_score_hist) if self.unique_score_hist else None,
            "dup_by_score": asdict(self.dup_by_score) if self.dup_by_score else None,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            profile=DuplicationProfile.from_dict(data["profile"]) if data.get("profile") else None,
            growth=[GrowthPoint(**p) for p in data["growth"]] if data.get("growth") is not None else None,
            score_hist=ScoreHistogram(**data["score_hist"]) if data.get("score_hist") else None,
            unique_score_hist=(ScoreHistogram(**data["unique_score_hist"])
                               if data.get("unique_score_hist") else None),
            dup_by_score=DupByScore(**data["dup_by_score"]) if data.get("dup_by_score") else None,
        )


def duplication_profile(table):
    """Cluster-size histogram and removal rate (1 - clusters / documents)."""
    histogram = {}
    for size in table.cluster_sizes.values():
        histogram[size] = histogram.get(size, 0) + 1
    docs = table.num_docs
    clusters = table.num_clusters
    return DuplicationProfile(
        histogram=dict(sorted(histogram.items())),
        total_docs=docs,
        total_clusters=clusters,
        removal_rate=1.0 - clusters / docs if docs else 0.0,
    )


def _checkpoints(num_shards, steps):
    if steps < 2:
        raise ReportError(f"a growth curve needs at least 2 steps, got {steps}")
    if steps > num_shards:
        raise ReportError(f"{steps} steps need at least as many shards, got {num_shards}")
    return {math.ceil(k * num_shards / steps) for k in range(1, steps + 1)}


def growth_curve_from_band_keys(shards, steps, mode="global", num_shards=None):
    """
    Removal rate as shards are added to one incremental union-find pool.

    Args:
        shards: Ordered list of per-shard BandKeys iterables
        steps: Number of curve points; the pool is sampled after shard
               ceil(k * shards / steps) for k = 1..steps
        mode: Clustering mode, as in minhash_dedup.cluster
        num_shards: Shard count when `shards` is a lazy iterator

    Returns:
        (list of GrowthPoint, final DuplicateClusterTable)
    """
    if num_shards is None:
        shards = list(shards)
        num_shards = len(shards)
    checkpoints = _checkpoints(num_shards, steps)
    clusterer = StreamingClusterer(mode, "fuzzy")
    points = []
    for done, shard in enumerate(shards, start=1):
        for entry in shard:
            clusterer.add_band_keys(entry)
        if done in checkpoints:
            points.append(GrowthPoint(clusterer.n_docs, clusterer.n_clusters, clusterer.removal_rate))
            logger.info("Pool of %d documents: removal rate %.4f", clusterer.n_docs, clusterer.removal_rate)
    if clusterer.n_docs == 0:
        raise ReportError("growth curve over an empty pool")
    return points, clusterer.table()


def duplication_growth_curve(shards, steps, config=None, mode="global", shuffle_seed=None,
                             tokenizer_mode="whitespace", strict=True):
    """
    Dedup removal rate as the document pool grows shard by shard.

    Each shard is read once; earlier shards are never re-read.

    Args:
        shards: Ordered shard paths, or lists of Document
        steps: Number of curve points (2 <= steps <= number of shards)
        config: LshConfig for signatures
        mode: "global" or "sharded"
        shuffle_seed: If set, shards are visited in a seeded random order
        tokenizer_mode: Passed to the shard reader
        strict: Shard parse policy

    Returns:
        (list of GrowthPoint, final DuplicateClusterTable)
    """
    config = config or LshConfig()
    shards = list(shards)
    indexed = list(enumerate(shards))
    if shuffle_seed is not None:
        indexed.sort(key=lambda item: (keyed_uniform(shuffle_seed, "shard", item[0]), item[0]))

    def shard_keys(index, shard):
        docs = shard if isinstance(shard, (list, tuple)) else read_shard(shard, index, tokenizer_mode, strict)
        return band_keys_for_documents(docs, config)

    return growth_curve_from_band_keys((shard_keys(i, s) for i, s in indexed), steps, mode, len(indexed))


def default_bin_edges(scores, bins=20):
    """Equal-width edges over the observed score range."""
    finite = [s for s in scores if s is not None and math.isfinite(s)]
    if not finite:
        lo, hi = 0.0, 1.0
    else:
        lo, hi = min(finite), max(finite)
        if lo == hi:
            hi = lo + 1.0
    return np.linspace(lo, hi, bins + 1).tolist()


def _check_edges(edges):
    edges = [float(e) for e in edges]
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ReportError("bin edges must be strictly increasing with at least two edges")
    return edges


def _scores(documents, strict):
    scores, missing = [], 0
    for doc in documents:
        score = doc.quality_score
        if score is None or not math.isfinite(score):
            if strict:
                raise ReportError(f"document {doc.id} has no quality score")
            missing += 1
            continue
        scores.append(score)
    return scores, missing


def score_distribution(documents, edges=None, bins=20, out_of_range="clamp", strict=True):
    """
    Histogram of quality scores.

    Args:
        documents: Iterable of Document
        edges: Strictly increasing bin edges; default 20 equal bins over the data
        bins: Bin count for the default edges
        out_of_range: "clamp" folds outliers into the end bins, "overflow"
                      counts them separately
        strict: Raise on unscored documents; otherwise count them as missing

    Returns:
        ScoreHistogram
    """
    if out_of_range not in OUT_OF_RANGE:
        raise ReportError(f"out_of_range must be one of {OUT_OF_RANGE}")
    scores, missing = _scores(documents, strict)
    edges = _check_edges(edges if edges is not None else default_bin_edges(scores, bins))
    values = np.asarray(scores, dtype=float)

    underflow = overflow = 0
    if out_of_range == "clamp":
        values = np.clip(values, edges[0], edges[-1])
    else:
        underflow = int(np.sum(values < edges[0]))
        overflow = int(np.sum(values > edges[-1]))
        values = values[(values >= edges[0]) & (values <= edges[-1])]

    counts, _ = np.histogram(values, bins=np.asarray(edges))
    return ScoreHistogram(edges, [int(c) for c in counts], underflow, overflow, missing)


def unique_score_distribution(documents, table, edges=None, bins=20, out_of_range="clamp", strict=True):
    """Score histogram over cluster representatives only."""
    reps = representatives(documents, table).values()
    return score_distribution(reps, edges, bins, out_of_range, strict)


def _bin_index(value, edges):
    # right edge closes the last bin, like numpy.histogram
    index = int(np.searchsorted(edges, value, side="right")) - 1
    return min(max(index, 0), len(edges) - 2)


def dup_by_score(documents, table, edges=None, bins=20, strict=True):
    """
    Mean duplicate count of unique contents per score bin.

    Each cluster is placed by its representative's score; empty bins report None.
    """
    reps = representatives(documents, table)
    pairs = []
    for cluster_id, rep in reps.items():
        score = rep.quality_score
        if score is None or not math.isfinite(score):
            if strict:
                raise ReportError(f"representative {rep.id} has no quality score")
            continue
        pairs.append((score, table.cluster_sizes[cluster_id]))

    edges = _check_edges(edges if edges is not None else default_bin_edges([s for s, _ in pairs], bins))
    totals = [0] * (len(edges) - 1)
    counts = [0] * (len(edges) - 1)
    for score, size in pairs:
        i = _bin_index(score, edges)
        totals[i] += size
        counts[i] += 1
    means = [total / n if n else None for total, n in zip(totals, counts)]
    return DupByScore(edges, counts, means)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _histogram_rows(hist):
    rows = [[left, right, count] for left, right, count in zip(hist.edges, hist.edges[1:], hist.counts)]
    if hist.underflow or hist.overflow:
        rows.append(["-inf", hist.edges[0], hist.underflow])
        rows.append([hist.edges[-1], "inf", hist.overflow])
    return rows


def emit_report(bundle, out_dir):
    """
    Write one CSV per computed statistic plus report.json.

    Returns:
        List of written paths
    """
    if not any(v is not None for v in (bundle.profile, bundle.growth, bundle.score_hist,
                                       bundle.unique_score_hist, bundle.dup_by_score)):
        raise ReportError("nothing to report: no statistic was computed")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    if bundle.profile is not None:
        written.append(_write_csv(out_dir / "profile.csv", ["cluster_size", "clusters"],
                                  sorted(bundle.profile.histogram.items())))
    if bundle.growth is not None:
        written.append(_write_csv(out_dir / "growth.csv", ["docs_in_pool", "clusters", "removal_rate"],
                                  [[p.docs_in_pool, p.clusters, p.removal_rate] for p in bundle.growth]))
    if bundle.score_hist is not None:
        written.append(_write_csv(out_dir / "score_hist.csv", ["bin_left", "bin_right", "count"],
                                  _histogram_rows(bundle.score_hist)))
    if bundle.unique_score_hist is not None:
        written.append(_write_csv(out_dir / "unique_score_hist.csv", ["bin_left", "bin_right", "count"],
                                  _histogram_rows(bundle.unique_score_hist)))
    if bundle.dup_by_score is not None:
        d = bundle.dup_by_score
        rows = [[left, right, n, "" if mean is None else mean]
                for left, right, n, mean in zip(d.edges, d.edges[1:], d.unique_docs, d.means)]
        written.append(_write_csv(out_dir / "dup_by_score.csv",
                                  ["bin_left", "bin_right", "unique_docs", "mean_duplicate_count"], rows))

    report_path = out_dir / "report.json"
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(bundle.to_dict(), f, indent=2)
        f.write("\n")
    written.append(report_path)
    return written


def read_report(path):
    with open(path, encoding="utf-8") as f:
        return StatsBundle.from_dict(json.load(f))


if __name__ == "__main__":
    import sys

    from corpus_io import read_corpus
    from minhash_dedup import cluster

    if len(sys.argv) < 2:
        print("Usage: python stats_report.py <corpus_dir_or_shard> [bins]")
        print("\nPrints the cluster-size profile and the quality score histogram.")
        sys.exit(1)

    docs = list(read_corpus(sys.argv[1]))
    profile = duplication_profile(cluster(band_keys_for_documents(docs, LshConfig())))
    print(f"Documents: {profile.total_docs:,}  clusters: {profile.total_clusters:,}  "
          f"removal rate: {profile.removal_rate:.1%}")
    for size, count in profile.histogram.items():
        print(f"  size {size:>5}: {count:,}")

    hist = score_distribution(docs, bins=int(sys.argv[2]) if len(sys.argv) > 2 else 20, strict=False)
    print(f"\nScores ({hist.missing} documents unscored):")
    for left, right, count in zip(hist.edges, hist.edges[1:], hist.counts):
        print(f"  [{left:.3f}, {right:.3f}) {count:,}")
