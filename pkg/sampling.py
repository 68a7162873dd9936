"""
Subsampling strategies and the epoch-repetition stream
Uniform, global-dedup-then-subsample, duplicate-aware and floor/ceil
filtering over a corpus with a duplicate cluster table.

Every random decision is a keyed hash of (seed, document or cluster id,
trial), so results do not depend on iteration order or worker count.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from corpus_io import CurationError
from minhash_dedup import representative_key, representatives

logger = logging.getLogger(__name__)

SAMPLING_MODES = ("uniform", "dedup_then_subsample", "duplicate_aware", "floor_ceil")
WEIGHTINGS = ("uniform", "count_weighted")


class SamplingError(CurationError):
    pass


def keyed_uniform(seed, *parts):
    """Uniform float in [0, 1) derived from (seed, parts) alone."""
    key = (seed & ((1 << 64) - 1)).to_bytes(8, "little")
    message = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.blake2b(message, digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little") / 2.0 ** 64


@dataclass(frozen=True)
class Target:
    doc_count: int | None = None
    token_budget: int | None = None
    fraction: float | None = None

    def __post_init__(self):
        given = [v for v in (self.doc_count, self.token_budget, self.fraction) if v is not None]
        if len(given) != 1:
            raise SamplingError("exactly one of doc_count, token_budget or fraction must be set")
        if self.doc_count is not None and self.doc_count < 0:
            raise SamplingError(f"doc_count must be non-negative, got {self.doc_count}")
        if self.token_budget is not None and self.token_budget < 1:
            raise SamplingError(f"token_budget must be positive, got {self.token_budget}")
        if self.fraction is not None and not 0.0 < self.fraction <= 1.0:
            raise SamplingError(f"fraction must be in (0, 1], got {self.fraction}")

    @property
    def kind(self):
        if self.doc_count is not None:
            return "doc_count"
        return "token_budget" if self.token_budget is not None else "fraction"


@dataclass(frozen=True)
class SamplingSpec:
    target: Target | None = None
    seed: int = 0
    mode: str = "uniform"
    floor: int = 1
    ceil: int | None = None
    weighting: str = "uniform"

    def __post_init__(self):
        if self.mode not in SAMPLING_MODES:
            raise SamplingError(f"Invalid sampling mode: {self.mode}. Must be one of {SAMPLING_MODES}")
        if self.mode == "floor_ceil":
            if self.floor < 1 or (self.ceil is not None and self.ceil < 1):
                raise SamplingError("floor and ceil must be >= 1")
        elif self.target is None:
            raise SamplingError(f"mode {self.mode} needs a target")
        if self.mode == "duplicate_aware" and self.target.fraction is None:
            raise SamplingError("duplicate_aware sampling takes a fraction target")
        if self.weighting not in WEIGHTINGS:
            raise SamplingError(f"Invalid weighting: {self.weighting}. Must be one of {WEIGHTINGS}")


@dataclass
class EpochStream:
    items: list = field(default_factory=list)
    boundaries: list = field(default_factory=list)
    epochs: float = 0.0
    requested_tokens: int = 0
    realized_tokens: int = 0

    def documents(self):
        return [doc for _, doc in self.items]


def _occurrence_keys(documents):
    # repeated ids (already-resampled corpora) get distinct trial keys
    seen = defaultdict(int)
    keys = []
    for doc in documents:
        keys.append((doc.id, seen[doc.id]))
        seen[doc.id] += 1
    return keys


def uniform_subsample(documents, target, seed=0):
    """
    Uniform subsample to a document count, token budget or fraction.

    Doc-count targets keep the k documents with the smallest keyed priority
    (an exact uniform k-subset). Token targets walk documents in priority
    order and stop after the one that crosses the budget. Fractions flip one
    keyed coin per document.

    Args:
        documents: Iterable of Document
        target: Target
        seed: Sampling seed

    Returns:
        List of kept documents in input order
    """
    docs = list(documents)
    keys = _occurrence_keys(docs)

    if target.fraction is not None:
        return [doc for doc, (doc_id, n) in zip(docs, keys)
                if keyed_uniform(seed, "keep", doc_id, n) < target.fraction]

    priorities = [(keyed_uniform(seed, "keep", doc_id, n), doc_id, i) for i, (doc_id, n) in enumerate(keys)]

    if target.doc_count is not None:
        if target.doc_count > len(docs):
            raise SamplingError(f"target of {target.doc_count} documents exceeds corpus size {len(docs)}")
        chosen = {i for _, _, i in heapq.nsmallest(target.doc_count, priorities)}
    else:
        total = sum(doc.token_count for doc in docs)
        if target.token_budget > total:
            raise SamplingError(f"token budget {target.token_budget} exceeds corpus tokens {total}")
        chosen = set()
        tokens = 0
        for _, _, i in sorted(priorities):
            if tokens >= target.token_budget:
                break
            chosen.add(i)
            tokens += docs[i].token_count

    return [doc for i, doc in enumerate(docs) if i in chosen]


def dedup_then_subsample(documents, table, target, seed=0):
    """Reduce each cluster to its representative, then subsample uniformly."""
    docs = list(documents)
    rep_ids = {doc.id for doc in representatives(docs, table).values()}
    reps = [doc for doc in docs if doc.id in rep_ids]
    logger.info("Global dedup kept %d of %d documents before subsampling", len(reps), len(docs))
    return uniform_subsample(reps, target, seed)


def duplicate_aware_subsample(documents, table, fraction, seed=0, weighting="uniform"):
    """
    Keep or drop whole duplicate clusters so the sample keeps the pool's
    duplication profile.

    Args:
        documents: Iterable of Document
        table: DuplicateClusterTable covering the documents
        fraction: Keep probability per cluster, in (0, 1]
        seed: Sampling seed
        weighting: "uniform" keeps each cluster with probability fraction;
                   "count_weighted" uses min(1, fraction * cluster size)

    Returns:
        List of kept documents in input order
    """
    if not 0.0 < fraction <= 1.0:
        raise SamplingError(f"fraction must be in (0, 1], got {fraction}")
    if weighting not in WEIGHTINGS:
        raise SamplingError(f"Invalid weighting: {weighting}")

    kept = []
    decisions = {}
    for doc in documents:
        cluster_id = table.doc_to_cluster.get(doc.id)
        if cluster_id is None:
            raise SamplingError(f"document {doc.id} is not in the cluster table")
        keep = decisions.get(cluster_id)
        if keep is None:
            p = fraction
            if weighting == "count_weighted":
                p = min(1.0, fraction * table.cluster_sizes[cluster_id])
            keep = decisions[cluster_id] = keyed_uniform(seed, "cluster", cluster_id) < p
        if keep:
            kept.append(doc)
    return kept


def floor_ceil_filter(documents, table, floor=1, ceil=None, seed=0):
    """
    Keep clusters with at least `floor` copies, and at most `ceil` of their members.

    The representative is always kept first; further members follow a
    seeded order. floor=7, ceil=1 keeps one copy of every document
    duplicated seven or more times.

    Args:
        documents: Iterable of Document
        table: DuplicateClusterTable (sizes are pre-dedup copy counts)
        floor: Minimum cluster size
        ceil: Maximum copies kept per cluster; None for no limit
        seed: Orders non-representative members

    Returns:
        List of kept documents in input order
    """
    if floor < 1 or (ceil is not None and ceil < 1):
        raise SamplingError("floor and ceil must be >= 1")

    docs = list(documents)
    groups = defaultdict(list)
    for i, doc in enumerate(docs):
        cluster_id = table.doc_to_cluster.get(doc.id)
        if cluster_id is None:
            raise SamplingError(f"document {doc.id} is not in the cluster table")
        if table.cluster_sizes[cluster_id] >= floor:
            groups[cluster_id].append(i)

    chosen = set()
    for cluster_id, indices in groups.items():
        rep = min(indices, key=lambda i: representative_key(docs[i]))
        rest = sorted((i for i in indices if i != rep),
                      key=lambda i: (keyed_uniform(seed, "order", docs[i].id), docs[i].id, i))
        limit = len(indices) if ceil is None else ceil
        chosen.update(([rep] + rest)[:limit])

    logger.info("Floor %d / ceil %s kept %d of %d documents", floor, ceil, len(chosen), len(docs))
    return [doc for i, doc in enumerate(docs) if i in chosen]


def epoch_stream(documents, total_tokens, seed=0):
    """
    Repeat the corpus in independently shuffled passes up to a token budget.

    The last pass stops after the document that crosses total_tokens.

    Args:
        documents: Iterable of Document
        total_tokens: Tokens to emit, at least 1
        seed: Shuffle seed; epoch e uses subseed (seed, e)

    Returns:
        EpochStream with (epoch, document) items and cumulative-token boundaries
    """
    docs = list(documents)
    if not docs:
        raise SamplingError("cannot build an epoch stream from an empty corpus")
    if total_tokens < 1:
        raise SamplingError(f"total_tokens must be >= 1, got {total_tokens}")
    corpus_tokens = sum(doc.token_count for doc in docs)
    if corpus_tokens == 0:
        raise SamplingError("corpus has no tokens to repeat")

    keys = _occurrence_keys(docs)
    stream = EpochStream(epochs=total_tokens / corpus_tokens, requested_tokens=total_tokens)
    cumulative = 0
    epoch = 0
    while cumulative < total_tokens:
        order = sorted(range(len(docs)),
                       key=lambda i: (keyed_uniform(seed, "epoch", epoch, *keys[i]), i))
        for i in order:
            stream.items.append((epoch, docs[i]))
            cumulative += docs[i].token_count
            if cumulative >= total_tokens:
                break
        stream.boundaries.append(cumulative)
        epoch += 1

    stream.realized_tokens = cumulative
    logger.info("Epoch stream: %.3f epochs, %d documents, %d tokens",
                stream.epochs, len(stream.items), cumulative)
    return stream


def write_epoch_index(stream, path):
    index = {
        "epochs": stream.epochs,
        "requested_tokens": stream.requested_tokens,
        "realized_tokens": stream.realized_tokens,
        "boundaries": stream.boundaries,
    }
    with open(Path(path), "w", encoding="utf-8") as f:
        json.dump(index, f, indent=2)
        f.write("\n")


def run_sampling(documents, spec, table=None):
    """Apply the strategy named by spec.mode."""
    if spec.mode != "uniform" and table is None:
        raise SamplingError(f"mode {spec.mode} needs a cluster table")
    if spec.mode == "uniform":
        return uniform_subsample(documents, spec.target, spec.seed)
    if spec.mode == "dedup_then_subsample":
        return dedup_then_subsample(documents, table, spec.target, spec.seed)
    if spec.mode == "duplicate_aware":
        return duplicate_aware_subsample(documents, table, spec.target.fraction, spec.seed, spec.weighting)
    return floor_ceil_filter(documents, table, spec.floor, spec.ceil, spec.seed)


if __name__ == "__main__":
    import sys

    from corpus_io import read_corpus

    if len(sys.argv) < 3:
        print("Usage: python sampling.py <corpus_dir_or_shard> <fraction> [seed]")
        print("\nExample:")
        print("  python sampling.py runs/ingest/corpus 0.1 7")
        sys.exit(1)

    docs = list(read_corpus(sys.argv[1]))
    seed = int(sys.argv[3]) if len(sys.argv) > 3 else 0
    kept = uniform_subsample(docs, Target(fraction=float(sys.argv[2])), seed)
    print(f"Kept {len(kept):,} of {len(docs):,} documents "
          f"({sum(d.token_count for d in kept):,} of {sum(d.token_count for d in docs):,} tokens)")
