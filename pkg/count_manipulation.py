"""
Document count manipulation
Rank unique documents by a quality metric, map rank to a target copy count
(greedy, linear or custom steps), then resample every pre-dedup instance so
each unique document appears its target number of times in expectation.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, replace

from corpus_io import CurationError, Document
from minhash_dedup import representatives
from sampling import keyed_uniform

logger = logging.getLogger(__name__)

METRICS = ("score", "dup_count", "ensemble")
COUNT_KINDS = ("greedy_k", "linear_up_to_k", "custom_steps")
LEVELS = ("instance", "unique")


class CountFunctionError(CurationError):
    pass


class MissingMetricError(CurationError):
    pass


@dataclass(frozen=True)
class RankMetric:
    kind: str = "ensemble"
    direction: str = "lower_is_better"

    def __post_init__(self):
        if self.kind not in METRICS:
            raise CountFunctionError(f"Invalid metric: {self.kind}. Must be one of {METRICS}")


@dataclass(frozen=True)
class Instance:
    """One pre-dedup copy, tagged with its cluster size and representative id."""
    doc: Document
    duplicate_count: int
    unique_id: str


@dataclass(frozen=True)
class CountFunction:
    kind: str
    max_copies: int
    goal_docs: int
    steps: tuple
    bucket_sizes: tuple

    @property
    def cutoffs(self):
        """Last rank position of each copy-count bucket, best bucket first."""
        total, cutoffs = 0, []
        for size in self.bucket_sizes:
            total += size
            cutoffs.append(total)
        return tuple(cutoffs)

    @property
    def unique_docs(self):
        return sum(self.bucket_sizes)

    @property
    def expected_docs(self):
        return sum(step * size for step, size in zip(self.steps, self.bucket_sizes))

    def copies(self, position):
        """Target copies for the document at 1-based rank position."""
        for step, cutoff in zip(self.steps, self.cutoffs):
            if position <= cutoff:
                return step
        return 0


def _metric_value(doc, metric, strict):
    if metric == "score":
        if doc.quality_score is None:
            if strict:
                raise MissingMetricError(f"document {doc.id} has no quality_score")
            return float("-inf")
        return doc.quality_score
    if doc.duplicate_count is None:
        if strict:
            raise MissingMetricError(f"document {doc.id} has no duplicate_count")
        return 0
    return doc.duplicate_count


def rank_documents(unique_docs, metric="score", strict=True):
    """
    Rank unique documents, 1 = best.

    Higher score (or higher duplicate count) ranks better; ties go to the
    smaller id, so ranks are always a permutation of 1..U.

    Args:
        unique_docs: Iterable of Document, one per unique content
        metric: "score" or "dup_count"
        strict: Raise on a missing metric field; otherwise it ranks last

    Returns:
        Dict id -> rank
    """
    if metric not in ("score", "dup_count"):
        raise CountFunctionError(f"rank_documents takes score or dup_count, got {metric}")
    keyed = [(-_metric_value(doc, metric, strict), doc.id) for doc in unique_docs]
    keyed.sort()
    return {doc_id: rank for rank, (_, doc_id) in enumerate(keyed, start=1)}


def ensemble_rank(score_ranks, dup_ranks):
    """Worst of the two rankings per document: max(score rank, dup-count rank)."""
    if score_ranks.keys() != dup_ranks.keys():
        missing = sorted(score_ranks.keys() ^ dup_ranks.keys())
        raise CountFunctionError(f"rank maps cover different documents, e.g. {missing[:3]}")
    return {doc_id: max(rank, dup_ranks[doc_id]) for doc_id, rank in score_ranks.items()}


def metric_ranks(unique_docs, metric="ensemble", strict=True):
    if isinstance(metric, RankMetric):
        metric = metric.kind
    RankMetric(metric)
    unique_docs = list(unique_docs)
    if metric != "ensemble":
        return rank_documents(unique_docs, metric, strict)
    return ensemble_rank(rank_documents(unique_docs, "score", strict),
                         rank_documents(unique_docs, "dup_count", strict))


def order_unique(values):
    """Ids best-first: ascending rank value, ties by id."""
    return [doc_id for _, doc_id in sorted((value, doc_id) for doc_id, value in values.items())]


def count_steps(kind, max_copies, steps=None):
    """Copies per bucket, best bucket first."""
    if kind == "greedy_k":
        steps = (max_copies,)
    elif kind == "linear_up_to_k":
        steps = tuple(range(max_copies, 0, -1))
    elif kind == "custom_steps":
        if not steps:
            raise CountFunctionError("custom_steps needs a list of copy counts")
        steps = tuple(int(s) for s in steps)
        if any(s < 1 for s in steps) or any(a < b for a, b in zip(steps, steps[1:])):
            raise CountFunctionError(f"custom steps must be positive and non-increasing, got {list(steps)}")
    else:
        raise CountFunctionError(f"Invalid count function: {kind}. Must be one of {COUNT_KINDS}")
    if max_copies < 1:
        raise CountFunctionError(f"max_copies must be >= 1, got {max_copies}")
    return steps


def _bucket_sizes(goal_docs, steps):
    # equal buckets of goal / sum(steps) unique docs; the remainder goes to the best bucket
    per_bucket, remainder = divmod(goal_docs, sum(steps))
    extra = math.ceil(remainder / steps[0])
    return (per_bucket + extra,) + (per_bucket,) * (len(steps) - 1)


def build_count_function(kind, max_copies, goal_docs, ranked_unique, steps=None):
    """
    Thresholds that turn a ranking into target copy counts.

    Args:
        kind: "greedy_k", "linear_up_to_k" or "custom_steps"
        max_copies: Copies of the best document (k)
        goal_docs: Desired output size in documents
        ranked_unique: Best-first ids of the unique documents, or their count
        steps: Copy counts per bucket for custom_steps

    Returns:
        CountFunction whose expected output is goal_docs, rounded up by less
        than max_copies
    """
    steps = count_steps(kind, max_copies, steps)
    if kind == "custom_steps":
        max_copies = steps[0]
    unique = ranked_unique if isinstance(ranked_unique, int) else len(ranked_unique)
    if goal_docs < 1:
        raise CountFunctionError(f"goal_docs must be >= 1, got {goal_docs}")

    sizes = _bucket_sizes(goal_docs, steps)
    if goal_docs > max_copies * unique or sum(sizes) > unique:
        raise CountFunctionError(
            f"goal of {goal_docs} documents is infeasible with {unique} unique documents; "
            f"at most {max_goal_docs(steps, unique)} are achievable with steps {list(steps)}")
    return CountFunction(kind, max_copies, goal_docs, steps, sizes)


def max_goal_docs(steps, unique):
    """Largest goal_docs whose buckets fit in `unique` documents."""
    lo, hi = 0, steps[0] * unique
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if sum(_bucket_sizes(mid, steps)) <= unique:
            lo = mid
        else:
            hi = mid - 1
    return lo


def target_copies(count_fn, ordering):
    """Map each id of a best-first ordering to its target copies."""
    return {doc_id: count_fn.copies(position) for position, doc_id in enumerate(ordering, start=1)}


def thresholds(count_fn, ordering, values):
    """Metric value at each bucket cutoff (the last value still in the bucket)."""
    return [values[ordering[cutoff - 1]] for cutoff in count_fn.cutoffs if cutoff >= 1]


def instances_from_clusters(documents, table):
    """
    Build the instance stream for count manipulation.

    Returns:
        (instances in input order, representative documents in first-seen
        order with duplicate_count set)
    """
    docs = list(documents)
    reps = representatives(docs, table)
    instances, unique_docs, seen = [], [], set()
    for doc in docs:
        cluster_id = table.doc_to_cluster[doc.id]
        size = table.cluster_sizes[cluster_id]
        rep = reps[cluster_id]
        if cluster_id not in seen:
            seen.add(cluster_id)
            unique_docs.append(replace(rep, duplicate_count=size))
        instances.append(Instance(replace(doc, duplicate_count=size), size, rep.id))
    return instances, unique_docs


def sample_count_manipulation(instances, count_fn, positions, seed=0, level="instance"):
    """
    Resample instances to their target copy counts.

    At instance level every pre-dedup copy runs target_count trials, each
    keeping one copy with probability 1/duplicate_count, so a unique document
    appears target_count times in expectation. At unique level the
    representative alone emits exactly target_count copies.

    Args:
        instances: Iterable of Instance
        count_fn: CountFunction
        positions: Dict unique id -> 1-based rank position
        seed: Sampling seed
        level: "instance" or "unique"

    Returns:
        List of kept documents, in input order with copies in place
    """
    if level not in LEVELS:
        raise CountFunctionError(f"Invalid level: {level}. Must be one of {LEVELS}")

    output = []
    occurrences = defaultdict(int)
    for inst in instances:
        if inst.duplicate_count < 1:
            raise CountFunctionError(f"duplicate_count must be >= 1 for {inst.doc.id}, got {inst.duplicate_count}")
        position = positions.get(inst.unique_id)
        if position is None:
            raise CountFunctionError(f"no rank for unique document {inst.unique_id}")
        target = count_fn.copies(position)
        if target < 0:
            raise CountFunctionError(f"negative target count for {inst.unique_id}")

        if level == "unique":
            if inst.doc.id == inst.unique_id:
                output.extend([inst.doc] * target)
            continue

        occurrence = occurrences[inst.doc.id]
        occurrences[inst.doc.id] += 1
        keep_p = 1.0 / inst.duplicate_count
        for trial in range(target):
            if keyed_uniform(seed, "copy", inst.doc.id, occurrence, trial) < keep_p:
                output.append(inst.doc)
    return output


def expected_output(count_fn, ordered_unique_docs):
    """Expected (documents, tokens) produced by a count function."""
    docs = tokens = 0
    for position, doc in enumerate(ordered_unique_docs, start=1):
        copies = count_fn.copies(position)
        docs += copies
        tokens += copies * doc.token_count
    return docs, tokens


def fit_goal_docs(kind, max_copies, token_budget, ordered_unique_docs, steps=None):
    """
    Smallest goal_docs whose expected output reaches token_budget.

    Binary search over expected_output; errors if even the largest feasible
    goal falls short of the budget.
    """
    ordered_unique_docs = list(ordered_unique_docs)
    steps = count_steps(kind, max_copies, steps)
    unique = len(ordered_unique_docs)
    hi = max_goal_docs(steps, unique)

    def tokens_at(goal):
        return expected_output(build_count_function(kind, max_copies, goal, unique, steps),
                               ordered_unique_docs)[1]

    if hi < 1 or tokens_at(hi) < token_budget:
        reachable = tokens_at(hi) if hi >= 1 else 0
        raise CountFunctionError(
            f"token budget {token_budget} is unreachable; at most {reachable} tokens with {unique} unique documents")

    lo = 1
    while lo < hi:
        mid = (lo + hi) // 2
        if tokens_at(mid) >= token_budget:
            hi = mid
        else:
            lo = mid + 1
    logger.info("Fitted goal_docs=%d for a budget of %d tokens", lo, token_budget)
    return build_count_function(kind, max_copies, lo, unique, steps)


if __name__ == "__main__":
    import sys

    if len(sys.argv) < 5:
        print("Usage: python count_manipulation.py <greedy_k|linear_up_to_k> <max_copies> <goal_docs> <unique_docs>")
        print("\nExample:")
        print("  python count_manipulation.py linear_up_to_k 4 1000 800")
        sys.exit(1)

    count_fn = build_count_function(sys.argv[1], int(sys.argv[2]), int(sys.argv[3]), int(sys.argv[4]))
    print(f"{'copies':>8} {'documents':>10} {'last rank':>10}")
    for step, size, cutoff in zip(count_fn.steps, count_fn.bucket_sizes, count_fn.cutoffs):
        print(f"{step:>8} {size:>10} {cutoff:>10}")
    print(f"\nUnique documents used: {count_fn.unique_docs} of {sys.argv[4]}")
    print(f"Expected documents:    {count_fn.expected_docs}")
