"""
Fuzzy and exact duplicate detection
Word n-gram shingles -> keyed 64-bit minhash signatures -> LSH band keys ->
union-find clusters. Defaults are 5-word shingles and 14 bands of 9 rows.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import re
import unicodedata
import zipfile
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from corpus_io import CurationError, list_shards, read_shard

logger = logging.getLogger(__name__)

CACHE_VERSION = 1
SHORT_DOC_POLICIES = ("exact", "singleton")
CLUSTER_MODES = ("global", "sharded")

_UINT64_MAX = (1 << 64) - 1
_SHINGLE_MULTIPLIER = np.uint64(0x9E3779B97F4A7C15)
_CHUNK = 4096
_PUNCTUATION = re.compile(r"[^\w\s]+")
_WHITESPACE = re.compile(r"\s+")


class SignatureError(CurationError):
    pass


@dataclass(frozen=True)
class LshConfig:
    ngram: int = 5
    bands: int = 14
    rows: int = 9
    seed: int = 0
    short_doc_policy: str = "exact"

    def __post_init__(self):
        if self.ngram < 1:
            raise SignatureError(f"ngram must be >= 1, got {self.ngram}")
        if self.bands < 1 or self.rows < 1:
            raise SignatureError(f"bands and rows must be >= 1, got {self.bands}x{self.rows}")
        if not 0 <= self.seed <= _UINT64_MAX:
            raise SignatureError(f"seed must fit in 64 bits, got {self.seed}")
        if self.short_doc_policy not in SHORT_DOC_POLICIES:
            raise SignatureError(f"short_doc_policy must be one of {SHORT_DOC_POLICIES}")

    @property
    def num_perm(self):
        return self.bands * self.rows

    def header(self):
        return {"version": CACHE_VERSION, "bands": self.bands, "rows": self.rows,
                "seed": self.seed, "n": self.ngram, "short_doc_policy": self.short_doc_policy}


@dataclass(frozen=True)
class ShingleSet:
    items: np.ndarray
    n: int
    too_short: bool = False

    def __len__(self):
        return len(self.items)


@dataclass(frozen=True)
class MinHashSignature:
    values: np.ndarray
    seed: int
    bands: int
    rows: int


@dataclass(frozen=True)
class BandKeys:
    doc_id: str
    keys: tuple
    shard_index: int = 0
    config: LshConfig | None = None


@dataclass
class DuplicateClusterTable:
    doc_to_cluster: dict = field(default_factory=dict)
    cluster_sizes: dict = field(default_factory=dict)
    kind: str = "fuzzy"

    @property
    def num_docs(self):
        return len(self.doc_to_cluster)

    @property
    def num_clusters(self):
        return len(self.cluster_sizes)

    def count_of(self, doc_id):
        cluster_id = self.doc_to_cluster.get(doc_id)
        if cluster_id is None:
            raise SignatureError(f"document {doc_id} is not in the cluster table")
        return self.cluster_sizes[cluster_id]

    def members(self):
        groups = defaultdict(list)
        for doc_id, cluster_id in self.doc_to_cluster.items():
            groups[cluster_id].append(doc_id)
        return dict(groups)


# --- hashing ---------------------------------------------------------------

def _mix64(x):
    # splitmix64 finalizer; uint64 arrays wrap on overflow
    x = x ^ (x >> np.uint64(30))
    x = x * np.uint64(0xBF58476D1CE4E5B9)
    x = x ^ (x >> np.uint64(27))
    x = x * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def _hash64(data, key=b""):
    return int.from_bytes(hashlib.blake2b(data, digest_size=8, key=key).digest(), "little")


@lru_cache(maxsize=1 << 20)
def _word_hash(word):
    return _hash64(word.encode("utf-8"))


@lru_cache(maxsize=64)
def _component_keys(seed, count):
    keys = _mix64(np.arange(count, dtype=np.uint64) ^ np.uint64(seed))
    keys.setflags(write=False)
    return keys


def normalize_text(text):
    """NFKC, lowercase, strip punctuation, collapse whitespace."""
    text = unicodedata.normalize("NFKC", text).lower()
    text = _PUNCTUATION.sub(" ", text)
    return _WHITESPACE.sub(" ", text).strip()


def shingle(text, n=5):
    """
    Hash every distinct contiguous n-word window of the normalized text.

    Returns a ShingleSet; texts with fewer than n words give an empty set
    flagged too_short.
    """
    if n < 1:
        raise SignatureError(f"shingle width must be >= 1, got {n}")
    words = normalize_text(text).split()
    if len(words) < n:
        return ShingleSet(np.empty(0, dtype=np.uint64), n, too_short=True)

    word_hashes = np.fromiter((_word_hash(w) for w in words), dtype=np.uint64, count=len(words))
    windows = len(words) - n + 1
    hashes = word_hashes[:windows].copy()
    for offset in range(1, n):
        hashes = _mix64(hashes * _SHINGLE_MULTIPLIER + word_hashes[offset:offset + windows])
    return ShingleSet(np.unique(_mix64(hashes)), n)


def signature(shingles, bands=14, rows=9, seed=0):
    """
    Minhash signature of a shingle set.

    Component k is the minimum over shingles of a 64-bit mix keyed by (seed, k),
    so the result does not depend on shingle order.

    Args:
        shingles: ShingleSet or iterable of 64-bit shingle hashes
        bands: Number of LSH bands
        rows: Components per band
        seed: 64-bit generator seed

    Returns:
        MinHashSignature with bands*rows components
    """
    if isinstance(shingles, ShingleSet):
        items = shingles.items
    else:
        items = np.asarray(list(shingles) if not isinstance(shingles, np.ndarray) else shingles,
                           dtype=np.uint64)
    if len(items) == 0:
        raise SignatureError("too short for minhash: empty shingle set")

    keys = _component_keys(seed, bands * rows)
    values = np.full(bands * rows, np.uint64(_UINT64_MAX), dtype=np.uint64)
    for start in range(0, len(items), _CHUNK):
        chunk = items[start:start + _CHUNK]
        values = np.minimum(values, _mix64(chunk[None, :] ^ keys[:, None]).min(axis=1))
    return MinHashSignature(values, seed, bands, rows)


def band_keys(sig):
    """One 64-bit key per band, hashing the band index with its row values."""
    values = sig.values.astype("<u8")
    return tuple(
        _hash64(band.to_bytes(2, "little") + values[band * sig.rows:(band + 1) * sig.rows].tobytes())
        for band in range(sig.bands)
    )


def collision_probability(s, bands=14, rows=9):
    """Probability that two sets with Jaccard s share at least one band: 1 - (1 - s^r)^b."""
    if not 0.0 <= s <= 1.0:
        raise SignatureError(f"jaccard must be in [0, 1], got {s}")
    return 1.0 - (1.0 - s ** rows) ** bands


def jaccard(set_a, set_b):
    a, b = set(set_a), set(set_b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def estimate_jaccard(sig_a, sig_b):
    if len(sig_a.values) != len(sig_b.values) or sig_a.seed != sig_b.seed:
        raise SignatureError("signatures were built with different configurations")
    return float(np.mean(sig_a.values == sig_b.values))


def document_band_keys(doc_id, text, config, shard_index=0):
    shingles = shingle(text, config.ngram)
    if shingles.too_short:
        if config.short_doc_policy == "singleton":
            keys = ()
        else:
            keys = (_hash64(b"short:" + normalize_text(text).encode("utf-8")),)
    else:
        keys = band_keys(signature(shingles, config.bands, config.rows, config.seed))
    return BandKeys(doc_id, keys, shard_index, config)


def band_keys_for_documents(documents, config):
    for doc in documents:
        yield document_band_keys(doc.id, doc.text, config, doc.shard_index)


def _shard_band_keys(task):
    path, shard_index, config, tokenizer_mode, strict = task
    return [document_band_keys(doc.id, doc.text, config, shard_index)
            for doc in read_shard(path, shard_index, tokenizer_mode, strict)]


def compute_band_keys(source, config, workers=1, tokenizer_mode="whitespace", progress_callback=None,
                      strict=True):
    """
    Band keys for every document of a sharded corpus, in shard order.

    Shards are processed independently (one worker per shard) and merged in
    shard order, so the output does not depend on the worker count.

    Args:
        source: Anything corpus_io.list_shards accepts
        config: LshConfig
        workers: Process count; 1 computes inline
        tokenizer_mode: Passed to the shard reader
        progress_callback: Optional callback(percent, message)
        strict: Shard parse policy, as in corpus_io.read_corpus

    Returns:
        Iterator of per-shard lists of BandKeys
    """
    shards = list_shards(source)
    tasks = [(path, index, config, tokenizer_mode, strict) for index, path in enumerate(shards)]

    def report(done):
        if progress_callback:
            progress_callback(int(100 * done / max(len(tasks), 1)), f"Signed shard {done}/{len(tasks)}")

    if workers <= 1 or len(tasks) <= 1:
        for done, task in enumerate(tasks, start=1):
            yield _shard_band_keys(task)
            report(done)
        return

    with ProcessPoolExecutor(max_workers=workers) as executor:
        for done, shard_keys in enumerate(executor.map(_shard_band_keys, tasks), start=1):
            yield shard_keys
            report(done)


# --- signature cache -------------------------------------------------------

def write_band_cache(path, config, entries):
    """Persist one shard's band keys as .npz with a versioned header."""
    entries = list(entries)
    keys = np.zeros((len(entries), config.bands), dtype=np.uint64)
    lengths = np.zeros(len(entries), dtype=np.int64)
    for i, entry in enumerate(entries):
        lengths[i] = len(entry.keys)
        keys[i, :len(entry.keys)] = np.array(entry.keys, dtype=np.uint64)
    arrays = {
        "header": np.array(json.dumps(config.header(), sort_keys=True)),
        "ids": np.array([e.doc_id for e in entries], dtype=str),
        "shard": np.array([e.shard_index for e in entries], dtype=np.int64),
        "lengths": lengths,
        "keys": keys,
    }
    # np.savez stamps entries with the current time; a fixed date keeps caches byte-identical
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as archive:
        for name, array in arrays.items():
            buffer = io.BytesIO()
            np.lib.format.write_array(buffer, array, allow_pickle=False)
            archive.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0)), buffer.getvalue())


def read_band_cache(path, config):
    """Load band keys written by write_band_cache; the header must match config."""
    with np.load(path) as data:
        header = json.loads(str(data["header"]))
        if header != config.header():
            raise SignatureError(f"band cache {path} was built with {header}, expected {config.header()}")
        ids, shards, lengths, keys = data["ids"], data["shard"], data["lengths"], data["keys"]
        return [
            BandKeys(str(ids[i]), tuple(int(k) for k in keys[i, :lengths[i]]), int(shards[i]), config)
            for i in range(len(ids))
        ]


# --- clustering ------------------------------------------------------------

class StreamingClusterer:
    """
    Incremental union-find over band-key buckets.

    Roots are always the minimum member id, so the final table is the same
    whatever order unions happen in. In sharded mode buckets are keyed by
    (shard, key) and never merge across shards.
    """

    def __init__(self, mode="global", kind="fuzzy"):
        if mode not in CLUSTER_MODES:
            raise SignatureError(f"Invalid cluster mode: {mode}. Must be one of {CLUSTER_MODES}")
        self.mode = mode
        self.kind = kind
        self.config = None
        self.n_docs = 0
        self.n_clusters = 0
        self._parent = {}
        self._buckets = {}

    def _find(self, x):
        parent = self._parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def _union(self, a, b):
        ra, rb = self._find(a), self._find(b)
        if ra == rb:
            return
        if rb < ra:
            ra, rb = rb, ra
        self._parent[rb] = ra
        self.n_clusters -= 1

    def add(self, doc_id, keys, shard_index=0):
        if doc_id in self._parent:
            raise SignatureError(f"document id {doc_id} was added twice")
        self._parent[doc_id] = doc_id
        self.n_docs += 1
        self.n_clusters += 1
        for key in keys:
            bucket = (shard_index, key) if self.mode == "sharded" else key
            first = self._buckets.setdefault(bucket, doc_id)
            if first != doc_id:
                self._union(first, doc_id)

    def add_band_keys(self, entry):
        if entry.config is not None:
            if self.config is None:
                self.config = entry.config
            elif entry.config != self.config:
                raise SignatureError(
                    f"mixed signature configurations: {entry.config} vs {self.config} (document {entry.doc_id})")
        self.add(entry.doc_id, entry.keys, entry.shard_index)

    @property
    def removal_rate(self):
        return 1.0 - self.n_clusters / self.n_docs if self.n_docs else 0.0

    def table(self):
        doc_to_cluster = {doc_id: self._find(doc_id) for doc_id in self._parent}
        return DuplicateClusterTable(doc_to_cluster, dict(Counter(doc_to_cluster.values())), self.kind)


def cluster(entries, mode="global"):
    """
    Fuzzy clusters from a stream of BandKeys.

    Documents sharing any band key end up in one cluster (transitive closure).

    Args:
        entries: Iterable of BandKeys built with one LshConfig
        mode: "global", or "sharded" to restrict unions to each shard

    Returns:
        DuplicateClusterTable of kind fuzzy, cluster ids = minimum member id
    """
    clusterer = StreamingClusterer(mode, "fuzzy")
    for entry in entries:
        clusterer.add_band_keys(entry)
    logger.info("Fuzzy clustering (%s): %d documents -> %d clusters",
                mode, clusterer.n_docs, clusterer.n_clusters)
    return clusterer.table()


def exact_key(text):
    return hashlib.md5(normalize_text(text).encode("utf-8")).hexdigest()


def exact_cluster(documents, mode="global"):
    """Clusters of documents with identical normalized text."""
    clusterer = StreamingClusterer(mode, "exact")
    for doc in documents:
        clusterer.add(doc.id, (exact_key(doc.text),), doc.shard_index)
    logger.info("Exact clustering (%s): %d documents -> %d clusters",
                mode, clusterer.n_docs, clusterer.n_clusters)
    return clusterer.table()


def duplicate_counts(table, ids=None):
    """
    Pre-deduplication copy count of each document (its cluster size).

    Args:
        table: DuplicateClusterTable
        ids: Optional ids to look up; defaults to every document in the table

    Returns:
        Dict id -> positive integer
    """
    if ids is None:
        ids = table.doc_to_cluster.keys()
    return {doc_id: table.count_of(doc_id) for doc_id in ids}


def representative_key(doc):
    # highest score first, then smallest id; missing scores rank last
    score = doc.quality_score if doc.quality_score is not None else float("-inf")
    return (-score, doc.id)


def representatives(documents, table):
    """The keep-one-copy member of each cluster: highest score, ties by min id."""
    best = {}
    for doc in documents:
        cluster_id = table.doc_to_cluster.get(doc.id)
        if cluster_id is None:
            raise SignatureError(f"document {doc.id} is not in the cluster table")
        current = best.get(cluster_id)
        if current is None or representative_key(doc) < representative_key(current):
            best[cluster_id] = doc
    return best


def write_cluster_table(table, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for doc_id, cluster_id in table.doc_to_cluster.items():
            row = {"id": doc_id, "cluster": cluster_id, "count": table.cluster_sizes[cluster_id]}
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_cluster_table(path, kind="fuzzy"):
    doc_to_cluster = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                row = json.loads(line)
                doc_to_cluster[str(row["id"])] = str(row["cluster"])
    return DuplicateClusterTable(doc_to_cluster, dict(Counter(doc_to_cluster.values())), kind)


if __name__ == "__main__":
    import sys

    if len(sys.argv) < 3:
        print("Usage: python minhash_dedup.py <text_file_a> <text_file_b> [ngram] [bands] [rows]")
        print("\nCompares two documents: true shingle Jaccard, minhash estimate,")
        print("LSH collision probability and whether they share a band.")
        sys.exit(1)

    text_a = Path(sys.argv[1]).read_text(encoding="utf-8")
    text_b = Path(sys.argv[2]).read_text(encoding="utf-8")
    config = LshConfig(
        ngram=int(sys.argv[3]) if len(sys.argv) > 3 else 5,
        bands=int(sys.argv[4]) if len(sys.argv) > 4 else 14,
        rows=int(sys.argv[5]) if len(sys.argv) > 5 else 9,
    )

    shingles_a, shingles_b = shingle(text_a, config.ngram), shingle(text_b, config.ngram)
    print(f"Shingles: {len(shingles_a)} vs {len(shingles_b)} ({config.ngram}-word windows)")
    print(f"Bands x rows: {config.bands} x {config.rows}")
    print("-" * 50)

    if shingles_a.too_short or shingles_b.too_short:
        print("At least one document is too short for minhash; only exact matching applies.")
        print(f"Exact duplicate: {exact_key(text_a) == exact_key(text_b)}")
        sys.exit(0)

    true_j = jaccard(shingles_a.items.tolist(), shingles_b.items.tolist())
    sig_a = signature(shingles_a, config.bands, config.rows, config.seed)
    sig_b = signature(shingles_b, config.bands, config.rows, config.seed)
    shared = set(band_keys(sig_a)) & set(band_keys(sig_b))

    print(f"Jaccard:               {true_j:.4f}")
    print(f"Minhash estimate:      {estimate_jaccard(sig_a, sig_b):.4f}")
    print(f"Collision probability: {collision_probability(true_j, config.bands, config.rows):.4f}")
    print(f"Shared bands:          {len(shared)}")
    print(f"\nFuzzy duplicate: {bool(shared)}")
