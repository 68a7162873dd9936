"""Shared fixtures: synthetic documents, shards on disk and cluster tables."""

import json

import numpy as np
import pytest

from corpus_io import Document
from minhash_dedup import DuplicateClusterTable


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_text(rng):
    """Random 60-word texts; two of them never share a 5-word window."""
    def factory(words=60):
        return " ".join(f"w{n}" for n in rng.integers(0, 1_000_000, size=words))
    return factory


@pytest.fixture
def make_doc():
    def factory(doc_id, text=None, tokens=None, score=None, dup=None, shard=0):
        text = text if text is not None else f"document {doc_id}"
        tokens = tokens if tokens is not None else len(text.split())
        return Document(doc_id, text, tokens, score, dup, shard)
    return factory


@pytest.fixture
def write_shards(tmp_path):
    """Write lists of JSON records as shard_00000.jsonl, shard_00001.jsonl, ..."""
    def factory(shards, name="raw"):
        directory = tmp_path / name
        directory.mkdir()
        for index, records in enumerate(shards):
            with open(directory / f"shard_{index:05d}.jsonl", "w", encoding="utf-8") as f:
                for record in records:
                    f.write(json.dumps(record) + "\n")
        return directory
    return factory


@pytest.fixture
def cluster_table():
    """Table from {cluster_id: [member ids]}."""
    def factory(groups):
        doc_to_cluster = {doc_id: cluster_id for cluster_id, members in groups.items() for doc_id in members}
        sizes = {cluster_id: len(members) for cluster_id, members in groups.items()}
        return DuplicateClusterTable(doc_to_cluster, sizes)
    return factory


@pytest.fixture
def duplicated_corpus(random_text):
    """
    Three shards over five contents with known copy counts (content c has c+1 copies),
    each record scored by its content index.

    Returns (shards as lists of records, {content index: [ids]}).
    """
    contents = [random_text() for _ in range(5)]
    shards = [[], [], []]
    members = {}
    position = 0
    for c, text in enumerate(contents):
        for copy in range(c + 1):
            doc_id = f"c{c}-{copy}"
            shards[position % 3].append({"id": doc_id, "text": text, "score": float(c)})
            members.setdefault(c, []).append(doc_id)
            position += 1
    return shards, members
