"""
Corpus I/O - sharded JSONL corpora, score sidecars and manifests
Reads and writes one JSON object per line (optionally gzip per shard) with
fields "text" and optional "id", "score", "dup_count", "token_count".
"""

from __future__ import annotations

import gzip
import hashlib
import io
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping

logger = logging.getLogger(__name__)

TOKENIZER_MODES = ("whitespace", "bytes_div_4", "external_field")
MANIFEST_NAME = "manifest.json"
INCOMPLETE_MARKER = "_INCOMPLETE"

# Sentinel score for documents missing from an allow-missing sidecar; ranks last.
MISSING_SCORE = float("-inf")


class CurationError(ValueError):
    """Base class for data errors (bad records, violated preconditions)."""


class CorpusFormatError(CurationError):
    def __init__(self, path, line_number, reason):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{self.path}:{line_number}: {reason}")


class ScoreJoinError(CurationError):
    pass


class IncompleteCorpusError(CurationError):
    def __init__(self, directory):
        self.directory = str(directory)
        super().__init__(f"{self.directory} holds an interrupted write ({INCOMPLETE_MARKER} present); "
                         "rerun the step that produced it")


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    token_count: int
    quality_score: float | None = None
    duplicate_count: int | None = None
    shard_index: int = 0

    def to_record(self):
        record = {"id": self.id, "text": self.text, "token_count": self.token_count}
        if self.quality_score is not None:
            record["score"] = self.quality_score
        if self.duplicate_count is not None:
            record["dup_count"] = self.duplicate_count
        return record


@dataclass
class CorpusManifest:
    shard_paths: list[str] = field(default_factory=list)
    doc_count: int = 0
    token_count: int = 0
    has_scores: bool = False
    has_dup_counts: bool = False
    tokenizer_mode: str = "whitespace"
    shard_doc_counts: list[int] = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass
class ReadStats:
    """Counts filled in while reading; lenient mode records skipped lines here."""
    documents: int = 0
    skipped: int = 0
    shard_doc_counts: list[int] = field(default_factory=list)


def count_tokens(text, mode="whitespace", external=None):
    """
    Count tokenizer units of a text.

    Args:
        text: Document text
        mode: "whitespace", "bytes_div_4" or "external_field"
        external: Precomputed count; overrides both built-in modes when given

    Returns:
        Non-negative token count (at least 1 for non-empty text)
    """
    if external is not None:
        if isinstance(external, bool) or not isinstance(external, int) or external < 0:
            raise CurationError(f"token_count must be a non-negative integer, got {external!r}")
        return external
    if mode == "external_field":
        raise CurationError("tokenizer mode external_field needs a token_count field on every record")
    if mode == "whitespace":
        return len(text.split())
    if mode == "bytes_div_4":
        size = len(text.encode("utf-8"))
        return math.ceil(size / 4) if size else 0
    raise CurationError(f"Unknown tokenizer mode: {mode}. Must be one of {', '.join(TOKENIZER_MODES)}")


def document_id(text, shard_index, record_index):
    # md5 is 128 bits and stable across sessions, unlike hash()
    salted = f"{shard_index}:{record_index}:{text}"
    return hashlib.md5(salted.encode("utf-8")).hexdigest()


def _open_text(path, mode="rt"):
    if str(path).endswith(".gz"):
        if "w" in mode:
            # mtime=0 keeps compressed shards byte-identical across runs
            return io.TextIOWrapper(gzip.GzipFile(path, "wb", mtime=0), encoding="utf-8")
        return gzip.open(path, mode, encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def list_shards(source):
    """
    Resolve a corpus source to its ordered shard paths.

    Args:
        source: CorpusManifest, manifest.json path, directory, shard path,
                or a list of any of those

    Returns:
        List of shard paths in shard order
    """
    if isinstance(source, CorpusManifest):
        return [Path(p) for p in source.shard_paths]
    if isinstance(source, (list, tuple)):
        paths = []
        for item in source:
            paths.extend(list_shards(item))
        return paths

    path = Path(source)
    if path.is_dir():
        if (path / INCOMPLETE_MARKER).exists():
            raise IncompleteCorpusError(path)
        manifest_path = path / MANIFEST_NAME
        if manifest_path.exists():
            return list_shards(load_manifest(manifest_path))
        return sorted(p for p in path.iterdir()
                      if p.name.endswith(".jsonl") or p.name.endswith(".jsonl.gz"))
    if path.name == MANIFEST_NAME or path.suffix == ".json":
        return list_shards(load_manifest(path))
    return [path]


def load_manifest(path):
    path = Path(path)
    if (path.parent / INCOMPLETE_MARKER).exists():
        raise IncompleteCorpusError(path.parent)
    with open(path, encoding="utf-8") as f:
        manifest = CorpusManifest.from_dict(json.load(f))
    # shard paths are stored relative to the manifest
    manifest.shard_paths = [str(path.parent / p) if not os.path.isabs(p) else p
                            for p in manifest.shard_paths]
    return manifest


def _parse_record(line, path, line_number, shard_index, record_index, tokenizer_mode):
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise CorpusFormatError(path, line_number, f"malformed JSON ({e.msg})") from e
    if not isinstance(record, dict):
        raise CorpusFormatError(path, line_number, "record is not a JSON object")
    text = record.get("text")
    if not isinstance(text, str):
        raise CorpusFormatError(path, line_number, "missing text field")

    try:
        token_count = count_tokens(text, tokenizer_mode, record.get("token_count"))
    except CurationError as e:
        raise CorpusFormatError(path, line_number, str(e)) from e

    score = record.get("score")
    if score is not None and not isinstance(score, (int, float)):
        raise CorpusFormatError(path, line_number, f"score is not a number: {score!r}")
    dup_count = record.get("dup_count")
    if dup_count is not None and (not isinstance(dup_count, int) or dup_count < 1):
        raise CorpusFormatError(path, line_number, f"dup_count must be a positive integer: {dup_count!r}")

    doc_id = record.get("id")
    if doc_id is None:
        doc_id = document_id(text, shard_index, record_index)

    return Document(
        id=str(doc_id),
        text=text,
        token_count=token_count,
        quality_score=float(score) if score is not None else None,
        duplicate_count=dup_count,
        shard_index=shard_index,
    )


def read_shard(path, shard_index, tokenizer_mode="whitespace", strict=True, stats=None):
    """Yield the documents of one shard in record order."""
    record_index = 0
    with _open_text(path) as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                doc = _parse_record(line, path, line_number, shard_index, record_index, tokenizer_mode)
            except CorpusFormatError as e:
                if strict:
                    raise
                logger.warning("Skipping %s", e)
                if stats is not None:
                    stats.skipped += 1
                continue
            record_index += 1
            yield doc
    if stats is not None:
        stats.shard_doc_counts.append(record_index)
        stats.documents += record_index


def read_corpus(source, tokenizer_mode="whitespace", strict=True, stats=None):
    """
    Stream documents in shard order, then record order.

    Args:
        source: Manifest, manifest path, directory, shard path or list of paths
        tokenizer_mode: How token_count is derived when the record has none
        strict: Raise on a malformed line (True) or skip it and count it (False)
        stats: Optional ReadStats filled while reading

    Returns:
        Iterator of Document; never holds more than one record in memory
    """
    if tokenizer_mode not in TOKENIZER_MODES:
        raise CurationError(f"Unknown tokenizer mode: {tokenizer_mode}")
    for shard_index, path in enumerate(list_shards(source)):
        logger.debug("Reading shard %d: %s", shard_index, path)
        yield from read_shard(path, shard_index, tokenizer_mode, strict, stats)


def shard_name(index, compress=False):
    return f"shard_{index:05d}.jsonl" + (".gz" if compress else "")


def write_corpus(documents, out_dir, max_docs_per_shard=100_000, compress=False,
                 tokenizer_mode="whitespace"):
    """
    Write documents as numbered shards plus manifest.json.

    A `_INCOMPLETE` marker sits in out_dir while writing and is removed only
    after the manifest is in place. Any previous manifest is removed first;
    readers refuse a directory that still carries the marker.

    Args:
        documents: Iterable of Document
        out_dir: Output directory (created if needed)
        max_docs_per_shard: Records per shard, at least 1
        compress: gzip each shard
        tokenizer_mode: Recorded in the manifest

    Returns:
        CorpusManifest whose shard paths point into out_dir
    """
    if max_docs_per_shard < 1:
        raise CurationError("max_docs_per_shard must be >= 1")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    marker = out_dir / INCOMPLETE_MARKER
    marker.write_text("write_corpus in progress\n", encoding="utf-8")
    (out_dir / MANIFEST_NAME).unlink(missing_ok=True)

    manifest = CorpusManifest(tokenizer_mode=tokenizer_mode, has_scores=True, has_dup_counts=True)
    handle = None
    in_shard = 0
    try:
        for doc in documents:
            if handle is None or in_shard >= max_docs_per_shard:
                if handle is not None:
                    handle.close()
                name = shard_name(len(manifest.shard_paths), compress)
                manifest.shard_paths.append(name)
                manifest.shard_doc_counts.append(0)
                handle = _open_text(out_dir / name, "wt")
                in_shard = 0
            handle.write(json.dumps(doc.to_record(), ensure_ascii=False) + "\n")
            in_shard += 1
            manifest.shard_doc_counts[-1] += 1
            manifest.doc_count += 1
            manifest.token_count += doc.token_count
            manifest.has_scores &= doc.quality_score is not None
            manifest.has_dup_counts &= doc.duplicate_count is not None
    finally:
        if handle is not None:
            handle.close()

    if manifest.doc_count == 0:
        manifest.has_scores = False
        manifest.has_dup_counts = False

    with open(out_dir / MANIFEST_NAME, "w", encoding="utf-8") as f:
        json.dump(manifest.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    marker.unlink()
    logger.info("Wrote %d documents (%d tokens) to %d shards in %s",
                manifest.doc_count, manifest.token_count, len(manifest.shard_paths), out_dir)
    manifest.shard_paths = [str(out_dir / name) for name in manifest.shard_paths]
    return manifest


def recount_manifest(source, tokenizer_mode="whitespace"):
    """Recount a corpus from its shards, independent of any stored manifest."""
    manifest = CorpusManifest(tokenizer_mode=tokenizer_mode, has_scores=True, has_dup_counts=True)
    for shard_index, path in enumerate(list_shards(source)):
        manifest.shard_paths.append(str(path))
        manifest.shard_doc_counts.append(0)
        for doc in read_shard(path, shard_index, tokenizer_mode):
            manifest.shard_doc_counts[-1] += 1
            manifest.doc_count += 1
            manifest.token_count += doc.token_count
            manifest.has_scores &= doc.quality_score is not None
            manifest.has_dup_counts &= doc.duplicate_count is not None
    if manifest.doc_count == 0:
        manifest.has_scores = False
        manifest.has_dup_counts = False
    return manifest


def load_score_sidecar(path):
    """
    Load a JSONL sidecar of {"id": ..., "score": ...} rows.

    Raises ScoreJoinError on a repeated id.
    """
    scores = {}
    with _open_text(path) as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                doc_id, score = str(row["id"]), float(row["score"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise CorpusFormatError(path, line_number, "sidecar row needs id and numeric score") from e
            if doc_id in scores:
                raise ScoreJoinError(f"duplicate id in score sidecar: {doc_id}")
            scores[doc_id] = score
    return scores


def attach_scores(documents, sidecar, require_all=True):
    """
    Join quality scores onto documents by id.

    Args:
        documents: Iterable of Document
        sidecar: Mapping id -> score, list of (id, score) pairs, or sidecar path
        require_all: Error on a document without a score; otherwise it gets
                     MISSING_SCORE and ranks last

    Returns:
        Iterator of Document with quality_score set
    """
    if isinstance(sidecar, (str, Path)):
        scores = load_score_sidecar(sidecar)
    elif isinstance(sidecar, Mapping):
        scores = dict(sidecar)
    else:
        scores = {}
        for doc_id, score in sidecar:
            if doc_id in scores:
                raise ScoreJoinError(f"duplicate id in score sidecar: {doc_id}")
            scores[doc_id] = float(score)

    missing = 0
    for doc in documents:
        score = scores.get(doc.id)
        if score is None:
            if require_all:
                raise ScoreJoinError(f"no score for document {doc.id}")
            missing += 1
            score = MISSING_SCORE
        yield replace(doc, quality_score=score)
    if missing:
        logger.warning("%d documents had no score and will rank last", missing)


def attach_duplicate_counts(documents, table):
    """Set duplicate_count from a DuplicateClusterTable (cluster size)."""
    for doc in documents:
        yield replace(doc, duplicate_count=table.count_of(doc.id))



if __name__ == "__main__":
    import sys

    if len(sys.argv) < 2:
        print("Usage: python corpus_io.py <corpus_dir_or_shard> [tokenizer_mode]")
        print("\nRecounts documents, tokens and shards straight from the shard files.")
        sys.exit(1)

    manifest = recount_manifest(sys.argv[1], sys.argv[2] if len(sys.argv) > 2 else "whitespace")
    print(f"Shards:     {len(manifest.shard_paths)}")
    print(f"Documents:  {manifest.doc_count:,}")
    print(f"Tokens:     {manifest.token_count:,}")
    print(f"Per shard:  {manifest.shard_doc_counts}")
    print(f"Scored:     {manifest.has_scores}")
    print(f"Dup counts: {manifest.has_dup_counts}")
