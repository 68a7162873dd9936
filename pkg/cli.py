"""
Corpus curation command line
Subcommands chain through the common corpus format:

    ingest -> dedup -> stats / sample / manipulate,   plus plan and verify

Every data-producing subcommand writes into --output DIR:
    effective_config.json   resolved flags (runtime-only knobs excluded)
    summary.json            command, versions, counts, artifact list
and its own artifacts (corpus/, clusters.jsonl, band_cache/, report files, epochs.json).

Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np
from tqdm import tqdm

from budget_planner import (DEFAULT_RATIO, DEFAULT_WEIGHT_DECAY, allocation_report, compare_repetition,
                            tokens_for_multiplier)
from corpus_io import (INCOMPLETE_MARKER, MANIFEST_NAME, TOKENIZER_MODES, CurationError, ReadStats,
                       attach_duplicate_counts, attach_scores, list_shards, load_manifest, read_corpus,
                       recount_manifest, write_corpus)
from count_manipulation import (COUNT_KINDS, LEVELS, METRICS, build_count_function, expected_output,
                                fit_goal_docs, instances_from_clusters, metric_ranks, order_unique,
                                sample_count_manipulation, thresholds)
from minhash_dedup import (CLUSTER_MODES, SHORT_DOC_POLICIES, LshConfig, StreamingClusterer, compute_band_keys,
                           exact_cluster, read_cluster_table, write_band_cache, write_cluster_table)
from sampling import SAMPLING_MODES, WEIGHTINGS, SamplingSpec, Target, epoch_stream, run_sampling, write_epoch_index
from stats_report import (OUT_OF_RANGE, StatsBundle, default_bin_edges, dup_by_score, duplication_growth_curve,
                          duplication_profile, emit_report, growth_curve_from_band_keys, score_distribution,
                          unique_score_distribution)

__version__ = "0.1.0"

logger = logging.getLogger(__name__)

CONFIG_NAME = "effective_config.json"
SUMMARY_NAME = "summary.json"
CLUSTERS_NAME = "clusters.jsonl"
EPOCHS_NAME = "epochs.json"
COUNT_FUNCTION_NAME = "count_function.json"

# runtime knobs that must not change any output byte
RUNTIME_KEYS = {"workers", "log_level", "config", "output", "func"}

STRATEGY_ALIASES = {"greedy": "greedy_k", "linear": "linear_up_to_k", "custom": "custom_steps"}


class UsageError(Exception):
    pass


class CurationArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _count(text):
    """Integer flag that also accepts scientific notation (12.6e9)."""
    try:
        return int(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text}")


# --- argument parsing ------------------------------------------------------

def _common_parent():
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--seed", type=int, default=0, help="Seed for signatures and sampling (default: 0)")
    parent.add_argument("--workers", type=int, default=1, help="Worker processes (results do not depend on it)")
    parent.add_argument("--config", help="JSON file of flag defaults; explicit flags override")
    parent.add_argument("--output", help="Run directory for all outputs")
    parent.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    policy = parent.add_mutually_exclusive_group()
    policy.add_argument("--strict", dest="strict", action="store_true", default=True,
                        help="Fail on malformed records and missing metrics (default)")
    policy.add_argument("--lenient", dest="strict", action="store_false",
                        help="Skip malformed records; missing metrics rank last")
    return parent


def _input_parent():
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--input", nargs="+", help="Corpus directory, manifest or shard paths")
    parent.add_argument("--tokenizer", default="whitespace", choices=TOKENIZER_MODES)
    return parent


def _corpus_output_parent():
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--max-docs-per-shard", type=int, default=100_000)
    parent.add_argument("--compress", action="store_true", help="gzip output shards")
    return parent


def _lsh_parent():
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--clusters", help="Existing clusters.jsonl; computed from the input when omitted")
    parent.add_argument("--kind", default="fuzzy", choices=["fuzzy", "exact"])
    parent.add_argument("--mode", default="global", choices=CLUSTER_MODES)
    parent.add_argument("--ngram", type=int, default=5)
    parent.add_argument("--bands", type=int, default=14)
    parent.add_argument("--rows", type=int, default=9)
    parent.add_argument("--short-docs", default="exact", choices=SHORT_DOC_POLICIES)
    return parent


def build_parser():
    """Return (parser, {subcommand: subparser})."""
    common = _common_parent()
    inputs = _input_parent()
    corpus_out = _corpus_output_parent()
    lsh = _lsh_parent()

    parser = CurationArgumentParser(prog="curate", description="Deduplicate, sample and reweight text corpora")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    parsers = {}

    p = sub.add_parser("ingest", parents=[common, inputs, corpus_out], help="Normalize shards, join scores")
    p.add_argument("--scores", help="JSONL sidecar of {\"id\", \"score\"}")
    p.add_argument("--allow-missing-scores", action="store_true", help="Unscored documents rank last")
    p.set_defaults(func=cmd_ingest)
    parsers["ingest"] = p

    p = sub.add_parser("dedup", parents=[common, inputs, corpus_out, lsh], help="Cluster duplicates")
    p.add_argument("--cache-signatures", action="store_true", help="Write per-shard band keys to band_cache/")
    p.set_defaults(func=cmd_dedup)
    parsers["dedup"] = p

    p = sub.add_parser("stats", parents=[common, inputs, lsh], help="Duplication and score reports")
    p.add_argument("--profile", action="store_true", help="Cluster-size histogram")
    p.add_argument("--growth-steps", type=int,
                   help="Removal-rate curve with N points (2 <= N <= shard count; points fall on shard boundaries, "
                        "so split a single-shard corpus with ingest --max-docs-per-shard first)")
    p.add_argument("--shuffle-shards", type=int, help="Visit shards in a seeded random order for the curve")
    p.add_argument("--score-bins", type=int, help="Score histogram with N equal bins")
    p.add_argument("--score-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--out-of-range", default="clamp", choices=OUT_OF_RANGE)
    p.add_argument("--unique-scores", action="store_true", help="Score histogram of cluster representatives")
    p.add_argument("--dup-by-score", action="store_true", help="Mean duplicate count per score bin")
    p.set_defaults(func=cmd_stats)
    parsers["stats"] = p

    p = sub.add_parser("sample", parents=[common, inputs, corpus_out, lsh], help="Subsample a corpus")
    p.add_argument("--strategy", default="uniform", choices=SAMPLING_MODES)
    p.add_argument("--doc-count", type=_count)
    p.add_argument("--token-budget", type=_count)
    p.add_argument("--fraction", type=float)
    p.add_argument("--floor", type=int, default=1)
    p.add_argument("--ceil", type=int)
    p.add_argument("--weighting", default="uniform", choices=WEIGHTINGS)
    p.add_argument("--total-tokens", type=_count, help="Repeat the sample in shuffled epochs up to N tokens")
    p.set_defaults(func=cmd_sample)
    parsers["sample"] = p

    p = sub.add_parser("manipulate", parents=[common, inputs, corpus_out, lsh], help="Rank-based copy counts")
    p.add_argument("--strategy", default="linear",
                   choices=sorted(STRATEGY_ALIASES) + list(COUNT_KINDS))
    p.add_argument("--max-copies", type=int, default=1)
    p.add_argument("--steps", type=int, nargs="+", help="Copies per bucket for custom steps, best first")
    p.add_argument("--goal-docs", type=_count)
    p.add_argument("--token-budget", type=_count)
    p.add_argument("--metric", default="ensemble", choices=METRICS)
    p.add_argument("--level", default="instance", choices=LEVELS)
    p.set_defaults(func=cmd_manipulate)
    parsers["manipulate"] = p

    p = sub.add_parser("plan", parents=[common], help="Epochs, tokens per parameter, weight decay")
    p.add_argument("--params", type=_count)
    p.add_argument("--unique-tokens", type=_count)
    p.add_argument("--total-tokens", type=_count)
    p.add_argument("--multiplier", type=float, help="Total tokens as a multiple of the Chinchilla count")
    p.add_argument("--base-wd", type=float, default=DEFAULT_WEIGHT_DECAY)
    p.add_argument("--ratio", type=float, default=DEFAULT_RATIO)
    p.add_argument("--wd-grid", action="store_true", help="Snap the weight decay multiplier to 1, 2 or 3")
    p.add_argument("--superset-factor", type=float, help="Also plan one pass over a pool N times larger")
    p.set_defaults(func=cmd_plan)
    parsers["plan"] = p

    p = sub.add_parser("verify", parents=[common], help="Re-check a run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_verify)
    parsers["verify"] = p

    return parser, parsers


def load_config(path):
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise CurationError(f"config file {path} must hold a JSON object")
    return {key.replace("-", "_"): value for key, value in data.items()}


def parse_args(argv=None):
    parser, parsers = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        defaults = load_config(args.config)
        unknown = sorted(set(defaults) - set(vars(args)) | ({"command", "func"} & set(defaults)))
        if unknown:
            raise CurationError(f"unknown keys in config file {args.config}: {', '.join(unknown)}")
        parsers[args.command].set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


# --- run directory ---------------------------------------------------------

def _quiet(args):
    return logging.getLevelName(args.log_level) > logging.INFO


def _progress(iterable, args, **kwargs):
    return tqdm(iterable, disable=_quiet(args), **kwargs)


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"{args.command} needs --{name.replace('_', '-')}")


def _run_dir(args):
    _require(args, "output")
    run_dir = Path(args.output)
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def effective_config(args):
    return {key: value for key, value in sorted(vars(args).items()) if key not in RUNTIME_KEYS}


def _write_json(path, data):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def finish_run(run_dir, args, counts):
    """Write effective_config.json and summary.json next to the run's artifacts."""
    _write_json(run_dir / CONFIG_NAME, effective_config(args))
    artifacts = sorted(str(p.relative_to(run_dir)) for p in run_dir.rglob("*")
                       if p.is_file() and p.name not in (CONFIG_NAME, SUMMARY_NAME))
    _write_json(run_dir / SUMMARY_NAME, {
        "command": args.command,
        "versions": {"curate": __version__, "python": platform.python_version(), "numpy": np.__version__},
        "counts": counts,
        "artifacts": artifacts,
    })
    logger.info("Run written to %s", run_dir)


def _write_output_corpus(documents, run_dir, args):
    return write_corpus(documents, run_dir / "corpus", args.max_docs_per_shard, args.compress, args.tokenizer)


def _read_documents(args, stats=None):
    _require(args, "input")
    return read_corpus(args.input, args.tokenizer, args.strict, stats)


def _lsh_config(args):
    return LshConfig(args.ngram, args.bands, args.rows, args.seed, args.short_docs)


def _fuzzy_table(args, cache_dir=None):
    config = _lsh_config(args)
    shards = list_shards(args.input)
    clusterer = StreamingClusterer(args.mode, "fuzzy")
    keyed = compute_band_keys(shards, config, args.workers, args.tokenizer, strict=args.strict)
    for index, shard_keys in enumerate(_progress(keyed, args, total=len(shards), desc="Signing shards",
                                                 unit="shard")):
        if cache_dir is not None:
            write_band_cache(cache_dir / f"shard_{index:05d}.npz", config, shard_keys)
        for entry in shard_keys:
            clusterer.add_band_keys(entry)
    logger.info("Fuzzy clustering (%s): %d documents -> %d clusters", args.mode, clusterer.n_docs,
                clusterer.n_clusters)
    return clusterer.table()


def _cluster_table(args, documents=None):
    """Read --clusters, or cluster the input with the run's LSH flags."""
    if args.clusters:
        return read_cluster_table(args.clusters, args.kind)
    _require(args, "input")
    if args.kind == "exact":
        return exact_cluster(documents if documents is not None else _read_documents(args), args.mode)
    return _fuzzy_table(args)


# --- subcommands -----------------------------------------------------------

def cmd_ingest(args):
    run_dir = _run_dir(args)
    stats = ReadStats()
    documents = _read_documents(args, stats)
    if args.scores:
        documents = attach_scores(documents, args.scores, require_all=not args.allow_missing_scores)
    manifest = _write_output_corpus(_progress(documents, args, desc="Ingesting", unit="doc"), run_dir, args)
    finish_run(run_dir, args, {"documents": manifest.doc_count, "tokens": manifest.token_count,
                               "shards": len(manifest.shard_paths), "skipped_lines": stats.skipped})
    return 0


def cmd_dedup(args):
    run_dir = _run_dir(args)
    _require(args, "input")
    if args.kind == "exact":
        table = exact_cluster(_read_documents(args), args.mode)
    else:
        cache_dir = None
        if args.cache_signatures:
            cache_dir = run_dir / "band_cache"
            cache_dir.mkdir(exist_ok=True)
        table = _fuzzy_table(args, cache_dir)

    write_cluster_table(table, run_dir / CLUSTERS_NAME)
    profile = duplication_profile(table)
    emit_report(StatsBundle(profile=profile), run_dir)
    manifest = _write_output_corpus(attach_duplicate_counts(_read_documents(args), table), run_dir, args)
    finish_run(run_dir, args, {"documents": manifest.doc_count, "tokens": manifest.token_count,
                               "clusters": table.num_clusters, "removal_rate": profile.removal_rate})
    return 0


def cmd_stats(args):
    run_dir = _run_dir(args)
    _require(args, "input")
    bundle = StatsBundle()
    table = None

    if args.growth_steps is not None:
        shards = list_shards(args.input)
        if args.shuffle_shards is not None:
            bundle.growth, table = duplication_growth_curve(shards, args.growth_steps, _lsh_config(args), args.mode,
                                                            args.shuffle_shards, args.tokenizer, args.strict)
        else:
            keyed = compute_band_keys(shards, _lsh_config(args), args.workers, args.tokenizer, strict=args.strict)
            keyed = _progress(keyed, args, total=len(shards), desc="Growth curve", unit="shard")
            bundle.growth, table = growth_curve_from_band_keys(keyed, args.growth_steps, args.mode, len(shards))

    wants_scores = args.score_bins is not None or args.unique_scores or args.dup_by_score
    documents = list(_read_documents(args)) if wants_scores or args.kind == "exact" else None
    if args.profile or args.unique_scores or args.dup_by_score:
        if table is None or args.clusters or args.kind == "exact":
            table = _cluster_table(args, documents)

    bins = args.score_bins or 20
    edges = default_bin_edges(args.score_range, bins) if args.score_range else None
    if args.profile:
        bundle.profile = duplication_profile(table)
    if args.score_bins is not None:
        bundle.score_hist = score_distribution(documents, edges, bins, args.out_of_range, args.strict)
    if args.unique_scores:
        bundle.unique_score_hist = unique_score_distribution(documents, table, edges, bins, args.out_of_range,
                                                             args.strict)
    if args.dup_by_score:
        bundle.dup_by_score = dup_by_score(documents, table, edges, bins, args.strict)

    written = emit_report(bundle, run_dir)
    finish_run(run_dir, args, {"reports": len(written)})
    return 0


def _target(args):
    given = {"doc_count": args.doc_count, "token_budget": args.token_budget, "fraction": args.fraction}
    if all(value is None for value in given.values()):
        return None
    return Target(**given)


def cmd_sample(args):
    run_dir = _run_dir(args)
    spec = SamplingSpec(_target(args), args.seed, args.strategy, args.floor, args.ceil, args.weighting)
    documents = list(_read_documents(args))
    table = None if spec.mode == "uniform" else _cluster_table(args, documents)
    kept = run_sampling(documents, spec, table)
    counts = {"input_documents": len(documents), "sampled_documents": len(kept)}

    if args.total_tokens is not None:
        stream = epoch_stream(kept, args.total_tokens, args.seed)
        write_epoch_index(stream, run_dir / EPOCHS_NAME)
        kept = stream.documents()
        counts["epochs"] = stream.epochs

    manifest = _write_output_corpus(kept, run_dir, args)
    counts.update(documents=manifest.doc_count, tokens=manifest.token_count)
    finish_run(run_dir, args, counts)
    return 0


def cmd_manipulate(args):
    run_dir = _run_dir(args)
    kind = STRATEGY_ALIASES.get(args.strategy, args.strategy)
    if args.goal_docs is None and args.token_budget is None:
        raise UsageError("manipulate needs --goal-docs or --token-budget")

    documents = list(_read_documents(args))
    table = _cluster_table(args, documents)
    instances, unique_docs = instances_from_clusters(documents, table)
    values = metric_ranks(unique_docs, args.metric, args.strict)
    ordering = order_unique(values)
    by_id = {doc.id: doc for doc in unique_docs}
    ordered = [by_id[doc_id] for doc_id in ordering]

    if args.goal_docs is not None:
        count_fn = build_count_function(kind, args.max_copies, args.goal_docs, ordering, args.steps)
    else:
        count_fn = fit_goal_docs(kind, args.max_copies, args.token_budget, ordered, args.steps)
    positions = {doc_id: position for position, doc_id in enumerate(ordering, start=1)}
    output = sample_count_manipulation(
        _progress(instances, args, desc="Resampling", unit="doc"), count_fn, positions, args.seed, args.level)

    expected_docs, expected_tokens = expected_output(count_fn, ordered)
    _write_json(run_dir / COUNT_FUNCTION_NAME, {
        "kind": count_fn.kind,
        "max_copies": count_fn.max_copies,
        "goal_docs": count_fn.goal_docs,
        "steps": list(count_fn.steps),
        "bucket_sizes": list(count_fn.bucket_sizes),
        "rank_thresholds": thresholds(count_fn, ordering, values),
        "expected_docs": expected_docs,
        "expected_tokens": expected_tokens,
    })
    manifest = _write_output_corpus(output, run_dir, args)
    finish_run(run_dir, args, {"unique_documents": len(unique_docs), "documents": manifest.doc_count,
                               "tokens": manifest.token_count, "expected_docs": expected_docs,
                               "expected_tokens": expected_tokens})
    return 0


def cmd_plan(args):
    _require(args, "params", "unique_tokens")
    if args.total_tokens is None and args.multiplier is None:
        raise UsageError("plan needs --total-tokens or --multiplier")
    total = args.total_tokens
    if total is None:
        total = tokens_for_multiplier(args.params, args.multiplier, args.ratio)

    if args.superset_factor:
        plans = compare_repetition(args.params, args.unique_tokens, superset_factor=args.superset_factor,
                                   base_wd=args.base_wd, ratio=args.ratio, total_tokens=total)
        report = {name: allocation.to_dict() for name, allocation in plans.items()}
    else:
        report = allocation_report(args.params, args.unique_tokens, total, args.base_wd, args.ratio,
                                   args.wd_grid).to_dict()

    print(json.dumps(report, indent=2, sort_keys=True))
    if args.output:
        run_dir = _run_dir(args)
        _write_json(run_dir / "plan.json", report)
        finish_run(run_dir, args, {"total_tokens": total})
    return 0


# --- verify ----------------------------------------------------------------

def _check(name, ok, detail=""):
    return {"check": name, "ok": bool(ok), "detail": detail}


def _check_manifest(corpus_dir):
    stored = load_manifest(corpus_dir / MANIFEST_NAME)
    try:
        recount = recount_manifest(stored, stored.tokenizer_mode)
    except (OSError, CurationError) as e:
        return _check("manifest", False, f"recount failed: {e}")
    mismatched = [field for field in ("doc_count", "token_count", "shard_doc_counts")
                  if getattr(stored, field) != getattr(recount, field)]
    return _check("manifest", not mismatched,
                  f"mismatched {', '.join(mismatched)}" if mismatched else f"{recount.doc_count} documents")


def _check_partition(path, corpus_dir):
    groups = defaultdict(list)
    counts = {}
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                doc_id, cluster_id, count = str(row["id"]), str(row["cluster"]), int(row["count"])
            except (ValueError, KeyError, TypeError):
                return _check("partition", False, f"line {line_number} is not an id/cluster/count row")
            groups[cluster_id].append(doc_id)
            counts[doc_id] = count

    rows = sum(len(members) for members in groups.values())
    if len(counts) != rows:
        return _check("partition", False, "a document appears in more than one row")
    for cluster_id, members in groups.items():
        if cluster_id != min(members):
            return _check("partition", False, f"cluster {cluster_id} is not the minimum member id")
        if any(counts[doc_id] != len(members) for doc_id in members):
            return _check("partition", False, f"count field of cluster {cluster_id} differs from its size")

    # the table must cover the run's corpus exactly
    if not (corpus_dir / MANIFEST_NAME).exists():
        return _check("partition", False, "no corpus to check cluster coverage against")
    try:
        manifest = load_manifest(corpus_dir / MANIFEST_NAME)
        corpus_ids = {doc.id for doc in read_corpus(manifest)}
    except (OSError, CurationError) as e:
        return _check("partition", False, f"reading corpus failed: {e}")
    if rows != manifest.doc_count:
        return _check("partition", False, f"cluster sizes sum to {rows}, corpus has {manifest.doc_count} documents")
    if corpus_ids != set(counts):
        unknown = len(set(counts) - corpus_ids)
        return _check("partition", False, f"{len(corpus_ids - set(counts))} corpus documents have no cluster row, "
                                          f"{unknown} rows name documents outside the corpus")
    return _check("partition", True, f"{rows} documents in {len(groups)} clusters")


def _check_budget(corpus_dir, budget):
    documents = list(read_corpus(corpus_dir / MANIFEST_NAME))
    realized = sum(doc.token_count for doc in documents)
    largest = max((doc.token_count for doc in documents), default=0)
    ok = realized >= budget and realized - budget < max(largest, 1)
    return _check("budget", ok, f"{realized} tokens for a budget of {budget}")


def _check_epochs(path, corpus_dir):
    with open(path, encoding="utf-8") as f:
        index = json.load(f)
    boundaries = index.get("boundaries", [])
    if not boundaries or any(b <= a for a, b in zip(boundaries, boundaries[1:])):
        return _check("epochs", False, "boundaries are empty or not increasing")
    if boundaries[-1] != index.get("realized_tokens"):
        return _check("epochs", False, "last boundary differs from realized_tokens")
    if (corpus_dir / MANIFEST_NAME).exists():
        if load_manifest(corpus_dir / MANIFEST_NAME).token_count != boundaries[-1]:
            return _check("epochs", False, "output corpus tokens differ from the epoch index")
    return _check("epochs", True, f"{len(boundaries)} epochs, {boundaries[-1]} tokens")


def verify_run(run_dir):
    """
    Re-derive a run directory's invariants.

    Returns:
        List of {"check", "ok", "detail"} dicts; a missing artifact is a failed check
    """
    run_dir = Path(run_dir)
    results = []
    missing = [name for name in (CONFIG_NAME, SUMMARY_NAME) if not (run_dir / name).is_file()]
    if missing:
        return [_check("artifacts", False, f"missing {', '.join(missing)}")]

    with open(run_dir / SUMMARY_NAME, encoding="utf-8") as f:
        summary = json.load(f)
    with open(run_dir / CONFIG_NAME, encoding="utf-8") as f:
        config = json.load(f)
    missing = [name for name in summary.get("artifacts", []) if not (run_dir / name).is_file()]
    results.append(_check("artifacts", not missing,
                          f"missing {', '.join(missing)}" if missing else f"{len(summary.get('artifacts', []))} files"))

    corpus_dir = run_dir / "corpus"
    if (corpus_dir / INCOMPLETE_MARKER).exists():
        results.append(_check("corpus", False, f"{INCOMPLETE_MARKER} marker left by an interrupted write"))
        return results
    if (corpus_dir / MANIFEST_NAME).exists():
        results.append(_check_manifest(corpus_dir))
    if (run_dir / CLUSTERS_NAME).exists():
        results.append(_check_partition(run_dir / CLUSTERS_NAME, corpus_dir))
    if (summary.get("command") == "sample" and config.get("token_budget") is not None
            and config.get("total_tokens") is None):
        try:
            results.append(_check_budget(corpus_dir, config["token_budget"]))
        except (OSError, CurationError) as e:
            results.append(_check("budget", False, str(e)))
    if (run_dir / EPOCHS_NAME).exists():
        results.append(_check_epochs(run_dir / EPOCHS_NAME, corpus_dir))
    return results


def cmd_verify(args):
    results = verify_run(args.run_dir)
    for result in results:
        status = "PASS" if result["ok"] else "FAIL"
        print(f"{status}  {result['check']:<10} {result['detail']}")
    return 0 if all(result["ok"] for result in results) else 2


def main(argv=None):
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1
    except (CurationError, ValueError, OSError) as e:
        # config file problems surface before logging is configured
        print(f"Error: {e}", file=sys.stderr)
        return 3 if isinstance(e, OSError) else 2

    logging.basicConfig(level=args.log_level, format="%(asctime)s - %(levelname)s - %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except (CurationError, ValueError) as e:
        logger.error("%s", e)
        print(f"Error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        logger.error("%s", e)
        print(f"Error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
