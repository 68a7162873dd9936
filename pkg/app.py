"""
Corpus Curation Dashboard - Streamlit Web Application
Plans token budgets, profiles duplication in uploaded shards and previews
count-manipulation strategies
"""

import shutil
import tempfile
from io import BytesIO
from pathlib import Path
import zipfile

import streamlit as st

# Import our custom modules
from budget_planner import DEFAULT_RATIO, DEFAULT_WEIGHT_DECAY, allocation_report, weight_decay
from corpus_io import read_corpus
from count_manipulation import (build_count_function, count_steps, expected_output, instances_from_clusters,
                                max_goal_docs, metric_ranks, order_unique)
from minhash_dedup import LshConfig, StreamingClusterer, compute_band_keys
from stats_report import StatsBundle, duplication_profile, emit_report, growth_curve_from_band_keys, score_distribution


# ============================================================================
# STREAMLIT APP
# ============================================================================

# Page config
st.set_page_config(
    page_title="Corpus Curation",
    page_icon="🧹",
    layout="wide"
)

# Initialize session state
if 'plan' not in st.session_state:
    st.session_state.plan = None
if 'temp_shards' not in st.session_state:
    st.session_state.temp_shards = None
if 'documents' not in st.session_state:
    st.session_state.documents = []
if 'table' not in st.session_state:
    st.session_state.table = None
if 'bundle' not in st.session_state:
    st.session_state.bundle = None

# Header
st.title("🧹 Corpus Curation")
st.markdown("Plan repetition budgets, measure duplication and preview document count strategies")
st.markdown("---")

# === TAB SETUP ===
tab1, tab2, tab3 = st.tabs([
    "1️⃣ Plan",
    "2️⃣ Corpus",
    "3️⃣ Manipulate"
])

# ============================================================================
# TAB 1: PLAN
# ============================================================================
with tab1:
    st.header("Token Budget Planner")
    st.markdown("Epochs, tokens per parameter and weight decay for a model size and token pool")

    col1, col2, col3 = st.columns(3)
    with col1:
        params = st.number_input("Model parameters", min_value=1.0, value=7e9, step=1e8, format="%.4g", key='params')
    with col2:
        unique_tokens = st.number_input("Unique tokens", min_value=1.0, value=69e9, step=1e9, format="%.4g",
                                        key='unique_tokens')
    with col3:
        total_tokens = st.number_input("Total tokens", min_value=1.0, value=138e9, step=1e9, format="%.4g",
                                       key='total_tokens')

    with st.popover("Settings"):
        base_wd = st.number_input("Base weight decay", min_value=1e-6, value=DEFAULT_WEIGHT_DECAY, format="%.4f",
                                  key='base_wd')
        ratio = st.number_input("Tokens per parameter (Chinchilla)", min_value=0.1, value=DEFAULT_RATIO, key='ratio')
        wd_grid = st.checkbox("Snap weight decay to 1x / 2x / 3x", value=False, key='wd_grid')

    if st.button("Plan", key='plan_btn'):
        try:
            report = allocation_report(int(params), int(unique_tokens), int(total_tokens), base_wd, ratio, wd_grid)
            st.session_state.plan = report.to_dict()
        except ValueError as e:
            st.session_state.plan = None
            st.error(f"Error planning: {str(e)}")

    if st.session_state.plan:
        plan = st.session_state.plan
        m1, m2, m3, m4 = st.columns(4)
        m1.metric("Epochs", f"{plan['epochs']:.2f}", help=f"{plan['full_passes']} passes over the pool")
        m2.metric("Tokens / param", f"{plan['tokens_per_param']:.1f}")
        m3.metric("Chinchilla multiplier", f"{plan['chinchilla_multiplier']:.2f}x")
        m4.metric("Weight decay", f"{plan['recommended_weight_decay']:.4f}")

        # weight decay for a few repeat counts, same base
        st.subheader("Weight decay by repeats")
        st.line_chart({
            "sqrt rule": [weight_decay(plan['base_weight_decay'], r) for r in range(1, 11)],
            "grid": [weight_decay(plan['base_weight_decay'], r, grid=True) for r in range(1, 11)],
        })
        with st.expander("Full plan"):
            st.json(plan)

# ============================================================================
# TAB 2: CORPUS
# ============================================================================
with tab2:
    st.header("Duplication Profile")
    st.markdown("Upload JSONL shards (one document per line, field `text`, optional `score`)")

    with st.popover("Settings"):
        bands = st.number_input("Bands", min_value=1, max_value=64, value=14, key='bands')
        rows = st.number_input("Rows per band", min_value=1, max_value=32, value=9, key='rows')
        ngram = st.number_input("Shingle size (words)", min_value=1, max_value=20, value=5, key='ngram')
        seed = st.number_input("Seed", min_value=0, value=0, step=1, key='seed')
        growth_steps = st.number_input("Growth curve points", min_value=0, value=0, step=1, key='growth_steps',
                                       help="0 disables the curve; needs at least as many shards as points")

    shard_files = st.file_uploader(
        "Upload shards (.jsonl)",
        type=['jsonl'],
        accept_multiple_files=True,
        key='shards',
        help="Drag and drop files or click Browse files"
    )

    if st.button("Profile Corpus", key='profile_btn'):
        if not shard_files:
            st.error("Please upload at least one shard first")
        else:
            try:
                with st.spinner("Clustering duplicates..."):
                    if st.session_state.temp_shards:
                        shutil.rmtree(st.session_state.temp_shards, ignore_errors=True)
                    st.session_state.temp_shards = tempfile.mkdtemp(prefix="curation_shards_")

                    # Save uploads in upload order as shard_00000.jsonl, ...
                    paths = []
                    for idx, shard_file in enumerate(shard_files):
                        path = Path(st.session_state.temp_shards) / f"shard_{idx:05d}.jsonl"
                        path.write_bytes(shard_file.getvalue())
                        paths.append(path)

                    config = LshConfig(int(ngram), int(bands), int(rows), int(seed))
                    progress_bar = st.progress(0)
                    status_text = st.empty()
                    keyed = compute_band_keys(
                        paths, config,
                        progress_callback=lambda p, s: (progress_bar.progress(p), status_text.text(s))
                    )

                    bundle = StatsBundle()
                    if growth_steps:
                        bundle.growth, table = growth_curve_from_band_keys(keyed, int(growth_steps), num_shards=len(paths))
                    else:
                        clusterer = StreamingClusterer()
                        for shard_keys in keyed:
                            for entry in shard_keys:
                                clusterer.add_band_keys(entry)
                        table = clusterer.table()

                    documents = list(read_corpus(paths))
                    bundle.profile = duplication_profile(table)
                    if documents and all(doc.quality_score is not None for doc in documents):
                        bundle.score_hist = score_distribution(documents)

                    st.session_state.documents = documents
                    st.session_state.table = table
                    st.session_state.bundle = bundle

                    progress_bar.progress(100)
                    status_text.text("Complete!")
                    st.success(f"Clustered {table.num_docs} documents into {table.num_clusters} clusters")
            except ValueError as e:
                st.error(f"Error profiling corpus: {str(e)}")

    if st.session_state.bundle:
        bundle = st.session_state.bundle
        st.metric("Dedup removal rate", f"{bundle.profile.removal_rate:.1%}")

        st.subheader("Cluster sizes")
        st.bar_chart({str(size): count for size, count in bundle.profile.histogram.items()})

        if bundle.growth:
            st.subheader("Removal rate as the pool grows")
            st.line_chart({"removal rate": [point.removal_rate for point in bundle.growth]})

        if bundle.score_hist:
            st.subheader("Quality scores")
            hist = bundle.score_hist
            st.bar_chart({f"{left:.3g}": count for left, count in zip(hist.edges, hist.counts)})

        # Report files as one ZIP
        report_dir = tempfile.mkdtemp(prefix="curation_report_")
        zip_buffer = BytesIO()
        with zipfile.ZipFile(zip_buffer, 'w', zipfile.ZIP_DEFLATED) as zip_file:
            for path in emit_report(bundle, report_dir):
                zip_file.write(path, Path(path).name)
        shutil.rmtree(report_dir, ignore_errors=True)
        zip_buffer.seek(0)

        st.download_button(
            label="📥 Download Report (CSV + JSON)",
            data=zip_buffer,
            file_name="duplication_report.zip",
            mime="application/zip",
            key='download_report_zip'
        )

# ============================================================================
# TAB 3: MANIPULATE
# ============================================================================
with tab3:
    st.header("Count Manipulation Preview")
    st.markdown("Rank unique documents and see how many copies each bucket gets")

    col1, col2, col3 = st.columns(3)
    with col1:
        strategy = st.selectbox(
            "Count function",
            ["linear_up_to_k", "greedy_k"],
            format_func=lambda x: {"linear_up_to_k": "Linear up to k", "greedy_k": "Greedy k"}[x],
            key='strategy'
        )
    with col2:
        max_copies = st.number_input("Max copies (k)", min_value=1, max_value=100, value=4, key='max_copies')
    with col3:
        metric = st.selectbox("Ranking metric", ["ensemble", "score", "dup_count"], key='metric')

    if not st.session_state.documents:
        st.info("Profile a corpus first (Tab 2)")
    else:
        try:
            instances, unique_docs = instances_from_clusters(st.session_state.documents, st.session_state.table)
            values = metric_ranks(unique_docs, metric)
            ordering = order_unique(values)
            by_id = {doc.id: doc for doc in unique_docs}
            ordered = [by_id[doc_id] for doc_id in ordering]

            largest = max_goal_docs(count_steps(strategy, int(max_copies)), len(unique_docs))
            if largest > 1:
                goal_docs = st.slider("Goal documents", min_value=1, max_value=largest,
                                      value=max(largest // 2, 1), key='goal_docs')
            else:
                goal_docs = 1
            count_fn = build_count_function(strategy, int(max_copies), goal_docs, ordering)
            docs, tokens = expected_output(count_fn, ordered)

            m1, m2, m3 = st.columns(3)
            m1.metric("Unique documents", len(unique_docs))
            m2.metric("Expected documents", docs)
            m3.metric("Expected tokens", tokens)

            st.subheader("Buckets")
            st.dataframe({
                "copies": list(count_fn.steps),
                "unique documents": list(count_fn.bucket_sizes),
                "last rank": list(count_fn.cutoffs),
            })
        except ValueError as e:
            st.error(f"Error building count function: {str(e)}")
