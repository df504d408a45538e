"""Command-line driver for the full retrieval pipeline.

Subcommands: ingest, stats, index, retrieve, fuse, evaluate, cumulative,
distort, snr, silhouette, synth, serve. Flags can come from a JSON
config file (--config) with the same keys as the flag names; explicit
flags win. Exit codes: 0 success, 1 validation error, 2 I/O error.
Errors are printed as single-line JSON on stderr. Output files are
written atomically (temp file + rename); every randomized step takes an
explicit seed.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from typing import Sequence

from . import metrics as metrics_mod
from .aggregate import SCHEME_KINDS, WeightingScheme
from .audio import read_wav, write_wav
from .distort import apply_distortion, parse_distortion_spec
from .errors import ValidationError
from .index_io import load_index, save_index
from .ingest import (
    compute_file_stats,
    format_embeddings,
    format_rttm,
    group_segments_by_file,
    parse_rttm,
    read_archive_manifest,
    read_embeddings,
    read_labels,
    read_query_manifest,
)
from .retrieval import (
    RETRIEVAL_MODES,
    FusionSpec,
    RankedList,
    build_index,
    fuse_scores,
    rank_queries,
    rank_scores,
    read_ranked,
    read_scores,
    write_ranked,
    write_scores,
)
from .synthetic import generate_synthetic_archive
from .wada import build_wada_table, g_statistic, wada_snr_estimate

DEFAULT_TOP_R = 10


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors follow the CLI error contract."""

    def error(self, message: str) -> None:  # type: ignore[override]
        print(json.dumps({"error": message, "kind": "usage"}), file=sys.stderr)
        raise SystemExit(1)


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_bytes(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(obj: dict, out: str | None) -> None:
    """Write a JSON result to --out (atomic) or stdout."""
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        _atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _merge_config(args: argparse.Namespace) -> None:
    """Fill unset flags from the JSON config file, if one was given."""
    if getattr(args, "config", None) is None:
        return
    try:
        config = json.loads(_read_text(args.config))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {args.config!r}: invalid JSON ({exc.msg})")
    if not isinstance(config, dict):
        raise ValidationError("config must be a JSON object of flag values")
    known = set(vars(args))
    for key, value in config.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("config", "func"):
            raise ValidationError(f"config {args.config!r}: unknown key {key!r}")
        if getattr(args, dest) is None:
            setattr(args, dest, value)


def _require(args: argparse.Namespace, *names: str) -> None:
    for name in names:
        if getattr(args, name) is None:
            flag = "--" + name.replace("_", "-")
            raise ValidationError(f"missing required flag {flag}")


def _fallback(value, default):
    return default if value is None else value


def _parse_scheme(args: argparse.Namespace) -> WeightingScheme:
    name = _fallback(args.scheme, "linear")
    tau = None if args.tau is None else float(args.tau)
    return WeightingScheme.parse(str(name), tau)


def _parse_ks(value) -> tuple[int, ...]:
    if value is None:
        return metrics_mod.DEFAULT_KS
    if isinstance(value, (list, tuple)):
        items = [int(v) for v in value]
    else:
        items = [int(part) for part in str(value).split(",") if part.strip()]
    if not items or any(k < 1 for k in items):
        raise ValidationError(f"invalid K grid {value!r}")
    return tuple(items)


def _parse_categories(value) -> tuple[str, ...]:
    if value is None:
        return tuple(sorted(metrics_mod.DEFAULT_CATEGORIES))
    if isinstance(value, (list, tuple)):
        return tuple(str(v) for v in value)
    return tuple(part.strip() for part in str(value).split(",") if part.strip())


def _load_corpus_inputs(args: argparse.Namespace):
    _require(args, "rttm", "manifest")
    manifest = read_archive_manifest(_read_text(args.manifest))
    segments = parse_rttm(_read_text(args.rttm))
    unknown = sorted({s.file_id for s in segments} - set(manifest))
    if unknown:
        raise ValidationError(
            f"RTTM references file_ids absent from manifest: {', '.join(unknown[:10])}"
        )
    return manifest, segments


def _cmd_ingest(args: argparse.Namespace) -> None:
    _require(args, "embeddings")
    manifest, segments = _load_corpus_inputs(args)
    by_key = {s.key: s for s in segments}
    corpus = read_embeddings(_read_text(args.embeddings))
    for emb in corpus:
        seg = by_key.get(emb.key)
        if seg is None:
            raise ValidationError(
                f"embedding {emb.segment.file_id}:{emb.segment.segment_index} "
                f"has no matching RTTM segment"
            )
        if seg.speaker_label != emb.segment.speaker_label:
            raise ValidationError(
                f"embedding {emb.segment.file_id}:{emb.segment.segment_index} "
                f"disagrees with RTTM speaker label"
            )
    summary = {
        "files": len(manifest),
        "files_with_speech": len({s.file_id for s in segments}),
        "segments": len(segments),
        "embeddings": len(corpus),
        "model_id": corpus.model_id,
        "dim": corpus.dim,
        "speakers": len({(s.file_id, s.speaker_label) for s in segments}),
    }
    if args.labels is not None:
        labels = read_labels(_read_text(args.labels), manifest_ids=manifest)
        summary["labelled_files"] = sum(
            1 for f in manifest if labels.names_for(f)
        )
    if args.queries is not None:
        queries = read_query_manifest(_read_text(args.queries), manifest_ids=manifest)
        summary["queries"] = len(queries)
    _emit(summary, args.out)


def _cmd_stats(args: argparse.Namespace) -> None:
    manifest, segments = _load_corpus_inputs(args)
    grouped = group_segments_by_file(segments)
    lines = []
    for file_id in sorted(manifest):
        stats = compute_file_stats(file_id, grouped.get(file_id, []), manifest[file_id])
        lines.append(
            json.dumps(
                {
                    "file_id": stats.file_id,
                    "n_segments": stats.n_segments,
                    "n_speakers": stats.n_speakers,
                    "video_duration_s": stats.video_duration_s,
                    "speech_ratio_oplus": stats.speech_ratio_oplus,
                    "speech_ratio_ominus": stats.speech_ratio_ominus,
                },
                separators=(",", ":"),
            )
        )
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        _atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _cmd_index(args: argparse.Namespace) -> None:
    _require(args, "embeddings", "out")
    scheme = _parse_scheme(args)
    corpus = read_embeddings(_read_text(args.embeddings))
    file_ids = None
    if args.manifest is not None:
        file_ids = read_archive_manifest(_read_text(args.manifest))
    keep = bool(_fallback(args.keep_segments, False))
    index = build_index(corpus, scheme, keep_segments=keep, file_ids=file_ids)
    sink = io.BytesIO()
    save_index(index, sink)
    _atomic_write_bytes(args.out, sink.getvalue())
    _emit(
        {
            "out": args.out,
            "files": index.n_files,
            "dim": index.dim,
            "model_id": index.model_id,
            "scheme": str(index.scheme),
            "segments_retained": index.has_segments,
        },
        None,
    )


def _load_index_file(path: str):
    with open(path, "rb") as handle:
        return load_index(handle)


def _cmd_retrieve(args: argparse.Namespace) -> None:
    _require(args, "index", "queries", "out")
    index = _load_index_file(args.index)
    queries = read_query_manifest(
        _read_text(args.queries), manifest_ids=index.file_ids()
    )
    mode = str(_fallback(args.mode, "speaker"))
    top_r = int(_fallback(args.top_r, DEFAULT_TOP_R))
    self_exclude = bool(_fallback(args.self_exclude, True))
    ranked, scores = rank_queries(index, queries, mode, top_r, self_exclude)
    sink = io.StringIO()
    write_ranked([ranked[q.query_id] for q in queries], sink)
    _atomic_write_text(args.out, sink.getvalue())
    if args.scores_out is not None:
        sink = io.StringIO()
        write_scores({q.query_id: scores[q.query_id] for q in queries}, sink)
        _atomic_write_text(args.scores_out, sink.getvalue())


def _cmd_fuse(args: argparse.Namespace) -> None:
    _require(args, "scores_a", "scores_b", "out")
    lam = float(_fallback(args.lam, 0.5))
    top_r = int(_fallback(args.top_r, DEFAULT_TOP_R))
    scores_a = read_scores(_read_text(args.scores_a))
    scores_b = read_scores(_read_text(args.scores_b))
    if set(scores_a) != set(scores_b):
        diff = sorted(set(scores_a) ^ set(scores_b))
        raise ValidationError(
            f"score files disagree on query_ids: {', '.join(diff[:20])}"
        )
    spec = FusionSpec(lam=lam)
    fused: dict[str, dict[str, float]] = {}
    ranked: list[RankedList] = []
    for query_id in scores_a:
        combined = fuse_scores(scores_a[query_id], scores_b[query_id], spec)
        fused[query_id] = combined
        ranked.append(rank_scores(combined, query_id, "fused", top_r))
    sink = io.StringIO()
    write_ranked(ranked, sink)
    _atomic_write_text(args.out, sink.getvalue())
    if args.scores_out is not None:
        sink = io.StringIO()
        write_scores(fused, sink)
        _atomic_write_text(args.scores_out, sink.getvalue())


def _rebuild_with_exclusions(
    ranked: dict[str, RankedList], exclusions: dict[str, frozenset[str]]
) -> dict[str, RankedList]:
    return {
        query_id: RankedList(
            query_id=r.query_id,
            mode=r.mode,
            entries=r.entries,
            excluded=exclusions.get(query_id, frozenset()),
        )
        for query_id, r in ranked.items()
    }


def _cmd_evaluate(args: argparse.Namespace) -> None:
    _require(args, "ranked", "queries", "labels", "manifest")
    manifest = read_archive_manifest(_read_text(args.manifest))
    queries = read_query_manifest(_read_text(args.queries), manifest_ids=manifest)
    labels = read_labels(_read_text(args.labels), manifest_ids=manifest)
    ranked = read_ranked(_read_text(args.ranked))
    self_exclude = bool(_fallback(args.self_exclude, True))
    if self_exclude:
        exclusions = {q.query_id: frozenset({q.file_id}) for q in queries}
        ranked = _rebuild_with_exclusions(ranked, exclusions)
    report = metrics_mod.aggregate(
        queries,
        ranked,
        labels,
        sorted(manifest),
        categories=_parse_categories(args.categories),
        ks=_parse_ks(args.ks),
    )
    _emit(report.to_json_obj(), args.out)
    if bool(_fallback(args.table, False)):
        sys.stdout.write(report.format_table() + "\n")


def _cmd_cumulative(args: argparse.Namespace) -> None:
    _require(args, "report")
    try:
        report = json.loads(_read_text(args.report))
        ks = tuple(int(k) for k in report["ks"])
        per_query = {
            row["query_id"]: {int(k): float(v) for k, v in row["p"].items()}
            for row in report["per_query"]
            if int(row["r"]) > 0
        }
    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
        raise ValidationError(
            f"report {args.report!r} is not an evaluation report"
        ) from None
    points = metrics_mod.cumulative_curve(per_query, ks)
    sink = io.StringIO()
    metrics_mod.write_curve_csv(points, sink)
    if args.out:
        _atomic_write_text(args.out, sink.getvalue())
    else:
        sys.stdout.write(sink.getvalue())


def _cmd_distort(args: argparse.Namespace) -> None:
    _require(args, "in_wav", "out", "spec")
    raw = args.spec.strip()
    if raw.startswith("{"):
        spec_text = raw
        base_dir = os.getcwd()
    else:
        spec_text = _read_text(args.spec)
        base_dir = os.path.dirname(os.path.abspath(args.spec))
    spec = parse_distortion_spec(spec_text)
    signal = read_wav(args.in_wav)
    distorted = apply_distortion(signal, spec, base_dir=base_dir)
    from .audio import wav_bytes

    _atomic_write_bytes(args.out, wav_bytes(distorted, pcm16=True))
    _emit(
        {
            "out": args.out,
            "kind": spec.kind,
            "n_samples": len(distorted),
            "sample_rate_hz": distorted.sample_rate_hz,
        },
        None,
    )


def _cmd_snr(args: argparse.Namespace) -> None:
    _require(args, "in_wav", "seed")
    table = build_wada_table(
        n_trials=int(_fallback(args.table_trials, 24)),
        seed=int(args.seed),
        n_samples=int(_fallback(args.table_samples, 16000)),
    )
    signal = read_wav(args.in_wav)
    estimate = wada_snr_estimate(signal, table)
    _emit(
        {"snr_db": estimate, "g": g_statistic(signal.samples)},
        args.out,
    )


def _cmd_silhouette(args: argparse.Namespace) -> None:
    _require(args, "embeddings")
    import numpy as np

    corpus = read_embeddings(_read_text(args.embeddings))
    by = str(_fallback(args.by, "speaker"))
    if by not in ("speaker", "file"):
        raise ValidationError(f"--by must be 'speaker' or 'file', got {by!r}")
    members = list(corpus)
    if by == "speaker":
        class_labels = [e.segment.speaker_label for e in members]
    else:
        class_labels = [e.segment.file_id for e in members]
    vectors = np.vstack([e.vector for e in members])
    score = metrics_mod.silhouette_cosine(vectors, class_labels)
    _emit(
        {
            "silhouette": score,
            "n_samples": len(members),
            "n_classes": len(set(class_labels)),
            "by": by,
        },
        args.out,
    )


def _cmd_synth(args: argparse.Namespace) -> None:
    _require(args, "speakers", "files", "seed", "out_dir")
    archive = generate_synthetic_archive(
        n_speakers=int(args.speakers),
        n_files=int(args.files),
        dim=int(_fallback(args.dim, 16)),
        noise_sigma=float(_fallback(args.sigma, 0.05)),
        seed=int(args.seed),
    )
    os.makedirs(args.out_dir, exist_ok=True)

    def path(name: str) -> str:
        return os.path.join(args.out_dir, name)

    _atomic_write_text(path("segments.rttm"), format_rttm(archive.segments))
    _atomic_write_text(path("embeddings.jsonl"), format_embeddings(archive.embeddings))
    labels_obj = {
        file_id: sorted(archive.labels.by_file[file_id].values())
        for file_id in sorted(archive.labels.by_file)
    }
    _atomic_write_text(
        path("labels.json"), json.dumps(labels_obj, indent=2, sort_keys=True) + "\n"
    )
    queries_lines = [
        json.dumps(
            {
                "query_id": q.query_id,
                "file_id": q.file_id,
                "person": q.person,
                "category": q.category,
            },
            separators=(",", ":"),
        )
        for q in archive.queries
    ]
    _atomic_write_text(path("queries.jsonl"), "\n".join(queries_lines) + "\n")
    manifest_lines = [
        json.dumps(
            {"file_id": f, "video_duration_s": archive.video_durations[f]},
            separators=(",", ":"),
        )
        for f in sorted(archive.video_durations)
    ]
    _atomic_write_text(path("manifest.jsonl"), "\n".join(manifest_lines) + "\n")
    _emit(
        {
            "out_dir": args.out_dir,
            "files": len(archive.video_durations),
            "speakers": int(args.speakers),
            "segments": len(archive.segments),
            "queries": len(archive.queries),
        },
        None,
    )


def _cmd_serve(args: argparse.Namespace) -> None:
    _require(args, "index")
    import uvicorn

    from .service import create_app

    app = create_app(_load_index_file(args.index))
    uvicorn.run(
        app,
        host=str(_fallback(args.host, "127.0.0.1")),
        port=int(_fallback(args.port, 8000)),
        log_level="warning",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="wrix",
        description=(
            "Speaker retrieval over diarised media archives: ingest RTTM + "
            "embedding JSONL, build an index, rank queries, evaluate, and "
            "stress-test with audio distortions."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.set_defaults(func=func)
        return p

    p = add("ingest", _cmd_ingest, "validate corpus interchange files")
    p.add_argument("--rttm", help="diarisation RTTM file")
    p.add_argument("--embeddings", help="segment-embedding JSONL")
    p.add_argument("--manifest", help="archive manifest JSONL")
    p.add_argument("--labels", help="labels JSON (optional)")
    p.add_argument("--queries", help="query manifest JSONL (optional)")
    p.add_argument("--out", help="summary JSON path (default stdout)")

    p = add("stats", _cmd_stats, "per-file diarisation statistics (JSONL)")
    p.add_argument("--rttm", help="diarisation RTTM file")
    p.add_argument("--manifest", help="archive manifest JSONL")
    p.add_argument("--out", help="stats JSONL path (default stdout)")

    p = add("index", _cmd_index, "build and save an archive index")
    p.add_argument("--embeddings", help="segment-embedding JSONL")
    p.add_argument("--manifest", help="archive manifest JSONL (optional)")
    p.add_argument(
        "--scheme",
        help=f"weighting scheme, one of {', '.join(SCHEME_KINDS)}; "
        f"softmax takes --tau or the form softmax:TAU",
    )
    p.add_argument("--tau", type=float, help="softmax temperature (seconds)")
    p.add_argument(
        "--keep-segments",
        action=argparse.BooleanOptionalAction,
        help="retain raw segments for segment-mode retrieval",
    )
    p.add_argument("--out", help="index output path")

    p = add("retrieve", _cmd_retrieve, "rank the archive for each query")
    p.add_argument("--index", help="index file")
    p.add_argument("--queries", help="query manifest JSONL")
    p.add_argument("--mode", choices=list(RETRIEVAL_MODES), help="retrieval mode")
    p.add_argument("--top-r", type=int, help="entries per ranked list (default 10)")
    p.add_argument(
        "--self-exclude",
        action=argparse.BooleanOptionalAction,
        help="exclude each query's own file (default on)",
    )
    p.add_argument("--out", help="ranked JSONL output path")
    p.add_argument("--scores-out", help="full score-map JSONL (for fusion)")

    p = add("fuse", _cmd_fuse, "interpolate two systems' score files")
    p.add_argument("--scores-a", help="score JSONL from system A")
    p.add_argument("--scores-b", help="score JSONL from system B")
    p.add_argument("--lam", "--lambda", dest="lam", type=float, help="weight on A")
    p.add_argument("--top-r", type=int, help="entries per ranked list (default 10)")
    p.add_argument("--out", help="ranked JSONL output path")
    p.add_argument("--scores-out", help="fused score-map JSONL")

    p = add("evaluate", _cmd_evaluate, "score ranked lists against labels")
    p.add_argument("--ranked", help="ranked JSONL from retrieve/fuse")
    p.add_argument("--queries", help="query manifest JSONL")
    p.add_argument("--labels", help="labels JSON")
    p.add_argument("--manifest", help="archive manifest JSONL")
    p.add_argument("--categories", help="comma-separated filter (default AVP,AoP)")
    p.add_argument("--ks", help="comma-separated K grid (default 1,3,5,10)")
    p.add_argument(
        "--self-exclude",
        action=argparse.BooleanOptionalAction,
        help="treat each query's own file as excluded (default on)",
    )
    p.add_argument(
        "--table",
        action=argparse.BooleanOptionalAction,
        help="also print the plain-text metric table",
    )
    p.add_argument("--out", help="report JSON path (default stdout)")

    p = add("cumulative", _cmd_cumulative, "coverage curve from a report")
    p.add_argument("--report", help="evaluation report JSON")
    p.add_argument("--out", help="curve CSV path (default stdout)")

    p = add("distort", _cmd_distort, "apply a distortion spec to a WAV")
    p.add_argument("--in", dest="in_wav", help="input WAV")
    p.add_argument("--spec", help="distortion spec JSON (path or inline object)")
    p.add_argument("--out", help="output WAV path")

    p = add("snr", _cmd_snr, "non-intrusive SNR estimate for a WAV")
    p.add_argument("--in", dest="in_wav", help="input WAV")
    p.add_argument("--seed", type=int, help="seed for the Monte Carlo table")
    p.add_argument("--table-trials", type=int, help="trials per grid point")
    p.add_argument("--table-samples", type=int, help="samples per trial")
    p.add_argument("--out", help="result JSON path (default stdout)")

    p = add("silhouette", _cmd_silhouette, "clustering quality of embeddings")
    p.add_argument("--embeddings", help="segment-embedding JSONL")
    p.add_argument("--by", choices=["speaker", "file"], help="class labels")
    p.add_argument("--out", help="result JSON path (default stdout)")

    p = add("synth", _cmd_synth, "generate a synthetic test archive")
    p.add_argument("--speakers", type=int, help="number of speakers")
    p.add_argument("--files", type=int, help="number of files")
    p.add_argument("--dim", type=int, help="embedding dimension (default 16)")
    p.add_argument("--sigma", type=float, help="noise sigma (default 0.05)")
    p.add_argument("--seed", type=int, help="generator seed")
    p.add_argument("--out-dir", help="output directory")

    p = add("serve", _cmd_serve, "serve a loaded index over HTTP")
    p.add_argument("--index", help="index file")
    p.add_argument("--host", help="bind host (default 127.0.0.1)")
    p.add_argument("--port", type=int, help="bind port (default 8000)")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_config(args)
        args.func(args)
    except ValidationError as exc:
        print(json.dumps({"error": str(exc), "kind": "validation"}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": str(exc), "kind": "io"}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
