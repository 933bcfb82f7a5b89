"""Command-line entry point: qae extract | evaluate | stats | analyze | serve.

Batch commands never abort on per-session problems — those become warnings in
the output and a summary on stderr. Exit codes: 0 success, 2 invalid
configuration, 3 I/O failure, 4 prediction/reference alignment failure,
5 port in use.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence, TextIO

from .codec import PromptFormat
from .core import (
    ExtractionResult,
    LabelSequence,
    QaeError,
    QALabel,
    RoleStrings,
    Session,
    Warning,
)
from .corpus import (
    CorpusFormatError,
    CorpusRecord,
    EvalRecord,
    extraction_to_json,
    read_corpus,
    read_eval_file,
    write_jsonl,
)
from .gateway import FileTagger, GatewayError, HttpTagger
from .metrics import (
    GroupRecall,
    RecallGrouping,
    SessionIdMismatchError,
    corpus_stats,
    grouped_recall,
    session_metrics,
    utterance_metrics,
)
from .pipeline import (
    ExtractionMode,
    HeuristicConfig,
    ModeUnsupportedError,
    Tagger,
    TaggerFailure,
    extract_end_to_end,
    extract_two_stage,
    extract_with_heuristic,
)
from .structure import session_structure_profile

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_ALIGNMENT = 4
EXIT_PORT = 5

ENV_PREFIX = "QAE_"


class ConfigError(QaeError):
    """Invalid flag/env/config-file value."""


def _read_config_file(path: str | Path) -> dict[str, str]:
    """Flat key = value lines (a TOML-like subset); # starts a comment."""
    values: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {raw!r} is not key = value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip().strip("\"'")
    return values


class Settings:
    """Option resolution: flags > QAE_* environment > config file > defaults."""

    def __init__(self, config_path: str | None, env: dict[str, str] | None = None):
        self._file = _read_config_file(config_path) if config_path else {}
        self._env = os.environ if env is None else env

    def resolve(self, key: str, flag_value, default, cast: Callable = str):
        if flag_value is not None:
            return flag_value
        raw = self._env.get(ENV_PREFIX + key.upper(), self._file.get(key))
        if raw is None:
            return default
        try:
            return cast(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value {raw!r} for option {key}: {exc}") from exc


def _open_output(path: str) -> TextIO:
    return sys.stdout if path == "-" else open(path, "w", encoding="utf-8")


def _all_outside(n: int) -> LabelSequence:
    return LabelSequence.of([QALabel.outside()] * n)


def _build_tagger(spec: str, policy_timeout: float) -> Tagger:
    if spec.startswith("file:"):
        return FileTagger.from_path(spec[len("file:") :])
    if spec.startswith("http://") or spec.startswith("https://"):
        from .gateway import RetryPolicy

        return HttpTagger(spec, RetryPolicy(timeout_s=policy_timeout))
    raise ConfigError(
        f"tagger spec {spec!r} must be 'heuristic', 'file:<path>' or an http(s) endpoint"
    )


def cmd_extract(args: argparse.Namespace, settings: Settings) -> int:
    roles = RoleStrings(
        customer=settings.resolve("customer_label", args.customer_label, "C"),
        agent=settings.resolve("agent_label", args.agent_label, "A"),
    )
    mode = ExtractionMode(settings.resolve("mode", args.mode, "end_to_end"))
    fmt = PromptFormat(settings.resolve("format", args.format, "sentinel_semicolon"))
    workers = settings.resolve("workers", args.workers, 1, int)
    tagger_spec = settings.resolve("tagger", args.tagger, "heuristic")

    heuristic: HeuristicConfig | None = None
    tagger: Tagger | None = None
    if tagger_spec == "heuristic":
        if mode is not ExtractionMode.END_TO_END:
            raise ConfigError("the heuristic tagger only supports --mode end_to_end")
        window = settings.resolve("window", args.window, 3, int)
        if args.lexicon:
            heuristic = HeuristicConfig.from_lexicon_file(args.lexicon, window=window)
        else:
            heuristic = HeuristicConfig(window=window)
    else:
        tagger = _build_tagger(tagger_spec, settings.resolve("timeout", args.timeout, 30.0, float))

    if tagger is not None and workers > 1 and not getattr(tagger, "reentrant", False):
        workers = 1  # a non-reentrant tagger must not be invoked concurrently

    records = list(read_corpus(args.input, roles))

    def run_one(record: CorpusRecord) -> tuple[Session, ExtractionResult]:
        session = record.session
        try:
            if heuristic is not None:
                return session, extract_with_heuristic(session, heuristic)
            assert tagger is not None
            if mode is ExtractionMode.END_TO_END:
                return session, extract_end_to_end(session, tagger, fmt, roles)
            return session, extract_two_stage(session, tagger, tagger, mode, fmt, roles)
        except (TaggerFailure, ModeUnsupportedError) as exc:
            failed = ExtractionResult(
                session.session_id,
                (),
                _all_outside(len(session)),
                (Warning.tagger_failure(str(exc)),),
            )
            return session, failed

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, records))
    else:
        results = [run_one(record) for record in records]

    out = _open_output(args.output)
    try:
        write_jsonl(out, (extraction_to_json(result, session) for session, result in results))
    finally:
        if out is not sys.stdout:
            out.close()

    if args.store:
        from .store import ReviewStore

        store = ReviewStore(args.store)
        try:
            for session, result in results:
                store.ingest(session, result)
        finally:
            store.close()

    n_pairs = sum(len(result.pairs) for _, result in results)
    n_warnings = sum(len(result.warnings) for _, result in results)
    n_failures = sum(
        1
        for _, result in results
        if any(w.kind.value == "tagger_failure" for w in result.warnings)
    )
    print(
        f"extracted {n_pairs} pairs from {len(results)} sessions "
        f"({n_warnings} warnings, {n_failures} tagger failures)",
        file=sys.stderr,
    )
    return EXIT_OK


def _group_report(groups: dict[object, GroupRecall]) -> dict[str, dict]:
    report = {}
    for key in sorted(groups, key=lambda k: k.value):
        recall = groups[key]
        report[key.value] = {
            "recall": recall.recall,
            "matched": recall.matched,
            "total": recall.total,
        }
    return report


def cmd_evaluate(args: argparse.Namespace, settings: Settings) -> int:
    roles = RoleStrings(
        customer=settings.resolve("customer_label", args.customer_label, "C"),
        agent=settings.resolve("agent_label", args.agent_label, "A"),
    )
    pred = read_eval_file(args.pred, roles)
    ref = read_eval_file(args.ref, roles)
    pred_ids = [r.session_id for r in pred]
    ref_ids = [r.session_id for r in ref]
    if sorted(pred_ids) != sorted(ref_ids):
        diff = sorted(set(pred_ids) ^ set(ref_ids))
        print(f"error: prediction/reference sessions differ: {diff[:10]}", file=sys.stderr)
        return EXIT_ALIGNMENT

    pred_by_id = {r.session_id: r for r in pred}
    ref_by_id = {r.session_id: r for r in ref}
    order = sorted(ref_by_id)
    utterance = utterance_metrics(
        [pred_by_id[sid].labels for sid in order],
        [ref_by_id[sid].labels for sid in order],
    )
    pred_results = [pred_by_id[sid].result for sid in order]
    ref_results = [ref_by_id[sid].result for sid in order]
    session = session_metrics(pred_results, ref_results)

    def sessions_with_roles() -> dict[str, Session]:
        sessions = {}
        for sid in order:
            side = ref_by_id[sid] if ref_by_id[sid].has_roles else pred_by_id[sid]
            if not side.has_roles:
                raise CorpusFormatError(
                    args.ref, 0, f"session {sid!r} carries no speaker roles on either side"
                )
            sessions[sid] = side.session
        return sessions

    report = {
        "n_sessions": len(order),
        "utterance": {
            "precision": utterance.precision,
            "recall": utterance.recall,
            "f1": utterance.f1,
            "predicted_non_o": utterance.predicted_non_o,
            "reference_non_o": utterance.reference_non_o,
            "correct_non_o": utterance.correct_non_o,
        },
        "session": {
            "adoption_rate": session.adoption_rate,
            "hit_rate": session.hit_rate,
            "session_f1": session.session_f1,
            "predicted_pairs": session.predicted_pairs,
            "reference_pairs": session.reference_pairs,
            "matched_pairs": session.matched_pairs,
        },
        "recall_by_category": _group_report(
            grouped_recall(pred_results, ref_results, RecallGrouping.CATEGORY)
        ),
        "recall_by_in_pair_shape": _group_report(
            grouped_recall(pred_results, ref_results, RecallGrouping.IN_PAIR_SHAPE)
        ),
        "recall_by_between_relation": _group_report(
            grouped_recall(
                pred_results, ref_results, RecallGrouping.BETWEEN_RELATION, sessions_with_roles()
            )
        ),
    }

    out = _open_output(args.report)
    try:
        json.dump(report, out, ensure_ascii=False, indent=2)
        out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()
    print(
        f"P={utterance.precision:.4f} R={utterance.recall:.4f} F1={utterance.f1:.4f} "
        f"AR={session.adoption_rate:.4f} HR={session.hit_rate:.4f} "
        f"S-F1={session.session_f1:.4f}",
        file=sys.stderr,
    )
    return EXIT_OK


def _load_corpus_with_pairs(
    args: argparse.Namespace, roles: RoleStrings
) -> list[tuple[Session, ExtractionResult]]:
    """Corpus sessions joined with pairs from gold labels or an extraction file."""
    from .codec import labels_to_pairs

    records = list(read_corpus(args.input, roles))
    if args.extractions:
        eval_records = read_eval_file(args.extractions, roles)
        by_id: dict[str, EvalRecord] = {r.session_id: r for r in eval_records}
        joined = []
        for record in records:
            match = by_id.get(record.session.session_id)
            if match is None:
                raise SessionIdMismatchError(
                    f"no extraction for session {record.session.session_id!r}"
                )
            joined.append((record.session, match.result))
        return joined
    unlabeled = [r.session.session_id for r in records if r.labels is None]
    if unlabeled:
        raise ConfigError(
            f"sessions {unlabeled[:5]} have no labels; annotate the corpus or pass --extractions"
        )
    return [(r.session, labels_to_pairs(r.labels, r.session)) for r in records]


def cmd_stats(args: argparse.Namespace, settings: Settings) -> int:
    roles = RoleStrings(
        customer=settings.resolve("customer_label", args.customer_label, "C"),
        agent=settings.resolve("agent_label", args.agent_label, "A"),
    )
    corpus = _load_corpus_with_pairs(args, roles)
    stats = corpus_stats(corpus)
    rows = [
        ("sessions", f"{stats.n_sessions}"),
        ("avg_us", f"{stats.avg_us:.2f}"),
        ("avg_qs", f"{stats.avg_qs:.2f}"),
        ("avg_as", f"{stats.avg_as:.2f}"),
        ("dist_qa", f"{stats.dist_qa:.2f}"),
    ] + [
        (f"ratio {category.value}", f"{fraction * 100:.2f}%")
        for category, fraction in stats.category_ratios.items()
    ]
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {value}")
    print(
        json.dumps(
            {
                "n_sessions": stats.n_sessions,
                "avg_us": stats.avg_us,
                "avg_qs": stats.avg_qs,
                "avg_as": stats.avg_as,
                "dist_qa": stats.dist_qa,
                "category_ratios": {c.value: f for c, f in stats.category_ratios.items()},
            },
            ensure_ascii=False,
        )
    )
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace, settings: Settings) -> int:
    roles = RoleStrings(
        customer=settings.resolve("customer_label", args.customer_label, "C"),
        agent=settings.resolve("agent_label", args.agent_label, "A"),
    )
    corpus = _load_corpus_with_pairs(args, roles)
    profile = session_structure_profile(corpus)
    report = {
        "relations": {
            relation.value: {
                "count": profile.relation_counts[relation],
                "fraction": profile.relation_fractions[relation],
            }
            for relation in profile.relation_counts
        },
        "shapes": {
            shape.value: {
                "count": profile.shape_counts[shape],
                "fraction": profile.shape_fractions[shape],
            }
            for shape in profile.shape_counts
        },
        "irregular_overlaps": profile.irregular_overlaps,
        "relation_sequences": {
            sid: [relation.value for relation in sequence]
            for sid, sequence in sorted(profile.relation_sequences.items())
        },
    }
    out = _open_output(args.report)
    try:
        json.dump(report, out, ensure_ascii=False, indent=2)
        out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_serve(args: argparse.Namespace, settings: Settings) -> int:
    import uvicorn

    from .server import create_app
    from .store import ReviewStore

    host = settings.resolve("host", args.host, "127.0.0.1")
    port = settings.resolve("port", args.port, 8400, int)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError:
        print(f"error: port {port} on {host} is already in use", file=sys.stderr)
        return EXIT_PORT
    finally:
        probe.close()

    store = ReviewStore(args.store)
    ui_dir = args.ui_dir
    if ui_dir is None and Path("frontend/dist").is_dir():
        ui_dir = "frontend/dist"
    app = create_app(store, ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return EXIT_OK


def _add_role_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--customer-label", help="corpus role string for customers (default C)")
    parser.add_argument("--agent-label", help="corpus role string for agents (default A)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qae", description="N-to-N question-answer pair extraction toolkit"
    )
    parser.add_argument("--config", help="flat key = value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p_extract = sub.add_parser("extract", help="extract QA pairs from a corpus")
    p_extract.add_argument("--input", required=True, help="corpus JSONL file")
    p_extract.add_argument("--output", default="-", help="extraction JSONL output (- for stdout)")
    p_extract.add_argument(
        "--tagger",
        help="'heuristic', 'file:<predictions.jsonl>' or an http(s) endpoint",
    )
    p_extract.add_argument("--mode", choices=[m.value for m in ExtractionMode])
    p_extract.add_argument(
        "--format",
        choices=[f.value for f in PromptFormat if f is not PromptFormat.CLS_SINGLE],
    )
    p_extract.add_argument("--workers", type=int, help="concurrent sessions (default 1)")
    p_extract.add_argument("--window", type=int, help="heuristic answer window (default 3)")
    p_extract.add_argument("--lexicon", help="heuristic lexicon file, one phrase per line")
    p_extract.add_argument("--timeout", type=float, help="http tagger timeout seconds")
    p_extract.add_argument("--store", help="also ingest results into this review store directory")
    _add_role_flags(p_extract)
    p_extract.set_defaults(handler=cmd_extract)

    p_eval = sub.add_parser("evaluate", help="score predictions against references")
    p_eval.add_argument("--pred", required=True, help="predicted extraction JSONL")
    p_eval.add_argument("--ref", required=True, help="reference extraction or labeled corpus JSONL")
    p_eval.add_argument("--report", default="-", help="report JSON output (- for stdout)")
    _add_role_flags(p_eval)
    p_eval.set_defaults(handler=cmd_evaluate)

    p_stats = sub.add_parser("stats", help="corpus statistics")
    p_stats.add_argument("--input", required=True, help="corpus JSONL file")
    p_stats.add_argument("--extractions", help="extraction JSONL when the corpus is unlabeled")
    _add_role_flags(p_stats)
    p_stats.set_defaults(handler=cmd_stats)

    p_analyze = sub.add_parser("analyze", help="dialogue structure profile")
    p_analyze.add_argument("--input", required=True, help="corpus JSONL file")
    p_analyze.add_argument("--extractions", help="extraction JSONL when the corpus is unlabeled")
    p_analyze.add_argument("--report", default="-", help="report JSON output (- for stdout)")
    _add_role_flags(p_analyze)
    p_analyze.set_defaults(handler=cmd_analyze)

    p_serve = sub.add_parser("serve", help="run the review API / UI server")
    p_serve.add_argument("--store", required=True, help="review store directory")
    p_serve.add_argument("--port", type=int, help="listen port (default 8400)")
    p_serve.add_argument("--host", help="bind address (default 127.0.0.1)")
    p_serve.add_argument("--ui-dir", help="built review UI assets to serve at /")
    p_serve.set_defaults(handler=cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = Settings(args.config)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.handler(args, settings)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SessionIdMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALIGNMENT
    except (OSError, CorpusFormatError, GatewayError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
