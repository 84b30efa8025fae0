"""Command-line surface: one subcommand per pipeline stage plus end-to-end.

Every intermediate artifact (corpus, latents, embeddings, splits, models,
decisions, neighbor lists, reports) is an inspectable file, so an audit can be
reproduced or re-scored piece by piece. Exit codes: 0 success, 1 usage error,
2 data or integrity error. All randomness is driven by explicit --seed flags.
"""

from __future__ import annotations

import argparse
import difflib
import sys
from pathlib import Path

from . import __version__
from ._util import read_json, write_json
from .audit import AuditConfig, AuditReport, render_report, run_audit
from .classifiers import (
    KnnClassifier,
    TrainConfig,
    birnn_train,
    knn_predict,
    load_model,
    random_search,
    save_model,
    train_stumps,
)
from .dataset import (
    DecisionVector,
    RaterConfig,
    attach_stage_labels,
    binarize_labels,
    generate_synthetic_corpus,
    load_corpus,
    load_decisions,
    load_latents,
    load_split,
    save_corpus,
    save_decisions,
    save_latents,
    save_split,
    simulate_raters,
    split_corpus,
)
from .embed import (
    EmbeddingMatrix,
    embed_corpus,
    ingest_embeddings,
    load_matrix_file,
    normalize_field_blocks,
    save_embeddings,
)
from .errors import FairauditError
from .fairness import classification_metrics, consistency
from .simindex import knn_batched, knn_exact, knn_feature_reranked, load_neighbors, save_neighbors

SUBCOMMANDS = (
    "synth", "embed", "split", "train", "predict",
    "consistency", "metrics", "audit", "report",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with exit-code-1 usage errors and flag suggestions."""

    # every option string ever registered, so the top-level parser can
    # suggest subcommand flags for typos that bubble up to it
    _all_options: set[str] = set()

    def add_argument(self, *args, **kwargs):
        action = super().add_argument(*args, **kwargs)
        _Parser._all_options.update(action.option_strings)
        return action

    def error(self, message):
        suggestion = ""
        if "unrecognized arguments:" in message:
            bad = [t for t in message.split(":", 1)[1].split() if t.startswith("--")]
            hints = []
            for token in bad:
                close = difflib.get_close_matches(token, sorted(_Parser._all_options), n=1)
                if close:
                    hints.append(f"did you mean {close[0]!r}?")
            if hints:
                suggestion = " (" + " ".join(hints) + ")"
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}{suggestion}")


def _ratios(text: str) -> tuple[float, float, float]:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated fractions")
    return tuple(parts)


def _thresholds(text: str) -> tuple[float, float, float]:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated thresholds")
    return tuple(parts)


def _bias_shift(entries: list[str]) -> dict[int, float]:
    shifts: dict[int, float] = {}
    for entry in entries:
        try:
            group, value = entry.split("=", 1)
            shifts[int(group)] = float(value)
        except ValueError:
            raise UsageError(f"--bias-shift expects GROUP=SHIFT, got {entry!r}")
    return shifts


def build_parser() -> _Parser:
    parser = _Parser(prog="fairaudit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser,
                            metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.required = True

    p = sub.add_parser("synth",
                       help="generate a synthetic corpus with simulated rater labels")
    p.add_argument("--n", type=int, required=True, help="number of profiles")
    p.add_argument("--vocab-size", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sigma", type=float, default=0.25, help="rater judgment noise")
    p.add_argument("--bias-shift", action="append", default=[], metavar="GROUP=SHIFT",
                   help="per-group threshold shift, e.g. 1=0.2 (repeatable)")
    p.add_argument("--thresholds", type=_thresholds, default=(0.4, 0.5, 0.6),
                   metavar="SL,AR,OF", help="stage thresholds (default 0.4,0.5,0.6)")
    p.add_argument("--rater-seed", type=int, default=None,
                   help="rater panel seed (default: --seed + 1)")
    p.add_argument("--no-labels", action="store_true",
                   help="skip rater simulation; emit outcome labels only")
    p.add_argument("--out-corpus", required=True)
    p.add_argument("--out-latents", default=None,
                   help="latent sidecar path (default: <corpus>.latents.jsonl)")

    p = sub.add_parser("embed",
                       help="embed a corpus to the binary matrix format")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embedder", choices=("hash", "ingest"), default="hash")
    p.add_argument("--d", type=int, default=768, help="dimensions per field")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--embeddings", default=None, help="source matrix for --embedder ingest")
    p.add_argument("--max-tokens", type=int, default=None,
                   help="truncate each field to this many tokens first")
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                   help="L2-normalize each field block (default on)")
    p.add_argument("--out", required=True)
    p.add_argument("--neighbors-out", default=None,
                   help="also write a k-NN structure over the embedded corpus")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--metric", choices=("cosine", "euclidean"), default="cosine")
    p.add_argument("--rerank", action=argparse.BooleanOptionalAction, default=True,
                   help="feature-reranked retrieval for --neighbors-out (default on)")
    p.add_argument("--batch-size", type=int, default=None,
                   help="memory-bounded batched search for --neighbors-out")

    p = sub.add_parser("split", help="deterministic corpus split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ratios", type=_ratios, default=(0.8, 0.1, 0.1), metavar="TR,VA,TE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stratify-on", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train one classifier family")
    p.add_argument("--family", choices=("knn", "stumps", "birnn"), required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--target", default="Type", help="label stage to learn (default Type)")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--metric", choices=("cosine", "euclidean"), default="cosine")
    p.add_argument("--d", type=int, default=768)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--rounds", type=int, default=200)
    p.add_argument("--reg-lambda", type=float, default=1.0)
    p.add_argument("--hidden-dim", type=int, default=32)
    p.add_argument("--head-dim", type=int, default=16)
    p.add_argument("--search-trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--trials-out", default=None, help="write the search trial log as JSON")

    p = sub.add_parser("predict",
                       help="predict decisions for every row of an embedding file")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--d", type=int, default=768)
    p.add_argument("--out", required=True)

    p = sub.add_parser("consistency",
                       help="consistency score of a decision file over a neighbor structure")
    p.add_argument("--decisions", required=True)
    p.add_argument("--neighbors", required=True)
    p.add_argument("--k", type=int, default=None, help="expected k (checked against the file)")
    p.add_argument("--out", default=None, help="write the full result as JSON")

    p = sub.add_parser("metrics",
                       help="classification metrics of predictions against truth")
    p.add_argument("--predicted", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--averaging", choices=("binary", "macro", "weighted"), default="weighted")
    p.add_argument("--out", default=None)

    p = sub.add_parser("audit", help="run the full pipeline")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embedder", choices=("hash", "ingest"), default="hash")
    p.add_argument("--embeddings", default=None)
    p.add_argument("--d", type=int, default=768)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--metric", choices=("cosine", "euclidean"), default="cosine")
    p.add_argument("--averaging", choices=("binary", "macro", "weighted"), default="weighted")
    p.add_argument("--ratios", type=_ratios, default=(0.8, 0.1, 0.1), metavar="TR,VA,TE")
    p.add_argument("--stratify-on", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-tokens", type=int, default=None)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--rerank", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--candidate-pool", type=int, default=None)
    p.add_argument("--target", default="Type")
    p.add_argument("--metrics-split", choices=("train", "validation", "test", "full"),
                   default="test")
    p.add_argument("--consistency-split", choices=("train", "validation", "test", "full"),
                   default="full")
    p.add_argument("--consistency-cells", choices=("stage", "all"), default="stage")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--rounds", type=int, default=200)
    p.add_argument("--reg-lambda", type=float, default=1.0)
    p.add_argument("--hidden-dim", type=int, default=32)
    p.add_argument("--head-dim", type=int, default=16)
    p.add_argument("--search-trials", type=int, default=1)
    p.add_argument("--out", required=True, help="run directory")

    p = sub.add_parser("report", help="render a stored report")
    p.add_argument("--report", required=True)
    p.add_argument("--format", choices=("json", "csv", "markdown"), default="markdown")
    p.add_argument("--out", default=None)

    return parser


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_synth(args) -> int:
    profiles, latents = generate_synthetic_corpus(args.n, args.vocab_size, args.seed)
    if not args.no_labels and profiles:
        config = RaterConfig(
            noise_sigma=args.noise_sigma,
            bias_shift=_bias_shift(args.bias_shift),
            stage_thresholds=args.thresholds,
            seed=args.rater_seed if args.rater_seed is not None else args.seed + 1,
        )
        decisions = simulate_raters(profiles, latents, config)
        profiles = attach_stage_labels(profiles, decisions)
    save_corpus(profiles, args.out_corpus)
    latents_path = args.out_latents or f"{args.out_corpus}.latents.jsonl"
    save_latents(latents, latents_path)
    print(f"wrote {len(profiles)} profiles to {args.out_corpus} (latents: {latents_path})")
    return 0


def _cmd_embed(args) -> int:
    profiles = load_corpus(args.corpus)
    if args.embedder == "hash":
        matrix = embed_corpus(profiles, args.d, args.seed, args.max_tokens)
    else:
        if not args.embeddings:
            raise UsageError("--embedder ingest requires --embeddings")
        matrix = ingest_embeddings(args.embeddings, [p.id for p in profiles], args.d)
    if args.normalize:
        matrix = normalize_field_blocks(matrix)
    save_embeddings(matrix, args.out)
    print(f"wrote {matrix.n}x{matrix.dim} matrix to {args.out}")
    if args.neighbors_out:
        if args.rerank:
            nl = knn_feature_reranked(matrix, args.k, args.metric)
        elif args.batch_size:
            nl = knn_batched(matrix, args.k, args.metric, batch_size=args.batch_size)
        else:
            nl = knn_exact(matrix, args.k, args.metric)
        save_neighbors(nl, args.neighbors_out)
        print(f"wrote k={args.k} neighbors to {args.neighbors_out}")
    return 0


def _cmd_split(args) -> int:
    profiles = load_corpus(args.corpus)
    split = split_corpus(profiles, args.ratios, args.seed, args.stratify_on)
    save_split(split, args.out)
    print(
        f"wrote split {len(split.train)}/{len(split.validation)}/{len(split.test)} to {args.out}"
    )
    return 0


def _load_xy(args):
    profiles = load_corpus(args.corpus)
    matrix = ingest_embeddings(args.embeddings, [p.id for p in profiles], args.d)
    split = load_split(args.splits)
    truth = binarize_labels(profiles, args.target)
    position = {pid: i for i, pid in enumerate(matrix.index_order)}

    def rows(ids):
        idx = [position[pid] for pid in ids]
        return matrix.data[idx], truth.values[idx]

    return matrix, split, rows


def _cmd_train(args) -> int:
    matrix, split, rows = _load_xy(args)
    x_train, y_train = rows(split.train)
    x_val, y_val = rows(split.validation)
    config = TrainConfig(
        max_epochs=args.epochs,
        patience=args.patience,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
        rounds=args.rounds,
        reg_lambda=args.reg_lambda,
        hidden_dim=args.hidden_dim,
        head_dim=args.head_dim,
        search_trials=args.search_trials,
    )
    trials = None
    if args.family == "knn":
        clf = KnnClassifier(args.k, args.metric)
        train_matrix = EmbeddingMatrix(
            x_train, args.d, matrix.field_order, tuple(split.train)
        )
        clf.fit(train_matrix, DecisionVector(f"truth:{args.target}", y_train, tuple(split.train)))
        model = clf
    elif args.family == "stumps":
        if args.search_trials > 1:
            result = random_search("stumps", x_train, y_train, x_val, y_val, config)
            model, trials = result.model, result.trials
        else:
            model = train_stumps(x_train, y_train, config)
    else:
        n_fields = len(matrix.field_order)
        seq_train = x_train.reshape(len(x_train), n_fields, args.d)
        seq_val = x_val.reshape(len(x_val), n_fields, args.d)
        if args.search_trials > 1:
            result = random_search("birnn", seq_train, y_train, seq_val, y_val, config)
            model, trials = result.model, result.trials
        else:
            model, _ = birnn_train(seq_train, y_train, seq_val, y_val, config)
    save_model(model, args.out)
    print(f"wrote {args.family} model to {args.out}")
    if args.trials_out and trials is not None:
        write_json(args.trials_out, [
            {"index": t.index, "params": t.params, "val_accuracy": t.val_accuracy,
             "error": t.error}
            for t in trials
        ])
        print(f"wrote trial log to {args.trials_out}")
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    ids, data = load_matrix_file(args.embeddings)
    if isinstance(model, KnnClassifier):
        matrix = EmbeddingMatrix(
            data, args.d, tuple(f"f{i}" for i in range(data.shape[1] // args.d)), tuple(ids)
        )
        vector = knn_predict(model, matrix)
    elif hasattr(model, "predict_margin"):
        vector = DecisionVector("model:gbstumps", model.predict(data), tuple(ids))
    else:
        seqs = data.reshape(len(ids), model.steps, model.input_dim)
        vector = DecisionVector("model:birnn", model.predict(seqs), tuple(ids))
    save_decisions(vector, args.out)
    print(f"wrote {len(ids)} decisions to {args.out}")
    return 0


def _cmd_consistency(args) -> int:
    decisions = load_decisions(args.decisions)
    neighbors = load_neighbors(args.neighbors)
    result = consistency(decisions, neighbors, args.k)
    print(f"{result.score:.4f}")
    if args.out:
        write_json(args.out, result.to_dict())
    return 0


def _cmd_metrics(args) -> int:
    predicted = load_decisions(args.predicted)
    truth = load_decisions(args.truth)
    metrics = classification_metrics(predicted, truth, args.averaging)
    print(
        f"precision={metrics.precision:.4f} recall={metrics.recall:.4f} "
        f"f1={metrics.f1:.4f} accuracy={metrics.accuracy:.4f}"
    )
    if args.out:
        write_json(args.out, metrics.to_dict())
    return 0


def _cmd_audit(args) -> int:
    config = AuditConfig(
        d=args.d,
        k=args.k,
        metric=args.metric,
        averaging=args.averaging,
        ratios=args.ratios,
        stratify_on=args.stratify_on,
        seed=args.seed,
        embedder=args.embedder,
        embeddings_path=args.embeddings,
        max_tokens=args.max_tokens,
        normalize=args.normalize,
        rerank=args.rerank,
        candidate_pool=args.candidate_pool,
        target_stage=args.target,
        metrics_split=args.metrics_split,
        consistency_split=args.consistency_split,
        consistency_cells=args.consistency_cells,
        max_epochs=args.epochs,
        patience=args.patience,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        rounds=args.rounds,
        reg_lambda=args.reg_lambda,
        hidden_dim=args.hidden_dim,
        head_dim=args.head_dim,
        search_trials=args.search_trials,
    )
    report = run_audit(args.corpus, config, out_dir=args.out)
    print(render_report(report, "markdown"), end="")
    print(f"run directory: {args.out}")
    return 0


def _cmd_report(args) -> int:
    report = AuditReport.from_dict(read_json(args.report))
    text = render_report(report, args.format)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.format} report to {args.out}")
    else:
        print(text, end="")
    return 0


_HANDLERS = {
    "synth": _cmd_synth,
    "embed": _cmd_embed,
    "split": _cmd_split,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "consistency": _cmd_consistency,
    "metrics": _cmd_metrics,
    "audit": _cmd_audit,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help / --version
        return int(exc.code or 0)
    except FairauditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
