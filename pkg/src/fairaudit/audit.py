"""End-to-end audit pipeline and the comparison report.

``run_audit`` executes load, embed, split, train, predict, and score, then
assembles one report row per decision source: the three human funnel stages
and the three built-in classifiers. Classification metrics are computed
against the binarized final outcome on the test split by default; consistency
is computed per stage column over the profiles that carry that stage's label
(the population actually evaluated at that stage), using a k-NN structure
built on exactly those rows. Every seed, flag, and scope lands in the report
metadata so any cell can be recomputed.
"""

from __future__ import annotations

import datetime
import hashlib
from dataclasses import asdict, dataclass, replace

import numpy as np

from ._util import canonical_json, derive_seeds, write_json
from .classifiers import (
    KnnClassifier,
    TrainConfig,
    birnn_train,
    knn_predict,
    random_search,
    save_model,
    train_stumps,
)
from .dataset import (
    STAGES,
    DecisionVector,
    Profile,
    binarize_labels,
    load_corpus,
    save_split,
    split_corpus,
)
from .embed import (
    EmbeddingMatrix,
    embed_corpus,
    ingest_embeddings,
    normalize_field_blocks,
    save_embeddings,
)
from .errors import IntegrityError, StageError
from .fairness import classification_metrics, consistency
from .simindex import NeighborList, knn_exact, knn_feature_reranked, neighbors_to_dict

HUMAN_SOURCES = tuple(f"human:{stage}" for stage in STAGES)
MODEL_SOURCES = ("model:knn", "model:gbstumps", "model:birnn")
ALL_SOURCES = HUMAN_SOURCES + MODEL_SOURCES
CONSISTENCY_STAGES = ("AR", "OF")

_REPORT_COLUMNS = ("precision", "recall", "f1", "accuracy", "c_ar", "c_of")


@dataclass(frozen=True)
class AuditConfig:
    """Everything a run needs; defaults follow the documented pipeline."""

    d: int = 768
    k: int = 5
    metric: str = "cosine"
    averaging: str = "weighted"
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    stratify_on: str | None = None
    seed: int = 0
    embedder: str = "hash"  # "hash" or "ingest"
    embeddings_path: str | None = None
    max_tokens: int | None = None
    normalize: bool = True
    rerank: bool = True
    candidate_pool: int | None = None
    field_weights: tuple[float, ...] | None = None
    target_stage: str = "Type"
    metrics_split: str = "test"  # train | validation | test | full
    consistency_split: str = "full"
    consistency_cells: str = "stage"  # "stage": human rows get their own stage's C; "all": every cell
    sources: tuple[str, ...] = ALL_SOURCES
    max_epochs: int = 20
    patience: int = 5
    learning_rate: float = 0.1
    batch_size: int = 32
    rounds: int = 200
    reg_lambda: float = 1.0
    hidden_dim: int = 32
    head_dim: int = 16
    search_trials: int = 1
    search_space: dict | None = None

    def __post_init__(self):
        if self.embedder not in ("hash", "ingest"):
            raise ValueError(f"unknown embedder {self.embedder!r}")
        if self.embedder == "ingest" and not self.embeddings_path:
            raise ValueError("embedder 'ingest' requires embeddings_path")
        if self.metrics_split not in ("train", "validation", "test", "full"):
            raise ValueError(f"unknown metrics_split {self.metrics_split!r}")
        if self.consistency_split not in ("train", "validation", "test", "full"):
            raise ValueError(f"unknown consistency_split {self.consistency_split!r}")
        if self.consistency_cells not in ("stage", "all"):
            raise ValueError(f"unknown consistency_cells {self.consistency_cells!r}")
        unknown = [s for s in self.sources if s not in ALL_SOURCES]
        if unknown:
            raise ValueError(f"unknown sources {unknown}; expected among {ALL_SOURCES}")


@dataclass(frozen=True)
class ReportRow:
    source: str
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    accuracy: float | None = None
    c_ar: float | None = None
    c_of: float | None = None

    def to_dict(self) -> dict:
        return {"source": self.source, **{c: getattr(self, c) for c in _REPORT_COLUMNS}}


@dataclass(frozen=True)
class AuditReport:
    rows: tuple[ReportRow, ...]
    metadata: dict

    def row(self, source: str) -> ReportRow:
        for row in self.rows:
            if row.source == source:
                return row
        available = [r.source for r in self.rows]
        raise IntegrityError(f"unknown source {source!r}; available: {available}")

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "metadata": self.metadata}

    @classmethod
    def from_dict(cls, obj: dict) -> "AuditReport":
        rows = tuple(
            ReportRow(r["source"], *[r.get(c) for c in _REPORT_COLUMNS]) for r in obj["rows"]
        )
        return cls(rows, obj["metadata"])


def _stage(name: str, fn):
    try:
        return fn()
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _restrict(vector: DecisionVector, ids: list[str]) -> DecisionVector:
    position = {pid: i for i, pid in enumerate(vector.index_order)}
    values = vector.values[[position[pid] for pid in ids]]
    return DecisionVector(vector.source, values, tuple(ids))


class _AuditRun:
    def __init__(self, corpus_path, config: AuditConfig):
        self.corpus_path = str(corpus_path)
        self.config = config
        self.seeds = derive_seeds(config.seed, ("embed", "split", "stumps", "birnn", "search"))
        self.structures: dict[tuple[str, ...], NeighborList] = {}
        self.stage_structures: dict[str, NeighborList] = {}
        self.models: dict[str, object] = {}
        self.search_logs: dict[str, list] = {}

    # pipeline ---------------------------------------------------------------

    def execute(self) -> "AuditReport":
        config = self.config
        self.profiles = _stage("load", self._load)
        self.matrix = _stage("embed", self._embed)
        self.split = _stage(
            "split",
            lambda: split_corpus(
                self.profiles, config.ratios, self.seeds["split"], config.stratify_on
            ),
        )
        self.decisions = _stage("labels", self._collect_decisions)
        _stage("train", self._train_models)
        _stage("predict", self._predict_models)
        return _stage("score", self._score)

    def _load(self) -> list[Profile]:
        with open(self.corpus_path, "rb") as fh:
            self.corpus_sha256 = hashlib.sha256(fh.read()).hexdigest()
        return load_corpus(self.corpus_path)

    def _embed(self) -> EmbeddingMatrix:
        config = self.config
        if config.embedder == "hash":
            matrix = embed_corpus(
                self.profiles, config.d, self.seeds["embed"], config.max_tokens
            )
        else:
            matrix = ingest_embeddings(
                config.embeddings_path, [p.id for p in self.profiles], config.d
            )
        return normalize_field_blocks(matrix) if config.normalize else matrix

    def _collect_decisions(self) -> dict[str, DecisionVector]:
        decisions: dict[str, DecisionVector] = {}
        self.truth = binarize_labels(self.profiles, self.config.target_stage)
        for stage in STAGES:
            labeled = [p for p in self.profiles if stage in p.labels]
            if labeled:
                decisions[f"human:{stage}"] = binarize_labels(labeled, stage)
        return decisions

    def _rows_for(self, ids: list[str]) -> EmbeddingMatrix:
        position = {pid: i for i, pid in enumerate(self.matrix.index_order)}
        data = self.matrix.data[[position[pid] for pid in ids]]
        return EmbeddingMatrix(data, self.config.d, self.matrix.field_order, tuple(ids))

    def _train_models(self) -> None:
        config = self.config
        train_ids = list(self.split.train)
        val_ids = list(self.split.validation)
        train_matrix = self._rows_for(train_ids)
        y_train = _restrict(self.truth, train_ids).values
        y_val = _restrict(self.truth, val_ids).values
        x_train = train_matrix.data
        x_val = self._rows_for(val_ids).data
        if "model:knn" in config.sources:
            clf = KnnClassifier(config.k, config.metric)
            clf.fit(train_matrix, _restrict(self.truth, train_ids))
            self.models["model:knn"] = clf
        base = TrainConfig(
            max_epochs=config.max_epochs,
            patience=config.patience,
            learning_rate=config.learning_rate,
            batch_size=config.batch_size,
            rounds=config.rounds,
            reg_lambda=config.reg_lambda,
            hidden_dim=config.hidden_dim,
            head_dim=config.head_dim,
            search_space=config.search_space,
            search_trials=config.search_trials,
        )
        n_fields = len(self.matrix.field_order)
        seq_train = x_train.reshape(len(train_ids), n_fields, config.d)
        seq_val = x_val.reshape(len(val_ids), n_fields, config.d)
        if "model:gbstumps" in config.sources:
            cfg = replace(base, seed=self.seeds["stumps"])
            if config.search_trials > 1:
                result = random_search("stumps", x_train, y_train, x_val, y_val,
                                       replace(cfg, seed=self.seeds["search"]))
                self.models["model:gbstumps"] = result.model
                self.search_logs["model:gbstumps"] = [asdict(t) for t in result.trials]
            else:
                self.models["model:gbstumps"] = train_stumps(x_train, y_train, cfg)
        if "model:birnn" in config.sources:
            cfg = replace(base, seed=self.seeds["birnn"])
            if config.search_trials > 1:
                result = random_search("birnn", seq_train, y_train, seq_val, y_val,
                                       replace(cfg, seed=self.seeds["search"]))
                self.models["model:birnn"] = result.model
                self.search_logs["model:birnn"] = [asdict(t) for t in result.trials]
            else:
                model, _ = birnn_train(seq_train, y_train, seq_val, y_val, cfg)
                self.models["model:birnn"] = model

    def _predict_models(self) -> None:
        config = self.config
        ids = self.matrix.index_order
        n_fields = len(self.matrix.field_order)
        for source, model in self.models.items():
            if source == "model:knn":
                vector = knn_predict(model, self.matrix)
            elif source == "model:gbstumps":
                vector = DecisionVector(source, model.predict(self.matrix.data), ids)
            else:
                seqs = self.matrix.data.reshape(len(ids), n_fields, config.d)
                vector = DecisionVector(source, model.predict(seqs), ids)
            self.decisions[source] = vector

    # scoring ----------------------------------------------------------------

    def _split_ids(self, name: str) -> set[str]:
        if name == "full":
            return set(self.matrix.index_order)
        return set(self.split.subsets()[name])

    def _structure_for(self, ids: list[str]) -> NeighborList | None:
        key = tuple(ids)
        if key in self.structures:
            return self.structures[key]
        if len(ids) < self.config.k + 1:
            return None
        submatrix = self._rows_for(ids)
        if self.config.rerank:
            structure = knn_feature_reranked(
                submatrix,
                self.config.k,
                self.config.metric,
                self.config.candidate_pool,
                self.config.field_weights,
            )
        else:
            structure = knn_exact(submatrix, self.config.k, self.config.metric)
        self.structures[key] = structure
        return structure

    def _consistency_cell(self, source: str, stage: str) -> float | None:
        vector = self.decisions.get(source)
        if vector is None:
            return None
        scope = self._split_ids(self.config.consistency_split)
        covered = set(vector.index_order)
        stage_ids = [
            p.id
            for p in self.profiles
            if stage in p.labels and p.id in scope and p.id in covered
        ]
        structure = self._structure_for(stage_ids)
        if structure is None:
            return None
        if source.startswith("model:"):
            self.stage_structures.setdefault(stage, structure)
        result = consistency(_restrict(vector, stage_ids), structure)
        return result.score

    def _metrics_cells(self, source: str) -> dict[str, float | None]:
        vector = self.decisions.get(source)
        absent = {c: None for c in ("precision", "recall", "f1", "accuracy")}
        if vector is None:
            return absent
        scope = self._split_ids(self.config.metrics_split)
        covered = set(vector.index_order)
        ids = [pid for pid in self.matrix.index_order if pid in scope and pid in covered]
        if not ids:
            return absent
        metrics = classification_metrics(
            _restrict(vector, ids), _restrict(self.truth, ids), self.config.averaging
        )
        return {
            "precision": metrics.precision,
            "recall": metrics.recall,
            "f1": metrics.f1,
            "accuracy": metrics.accuracy,
        }

    def _wants_cell(self, source: str, stage: str) -> bool:
        if self.config.consistency_cells == "all" or source.startswith("model:"):
            return True
        return source == f"human:{stage}"

    def _score(self) -> AuditReport:
        rows = []
        for source in self.config.sources:
            cells = self._metrics_cells(source)
            for stage in CONSISTENCY_STAGES:
                key = f"c_{stage.lower()}"
                cells[key] = (
                    self._consistency_cell(source, stage)
                    if self._wants_cell(source, stage)
                    else None
                )
            rows.append(ReportRow(source, **cells))
        metadata = {
            "k": self.config.k,
            "metric": self.config.metric,
            "averaging": self.config.averaging,
            "d": self.config.d,
            "embedder": self.config.embedder,
            "normalize": self.config.normalize,
            "rerank": self.config.rerank,
            "candidate_pool": self.config.candidate_pool,
            "field_weights": list(self.config.field_weights)
            if self.config.field_weights
            else None,
            "ratios": list(self.config.ratios),
            "stratify_on": self.config.stratify_on,
            "metrics_split": self.config.metrics_split,
            "consistency_split": self.config.consistency_split,
            "consistency_cells": self.config.consistency_cells,
            "target_stage": self.config.target_stage,
            "corpus_size": len(self.profiles),
            "corpus_sha256": self.corpus_sha256,
            "seed": self.config.seed,
            "derived_seeds": self.seeds,
            "train": {
                "max_epochs": self.config.max_epochs,
                "patience": self.config.patience,
                "learning_rate": self.config.learning_rate,
                "batch_size": self.config.batch_size,
                "rounds": self.config.rounds,
                "reg_lambda": self.config.reg_lambda,
                "hidden_dim": self.config.hidden_dim,
                "head_dim": self.config.head_dim,
                "search_trials": self.config.search_trials,
            },
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        }
        return AuditReport(tuple(rows), metadata)


def run_audit(corpus_path, config: AuditConfig | None = None, out_dir=None) -> AuditReport:
    """Run the full pipeline; optionally persist every artifact to a run dir.

    The run directory holds config.json, corpus.sha256, embeddings.faem,
    splits.json, models/*.json, neighbors.json (the per-stage structures used
    for the consistency columns), and report.{json,csv,md}. Nothing is written
    until the whole pipeline has succeeded, so partial reports never appear.
    """
    config = config or AuditConfig()
    run = _AuditRun(corpus_path, config)
    report = run.execute()
    if out_dir is not None:
        _stage("write", lambda: _write_run_dir(run, report, out_dir))
    return report


def _write_run_dir(run: _AuditRun, report: AuditReport, out_dir) -> None:
    from pathlib import Path

    out = Path(out_dir)
    (out / "models").mkdir(parents=True, exist_ok=True)
    config_obj = asdict(run.config)
    config_obj["derived_seeds"] = run.seeds
    write_json(out / "config.json", config_obj)
    (out / "corpus.sha256").write_text(f"{run.corpus_sha256}  {run.corpus_path}\n")
    save_embeddings(run.matrix, out / "embeddings.faem")
    save_split(run.split, out / "splits.json")
    for source, model in run.models.items():
        save_model(model, out / "models" / f"{source.split(':', 1)[1]}.json")
    if run.search_logs:
        write_json(out / "models" / "search_log.json", run.search_logs)
    write_json(
        out / "neighbors.json",
        {"stages": {stage: neighbors_to_dict(nl) for stage, nl in run.stage_structures.items()}},
    )
    for source, vector in run.decisions.items():
        name = source.replace(":", "_")
        write_json(out / f"decisions_{name}.json", vector.to_dict())
    write_json(out / "report.json", report.to_dict())
    (out / "report.csv").write_text(render_report(report, "csv"))
    (out / "report.md").write_text(render_report(report, "markdown"))


# ---------------------------------------------------------------------------
# comparison and rendering


def compare_sources(report: AuditReport, a: str, b: str) -> dict:
    """Per-column differences (a - b); consistency in percentage points.

    A column missing on either side yields None rather than a zero delta.
    """
    row_a = report.row(a)
    row_b = report.row(b)
    out: dict = {"a": a, "b": b}
    for column in ("precision", "recall", "f1", "accuracy"):
        va, vb = getattr(row_a, column), getattr(row_b, column)
        out[column] = None if va is None or vb is None else va - vb
    for column in ("c_ar", "c_of"):
        va, vb = getattr(row_a, column), getattr(row_b, column)
        out[f"{column}_points"] = None if va is None or vb is None else (va - vb) * 100.0
    return out


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.4f}"


def render_report(report: AuditReport, format: str = "markdown") -> str:
    """Render as markdown (4-decimal cells), CSV, or full-precision JSON."""
    if format == "json":
        return canonical_json(report.to_dict()) + "\n"
    if format == "csv":
        lines = ["source,precision,recall,f1,accuracy,c_ar,c_of"]
        for row in report.rows:
            cells = [
                "" if getattr(row, c) is None else repr(getattr(row, c))
                for c in _REPORT_COLUMNS
            ]
            lines.append(",".join([row.source] + cells))
        return "\n".join(lines) + "\n"
    if format == "markdown":
        lines = [
            "| Model | P | R | F1 | A | C(AR) | C(OF) |",
            "|---|---|---|---|---|---|---|",
        ]
        for row in report.rows:
            cells = [_fmt(getattr(row, c)) for c in _REPORT_COLUMNS]
            lines.append("| " + " | ".join([row.source] + cells) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {format!r}")
