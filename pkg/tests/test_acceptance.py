"""Acceptance suite: one test per release criterion, at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail line
per criterion as it completes.
"""

import json
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from fairaudit import (
    AuditConfig,
    BiRnnClassifier,
    DecisionVector,
    EmbeddingMatrix,
    NeighborList,
    RaterConfig,
    TrainConfig,
    attach_stage_labels,
    birnn_train,
    classification_metrics,
    consistency,
    generate_synthetic_corpus,
    gradient_check,
    knn_batched,
    knn_exact,
    run_audit,
    save_corpus,
    simulate_raters,
    train_stumps,
)


@contextmanager
def criterion(number: int, description: str):
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[criterion {number:2d}] FAIL {description}")
        raise
    print(f"[criterion {number:2d}] PASS {description} ({time.perf_counter() - started:.1f}s)")


def neighbor_list(rows, ids, k):
    rows = np.asarray(rows, dtype=np.int64)
    return NeighborList(k, rows, np.zeros_like(rows, dtype=np.float64), "cosine", True, tuple(ids))


def decisions(values, ids, source="test"):
    return DecisionVector(source, np.asarray(values), tuple(ids))


def biased_corpus(path, seed):
    profiles, latents = generate_synthetic_corpus(870, 400, seed=100 + seed)
    rater = RaterConfig(noise_sigma=0.25, bias_shift={1: 0.2}, seed=200 + seed)
    simulated = simulate_raters(profiles, latents, rater)
    save_corpus(attach_stage_labels(profiles, simulated), path)
    return path


def test_criterion_1_consistency_exactness():
    with criterion(1, "consistency score exact on hand fixtures"):
        started = time.perf_counter()
        ids = ["a", "b", "c", "d"]
        # constant decisions: every gap is zero
        ring = neighbor_list([[1, 2], [2, 3], [3, 0], [0, 1]], ids, k=2)
        for constant in (0, 1):
            assert abs(consistency(decisions([constant] * 4, ids), ring).score - 1.0) <= 1e-12
        # alternating pairs with k=1: every gap is one
        pairs = neighbor_list([[1], [0], [3], [2]], ids, k=1)
        assert abs(consistency(decisions([1, 0, 1, 0], ids), pairs).score - 0.0) <= 1e-12
        # three ones and a zero, k=3: gaps (1/3, 1/3, 1/3, 1) so C = 0.5
        everyone = neighbor_list([[j for j in range(4) if j != i] for i in range(4)], ids, k=3)
        assert abs(consistency(decisions([1, 1, 1, 0], ids), everyone).score - 0.5) <= 1e-12
        assert time.perf_counter() - started < 1.0


def brute_force_consistency(data, values, k):
    """O(N^2) recomputation from raw embeddings with plain loops."""
    n = len(data)
    normalized = []
    for row in data:
        norm = math.sqrt(float(sum(x * x for x in row)))
        normalized.append([x / norm for x in row] if norm > 0 else list(row))
    gaps = []
    for i in range(n):
        scored = []
        for j in range(n):
            if j == i:
                continue
            scored.append((-float(np.dot(normalized[i], normalized[j])), j))
        scored.sort()
        mean = sum(int(values[j]) for _, j in scored[:k]) / k
        gaps.append(abs(float(values[i]) - mean))
    return 1.0 - math.fsum(gaps) / n


def test_criterion_2_oracle_equivalence():
    with criterion(2, "batched search matches brute-force consistency exactly"):
        started = time.perf_counter()
        for seed in range(50):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(20, 201))
            d = int(rng.integers(4, 65))
            data = rng.standard_normal((n, d))
            values = rng.integers(0, 2, n)
            ids = tuple(f"P{i}" for i in range(n))
            matrix = EmbeddingMatrix(data, d, ("f0",), ids)
            k = int(rng.integers(1, 8))
            batched = knn_batched(matrix, k, batch_size=int(rng.integers(1, n + 10)))
            got = consistency(decisions(values, ids), batched).score
            assert got == brute_force_consistency(data, values, k)
            exact = knn_exact(matrix, k)
            assert np.array_equal(batched.neighbors, exact.neighbors)
            assert np.max(np.abs(batched.scores - exact.scores)) <= 1e-6
        assert time.perf_counter() - started < 30.0


def test_criterion_3_consistency_bounds_and_symmetry():
    with criterion(3, "consistency bounded in [0,1] and label-flip symmetric"):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n = int(rng.integers(2, 30))
            k = int(rng.integers(1, min(6, n)))
            rows = np.empty((n, k), dtype=np.int64)
            for i in range(n):
                rows[i] = rng.choice(np.delete(np.arange(n), i), k, replace=False)
            ids = tuple(f"P{i}" for i in range(n))
            nl = neighbor_list(rows, ids, k)
            values = rng.integers(0, 2, n)
            result = consistency(decisions(values, ids), nl)
            flipped = consistency(decisions(1 - values, ids), nl)
            assert 0.0 <= result.score <= 1.0
            assert abs(result.score - flipped.score) <= 1e-12


def naive_metrics(predicted, truth, averaging):
    tp = int(np.sum((predicted == 1) & (truth == 1)))
    fp = int(np.sum((predicted == 1) & (truth == 0)))
    fn = int(np.sum((predicted == 0) & (truth == 1)))
    tn = int(np.sum((predicted == 0) & (truth == 0)))
    n = len(truth)

    def prf(tp_, fp_, fn_):
        p = tp_ / (tp_ + fp_) if tp_ + fp_ else 0.0
        r = tp_ / (tp_ + fn_) if tp_ + fn_ else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return p, r, f

    pos, neg = prf(tp, fp, fn), prf(tn, fn, fp)
    if averaging == "binary":
        p, r, f = pos
    elif averaging == "macro":
        p, r, f = ((x + y) / 2 for x, y in zip(pos, neg))
    else:
        p, r, f = (((tp + fn) * x + (tn + fp) * y) / n for x, y in zip(pos, neg))
    return p, r, f, (tp + tn) / n


def test_criterion_4_metrics_oracle():
    with criterion(4, "classification metrics match the counting oracle to 1e-12"):
        truth = decisions([1, 1, 0, 0], ("a", "b", "c", "d"), source="truth")
        predicted = decisions([1, 0, 1, 0], ("a", "b", "c", "d"), source="pred")
        hand = classification_metrics(predicted, truth, "binary")
        assert hand.confusion == (1, 1, 1, 1)
        assert (hand.precision, hand.recall, hand.f1, hand.accuracy) == (0.5, 0.5, 0.5, 0.5)
        rng = np.random.default_rng(11)
        for _ in range(1000):
            n = int(rng.integers(1, 50))
            ids = tuple(f"P{i}" for i in range(n))
            t = rng.integers(0, 2, n)
            p = rng.integers(0, 2, n)
            for mode in ("binary", "macro", "weighted"):
                m = classification_metrics(decisions(p, ids), decisions(t, ids, "truth"), mode)
                ep, er, ef, ea = naive_metrics(p, t, mode)
                assert abs(m.precision - ep) <= 1e-12
                assert abs(m.recall - er) <= 1e-12
                assert abs(m.f1 - ef) <= 1e-12
                assert abs(m.accuracy - ea) <= 1e-12


def test_criterion_5_gradient_correctness():
    with criterion(5, "recurrent-net gradients match finite differences"):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            clf = BiRnnClassifier(4, 3, 4, seed=seed)
            sequence = rng.standard_normal((5, 4))
            assert gradient_check(clf, sequence, label=seed % 2) < 1e-4
        rng = np.random.default_rng(0)
        clf = BiRnnClassifier(4, 3, 4, seed=0)
        broken = gradient_check(clf, rng.standard_normal((5, 4)), 1, perturb_param="w_1")
        assert broken > 1e-1


def separable_sequences(n, d, seed, noise=0.3):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, n)
    direction = np.zeros(d)
    direction[0] = 1.0
    x = noise * rng.standard_normal((n, 5, d))
    x += np.where(labels[:, None, None] == 1, 1.0, -1.0) * direction
    return x, labels


def test_criterion_6_learner_sanity():
    with criterion(6, "stumps solve the 1-D fixture; recurrent net fits separable data"):
        started = time.perf_counter()
        x = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0, 0, 1, 1])
        stumps = train_stumps(x, y, TrainConfig(rounds=50, learning_rate=0.3))
        assert np.array_equal(stumps.predict(x), y)
        xt, yt = separable_sequences(240, 8, seed=0)
        xv, yv = separable_sequences(80, 8, seed=1)
        config = TrainConfig(max_epochs=20, patience=5, learning_rate=0.1,
                             batch_size=32, seed=0, hidden_dim=8, head_dim=8)
        _, history = birnn_train(xt, yt, xv, yv, config)
        assert history.best_val_accuracy >= 0.95
        assert history.epochs_run <= 20
        assert time.perf_counter() - started < 60.0


def test_criterion_7_early_stopping():
    with criterion(7, "early stopping: frozen run stops at 1+patience, improving run at max"):
        xt, yt = separable_sequences(240, 8, seed=0)
        xv, yv = separable_sequences(80, 8, seed=1)
        frozen = TrainConfig(max_epochs=20, patience=5, learning_rate=0.0,
                             batch_size=32, seed=0, hidden_dim=8, head_dim=8)
        _, history = birnn_train(xt, yt, xv, yv, frozen)
        assert history.epochs_run == 1 + 5
        improving = TrainConfig(max_epochs=2, patience=1, learning_rate=0.1,
                                batch_size=32, seed=0, hidden_dim=8, head_dim=8)
        _, history = birnn_train(xt, yt, xv, yv, improving)
        assert history.val_accuracy[1] > history.val_accuracy[0]  # genuinely improving
        assert history.epochs_run == improving.max_epochs


def test_criterion_8_directional_reproduction(tmp_path):
    with criterion(8, "trained models beat biased human offers by >= 5 consistency points"):
        started = time.perf_counter()
        stumps_wins = birnn_wins = 0
        for seed in range(5):
            corpus = biased_corpus(tmp_path / f"c{seed}.jsonl", seed)
            config = AuditConfig(d=128, k=5, seed=seed, max_epochs=12, patience=5,
                                 rounds=120, hidden_dim=24, head_dim=12, learning_rate=0.15)
            report = run_audit(corpus, config)
            assert tuple(r.source for r in report.rows) == (
                "human:SL", "human:AR", "human:OF",
                "model:knn", "model:gbstumps", "model:birnn",
            )
            assert all(report.metadata[key] is not None
                       for key in ("k", "metric", "averaging", "seed", "corpus_size"))
            human = report.row("human:OF").c_of
            stumps_wins += report.row("model:gbstumps").c_of - human >= 0.05
            birnn_wins += report.row("model:birnn").c_of - human >= 0.05
        assert stumps_wins >= 4, f"stumps beat human in only {stumps_wins}/5 seeds"
        assert birnn_wins >= 4, f"birnn beat human in only {birnn_wins}/5 seeds"
        assert time.perf_counter() - started < 300.0


def test_criterion_9_end_to_end_determinism(tmp_path):
    with criterion(9, "audit reruns byte-identical; report carries the exact column set"):
        corpus = biased_corpus(tmp_path / "c.jsonl", seed=9)
        config = AuditConfig(d=16, k=5, seed=42, max_epochs=3, patience=3,
                             rounds=20, hidden_dim=8, head_dim=8)
        for run_name in ("run1", "run2"):
            run_audit(corpus, config, out_dir=tmp_path / run_name)
        payloads = []
        for run_name in ("run1", "run2"):
            obj = json.loads((tmp_path / run_name / "report.json").read_text())
            obj["metadata"].pop("timestamp")
            payloads.append(json.dumps(obj, sort_keys=True).encode())
        assert payloads[0] == payloads[1]
        report = json.loads((tmp_path / "run1" / "report.json").read_text())
        expected = {"source", "precision", "recall", "f1", "accuracy", "c_ar", "c_of"}
        for row in report["rows"]:
            assert set(row) == expected


def test_criterion_10_monotone_bias_response():
    with criterion(10, "human consistency non-increasing as rater noise grows"):
        from fairaudit import embed_corpus, knn_feature_reranked

        sigmas = (0.0, 0.1, 0.2, 0.4)
        curves = []
        for seed in range(5):
            profiles, latents = generate_synthetic_corpus(600, 300, seed=300 + seed)
            matrix = embed_corpus(profiles, d=64, seed=seed)
            structure = knn_feature_reranked(matrix, 5)
            row = []
            for sigma in sigmas:
                rater = RaterConfig(noise_sigma=sigma, seed=400 + seed)
                simulated = simulate_raters(profiles, latents, rater)
                row.append(consistency(simulated["OF"], structure).score)
            curves.append(row)
        mean = np.mean(curves, axis=0)
        inversions = sum(mean[i + 1] > mean[i] + 1e-12 for i in range(len(sigmas) - 1))
        assert inversions <= 1, f"mean consistency {mean} rose more than once"
