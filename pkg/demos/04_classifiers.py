"""Train the three built-in learners and verify the recurrent net's gradients.

The retrieval classifier votes over nearest training rows; boosted stumps fit
one exact depth-1 split per round to logistic-loss residuals; the recurrent
net reads the five field embeddings in both directions with hand-derived
backpropagation, early stopping, and an optional randomized search.
"""

import numpy as np

from fairaudit import (
    BiRnnClassifier,
    DecisionVector,
    KnnClassifier,
    TrainConfig,
    binarize_labels,
    birnn_train,
    embed_corpus,
    generate_synthetic_corpus,
    gradient_check,
    knn_predict,
    random_search,
    split_corpus,
    train_stumps,
)

profiles, _ = generate_synthetic_corpus(n=600, vocab_size=300, seed=3)
matrix = embed_corpus(profiles, d=64, seed=0)
truth = binarize_labels(profiles, "Type")
split = split_corpus(profiles, seed=1)

position = {pid: i for i, pid in enumerate(matrix.index_order)}
def subset(ids):
    idx = [position[pid] for pid in ids]
    return matrix.data[idx], truth.values[idx]

x_train, y_train = subset(split.train)
x_val, y_val = subset(split.validation)
x_test, y_test = subset(split.test)

# retrieval classifier
from fairaudit.embed import EmbeddingMatrix
train_matrix = EmbeddingMatrix(x_train, 64, matrix.field_order, split.train)
knn = KnnClassifier(k=5).fit(train_matrix, DecisionVector("truth:Type", y_train, split.train))
test_matrix = EmbeddingMatrix(x_test, 64, matrix.field_order, split.test)
knn_acc = np.mean(knn_predict(knn, test_matrix).values == y_test)
print(f"knn (k=5)       test accuracy: {knn_acc:.3f}")

# boosted stumps
config = TrainConfig(rounds=150, learning_rate=0.2, seed=0)
stumps = train_stumps(x_train, y_train, config)
print(f"boosted stumps  test accuracy: {np.mean(stumps.predict(x_test) == y_test):.3f} "
      f"(train loss {stumps.train_loss[0]:.3f} -> {stumps.train_loss[-1]:.3f})")

# bidirectional recurrent net over the 5-field embedding sequence
seq = matrix.data.reshape(matrix.n, 5, 64)
seq_of = lambda ids: seq[[position[pid] for pid in ids]]
config = TrainConfig(max_epochs=20, patience=5, learning_rate=0.15, batch_size=32,
                     seed=0, hidden_dim=24, head_dim=12)
birnn, history = birnn_train(seq_of(split.train), y_train, seq_of(split.validation), y_val, config)
print(f"birnn           test accuracy: {np.mean(birnn.predict(seq_of(split.test)) == y_test):.3f} "
      f"(stopped after {history.epochs_run} epochs, best epoch {history.best_epoch})")

# the hand-derived gradients agree with finite differences on a tiny model
tiny = BiRnnClassifier(4, 3, 4, seed=0)
error = gradient_check(tiny, np.random.default_rng(0).standard_normal((5, 4)), label=1)
print(f"\ngradient check max relative error: {error:.2e}")

# seeded randomized hyperparameter search
config = TrainConfig(max_epochs=8, patience=3, seed=9, search_trials=4,
                     search_space={"hidden_dim": [12, 24], "learning_rate": (0.05, 0.3)},
                     head_dim=12)
result = random_search("birnn", seq_of(split.train), y_train,
                       seq_of(split.validation), y_val, config)
print("\nsearch trials:")
for trial in result.trials:
    marker = " <- winner" if trial.index == result.best_index else ""
    print(f"  {trial.index}: {trial.params} -> val acc {trial.val_accuracy:.3f}{marker}")
