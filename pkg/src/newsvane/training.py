"""Mini-batch training with Adam, classification metrics, and grid search.

A training run is deterministic for a fixed (data, config, seed): the epoch
shuffle and the dropout masks draw from separate named seed streams, batch
gradients are accumulated in a fixed sample order and averaged, and Adam
updates are applied in a fixed tensor order.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, replace
from itertools import product
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .embeddings import MODE_STATIC, EmbeddingTable
from .fileio import write_json_atomic, write_text_atomic
from .network import (
    HEAD_BINARY,
    ModelConfig,
    ModelParameters,
    backward,
    forward,
    init_parameters,
    sample_loss,
)
from .seeding import derive_seed
from .text import EncodedHeadline

Dataset = Sequence[tuple[EncodedHeadline, int]]


@dataclass
class AdamState:
    """First/second moment accumulators and hyperparameters for Adam."""

    lr: float
    beta1: float
    beta2: float
    eps: float
    t: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    frozen: frozenset[str]

    @classmethod
    def initialize(
        cls,
        tensors: dict[str, np.ndarray],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        frozen: Sequence[str] = (),
    ) -> "AdamState":
        return cls(
            lr=lr, beta1=beta1, beta2=beta2, eps=eps, t=0,
            m={k: np.zeros_like(a) for k, a in tensors.items()},
            v={k: np.zeros_like(a) for k, a in tensors.items()},
            frozen=frozenset(frozen),
        )


def adam_step(
    tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState
) -> None:
    """One Adam update, in place, with bias correction.

    theta -= lr * m_hat / (sqrt(v_hat) + eps). Tensors listed in
    ``state.frozen`` are skipped entirely.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for name, theta in tensors.items():
        if name in state.frozen:
            continue
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for tensor {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        theta -= state.lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_loss: float
    accuracy: float


@dataclass
class TrainResult:
    params: ModelParameters
    trace: list[EpochStats]


def _named_tensors(params: ModelParameters, table: EmbeddingTable) -> dict[str, np.ndarray]:
    tensors = dict(params.tensors())
    tensors["embeddings"] = table.matrix
    return tensors


def train(
    dataset: Dataset,
    table: EmbeddingTable,
    params: ModelParameters,
    config: ModelConfig,
    epochs: int,
    batch_size: int,
    seed: int,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> TrainResult:
    """Train in place for ``epochs`` passes of shuffled mini-batches.

    Batch gradients are the mean over the batch, so the learning rate does
    not depend on batch size; the final partial batch is processed. The
    embedding matrix is updated through the same optimizer unless the table
    is static, and its padding row is pinned back to zero after every step.
    Returns the (mutated) parameters plus a per-epoch loss/accuracy trace.
    """
    if not dataset:
        raise ValueError("training dataset is empty")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    if epochs == 0:
        return TrainResult(params=params, trace=[])

    shuffle_rng = np.random.default_rng(derive_seed(seed, "shuffle"))
    dropout_rng = np.random.default_rng(derive_seed(seed, "dropout"))
    frozen = {"embeddings"} if table.mode == MODE_STATIC else set()
    state = AdamState.initialize(
        _named_tensors(params, table), lr=lr, beta1=beta1, beta2=beta2, eps=eps, frozen=frozen
    )

    n = len(dataset)
    trace: list[EpochStats] = []
    for epoch in range(epochs):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            acc_params = ModelParameters.zeros_like(params)
            acc_emb = np.zeros_like(table.matrix)
            for idx in batch:
                enc, y = dataset[idx]
                output, cache = forward(enc, table, params, config, mode="train", rng=dropout_rng)
                loss_sum += sample_loss(output, y, config.head)
                correct += int(_predicted_class(output, config.head, 0.5) == y)
                g = backward(cache, y, params, config, table)
                acc_params.add_scaled(g.params)
                acc_emb += g.embeddings
            scale = 1.0 / len(batch)
            grads = {name: g * scale for name, g in acc_params.tensors()}
            grads["embeddings"] = acc_emb * scale
            adam_step(_named_tensors(params, table), grads, state)
            table.matrix[0] = 0.0  # padding row stays frozen in every mode
        trace.append(EpochStats(epoch=epoch, mean_loss=loss_sum / n, accuracy=correct / n))
    return TrainResult(params=params, trace=trace)


def _predicted_class(output: float | np.ndarray, head: str, threshold: float) -> int:
    if head == HEAD_BINARY:
        return 1 if float(output) >= threshold else 0
    return int(np.argmax(np.asarray(output)))


# --- metrics ----------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    """Accuracy, precision, recall and F1 plus the raw confusion counts.

    Binary reports carry tp/fp/fn/tn; multiclass reports carry the full 3x3
    confusion matrix (rows true, columns predicted) and score the 'buy'
    class against the rest, matching how the predictions are consumed by the
    trading layer. Zero denominators yield 0 by convention.
    """

    head: str
    n_samples: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int | None = None
    fp: int | None = None
    fn: int | None = None
    tn: int | None = None
    confusion: tuple[tuple[int, ...], ...] | None = None

    def to_dict(self) -> dict:
        d = {
            "head": self.head,
            "n_samples": self.n_samples,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }
        if self.head == HEAD_BINARY:
            d.update(tp=self.tp, fp=self.fp, fn=self.fn, tn=self.tn)
        else:
            d["confusion"] = [list(row) for row in self.confusion]
        return d


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def binary_metrics(tp: int, fp: int, fn: int, tn: int) -> MetricsReport:
    total = tp + fp + fn + tn
    precision, recall, f1 = _prf(tp, fp, fn)
    return MetricsReport(
        head=HEAD_BINARY, n_samples=total,
        accuracy=(tp + tn) / total if total else 0.0,
        precision=precision, recall=recall, f1=f1,
        tp=tp, fp=fp, fn=fn, tn=tn,
    )


def multiclass_metrics(confusion: np.ndarray) -> MetricsReport:
    """Metrics from a 3x3 confusion matrix; buy (class 2) is the positive class."""
    confusion = np.asarray(confusion, dtype=np.int64)
    total = int(confusion.sum())
    tp = int(confusion[2, 2])
    fp = int(confusion[0, 2] + confusion[1, 2])
    fn = int(confusion[2, 0] + confusion[2, 1])
    precision, recall, f1 = _prf(tp, fp, fn)
    return MetricsReport(
        head="multiclass3", n_samples=total,
        accuracy=float(np.trace(confusion)) / total if total else 0.0,
        precision=precision, recall=recall, f1=f1,
        confusion=tuple(tuple(int(x) for x in row) for row in confusion),
    )


def evaluate(
    dataset: Dataset,
    table: EmbeddingTable,
    params: ModelParameters,
    config: ModelConfig,
    class_threshold: float = 0.5,
) -> MetricsReport:
    """Test-mode evaluation: binary predicts 1 iff sigma >= threshold,
    multiclass predicts the argmax class."""
    if not dataset:
        raise ValueError("evaluation dataset is empty")
    if config.head == HEAD_BINARY:
        tp = fp = fn = tn = 0
        for enc, y in dataset:
            output, _ = forward(enc, table, params, config, mode="test")
            pred = _predicted_class(output, config.head, class_threshold)
            if pred == 1 and y == 1:
                tp += 1
            elif pred == 1 and y == 0:
                fp += 1
            elif pred == 0 and y == 1:
                fn += 1
            else:
                tn += 1
        return binary_metrics(tp, fp, fn, tn)
    confusion = np.zeros((3, 3), dtype=np.int64)
    for enc, y in dataset:
        output, _ = forward(enc, table, params, config, mode="test")
        confusion[y, _predicted_class(output, config.head, class_threshold)] += 1
    return multiclass_metrics(confusion)


# --- grid search ------------------------------------------------------------


@dataclass(frozen=True)
class GridAxes:
    """Axes of the exhaustive hyperparameter search."""

    epochs: tuple[int, ...]
    dropout: tuple[float, ...]
    width_sets: tuple[tuple[int, ...], ...]
    modes: tuple[str, ...]


@dataclass(frozen=True)
class GridResult:
    config_id: int
    widths: tuple[int, ...]
    mode: str
    dropout: float
    epochs: int
    accuracy: float
    f1: float


TableFactory = Callable[[str, int], EmbeddingTable]


def _dedup(values: tuple, axis_name: str) -> tuple:
    seen: list = []
    for v in values:
        if v in seen:
            warnings.warn(f"duplicate value {v!r} in grid axis {axis_name!r}; deduplicated")
        else:
            seen.append(v)
    return tuple(seen)


def _cell_seeds(seed: int, cell_id: int) -> tuple[int, int, int]:
    return (
        derive_seed(seed, f"grid-cell-{cell_id}-table"),
        derive_seed(seed, f"grid-cell-{cell_id}-params"),
        derive_seed(seed, f"grid-cell-{cell_id}-train"),
    )


def _run_grid_cell(args: tuple) -> GridResult:
    (cell_id, widths, mode, dropout, epochs, base_config, total_filters,
     train_set, selection_set, table_factory, seed, batch_size, lr) = args
    if total_filters % len(widths) != 0:
        raise ValueError(
            f"total_filters={total_filters} is not divisible by the {len(widths)} widths {widths}"
        )
    config = replace(
        base_config,
        filter_widths=widths,
        filters_per_width=total_filters // len(widths),
        dropout_rate=dropout,
    )
    table_seed, params_seed, train_seed = _cell_seeds(seed, cell_id)
    table = table_factory(mode, table_seed)
    params = init_parameters(config, np.random.default_rng(derive_seed(params_seed, "params-init")))
    train(train_set, table, params, config, epochs=epochs, batch_size=batch_size,
          seed=train_seed, lr=lr)
    metrics = evaluate(selection_set, table, params, config)
    return GridResult(
        config_id=cell_id, widths=widths, mode=mode, dropout=dropout, epochs=epochs,
        accuracy=metrics.accuracy, f1=metrics.f1,
    )


def grid_search(
    train_set: Dataset,
    selection_set: Dataset,
    base_config: ModelConfig,
    axes: GridAxes,
    table_factory: TableFactory,
    seed: int,
    total_filters: int | None = None,
    batch_size: int = 32,
    lr: float = 1e-3,
    parallel: bool = False,
) -> list[GridResult]:
    """Exhaustively train and score every axis combination.

    Each cell starts from a fresh seeded table and parameter init, so cells
    are independent and may run in parallel. ``total_filters`` is held
    constant across width sets (filters_per_width = total / #widths), so a
    three-width cell is not three times larger than a one-width cell. The
    result list is ranked by F1 descending, ties broken by accuracy then by
    the lexicographic (widths, mode, dropout, epochs) key.
    """
    epochs_axis = _dedup(tuple(axes.epochs), "epochs")
    dropout_axis = _dedup(tuple(axes.dropout), "dropout")
    width_axis = _dedup(tuple(tuple(w) for w in axes.width_sets), "width_sets")
    mode_axis = _dedup(tuple(axes.modes), "modes")
    if not (epochs_axis and dropout_axis and width_axis and mode_axis):
        raise ValueError("every grid axis must be non-empty")
    if total_filters is None:
        total_filters = base_config.total_filters

    cells = []
    for cell_id, (widths, mode, dropout, epochs) in enumerate(
        product(width_axis, mode_axis, dropout_axis, epochs_axis)
    ):
        cells.append((cell_id, widths, mode, dropout, epochs, base_config, total_filters,
                      train_set, selection_set, table_factory, seed, batch_size, lr))

    if parallel and len(cells) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor() as pool:
            results = list(pool.map(_run_grid_cell, cells))
    else:
        results = [_run_grid_cell(c) for c in cells]

    results.sort(key=lambda r: (-r.f1, -r.accuracy, (r.widths, r.mode, r.dropout, r.epochs)))
    return results


def grid_csv(results: list[GridResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["config_id", "widths", "mode", "dropout", "epochs", "accuracy", "f1"])
    for r in results:
        writer.writerow(
            [r.config_id, "|".join(str(h) for h in r.widths), r.mode, repr(r.dropout),
             r.epochs, repr(r.accuracy), repr(r.f1)]
        )
    return buf.getvalue()


def write_grid_results(results: list[GridResult], csv_path: str | Path, summary_path: str | Path) -> None:
    write_text_atomic(csv_path, grid_csv(results))
    best = results[0]
    write_json_atomic(
        summary_path,
        {
            "best": {
                "config_id": best.config_id,
                "widths": list(best.widths),
                "mode": best.mode,
                "dropout": best.dropout,
                "epochs": best.epochs,
                "accuracy": best.accuracy,
                "f1": best.f1,
            },
            "n_cells": len(results),
        },
    )
