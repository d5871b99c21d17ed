"""Experiment harness: configuration, fold wiring, grid search and reports.

Ties the data pipeline, trainers and metrics together for the two benchmark
families (multi-label classification and image denoising). Every run is
deterministic given its configuration; grid search never touches test data
until a single winner has been chosen on validation error.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import product

import numpy as np

from .data import FoldSpec, ImagePairDataset, MultiLabelDataset, fold_indices
from .metrics import MetricsReport, denoise_errors, label_error_percent
from .spectral_hash import SpectralHashConfig, build_index
from .training import TrainConfig, predict_for_kind, train

# hyperparameter grids used when a grid run does not override them
LR_GRID_MULTILABEL = tuple(2.0 ** -e for e in (4, 6, 8, 10))
LR_GRID_DENOISE = tuple(2.0 ** -e for e in range(0, 15, 2))
HIDDEN_GRID = (32, 64, 128, 256)
GIBBS_K_GRID = (1, 10, 20)
N_BITS_GRID = (5, 7, 9)

TASKS = ("multilabel", "denoise-flip", "denoise-occlude")


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    model: str
    hidden_size: int = 64
    learning_rate: float = 2.0 ** -4
    gibbs_k: int = 10
    n_bits: int = 7
    pca_dims: int | None = None
    epochs: int = 20
    batch_size: int = 128
    patience: int = 10
    predict_k: int = 10
    seed: int = 0
    fold: int = 0
    data: str | None = None

    def train_config(self):
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.epochs,
            gibbs_k=self.gibbs_k,
            patience=self.patience,
            seed=self.seed,
        )


def save_pairs(path, pairs):
    """Store an ImagePairDataset as an .npz archive."""
    np.savez_compressed(
        path, noisy=pairs.noisy, clean=pairs.clean,
        width=np.int64(pairs.width), height=np.int64(pairs.height),
    )


def load_pairs(path):
    with np.load(path) as blob:
        return ImagePairDataset(
            noisy=blob["noisy"], clean=blob["clean"],
            width=int(blob["width"]), height=int(blob["height"]),
        )


def load_task_dataset(cfg):
    if cfg.data is None:
        raise ValueError("no dataset path configured")
    if cfg.task == "multilabel":
        from .data import load_multilabel
        return load_multilabel(cfg.data)
    return load_pairs(cfg.data)


def as_xy(dataset):
    """(inputs, targets) arrays for either dataset kind."""
    if isinstance(dataset, MultiLabelDataset):
        return dataset.inputs, dataset.targets
    return dataset.noisy, dataset.clean


def split_dataset(dataset, fold, seed):
    """Seeded 80/10/10 resplit; returns (train, valid, test) subsets."""
    train_idx, valid_idx, test_idx = fold_indices(FoldSpec(fold=fold, seed=seed), len(dataset))
    return dataset.subset(train_idx), dataset.subset(valid_idx), dataset.subset(test_idx)


def train_experiment(cfg, dataset):
    """Train one model on the configured fold; returns (params, report, index)."""
    train_ds, valid_ds, _ = split_dataset(dataset, cfg.fold, cfg.seed)
    index = None
    if cfg.model == "hashcrbm":
        inputs, targets = as_xy(train_ds)
        index = build_index(inputs, targets,
                            SpectralHashConfig(n_bits=cfg.n_bits, pca_dims=cfg.pca_dims))
    params, report = train(
        cfg.model, as_xy(train_ds), as_xy(valid_ds), cfg.train_config(),
        n_hidden=cfg.hidden_size, index=index,
    )
    return params, report, index


def predict_experiment(cfg, params, inputs, index=None):
    return predict_for_kind(cfg.model, params, inputs, cfg.predict_k, index=index)


def evaluate_split(cfg, dataset, params=None, index=None, baseline=False, split="test"):
    """Metric tuple on one split: (error,) for multilabel, (all, changed) for denoise."""
    parts = dict(zip(("train", "valid", "test"), split_dataset(dataset, cfg.fold, cfg.seed)))
    part = parts[split]
    inputs, targets = as_xy(part)
    if baseline:
        preds = (np.asarray(inputs, dtype=np.float64) >= 0.5).astype(np.uint8)
    else:
        preds = predict_experiment(cfg, params, inputs, index=index)
    if cfg.task == "multilabel":
        return (label_error_percent(preds, targets),)
    return denoise_errors(preds, targets, inputs)


def metric_columns(task):
    return ("error",) if task == "multilabel" else ("all", "changed")


def grid_combinations(cfg, axes):
    """Expand {field: [values]} into configs, preserving enumeration order."""
    names = list(axes)
    combos = []
    for values in product(*(axes[n] for n in names)):
        combos.append(replace(cfg, **dict(zip(names, values))))
    return combos


def run_grid(cfg, dataset, axes):
    """Train every combination, select on validation error, test the winner only.

    Returns (winner config, winner params, winner index, records, test row)
    where records is a list of (config, best validation error) in enumeration
    order and ties go to the earliest combination.
    """
    combos = grid_combinations(cfg, axes)
    if not combos:
        raise ValueError("empty grid")
    records = []
    best = None
    for combo in combos:
        params, report, index = train_experiment(combo, dataset)
        valid_err = report.best_valid_error
        records.append((combo, valid_err))
        if best is None or valid_err < best[1]:
            best = (combo, valid_err, params, index, report)
    winner, _, params, index, report = best
    test_row = evaluate_split(winner, dataset, params=params, index=index, split="test")
    return winner, params, index, records, test_row, report


def write_report(path, kv, table=None):
    """Line-oriented key=value records followed by an optional TSV table."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in kv.items():
            if isinstance(value, (list, tuple, np.ndarray)):
                value = ",".join(str(x) for x in value)
            fh.write(f"{key}={value}\n")
        if table is not None:
            fh.write("\n")
            fh.write(table.to_tsv())
