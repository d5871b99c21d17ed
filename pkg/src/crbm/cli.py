"""Command-line entry point.

Subcommands: train, evaluate, grid, render, hash-index, make-noise and
make-data. Every run is reproducible from its flags; a ``--config`` file of
``key=value`` lines supplies defaults that explicit flags override.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .data import binarize, load_idx_images, save_idx_images, save_multilabel
from .datagen import correlated_label_dataset, digit_corpus, make_pair_images
from .harness import (
    ExperimentConfig,
    GIBBS_K_GRID,
    HIDDEN_GRID,
    LR_GRID_DENOISE,
    LR_GRID_MULTILABEL,
    N_BITS_GRID,
    TASKS,
    evaluate_split,
    load_task_dataset,
    metric_columns,
    run_grid,
    save_pairs,
    split_dataset,
    train_experiment,
    write_report,
)
from .data import ImagePairDataset
from .metrics import MetricsReport
from .render import render_denoising_grid, write_ppm
from .spectral_hash import SpectralHashConfig, build_index, load_index, save_index
from .training import load_checkpoint, predict_for_kind, report_meta, save_checkpoint

MODELS = ("logreg", "cd", "percloss", "hashcrbm")


def _inject_config(argv):
    """Replace ``--config FILE`` with the file's key=value pairs as flags."""
    out = list(argv)
    for i, tok in enumerate(out):
        path = None
        if tok == "--config" and i + 1 < len(out):
            path = out[i + 1]
            del out[i:i + 2]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
            del out[i]
        if path is None:
            continue
        injected = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, value = line.partition("=")
                injected.append(f"--{key.strip().replace('_', '-')}={value.strip()}")
        return out[:1] + injected + out[1:]
    return out


def _experiment_flags(sp, with_model=True):
    sp.add_argument("--task", required=True, choices=TASKS)
    sp.add_argument("--data", required=True, help="multilabel text file or pair .npz")
    if with_model:
        sp.add_argument("--model", required=True, choices=MODELS)
    sp.add_argument("--hidden", type=int, default=64)
    sp.add_argument("--lr", type=float, default=2.0 ** -4)
    sp.add_argument("--k", type=int, default=10, help="Gibbs / mean-field steps during training")
    sp.add_argument("--n-bits", type=int, default=7)
    sp.add_argument("--pca-dims", type=int, default=None)
    sp.add_argument("--epochs", type=int, default=20)
    sp.add_argument("--batch-size", type=int, default=128)
    sp.add_argument("--patience", type=int, default=10)
    sp.add_argument("--predict-k", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--fold", type=int, default=0)


def _config_from(args, model=None):
    return ExperimentConfig(
        task=args.task,
        model=model if model is not None else args.model,
        hidden_size=args.hidden,
        learning_rate=args.lr,
        gibbs_k=args.k,
        n_bits=args.n_bits,
        pca_dims=args.pca_dims,
        epochs=args.epochs,
        batch_size=args.batch_size,
        patience=args.patience,
        predict_k=args.predict_k,
        seed=args.seed,
        fold=args.fold,
        data=args.data,
    )


def _checkpoint_meta(cfg, report):
    return report_meta(
        cfg.model, cfg.train_config(), report,
        task=cfg.task, hidden_size=cfg.hidden_size, n_bits=cfg.n_bits,
        predict_k=cfg.predict_k, fold=cfg.fold, data=cfg.data,
    )


def cmd_train(args):
    cfg = _config_from(args)
    dataset = load_task_dataset(cfg)
    params, report, index = train_experiment(cfg, dataset)
    save_checkpoint(args.out, params, _checkpoint_meta(cfg, report))
    if index is not None:
        index_out = args.index_out or f"{args.out}.shidx"
        save_index(index_out, index)
        print(f"index={index_out}")
    if args.report:
        write_report(args.report, _checkpoint_meta(cfg, report))
    print(f"checkpoint={args.out}")
    print(f"best_epoch={report.best_epoch}")
    print(f"valid_error={report.best_valid_error:.6g}")
    return 0


def _resolve_eval_model(args, cfg):
    """Model kind and parameters for evaluation, from checkpoint or baseline."""
    if args.baseline:
        return cfg, None, None
    if not args.checkpoint:
        raise ValueError("evaluate needs --checkpoint or --baseline")
    params, meta = load_checkpoint(args.checkpoint)
    from dataclasses import replace
    cfg = replace(cfg, model=meta.get("model", "logreg"))
    index = None
    if cfg.model == "hashcrbm":
        index_path = args.index or f"{args.checkpoint}.shidx"
        index = load_index(index_path)
    return cfg, params, index


def cmd_evaluate(args):
    cfg = _config_from(args, model="logreg")
    cfg, params, index = _resolve_eval_model(args, cfg)
    dataset = load_task_dataset(cfg)
    row = evaluate_split(cfg, dataset, params=params, index=index,
                         baseline=args.baseline, split=args.split)
    table = MetricsReport(task=cfg.task, columns=metric_columns(cfg.task))
    table.add_row("baseline" if args.baseline else cfg.model, row)
    for name, value in zip(table.columns, row):
        print(f"{name}={value:.6g}")
    print(table.to_tsv(), end="")
    if args.report:
        kv = {"task": cfg.task, "model": "baseline" if args.baseline else cfg.model,
              "split": args.split, "data": cfg.data}
        write_report(args.report, kv, table)
    return 0


def _parse_list(text, cast):
    return tuple(cast(tok) for tok in text.split(",") if tok)


def cmd_grid(args):
    cfg = _config_from(args)
    dataset = load_task_dataset(cfg)
    default_lr = LR_GRID_MULTILABEL if cfg.task == "multilabel" else LR_GRID_DENOISE
    axes = {"learning_rate": _parse_list(args.lr_grid, float) if args.lr_grid else default_lr}
    if cfg.model != "logreg":
        axes["hidden_size"] = _parse_list(args.hidden_grid, int) if args.hidden_grid else HIDDEN_GRID
    if cfg.model in ("cd", "percloss"):
        axes["gibbs_k"] = _parse_list(args.k_grid, int) if args.k_grid else GIBBS_K_GRID
    if cfg.model == "hashcrbm":
        axes["n_bits"] = _parse_list(args.n_bits_grid, int) if args.n_bits_grid else N_BITS_GRID
    winner, params, index, records, test_row, report = run_grid(cfg, dataset, axes)
    table = MetricsReport(task=cfg.task, columns=("valid",))
    for combo, valid_err in records:
        label = ",".join(f"{k}={getattr(combo, k)}" for k in axes)
        table.add_row(label, (valid_err,))
    print(f"winner={','.join(f'{k}={getattr(winner, k)}' for k in axes)}")
    for name, value in zip(metric_columns(cfg.task), test_row):
        print(f"test_{name}={value:.6g}")
    if args.out:
        save_checkpoint(args.out, params, _checkpoint_meta(winner, report))
        if index is not None:
            save_index(f"{args.out}.shidx", index)
    if args.report:
        kv = {"task": cfg.task, "model": cfg.model, "data": cfg.data,
              "winner": ",".join(f"{k}={getattr(winner, k)}" for k in axes)}
        for name, value in zip(metric_columns(cfg.task), test_row):
            kv[f"test_{name}"] = f"{value:.6g}"
        write_report(args.report, kv, table)
    return 0


def cmd_render(args):
    cfg = _config_from(args, model="logreg")
    cfg, params, index = _resolve_eval_model(args, cfg)
    dataset = load_task_dataset(cfg)
    if not isinstance(dataset, ImagePairDataset):
        raise ValueError("render works on image pair datasets")
    part = dict(zip(("train", "valid", "test"),
                    split_dataset(dataset, cfg.fold, cfg.seed)))[args.split]
    count = min(args.count, len(part))
    noisy = part.noisy[:count]
    clean = part.clean[:count]
    if args.baseline:
        preds = (noisy >= 0.5).astype(np.uint8)
    else:
        preds = predict_for_kind(cfg.model, params, noisy, cfg.predict_k, index=index)
    grid = render_denoising_grid(noisy, preds, clean, dataset.width, dataset.height)
    write_ppm(args.out, grid)
    print(f"figure={args.out}")
    return 0


def cmd_hash_index(args):
    from .data import load_multilabel
    dataset = load_multilabel(args.data)
    train_ds, _, _ = split_dataset(dataset, args.fold, args.seed)
    index = build_index(train_ds.inputs, train_ds.targets,
                        SpectralHashConfig(n_bits=args.n_bits, pca_dims=args.pca_dims))
    save_index(args.out, index)
    print(f"index={args.out}")
    print(f"buckets={len(index.table)}")
    return 0


def cmd_make_noise(args):
    images, rows, cols = load_idx_images(args.images)
    if args.count is not None:
        images = images[:args.count]
    clean = binarize(images)
    rng = np.random.default_rng(args.seed)
    noisy = make_pair_images(clean, args.kind, rng, cols, rows,
                             rate=args.rate, patch=args.patch)
    save_pairs(args.out, ImagePairDataset(noisy=noisy, clean=clean, width=cols, height=rows))
    print(f"pairs={args.out}")
    print(f"count={len(clean)}")
    return 0


def cmd_make_data(args):
    if args.kind == "digits":
        train, valid, test = digit_corpus(args.n, max(args.n // 5, 1), max(args.n // 2, 1),
                                          seed=args.seed)
        images = np.concatenate([train, valid, test], axis=0)
        save_idx_images(args.out, images, 28, 28)
        print(f"images={args.out}")
        print(f"count={len(images)}")
    else:
        dataset = correlated_label_dataset(args.n, seed=args.seed)
        save_multilabel(args.out, dataset)
        print(f"data={args.out}")
        print(f"count={len(dataset)}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="crbm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", help="train one model on one fold")
    _experiment_flags(sp)
    sp.add_argument("--out", required=True, help="checkpoint path")
    sp.add_argument("--index-out", default=None)
    sp.add_argument("--report", default=None)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="score a checkpoint or the identity baseline")
    _experiment_flags(sp, with_model=False)
    sp.add_argument("--checkpoint", default=None)
    sp.add_argument("--index", default=None)
    sp.add_argument("--baseline", action="store_true", help="predict the noisy input itself")
    sp.add_argument("--split", default="test", choices=("train", "valid", "test"))
    sp.add_argument("--report", default=None)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("grid", help="grid search; test error reported for the winner only")
    _experiment_flags(sp)
    sp.add_argument("--lr-grid", default=None, help="comma list of learning rates")
    sp.add_argument("--hidden-grid", default=None)
    sp.add_argument("--k-grid", default=None)
    sp.add_argument("--n-bits-grid", default=None)
    sp.add_argument("--out", default=None, help="checkpoint path for the winner")
    sp.add_argument("--report", default=None)
    sp.set_defaults(func=cmd_grid)

    sp = sub.add_parser("render", help="write a noisy/prediction/clean PPM grid")
    _experiment_flags(sp, with_model=False)
    sp.add_argument("--checkpoint", default=None)
    sp.add_argument("--index", default=None)
    sp.add_argument("--baseline", action="store_true")
    sp.add_argument("--split", default="test", choices=("train", "valid", "test"))
    sp.add_argument("--count", type=int, default=8)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("hash-index", help="build and save a spectral-hash index")
    sp.add_argument("--data", required=True)
    sp.add_argument("--n-bits", type=int, default=7)
    sp.add_argument("--pca-dims", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--fold", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_hash_index)

    sp = sub.add_parser("make-noise", help="corrupt IDX images into a pair dataset")
    sp.add_argument("--images", required=True, help="IDX3 image file")
    sp.add_argument("--kind", required=True, choices=("flip", "occlude"))
    sp.add_argument("--rate", type=float, default=0.1)
    sp.add_argument("--patch", type=int, default=8)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_make_noise)

    sp = sub.add_parser("make-data", help="write a synthetic corpus")
    sp.add_argument("--kind", required=True, choices=("digits", "multilabel"))
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_make_data)

    return parser


def main(argv=None):
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    if argv and not argv[0].startswith("-"):
        argv = _inject_config(argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
