"""Command-line interface: train, eval, classify, sample, gradcheck.

Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or input
error.  Report-producing commands write delimited output (CSV) and render
a matching figure next to it unless --no-figures is given.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .data import (LabeledSequenceSet, load_dataset, load_splice, save_dataset,
                   window_sequences)
from .errors import ParseError
from .gradient import gradient_check
from .hmm import EmConfig, baum_welch_fit, sample_hmm
from .hqmm import Hqmm, random_hqmm, sample
from .metrics import accuracy, classify, da_scores, kfold_splits
from .modelfile import load_model, save_model
from .optim import TrainConfig, train

HISTORY_COLUMNS = ["epoch", "batch", "loss", "tau", "grad_norm_raw",
                   "stiefel_residual", "wall_ms", "restart"]


class UsageError(Exception):
    """Bad flag combination or unusable input; exits with code 2."""


def _load_data(path: str, fmt: str) -> LabeledSequenceSet:
    if fmt == "splice":
        return load_splice(path)
    return load_dataset(path)


def _mean_da(model, sequences, burn_in: int) -> tuple[float, float]:
    scores = da_scores(model, sequences, burn_in)
    return float(scores.mean()), float(scores.std())


def _mean_nll(model, sequences, burn_in: int) -> float:
    from .metrics import sequence_log_likelihood

    total = sum(sequence_log_likelihood(model, seq, burn_in) for seq in sequences)
    return -total / len(sequences)


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)


def _figures_enabled(args) -> bool:
    return not args.no_figures


def cmd_train(args) -> int:
    dataset = _load_data(args.data, args.format)
    sequences = dataset.sequences
    if args.window is not None:
        sequences = window_sequences(sequences, args.window, args.burn_in).windows
    if not sequences:
        raise UsageError("no trainable sequences after windowing")

    val_sequences = None
    if args.val_split > 0:
        if not args.val_split < 1:
            raise UsageError(f"--val-split must be in [0, 1), got {args.val_split}")
        rng = np.random.default_rng(args.seed)
        order = rng.permutation(len(sequences))
        n_val = int(round(args.val_split * len(sequences)))
        if n_val == 0 or n_val == len(sequences):
            raise UsageError(f"--val-split {args.val_split} leaves an empty split "
                             f"for {len(sequences)} sequences")
        val_sequences = [sequences[i] for i in order[:n_val]]
        sequences = [sequences[i] for i in order[n_val:]]

    out = Path(args.out)
    history_path = out.with_name(out.stem + "_history.csv")

    if args.kind == "hmm":
        print("note: --kind hmm ignores the manifold flags "
              "(--w, --tau, --alpha, --beta, --batches)", file=sys.stderr)
        config = EmConfig(max_iters=args.epochs, restarts=args.restarts, seed=args.seed)
        model, loglik_history = baum_welch_fit(
            sequences, args.n, args.s, config, val_data=val_sequences)
        metadata = {"config": asdict(config), "kind": "hmm", "seed": args.seed,
                    "final_loglik": loglik_history[-1]}
        _write_csv(history_path, ["iteration", "total_loglik"],
                   list(enumerate(loglik_history)))
        if _figures_enabled(args):
            from .plots import save_em_history_plot

            save_em_history_plot(loglik_history, history_path.with_suffix(".png"))
    else:
        if args.w < 1:
            raise UsageError(f"--w must be >= 1 for --kind hqmm, got {args.w}")
        config = TrainConfig(tau=args.tau, alpha=args.alpha, beta=args.beta,
                             batches=args.batches, epochs=args.epochs,
                             burn_in=args.burn_in, seed=args.seed,
                             restarts=args.restarts)
        model, history = train(sequences, args.n, args.s, args.w, config,
                               val_data=val_sequences)
        metadata = {"config": asdict(config), "kind": "hqmm", "seed": args.seed,
                    "final_loss": history[-1]["loss"] if history else None}
        _write_csv(history_path, HISTORY_COLUMNS,
                   [[row[c] for c in HISTORY_COLUMNS] for row in history])
        if _figures_enabled(args):
            from .plots import save_history_plot

            save_history_plot(history, history_path.with_suffix(".png"))

    save_model(model, out, metadata)
    train_loss = _mean_nll(model, sequences, args.burn_in)
    train_da, train_da_std = _mean_da(model, sequences, args.burn_in)
    print(f"train loss {train_loss:.6f}")
    print(f"train DA {train_da:.6f} (std {train_da_std:.6f})")
    if val_sequences is not None:
        val_loss = _mean_nll(model, val_sequences, args.burn_in)
        val_da, val_da_std = _mean_da(model, val_sequences, args.burn_in)
        print(f"validation loss {val_loss:.6f}")
        print(f"validation DA {val_da:.6f} (std {val_da_std:.6f})")
    print(f"model written to {out}")
    return 0


def cmd_eval(args) -> int:
    model, _ = load_model(args.model)
    dataset = _load_data(args.data, args.format)
    rows = []
    scores = []
    for i, seq in enumerate(dataset.sequences):
        from .metrics import da_score, sequence_log_likelihood

        ll = sequence_log_likelihood(model, seq, args.burn_in)
        effective = seq.size - args.burn_in
        da = da_score(ll, model.s, effective)
        scores.append(da)
        rows.append([i, seq.size, effective, ll, da])
    scores = np.array(scores)
    print(f"sequences {scores.size}")
    print(f"mean DA {scores.mean():.6f}")
    print(f"std DA {scores.std():.6f}")
    if args.out:
        _write_csv(args.out, ["index", "length", "effective_length",
                              "log_likelihood", "da"], rows)
        if _figures_enabled(args):
            from .plots import save_da_histogram

            save_da_histogram(scores, Path(args.out).with_suffix(".png"))
        print(f"report written to {args.out}")
    return 0


def _train_label_model(sequences, args, seed) -> object:
    if args.kind == "hmm":
        config = EmConfig(max_iters=args.epochs, restarts=args.restarts, seed=seed)
        model, _ = baum_welch_fit(sequences, args.n, args.s, config)
        return model
    config = TrainConfig(tau=args.tau, alpha=args.alpha, beta=args.beta,
                         batches=args.batches, epochs=args.epochs,
                         burn_in=args.burn_in, seed=seed, restarts=args.restarts)
    model, _ = train(sequences, args.n, args.s, args.w, config)
    return model


def cmd_classify(args) -> int:
    dataset = _load_data(args.data, args.format)
    if dataset.labels is None:
        raise UsageError("classification needs labeled data")
    labels = dataset.labels
    classes = np.unique(labels)

    if args.models:
        if args.folds is not None:
            raise UsageError("--models and --folds are mutually exclusive")
        if len(args.models) != classes.size:
            raise UsageError(f"{len(args.models)} models supplied for "
                             f"{classes.size} classes")
        models = [load_model(p)[0] for p in args.models]
        preds = np.array([classify(models, seq, args.burn_in)
                          for seq in dataset.sequences])
        acc = accuracy(preds, labels)
        print(f"accuracy {acc:.6f}")
        if args.out:
            _write_csv(args.out, ["index", "truth", "prediction"],
                       [[i, int(t), int(p)] for i, (t, p) in
                        enumerate(zip(labels, preds))])
            print(f"report written to {args.out}")
        return 0

    if args.folds is None:
        raise UsageError("supply either --models (one per label) or --folds")
    if args.n is None or args.s is None:
        raise UsageError("--folds training mode needs --n and --s")
    base_seed = args.seed if args.seed is not None else 0
    fold_accuracies = []
    for fold, (train_idx, test_idx) in enumerate(
            kfold_splits(labels, args.folds, args.seed)):
        fold_seed = base_seed ^ fold
        models = []
        for pos, cls in enumerate(classes):
            cls_idx = train_idx[labels[train_idx] == cls]
            seqs = [dataset.sequences[i] for i in cls_idx]
            models.append(_train_label_model(seqs, args,
                                             fold_seed * 1000003 + pos))
        preds = np.array([classify(models, dataset.sequences[i], args.burn_in)
                          for i in test_idx])
        truth_positions = np.searchsorted(classes, labels[test_idx])
        acc = accuracy(preds, truth_positions)
        fold_accuracies.append(acc)
        print(f"fold {fold} accuracy {acc:.6f}")
    mean_acc = float(np.mean(fold_accuracies))
    print(f"mean accuracy {mean_acc:.6f}")
    if args.out:
        rows = [[i, a] for i, a in enumerate(fold_accuracies)]
        rows.append(["mean", mean_acc])
        _write_csv(args.out, ["fold", "accuracy"], rows)
        if _figures_enabled(args):
            from .plots import save_fold_accuracy_plot

            save_fold_accuracy_plot(fold_accuracies, Path(args.out).with_suffix(".png"))
        print(f"report written to {args.out}")
    return 0


def cmd_sample(args) -> int:
    if args.num < 1:
        raise UsageError(f"--num must be >= 1, got {args.num}")
    if args.len < 1:
        raise UsageError(f"--len must be >= 1, got {args.len}")
    model, _ = load_model(args.model)
    if isinstance(model, Hqmm):
        ys = sample(model, args.len, args.seed, num_sequences=args.num)
    else:
        ys = sample_hmm(model, args.len, args.seed, num_sequences=args.num)
    dataset = LabeledSequenceSet(list(ys))
    save_dataset(dataset, args.out, meta={"seed": args.seed, "model": str(args.model),
                                          "length": args.len})
    print(f"wrote {args.num} sequences of length {args.len} to {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    if args.trials < 1:
        raise UsageError(f"--trials must be >= 1, got {args.trials}")
    if args.h <= 0:
        raise UsageError(f"--h must be > 0, got {args.h}")
    seed_seq = np.random.SeedSequence(args.seed)
    trials = []
    worst = 0.0
    for child in seed_seq.spawn(args.trials):
        rng = np.random.default_rng(child)
        model = random_hqmm(args.n, args.s, args.w, rng)
        batch = list(rng.integers(0, args.s, size=(3, args.len)))
        report = gradient_check(model, batch, burn_in=0, h=args.h,
                                sabotage=args.sabotage)
        trials.append({"rel_error": report["rel_error"],
                       "max_block_rel_error": report["max_block_rel_error"]})
        worst = max(worst, report["rel_error"])
    passed = worst < 1e-5
    print(json.dumps({"n": args.n, "s": args.s, "w": args.w, "len": args.len,
                      "h": args.h, "trials": trials, "max_rel_error": worst,
                      "pass": passed}, indent=1))
    return 0 if passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qgm",
        description="Learn and evaluate hidden quantum Markov models.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p):
        p.add_argument("--data", required=True, help="dataset path")
        p.add_argument("--format", choices=["ndjson", "splice"], default="ndjson")
        p.add_argument("--burn-in", dest="burn_in", type=int, default=0)
        p.add_argument("--no-figures", action="store_true",
                       help="skip rendering figures next to CSV reports")

    def add_train_flags(p):
        p.add_argument("--kind", choices=["hqmm", "hmm"], default="hqmm")
        p.add_argument("--n", type=int, help="latent dimension / state count")
        p.add_argument("--s", type=int, help="alphabet size")
        p.add_argument("--w", type=int, default=1, help="Kraus operators per symbol")
        p.add_argument("--tau", type=float, default=0.75, help="initial step size")
        p.add_argument("--alpha", type=float, default=0.92, help="per-epoch step decay")
        p.add_argument("--beta", type=float, default=0.9, help="momentum coefficient")
        p.add_argument("--batches", type=int, default=1)
        p.add_argument("--epochs", type=int, default=60)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--restarts", type=int, default=1)

    p_train = sub.add_parser("train", help="fit a model to sequence data")
    add_data_flags(p_train)
    add_train_flags(p_train)
    p_train.add_argument("--window", type=int, default=None,
                         help="cut sequences into windows of this length first")
    p_train.add_argument("--val-split", dest="val_split", type=float, default=0.0,
                         help="fraction of sequences held out for validation")
    p_train.add_argument("--out", required=True, help="model file to write")
    p_train.set_defaults(func=cmd_train, required_dims=True)

    p_eval = sub.add_parser("eval", help="score data under a saved model")
    add_data_flags(p_eval)
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--out", default=None, help="per-sequence DA report CSV")
    p_eval.set_defaults(func=cmd_eval)

    p_cls = sub.add_parser("classify", help="likelihood classification, "
                                            "optionally with k-fold CV training")
    add_data_flags(p_cls)
    add_train_flags(p_cls)
    p_cls.add_argument("--models", nargs="+", default=None,
                       help="saved model files, one per label")
    p_cls.add_argument("--folds", type=int, default=None,
                       help="train per-label models with stratified k-fold CV")
    p_cls.add_argument("--out", default=None, help="accuracy report CSV")
    p_cls.set_defaults(func=cmd_classify)

    p_sample = sub.add_parser("sample", help="draw sequences from a saved model")
    p_sample.add_argument("--model", required=True)
    p_sample.add_argument("--num", type=int, required=True)
    p_sample.add_argument("--len", type=int, required=True)
    p_sample.add_argument("--seed", type=int, default=None)
    p_sample.add_argument("--out", required=True)
    p_sample.set_defaults(func=cmd_sample)

    p_grad = sub.add_parser("gradcheck", help="compare the analytic gradient "
                                              "against finite differences")
    p_grad.add_argument("--n", type=int, default=3)
    p_grad.add_argument("--s", type=int, default=3)
    p_grad.add_argument("--w", type=int, default=2)
    p_grad.add_argument("--len", type=int, default=8)
    p_grad.add_argument("--trials", type=int, default=25)
    p_grad.add_argument("--h", type=float, default=1e-5)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--sabotage", type=float, default=0.0,
                        help="perturb the analytic gradient to prove the check "
                             "can fail")
    p_grad.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    if getattr(args, "required_dims", False) and (args.n is None or args.s is None):
        print("error: --n and --s are required", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (UsageError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
