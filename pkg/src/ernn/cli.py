"""Command-line entry point: ``ernn {gen,train,eval,diagnose,phi}``.

Exit codes: 0 success, 2 usage error, 3 data or file-format error,
4 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

from . import checkpoint, diagnostics, svg
from .cells import init_params
from .checkpoint import CheckpointFormatError
from .data import DataFormatError, gen_random_walks, load_csv_sequences, split, write_csv_sequences
from .fixed_point import phi_curve
from .train import TrainConfig, evaluate, train

log = logging.getLogger("ernn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4

CELL_NAMES = {
    "rnn": "vanilla_rnn",
    "ernn-toy": "ernn_toy",
    "ernn": "ernn_exemplar",
    "fastrnn": "fastrnn",
}


class UsageError(Exception):
    pass


class DivergedError(Exception):
    pass


def write_manifest(path, entries: dict) -> None:
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key}={value}\n")


def read_manifest(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataFormatError(f"{path}: line {lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, argv) -> argparse.Namespace:
    """Re-parse with defaults taken from ``--config``; explicit flags still win."""
    if not getattr(args, "config", None):
        return args
    try:
        entries = read_manifest(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    sub = parser.subcommands[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in entries.items():
        dest = key.replace("-", "_")
        if dest not in actions or dest in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        action = actions[dest]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"config key {key!r} expects a boolean")
            defaults[dest] = value.lower() in ("true", "1", "yes")
        else:
            try:
                defaults[dest] = action.type(value) if action.type else value
            except (TypeError, ValueError):
                raise UsageError(f"config key {key!r}: bad value {value!r}") from None
            if action.choices is not None and defaults[dest] not in action.choices:
                raise UsageError(f"config key {key!r}: {value!r} not in {sorted(action.choices)}")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _require(args, *names) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")


def cmd_gen(args) -> int:
    _require(args, "out")
    if not args.toy:
        raise UsageError("only the random-walk toy generator is available; pass --toy")
    ds = gen_random_walks(args.n, args.T, args.sigma0, args.sigma1, args.seed, args.sigma_kind)
    try:
        write_csv_sequences(ds, args.out)
        write_manifest(
            f"{args.out}.manifest",
            {
                "generator": "random_walks",
                "seed": args.seed,
                "sigma0": repr(args.sigma0),
                "sigma1": repr(args.sigma1),
                "sigma_kind": args.sigma_kind,
                "T": args.T,
                "n_per_class": args.n,
                "samples": len(ds),
                "rows": len(ds) * args.T,
            },
        )
    except OSError as exc:
        raise DataFormatError(f"cannot write {args.out}: {exc}") from None
    log.info("wrote %d sequences to %s", len(ds), args.out)
    return EXIT_OK


def _validate_train_args(args) -> None:
    _require(args, "data", "out")
    cell = CELL_NAMES[args.cell]
    if cell in ("fastrnn", "vanilla_rnn") and args.K != 1:
        raise UsageError(f"--cell {args.cell} requires --K 1")
    if not 0.0 < args.train_frac < 1.0:
        raise UsageError("--train-frac must lie strictly between 0 and 1")
    try:
        TrainConfig(
            learning_rate=args.lr, batch_size=args.batch, epochs=args.epochs,
            lr_half_period=args.half_period, K=args.K, hidden_dim=args.hidden,
            clip_norm=args.clip,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_split(data_path, train_frac, split_seed):
    ds = load_csv_sequences(data_path)
    return split(ds, train_frac, split_seed)


def cmd_train(args) -> int:
    _validate_train_args(args)
    split_seed = args.seed if args.split_seed is None else args.split_seed
    train_ds, test_ds = _load_split(args.data, args.train_frac, split_seed)
    cell = CELL_NAMES[args.cell]
    params = init_params(
        cell, args.hidden, train_ds.feature_dim, train_ds.seq_len, args.K,
        train_ds.class_count, args.activation, args.seed, args.eta0,
    )
    os.makedirs(args.out, exist_ok=True)
    ckpt_dir = os.path.join(args.out, "checkpoints") if args.keep_checkpoints else None
    config = TrainConfig(
        learning_rate=args.lr, batch_size=args.batch, epochs=args.epochs,
        lr_half_period=args.half_period, seed=args.seed, K=args.K, hidden_dim=args.hidden,
        clip_norm=args.clip, checkpoint_dir=ckpt_dir,
    )
    write_manifest(
        os.path.join(args.out, "run.manifest"),
        {
            "data": os.path.abspath(args.data),
            "cell": args.cell,
            "activation": params.activation,
            "K": args.K,
            "hidden": args.hidden,
            "lr": repr(args.lr),
            "batch": args.batch,
            "epochs": args.epochs,
            "half_period": args.half_period,
            "seed": args.seed,
            "split_seed": split_seed,
            "train_frac": repr(args.train_frac),
            "eta0": repr(args.eta0),
            "clip": "" if args.clip is None else repr(args.clip),
        },
    )

    def report(rec):
        log.info("epoch %d lr %.3g loss %.5f acc %.4f", rec.epoch, rec.lr, rec.train_loss, rec.test_acc)

    result = train(params, train_ds, config, eval_dataset=test_ds, on_epoch=report)

    with open(os.path.join(args.out, "records.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "lr", "train_loss", "test_acc", "wall_ms"])
        for r in result.records:
            writer.writerow([r.epoch, repr(r.lr), repr(r.train_loss), repr(r.test_acc), f"{r.wall_ms:.1f}"])
    checkpoint.save(result.params, os.path.join(args.out, "model.ckpt"))
    if args.keep_checkpoints:
        os.makedirs(ckpt_dir, exist_ok=True)
        for e, ckpt in enumerate(result.checkpoints):
            checkpoint.save(ckpt, os.path.join(ckpt_dir, f"epoch_{e:05d}.ckpt"))
    if result.diverged_epoch is not None:
        raise DivergedError(f"training diverged in epoch {result.diverged_epoch}")
    if result.records:
        print(f"final test accuracy {result.records[-1].test_acc:.4f}")
    return EXIT_OK


def _resolve_eval_inputs(args):
    if args.run:
        manifest = read_manifest(os.path.join(args.run, "run.manifest"))
        model_path = args.model or os.path.join(args.run, "model.ckpt")
        data_path = args.data or manifest["data"]
        params = checkpoint.load(model_path)
        if args.split == "all":
            ds = load_csv_sequences(data_path)
        else:
            train_ds, test_ds = _load_split(
                data_path, float(manifest["train_frac"]), int(manifest["split_seed"])
            )
            ds = test_ds if args.split == "test" else train_ds
        return params, ds
    if not (args.model and args.data):
        raise UsageError("pass --run DIR, or both --model and --data")
    return checkpoint.load(args.model), load_csv_sequences(args.data)


def cmd_eval(args) -> int:
    params, ds = _resolve_eval_inputs(args)
    print(f"accuracy {evaluate(params, ds):.6f}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    params, ds = _resolve_eval_inputs(args)
    out = args.out or args.run or "."
    os.makedirs(out, exist_ok=True)
    written = []

    ckpt_dir = os.path.join(args.run, "checkpoints") if args.run else None
    if ckpt_dir and os.path.isdir(ckpt_dir):
        files = sorted(f for f in os.listdir(ckpt_dir) if f.endswith(".ckpt"))
        if len(files) >= 2:
            trace = diagnostics.model_distance_trace(
                checkpoint.load(os.path.join(ckpt_dir, f)) for f in files
            )
            diagnostics.write_h1_csv(os.path.join(out, "h1_trace.csv"), trace)
            written.append(("h1_trace", list(range(len(trace))), trace, "epoch", "distance"))

    h2 = diagnostics.discriminability_trace(params, ds)
    diagnostics.write_h2_csv(os.path.join(out, "h2_trace.csv"), h2)
    written.append(("h2_trace", list(range(1, len(h2) + 1)), h2, "t", "intra/inter ratio"))

    if params.cell_kind != "vanilla_rnn":
        report = diagnostics.eta_report(params)
        diagnostics.write_eta_csv(os.path.join(out, "eta.csv"), report)
        for fit in report.fits:
            print(f"eta fit k={fit.k}: slope {fit.slope:.6g} intercept {fit.intercept:.6g}")
        stats = diagnostics.contraction_report(params, ds, args.samples, args.seed)
        diagnostics.write_contraction_csv(os.path.join(out, "contraction.csv"), stats)
        frac = sum(s.frac_lt_1 for s in stats) / len(stats)
        print(f"contraction: mean fraction below 1 = {frac:.4f}")
        if args.svg:
            series = {
                f"k={k}": ([r[0] for r in report.rows if r[1] == k], [r[2] for r in report.rows if r[1] == k])
                for k in range(1, params.K + 1)
            }
            svg.write_chart(os.path.join(out, "eta.svg"), series, title="learned eta", xlabel="t", ylabel="eta")
            svg.write_chart(
                os.path.join(out, "contraction.svg"),
                {"mean": ([s.t + (s.k - 1) / params.K for s in stats], [s.mean for s in stats])},
                title="||I + eta J||_2", xlabel="t", ylabel="norm",
            )

    if args.svg:
        for name, xs, ys, xl, yl in written:
            svg.write_chart(os.path.join(out, f"{name}.svg"), {name: (xs, ys)}, title=name, xlabel=xl, ylabel=yl)
    print(f"final-step discriminability ratio {h2[-1]:.6f}")
    return EXIT_OK


def cmd_phi(args) -> int:
    if args.points < 2 or not args.max > args.min:
        raise UsageError("need --points >= 2 and --max > --min")
    rows = phi_curve(args.min, args.max, args.points)
    try:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["alpha", "phi", "dphi"])
            for a, p, d in rows:
                writer.writerow([repr(a), repr(p), "" if d is None else repr(d)])
        if args.svg:
            base = os.path.splitext(args.out)[0]
            xs = [r[0] for r in rows]
            svg.write_chart(f"{base}_phi.svg", {"phi": (xs, [r[1] for r in rows])},
                            title="fixed point of h = tanh(h + alpha)", xlabel="alpha", ylabel="phi")
            svg.write_chart(f"{base}_dphi.svg", {"dphi": (xs, [r[2] for r in rows])},
                            title="derivative of phi", xlabel="alpha", ylabel="dphi/dalpha")
    except OSError as exc:
        raise DataFormatError(f"cannot write {args.out}: {exc}") from None
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ernn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = subs.choices

    p = subs.add_parser("gen", help="generate the random-walk toy dataset")
    p.add_argument("--config")
    p.add_argument("--toy", action="store_true")
    p.add_argument("--n", type=int, default=10_000, help="walks per class")
    p.add_argument("--T", type=int, default=100)
    p.add_argument("--sigma0", type=float, default=0.1)
    p.add_argument("--sigma1", type=float, default=1.0)
    p.add_argument("--sigma-kind", choices=("variance", "std"), default="variance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = subs.add_parser("train", help="train a model on a sequence CSV")
    p.add_argument("--config")
    p.add_argument("--data")
    p.add_argument("--cell", choices=sorted(CELL_NAMES), default="ernn-toy")
    p.add_argument("--activation", choices=("tanh", "relu"))
    p.add_argument("--K", type=int, default=1)
    p.add_argument("--hidden", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--half-period", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int)
    p.add_argument("--train-frac", type=float, default=0.5)
    p.add_argument("--eta0", type=float, default=1e-2)
    p.add_argument("--clip", type=float, help="global gradient-norm clip")
    p.add_argument("--keep-checkpoints", action="store_true")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (
        ("eval", cmd_eval, "print accuracy of a checkpoint"),
        ("diagnose", cmd_diagnose, "write H1/H2/eta/contraction CSVs"),
    ):
        p = subs.add_parser(name, help=helptext)
        p.add_argument("--config")
        p.add_argument("--run", help="training output directory")
        p.add_argument("--model")
        p.add_argument("--data")
        p.add_argument("--split", choices=("test", "train", "all"), default="test")
        if name == "diagnose":
            p.add_argument("--out")
            p.add_argument("--samples", type=int, default=16)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--svg", action="store_true")
        p.set_defaults(func=func)

    p = subs.add_parser("phi", help="tabulate the scalar equilibrium map and its derivative")
    p.add_argument("--config")
    p.add_argument("--min", type=float, default=-3.0)
    p.add_argument("--max", type=float, default=3.0)
    p.add_argument("--points", type=int, default=601)
    p.add_argument("--out", default="phi.csv")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_phi)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s"
    )
    try:
        args = _apply_config(parser, args, argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"ernn: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, CheckpointFormatError, OSError, KeyError) as exc:
        print(f"ernn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergedError as exc:
        print(f"ernn: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
