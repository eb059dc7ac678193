"""``pdnet`` command-line entry point.

Exit codes: 0 on success, 1 on a usage error, 2 on a runtime or data error.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
import time
from pathlib import Path

from threadpoolctl import threadpool_limits

from pdnet.augment import Mirror, Rotate, augment_dataset, normalize_angle
from pdnet.data import SplitRatios, generate_dataset, load_manifest, save_manifest, split_dataset
from pdnet.data.phantom import DEFAULT_NOISE
from pdnet.errors import PdnetError
from pdnet.model.zoo import MODELS, WIDTHS
from pdnet.nn.gradcheck import GROUPS, run_suite
from pdnet.trainer import (ARMS, TrainConfig, check_arm, evaluate, export_metrics_csv, fit,
                           load_checkpoint, load_split, save_checkpoint)

log = logging.getLogger("pdnet")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
LAYER_CHOICES = ("all", "conv", "pool", "act", "lrn", "bn", "fc", "softmax")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def _angles(text: str) -> list[float]:
    try:
        return [float(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad angle list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=_u64, default=0)
    common.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True,
                        help="pin numerical libraries to one thread (default on)")
    common.add_argument("--quiet", action="store_true", help="suppress config and progress output")

    p = _Parser(prog="pdnet", description="Phantom data, augmentation, training and gradient checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", parents=[common], help="write synthetic phantoms and a manifest")
    g.add_argument("--out", required=True, type=Path)
    g.add_argument("--per-class", type=int, default=300)
    g.add_argument("--size", type=int, default=64)
    g.add_argument("--noise", type=float, default=DEFAULT_NOISE)
    g.add_argument("--ratios", choices=("counts", "percent"), default="counts",
                   help="split proportions: reported split sizes, or 15%% val of train and 10%% test")

    a = sub.add_parser("augment", parents=[common], help="rotate and mirror every manifest image")
    a.add_argument("--manifest", required=True, type=Path)
    a.add_argument("--out", required=True, type=Path)
    a.add_argument("--rotate", type=_angles, default=[])
    a.add_argument("--mirror", choices=("vertical", "horizontal", "both"))
    a.add_argument("--interp", choices=("nearest", "bilinear"), default="nearest")

    t = sub.add_parser("train", parents=[common], help="train a model on one experiment arm")
    t.add_argument("--manifest", required=True, type=Path)
    t.add_argument("--arm", choices=sorted(ARMS), default="PMN")
    t.add_argument("--model", choices=MODELS, default="alexnet-opt-lrn")
    t.add_argument("--scale", choices=sorted(WIDTHS), default="mini")
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--momentum", type=float, default=0.9)
    t.add_argument("--weight-decay", type=float, default=5e-4)
    t.add_argument("--batch", type=int, default=32)
    t.add_argument("--metrics", required=True, type=Path)
    t.add_argument("--checkpoint", required=True, type=Path)
    t.add_argument("--resume", type=Path, help="continue from this checkpoint")

    e = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint's best weights")
    e.add_argument("--manifest", required=True, type=Path)
    e.add_argument("--split", choices=("train", "val", "test"), default="test")
    e.add_argument("--checkpoint", required=True, type=Path)

    c = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient checks")
    c.add_argument("--layer", choices=LAYER_CHOICES, default="all")
    c.add_argument("--trials", type=int, default=100)
    c.add_argument("--tol", type=float, default=1e-4)
    return p


def _show_config(args) -> None:
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())}
    log.info("config %s", json.dumps(cfg, sort_keys=True))


def cmd_gen_data(args) -> int:
    if args.per_class < 1:
        raise UsageError("--per-class must be at least 1")
    ratios = SplitRatios.from_counts() if args.ratios == "counts" else SplitRatios.from_percentages()
    manifest = generate_dataset(args.per_class, args.out, args.seed, args.size, args.noise)
    manifest = split_dataset(manifest, ratios, args.seed)
    save_manifest(manifest, args.out / "manifest.csv")
    print(f"wrote {len(manifest)} images and {args.out / 'manifest.csv'}")
    return EXIT_OK


def cmd_augment(args) -> int:
    plan = []
    for a in args.rotate:
        if normalize_angle(a) != a:
            log.warning("rotation %g normalized to %g degrees", a, normalize_angle(a))
        plan.append(Rotate(a))
    if args.mirror in ("vertical", "both"):
        plan.append(Mirror("vertical"))
    if args.mirror in ("horizontal", "both"):
        plan.append(Mirror("horizontal"))
    if args.out.resolve() == args.manifest.parent.resolve():
        raise UsageError("--out must differ from the input manifest's directory")
    manifest = load_manifest(args.manifest)
    out = augment_dataset(manifest, plan, args.out, args.interp)
    save_manifest(out, args.out / "manifest.csv")
    print(f"wrote {len(out)} rows to {args.out / 'manifest.csv'}")
    return EXIT_OK


def cmd_train(args) -> int:
    try:
        cfg = TrainConfig(arm=args.arm, model=args.model, scale=args.scale, epochs=args.epochs,
                          learning_rate=args.lr, momentum=args.momentum,
                          weight_decay=args.weight_decay, batch_size=args.batch, seed=args.seed)
    except ValueError as e:
        raise UsageError(str(e)) from e
    manifest = load_manifest(args.manifest, check_files=True)
    resume = load_checkpoint(args.resume) if args.resume else None
    start = time.perf_counter()
    ckpt = fit(cfg, manifest, resume=resume)
    export_metrics_csv(ckpt.history, args.metrics)
    save_checkpoint(ckpt, args.checkpoint)
    log.info("trained %d epochs in %.1f s", ckpt.epoch, time.perf_counter() - start)
    print(f"best_epoch={ckpt.best_epoch} metrics={args.metrics} checkpoint={args.checkpoint}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    manifest = load_manifest(args.manifest, check_files=True)
    check_arm(manifest, ckpt.config.arm)
    spec = ckpt.spec()
    x, y = load_split(manifest, args.split, ckpt.config.classes, spec.input_shape[-1])
    loss, acc = evaluate(spec, ckpt.best_weights, x, y)
    print(f"loss={loss:.6g} acc={acc:.2f}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    names = GROUPS.get(args.layer, (args.layer,))
    reports = run_suite(names, args.trials, args.tol, args.seed)
    print(f"{'layer':<10} {'max_rel_error':>14}  result")
    for name, rep in reports.items():
        print(f"{name:<10} {rep.max_error:>14.3e}  {'PASS' if rep.passed else 'FAIL'}")
    failed = [n for n, r in reports.items() if not r.passed]
    print(f"{len(reports) - len(failed)}/{len(reports)} passed at tol={args.tol:g}")
    return EXIT_RUNTIME if failed else EXIT_OK


COMMANDS = {"gen-data": cmd_gen_data, "augment": cmd_augment, "train": cmd_train,
            "eval": cmd_eval, "gradcheck": cmd_gradcheck}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    _show_config(args)
    limits = threadpool_limits(1) if args.deterministic else contextlib.nullcontext()
    try:
        with limits:
            return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (PdnetError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
