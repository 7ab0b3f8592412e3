"""Command line: ``flowseg {generate,train,adapt,eval,flow,ablate}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FlowSegError, IoFailure, UsageError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _override(text: str):
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _version_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _write_run_info(out: Path, cfg, argv) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json() + "\n")
    info = {"seed": cfg.seed, "version": _version_string(), "argv": list(argv)}
    (out / "run.json").write_text(json.dumps(info, indent=2) + "\n")


# ---------------------------------------------------------------- config

def _add_train_flags(p):
    p.add_argument("--config", type=Path, help="JSON run config (flat key/value)")
    p.add_argument("--source", help="source dataset root (DAVIS layout)")
    p.add_argument("--val", help="labelled dataset root scored after training")
    p.add_argument("--val-split", default="test")
    p.add_argument("--out", type=Path, required=True, help="run directory")
    p.add_argument("--resume", type=Path, help="per-epoch checkpoint to resume from")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--crop", type=int)
    p.add_argument("--fusion", choices=["conv", "product", "addition"])
    p.add_argument("--flow-supervision", type=_bool, metavar="BOOL")
    p.add_argument("--set", type=_override, action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")


def _resolve_config(args, **fixed):
    from .train import TrainConfig

    cfg = TrainConfig.load(args.config) if args.config else TrainConfig()
    changes = dict(args.set)
    for flag in ("epochs", "seed", "lr", "batch_size", "crop", "fusion", "flow_supervision"):
        value = getattr(args, flag, None)
        if value is not None:
            changes[flag] = value
    for flag in ("source", "target"):
        value = getattr(args, flag, None)
        if value is not None:
            changes[flag] = value
    changes.update(fixed)
    return cfg.replace(**changes)


def _dataset(root, split, labeled=True, domain=None):
    from .data import load_davis_layout

    if root is None:
        raise UsageError("dataset root required (flag or config key)")
    return load_davis_layout(root, split, labeled=labeled, domain=domain)


# ---------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    from .data import SyntheticSpec, materialize_synthetic
    from .errors import SpecInvalid

    try:
        raw = json.loads(Path(args.spec).read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read spec {args.spec}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecInvalid(f"{args.spec}: {exc}") from exc
    if not isinstance(raw, dict):
        raise SpecInvalid(f"{args.spec}: top level must be an object")
    n_train = args.n_train if args.n_train is not None else raw.pop("n_train", 20)
    n_test = args.n_test if args.n_test is not None else raw.pop("n_test", 5)
    raw.pop("n_train", None)
    raw.pop("n_test", None)
    spec = SyntheticSpec.from_dict(raw)
    spec.validate()
    out = Path(args.out)
    if out.exists() and any(out.iterdir()):
        if not args.force:
            raise UsageError(f"{out} exists and is not empty; pass --force to replace it")
        shutil.rmtree(out)
    try:
        manifest = materialize_synthetic(spec, out, n_train, n_test)
    except OSError as exc:
        raise IoFailure(f"writing {out}: {exc}") from exc
    print(f"wrote {n_train + n_test} sequences to {out}")
    print(f"spec_hash {manifest['spec_hash']}")
    print(f"content_hash {manifest['content_hash']}")
    return EXIT_OK


def _finish_run(out, model, history, val, which="s"):
    from .evaluate import evaluate_model

    summary = {"steps": len(history.steps), "epochs": history.epochs}
    if history.steps:
        last = history.steps[-1]
        summary["final"] = {k: getattr(last, k) for k in ("l_s", "l_ent", "l_d", "disc_acc")}
    if val is not None:
        report = evaluate_model(model, val, which)
        report.write(out)
        summary["val_j_mean"] = report.j_mean
        summary["val_f_mean"] = report.f_mean
        print(report.table(), end="")
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")


def cmd_train(args) -> int:
    from .train import train_supervised

    cfg = _resolve_config(args, regime="supervised")
    source = _dataset(cfg.source, "train")
    val = _dataset(args.val, args.val_split) if args.val else None
    _write_run_info(args.out, cfg, sys.argv)
    model, history = train_supervised(cfg, source, out_dir=args.out, resume=args.resume)
    _finish_run(args.out, model, history, val)
    print(f"checkpoint {args.out / 'checkpoint.npz'}")
    return EXIT_OK


def cmd_adapt(args) -> int:
    from .data import Domain
    from .train import train_uda_separated, train_uda_shared

    if args.regime == "separated" and args.source_ckpt is None:
        raise UsageError("adapt --regime separated requires --source-ckpt")
    cfg = _resolve_config(args, regime=args.regime)
    source = _dataset(cfg.source, "train")
    target = _dataset(cfg.target, "train", labeled=False, domain=Domain.TARGET)
    val = _dataset(args.val, args.val_split) if args.val else None
    _write_run_info(args.out, cfg, sys.argv)
    if args.regime == "shared":
        model, history = train_uda_shared(cfg, source, target, out_dir=args.out, resume=args.resume)
        which = "s"
    else:
        model, history = train_uda_separated(cfg, args.source_ckpt, source, target, out_dir=args.out,
                                             resume=args.resume)
        which = "t"
    _finish_run(args.out, model, history, val, which)
    print(f"checkpoint {args.out / 'checkpoint.npz'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .evaluate import evaluate_model, evaluate_oracle
    from .train import load_checkpoint

    data = _dataset(args.data, args.split)
    if args.oracle:
        report = evaluate_oracle(data, args.tol)
    else:
        if args.ckpt is None:
            raise UsageError("eval needs --ckpt (or --oracle)")
        model = load_checkpoint(args.ckpt).model
        which = args.encoder
        if which == "auto":
            which = "t" if model.en_t is not None else "s"
        report = evaluate_model(model, data, which, args.threshold, args.tol)
    if args.out is not None:
        report.write(args.out)
    print(report.table(), end="")
    return EXIT_OK


def cmd_flow(args) -> int:
    from .data import read_flo, write_flo
    from .data.flowviz import crop_flow, flow_stats, flow_to_color, resize_flow

    flow = read_flo(args.path)
    if args.flow_cmd == "info":
        print(flow_stats(flow).summary())
        return EXIT_OK
    if args.flow_cmd == "visualize":
        from PIL import Image

        rgb = flow_to_color(flow, args.max_magnitude)
        try:
            Image.fromarray(rgb).save(args.out)
        except OSError as exc:
            raise IoFailure(f"writing {args.out}: {exc}") from exc
        print(f"wrote {args.out}")
        return EXIT_OK
    if args.crop is not None:
        flow = crop_flow(flow, *args.crop)
    if args.size is not None:
        flow = resize_flow(flow, *args.size)
    elif args.scale is not None:
        h, w = flow.shape[:2]
        flow = resize_flow(flow, max(1, round(h * args.scale)), max(1, round(w * args.scale)))
    write_flo(flow, args.out)
    print(flow_stats(flow).summary())
    return EXIT_OK


def cmd_ablate(args) -> int:
    from .ablation import format_table, run_row, select_rows, to_json
    from .train import TrainConfig

    raw = {}
    if args.config is not None:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    rows = select_rows(raw.pop("variants", None))
    val_root = args.val or raw.pop("val", None)
    raw.pop("val", None)
    cfg = TrainConfig.from_flat(raw).replace(**dict(args.set))
    if args.source is not None:
        cfg = cfg.replace(source=args.source)
    source = _dataset(cfg.source, "train")
    val = _dataset(val_root, args.val_split)
    _write_run_info(args.out, cfg, sys.argv)

    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(args.jobs) as pool:
            futures = [pool.submit(run_row, r, cfg, source, val, args.out / r.name) for r in rows]
            results = [f.result() for f in futures]
    else:
        results = []
        for r in rows:
            results.append(run_row(r, cfg, source, val, args.out / r.name))
            status = f"J={results[-1].j_mean:.4f}" if results[-1].ok else f"FAILED {results[-1].error}"
            print(f"{r.name}: {status}", file=sys.stderr, flush=True)
    table = format_table(results)
    (args.out / "ablation.txt").write_text(table)
    (args.out / "ablation.json").write_text(to_json(results) + "\n")
    print(table, end="")
    codes = [r.exit_code for r in results if not r.ok]
    return max(codes) if codes else EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flowseg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="render a synthetic dataset in DAVIS layout")
    p.add_argument("--spec", type=Path, required=True, help="JSON synthetic spec")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--force", action="store_true", help="replace a non-empty output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="supervised training on a labelled source dataset")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("adapt", help="unsupervised domain adaptation")
    _add_train_flags(p)
    p.add_argument("--regime", choices=["shared", "separated"], required=True)
    p.add_argument("--target", help="unlabelled target dataset root")
    p.add_argument("--source-ckpt", type=Path, help="trained source checkpoint (separated regime)")
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("eval", help="score a checkpoint on a labelled dataset")
    p.add_argument("--ckpt", type=Path)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", type=Path)
    p.add_argument("--oracle", action="store_true", help="score the ground truth against itself")
    p.add_argument("--encoder", choices=["auto", "s", "t"], default="auto")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--tol", type=float, default=None, help="boundary tolerance in pixels")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("flow", help=".flo utilities")
    fsub = p.add_subparsers(dest="flow_cmd", required=True, parser_class=_Parser)
    q = fsub.add_parser("info")
    q.add_argument("path", type=Path)
    q = fsub.add_parser("visualize")
    q.add_argument("path", type=Path)
    q.add_argument("--out", type=Path, required=True)
    q.add_argument("--max-magnitude", type=float)
    q = fsub.add_parser("convert")
    q.add_argument("path", type=Path)
    q.add_argument("--out", type=Path, required=True)
    q.add_argument("--size", type=int, nargs=2, metavar=("H", "W"))
    q.add_argument("--scale", type=float)
    q.add_argument("--crop", type=int, nargs=4, metavar=("TOP", "LEFT", "H", "W"))
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("ablate", help="train and score the architecture ablation grid")
    p.add_argument("--config", type=Path, help="JSON base config; optional 'variants' and 'val' keys")
    p.add_argument("--source")
    p.add_argument("--val")
    p.add_argument("--val-split", default="test")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--set", type=_override, action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except FlowSegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
