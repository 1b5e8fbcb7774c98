"""Command line entry point: train, evaluate, infer, datagen, ablate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import BASELINES, TrainConfig
from .data import PoseDataset
from .errors import ConfigurationError, ContractError, TrainingAbort

log = logging.getLogger("bigraphgan")

_SAMPLE_KEYS = ("I_a", "I_b", "P_a", "P_b", "mask_b", "joints_a", "joints_b")


def _load_config(path, overrides) -> TrainConfig:
    cfg = TrainConfig.load(path) if path else TrainConfig()
    if overrides:
        text = cfg.to_text() + "".join(f"{o}\n" for o in overrides)
        cfg = TrainConfig.from_text(text)
    return cfg


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_train(args) -> int:
    from .train import train

    cfg = _load_config(args.config, args.set)
    out = args.out or cfg.out_dir
    result = train(cfg, out, figures=not args.no_figures)
    _print_json(result.report)
    return 0


def cmd_evaluate(args) -> int:
    from .train import evaluate, load_models

    models = load_models(args.checkpoint)
    report = evaluate(models, args.split, args.n)
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2))
    _print_json(report)
    return 0


def _sample_batch(spec: str, models) -> dict:
    path = Path(spec)
    if path.suffix == ".npz":
        with np.load(path) as z:
            missing = [k for k in ("I_a", "P_a", "P_b") if k not in z]
            if missing:
                raise ContractError(f"{path}: missing arrays {missing}")
            batch = {k: z[k][None].astype(np.float32) for k in _SAMPLE_KEYS if k in z}
        batch.setdefault("I_b", np.zeros_like(batch["I_a"]))
        batch["index"] = [0]
        return batch
    try:
        index = int(spec)
    except ValueError:
        raise ConfigurationError(f"--sample must be an integer index or an .npz file, got {spec!r}") from None
    from .train import make_dataset

    return make_dataset(models.config, "test").batch([index])


def cmd_infer(args) -> int:
    from .train import infer, load_models

    models = load_models(args.checkpoint)
    batch = _sample_batch(args.sample, models)
    _print_json(infer(models, batch, args.out))
    return 0


def cmd_datagen(args) -> int:
    from .plotting import save_image

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = PoseDataset(args.seed, args.split, (args.height, args.width))
    index = []
    for i in range(args.n):
        s = ds[i]
        tag = f"{i:05d}"
        np.savez_compressed(out / f"{tag}.npz", **{k: getattr(s, k) for k in _SAMPLE_KEYS})
        save_image(s.I_a, out / f"{tag}_I_a.png")
        save_image(s.I_b, out / f"{tag}_I_b.png")
        save_image(s.mask_b, out / f"{tag}_mask_b.png", signed=False)
        save_image(s.P_b.max(axis=0, keepdims=True), out / f"{tag}_P_b.png", signed=False)
        index.append({"index": i, "identity_id": s.identity_id, "split": s.split, "clamped": s.clamped,
                      "arrays": f"{tag}.npz"})
    meta = {"seed": args.seed, "split": args.split, "size": [args.height, args.width], "samples": index}
    (out / "index.json").write_text(json.dumps(meta, indent=1))
    print(f"wrote {args.n} samples to {out}")
    return 0


def cmd_ablate(args) -> int:
    from .train import ablate

    cfg = _load_config(args.config, args.set)
    names = args.only or list(BASELINES)
    reports = ablate(cfg, args.out or cfg.out_dir, names)
    print("baseline,ssim,mask_ssim,parameters_generator")
    for name, r in reports.items():
        print(f"{name},{r['ssim']:.4f},{r['mask_ssim']:.4f},{r['parameters_generator']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bigraphgan", description="Pose-guided image generation with bipartite graph reasoning.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model from a config file")
    t.add_argument("--config", help="key = value config file (defaults used when omitted)")
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config setting")
    t.add_argument("--out", help="output directory (default: out_dir from the config)")
    t.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a checkpoint on held-out pairs")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--split", default="test", choices=("train", "test"))
    e.add_argument("--n", type=int, default=None, help="number of pairs (default: n_test_samples)")
    e.add_argument("--out", help="also write the report JSON here")
    e.set_defaults(func=cmd_evaluate)

    i = sub.add_parser("infer", help="generate images for one sample")
    i.add_argument("--checkpoint", required=True)
    i.add_argument("--sample", required=True, help="test-split index or an .npz written by datagen")
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_infer)

    d = sub.add_parser("datagen", help="write synthetic pose pairs as PNG + NPZ")
    d.add_argument("--out", required=True)
    d.add_argument("--n", type=int, default=16)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--split", default="train", choices=("train", "test"))
    d.add_argument("--height", type=int, default=64)
    d.add_argument("--width", type=int, default=32)
    d.set_defaults(func=cmd_datagen)

    a = sub.add_parser("ablate", help="train baselines B1..B6 and compare")
    a.add_argument("--config")
    a.add_argument("--set", action="append", metavar="KEY=VALUE")
    a.add_argument("--out")
    a.add_argument("--only", nargs="+", choices=list(BASELINES), help="subset of baselines")
    a.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingAbort as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
