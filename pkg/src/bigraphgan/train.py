"""Alternating generator / discriminator training, evaluation and inference."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import tensor as T
from .checkpoint import load_into, read_checkpoint, save_checkpoint
from .config import BASELINES, TrainConfig, baseline_config
from .data import PoseDataset, collate
from .errors import ConfigurationError, TrainingAbort
from .layers import count_parameters, named_parameters, parameters
from .metrics import keypoint_error, mask_ssim, mean_l1, ssim, to_unit
from .networks import (
    DiscriminatorParams,
    GeneratorParams,
    appearance_pair,
    discriminate,
    generator_forward,
    init_discriminators,
    init_generator,
    shape_pair,
)
from .objectives import adversarial_loss, build_extractor, full_objective, l1_loss, perceptual_loss
from .optim import Adam
from .tensor import Tensor

log = logging.getLogger(__name__)

LOSS_COLUMNS = ("step", "L_gan_G", "L_gan_D_app", "L_gan_D_shape", "L_l1", "L_per", "L_full")


def worker_threads() -> int:
    try:
        return max(1, int(os.environ.get("BIGRAPH_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class Models:
    config: TrainConfig
    gen: GeneratorParams
    disc: DiscriminatorParams
    extractor: object

    def named(self):
        yield from named_parameters(self.gen, "gen")
        yield from named_parameters(self.disc.app, "disc.app")
        yield from named_parameters(self.disc.shape, "disc.shape")


def build_models(config: TrainConfig) -> Models:
    rng = np.random.default_rng(config.seed)
    gen = init_generator(rng, depth=config.depth, channels=config.channels, n_nodes=config.n_nodes,
                         d_state=config.d_state, switches=config.switches,
                         n_nodes_a2b=config.n_nodes_a2b or None, graph_normalize=config.graph_normalize)
    disc = init_discriminators(rng, config.disc_width)
    extractor = build_extractor(config.perceptual_seed, config.perceptual_width)
    return Models(config, gen, disc, extractor)


def load_models(checkpoint_dir) -> Models:
    checkpoint_dir = Path(checkpoint_dir)
    if not (checkpoint_dir / "config.txt").is_file() or not (checkpoint_dir / "manifest.json").is_file():
        raise ConfigurationError(f"{checkpoint_dir} is not a checkpoint directory (needs config.txt and manifest.json)")
    config = TrainConfig.load(checkpoint_dir / "config.txt")
    models = build_models(config)
    load_into(models.named(), read_checkpoint(checkpoint_dir))
    return models


def to_tensors(batch: dict) -> dict:
    return {k: Tensor(batch[k]) for k in ("I_a", "I_b", "P_a", "P_b")}


class BatchStream:
    """Training batches in a fixed index order, optionally prefetched by threads."""

    def __init__(self, dataset: PoseDataset, batch_size: int, threads: int = 1):
        self.dataset = dataset
        self.batch_size = batch_size
        self.pool = ThreadPoolExecutor(threads) if threads > 1 else None

    def indices(self, step: int) -> range:
        return range(step * self.batch_size, (step + 1) * self.batch_size)

    def get(self, step: int) -> dict:
        idx = self.indices(step)
        if self.pool is None:
            return collate([self.dataset[i] for i in idx])
        return collate(list(self.pool.map(self.dataset.__getitem__, idx)))

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _finite(name: str, value: float, step: int) -> float:
    if not math.isfinite(value):
        raise TrainingAbort(f"{name} became non-finite at step {step}", component=name, step=step)
    return value


def train_step(models: Models, batch: dict, optimizers: dict, step: int) -> dict:
    """One generator update followed by one update per discriminator."""
    cfg = models.config
    gen, disc = models.gen, models.disc
    x = to_tensors(batch)
    disc_params = parameters(disc)

    with T.frozen(disc_params):
        out = generator_forward(x["I_a"], x["P_a"], x["P_b"], gen)
        fake = out.I_b_prime
        g_app = adversarial_loss(None, discriminate(appearance_pair(x["I_a"], fake), disc.app), "generator")
        g_shape = adversarial_loss(None, discriminate(shape_pair(x["P_b"], fake), disc.shape), "generator")
        l_gan = g_app + g_shape
        if cfg.gan_reduction == "mean":
            l_gan = l_gan * 0.5
        l_l1 = l1_loss(fake, x["I_b"])
        l_per = perceptual_loss(fake, x["I_b"], models.extractor)
        l_full = full_objective({"gan": l_gan, "l1": l_l1, "per": l_per}, cfg.weights)
        _finite("L_full", l_full.item(), step)
        T.backward(l_full)
    optimizers["gen"].step()
    optimizers["gen"].zero_grad()

    fake = fake.detach()
    d_losses = {}
    for key, d, pair, cond in (("app", disc.app, appearance_pair, x["I_a"]),
                               ("shape", disc.shape, shape_pair, x["P_b"])):
        real_scores = discriminate(pair(cond, x["I_b"]), d)
        fake_scores = discriminate(pair(cond, fake), d)
        loss = adversarial_loss(real_scores, fake_scores, "discriminator")
        d_losses[key] = _finite(f"L_gan_D_{key}", loss.item(), step)
        T.backward(loss)
        optimizers[key].step()
        optimizers[key].zero_grad()

    return {
        "step": step,
        "L_gan_G": l_gan.item(),
        "L_gan_D_app": d_losses["app"],
        "L_gan_D_shape": d_losses["shape"],
        "L_l1": l_l1.item(),
        "L_per": l_per.item(),
        "L_full": l_full.item(),
    }


def make_optimizers(models: Models) -> dict:
    c = models.config
    kw = dict(lr=c.lr, beta1=c.beta1, beta2=c.beta2, eps=c.adam_eps)
    return {
        "gen": Adam(parameters(models.gen), **kw),
        "app": Adam(parameters(models.disc.app), **kw),
        "shape": Adam(parameters(models.disc.shape), **kw),
    }


def generate(models: Models, batch: dict):
    x = to_tensors(batch)
    with T.no_grad():
        out = generator_forward(x["I_a"], x["P_a"], x["P_b"], models.gen)
    a_i = None if out.A_i is None else out.A_i.data
    return out.I_b_prime.data, out.I_b_tilde.data, a_i


def evaluate(models: Models, split: str = "test", n_samples: Optional[int] = None, batch_size: int = 16) -> dict:
    """Held-out SSIM / Mask-SSIM / keypoint score plus the copy-source baseline."""
    cfg = models.config
    n = n_samples or cfg.n_test_samples
    ds = make_dataset(cfg, split)
    acc = {k: [] for k in ("ssim", "mask_ssim", "keypoint_error", "l1", "copy_ssim", "copy_mask_ssim", "copy_l1")}
    masks = []
    for start in range(0, n, batch_size):
        batch = ds.batch(range(start, min(n, start + batch_size)))
        pred, _, a_i = generate(models, batch)
        for j in range(len(pred)):
            I_a, I_b, m = to_unit(batch["I_a"][j]), to_unit(batch["I_b"][j]), batch["mask_b"][j]
            out = to_unit(pred[j])
            ident = ds.identity(batch["identity_id"][j])
            acc["ssim"].append(ssim(out, I_b))
            acc["mask_ssim"].append(mask_ssim(out, I_b, m))
            acc["keypoint_error"].append(keypoint_error(pred[j], batch["joints_b"][j], ident))
            acc["l1"].append(mean_l1(pred[j], batch["I_b"][j]))
            acc["copy_ssim"].append(ssim(I_a, I_b))
            acc["copy_mask_ssim"].append(mask_ssim(I_a, I_b, m))
            acc["copy_l1"].append(mean_l1(batch["I_a"][j], batch["I_b"][j]))
        if a_i is not None:
            masks.append(a_i)
    report = {k: float(np.mean(v)) for k, v in acc.items()}
    report["n_samples"] = n
    report["config_hash"] = cfg.config_hash()
    report["split"] = split
    if masks:
        allm = np.concatenate(masks)
        report["mask_mean"] = float(allm.mean())
        report["mask_std"] = float(allm.std())
    return report


def make_dataset(cfg: TrainConfig, split: str) -> PoseDataset:
    return PoseDataset(cfg.seed, split, cfg.size, cfg.n_train_identities, cfg.n_test_identities,
                       cfg.heatmap_radius or None)


@dataclass
class TrainResult:
    out_dir: Path
    history: list = field(default_factory=list)
    report: Optional[dict] = None
    models: Optional[Models] = None
    seconds: float = 0.0


def train(config: TrainConfig, out_dir=None, evaluate_at_end: bool = True, figures: bool = True) -> TrainResult:
    """Train from scratch; write checkpoint, loss CSV, report JSON and figures."""
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.save(out / "config.txt")
    models = build_models(config)
    optimizers = make_optimizers(models)
    ckpt = out / "checkpoint"
    save_checkpoint(ckpt, models.named(), config, {"step": 0})
    stream = BatchStream(make_dataset(config, "train"), config.batch_size, worker_threads())
    history = []
    t0 = time.perf_counter()
    csv_path = out / "losses.csv"
    try:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(LOSS_COLUMNS)
            for step in range(1, config.steps + 1):
                row = train_step(models, stream.get(step - 1), optimizers, step)
                history.append(row)
                writer.writerow([row["step"]] + [repr(row[c]) for c in LOSS_COLUMNS[1:]])
                if config.log_every and step % config.log_every == 0:
                    fh.flush()
                    log.info("step %d  L_full %.4f  L_l1 %.4f  D_app %.3f  D_shape %.3f  (%.1fs)", step,
                             row["L_full"], row["L_l1"], row["L_gan_D_app"], row["L_gan_D_shape"],
                             time.perf_counter() - t0)
                if config.checkpoint_every and step % config.checkpoint_every == 0:
                    save_checkpoint(ckpt, models.named(), config, {"step": step})
                if config.eval_every and step % config.eval_every == 0:
                    log.info("eval at step %d: %s", step, evaluate(models))
    except TrainingAbort as exc:
        if exc.step is None:
            exc.step = step
        log.error("training aborted at step %s; last good checkpoint kept in %s", exc.step, ckpt)
        raise
    except OSError as exc:
        raise TrainingAbort(f"I/O failure: {exc}") from exc
    finally:
        stream.close()
    if config.steps and (not config.checkpoint_every or config.steps % config.checkpoint_every):
        save_checkpoint(ckpt, models.named(), config, {"step": config.steps})
    seconds = time.perf_counter() - t0
    result = TrainResult(out, history, None, models, seconds)
    if evaluate_at_end:
        report = evaluate(models)
        report["train_seconds"] = seconds
        report["steps"] = config.steps
        report["parameters_generator"] = count_parameters(models.gen)
        (out / "report.json").write_text(json.dumps(report, indent=2))
        result.report = report
    if figures:
        from . import plotting

        if history:
            plotting.plot_losses(history, out / "losses.png")
        plotting.plot_samples(models, make_dataset(config, "test"), out / "samples.png")
    return result


def infer(models: Models, batch: dict, out_dir) -> dict:
    """Write I_b', Ĩ_b and (when present) A_i as PNG files for each sample."""
    from .plotting import save_image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pred, tilde, a_i = generate(models, batch)
    written = {}
    for j in range(len(pred)):
        tag = f"{batch['index'][j]:05d}"
        files = {
            "I_b_prime": save_image(pred[j], out_dir / f"{tag}_I_b_prime.png"),
            "I_b_tilde": save_image(tilde[j], out_dir / f"{tag}_I_b_tilde.png"),
        }
        if a_i is not None:
            files["A_i"] = save_image(a_i[j], out_dir / f"{tag}_A_i.png", signed=False)
        written[tag] = {k: str(v) for k, v in files.items()}
    return written


def ablate(base: TrainConfig, out_dir=None, names=tuple(BASELINES)) -> dict:
    """Train every baseline on the shared seed and dataset; write a comparison table."""
    out = Path(out_dir or base.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = {}
    for name in names:
        cfg = baseline_config(base, name).replace(out_dir=str(out / name))
        result = train(cfg)
        result.report["baseline"] = name
        reports[name] = result.report
    rows = [(n, r["ssim"], r["mask_ssim"], r["parameters_generator"]) for n, r in reports.items()]
    with open(out / "ablation.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("baseline", "ssim", "mask_ssim", "parameters_generator"))
        w.writerows(rows)
    (out / "ablation.json").write_text(json.dumps(reports, indent=2))
    from . import plotting

    plotting.plot_ablation(reports, out / "ablation.png")
    return reports
