"""Experiment orchestration: datasets, runs, evaluation and the gamma sweep."""
from __future__ import annotations

import json
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .config import RunConfig, save_config
from .data import synth_levels, synth_terrain
from .estimators import ConstrainedGAN, ConstrainedVQVAE, PenalizedGAN, PostprocessGAN
from .exceptions import DataValidationError
from .io import MetricLog, read_grids, verify_manifest, write_grids, write_manifest
from .levels import N_CLASSES, LevelSpec, check_feasible
from .metrics import evaluate_population
from .nn import load_checkpoint, save_checkpoint
from .paths import COST_TABLE, TerrainGrid, is_valid_path, shortest_path
from .training import sp_costs

log = logging.getLogger(__name__)


def make_dataset(kind: str, n: int, dims: tuple, seed: int, out_dir) -> Path:
    """Synthesize a corpus, write it with its manifest, return the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if kind == "levels":
        grids = synth_levels(LevelSpec(*dims), n, seed)
    elif kind == "terrain":
        grids = synth_terrain(dims, n, seed)
    else:
        raise ValueError(f"unknown dataset kind {kind!r}")
    data_path = out_dir / f"{kind}.jsonl"
    write_grids(data_path, grids, kind, extra={"seed": seed})
    manifest_path = out_dir / f"{kind}.manifest.json"
    write_manifest(manifest_path, data_path, kind, n, dims, seed)
    return manifest_path


def load_dataset(cfg: RunConfig) -> np.ndarray:
    h, w = cfg.dims
    if cfg.data.path:
        grids = verify_manifest(cfg.data.path)
        if grids.shape[1:3] != (h, w):
            raise DataValidationError(f"dataset grids are {grids.shape[1:3]}, config wants {(h, w)}")
        return grids
    if cfg.is_terrain:
        return synth_terrain((h, w), cfg.n_train, cfg.data.seed)
    return synth_levels(LevelSpec(h, w), cfg.n_train, cfg.data.seed)


def build_estimator(cfg: RunConfig, callback=None):
    h, w = cfg.dims
    if cfg.regime in ("constrained-gan", "baseline-postprocess"):
        cls = ConstrainedGAN if cfg.regime == "constrained-gan" else PostprocessGAN
        return cls(height=h, width=w, random_state=cfg.seed, callback=callback, **vars(cfg.gan))
    if cfg.regime == "penalized-gan":
        params = {k: v for k, v in vars(cfg.penalized).items() if k != "gamma_ladder"}
        return PenalizedGAN(height=h, width=w, random_state=cfg.seed, callback=callback, **params)
    params = {k: v for k, v in vars(cfg.vqvae).items() if k != "n_heldout"}
    return ConstrainedVQVAE(height=h, width=w, random_state=cfg.seed, callback=callback, **params)


def feasible_rate(samples: np.ndarray, kind: str, dims: tuple) -> float:
    h, w = dims
    if kind == "terrain":
        maps = samples.reshape(len(samples), h, w, N_CLASSES)
        grids = [TerrainGrid(m @ COST_TABLE) for m in maps]
        return float(np.mean([is_valid_path(shortest_path(g), g) for g in grids]))
    spec = LevelSpec(h, w)
    return float(np.mean([check_feasible(s.reshape(spec.shape), spec) for s in samples]))


def evaluate_samples(samples, reals, kind: str, dims: tuple, k: int = 5, group_loss=float("nan")):
    """Full report; for terrain the individual loss is the mean shortest-path cost."""
    samples = np.asarray(samples, dtype=np.float64).reshape(len(samples), -1)
    reals = np.asarray(reals, dtype=np.float64).reshape(len(reals), -1)
    if len(samples) == 0:
        raise ValueError("no samples to evaluate")
    if samples.shape[1] != reals.shape[1]:
        raise DataValidationError(f"sample/reference widths differ: {samples.shape[1]} vs {reals.shape[1]}")
    individual = float(sp_costs(samples, dims).mean()) if kind == "terrain" else float("nan")
    return evaluate_population(samples, reals, k, group_loss=group_loss, individual_loss=individual,
                               feasible_fraction=feasible_rate(samples, kind, dims))


def _eval_row(epoch, phase, report) -> dict:
    return {"epoch": epoch, "phase": phase, "group_loss": report.mean_group_loss,
            "individual_loss": report.mean_individual_loss, "feasible_rate": report.feasible_fraction,
            "unique_fraction": report.unique_fraction, "density": report.density, "coverage": report.coverage}


def _checkpoint(est, cfg: RunConfig, path) -> None:
    st = est.state_
    if cfg.regime == "vqvae":
        nets = {"encoder": st.encoder, "decoder": st.decoder}
        extra = {"codebook": st.codebook.data.tolist()}
    else:
        nets = {"generator": st.generator, "adversary": st.adversary}
        extra = {}
    save_checkpoint(path, nets, cfg.seed, st.steps, extra)


def run(cfg: RunConfig, out_dir) -> dict:
    """Train one regime, log every epoch, evaluate at init and at the end."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.json")
    kind = "terrain" if cfg.is_terrain else "levels"
    data = load_dataset(cfg)
    metrics = MetricLog(out / "metrics.csv")
    extra = {}
    train = data
    if cfg.regime == "vqvae":
        n_ho = cfg.vqvae.n_heldout
        if n_ho >= len(data):
            raise DataValidationError("held-out split leaves no training levels")
        train, heldout = data[:len(data) - n_ho], data[len(data) - n_ho:]

    def on_epoch(est, rec):
        metrics.append(**rec)
        log.info("epoch %s %s: %s", rec["epoch"], rec["phase"], rec)

    est = build_estimator(cfg, on_epoch)
    est.initialize(train)
    samples = est.sample(cfg.n_eval)
    report = evaluate_samples(samples, train, kind, cfg.dims, cfg.k)
    metrics.append(**_eval_row(0, "init", report))
    if cfg.regime == "vqvae":
        extra["heldout_recon_init"] = est.reconstruction_loss(heldout)
    total_epochs = est.epochs + getattr(est, "baseline_epochs", 0)
    if total_epochs > 0:
        est.fit(train)
        group = est.history_[-1]["group_loss"]
        samples = est.sample(cfg.n_eval)
        report = evaluate_samples(samples, train, kind, cfg.dims, cfg.k, group_loss=group)
        metrics.append(**_eval_row(total_epochs, "final", report))
        if cfg.regime == "vqvae":
            extra["heldout_recon_final"] = est.reconstruction_loss(heldout)
    metrics.save()
    h, w = cfg.dims
    write_grids(out / "samples.jsonl", samples.reshape(len(samples), h, w, N_CLASSES), "samples")
    _checkpoint(est, cfg, out / "checkpoint.json")
    result = {**report.as_dict(), **extra, "regime": cfg.regime, "seed": cfg.seed}
    (out / "report.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return result


def load_model(run_dir):
    """Rebuild the estimator saved by ``run`` for sampling."""
    run_dir = Path(run_dir)
    cfg = RunConfig.from_dict(json.loads((run_dir / "config.json").read_text(encoding="utf-8")))
    nets, _, step, extra = load_checkpoint(run_dir / "checkpoint.json")
    est = build_estimator(cfg)
    h, w = cfg.dims
    dummy = synth_terrain((h, w), 2, 0) if cfg.is_terrain else synth_levels(LevelSpec(h, w), 2, 0)
    est.initialize(dummy)
    st = est.state_
    if cfg.regime == "vqvae":
        st.encoder, st.decoder = nets["encoder"], nets["decoder"]
        st.codebook = Tensor(np.array(extra["codebook"]), requires_grad=True)
    else:
        st.generator, st.adversary = nets["generator"], nets["adversary"]
    st.steps = step
    return est, cfg


def generate(run_dir, n: int, seed: int | None, out) -> np.ndarray:
    est, cfg = load_model(run_dir)
    samples = est.sample(n, random_state=seed)
    h, w = cfg.dims
    write_grids(out, samples.reshape(n, h, w, N_CLASSES), "samples")
    return samples


def evaluate_files(samples_path, reference_path, k: int = 5):
    """Report for a samples file against a reference dataset (grid file or manifest)."""
    samples, _ = read_grids(samples_path)
    if str(reference_path).endswith(".manifest.json"):
        reference = verify_manifest(reference_path)
        kind = json.loads(Path(reference_path).read_text(encoding="utf-8"))["kind"]
    else:
        reference, header = read_grids(reference_path)
        kind = header["kind"]
    if kind not in ("levels", "terrain"):
        raise DataValidationError(f"reference must be a levels or terrain dataset, got {kind!r}")
    if len(samples) == 0:
        raise ValueError("samples file holds no grids")
    if samples.shape[1:] != reference.shape[1:]:
        raise DataValidationError(f"sample grids {samples.shape[1:]} vs reference {reference.shape[1:]}")
    return evaluate_samples(samples, reference, kind, samples.shape[1:3], k)


def sweep_gamma(cfg: RunConfig, out_dir, ladder=None) -> list[dict]:
    """Penalized runs over the gamma ladder; writes sweep.csv and returns the rows."""
    if cfg.regime != "penalized-gan":
        cfg = replace(cfg, regime="penalized-gan")
    ladder = tuple(cfg.penalized.gamma_ladder if ladder is None else ladder)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, gamma in enumerate(ladder):
        sub = replace(cfg, penalized=replace(cfg.penalized, gamma=float(gamma)))
        res = run(sub, out / f"gamma_{i}")
        rows.append({"gamma": float(gamma), "mean_sp": res["mean_individual_loss"], "density": res["density"],
                     "coverage": res["coverage"], "unique_fraction": res["unique_fraction"]})
    lines = ["gamma,mean_sp,density,coverage,unique_fraction"]
    lines += [",".join(repr(r[c]) for c in ("gamma", "mean_sp", "density", "coverage", "unique_fraction"))
              for r in rows]
    (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return rows

