"""Training regimes: constrained WGAN, penalized WGAN, constrained VQVAE.

All regimes share one step shape: sample latent scores, push them through an
exact solver, score the population, backpropagate through the solver layer.
The WGAN variants use weight clipping on the adversary.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import Tensor, gather_rows, straight_through
from .exceptions import DataValidationError
from .layers import LevelProblem, PathProblem, SolverLayer, SolverLayerConfig
from .levels import N_CLASSES, LevelSpec, check_feasible
from .nn import DenseNet, OptimState, RngStream, optim_step
from .paths import COST_TABLE, TerrainGrid, shortest_path

log = logging.getLogger(__name__)

ADVERSARY_MODES = ("fixed", "updated")
GEN_OUTPUTS = ("scores", "softmax")
PENALTIES = ("path", "semantic")


@dataclass
class GanTrainConfig:
    noise_dim: int = 8
    hidden: tuple = (64, 64)
    batch_size: int = 32
    epochs: int = 30
    n_critic: int = 5
    w_clip: float = 0.01
    lr_gen: float = 1e-3
    lr_adv: float = 1e-3
    # the clipped critic's input gradients are ~1e-5, so the interpolation
    # strength must be large for perturbed solves to differ at all
    solver: SolverLayerConfig = field(default_factory=lambda: SolverLayerConfig("blackbox", 5000.0, True))
    adversary_mode: str = "updated"
    gen_output: str = "softmax"

    def __post_init__(self):
        if self.gen_output not in GEN_OUTPUTS:
            raise ValueError(f"gen_output must be one of {GEN_OUTPUTS}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr_gen <= 0 or self.lr_adv <= 0:
            raise ValueError("learning rates must be positive")
        if self.adversary_mode not in ADVERSARY_MODES:
            raise ValueError(f"adversary_mode must be one of {ADVERSARY_MODES}")
        if isinstance(self.solver, dict):
            self.solver = SolverLayerConfig(**self.solver)
        self.hidden = tuple(self.hidden)


@dataclass
class PenalizedTrainConfig(GanTrainConfig):
    gamma: float = 0.0
    penalty: str = "path"
    solver: SolverLayerConfig = field(default_factory=lambda: SolverLayerConfig("identity", 20.0, True))

    def __post_init__(self):
        super().__post_init__()
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.penalty not in PENALTIES:
            raise ValueError(f"penalty must be one of {PENALTIES}")


@dataclass
class VqvaeTrainConfig:
    codebook_size: int = 32
    embedding_dim: int = 8
    hidden: tuple = (64,)
    beta1: float = 1.0
    beta2: float = 1.0
    gamma_commit: float = 0.25
    epochs: int = 30
    lr: float = 1e-3
    solver: SolverLayerConfig = field(default_factory=lambda: SolverLayerConfig("identity", 10.0, True))
    use_recon: bool = True
    use_objective: bool = False

    def __post_init__(self):
        if self.codebook_size < 2:
            raise ValueError("codebook needs at least two entries")
        if min(self.beta1, self.beta2, self.gamma_commit) < 0:
            raise ValueError("loss weights must be non-negative")
        if isinstance(self.solver, dict):
            self.solver = SolverLayerConfig(**self.solver)
        self.hidden = tuple(self.hidden)


# ---------------------------------------------------------------------------
# shared pieces


@dataclass
class StepResult:
    x: np.ndarray
    c: np.ndarray
    group_loss: float
    individual_loss: float


def genco_step(generator: DenseNet, opt: OptimState, layer: SolverLayer, noise: np.ndarray,
               group_loss: Callable[[Tensor, Tensor], Tensor] | None,
               individual_loss: Callable[[Tensor, Tensor], Tensor] | None = None,
               gamma: float = 0.0, latent: Callable[[Tensor], Tensor] | None = None,
               audit: Callable[[np.ndarray], None] | None = None) -> StepResult:
    """One generator update on group_loss(X, C) + gamma * mean_j individual(x_j).

    ``latent`` maps raw generator output to the solver input (identity when
    None). ``audit`` sees every solution batch before any loss is formed.
    """
    generator.zero_grad()
    c = generator(Tensor(noise))
    if latent is not None:
        c = latent(c)
    x = layer(c)
    if audit is not None:
        audit(x.data)
    total = None
    g_val = i_val = 0.0
    if group_loss is not None:
        g = group_loss(x, c)
        g_val = float(g.data)
        total = g
    if individual_loss is not None and gamma != 0.0:
        ind = individual_loss(x, c).mean()
        i_val = float(ind.data)
        total = ind * gamma if total is None else total + ind * gamma
    elif individual_loss is not None:
        i_val = float(individual_loss(x.detach(), c.detach()).mean().data)
    if total is not None:
        total.backward()
        for p in generator.parameters():
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
        optim_step(generator, opt)
    return StepResult(x.data, c.data, g_val, i_val)


def level_auditor(spec: LevelSpec) -> Callable[[np.ndarray], None]:
    def audit(x: np.ndarray) -> None:
        for row in x:
            if not check_feasible(row.reshape(spec.shape), spec):
                raise AssertionError("solver returned an infeasible level")
    return audit


def path_objective(costs: Tensor, layer: SolverLayer) -> Tensor:
    """Per-row shortest-path cost, differentiable in the node costs."""
    x = layer(costs)
    return (costs * x).sum(axis=1)


def tile_costs(tiles: Tensor, n_cells: int) -> Tensor:
    """(batch, H*W*8) tile probabilities -> (batch, H*W) node costs."""
    batch = tiles.shape[0]
    table = Tensor(COST_TABLE.reshape(N_CLASSES, 1))
    return (tiles.reshape(batch * n_cells, N_CLASSES) @ table).reshape(batch, n_cells)


def semantic_penalty(c) -> float | Tensor:
    """Mean expected tile cost over all cells."""
    if isinstance(c, Tensor):
        table = Tensor(COST_TABLE.reshape(N_CLASSES, 1))
        return (c.reshape(-1, N_CLASSES) @ table).mean()
    c = np.asarray(c, dtype=np.float64)
    return float((c.reshape(-1, N_CLASSES) @ COST_TABLE).mean())


def _critic_update(adv: DenseNet, opt: OptimState, real: np.ndarray, fake: np.ndarray) -> float:
    adv.zero_grad()
    loss = adv(Tensor(fake)).mean() - adv(Tensor(real)).mean()
    loss.backward()
    optim_step(adv, opt)
    return float(loss.data)


def _batches_per_epoch(n_data: int, batch_size: int) -> int:
    return max(1, math.ceil(n_data / batch_size))


@dataclass
class GanState:
    """Generator, adversary and their optimizers for one training run."""

    generator: DenseNet
    adversary: DenseNet
    gen_opt: OptimState
    adv_opt: OptimState
    rng: RngStream
    steps: int = 0

    @classmethod
    def create(cls, in_dim_gen: int, out_dim: int, cfg: GanTrainConfig, seed: int,
               gen_output: str = "identity") -> "GanState":
        rng = RngStream(seed)
        gen = DenseNet.build([in_dim_gen, *cfg.hidden, out_dim], rng, output=gen_output)
        adv = DenseNet.build([out_dim, *cfg.hidden, 1], rng, scale=1.0)
        for p in adv.parameters():
            np.clip(p.data, -cfg.w_clip, cfg.w_clip, out=p.data)
        return cls(gen, adv,
                   OptimState("adam", cfg.lr_gen),
                   OptimState("adam", cfg.lr_adv, w_clip=cfg.w_clip),
                   rng)


def _sample_real(data: np.ndarray, rng: RngStream, k: int) -> np.ndarray:
    return data[rng.integers(0, len(data), size=k)]


def _validate_levels(data: np.ndarray, spec: LevelSpec) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64).reshape(len(data), *spec.shape)
    for i, level in enumerate(data):
        if not check_feasible(level, spec):
            raise DataValidationError(f"training level {i} is not playable")
    return data.reshape(len(data), -1)


# ---------------------------------------------------------------------------
# constrained GAN and its postprocessing baseline


def constrained_gan_epoch(state: GanState, data: np.ndarray, spec: LevelSpec, cfg: GanTrainConfig,
                          layer: SolverLayer | None = None) -> list[dict]:
    """One epoch of WGAN training where the adversary only ever sees solved levels."""
    data = _validate_levels(data, spec)
    layer = layer or SolverLayer(LevelProblem(spec), cfg.solver)
    audit = level_auditor(spec)
    latent = output_map(cfg)
    rows = []
    for _ in range(_batches_per_epoch(len(data), cfg.batch_size)):
        critic = float("nan")
        if cfg.adversary_mode == "updated":
            for _ in range(cfg.n_critic):
                noise = state.rng.normal((cfg.batch_size, cfg.noise_dim))
                fake, _ = layer.solve_batch(latent(state.generator(Tensor(noise))).data)
                audit(fake)
                critic = _critic_update(state.adversary, state.adv_opt,
                                        _sample_real(data, state.rng, cfg.batch_size), fake)
        noise = state.rng.normal((cfg.batch_size, cfg.noise_dim))
        adv = state.adversary

        def group(x, c):
            return -adv(x).mean()

        adv_params = adv.parameters()
        res = genco_step(state.generator, state.gen_opt, layer, noise, group, latent=latent, audit=audit)
        for p in adv_params:
            p.grad = None
        state.steps += 1
        rows.append({"group_loss": res.group_loss, "critic_loss": critic, "x": res.x})
    return rows


def postprocess_baseline_epoch(state: GanState, data: np.ndarray, spec: LevelSpec,
                               cfg: GanTrainConfig) -> list[dict]:
    """Plain WGAN on continuous scores; levels are only projected at sampling time."""
    data = _validate_levels(data, spec)
    latent = output_map(cfg)
    rows = []
    for _ in range(_batches_per_epoch(len(data), cfg.batch_size)):
        critic = float("nan")
        for _ in range(cfg.n_critic):
            noise = state.rng.normal((cfg.batch_size, cfg.noise_dim))
            fake = latent(state.generator(Tensor(noise))).data
            critic = _critic_update(state.adversary, state.adv_opt,
                                    _sample_real(data, state.rng, cfg.batch_size), fake)
        noise = state.rng.normal((cfg.batch_size, cfg.noise_dim))
        state.generator.zero_grad()
        c = latent(state.generator(Tensor(noise)))
        loss = -state.adversary(c).mean()
        loss.backward()
        optim_step(state.generator, state.gen_opt)
        state.adversary.zero_grad()
        state.steps += 1
        rows.append({"group_loss": float(loss.data), "critic_loss": critic, "c": c.data})
    return rows


# ---------------------------------------------------------------------------
# penalized GAN on tile-probability maps


def tile_softmax(raw: Tensor) -> Tensor:
    batch = raw.shape[0]
    return raw.reshape(batch, -1, N_CLASSES).softmax(axis=-1).reshape(batch, -1)


def output_map(cfg: GanTrainConfig) -> Callable[[Tensor], Tensor]:
    """Generator head: raw scores, or per-cell tile probabilities."""
    if cfg.gen_output == "softmax":
        return tile_softmax
    return lambda raw: raw


def penalized_gan_epoch(state: GanState, data: np.ndarray, shape: tuple, cfg: PenalizedTrainConfig,
                        layer: SolverLayer | None = None) -> list[dict]:
    """WGAN on the maps themselves plus gamma * shortest-path cost of each map."""
    h, w = shape
    data = np.asarray(data, dtype=np.float64).reshape(len(data), -1)
    if data.shape[1] != h * w * N_CLASSES:
        raise DataValidationError(f"terrain maps must have {h * w * N_CLASSES} entries")
    layer = layer or SolverLayer(PathProblem(h, w), cfg.solver)
    n_cells = h * w
    rows = []
    for _ in range(_batches_per_epoch(len(data), cfg.batch_size)):
        critic = float("nan")
        if cfg.adversary_mode == "updated":
            for _ in range(cfg.n_critic):
                noise = state.rng.normal((cfg.batch_size, cfg.noise_dim))
                fake = tile_softmax(state.generator(Tensor(noise))).data
                critic = _critic_update(state.adversary, state.adv_opt,
                                        _sample_real(data, state.rng, cfg.batch_size), fake)
        noise = state.rng.normal((cfg.batch_size, cfg.noise_dim))
        adv = state.adversary

        def group(x, c):
            return -adv(c).mean()

        if cfg.penalty == "path":
            def individual(x, c):
                return path_objective(tile_costs(c, n_cells), layer)
        else:
            def individual(x, c):
                return tile_costs(c, n_cells).mean(axis=1)

        # the map itself is the sample; the path solve lives inside the penalty
        res = genco_step(state.generator, state.gen_opt, _PassThrough(), noise, group, individual,
                         gamma=cfg.gamma, latent=tile_softmax)
        for p in adv.parameters():
            p.grad = None
        state.steps += 1
        rows.append({"group_loss": res.group_loss, "individual_loss": res.individual_loss,
                     "critic_loss": critic, "c": res.c})
    return rows


class _PassThrough:
    def __call__(self, c: Tensor) -> Tensor:
        return c


def sp_costs(maps: np.ndarray, shape: tuple) -> np.ndarray:
    """Shortest-path cost of each tile map under the fixed cost table."""
    h, w = shape
    maps = np.asarray(maps, dtype=np.float64).reshape(len(maps), h, w, N_CLASSES)
    return np.array([shortest_path(TerrainGrid(m @ COST_TABLE)).total_cost for m in maps])


# ---------------------------------------------------------------------------
# constrained VQVAE


@dataclass
class VqvaeState:
    encoder: DenseNet
    decoder: DenseNet
    codebook: Tensor
    opt: OptimState
    rng: RngStream
    steps: int = 0

    @classmethod
    def create(cls, in_dim: int, cfg: VqvaeTrainConfig, seed: int) -> "VqvaeState":
        rng = RngStream(seed)
        enc = DenseNet.build([in_dim, *cfg.hidden, cfg.embedding_dim], rng)
        dec = DenseNet.build([cfg.embedding_dim, *cfg.hidden[::-1], in_dim], rng)
        book = Tensor(rng.uniform(-1.0, 1.0, (cfg.codebook_size, cfg.embedding_dim)), requires_grad=True)
        return cls(enc, dec, book, OptimState("adam", cfg.lr), rng)

    def parameters(self) -> list[Tensor]:
        return self.encoder.parameters() + self.decoder.parameters() + [self.codebook]

    def init_codebook(self, data: np.ndarray) -> None:
        """Seed the codebook with jittered encodings of training rows so no entry starts dead."""
        z = self.encoder(Tensor(np.asarray(data, dtype=np.float64).reshape(len(data), -1))).data
        k = self.codebook.shape[0]
        idx = self.rng.generator.choice(len(z), size=k, replace=k > len(z))
        self.codebook.data = z[idx] + 0.01 * self.rng.normal(z[idx].shape)


def quantize(z_e: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    """Index of the nearest codebook row for each embedding; lowest index wins ties."""
    z_e = np.atleast_2d(z_e)
    d = ((z_e[:, None, :] - codebook[None, :, :]) ** 2).sum(axis=-1)
    return d.argmin(axis=1)


@dataclass
class VqvaeStepResult:
    x_tilde: np.ndarray
    code: int
    recon: float
    quant: float
    objective: float


def vqvae_step(state: VqvaeState, datum: np.ndarray, spec: LevelSpec, cfg: VqvaeTrainConfig,
               layer: SolverLayer | None = None, path_layer: SolverLayer | None = None) -> VqvaeStepResult:
    """encode -> quantize -> decode -> project -> losses -> one optimizer step."""
    datum = np.asarray(datum, dtype=np.float64).reshape(1, -1)
    if not check_feasible(datum.reshape(spec.shape), spec):
        raise DataValidationError("vqvae datum is not a playable level")
    layer = layer or SolverLayer(LevelProblem(spec), cfg.solver)
    path_layer = path_layer or SolverLayer(PathProblem(spec.height, spec.width), SolverLayerConfig("identity", 20.0, True))
    for p in state.parameters():
        p.grad = None
    z_e = state.encoder(Tensor(datum))
    code = int(quantize(z_e.data, state.codebook.data)[0])
    z_q = gather_rows(state.codebook, np.array([code]))
    codebook_loss = (z_q - z_e.detach()).square().sum()
    commit_loss = (z_e - z_q.detach()).square().sum()
    c_tilde = state.decoder(straight_through(z_e, z_q.data))
    x_tilde = layer(c_tilde)
    if not check_feasible(x_tilde.data.reshape(spec.shape), spec):
        raise AssertionError("solver returned an infeasible level")
    total = codebook_loss * cfg.beta1 + commit_loss * cfg.gamma_commit
    recon = (x_tilde - Tensor(datum)).square().sum()
    if cfg.use_recon:
        total = total + recon
    n_cells = spec.n_cells
    obj_val = float("nan")
    if cfg.use_objective:
        obj = path_objective(tile_costs(x_tilde, n_cells), path_layer).sum()
        obj_val = float(obj.data)
        total = total + obj * cfg.beta2
    total.backward()
    params = state.parameters()
    for p in params:
        if p.grad is None:
            p.grad = np.zeros_like(p.data)
    optim_step(params, state.opt)
    state.steps += 1
    return VqvaeStepResult(x_tilde.data.reshape(spec.shape), code, float(recon.data),
                           float(codebook_loss.data), obj_val)


def vqvae_epoch(state: VqvaeState, data: np.ndarray, spec: LevelSpec, cfg: VqvaeTrainConfig) -> list[VqvaeStepResult]:
    data = _validate_levels(data, spec)
    layer = SolverLayer(LevelProblem(spec), cfg.solver)
    path_layer = SolverLayer(PathProblem(spec.height, spec.width), SolverLayerConfig("identity", 20.0, True))
    order = state.rng.generator.permutation(len(data))
    return [vqvae_step(state, data[i], spec, cfg, layer, path_layer) for i in order]


def vqvae_reconstruct(state: VqvaeState, levels: np.ndarray, spec: LevelSpec) -> np.ndarray:
    levels = np.asarray(levels, dtype=np.float64).reshape(len(levels), -1)
    z = state.encoder(Tensor(levels)).data
    codes = quantize(z, state.codebook.data)
    c = state.decoder(Tensor(state.codebook.data[codes])).data
    layer = SolverLayer(LevelProblem(spec))
    return layer.solve_batch(c)[0]


def recon_loss(levels: np.ndarray, recon: np.ndarray) -> float:
    levels = np.asarray(levels, dtype=np.float64).reshape(len(levels), -1)
    return float(((levels - recon) ** 2).sum(axis=1).mean())


# ---------------------------------------------------------------------------
# sampling


def generate_samples(generator: DenseNet, n: int, rng: RngStream, problem=None,
                     latent: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """Draw ``n`` samples; with a problem, each is the exact solve of its scores."""
    if n < 1:
        raise ValueError("n must be >= 1")
    noise = rng.normal((n, generator.input_dim))
    c = generator(Tensor(noise)).data
    if latent is not None:
        c = latent(c)
    if problem is None:
        return c
    return np.stack([problem.solve(row).ravel() for row in c])


def sample_vqvae(state: VqvaeState, n: int, spec: LevelSpec, rng: RngStream) -> np.ndarray:
    codes = rng.integers(0, state.codebook.shape[0], size=n)
    c = state.decoder(Tensor(state.codebook.data[codes])).data
    problem = LevelProblem(spec)
    return np.stack([problem.solve(row).ravel() for row in c])


def softmax_rows(raw: np.ndarray) -> np.ndarray:
    return tile_softmax(Tensor(raw)).data
