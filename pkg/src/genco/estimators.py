"""Estimator wrappers with fit / transform / sample and sklearn parameter handling."""
from __future__ import annotations

import copy

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .autodiff import Tensor
from .exceptions import DataValidationError
from .layers import LevelProblem, SolverLayerConfig
from .levels import N_CLASSES, LevelSpec, check_feasible
from .metrics import uniqueness
from .nn import RngStream
from .paths import COST_TABLE, TerrainGrid, is_valid_path, shortest_path
from .training import (GanState, GanTrainConfig, PenalizedTrainConfig, VqvaeState, VqvaeTrainConfig,
                       constrained_gan_epoch, generate_samples, penalized_gan_epoch,
                       postprocess_baseline_epoch, quantize, recon_loss, sample_vqvae, softmax_rows,
                       sp_costs, vqvae_epoch, vqvae_reconstruct)


def _grid_array(X, height: int, width: int, name: str = "X") -> np.ndarray:
    """Accept (n, H*W*8) or (n, H, W, 8); return flat float rows."""
    arr = check_array(X, ensure_2d=False, allow_nd=True, dtype=np.float64, input_name=name)
    n_feat = height * width * N_CLASSES
    if arr.ndim == 4 and arr.shape[1:] != (height, width, N_CLASSES):
        raise DataValidationError(f"{name} grids must be {height}x{width}x{N_CLASSES}, got {arr.shape[1:]}")
    arr = arr.reshape(len(arr), -1)
    if arr.shape[1] != n_feat:
        raise DataValidationError(f"{name} needs {n_feat} features per row, got {arr.shape[1]}")
    return arr


class LevelProjector(TransformerMixin, BaseEstimator):
    """Map score fields to the best playable level under c^T x."""

    def __init__(self, height: int = 5, width: int = 5, node_budget: int = 100_000):
        self.height = height
        self.width = width
        self.node_budget = node_budget

    def fit(self, X=None, y=None):
        self.spec_ = LevelSpec(self.height, self.width)
        self.spec_.check_satisfiable()
        self.n_features_in_ = self.height * self.width * N_CLASSES
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        C = _grid_array(X, self.height, self.width)
        problem = LevelProblem(self.spec_, self.node_budget)
        return np.stack([problem.solve(c).ravel() for c in C])


def _fitted_spec(est) -> LevelSpec:
    return LevelSpec(est.height, est.width)


class _GanBase(BaseEstimator):
    def _gan_config(self) -> GanTrainConfig:
        return GanTrainConfig(noise_dim=self.noise_dim, hidden=self.hidden, batch_size=self.batch_size,
                              epochs=self.epochs, n_critic=self.n_critic, w_clip=self.w_clip,
                              lr_gen=self.lr_gen, lr_adv=self.lr_adv,
                              solver=SolverLayerConfig(self.solver_method, self.solver_lam, True),
                              adversary_mode=self.adversary_mode, gen_output=self.gen_output)

    def _log_epoch(self, epoch: int, phase: str, rows: list[dict], spec: LevelSpec | None) -> dict:
        rec = {"epoch": epoch, "phase": phase,
               "group_loss": float(np.mean([r["group_loss"] for r in rows])),
               "critic_loss": float(np.mean([r["critic_loss"] for r in rows]))}
        if "individual_loss" in rows[0]:
            rec["individual_loss"] = float(np.mean([r["individual_loss"] for r in rows]))
        if "x" in rows[0] and spec is not None:
            xs = np.concatenate([r["x"] for r in rows])
            rec["feasible_rate"] = float(np.mean([check_feasible(x.reshape(spec.shape), spec) for x in xs]))
            rec["unique_fraction"] = uniqueness(xs)
        self.history_.append(rec)
        if self.callback is not None:
            self.callback(self, rec)
        return rec


class ConstrainedGAN(_GanBase):
    """WGAN whose adversary only sees exactly projected, playable levels.

    With ``baseline_epochs > 0`` the generator and adversary are first
    trained as the postprocess baseline, then switched to the solver loop.
    """

    def __init__(self, height=5, width=5, noise_dim=8, hidden=(64, 64), batch_size=32, epochs=50,
                 baseline_epochs=100, n_critic=5, w_clip=0.01, lr_gen=1e-3, lr_adv=1e-3,
                 solver_method="blackbox", solver_lam=5000.0, adversary_mode="updated",
                 gen_output="softmax", random_state=0, callback=None):
        self.height = height
        self.width = width
        self.noise_dim = noise_dim
        self.hidden = hidden
        self.batch_size = batch_size
        self.epochs = epochs
        self.baseline_epochs = baseline_epochs
        self.n_critic = n_critic
        self.w_clip = w_clip
        self.lr_gen = lr_gen
        self.lr_adv = lr_adv
        self.solver_method = solver_method
        self.solver_lam = solver_lam
        self.adversary_mode = adversary_mode
        self.gen_output = gen_output
        self.random_state = random_state
        self.callback = callback

    solver_phase = "genco"

    def _init_state(self, X):
        self.spec_ = _fitted_spec(self)
        X = _grid_array(X, self.height, self.width)
        for i, row in enumerate(X):
            if not check_feasible(row.reshape(self.spec_.shape), self.spec_):
                raise DataValidationError(f"training level {i} is not playable")
        self.cfg_ = self._gan_config()
        self.state_ = GanState.create(self.noise_dim, X.shape[1], self.cfg_, int(self.random_state))
        self.history_ = []
        self.n_features_in_ = X.shape[1]
        return X

    def _main_epoch(self, X):
        return constrained_gan_epoch(self.state_, X, self.spec_, self.cfg_)

    def fit(self, X, y=None):
        X = self._init_state(X)
        # warm-up always updates the adversary, as the baseline would
        warm_cfg = copy.copy(self.cfg_)
        warm_cfg.adversary_mode = "updated"
        for e in range(self.baseline_epochs):
            rows = postprocess_baseline_epoch(self.state_, X, self.spec_, warm_cfg)
            self._log_epoch(e + 1, "baseline", rows, None)
        for e in range(self.epochs):
            rows = self._main_epoch(X)
            self._log_epoch(self.baseline_epochs + e + 1, self.solver_phase, rows, self.spec_)
        return self

    def initialize(self, X):
        """Set up an untrained model (useful for checking feasibility at init)."""
        self._init_state(X)
        return self

    def sample(self, n: int, random_state=None) -> np.ndarray:
        check_is_fitted(self, "state_")
        rng = RngStream(self.random_state + 7919 if random_state is None else random_state)
        latent = softmax_rows if self.gen_output == "softmax" else None
        return generate_samples(self.state_.generator, n, rng, LevelProblem(self.spec_), latent=latent)

    def scores(self, n: int, random_state=None) -> np.ndarray:
        """Continuous generator outputs before projection."""
        check_is_fitted(self, "state_")
        rng = RngStream(self.random_state + 7919 if random_state is None else random_state)
        latent = softmax_rows if self.gen_output == "softmax" else None
        return generate_samples(self.state_.generator, n, rng, None, latent=latent)


class PostprocessGAN(ConstrainedGAN):
    """Plain WGAN on continuous level scores; projection happens only in ``sample``."""

    solver_phase = "baseline"

    def _main_epoch(self, X):
        return postprocess_baseline_epoch(self.state_, X, self.spec_, self.cfg_)


class PenalizedGAN(_GanBase):
    """WGAN on tile-probability maps plus gamma times each map's shortest-path cost."""

    def __init__(self, height=6, width=6, gamma=0.0, penalty="path", noise_dim=8, hidden=(64, 64),
                 batch_size=32, epochs=30, n_critic=5, w_clip=0.01, lr_gen=1e-3, lr_adv=1e-3,
                 solver_method="identity", solver_lam=20.0, adversary_mode="updated",
                 random_state=0, callback=None):
        self.height = height
        self.width = width
        self.gamma = gamma
        self.penalty = penalty
        self.noise_dim = noise_dim
        self.hidden = hidden
        self.batch_size = batch_size
        self.epochs = epochs
        self.n_critic = n_critic
        self.w_clip = w_clip
        self.lr_gen = lr_gen
        self.lr_adv = lr_adv
        self.solver_method = solver_method
        self.solver_lam = solver_lam
        self.adversary_mode = adversary_mode
        self.random_state = random_state
        self.callback = callback

    gen_output = "softmax"

    def _penalized_config(self) -> PenalizedTrainConfig:
        base = self._gan_config()
        return PenalizedTrainConfig(**{**base.__dict__, "gamma": self.gamma, "penalty": self.penalty})

    def initialize(self, X):
        X = _grid_array(X, self.height, self.width)
        if np.any(X < 0) or not np.allclose(X.reshape(len(X), -1, N_CLASSES).sum(axis=-1), 1.0):
            raise DataValidationError("terrain maps must hold per-cell probability vectors")
        self.cfg_ = self._penalized_config()
        self.state_ = GanState.create(self.noise_dim, X.shape[1], self.cfg_, int(self.random_state))
        self.history_ = []
        self.n_features_in_ = X.shape[1]
        return X

    def fit(self, X, y=None):
        X = self.initialize(X)
        for e in range(self.epochs):
            rows = penalized_gan_epoch(self.state_, X, (self.height, self.width), self.cfg_)
            self._log_epoch(e + 1, "penalized", rows, None)
        return self

    def sample(self, n: int, random_state=None) -> np.ndarray:
        """Tile-probability maps, flat rows of length H*W*8."""
        check_is_fitted(self, "state_")
        rng = RngStream(self.random_state + 7919 if random_state is None else random_state)
        return generate_samples(self.state_.generator, n, rng, latent=softmax_rows)

    def paths(self, maps) -> list:
        """Shortest path through each map's cost grid."""
        maps = _grid_array(maps, self.height, self.width, "maps")
        grids = [TerrainGrid(m.reshape(self.height, self.width, N_CLASSES) @ COST_TABLE) for m in maps]
        return [(g, shortest_path(g)) for g in grids]

    def path_costs(self, maps) -> np.ndarray:
        return sp_costs(_grid_array(maps, self.height, self.width, "maps"), (self.height, self.width))

    def path_feasible_rate(self, maps) -> float:
        return float(np.mean([is_valid_path(sol, g) for g, sol in self.paths(maps)]))


class ConstrainedVQVAE(TransformerMixin, BaseEstimator):
    """Vector-quantized autoencoder whose decoder output is projected to a playable level."""

    def __init__(self, height=5, width=5, codebook_size=32, embedding_dim=8, hidden=(64,), beta1=1.0,
                 beta2=1.0, gamma_commit=0.25, epochs=30, lr=1e-3, use_recon=True, use_objective=False,
                 init_codebook=True, random_state=0, callback=None):
        self.height = height
        self.width = width
        self.codebook_size = codebook_size
        self.embedding_dim = embedding_dim
        self.hidden = hidden
        self.beta1 = beta1
        self.beta2 = beta2
        self.gamma_commit = gamma_commit
        self.epochs = epochs
        self.lr = lr
        self.use_recon = use_recon
        self.use_objective = use_objective
        self.init_codebook = init_codebook
        self.random_state = random_state
        self.callback = callback

    def _config(self) -> VqvaeTrainConfig:
        return VqvaeTrainConfig(codebook_size=self.codebook_size, embedding_dim=self.embedding_dim,
                                hidden=self.hidden, beta1=self.beta1, beta2=self.beta2,
                                gamma_commit=self.gamma_commit, epochs=self.epochs, lr=self.lr,
                                use_recon=self.use_recon, use_objective=self.use_objective)

    def initialize(self, X):
        self.spec_ = _fitted_spec(self)
        X = _grid_array(X, self.height, self.width)
        self.cfg_ = self._config()
        self.state_ = VqvaeState.create(X.shape[1], self.cfg_, int(self.random_state))
        if self.init_codebook:
            self.state_.init_codebook(X)
        self.history_ = []
        self.n_features_in_ = X.shape[1]
        return X

    def fit(self, X, y=None):
        X = self.initialize(X)
        for e in range(self.epochs):
            steps = vqvae_epoch(self.state_, X, self.spec_, self.cfg_)
            xs = np.stack([s.x_tilde.ravel() for s in steps])
            rec = {"epoch": e + 1, "phase": "vqvae",
                   "group_loss": float(np.mean([s.recon for s in steps])),
                   "individual_loss": float(np.mean([s.objective for s in steps])),
                   "feasible_rate": float(np.mean([check_feasible(x.reshape(self.spec_.shape), self.spec_) for x in xs])),
                   "unique_fraction": uniqueness(xs)}
            self.history_.append(rec)
            if self.callback is not None:
                self.callback(self, rec)
        return self

    def transform(self, X):
        """Codebook index of each level."""
        check_is_fitted(self, "state_")
        X = _grid_array(X, self.height, self.width)
        return quantize(self.state_.encoder(Tensor(X)).data, self.state_.codebook.data)

    def reconstruct(self, X) -> np.ndarray:
        check_is_fitted(self, "state_")
        return vqvae_reconstruct(self.state_, _grid_array(X, self.height, self.width), self.spec_)

    def reconstruction_loss(self, X) -> float:
        X = _grid_array(X, self.height, self.width)
        return recon_loss(X, self.reconstruct(X))

    def sample(self, n: int, random_state=None) -> np.ndarray:
        check_is_fitted(self, "state_")
        rng = RngStream(self.random_state + 7919 if random_state is None else random_state)
        return sample_vqvae(self.state_, n, self.spec_, rng)
