"""Dense networks, optimizers, seeded noise and checkpoints."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .autodiff import Tensor
from .exceptions import ContractError, DimensionError

ACTIVATIONS = ("relu", "tanh", "sigmoid", "identity")


class RngStream:
    """Seeded source of noise. Same seed, same sequence."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.counter = 0
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def normal(self, size) -> np.ndarray:
        self.counter += 1
        return self._gen.standard_normal(size)

    def uniform(self, low, high, size) -> np.ndarray:
        self.counter += 1
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        self.counter += 1
        return self._gen.integers(low, high, size)

    def spawn(self, offset: int) -> "RngStream":
        return RngStream((self.seed * 1_000_003 + offset) % (2**63))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


@dataclass
class DenseLayer:
    weight: Tensor
    bias: Tensor
    activation: str = "relu"

    def __call__(self, x: Tensor) -> Tensor:
        h = x @ self.weight + self.bias
        if self.activation == "identity":
            return h
        return getattr(h, self.activation)()


class DenseNet:
    """Feed-forward stack of affine layers with per-layer activations."""

    def __init__(self, layers: Sequence[DenseLayer]):
        if not layers:
            raise ValueError("DenseNet needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.weight.shape[1] != nxt.weight.shape[0]:
                raise DimensionError(f"layer dims do not chain: {prev.weight.shape} -> {nxt.weight.shape}")
        for layer in layers:
            if layer.activation not in ACTIVATIONS:
                raise ValueError(f"unknown activation {layer.activation!r}")
        self.layers = list(layers)

    @classmethod
    def build(cls, sizes: Sequence[int], rng: RngStream, hidden: str = "relu",
              output: str = "identity", scale: float = 1.0) -> "DenseNet":
        """Glorot-uniform initialised net with ``len(sizes) - 1`` layers."""
        layers = []
        for i, (n_in, n_out) in enumerate(zip(sizes, sizes[1:])):
            limit = scale * np.sqrt(6.0 / (n_in + n_out))
            w = rng.uniform(-limit, limit, (n_in, n_out))
            act = output if i == len(sizes) - 2 else hidden
            layers.append(DenseLayer(Tensor(w, requires_grad=True), Tensor(np.zeros(n_out), requires_grad=True), act))
        return cls(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    def parameters(self) -> list[Tensor]:
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def n_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def forward(self, x) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.shape[-1] != self.input_dim:
            raise DimensionError(f"expected input dim {self.input_dim}, got {x.shape}")
        for layer in self.layers:
            x = layer(x)
        return x

    __call__ = forward

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def copy(self) -> "DenseNet":
        return DenseNet([
            DenseLayer(Tensor(l.weight.data.copy(), requires_grad=True),
                       Tensor(l.bias.data.copy(), requires_grad=True), l.activation)
            for l in self.layers
        ])

    def flat(self) -> np.ndarray:
        return np.concatenate([p.data.ravel() for p in self.parameters()])

    def to_dict(self) -> dict:
        return {
            "layers": [
                {"shape": list(l.weight.shape), "activation": l.activation,
                 "weight": l.weight.data.ravel().tolist(), "bias": l.bias.data.tolist()}
                for l in self.layers
            ]
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DenseNet":
        layers = []
        for entry in payload["layers"]:
            shape = tuple(entry["shape"])
            w = np.array(entry["weight"], dtype=np.float64).reshape(shape)
            b = np.array(entry["bias"], dtype=np.float64)
            layers.append(DenseLayer(Tensor(w, requires_grad=True), Tensor(b, requires_grad=True), entry["activation"]))
        return cls(layers)


def forward(net: DenseNet, x) -> Tensor:
    return net.forward(x)


@dataclass
class OptimState:
    """Optimizer bookkeeping for one group of parameters.

    ``w_clip`` is the WGAN weight-clipping bound and is only set for adversaries.
    """

    method: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    w_clip: float | None = None
    step_count: int = 0
    moments: list = field(default_factory=list)

    def __post_init__(self):
        if self.method not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.method!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.w_clip is not None and self.w_clip <= 0:
            raise ValueError("w_clip must be positive")


def _params_of(target) -> list[Tensor]:
    if isinstance(target, DenseNet):
        return target.parameters()
    return list(target)


def optim_step(target: DenseNet | Iterable[Tensor], state: OptimState) -> None:
    """Apply one update in place, then clip if ``state.w_clip`` is set."""
    params = _params_of(target)
    for p in params:
        if p.grad is None:
            raise ContractError("optim_step called before gradients were populated")
    if state.method == "adam" and not state.moments:
        state.moments = [(np.zeros_like(p.data), np.zeros_like(p.data)) for p in params]
    if state.method == "adam" and len(state.moments) != len(params):
        raise ContractError("optimizer state does not match the parameter list")
    state.step_count += 1
    lr = state.learning_rate
    if state.method == "sgd":
        for p in params:
            p.data = p.data - lr * p.grad
    else:
        t = state.step_count
        bc1 = 1.0 - state.beta1**t
        bc2 = 1.0 - state.beta2**t
        for i, p in enumerate(params):
            m, v = state.moments[i]
            m = state.beta1 * m + (1.0 - state.beta1) * p.grad
            v = state.beta2 * v + (1.0 - state.beta2) * p.grad * p.grad
            state.moments[i] = (m, v)
            p.data = p.data - lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    if state.w_clip is not None:
        for p in params:
            np.clip(p.data, -state.w_clip, state.w_clip, out=p.data)
    for p in params:
        if not np.all(np.isfinite(p.data)):
            raise FloatingPointError("non-finite parameter after optimizer step")


def save_checkpoint(path, nets: dict[str, DenseNet], seed: int, step: int, extra: dict | None = None) -> None:
    """Write nets plus seed/step as JSON. Floats round-trip exactly through repr."""
    payload = {
        "format": "genco-checkpoint",
        "version": 1,
        "seed": int(seed),
        "step": int(step),
        "nets": {name: net.to_dict() for name, net in nets.items()},
        "extra": extra or {},
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True))


def load_checkpoint(path) -> tuple[dict[str, DenseNet], int, int, dict]:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != "genco-checkpoint":
        raise ValueError(f"{path} is not a checkpoint file")
    nets = {name: DenseNet.from_dict(d) for name, d in payload["nets"].items()}
    return nets, payload["seed"], payload["step"], payload.get("extra", {})
