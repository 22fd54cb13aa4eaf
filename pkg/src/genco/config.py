"""Run configuration: one JSON object, validated on load, unknown keys rejected."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

REGIMES = ("constrained-gan", "penalized-gan", "vqvae", "baseline-postprocess")
DEFAULT_GAMMA_LADDER = (0.0, 3e-5, 1e-4, 3e-4, 1e-3, 1e-2)


@dataclass
class GanSection:
    noise_dim: int = 8
    hidden: tuple = (64, 64)
    batch_size: int = 32
    epochs: int = 50
    baseline_epochs: int = 100
    n_critic: int = 5
    w_clip: float = 0.01
    lr_gen: float = 1e-3
    lr_adv: float = 1e-3
    solver_method: str = "blackbox"
    solver_lam: float = 5000.0
    adversary_mode: str = "updated"
    gen_output: str = "softmax"


@dataclass
class PenalizedSection:
    gamma: float = 0.0
    penalty: str = "path"
    noise_dim: int = 8
    hidden: tuple = (64, 64)
    batch_size: int = 32
    epochs: int = 30
    n_critic: int = 5
    w_clip: float = 0.01
    lr_gen: float = 1e-3
    lr_adv: float = 1e-3
    solver_method: str = "identity"
    solver_lam: float = 20.0
    adversary_mode: str = "updated"
    gamma_ladder: tuple = DEFAULT_GAMMA_LADDER


@dataclass
class VqvaeSection:
    codebook_size: int = 32
    embedding_dim: int = 8
    hidden: tuple = (64,)
    beta1: float = 1.0
    beta2: float = 1.0
    gamma_commit: float = 0.25
    epochs: int = 30
    lr: float = 1e-3
    use_recon: bool = True
    use_objective: bool = False
    init_codebook: bool = True
    n_heldout: int = 20


@dataclass
class DataSection:
    path: str | None = None     # manifest of an existing dataset; synthesized when None
    n: int | None = None        # 50 levels (plus held-out) or 200 terrain maps by default
    height: int | None = None   # 5 for levels, 6 for terrain
    width: int | None = None
    seed: int = 0


@dataclass
class RunConfig:
    regime: str = "constrained-gan"
    seed: int = 0
    n_eval: int = 1000
    k: int = 5
    data: DataSection = field(default_factory=DataSection)
    gan: GanSection = field(default_factory=GanSection)
    penalized: PenalizedSection = field(default_factory=PenalizedSection)
    vqvae: VqvaeSection = field(default_factory=VqvaeSection)

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.n_eval < 1 or self.k < 1:
            raise ValueError("n_eval and k must be positive")

    @property
    def is_terrain(self) -> bool:
        return self.regime == "penalized-gan"

    @property
    def dims(self) -> tuple:
        d = 6 if self.is_terrain else 5
        return (self.data.height or d, self.data.width or d)

    @property
    def n_train(self) -> int:
        """Corpus size; the VQVAE corpus also holds its held-out split."""
        if self.data.n:
            return self.data.n
        if self.is_terrain:
            return 200
        return 50 + (self.vqvae.n_heldout if self.regime == "vqvae" else 0)

    def to_dict(self) -> dict:
        return _listify(asdict(self))

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        payload = dict(payload)
        sections = {"data": DataSection, "gan": GanSection, "penalized": PenalizedSection, "vqvae": VqvaeSection}
        kwargs = {}
        for name, typ in sections.items():
            if name in payload:
                kwargs[name] = _build(typ, payload.pop(name), name)
        top = _build(cls, payload, "config", construct=False)
        return cls(**top, **kwargs)


def _listify(obj):
    if isinstance(obj, dict):
        return {k: _listify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_listify(v) for v in obj]
    return obj


def _build(typ, payload, where: str, construct: bool = True):
    if not isinstance(payload, dict):
        raise ValueError(f"{where}: expected an object")
    names = {f.name: f for f in fields(typ)}
    unknown = set(payload) - set(names)
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    out = {}
    for key, value in payload.items():
        default = names[key].default
        if isinstance(value, list) or isinstance(default, tuple):
            value = tuple(value) if value is not None else value
        out[key] = value
    return typ(**out) if construct else out


def load_config(path) -> RunConfig:
    return RunConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
