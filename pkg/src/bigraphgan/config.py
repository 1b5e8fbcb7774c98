"""Training configuration and its flat ``key = value`` text format.

One setting per line, ``#`` starts a comment, blank lines are ignored.
Booleans accept true/false/yes/no/1/0. Unknown keys are an error.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigurationError
from .networks import Switches
from .objectives import LossWeights

# fields that do not change what is computed, only where/how often it is reported
_NON_SEMANTIC = {"out_dir", "checkpoint_every", "eval_every", "log_every", "n_test_samples"}


@dataclass
class TrainConfig:
    depth: int = 3
    channels: int = 32
    n_nodes: int = 16
    n_nodes_a2b: int = 0  # 0 means "same as n_nodes"
    d_state: int = 32
    graph_normalize: bool = True  # average node states over locations
    image_height: int = 64
    image_width: int = 32
    batch_size: int = 8
    lambda_gan: float = 5.0
    lambda_l1: float = 10.0
    lambda_per: float = 10.0
    gan_reduction: str = "mean"
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    steps: int = 2000
    seed: int = 0
    use_b2a: bool = True
    use_a2b: bool = True
    share_gcn: bool = False
    use_aif: bool = True
    n_train_identities: int = 200
    n_test_identities: int = 50
    n_test_samples: int = 50
    heatmap_radius: int = 0  # 0 picks the size-scaled default
    disc_width: int = 16
    perceptual_width: int = 16
    perceptual_seed: int = 1234
    checkpoint_every: int = 500
    eval_every: int = 0
    log_every: int = 50
    out_dir: str = "runs/default"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        positive = ("depth", "channels", "n_nodes", "d_state", "image_height", "image_width", "batch_size",
                    "n_train_identities", "n_test_identities", "n_test_samples", "disc_width", "perceptual_width")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("steps", "n_nodes_a2b", "heatmap_radius", "checkpoint_every", "eval_every", "log_every"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be nonnegative")
        if self.lr <= 0 or not (0 <= self.beta1 < 1) or not (0 <= self.beta2 < 1) or self.adam_eps <= 0:
            raise ConfigurationError("invalid Adam settings")
        if self.gan_reduction not in ("mean", "sum"):
            raise ConfigurationError("gan_reduction must be 'mean' or 'sum'")
        if self.image_height % 8 or self.image_width % 8:
            raise ConfigurationError("image sides must be multiples of 8")
        if self.image_height < 32 or self.image_width < 16:
            raise ConfigurationError("images must be at least 32×16")
        if self.channels % 4:
            raise ConfigurationError("channels must be a multiple of 4")
        LossWeights(self.lambda_gan, self.lambda_l1, self.lambda_per)

    @property
    def size(self) -> tuple:
        return (self.image_height, self.image_width)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.lambda_gan, self.lambda_l1, self.lambda_per)

    @property
    def switches(self) -> Switches:
        return Switches(self.use_b2a, self.use_a2b, self.share_gcn, self.use_aif)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_format(getattr(self, f.name))}\n" for f in fields(self))

    def config_hash(self) -> str:
        text = "".join(
            f"{f.name}={_format(getattr(self, f.name))}\n" for f in fields(self) if f.name not in _NON_SEMANTIC
        )
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigurationError(f"line {lineno}: unknown setting {key!r}")
            values[key] = _parse(value, types[key], key)
        return cls(**values)

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_text(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _parse(value: str, typ, key: str):
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "bool":
            low = value.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(value)
        if typ == "int":
            return int(value)
        if typ == "float":
            return float(value)
        return value
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse {value!r} as {typ}") from None


BASELINES = {
    "B1": dict(use_b2a=False, use_a2b=False, share_gcn=False, use_aif=False),
    "B2": dict(use_b2a=True, use_a2b=False, share_gcn=False, use_aif=False),
    "B3": dict(use_b2a=False, use_a2b=True, share_gcn=False, use_aif=False),
    "B4": dict(use_b2a=True, use_a2b=True, share_gcn=True, use_aif=False),
    "B5": dict(use_b2a=True, use_a2b=True, share_gcn=False, use_aif=False),
    "B6": dict(use_b2a=True, use_a2b=True, share_gcn=False, use_aif=True),
}


def baseline_config(base: TrainConfig, name: str) -> TrainConfig:
    return base.replace(**BASELINES[name])
