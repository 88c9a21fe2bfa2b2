"""Training/model hyperparameters with file + CLI override plumbing."""

from dataclasses import dataclass, fields

from .errors import ConfigError


@dataclass
class TrainConfig:
    n_max: int = 96          # memory slots during training
    batch_size: int = 32
    lr: float = 0.001
    lr_decay_factor: float = 10.0
    patience_lr: int = 3     # stagnant epochs before dividing the lr
    patience_stop: int = 10  # stagnant epochs before stopping
    max_epochs: int = 200
    dropout_embed: float = 0.3
    dropout_question: float = 0.3
    dropout_answer: float = 0.2
    theta: float = 0.7
    hops: int = 2
    d: int = 128             # hidden size
    d_v: int = 300           # word embedding size
    d_p: int = 128           # relation embedding size
    d_t: int = 16            # entity type / interrogative embedding size
    topic_candidates: int = 15  # candidate pool for topic-predictor training
    seed: int = 0
    word_vectors: str = ""   # optional pre-trained word vector file

    def __post_init__(self):
        self.validate()

    def validate(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("seed", "word_vectors"):
                continue
            if f.name.startswith("dropout_"):
                if not 0.0 <= v < 1.0:
                    raise ConfigError(f"config {f.name} must be in [0, 1), got {v}")
            elif isinstance(v, (int, float)) and v <= 0:
                raise ConfigError(f"config {f.name} must be positive, got {v}")
        if self.d % 2 != 0:
            raise ConfigError(f"hidden size d must be even, got {self.d}")

    def apply_overrides(self, pairs):
        """Apply "key=value" strings (CLI --set) with type coercion."""
        by_name = {f.name: f for f in fields(self)}
        for pair in pairs:
            key, _, value = pair.partition("=")
            key = key.strip()
            if key not in by_name:
                raise ConfigError(f"unknown config key {key!r}")
            kind = type(getattr(self, key))
            try:
                setattr(self, key, kind(value.strip()) if kind is not str else value.strip())
            except ValueError:
                raise ConfigError(f"bad value for {key!r}: {value!r}")
        self.validate()
        return self

    @classmethod
    def from_file(cls, path):
        """Parse "key = value" lines; '#' starts a comment."""
        cfg = cls()
        pairs = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}: expected key = value, got {line!r}")
                pairs.append(line)
        return cfg.apply_overrides(pairs)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d):
        cfg = cls()
        for f in fields(cls):
            if f.name in d:
                setattr(cfg, f.name, d[f.name])
        cfg.validate()
        return cfg
