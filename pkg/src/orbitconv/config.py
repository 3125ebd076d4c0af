"""Run configuration: ``key = value`` lines with ``#`` comments."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

ORBIT_CHOICES = ("rot2", "rot4", "rot8", "flip3", "flip4", "d4", "none")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 7
    image_size: int = 64
    train_images: int = 200
    iterations: int = 2000
    learning_rate: float = 0.05
    batch_size: int = 8
    orbit_layer1: str = "rot4"
    orbit_layer2: str = "flip3"
    combine: str = "maxout"
    augment: bool = False
    tta_combine: str = "prob-average"
    out_dir: str = "runs/default"

    def __post_init__(self):
        for key in ("image_size", "train_images", "batch_size"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be positive")
        if self.iterations < 0 or self.learning_rate < 0:
            raise ConfigError("iterations and learning_rate must be non-negative")
        for key in ("orbit_layer1", "orbit_layer2"):
            if getattr(self, key) not in ORBIT_CHOICES:
                raise ConfigError(f"{key} must be one of {'|'.join(ORBIT_CHOICES)}")
        if self.combine not in ("maxout", "concat"):
            raise ConfigError("combine must be maxout or concat")
        if self.tta_combine not in ("prob-average", "majority-vote"):
            raise ConfigError("tta_combine must be prob-average or majority-vote")

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in asdict(self).items())


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _coerce(key: str, typ, raw: str):
    raw = raw.strip()
    try:
        if typ in (bool, "bool"):
            if raw.lower() not in ("true", "false"):
                raise ValueError(raw)
            return raw.lower() == "true"
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def _parse_pairs(pairs, base: RunConfig) -> RunConfig:
    types = {f.name: f.type for f in fields(RunConfig)}
    updates = {}
    for key, raw in pairs:
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        updates[key] = _coerce(key, types[key], raw)
    return replace(base, **updates)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        pairs.append((key.strip(), raw))
    return _parse_pairs(pairs, base or RunConfig())


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    pairs = []
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        pairs.append((key.strip(), raw))
    return _parse_pairs(pairs, cfg)
