"""Experiment configuration files (JSON) with line-anchored validation errors."""
from __future__ import annotations

import inspect
import json
import re
from dataclasses import asdict, dataclass, field, fields

from .domains import DOMAINS
from .engine import EngineSettings
from .training import TrainingConfig


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when it could be located."""

    def __init__(self, message, source="<config>", line=None, field_name=None):
        self.source = source
        self.line = line
        self.field_name = field_name
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")


@dataclass
class GeneratorSettings:
    hidden_size: int = 32
    init_scale: float = 0.1  # sequence weights; categorical logits always use 0.01
    mle_epochs: int = 2000
    mle_learning_rate: float = 0.3
    mle_patience: int = 10
    validation_size: int = 16  # held-out sequences drawn fresh for MLE early stopping


@dataclass
class ExperimentConfig:
    name: str
    domain: str
    domain_params: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    sweep: dict = field(default_factory=dict)  # one domain parameter -> list of values
    generator: GeneratorSettings = field(default_factory=GeneratorSettings)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    engine: EngineSettings = field(default_factory=EngineSettings)
    output_dir: str | None = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "domain": self.domain,
            "domain_params": dict(self.domain_params),
            "seeds": list(self.seeds),
            "sweep": {k: list(v) for k, v in self.sweep.items()},
            "generator": asdict(self.generator),
            "training": self.training.to_dict(),
            "engine": self.engine.to_dict(),
            "output_dir": self.output_dir,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def variants(self):
        """(label, domain_params) for each sweep point; a single unlabeled one without a sweep."""
        if not self.sweep:
            return [(None, dict(self.domain_params))]
        (key, values), = self.sweep.items()
        return [(f"{key}-{v}", {**self.domain_params, key: v}) for v in values]


def _line_of(text: str, key: str):
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _section(cls, raw, name, text, source):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f'field "{name}" must be an object', source, _line_of(text, name), name)
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f'unknown field "{name}.{key}"', source, _line_of(text, key), key)
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f'invalid "{name}": {exc}', source, _line_of(text, name), name) from None


TOP_LEVEL = ("name", "domain", "domain_params", "seeds", "sweep", "generator", "training",
             "engine", "output_dir")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg}", source, exc.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object", source, 1)
    for key in raw:
        if key not in TOP_LEVEL:
            raise ConfigError(f'unknown field "{key}"', source, _line_of(text, key), key)
    for key in ("name", "domain"):
        if key not in raw:
            raise ConfigError(f'missing field "{key}"', source, 1, key)

    def fail(key, message):
        raise ConfigError(message, source, _line_of(text, key), key)

    domain = raw["domain"]
    if domain not in DOMAINS:
        fail("domain", f'unknown domain "{domain}" in field "domain" (known: {", ".join(sorted(DOMAINS))})')
    params = raw.get("domain_params", {})
    if not isinstance(params, dict):
        fail("domain_params", 'field "domain_params" must be an object')
    seeds = raw.get("seeds", [0])
    if not (isinstance(seeds, list) and seeds and all(isinstance(s, int) and s >= 0 for s in seeds)):
        fail("seeds", 'field "seeds" must be a non-empty list of non-negative integers')
    sweep = raw.get("sweep", {})
    if not isinstance(sweep, dict) or len(sweep) > 1 or any(
            not isinstance(v, list) or not v for v in sweep.values()):
        fail("sweep", 'field "sweep" must map one domain parameter to a non-empty list')
    out = raw.get("output_dir")
    if out is not None and not isinstance(out, str):
        fail("output_dir", 'field "output_dir" must be a string')

    cfg = ExperimentConfig(
        name=str(raw["name"]),
        domain=domain,
        domain_params=dict(params),
        seeds=list(seeds),
        sweep={k: list(v) for k, v in sweep.items()},
        generator=_section(GeneratorSettings, raw.get("generator"), "generator", text, source),
        training=_section(TrainingConfig, raw.get("training"), "training", text, source),
        engine=_section(EngineSettings, raw.get("engine"), "engine", text, source),
        output_dir=out,
    )
    accepted = set(inspect.signature(DOMAINS[domain]).parameters) - {"seed"}
    for _, p in cfg.variants():
        for key in p:
            if key not in accepted:
                fail(key, f'unknown parameter "{key}" for domain "{domain}"')
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read(), str(path))
