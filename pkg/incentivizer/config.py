"""
Experiment configuration: noise modes, dataset presets and the key = value config file.

A config file is written beside every command's outputs (config.txt) and can be passed
back with --config; flags given explicitly on the command line override it.
"""

from __future__ import annotations
from dataclasses import dataclass, field, fields, replace
import logging
from pathlib import Path
from typing import Dict, NamedTuple

import regex

from incentivizer.policy import Variant

logger = logging.getLogger(__name__)

CONFIG_LINE_RE = regex.compile(r'\s*([a-z][a-z0-9_]*)\s*=\s*(.*?)\s*')
COMMENT_RE = regex.compile(r'(?:^|\s)#.*')
NOISE_RE = regex.compile(r'\s*(?:(adaptive)|static:([-+.\deE]+):([-+.\deE]+))\s*')


@dataclass(frozen=True)
class NoiseMode:
    """Exploration noise after the exploration phase.

    adaptive: N(-omega, 1), omega being the current engaged ratio.
    static: N(mean, std)."""
    kind: str = 'adaptive'
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if self.kind not in ('adaptive', 'static'):
            raise ValueError(f'unknown noise mode {self.kind}')
        if self.std < 0:
            raise ValueError(f'noise std must not be negative, got {self.std}')

    def __str__(self):
        return 'adaptive' if self.kind == 'adaptive' else f'static:{float(self.mean)!r}:{float(self.std)!r}'

    @property
    def adaptive(self) -> bool:
        return self.kind == 'adaptive'

    @classmethod
    def parse(cls, s: str) -> NoiseMode:
        m = NOISE_RE.fullmatch(s)
        if not m:
            raise ValueError(f'bad noise mode "{s}" (expected adaptive or static:MEAN:STD)')
        if m.group(1):
            return cls()
        return cls('static', float(m.group(2)), float(m.group(3)))


class Preset(NamedTuple):
    undirected: bool
    budget: float
    subnetwork: int | None = None


PRESETS: Dict[str, Preset] = {
    'dolphins': Preset(undirected=True, budget=3.0),
    'twitter': Preset(undirected=False, budget=20.0, subnetwork=236),
    'wiki-vote': Preset(undirected=False, budget=40.0),
}


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    preset: str | None = None
    undirected: bool = False
    budget: float = 3.0
    seed_env: int = 0
    seed_policy: int = 0
    option_count: int = 4
    subnetwork: int | None = None
    seed_node: int = 0
    episodes: int = 10_000
    steps: int = 10
    exploration_episodes: int = 1000
    batch_size: int = 256
    eval_steps: int = 150
    gamma: float = 0.99
    tau: float = 1e-3
    lr_actor: float = 3e-4
    lr_critic: float = 3e-3
    update_frequency: int = 2
    buffer_capacity: int = 100_000
    noise: NoiseMode = field(default_factory=NoiseMode)
    variant: Variant = Variant.GAC
    out: str = '.'

    def __post_init__(self):
        if isinstance(self.noise, str):
            self.noise = NoiseMode.parse(self.noise)
        if isinstance(self.variant, str):
            self.variant = Variant(self.variant)
        if self.budget <= 0:
            raise ValueError(f'budget must be positive, got {self.budget}')
        if self.option_count < 2:
            raise ValueError(f'option_count must be at least 2, got {self.option_count}')
        for name in ('episodes', 'steps', 'batch_size', 'eval_steps', 'update_frequency', 'buffer_capacity'):
            if getattr(self, name) < 1:
                raise ValueError(f'{name} must be positive, got {getattr(self, name)}')
        for name in ('lr_actor', 'lr_critic'):
            if getattr(self, name) <= 0:
                raise ValueError(f'{name} must be positive, got {getattr(self, name)}')
        for name in ('gamma', 'tau'):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f'{name} must lie in [0, 1], got {getattr(self, name)}')
        if self.exploration_episodes < 0:
            raise ValueError(f'exploration_episodes must not be negative, got {self.exploration_episodes}')
        if self.subnetwork is not None and self.subnetwork < 1:
            raise ValueError(f'subnetwork size must be positive, got {self.subnetwork}')
        if self.preset is not None and self.preset not in PRESETS:
            raise ValueError(f'unknown preset {self.preset} (known: {", ".join(PRESETS)})')

    def with_preset(self, name: str) -> ExperimentConfig:
        preset = PRESETS.get(name)
        if preset is None:
            raise ValueError(f'unknown preset {name} (known: {", ".join(PRESETS)})')
        return replace(self, preset=name, undirected=preset.undirected, budget=preset.budget,
                       subnetwork=preset.subnetwork)

    def to_text(self) -> str:
        lines = ['# incentivizer experiment configuration']
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f'{f.name} = {"" if value is None else value}')
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_text(cls, text: str, filename: str | Path | None = None) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        values = {}
        for line_number, line in enumerate(text.splitlines(), 1):
            line = COMMENT_RE.sub('', line, count=1)
            if not line.strip():
                continue
            m = CONFIG_LINE_RE.fullmatch(line)
            if not m or m.group(1) not in known:
                raise ValueError(f'{filename or "config"} line {line_number}: cannot parse "{line.strip()}"')
            values[m.group(1)] = m.group(2)
        return cls(**{key: _convert(key, value) for key, value in values.items()})

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding='utf-8')
        logger.info(f'Wrote configuration to {path}')

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        return cls.from_text(Path(path).read_text(encoding='utf-8'), filename=path)


def _convert(key: str, value: str):
    if key in ('dataset', 'preset', 'subnetwork') and value == '':
        return None
    if key in ('undirected',):
        if value not in ('True', 'False'):
            raise ValueError(f'{key} must be True or False, got "{value}"')
        return value == 'True'
    if key in ('budget', 'gamma', 'tau', 'lr_actor', 'lr_critic'):
        return float(value)
    if key in ('seed_env', 'seed_policy', 'option_count', 'subnetwork', 'seed_node', 'episodes', 'steps',
               'exploration_episodes', 'batch_size', 'eval_steps', 'update_frequency', 'buffer_capacity'):
        return int(value)
    if key == 'noise':
        return NoiseMode.parse(value)
    if key == 'variant':
        return Variant(value)
    return value
