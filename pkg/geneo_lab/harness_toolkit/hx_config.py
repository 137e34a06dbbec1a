"""Experiment configuration files and the desk/full presets."""
import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Tuple

from ..config import LabConfig
from ..errors import ConfigError
from ..surrogate_toolkit import (
    CnnModel, Geo1Model, Geo2Model, MlpModel, PatternBank, SurrogateModel, TrainConfig,
)

logger = logging.getLogger(__name__)

MODEL_KINDS = ('geo1', 'geo2', 'mlp', 'cnn')
BLACKBOX_KINDS = ('cnn', 'supervisor', 'table', 'none')
RESCALE_KINDS = ('2x2max', 'identity')
DATA_ROLES = ('train_images', 'train_labels', 'test_images', 'test_labels')


@dataclass(frozen=True)
class ModelSpec:
    """One trainable row: architecture plus its SGD hyperparameters."""

    id: str
    kind: str
    lr: float
    epochs: int
    batch_size: int = 64
    patience: int = 20
    patterns: int = 0
    hidden: Tuple[int, ...] = ()
    channels: Tuple[int, int] = (44, 84)
    dense: int = 92
    params: Optional[int] = None

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> 'ModelSpec':
        try:
            spec = cls(
                id=str(doc['id']),
                kind=doc['kind'],
                lr=float(doc['lr']),
                epochs=int(doc['epochs']),
                batch_size=int(doc.get('batch_size', 64)),
                patience=int(doc.get('patience', 20)),
                patterns=int(doc.get('patterns', 0)),
                hidden=tuple(int(k) for k in doc.get('hidden', ())),
                channels=tuple(int(c) for c in doc.get('channels', (44, 84))),
                dense=int(doc.get('dense', 92)),
                params=int(doc['params']) if doc.get('params') is not None else None,
            )
        except KeyError as e:
            raise ConfigError(f"Model spec {doc.get('id', '?')} lacks field {e}") from None
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Model spec {doc.get('id', '?')}: {e}") from None
        spec.check()
        return spec

    def check(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"Model {self.id}: unknown kind {self.kind}")
        if self.kind in ('geo1', 'geo2') and self.patterns < 1:
            raise ConfigError(f"Model {self.id}: a {self.kind} model needs at least one pattern")
        # raises on non-positive values
        self.train_config(0)

    def expected_params(self, shape: Tuple[int, int], classes: int = 10) -> int:
        """Parameter count from the architecture formula, without building the model."""
        pixels = shape[0] * shape[1]
        if self.kind == 'geo1':
            return classes * self.patterns + classes
        if self.kind == 'geo2':
            return self.patterns + 1 + classes * pixels + classes
        if self.kind == 'mlp':
            sizes = [pixels, *self.hidden, classes]
            return sum(a * b + b for a, b in zip(sizes, sizes[1:]))
        return CnnModel(shape, self.channels, self.dense, classes).count_params()

    def validate_params(self, shape: Tuple[int, int]) -> None:
        if self.params is not None and self.params != self.expected_params(shape):
            raise ConfigError(f"Model {self.id}: declared {self.params} parameters, the architecture on "
                              f"{shape[0]}x{shape[1]} images has {self.expected_params(shape)}")

    def build(self, shape: Tuple[int, int], bank: Optional[PatternBank] = None) -> SurrogateModel:
        if self.kind in ('geo1', 'geo2'):
            if bank is None or len(bank) < self.patterns:
                raise ConfigError(f"Model {self.id} needs {self.patterns} patterns, bank has "
                                  f"{0 if bank is None else len(bank)}")
            cls = Geo1Model if self.kind == 'geo1' else Geo2Model
            return cls(bank.head(self.patterns), shape)
        if self.kind == 'mlp':
            return MlpModel(shape, self.hidden)
        return CnnModel(shape, self.channels, self.dense)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(self.lr, self.epochs, self.batch_size, seed, self.patience)


@dataclass(frozen=True)
class PatternSpec:
    count: int = 150
    width: int = 9
    height: int = 9
    seed: int = 0
    bank: Optional[str] = None  # manifest written by sample-patterns

    def rescaled(self) -> 'PatternSpec':
        """Half-size patches (rounded up to odd) for 2×2-downscaled images."""
        return replace(self, width=(self.width // 2) | 1, height=(self.height // 2) | 1, bank=None)


@dataclass(frozen=True)
class BlackBoxSpec:
    kind: str = 'cnn'
    path: Optional[str] = None    # prediction table CSV
    model: Optional[str] = None   # saved CNN manifest
    train: Optional[ModelSpec] = None


def _mlp(row_id, hidden, lr, epochs, params=None):
    return ModelSpec(row_id, 'mlp', lr, epochs, hidden=tuple(hidden), params=params)


def _geo(kind, patterns, lr, epochs, params=None):
    return ModelSpec(f'{kind}-{patterns}', kind, lr, epochs, patterns=patterns, params=params)


REFERENCE_CNN = ModelSpec('cnn', 'cnn', 3e-3, 3, params=228010)

# Learning rates, epoch caps and parameter counts of the reference table.
FULL_MODELS = [
    _mlp('mlp-40', (40,), 2e-4, 57, 31810),
    _mlp('mlp-20', (20,), 1e-4, 57, 15910),
    _mlp('mlp-0', (), 2e-3, 5, 7850),
    _mlp('mlp-7', (7,), 2e-4, 58, 5575),
    _mlp('mlp-5', (5,), 2e-4, 58, 3985),
    _mlp('mlp-4', (4,), 2e-3, 9, 3190),
    _geo('geo1', 500, 3e-3, 296, 5010),
    _geo('geo1', 350, 7e-3, 148, 3510),
    _geo('geo1', 170, 2e-2, 456, 1710),
    _geo('geo1', 150, 1e-2, 564, 1510),
    _geo('geo1', 120, 2e-2, 496, 1210),
    _geo('geo1', 98, 5e-2, 198, 990),
    _geo('geo2', 250, 1e-3, 39, 8101),
    _geo('geo2', 200, 1e-3, 496, 8051),
    _geo('geo2', 150, 1e-3, 483, 8001),
    _geo('geo2', 100, 1e-3, 335, 7951),
    _geo('geo2', 50, 1e-3, 451, 7901),
]
FULL_RESCALED = [
    _mlp('mlp-40', (40,), 2e-4, 57, 8290),
    _mlp('mlp-0', (), 2e-3, 5, 1970),
    _mlp('mlp-7', (7,), 2e-4, 58, 1459),
    _mlp('mlp-5', (5,), 2e-4, 58, 1045),
    _geo('geo1', 500, 3e-3, 296, 5010),
    _geo('geo1', 350, 7e-3, 148, 3510),
    _geo('geo1', 170, 2e-2, 456, 1710),
    _geo('geo1', 98, 5e-2, 198, 990),
    _geo('geo2', 250, 1e-3, 39, 2221),
    _geo('geo2', 150, 1e-3, 483, 2121),
    _geo('geo2', 50, 1e-3, 451, 2021),
]

# Plain SGD needs larger steps than the reference rates; counts stay exact.
DESK_CNN = ModelSpec('cnn', 'cnn', 5e-2, 15, batch_size=32, patience=5, params=228010)
DESK_MODELS = [
    _mlp('mlp-0', (), 0.5, 60, 7850),
    _mlp('mlp-7', (7,), 0.5, 60, 5575),
    _mlp('mlp-5', (5,), 0.5, 60, 3985),
    _geo('geo1', 150, 0.5, 300, 1510),
    _geo('geo1', 98, 0.5, 300, 990),
    _geo('geo2', 150, 0.2, 60, 8001),
    _geo('geo2', 50, 0.2, 60, 7901),
]
DESK_RESCALED = [
    _mlp('mlp-0', (), 0.5, 60, 1970),
    _mlp('mlp-5', (5,), 0.5, 60, 1045),
    _geo('geo1', 150, 0.5, 300, 1510),
    _geo('geo2', 150, 0.2, 60, 2121),
]

PRESETS: Dict[str, Dict[str, Any]] = {
    'desk': {
        'models': DESK_MODELS,
        'rescaled': DESK_RESCALED,
        'patterns': PatternSpec(count=150),
        'subsample': {'train': 10000, 'val': 2000, 'test': 2000},
        'blackbox': BlackBoxSpec('cnn', train=DESK_CNN),
    },
    'full': {
        'models': FULL_MODELS,
        'rescaled': FULL_RESCALED,
        'patterns': PatternSpec(count=500),
        'subsample': None,
        'blackbox': BlackBoxSpec('cnn', train=REFERENCE_CNN),
    },
}


@dataclass
class ExperimentConfig:
    """A validated experiment: every referenced file exists and every spec matches its formula."""

    data: Dict[str, str]
    out_dir: str
    preset: str = 'desk'
    split_seed: int = 0
    model_seed: int = 0
    models: List[ModelSpec] = field(default_factory=list)
    rescaled: List[ModelSpec] = field(default_factory=list)
    patterns: PatternSpec = field(default_factory=PatternSpec)
    blackbox: BlackBoxSpec = field(default_factory=BlackBoxSpec)
    subsample: Optional[Dict[str, int]] = None
    observer: Optional[str] = None
    rescale: str = '2x2max'
    targets: str = 'labels'
    threads: int = 1
    image_shape: Tuple[int, int] = (28, 28)

    @classmethod
    def load(cls, path: str, **overrides: Any) -> 'ExperimentConfig':
        try:
            with open(path, encoding='utf-8') as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Cannot read config {path}: {str(e)}")
            raise ConfigError(f"Cannot read config {path}: {e}") from e
        return cls.from_dict(doc, os.path.dirname(os.path.abspath(path)), **overrides)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], base_dir: str = '.', **overrides: Any) -> 'ExperimentConfig':
        doc = dict(doc)
        doc.update({k: v for k, v in overrides.items() if v is not None})
        preset_name = doc.get('preset', 'desk')
        if preset_name not in PRESETS:
            raise ConfigError(f"Unknown preset {preset_name}; expected one of {sorted(PRESETS)}")
        preset = PRESETS[preset_name]

        models = [ModelSpec.from_dict(m) for m in doc['models']] if 'models' in doc else list(preset['models'])
        rescaled = [ModelSpec.from_dict(m) for m in doc['rescaled']] if 'rescaled' in doc \
            else list(preset['rescaled'])
        ids = [m.id for m in models]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"Duplicate model ids in {ids}")

        patterns = preset['patterns']
        if 'patterns' in doc:
            p = doc['patterns']
            bank = p.get('bank')
            patterns = PatternSpec(int(p.get('count', patterns.count)), int(p.get('width', 9)),
                                   int(p.get('height', 9)), int(p.get('seed', 0)),
                                   cls._resolve(bank, base_dir, 'patterns.bank') if bank else None)
        needed = max([m.patterns for m in models + rescaled if m.kind in ('geo1', 'geo2')], default=0)
        if patterns.bank is None and needed > patterns.count:
            patterns = replace(patterns, count=needed)

        blackbox = cls._blackbox(doc.get('blackbox'), preset['blackbox'], base_dir)
        cfg = cls(
            data=cls._data(doc.get('data', {}), base_dir),
            out_dir=os.path.join(base_dir, doc.get('out', 'out')) if not os.path.isabs(doc.get('out', 'out'))
            else doc['out'],
            preset=preset_name,
            split_seed=int(doc.get('split_seed', doc.get('seed', 0))),
            model_seed=int(doc.get('model_seed', doc.get('seed', 0))),
            models=models,
            rescaled=rescaled,
            patterns=patterns,
            blackbox=blackbox,
            subsample=doc.get('subsample', preset['subsample']),
            observer=cls._resolve(doc['observer'], base_dir, 'observer') if doc.get('observer') else None,
            rescale=doc.get('rescale', '2x2max'),
            targets=doc.get('targets', 'labels'),
            threads=int(doc.get('threads', LabConfig.THREADS)),
            image_shape=tuple(doc.get('image_shape', (28, 28))),
        )
        cfg.validate()
        return cfg

    @staticmethod
    def _resolve(path: str, base_dir: str, what: str) -> str:
        resolved = LabConfig.resolve_data_path(path, base_dir)
        if not os.path.exists(resolved):
            logger.error(f"Missing {what}: {path}")
            raise ConfigError(f"Missing {what}: {path} (looked in {base_dir} and GENEO_LAB_DATA)")
        return resolved

    @classmethod
    def _data(cls, doc: Mapping[str, Any], base_dir: str) -> Dict[str, str]:
        """Four IDX paths, given one by one or through ``mnist_dir`` (default: GENEO_LAB_DATA)."""
        if all(role in doc for role in DATA_ROLES):
            return {role: cls._resolve(doc[role], base_dir, f'data.{role}') for role in DATA_ROLES}
        directory = doc.get('mnist_dir') or LabConfig.DATA_DIR
        if not directory:
            raise ConfigError("No dataset configured: set data.mnist_dir, the four data paths, or GENEO_LAB_DATA")
        directory = cls._resolve(directory, base_dir, 'data.mnist_dir')
        out = {}
        for role in DATA_ROLES:
            name = LabConfig.MNIST_FILES[role]
            path = os.path.join(directory, name)
            if not os.path.exists(path) and os.path.exists(path[:-3]):
                path = path[:-3]
            if not os.path.exists(path):
                raise ConfigError(f"Missing dataset file {name} in {directory}")
            out[role] = path
        return out

    @classmethod
    def _blackbox(cls, doc: Optional[Mapping[str, Any]], default: BlackBoxSpec, base_dir: str) -> BlackBoxSpec:
        if doc is None:
            return default
        kind = doc.get('kind', 'cnn')
        if kind not in BLACKBOX_KINDS:
            raise ConfigError(f"Unknown black-box kind {kind}")
        path = cls._resolve(doc['path'], base_dir, 'blackbox.path') if doc.get('path') else None
        model = cls._resolve(doc['model'], base_dir, 'blackbox.model') if doc.get('model') else None
        if kind == 'table' and path is None:
            raise ConfigError("A table black-box needs blackbox.path")
        if 'train' in doc:
            train = ModelSpec.from_dict(dict(doc['train'], id='cnn', kind='cnn'))
        else:
            # supervisor and table black-boxes train nothing
            train = default.train if kind == 'cnn' else None
        return BlackBoxSpec(kind, path, model, train)

    def validate(self) -> None:
        if self.rescale not in RESCALE_KINDS:
            raise ConfigError(f"Unknown rescale {self.rescale}; expected one of {RESCALE_KINDS}")
        if self.targets not in ('labels', 'blackbox'):
            raise ConfigError(f"Unknown targets {self.targets}")
        if self.targets == 'blackbox' and self.blackbox.kind == 'none':
            raise ConfigError("targets = blackbox needs a black-box")
        if self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}")
        for spec in self.models:
            spec.validate_params(self.image_shape)
        if self.blackbox.train is not None:
            self.blackbox.train.validate_params(self.image_shape)
        half = (self.image_shape[0] // 2, self.image_shape[1] // 2) if self.rescale == '2x2max' \
            else self.image_shape
        for spec in self.rescaled:
            spec.validate_params(half)
