"""Experiment orchestration: the ``run``, ``rescaled``, ``sample-patterns``,
``train-blackbox`` and ``fetch-mnist`` commands."""
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.metrics import accuracy_score

from ..errors import ConfigError, GeneoLabError
from ..geo_toolkit import identity
from ..observer_toolkit import CrossedPair, EvaluationSet, space_distance, surrogate_distance
from ..perception_toolkit import ArgmaxDiscreteMetric, image_space, score_space
from ..surrogate_toolkit import (
    CwmInputs, Geo1Model, Geo2Model, ImageDataset, MnistClient, PatternBank, SurrogateModel, TableBlackBox,
    load_bank, load_mnist, load_model, read_prediction_table, sample_patterns, save_bank, save_model,
    stratified_split, subsample, supervisor, train_on_inputs, write_prediction_table,
)
from .hx_config import ExperimentConfig, ModelSpec, PatternSpec
from .hx_diagrams import ModelSpaces, classification_observer, model_diagram, rescale_observer

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ['model', 'kind', 'patterns', 'hidden', 'params', 'nonlinearities', 'accuracy', 'fidelity',
                  'best_epoch', 'split_seed', 'model_seed']
CURVE_COLUMNS = ['model', 'params', 'nonlinearities', 'accuracy']
FLOAT_FORMAT = '%.6f'
# test images used for the space distance of the rescale arrows
SPACE_DISTANCE_IMAGES = 200


@dataclass(frozen=True)
class ResultRow:
    model: str
    kind: str
    patterns: int
    hidden: str
    params: int
    nonlinearities: int
    accuracy: float
    fidelity: Optional[float]
    best_epoch: int
    split_seed: int
    model_seed: int

    def __post_init__(self):
        for name in ('accuracy', 'fidelity'):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise GeneoLabError(f"Row {self.model}: {name} {value} outside [0, 1]")


@dataclass
class RunReport:
    rows: List[ResultRow] = field(default_factory=list)
    runtimes: List[Tuple[str, float, str]] = field(default_factory=list)
    out_dir: str = ''
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def failures(self) -> List[str]:
        return [model for model, _, status in self.runtimes if status != 'ok']


# -- data ---------------------------------------------------------------------------

def load_experiment_data(cfg: ExperimentConfig) -> ImageDataset:
    """Pool the official train and test files, split 60/20/20 and apply the preset subsample."""
    train = load_mnist(cfg.data['train_images'], cfg.data['train_labels'])
    test = load_mnist(cfg.data['test_images'], cfg.data['test_labels'])
    pool = ImageDataset(np.concatenate([train.images, test.images]), np.concatenate([train.labels, test.labels]))
    if pool.shape != tuple(cfg.image_shape):
        raise ConfigError(f"Dataset images are {pool.shape[0]}x{pool.shape[1]}, config expects "
                          f"{cfg.image_shape[0]}x{cfg.image_shape[1]} (set image_shape)")
    data = stratified_split(pool, cfg.split_seed)
    if cfg.subsample:
        data = subsample(data, cfg.subsample, cfg.split_seed)
    logger.info(f"Dataset: {len(data)} images, " + ', '.join(f"{t} {len(data.indices(t))}"
                                                            for t in ('train', 'val', 'test')))
    return data


def pattern_bank(spec: PatternSpec, images: np.ndarray) -> PatternBank:
    if spec.bank is not None:
        bank = load_bank(spec.bank)
        if len(bank) < spec.count:
            raise ConfigError(f"Pattern bank {spec.bank} has {len(bank)} patterns, {spec.count} needed")
        return bank
    return sample_patterns(images, spec.count, spec.width, spec.height, spec.seed)


class FeatureCache:
    """Prepared model inputs per (kind, split), computed once for the whole bank.

    GEO models of different sizes share a bank prefix, so their features are
    column slices of the full-bank features.
    """

    def __init__(self, images: np.ndarray, data: ImageDataset, bank: Optional[PatternBank], threads: int = 1):
        self.images = images
        self.data = data
        self.bank = bank
        self.threads = threads
        self._inputs: Dict[Tuple[str, str], Any] = {}
        self.logger = logging.getLogger(self.__class__.__name__)

    def _full(self, model: SurrogateModel, tag: str) -> Any:
        key = (model.kind, tag)
        if key not in self._inputs:
            idx = self.data.indices(tag)
            if model.kind == 'geo1':
                full = Geo1Model(self.bank, model.shape, model.classes)
            elif model.kind == 'geo2':
                full = Geo2Model(self.bank, model.shape, model.classes)
            else:
                full = model
            started = time.perf_counter()
            self._inputs[key] = full.prepare(self.images[idx], self.threads)
            self.logger.info(f"Prepared {model.kind} inputs for {tag} ({len(idx)} images) "
                             f"in {time.perf_counter() - started:.1f}s")
        return self._inputs[key]

    def inputs(self, model: SurrogateModel, tag: str) -> Any:
        full = self._full(model, tag)
        if model.kind == 'geo1':
            return full[:, :model.patterns]
        if model.kind == 'geo2':
            return CwmInputs(full.maps[:, :model.patterns].tocsr(), full.count, full.pixels)
        return full


# -- black-boxes -----------------------------------------------------------------------

BlackBoxSource = Union[SurrogateModel, TableBlackBox]


def blackbox_scores(blackbox: BlackBoxSource, images: np.ndarray, threads: int = 1) -> np.ndarray:
    if isinstance(blackbox, SurrogateModel):
        return blackbox.scores(images, threads)
    return np.stack([np.asarray(blackbox(x)).ravel() for x in images]) if len(images) else np.zeros((0, 10))


def _train_spec(spec: ModelSpec, model: SurrogateModel, cache: FeatureCache, targets: np.ndarray,
                seed: int):
    train_in, val_in = cache.inputs(model, 'train'), cache.inputs(model, 'val')
    data = cache.data
    return train_on_inputs(model, train_in, targets[data.indices('train')], val_in,
                           targets[data.indices('val')], spec.train_config(seed))


@dataclass
class BlackBoxRun:
    source: Optional[BlackBoxSource]
    scores: Optional[np.ndarray]  # rows aligned with the dataset, NaN where not evaluated
    row: Optional[ResultRow] = None
    model: Optional[SurrogateModel] = None


def prepare_blackbox(cfg: ExperimentConfig, data: ImageDataset, report: RunReport,
                     models_dir: Optional[str] = None) -> BlackBoxRun:
    """Train or load the configured black-box and score the images the run needs."""
    spec = cfg.blackbox
    if spec.kind == 'none':
        return BlackBoxRun(None, None)
    started = time.perf_counter()
    row = None
    model = None
    if spec.kind == 'supervisor':
        source: BlackBoxSource = supervisor(data)
    elif spec.kind == 'table':
        source = read_prediction_table(spec.path, data)
    elif spec.model is not None:
        source = model = load_model(spec.model)
    else:
        if spec.train is None:
            raise ConfigError("A cnn black-box needs either blackbox.model or blackbox.train")
        model = spec.train.build(data.shape)
        cache = FeatureCache(data.images, data, None, cfg.threads)
        result = _train_spec(spec.train, model, cache, data.labels, cfg.model_seed)
        source = model
        row = _row(spec.train, model, data, cache, cfg, result.best_epoch)
        if models_dir is not None:
            _persist(spec.train, model, models_dir, row)
    needed = np.arange(len(data)) if cfg.targets == 'blackbox' else data.indices('test')
    scores = np.full((len(data), 10), np.nan)
    scores[needed] = blackbox_scores(source, data.images[needed], cfg.threads)
    if row is not None:
        row = replace(row, fidelity=1.0)
        report.runtimes.append((row.model, time.perf_counter() - started, 'ok'))
    logger.info(f"Black-box {spec.kind} ready in {time.perf_counter() - started:.1f}s")
    return BlackBoxRun(source, scores, row, model)


# -- rows ------------------------------------------------------------------------------

def _row(spec: ModelSpec, model: SurrogateModel, data: ImageDataset, cache: FeatureCache, cfg: ExperimentConfig,
         best_epoch: int, fidelity: Optional[float] = None) -> ResultRow:
    diagram = model_diagram(spec, model.shape, model.classes)
    params = int(diagram.complexity('params'))
    nonlinearities = int(diagram.complexity('nonlinearities'))
    if params != model.count_params() or nonlinearities != model.count_nonlinearities():
        logger.error(f"Row {spec.id}: diagram complexities ({params}, {nonlinearities}) disagree with the model "
                     f"({model.count_params()}, {model.count_nonlinearities()})")
        raise GeneoLabError(f"Row {spec.id}: diagram and model complexities disagree")
    test_scores = model.scores_from_inputs(cache.inputs(model, 'test'))
    accuracy = float(accuracy_score(data.labels[data.indices('test')], test_scores.argmax(axis=1)))
    return ResultRow(spec.id, spec.kind, spec.patterns if spec.kind in ('geo1', 'geo2') else 0,
                     '-'.join(str(k) for k in spec.hidden), params, nonlinearities, accuracy, fidelity,
                     best_epoch, cfg.split_seed, cfg.model_seed)


def _persist(spec: ModelSpec, model: SurrogateModel, models_dir: str, row: ResultRow) -> None:
    """Save, reload and compare the reloaded parameter count with the row."""
    path = save_model(model, models_dir, spec.id)
    reloaded = load_model(path)
    if reloaded.count_params() != row.params:
        logger.error(f"Row {spec.id}: reloaded model has {reloaded.count_params()} parameters, row says {row.params}")
        raise GeneoLabError(f"Row {spec.id}: persisted model does not match its row")


def fidelity_through(spaces: ModelSpaces, spec: ModelSpec, model: SurrogateModel, forwarded: np.ndarray,
                     data: ImageDataset, cache: FeatureCache, blackbox: BlackBoxRun, threads: int = 1) -> float:
    """1 - h_O(black-box, model) under the argmax metric on the test split."""
    idx = data.indices('test')
    test_images = data.images[idx]
    alpha = TableBlackBox(test_images, blackbox.scores[idx], 'blackbox').as_geo(spaces.images, spaces.scores)
    model_scores = model.scores_from_inputs(cache.inputs(model, 'test'))
    beta = TableBlackBox(forwarded[idx], model_scores, spec.id).as_geo(spaces.model_space(spec.kind), spaces.scores)
    result = surrogate_distance(spaces.observer, alpha, beta, EvaluationSet(list(test_images), ArgmaxDiscreteMetric()),
                                threads)
    if result.pair is None:
        raise GeneoLabError(f"Observer {spaces.observer.name} has no crossed pair for {spec.id}")
    return 1.0 - result.value


class ExperimentRunner:
    """Trains a list of model rows through one observer and writes the result tables."""

    def __init__(self, cfg: ExperimentConfig, spaces: ModelSpaces, data: ImageDataset, bank: Optional[PatternBank],
                 blackbox: BlackBoxRun, out_dir: str):
        self.cfg = cfg
        self.spaces = spaces
        self.data = data
        self.bank = bank
        self.blackbox = blackbox
        self.out_dir = out_dir
        self.models_dir = os.path.join(out_dir, 'models')
        self.logger = logging.getLogger(self.__class__.__name__)
        self._forwarded: Dict[str, np.ndarray] = {}
        self._caches: Dict[str, FeatureCache] = {}

    def forwarded(self, kind: str) -> Tuple[CrossedPair, np.ndarray]:
        """Crossed pair for this kind and the dataset images mapped by its forward arrow."""
        forward = self.spaces.forward_arrow(kind)
        pair = CrossedPair(0, forward, self.spaces.backward_arrow())
        if forward.id not in self._forwarded:
            self._forwarded[forward.id] = np.stack(forward.map_batch(list(self.data.images)))
            self._caches[forward.id] = FeatureCache(self._forwarded[forward.id], self.data, self.bank, self.cfg.threads)
        return pair, self._forwarded[forward.id]

    def targets(self) -> np.ndarray:
        if self.cfg.targets == 'labels':
            return self.data.labels
        return self.blackbox.scores.argmax(axis=1)

    def run_row(self, spec: ModelSpec) -> ResultRow:
        pair, images = self.forwarded(spec.kind)
        cache = self._caches[pair.forward.id]
        model = spec.build(images.shape[1:], self.bank)
        if pair.backward.kind != 'identity':
            raise GeneoLabError(f"Training through {pair.label} needs an identity backward arrow")
        self.logger.info(f"Row {spec.id}: training through {pair.label}")
        result = _train_spec(spec, model, cache, self.targets(), self.cfg.model_seed)
        fidelity = None
        if self.blackbox.scores is not None:
            fidelity = fidelity_through(self.spaces, spec, model, images, self.data, cache, self.blackbox,
                                        self.cfg.threads)
        row = _row(spec, model, self.data, cache, self.cfg, result.best_epoch, fidelity)
        _persist(spec, model, self.models_dir, row)
        return row

    def run(self, specs: List[ModelSpec], report: RunReport) -> RunReport:
        for spec in specs:
            started = time.perf_counter()
            try:
                row = self.run_row(spec)
            except GeneoLabError as e:
                self.logger.error(f"Row {spec.id} failed: {str(e)}")
                report.runtimes.append((spec.id, time.perf_counter() - started, f'error: {e}'))
                continue
            report.rows.append(row)
            report.runtimes.append((spec.id, time.perf_counter() - started, 'ok'))
            self.logger.info(f"Row {spec.id}: C1 {row.params}, C2 {row.nonlinearities}, "
                             f"accuracy {row.accuracy:.4f}, fidelity {row.fidelity}")
        write_tables(report, self.out_dir)
        return report


def write_tables(report: RunReport, out_dir: str) -> None:
    """results.csv (deterministic columns), curve.csv (its complexity/accuracy pairs) and runtime.csv."""
    os.makedirs(out_dir, exist_ok=True)
    frame = pd.DataFrame([asdict(r) for r in report.rows], columns=RESULT_COLUMNS)
    frame.to_csv(os.path.join(out_dir, 'results.csv'), index=False, float_format=FLOAT_FORMAT)
    frame[CURVE_COLUMNS].to_csv(os.path.join(out_dir, 'curve.csv'), index=False, float_format=FLOAT_FORMAT)
    runtime = pd.DataFrame(report.runtimes, columns=['model', 'seconds', 'status'])
    runtime.to_csv(os.path.join(out_dir, 'runtime.csv'), index=False, float_format='%.3f')
    logger.info(f"Wrote {len(frame)} rows to {out_dir}")


# -- commands ----------------------------------------------------------------------------

def cmd_run(cfg: ExperimentConfig) -> RunReport:
    """Train every configured model on the full-size images and report accuracy and fidelity."""
    data = load_experiment_data(cfg)
    report = RunReport(out_dir=cfg.out_dir)
    bank = None
    if any(m.kind in ('geo1', 'geo2') for m in cfg.models):
        bank = pattern_bank(cfg.patterns, data.images[data.indices('train')])
    blackbox = prepare_blackbox(cfg, data, report, os.path.join(cfg.out_dir, 'models'))
    if blackbox.row is not None:
        report.rows.append(blackbox.row)
    spaces = classification_observer(data.shape)
    return ExperimentRunner(cfg, spaces, data, bank, blackbox, cfg.out_dir).run(cfg.models, report)


def cmd_rescaled(cfg: ExperimentConfig) -> RunReport:
    """Retrain the rescaled rows on 2×2-max downscaled images (or through identities).

    The black-box keeps reading full-size images; only the surrogates move.
    """
    data = load_experiment_data(cfg)
    out_dir = os.path.join(cfg.out_dir, 'rescaled')
    report = RunReport(out_dir=out_dir)
    saved = os.path.join(cfg.out_dir, 'models', f'{cfg.blackbox.train.id}.json') if cfg.blackbox.train else None
    if cfg.blackbox.kind == 'cnn' and cfg.blackbox.model is None and saved and os.path.exists(saved):
        logger.info(f"Reusing the black-box saved by run: {saved}")
        cfg = replace(cfg, blackbox=replace(cfg.blackbox, model=saved))
    blackbox = prepare_blackbox(cfg, data, report)
    if cfg.rescale == 'identity':
        spaces = classification_observer(data.shape)
        patterns = cfg.patterns
    else:
        spaces = rescale_observer(data.shape)
        patterns = cfg.patterns.rescaled()
    bank = None
    if any(m.kind in ('geo1', 'geo2') for m in cfg.rescaled):
        train_images = data.images[data.indices('train')]
        bank = pattern_bank(patterns, np.stack(spaces.forward_arrow('geo1').map_batch(list(train_images))))
    runner = ExperimentRunner(cfg, spaces, data, bank, blackbox, out_dir)
    if cfg.rescale == '2x2max':
        report.extra['space_distance'] = rescale_distance(spaces, data, cfg.threads)
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, 'rescale.json'), 'w', encoding='utf-8') as fh:
            json.dump(report.extra['space_distance'], fh, indent=2, sort_keys=True)
    return runner.run(cfg.rescaled, report)


def rescale_distance(spaces: ModelSpaces, data: ImageDataset, threads: int = 1) -> Dict[str, float]:
    """Directed and symmetric distances between the stride-2 and half-size torus spaces."""
    obs = spaces.observer
    strided = next(a.cod for a in obs.translations.arrows if a.id == 'embed')
    half = spaces.torus
    idx = data.indices('test')[:SPACE_DISTANCE_IMAGES]
    big = list(data.images[idx])
    small = obs.translations.arrows[obs.translations.arrow_index('down')].map_batch(big)
    eval_big, eval_small = EvaluationSet(big), EvaluationSet(small)
    down_up = surrogate_distance(obs, identity(strided), identity(half), eval_big, threads).value
    up_down = surrogate_distance(obs, identity(half), identity(strided), eval_small, threads).value
    return {
        'full_to_half': down_up,
        'half_to_full': up_down,
        'symmetric': space_distance(obs, strided, half, eval_big, eval_small, threads),
        'images': len(idx),
    }


def cmd_sample_patterns(cfg: ExperimentConfig, out_path: str) -> str:
    """Sample the configured bank from the train split and save it for reuse."""
    data = load_experiment_data(cfg)
    bank = sample_patterns(data.images[data.indices('train')], cfg.patterns.count, cfg.patterns.width,
                           cfg.patterns.height, cfg.patterns.seed)
    directory, name = os.path.split(os.path.abspath(out_path))
    stem = name[:-5] if name.endswith('.json') else name
    return save_bank(bank, directory, stem)


def cmd_train_blackbox(cfg: ExperimentConfig, out_dir: Optional[str] = None) -> Dict[str, Any]:
    """Train the CNN black-box, save it and write its predictions for every image."""
    out_dir = out_dir or os.path.join(cfg.out_dir, 'blackbox')
    if cfg.blackbox.train is None:
        raise ConfigError("train-blackbox needs blackbox.train")
    data = load_experiment_data(cfg)
    report = RunReport(out_dir=out_dir)
    run = prepare_blackbox(replace(cfg, blackbox=replace(cfg.blackbox, kind='cnn', model=None)), data, report,
                           out_dir)
    table = os.path.join(out_dir, 'predictions.csv')
    geo = run.model.as_geo(image_space('images', *data.shape, translations=False), score_space('scores'))
    write_prediction_table(table, geo, data)
    write_tables(RunReport([run.row], report.runtimes), out_dir)
    return {'model': os.path.join(out_dir, f'{cfg.blackbox.train.id}.json'), 'predictions': table,
            'accuracy': run.row.accuracy}


def cmd_fetch_mnist(directory: str, overwrite: bool = False, base_url: Optional[str] = None) -> Dict[str, str]:
    client = MnistClient(base_url)
    try:
        return client.download_all(directory, overwrite)
    finally:
        client.close()

