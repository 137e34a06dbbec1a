"""Mini-batch SGD with early stopping on validation accuracy."""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, List, Optional, Tuple, Union

import numpy as np
from scipy.special import expit, logsumexp
from sklearn.metrics import accuracy_score

from ..errors import ConfigError, GeneoLabError, SpaceMismatchError, TrainingDivergedError
from ..geo_toolkit import Geo, GeoLike, as_geo
from ..observer_toolkit import CrossedPair
from .sg_data import ImageDataset
from .sg_models import Params, SurrogateModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float
    max_epochs: int
    batch_size: int = 64
    seed: int = 0
    patience: int = 20
    loss: Optional[str] = None  # 'bce' or 'ce'; None follows the model head
    warm_start: bool = False

    def __post_init__(self):
        for name in ('lr', 'max_epochs', 'batch_size', 'patience'):
            value = getattr(self, name)
            if not value > 0:
                raise ConfigError(f"TrainConfig.{name} must be positive, got {value}")
        if self.seed < 0:
            raise ConfigError(f"TrainConfig.seed must be non-negative, got {self.seed}")
        if self.loss not in (None, 'bce', 'ce'):
            raise ConfigError(f"Unknown loss {self.loss}")

    def loss_for(self, model: SurrogateModel) -> str:
        return self.loss or ('ce' if model.head == 'softmax' else 'bce')


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float


@dataclass
class TrainResult:
    model: SurrogateModel
    history: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_accuracy: float = 0.0


def one_hot(labels: np.ndarray, classes: int) -> np.ndarray:
    out = np.zeros((len(labels), classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def loss_and_grad(loss: str, logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean loss over the batch and its gradient with respect to the logits.

    'bce' sums per-class binary cross-entropy of sigmoid outputs against the
    one-hot target; 'ce' is softmax cross-entropy.
    """
    n, classes = logits.shape
    target = one_hot(labels, classes)
    if loss == 'bce':
        value = (np.logaddexp(0.0, logits) - target * logits).sum() / n
        probs = expit(logits)
    else:
        lse = logsumexp(logits, axis=1)
        value = (lse - logits[np.arange(n), labels]).sum() / n
        probs = np.exp(logits - lse[:, None])
    return float(value), (probs - target) / n


def batch_loss(model: SurrogateModel, inputs: Any, labels: np.ndarray, loss: str) -> float:
    logits, _ = model.forward(inputs)
    return loss_and_grad(loss, logits, labels)[0]


def accuracy(model: SurrogateModel, inputs: Any, labels: np.ndarray) -> float:
    if model.input_count(inputs) == 0:
        return 0.0
    logits, _ = model.forward(inputs)
    return float(accuracy_score(labels, logits.argmax(axis=1)))


def sgd_step(model: SurrogateModel, grads: Params, lr: float) -> None:
    for name, grad in grads.items():
        model.params[name] -= lr * grad


def train_on_inputs(model: SurrogateModel, train_inputs: Any, train_labels: np.ndarray, val_inputs: Any,
                    val_labels: np.ndarray, cfg: TrainConfig) -> TrainResult:
    """Train on prepared inputs; the best-validation parameters are restored at the end."""
    if not cfg.warm_start or not model.params:
        model.init_params(cfg.seed)
    loss = cfg.loss_for(model)
    rng = np.random.default_rng(cfg.seed)
    n = model.input_count(train_inputs)
    if n == 0:
        raise GeneoLabError("Cannot train on an empty training split")

    best_params = model.copy_params()
    best_acc, best_epoch, stale = -1.0, 0, 0
    history = []
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            logits, cache = model.forward(model.take(train_inputs, idx))
            value, dlogits = loss_and_grad(loss, logits, train_labels[idx])
            if not math.isfinite(value):
                logger.error(f"{model.kind}: loss became {value} at epoch {epoch} (lr {cfg.lr})")
                raise TrainingDivergedError(f"{model.kind}: non-finite loss at epoch {epoch}; "
                                            f"learning rate {cfg.lr} is probably too high")
            sgd_step(model, model.backward(cache, dlogits), cfg.lr)
            total += value * len(idx)
        val_acc = accuracy(model, val_inputs, val_labels)
        history.append(EpochRecord(epoch, total / n, val_acc))
        logger.info(f"{model.kind} epoch {epoch}: loss {total / n:.5f}, val accuracy {val_acc:.4f}")
        if val_acc > best_acc:
            best_acc, best_epoch, stale = val_acc, epoch, 0
            best_params = model.copy_params()
        else:
            stale += 1
            if stale >= cfg.patience:
                logger.info(f"{model.kind}: early stop at epoch {epoch}, best epoch {best_epoch}")
                break
    model.set_params(best_params)
    return TrainResult(model, history, best_epoch, best_acc)


def _target_labels(targets: Union[np.ndarray, GeoLike], images: np.ndarray, idx: np.ndarray,
                   threads: int) -> np.ndarray:
    if isinstance(targets, np.ndarray):
        return targets[idx].astype(np.int64)
    geo: Geo = as_geo(targets)
    outputs = geo.map_batch(list(images[idx]))
    return np.array([int(np.argmax(np.asarray(y).ravel())) for y in outputs], dtype=np.int64)


def train(model: SurrogateModel, data: ImageDataset, targets: Union[np.ndarray, GeoLike], cfg: TrainConfig,
          pair: Optional[CrossedPair] = None, threads: int = 1) -> TrainResult:
    """Fit ``model`` to the labels or to a black-box Geo's predictions on the train split.

    With a crossed pair the model sees the forward translation of every image;
    labels pass through unchanged, so the backward arrow must be an identity.
    """
    images = data.images
    if pair is not None:
        if pair.backward.dom != pair.backward.cod or pair.backward.kind != 'identity':
            raise GeneoLabError(f"Training through pair {pair.label} needs an identity backward arrow")
        if pair.forward.dom.carrier.shape != data.shape:
            raise SpaceMismatchError(f"Pair {pair.label} starts at {pair.forward.dom.id}, "
                                     f"not at {data.shape[0]}x{data.shape[1]} images")
        images = np.stack(pair.forward.map_batch(list(images)))
    if images.shape[1:] != model.shape:
        raise SpaceMismatchError(f"{model.kind} expects {model.shape} images, training data is {images.shape[1:]}")
    train_idx, val_idx = data.indices('train'), data.indices('val')
    train_labels = _target_labels(targets, data.images, train_idx, threads)
    val_labels = _target_labels(targets, data.images, val_idx, threads)
    train_inputs = model.prepare(images[train_idx], threads)
    val_inputs = model.prepare(images[val_idx], threads)
    logger.info(f"Training {model.kind} ({model.count_params()} params) on {len(train_idx)} images")
    return train_on_inputs(model, train_inputs, train_labels, val_inputs, val_labels, cfg)


def evaluate(model: SurrogateModel, data: ImageDataset, tag: str = 'test', threads: int = 1,
             transform: Optional[Any] = None) -> float:
    """Accuracy against the true labels on one split; ``transform`` maps the images first."""
    idx = data.indices(tag)
    images = data.images[idx]
    if transform is not None:
        images = transform(images)
    if len(idx) == 0:
        return 0.0
    return float(accuracy_score(data.labels[idx], model.predict(images, threads)))
