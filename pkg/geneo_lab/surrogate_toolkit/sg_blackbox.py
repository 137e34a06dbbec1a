"""Black-box classifiers f_α: label supervisor, prediction table, trained CNN."""
import logging
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from ..errors import DataFormatError, SpaceMismatchError
from ..geo_toolkit import Geo, GeoLike, GroupHom, as_geo
from ..perception_toolkit import PerceptionSpace
from .sg_data import ImageDataset

logger = logging.getLogger(__name__)


def _image_key(x: Any) -> bytes:
    return np.ascontiguousarray(x, dtype=np.float64).tobytes()


def _score_row(label: int, classes: int) -> np.ndarray:
    row = np.zeros((1, classes))
    row[0, label] = 1.0
    return row


class TableBlackBox:
    """Scores known for a fixed set of images, looked up by pixel content."""

    def __init__(self, images: np.ndarray, scores: np.ndarray, name: str = 'table'):
        if len(images) != len(scores):
            raise DataFormatError(f"{len(images)} images but {len(scores)} score rows")
        self.name = name
        self.classes = scores.shape[1]
        self._rows: Dict[bytes, np.ndarray] = {}
        for image, row in zip(images, scores):
            self._rows.setdefault(_image_key(image), row[None, :])

    def __call__(self, x: Any) -> np.ndarray:
        try:
            return self._rows[_image_key(x)]
        except KeyError:
            logger.error(f"Black-box {self.name}: image not in the table")
            raise DataFormatError(f"Black-box {self.name} has no entry for this image") from None

    def as_geo(self, dom: PerceptionSpace, cod: PerceptionSpace) -> Geo:
        if cod.carrier.shape != (1, self.classes):
            raise SpaceMismatchError(f"Black-box {self.name}: codomain {cod.id} does not hold {self.classes} scores")
        return Geo(dom, cod, self, GroupHom.annihilator(dom.group, cod.group), self.name, 'blackbox')


def supervisor(ds: ImageDataset, classes: int = 10) -> TableBlackBox:
    """The map sending every dataset image to the one-hot vector of its label."""
    scores = np.zeros((len(ds), classes))
    scores[np.arange(len(ds)), ds.labels] = 1.0
    return TableBlackBox(ds.images, scores, 'supervisor')


def read_prediction_table(path: str, ds: ImageDataset, classes: int = 10) -> TableBlackBox:
    """CSV ``index,predicted_class[,score_0..score_{classes-1}]`` over dataset indices."""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        logger.error(f"Cannot read prediction table {path}: {str(e)}")
        raise DataFormatError(f"Cannot read prediction table {path}: {e}") from e
    for column in ('index', 'predicted_class'):
        if column not in frame.columns:
            raise DataFormatError(f"Prediction table {path} lacks column {column}")
    idx = frame['index'].to_numpy(dtype=np.int64)
    if len(idx) and (idx.min() < 0 or idx.max() >= len(ds)):
        raise DataFormatError(f"Prediction table {path} refers to images outside 0..{len(ds) - 1}")
    score_columns = [f'score_{k}' for k in range(classes)]
    if all(c in frame.columns for c in score_columns):
        scores = frame[score_columns].to_numpy(dtype=np.float64)
        # only the argmax is compared, but the stored class must agree with it
        if (scores.argmax(axis=1) != frame['predicted_class'].to_numpy()).any():
            raise DataFormatError(f"Prediction table {path}: predicted_class disagrees with the scores")
    else:
        labels = frame['predicted_class'].to_numpy(dtype=np.int64)
        if len(labels) and (labels.min() < 0 or labels.max() >= classes):
            raise DataFormatError(f"Prediction table {path}: class outside 0..{classes - 1}")
        scores = np.zeros((len(frame), classes))
        scores[np.arange(len(frame)), labels] = 1.0
    return TableBlackBox(ds.images[idx], scores, f'table:{path}')


def write_prediction_table(path: str, blackbox: GeoLike, ds: ImageDataset, idx: Optional[np.ndarray] = None) -> None:
    """Evaluate ``blackbox`` on dataset images and store its predictions and scores."""
    geo = as_geo(blackbox)
    idx = np.arange(len(ds)) if idx is None else np.asarray(idx)
    scores = np.stack([np.asarray(y).ravel() for y in geo.map_batch(list(ds.images[idx]))])
    frame = pd.DataFrame({'index': idx, 'predicted_class': scores.argmax(axis=1)})
    for k in range(scores.shape[1]):
        frame[f'score_{k}'] = scores[:, k]
    frame.to_csv(path, index=False, float_format='%.9g')
    logger.info(f"Wrote {len(frame)} predictions to {path}")
