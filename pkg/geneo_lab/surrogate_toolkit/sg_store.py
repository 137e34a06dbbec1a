"""Model persistence: a JSON manifest next to little-endian float32 blobs."""
import json
import logging
import os
from typing import Any, Dict, Tuple

import numpy as np

from ..errors import DataFormatError
from .sg_models import CnnModel, EmptyModel, Geo1Model, Geo2Model, MlpModel, SurrogateModel
from .sg_patterns import PatternBank

logger = logging.getLogger(__name__)

BLOB_DTYPE = 'f32le'
MANIFEST_VERSION = 1


def _write_blob(directory: str, stem: str, name: str, array: np.ndarray) -> Dict[str, Any]:
    file_name = f'{stem}.{name}.f32'
    np.ascontiguousarray(array, dtype='<f4').tofile(os.path.join(directory, file_name))
    return {'name': name, 'dtype': BLOB_DTYPE, 'shape': list(array.shape), 'file': file_name}


def _read_blob(directory: str, entry: Dict[str, Any]) -> np.ndarray:
    if entry.get('dtype') != BLOB_DTYPE:
        raise DataFormatError(f"Blob {entry.get('name')}: unsupported dtype {entry.get('dtype')}")
    path = os.path.join(directory, entry['file'])
    shape = tuple(entry['shape'])
    try:
        data = np.fromfile(path, dtype='<f4')
    except OSError as e:
        logger.error(f"Cannot read blob {path}: {str(e)}")
        raise DataFormatError(f"Cannot read blob {path}: {e}") from e
    if data.size != int(np.prod(shape)):
        raise DataFormatError(f"Blob {path} holds {data.size} values, manifest says {shape}")
    return data.reshape(shape).astype(np.float64)


def save_model(model: SurrogateModel, directory: str, stem: str) -> str:
    """Write ``<stem>.json`` plus one ``<stem>.<param>.f32`` file per parameter; returns the manifest path."""
    os.makedirs(directory, exist_ok=True)
    blobs = [_write_blob(directory, stem, name, value) for name, value in model.params.items()]
    manifest = {
        'version': MANIFEST_VERSION,
        'kind': model.kind,
        'shape': list(model.shape),
        'config': model.config(),
        'params': model.count_params(),
        'nonlinearities': model.count_nonlinearities(),
        'blobs': blobs,
    }
    bank = getattr(model, 'bank', None)
    if bank is not None:
        manifest['bank'] = {
            'sources': list(bank.sources),
            'centers': [list(c) for c in bank.centers],
            'seed': bank.seed,
            'blob': _write_blob(directory, stem, 'bank', bank.patterns),
        }
    path = os.path.join(directory, f'{stem}.json')
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    logger.info(f"Saved {model.kind} model to {path}")
    return path


def _build(kind: str, shape: Tuple[int, int], config: Dict[str, Any], bank: PatternBank) -> SurrogateModel:
    classes = config.get('classes', 10)
    if kind == 'geo1':
        return Geo1Model(bank, shape, classes)
    if kind == 'geo2':
        return Geo2Model(bank, shape, classes)
    if kind == 'mlp':
        return MlpModel(shape, config.get('hidden', ()), classes)
    if kind == 'cnn':
        return CnnModel(shape, tuple(config.get('channels', (44, 84))), config.get('dense', 92), classes,
                        config.get('kernel', 3))
    if kind == 'empty':
        return EmptyModel(shape, classes)
    raise DataFormatError(f"Unknown model kind {kind}")


def load_model(path: str) -> SurrogateModel:
    """Rebuild a model from its manifest; parameters come back as float64 copies of the stored float32."""
    directory = os.path.dirname(path) or '.'
    try:
        with open(path, encoding='utf-8') as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Cannot read model manifest {path}: {str(e)}")
        raise DataFormatError(f"Cannot read model manifest {path}: {e}") from e
    try:
        bank = None
        if 'bank' in manifest:
            info = manifest['bank']
            bank = PatternBank(_read_blob(directory, info['blob']), tuple(info['sources']),
                               tuple(tuple(c) for c in info['centers']), info.get('seed', 0))
        model = _build(manifest['kind'], tuple(manifest['shape']), manifest.get('config', {}), bank)
        model.set_params({entry['name']: _read_blob(directory, entry) for entry in manifest['blobs']})
    except KeyError as e:
        raise DataFormatError(f"Model manifest {path} lacks field {e}") from e
    return model


def save_bank(bank: PatternBank, directory: str, stem: str = 'patterns') -> str:
    """Write a pattern bank as ``<stem>.json`` plus one float32 blob."""
    os.makedirs(directory, exist_ok=True)
    manifest = {
        'version': MANIFEST_VERSION,
        'kind': 'patterns',
        'sources': list(bank.sources),
        'centers': [list(c) for c in bank.centers],
        'seed': bank.seed,
        'blob': _write_blob(directory, stem, 'bank', bank.patterns),
    }
    path = os.path.join(directory, f'{stem}.json')
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    logger.info(f"Saved {len(bank)} patterns to {path}")
    return path


def load_bank(path: str) -> PatternBank:
    directory = os.path.dirname(path) or '.'
    try:
        with open(path, encoding='utf-8') as fh:
            manifest = json.load(fh)
        return PatternBank(_read_blob(directory, manifest['blob']), tuple(manifest['sources']),
                           tuple(tuple(c) for c in manifest['centers']), manifest.get('seed', 0))
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Cannot read pattern bank {path}: {str(e)}")
        raise DataFormatError(f"Cannot read pattern bank {path}: {e}") from e
    except KeyError as e:
        raise DataFormatError(f"Pattern bank {path} lacks field {e}") from e
