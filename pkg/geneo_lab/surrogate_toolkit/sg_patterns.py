"""Pattern banks, torus activation maps and the two pooling operators."""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import sparse

from ..errors import GeneoLabError, SpaceMismatchError, StructuralError
from ..geo_toolkit import Geneo, Geo, GroupHom, check_nonexpansive, declare_geneo
from ..perception_toolkit import PerceptionSpace, sample_probes

logger = logging.getLogger(__name__)

MAX_RESAMPLES = 1000
# images per activation pass; keeps the working arrays cache-sized
CACHE_CHUNK = 256


@dataclass(frozen=True)
class PatternBank:
    """Square cutouts of training images.

    ``sources[i]`` is the index (into the sampled image array) of the image
    pattern i was cut from and ``centers[i]`` its (row, column) center.
    """

    patterns: np.ndarray
    sources: Tuple[int, ...]
    centers: Tuple[Tuple[int, int], ...]
    seed: int = 0

    def __post_init__(self):
        if self.patterns.ndim != 3 or len(self.patterns) < 1:
            raise StructuralError(f"A pattern bank needs at least one 2-d pattern, got shape {self.patterns.shape}")

    def __len__(self) -> int:
        return len(self.patterns)

    @property
    def patch_shape(self) -> Tuple[int, int]:
        return int(self.patterns.shape[1]), int(self.patterns.shape[2])

    def head(self, count: int) -> 'PatternBank':
        """The first ``count`` patterns (banks of different sizes share a prefix)."""
        return PatternBank(self.patterns[:count], self.sources[:count], self.centers[:count], self.seed)


def crop_torus(image: np.ndarray, center: Tuple[int, int], height: int, width: int) -> np.ndarray:
    """height×width window centered at ``center``, indices wrapping around the image."""
    rows = (np.arange(height) - height // 2 + center[0]) % image.shape[0]
    cols = (np.arange(width) - width // 2 + center[1]) % image.shape[1]
    return image[np.ix_(rows, cols)]


def sample_patterns(images: np.ndarray, count: int, width: int = 9, height: int = 9, seed: int = 0) -> PatternBank:
    """Draw ``count`` patches: image uniform, center proportional to pixel intensity."""
    if count < 1:
        raise GeneoLabError(f"Pattern count must be at least 1, got {count}")
    if width % 2 == 0 or height % 2 == 0:
        raise GeneoLabError(f"Pattern dims must be odd, got {width}x{height}")
    if height > images.shape[1] or width > images.shape[2]:
        raise SpaceMismatchError(f"Pattern {width}x{height} larger than images {images.shape[2]}x{images.shape[1]}")
    rng = np.random.default_rng(seed)
    h, w = images.shape[1:]
    patterns, sources, centers = [], [], []
    for _ in range(count):
        for _attempt in range(MAX_RESAMPLES):
            j = int(rng.integers(len(images)))
            total = images[j].sum()
            if total > 0:
                break
        else:
            logger.error(f"No image with a nonzero pixel after {MAX_RESAMPLES} draws")
            raise GeneoLabError("Cannot sample patterns: images are all zero")
        flat = images[j].ravel()
        center = divmod(int(rng.choice(h * w, p=flat / total)), w)
        patterns.append(crop_torus(images[j], center, height, width))
        sources.append(j)
        centers.append(center)
    logger.info(f"Sampled {count} patterns of {width}x{height} (seed {seed})")
    return PatternBank(np.stack(patterns), tuple(sources), tuple(centers), seed)


def activation_maps(images: np.ndarray, pattern: np.ndarray) -> np.ndarray:
    """1 - mean |x((i, j) + (n, m)) - p(i, j)| over the window, for every offset (n, m).

    ``images`` is (h, w) or (count, h, w); offsets and window indices wrap around.
    """
    images = np.asarray(images, dtype=np.float64)
    ph, pw = pattern.shape
    if ph > images.shape[-2] or pw > images.shape[-1]:
        raise SpaceMismatchError(f"Pattern {pattern.shape} larger than image {images.shape[-2:]}")
    h, w = images.shape[-2:]
    pad = [(0, 0)] * (images.ndim - 2) + [(ph // 2, ph // 2), (pw // 2, pw // 2)]
    padded = np.pad(images, pad, mode='wrap')
    acc = np.zeros_like(images)
    gap = np.empty_like(images)
    for di in range(ph):
        for dj in range(pw):
            np.subtract(padded[..., di:di + h, dj:dj + w], pattern[di, dj], out=gap)
            acc += np.abs(gap, out=gap)
    return np.clip(1.0 - acc / (ph * pw), 0.0, 1.0)


def pattern_activation_map(image: np.ndarray, pattern: np.ndarray) -> np.ndarray:
    return activation_maps(image, pattern)


def image_wide_maxpool(activation: np.ndarray) -> float:
    if activation.size == 0:
        raise StructuralError("Cannot pool an empty map")
    return float(activation.max())


def channel_wise_max(activation: np.ndarray) -> np.ndarray:
    """Keep every entry equal to the global max, zero the rest."""
    if activation.size == 0:
        raise StructuralError("Cannot pool an empty map")
    return np.where(activation == activation.max(), activation, 0.0)


def _chunks(n: int, threads: int) -> List[slice]:
    size = max(1, math.ceil(n / max(1, threads)))
    return [slice(i, min(n, i + size)) for i in range(0, n, size)]


def _maxpool_block(images: np.ndarray, bank: PatternBank) -> np.ndarray:
    out = np.empty((len(images), len(bank)))
    for start in range(0, len(images), CACHE_CHUNK):
        part = images[start:start + CACHE_CHUNK]
        for i, pattern in enumerate(bank.patterns):
            out[start:start + len(part), i] = activation_maps(part, pattern).max(axis=(1, 2))
    return out


def extract_features(images: np.ndarray, bank: PatternBank, threads: int = 1) -> np.ndarray:
    """Image-wide maxpool of every pattern's map: (count, patterns).

    Work is split over images only, so the result does not depend on ``threads``.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 2:
        images = images[None]
    if threads <= 1 or len(images) < 2:
        return _maxpool_block(images, bank)
    parts = Parallel(n_jobs=threads, backend='threading')(
        delayed(_maxpool_block)(images[s], bank) for s in _chunks(len(images), threads))
    return np.concatenate(parts)


def _cwm_block(images: np.ndarray, bank: PatternBank) -> sparse.csr_matrix:
    n, h, w = images.shape
    rows, cols, vals = [], [], []
    for i, pattern in enumerate(bank.patterns):
        for start in range(0, n, CACHE_CHUNK):
            maps = activation_maps(images[start:start + CACHE_CHUNK], pattern).reshape(-1, h * w)
            img, pos = np.nonzero(maps == maps.max(axis=1, keepdims=True))
            rows.append((img + start) * h * w + pos)
            cols.append(np.full(len(img), i))
            vals.append(maps[img, pos])
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n * h * w, len(bank)))


def cwm_features(images: np.ndarray, bank: PatternBank, threads: int = 1) -> sparse.csr_matrix:
    """Channel-wise-max maps of every pattern as a sparse (count·h·w, patterns) matrix.

    Row n·h·w + r·w + c holds position (r, c) of image n.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 2:
        images = images[None]
    if threads <= 1 or len(images) < 2:
        return _cwm_block(images, bank)
    parts = Parallel(n_jobs=threads, backend='threading')(
        delayed(_cwm_block)(images[s], bank) for s in _chunks(len(images), threads))
    return sparse.vstack(parts, format='csr')


# -- rescaling ---------------------------------------------------------------------

def downscale_2x2_max(images: np.ndarray) -> np.ndarray:
    """Each output pixel is the max of its 2×2 block; works on (h, w) and (count, h, w)."""
    images = np.asarray(images)
    h, w = images.shape[-2:]
    if h % 2 or w % 2:
        raise StructuralError(f"2x2 max downscaling needs even dims, got {h}x{w}")
    blocks = images.reshape(images.shape[:-2] + (h // 2, 2, w // 2, 2))
    return blocks.max(axis=(-3, -1))


def upscale_nearest(images: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(np.asarray(images), 2, axis=-2), 2, axis=-1)


def downscale_geo(dom: PerceptionSpace, cod: PerceptionSpace, probe_count: int = 64, seed: int = 0) -> Geneo:
    """The 2×2-max rescaler as a GENEO from stride-2 torus images to half-size torus images.

    Validated on sampled pairs under the spaces' own metrics.
    """
    if (dom.carrier.height // 2, dom.carrier.width // 2) != cod.carrier.shape:
        raise SpaceMismatchError(f"{dom.id} does not halve onto {cod.id}")
    geo = Geo(dom, cod, downscale_2x2_max, GroupHom.identity(dom.group), 'down', 'builtin',
              batch_fn=lambda xs: list(downscale_2x2_max(np.stack(xs))))
    probes = sample_probes(dom, probe_count, seed)
    pairs = list(zip(probes[0::2], probes[1::2]))
    result = check_nonexpansive(geo, pairs, group_probes=probes[:2])
    if not isinstance(result, Geneo):
        logger.error(f"2x2 max downscaling failed its sampled check: ratio {result.worst_ratio}")
        raise GeneoLabError("2x2 max downscaling is expansive on the sampled pairs")
    return result


def upscale_geo(dom: PerceptionSpace, cod: PerceptionSpace) -> Geneo:
    """Nearest-neighbour upscaling, the declared inverse of ``downscale_geo``."""
    if (dom.carrier.height * 2, dom.carrier.width * 2) != cod.carrier.shape:
        raise SpaceMismatchError(f"{dom.id} does not double onto {cod.id}")
    geo = Geo(dom, cod, upscale_nearest, GroupHom.identity(dom.group), 'up', 'builtin',
              batch_fn=lambda xs: list(upscale_nearest(np.stack(xs))))
    return declare_geneo(geo, 'nearest-neighbour upscaling preserves sup-norm distances')


def brute_force_downscale(image: np.ndarray) -> np.ndarray:
    """Block loop form of ``downscale_2x2_max`` for a single image."""
    h, w = image.shape
    out = np.empty((h // 2, w // 2), dtype=image.dtype)
    for r in range(h // 2):
        for c in range(w // 2):
            out[r, c] = image[2 * r:2 * r + 2, 2 * c:2 * c + 2].max()
    return out


def shift_images(images: np.ndarray, shift: Sequence[int]) -> np.ndarray:
    return np.roll(images, tuple(shift), axis=(-2, -1))


def features_for_patterns(images: np.ndarray, patterns: Sequence[np.ndarray]) -> np.ndarray:
    """Unbatched loop over images and patterns, the reference form of ``extract_features``."""
    out = np.empty((len(images), len(patterns)))
    for j, image in enumerate(images):
        for i, pattern in enumerate(patterns):
            out[j, i] = image_wide_maxpool(pattern_activation_map(image, pattern))
    return out


def bank_from_arrays(patterns: np.ndarray, sources: Optional[Sequence[int]] = None,
                     centers: Optional[Sequence[Sequence[int]]] = None, seed: int = 0) -> PatternBank:
    count = len(patterns)
    sources = tuple(int(s) for s in sources) if sources is not None else tuple([-1] * count)
    centers = tuple((int(c[0]), int(c[1])) for c in centers) if centers is not None else tuple([(0, 0)] * count)
    return PatternBank(np.asarray(patterns, dtype=np.float64), sources, centers, seed)
