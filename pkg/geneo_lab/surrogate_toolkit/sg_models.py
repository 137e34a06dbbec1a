"""Trainable classifiers: GEO1, GEO2, MLP and the small CNN black-box.

Every model splits into ``prepare`` (fixed feature stage, computed once per
image set) and ``forward``/``backward`` over the trainable head, so cached
features give the same scores as a full pass.
"""
import copy
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import sparse
from scipy.special import expit, softmax

from ..errors import ConfigError, SpaceMismatchError
from ..geo_toolkit import Geo, GroupHom
from ..perception_toolkit import PerceptionSpace
from .sg_patterns import PatternBank, cwm_features, extract_features

logger = logging.getLogger(__name__)

# images per evaluation pass in ``scores``
EVAL_BATCH = 512

Params = Dict[str, np.ndarray]


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, x)


class SurrogateModel:
    """Base class for the trainable classifiers.

    Subclasses define ``param_shapes``, ``fan_in``, ``forward``, ``backward``
    and ``count_nonlinearities``; ``head`` selects the output nonlinearity
    ('sigmoid' per class or 'softmax').
    """

    kind = 'abstract'
    head = 'sigmoid'

    def __init__(self, shape: Tuple[int, int], classes: int = 10):
        self.shape = (int(shape[0]), int(shape[1]))
        self.classes = classes
        self.params: Params = {}
        self.logger = logging.getLogger(self.__class__.__name__)

    # -- parameters ---------------------------------------------------------

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        raise NotImplementedError

    def fan_in(self, name: str) -> int:
        raise NotImplementedError

    def init_params(self, seed: int) -> None:
        """Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], in declaration order."""
        rng = np.random.default_rng(seed)
        params = {}
        for name, shape in self.param_shapes().items():
            fan = self.fan_in(name)
            bound = 1.0 / math.sqrt(fan) if fan > 0 else 0.0
            params[name] = rng.uniform(-bound, bound, size=shape)
        self.params = params

    def zero_params(self) -> None:
        self.params = {name: np.zeros(shape) for name, shape in self.param_shapes().items()}

    def copy_params(self) -> Params:
        return {name: value.copy() for name, value in self.params.items()}

    def snapshot(self) -> 'SurrogateModel':
        """A shallow clone holding its own copy of the parameters."""
        clone = copy.copy(self)
        clone.params = self.copy_params()
        return clone

    def set_params(self, params: Params) -> None:
        shapes = self.param_shapes()
        if set(params) != set(shapes):
            raise ConfigError(f"{self.kind}: expected parameters {sorted(shapes)}, got {sorted(params)}")
        for name, value in params.items():
            if tuple(value.shape) != tuple(shapes[name]):
                raise ConfigError(f"{self.kind}: parameter {name} has shape {value.shape}, expected {shapes[name]}")
        self.params = {name: np.asarray(value, dtype=np.float64) for name, value in params.items()}

    def count_params(self) -> int:
        return int(sum(int(np.prod(shape)) for shape in self.param_shapes().values()))

    def count_nonlinearities(self) -> int:
        raise NotImplementedError

    def config(self) -> Dict[str, Any]:
        """Constructor arguments other than the shape, for persistence."""
        return {'classes': self.classes}

    # -- evaluation -----------------------------------------------------------

    def check_images(self, images: np.ndarray) -> np.ndarray:
        images = np.asarray(images, dtype=np.float64)
        if images.ndim == 2:
            images = images[None]
        if images.shape[1:] != self.shape:
            logger.error(f"{self.kind}: images of shape {images.shape[1:]} for a {self.shape} model")
            raise SpaceMismatchError(f"{self.kind} expects {self.shape[0]}x{self.shape[1]} images, "
                                     f"got {images.shape[1]}x{images.shape[2]}")
        return images

    def prepare(self, images: np.ndarray, threads: int = 1) -> Any:
        return self.check_images(images)

    def take(self, inputs: Any, idx: np.ndarray) -> Any:
        return inputs[idx]

    def input_count(self, inputs: Any) -> int:
        return len(inputs)

    def forward(self, inputs: Any) -> Tuple[np.ndarray, Any]:
        """Logits and the cache ``backward`` needs."""
        raise NotImplementedError

    def backward(self, cache: Any, dlogits: np.ndarray) -> Params:
        raise NotImplementedError

    def outputs(self, logits: np.ndarray) -> np.ndarray:
        if self.head == 'softmax':
            return softmax(logits, axis=1)
        return expit(logits)

    def scores(self, images: np.ndarray, threads: int = 1) -> np.ndarray:
        images = self.check_images(images)
        parts = []
        for start in range(0, len(images), EVAL_BATCH):
            logits, _ = self.forward(self.prepare(images[start:start + EVAL_BATCH], threads))
            parts.append(self.outputs(logits))
        if not parts:
            return np.zeros((0, self.classes))
        return np.concatenate(parts)

    def scores_from_inputs(self, inputs: Any) -> np.ndarray:
        logits, _ = self.forward(inputs)
        return self.outputs(logits)

    def predict(self, images: np.ndarray, threads: int = 1) -> np.ndarray:
        return self.scores(images, threads).argmax(axis=1)

    def as_geo(self, dom: PerceptionSpace, cod: PerceptionSpace, name: Optional[str] = None,
               threads: int = 1) -> Geo:
        """The model as a Geo from images to 1×classes score vectors.

        The hom sends every group element to the identity of ``cod``'s group.
        The Geo evaluates a snapshot of the current parameters; later
        training leaves it unchanged.
        """
        if dom.carrier.shape != self.shape:
            raise SpaceMismatchError(f"{self.kind}: domain {dom.id} is not {self.shape[0]}x{self.shape[1]}")
        if cod.carrier.shape != (1, self.classes):
            raise SpaceMismatchError(f"{self.kind}: codomain {cod.id} does not hold {self.classes} scores")

        frozen = self.snapshot()

        def fn(x):
            return frozen.scores(np.asarray(x)[None], threads)[0][None, :]

        def batch_fn(xs):
            if len(xs) == 0:
                return []
            return list(frozen.scores(np.stack(xs), threads)[:, None, :])

        return Geo(dom, cod, fn, GroupHom.annihilator(dom.group, cod.group), name or self.kind, 'model', batch_fn)

    def __repr__(self):
        return f"{self.__class__.__name__}({self.shape[0]}x{self.shape[1]}, params={self.count_params()})"


class Geo1Model(SurrogateModel):
    """Image-wide maxpool of every pattern's activation map, then a sigmoid head."""

    kind = 'geo1'

    def __init__(self, bank: PatternBank, shape: Tuple[int, int] = (28, 28), classes: int = 10):
        super().__init__(shape, classes)
        self.bank = bank

    @property
    def patterns(self) -> int:
        return len(self.bank)

    def param_shapes(self):
        return {'gamma': (self.classes, self.patterns), 'b': (self.classes,)}

    def fan_in(self, name):
        return self.patterns

    def count_nonlinearities(self) -> int:
        # one maxpool per pattern, one sigmoid per class
        return self.patterns + self.classes

    def prepare(self, images, threads=1):
        return extract_features(self.check_images(images), self.bank, threads)

    def forward(self, inputs):
        return inputs @ self.params['gamma'].T + self.params['b'], inputs

    def backward(self, cache, dlogits):
        return {'gamma': dlogits.T @ cache, 'b': dlogits.sum(axis=0)}


@dataclass(frozen=True)
class CwmInputs:
    """Channel-wise-max maps of ``count`` images as one sparse (count·h·w, patterns) matrix."""

    maps: sparse.csr_matrix
    count: int
    pixels: int

    def __len__(self):
        return self.count

    def rows(self, idx: np.ndarray) -> 'CwmInputs':
        idx = np.asarray(idx)
        rows = (idx[:, None] * self.pixels + np.arange(self.pixels)).ravel()
        return CwmInputs(self.maps[rows], len(idx), self.pixels)


class Geo2Model(SurrogateModel):
    """Channel-wise max per pattern, a sigmoid channel mix, then a position-dependent sigmoid head.

    The mix uses one shared bias.
    """

    kind = 'geo2'

    def __init__(self, bank: PatternBank, shape: Tuple[int, int] = (28, 28), classes: int = 10):
        super().__init__(shape, classes)
        self.bank = bank

    @property
    def patterns(self) -> int:
        return len(self.bank)

    @property
    def pixels(self) -> int:
        return self.shape[0] * self.shape[1]

    def param_shapes(self):
        return {'w': (self.patterns,), 'b_mix': (1,), 'head': (self.classes, self.pixels), 'b': (self.classes,)}

    def fan_in(self, name):
        return self.patterns if name in ('w', 'b_mix') else self.pixels

    def count_nonlinearities(self) -> int:
        return 2 * self.patterns + 1 + self.classes

    def prepare(self, images, threads=1):
        images = self.check_images(images)
        return CwmInputs(cwm_features(images, self.bank, threads), len(images), self.pixels)

    def take(self, inputs, idx):
        return inputs.rows(idx)

    def forward(self, inputs):
        z = inputs.maps @ self.params['w'] + self.params['b_mix'][0]
        mixed = expit(z).reshape(inputs.count, self.pixels)
        return mixed @ self.params['head'].T + self.params['b'], (inputs, mixed)

    def backward(self, cache, dlogits):
        inputs, mixed = cache
        dmixed = dlogits @ self.params['head']
        dz = (dmixed * mixed * (1.0 - mixed)).ravel()
        return {
            'w': np.asarray(inputs.maps.T @ dz).ravel(),
            'b_mix': np.array([dz.sum()]),
            'head': dlogits.T @ mixed,
            'b': dlogits.sum(axis=0),
        }


class MlpModel(SurrogateModel):
    """Fully connected sigmoid network on flattened pixels; ``hidden=()`` is logistic regression."""

    kind = 'mlp'

    def __init__(self, shape: Tuple[int, int] = (28, 28), hidden: Sequence[int] = (), classes: int = 10):
        super().__init__(shape, classes)
        self.hidden = tuple(int(k) for k in hidden)
        if any(k < 1 for k in self.hidden):
            raise ConfigError(f"Hidden layer sizes must be positive, got {self.hidden}")

    @property
    def sizes(self) -> List[int]:
        return [self.shape[0] * self.shape[1], *self.hidden, self.classes]

    def param_shapes(self):
        shapes = {}
        sizes = self.sizes
        for k in range(len(sizes) - 1):
            shapes[f'W{k}'] = (sizes[k], sizes[k + 1])
            shapes[f'b{k}'] = (sizes[k + 1],)
        return shapes

    def fan_in(self, name):
        return self.sizes[int(name[1:])]

    def count_nonlinearities(self) -> int:
        return sum(self.hidden) + self.classes

    def config(self):
        return {'classes': self.classes, 'hidden': list(self.hidden)}

    def prepare(self, images, threads=1):
        images = self.check_images(images)
        return images.reshape(len(images), -1)

    def forward(self, inputs):
        activations = [inputs]
        layers = len(self.sizes) - 1
        out = inputs
        for k in range(layers):
            out = out @ self.params[f'W{k}'] + self.params[f'b{k}']
            if k < layers - 1:
                out = expit(out)
                activations.append(out)
        return out, activations

    def backward(self, cache, dlogits):
        grads = {}
        grad = dlogits
        for k in reversed(range(len(self.sizes) - 1)):
            grads[f'W{k}'] = cache[k].T @ grad
            grads[f'b{k}'] = grad.sum(axis=0)
            if k > 0:
                a = cache[k]
                grad = (grad @ self.params[f'W{k}'].T) * a * (1.0 - a)
        return grads


# -- convolution helpers ------------------------------------------------------------

def conv2d_valid(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """x (N, C, H, W), kernels (F, C, k, k) -> (N, F, H-k+1, W-k+1) and the window view."""
    k = kernels.shape[-1]
    windows = sliding_window_view(x, (k, k), axis=(2, 3))
    out = np.tensordot(windows, kernels, axes=([1, 4, 5], [1, 2, 3]))
    return out.transpose(0, 3, 1, 2) + bias[None, :, None, None], windows


def conv2d_backward(dout: np.ndarray, windows: np.ndarray, kernels: np.ndarray,
                    need_input_grad: bool = True) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    dkernels = np.tensordot(dout, windows, axes=([0, 2, 3], [0, 2, 3]))
    dbias = dout.sum(axis=(0, 2, 3))
    if not need_input_grad:
        return dkernels, dbias, None
    k = kernels.shape[-1]
    padded = np.pad(dout, ((0, 0), (0, 0), (k - 1, k - 1), (k - 1, k - 1)))
    pwindows = sliding_window_view(padded, (k, k), axis=(2, 3))
    dx = np.tensordot(pwindows, kernels[:, :, ::-1, ::-1], axes=([1, 4, 5], [0, 2, 3]))
    return dkernels, dbias, dx.transpose(0, 3, 1, 2)


def maxpool2(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """2×2 max pooling with floor semantics; also returns the argmax position in each block."""
    n, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    blocks = x[:, :, :2 * h2, :2 * w2].reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, c, h2, w2, 4)
    arg = blocks.argmax(axis=-1)
    return np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0], arg


def maxpool2_backward(dout: np.ndarray, arg: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    n, c, h, w = shape
    h2, w2 = dout.shape[2:]
    dblocks = np.zeros((n, c, h2, w2, 4))
    np.put_along_axis(dblocks, arg[..., None], dout[..., None], axis=-1)
    dx = np.zeros(shape)
    dx[:, :, :2 * h2, :2 * w2] = dblocks.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5) \
        .reshape(n, c, 2 * h2, 2 * w2)
    return dx


class CnnModel(SurrogateModel):
    """Two conv3×3 + ReLU + 2×2 maxpool stages, a ReLU dense layer and a softmax head.

    The reference configuration (44, 84, 92) on 28×28 images has 228010 parameters.
    """

    kind = 'cnn'
    head = 'softmax'

    def __init__(self, shape: Tuple[int, int] = (28, 28), channels: Tuple[int, int] = (44, 84), dense: int = 92,
                 classes: int = 10, kernel: int = 3):
        super().__init__(shape, classes)
        self.channels = (int(channels[0]), int(channels[1]))
        self.dense = int(dense)
        self.kernel = int(kernel)
        h2, w2 = self.stage_shapes()[-1]
        if h2 < 1 or w2 < 1:
            raise ConfigError(f"Images of {shape[0]}x{shape[1]} are too small for two conv/pool stages")

    def stage_shapes(self) -> List[Tuple[int, int]]:
        """Spatial dims after conv1, pool1, conv2, pool2."""
        k = self.kernel
        h1, w1 = self.shape[0] - k + 1, self.shape[1] - k + 1
        p1 = (h1 // 2, w1 // 2)
        h2, w2 = p1[0] - k + 1, p1[1] - k + 1
        return [(h1, w1), p1, (h2, w2), (h2 // 2, w2 // 2)]

    @property
    def flat(self) -> int:
        h, w = self.stage_shapes()[-1]
        return self.channels[1] * h * w

    def param_shapes(self):
        c1, c2 = self.channels
        k = self.kernel
        return {
            'K1': (c1, 1, k, k), 'c1': (c1,),
            'K2': (c2, c1, k, k), 'c2': (c2,),
            'W3': (self.flat, self.dense), 'b3': (self.dense,),
            'W4': (self.dense, self.classes), 'b4': (self.classes,),
        }

    def fan_in(self, name):
        k2 = self.kernel * self.kernel
        return {'K1': k2, 'c1': k2, 'K2': self.channels[0] * k2, 'c2': self.channels[0] * k2,
                'W3': self.flat, 'b3': self.flat, 'W4': self.dense, 'b4': self.dense}[name]

    def count_nonlinearities(self) -> int:
        # ReLU units of both conv stages and the dense layer, plus the softmax outputs
        (h1, w1), _, (h2, w2), _ = self.stage_shapes()
        return self.channels[0] * h1 * w1 + self.channels[1] * h2 * w2 + self.dense + self.classes

    def config(self):
        return {'classes': self.classes, 'channels': list(self.channels), 'dense': self.dense, 'kernel': self.kernel}

    def forward(self, inputs):
        p = self.params
        x = inputs[:, None]
        z1, win1 = conv2d_valid(x, p['K1'], p['c1'])
        a1 = relu(z1)
        p1, arg1 = maxpool2(a1)
        z2, win2 = conv2d_valid(p1, p['K2'], p['c2'])
        a2 = relu(z2)
        p2, arg2 = maxpool2(a2)
        flat = p2.reshape(len(inputs), -1)
        z3 = flat @ p['W3'] + p['b3']
        a3 = relu(z3)
        logits = a3 @ p['W4'] + p['b4']
        cache = (win1, z1, arg1, win2, z2, arg2, p2.shape, flat, z3, a3)
        return logits, cache

    def backward(self, cache, dlogits):
        p = self.params
        win1, z1, arg1, win2, z2, arg2, p2_shape, flat, z3, a3 = cache
        grads = {'W4': a3.T @ dlogits, 'b4': dlogits.sum(axis=0)}
        dz3 = (dlogits @ p['W4'].T) * (z3 > 0)
        grads['W3'] = flat.T @ dz3
        grads['b3'] = dz3.sum(axis=0)
        dp2 = (dz3 @ p['W3'].T).reshape(p2_shape)
        dz2 = maxpool2_backward(dp2, arg2, z2.shape) * (z2 > 0)
        grads['K2'], grads['c2'], dp1 = conv2d_backward(dz2, win2, p['K2'])
        dz1 = maxpool2_backward(dp1, arg1, z1.shape) * (z1 > 0)
        grads['K1'], grads['c1'], _ = conv2d_backward(dz1, win1, p['K1'], need_input_grad=False)
        return grads


class EmptyModel(SurrogateModel):
    """No layers at all: no parameters, no nonlinearities, constant uniform scores."""

    kind = 'empty'

    def param_shapes(self):
        return {}

    def fan_in(self, name):
        return 0

    def count_nonlinearities(self) -> int:
        return 0

    def forward(self, inputs):
        return np.zeros((len(inputs), self.classes)), None

    def backward(self, cache, dlogits):
        return {}


# -- single-image forward passes -------------------------------------------------------

def geo1_forward(model: Geo1Model, image: np.ndarray) -> np.ndarray:
    return model.scores(image)[0]


def geo2_forward(model: Geo2Model, image: np.ndarray) -> np.ndarray:
    return model.scores(image)[0]


def mlp_forward(model: MlpModel, image: np.ndarray) -> np.ndarray:
    return model.scores(image)[0]


def cnn_forward(model: CnnModel, image: np.ndarray) -> np.ndarray:
    return model.scores(image)[0]


def count_params(model: SurrogateModel) -> int:
    return model.count_params()


def count_nonlinearities(model: SurrogateModel) -> int:
    return model.count_nonlinearities()
