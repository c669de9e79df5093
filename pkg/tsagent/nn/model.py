"""Model assembly from architecture descriptors, and weight persistence"""

from pathlib import Path
from typing import Dict, Iterator, List, Tuple, Union

import numpy as np

from ..errors import NonFiniteGradientError
from ..models.architecture import ArchitectureDescriptor, BRANCH_NAMES
from .layers import Dropout, Layer, Linear, MultiBranch, Sequential, dense_block

WEIGHTS_KIND = 'weights'


class Model:
    """
    A built network plus the descriptor it came from.

    A binary multi-branch network has a single output unit ``z``; ``forward``
    returns it as the two-column logits ``[0, z]`` so every loss and metric
    sees ``n_classes`` columns.
    """

    def __init__(self, descriptor: ArchitectureDescriptor, input_dim: int, n_classes: int,
                 body: Sequential, dtype=np.float32):
        self.descriptor = descriptor
        self.input_dim = input_dim
        self.n_classes = n_classes
        self.body = body
        self.dtype = np.dtype(dtype)
        self.single_logit = descriptor.output_dim(n_classes) == 1 and n_classes == 2
        self.reset_rng()

    # ------------------------------------------------------------------ #

    def layers(self) -> Iterator[Layer]:
        return self.body.walk()

    def reset_rng(self, seed: int = None) -> None:
        """Fresh dropout RNG derived from the descriptor seed"""
        seed = self.descriptor.seed if seed is None else seed
        self.rng = np.random.default_rng([int(seed), 1])
        for layer in self.layers():
            if isinstance(layer, Dropout):
                layer.rng = self.rng

    def parameters(self) -> List[Tuple[str, Layer, str]]:
        """(qualified name, layer, key) for every trainable array"""
        out = []
        for layer in self.layers():
            for key in layer.params:
                out.append((f"{layer.name}.{key}", layer, key))
        return out

    @property
    def param_count(self) -> int:
        return int(sum(layer.params[key].size for _, layer, key in self.parameters()))

    def zero_grad(self) -> None:
        for layer in self.layers():
            layer.zero_grad()

    # ------------------------------------------------------------------ #

    def forward(self, x: np.ndarray, mode: str = 'eval') -> np.ndarray:
        if mode not in ('train', 'eval'):
            raise ValueError("mode must be 'train' or 'eval'")
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ValueError(f"expected batch of width {self.input_dim}, got shape {x.shape}")
        out = self.body.forward(x, training=(mode == 'train'))
        if self.single_logit:
            out = np.concatenate([np.zeros_like(out), out], axis=1)
        return out

    def backward(self, grad_logits: np.ndarray) -> None:
        """
        Accumulate parameter gradients for the last forward pass

        Raises:
            NonFiniteGradientError: a gradient holds NaN or inf (names the layer)
        """
        grad = np.asarray(grad_logits, dtype=self.dtype)
        if self.single_logit:
            grad = grad[:, 1:2]
        self.body.backward(grad)
        for name, layer, key in self.parameters():
            if not np.all(np.isfinite(layer.grads[key])):
                raise NonFiniteGradientError(layer.name or name)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        logits = self.forward(x, 'eval').astype(np.float64)
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.predict_proba(x).argmax(axis=1)

    # ------------------------------------------------------------------ #

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {}
        for layer in self.layers():
            for key, value in layer.params.items():
                state[f"{layer.name}.{key}"] = value.copy()
            for key, value in layer.buffers.items():
                state[f"{layer.name}.{key}"] = value.copy()
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        expected = self.state_dict()
        missing = sorted(set(expected) - set(state))
        if missing:
            raise ValueError(f"state is missing {', '.join(missing[:5])}")
        for layer in self.layers():
            for store in (layer.params, layer.buffers):
                for key in store:
                    value = np.asarray(state[f"{layer.name}.{key}"], dtype=self.dtype)
                    if value.shape != store[key].shape:
                        raise ValueError(f"{layer.name}.{key}: shape {value.shape} != {store[key].shape}")
                    store[key] = value.copy()


def _check_slices(slices, input_dim: int) -> None:
    position = 0
    for name, (start, stop) in zip(BRANCH_NAMES, slices):
        if start != position or stop <= start:
            raise ValueError(f"branch '{name}' slice ({start}, {stop}) leaves a gap or overlap at {position}")
        position = stop
    if position != input_dim:
        raise ValueError(f"branch slices cover {position} of {input_dim} inputs")


def instantiate(desc: ArchitectureDescriptor, input_dim: int, n_classes: int,
                dtype=np.float32) -> Model:
    """
    Build the network described by ``desc``

    Raises:
        ValueError: bad input width, branch slices that do not tile the input,
            or a parameter count that disagrees with the descriptor formula
    """
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    if n_classes < 2:
        raise ValueError("n_classes must be >= 2")
    rng = np.random.default_rng(desc.seed)
    out_dim = desc.output_dim(n_classes)

    if desc.family == 'mlp':
        block, last = dense_block(input_dim, desc.hidden, desc.dropout, desc.batch_norm, rng, dtype, 'hidden')
        layers = [block, Linear(last, out_dim, rng, dtype, 'out')]
    else:
        slices = desc.slices(input_dim)
        _check_slices(slices, input_dim)
        branches, dims = [], []
        for name, (start, stop), widths in zip(BRANCH_NAMES, slices, desc.branches):
            block, last = dense_block(stop - start, widths, desc.dropout, desc.batch_norm, rng, dtype, name)
            branches.append(block)
            dims.append(last)
        fused = MultiBranch(slices, branches, dims, desc.fusion_dim, desc.attention, desc.heads, rng, dtype)
        head, last = dense_block(desc.fusion_dim, desc.head, desc.dropout, desc.batch_norm, rng, dtype, 'head')
        layers = [fused, head, Linear(last, out_dim, rng, dtype, 'out')]

    model = Model(desc, input_dim, n_classes, Sequential(layers, 'model'), dtype)
    expected = desc.param_count(input_dim, n_classes)
    if model.param_count != expected:
        raise ValueError(f"built {model.param_count} parameters, formula gives {expected}")
    return model


def save_weights(model: Model, path: Union[str, Path], extra: Dict = None) -> Path:
    """Write named float32 tensors with the descriptor and its digest"""
    from ..dataset.container import write_container

    state = model.state_dict()
    payloads = [(name, value.astype('<f4')) for name, value in state.items()]
    header = {
        'descriptor': model.descriptor.to_dict(),
        'digest': model.descriptor.digest,
        'input_dim': model.input_dim,
        'n_classes': model.n_classes,
        **(extra or {}),
    }
    return write_container(path, WEIGHTS_KIND, payloads, header)


def load_weights(path: Union[str, Path]) -> Model:
    from ..dataset.container import read_container

    header, payloads = read_container(path, WEIGHTS_KIND)
    desc = ArchitectureDescriptor.from_dict(header['descriptor'])
    model = instantiate(desc, int(header['input_dim']), int(header['n_classes']))
    model.load_state_dict(payloads)
    return model
