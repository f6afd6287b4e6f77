"""
Fully connected ReLU value network in plain numpy.

Batches are row-major: inputs are ``(n, state_size)`` and outputs ``(n, 2)``,
one column per action. Gradients are computed by an explicit backward pass
that mirrors the forward pass layer by layer.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from headwayrl.core.exceptions import ArtifactError, TrainingError
from headwayrl.services.reporting import write_bytes

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"HWRL1\n"
CHECKPOINT_FORMAT = "headwayrl-mlp"
ACTIVATION = "relu"
N_ACTIONS = 2


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_grad(z: np.ndarray) -> np.ndarray:
    return (z > 0).astype(np.float64)


class ValueNetwork:
    """
    MLP from a state to one value per action.

    Args:
        layer_sizes: Widths from input to output, e.g. ``[6, 300, ..., 2]``
        rng: Generator for He-normal weight initialisation (biases start at zero)
    """

    def __init__(self, layer_sizes: Sequence[int], rng: Optional[np.random.Generator] = None):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"invalid layer sizes {sizes}")
        self.layer_sizes = sizes
        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        rng = rng if rng is not None else np.random.default_rng(0)
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            self.weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @classmethod
    def build(cls, state_size: int, hidden_layers: int, hidden_units: int, rng: np.random.Generator) -> "ValueNetwork":
        return cls([state_size] + [hidden_units] * hidden_layers + [N_ACTIONS], rng)

    @property
    def state_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray]]]:
        """
        Forward pass keeping what the backward pass needs.

        Returns:
            Outputs ``(n, 2)`` and the per-layer ``(input, pre-activation)`` memory
        """
        a = np.atleast_2d(np.asarray(x, dtype=np.float64))
        memory = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            memory.append((a, z))
            a = z if i == last else relu(z)
        return a, memory

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def q_values(self, state: np.ndarray) -> np.ndarray:
        """Values of both actions for a single state."""
        return self.predict(np.asarray(state, dtype=np.float64)[None, :])[0]

    def backward(
        self, d_out: np.ndarray, memory: List[Tuple[np.ndarray, np.ndarray]]
    ) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        """Gradients of a scalar loss w.r.t. weights and biases, given dLoss/dOutput."""
        dw: List[np.ndarray] = [None] * len(self.weights)
        db: List[np.ndarray] = [None] * len(self.biases)
        grad = d_out
        for i in range(len(self.weights) - 1, -1, -1):
            a_in, z = memory[i]
            if i != len(self.weights) - 1:
                grad = grad * relu_grad(z)
            dw[i] = a_in.T @ grad
            db[i] = grad.sum(axis=0)
            if i:
                grad = grad @ self.weights[i].T
        return dw, db

    def td_loss(
        self, states: np.ndarray, actions: np.ndarray, targets: np.ndarray
    ) -> Tuple[float, List[np.ndarray], List[np.ndarray]]:
        """
        Mean squared error between q(s, a) and the targets, with its gradients.

        Only the output of the taken action receives gradient.
        """
        out, memory = self.forward(states)
        n = out.shape[0]
        idx = np.arange(n)
        err = out[idx, actions] - targets
        loss = float(np.mean(err ** 2))
        d_out = np.zeros_like(out)
        d_out[idx, actions] = 2.0 * err / n
        dw, db = self.backward(d_out, memory)
        return loss, dw, db

    def sgd_step(self, dw: List[np.ndarray], db: List[np.ndarray], learning_rate: float) -> None:
        for w, b, gw, gb in zip(self.weights, self.biases, dw, db):
            w -= learning_rate * gw
            b -= learning_rate * gb

    def get_params(self) -> np.ndarray:
        """Flat parameter vector: each layer's weights (row-major) then its biases."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def set_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.param_count:
            raise TrainingError(f"expected {self.param_count} parameters, got {flat.size}")
        pos = 0
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = flat[pos:pos + w.size].reshape(w.shape).copy()
            pos += w.size
            self.biases[i] = flat[pos:pos + b.size].copy()
            pos += b.size

    def copy(self) -> "ValueNetwork":
        clone = object.__new__(ValueNetwork)
        clone.layer_sizes = list(self.layer_sizes)
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def sync_from(self, other: "ValueNetwork") -> None:
        if other.layer_sizes != self.layer_sizes:
            raise TrainingError("cannot sync networks with different layer sizes")
        self.weights = [w.copy() for w in other.weights]
        self.biases = [b.copy() for b in other.biases]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.get_params())))


def save_checkpoint(network: ValueNetwork, path: Union[str, Path], meta: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write a checkpoint.

    Layout: the magic line ``HWRL1``, one line of JSON header (layer sizes,
    activation, dtype, parameter count and ``meta``, keys sorted), then the
    flat parameter vector as little-endian float64.
    """
    header = {
        "format": CHECKPOINT_FORMAT,
        "layer_sizes": network.layer_sizes,
        "activation": ACTIVATION,
        "dtype": "<f8",
        "param_count": network.param_count,
        "meta": meta or {},
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = network.get_params().astype("<f8").tobytes()
    return write_bytes(CHECKPOINT_MAGIC + head + b"\n" + body, path)


def load_checkpoint(path: Union[str, Path]) -> Tuple[ValueNetwork, Dict[str, Any]]:
    """
    Read a checkpoint written by :func:`save_checkpoint`.

    Returns:
        The network and the header's ``meta`` mapping
    """
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"{path}: checkpoint not found")
    data = path.read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ArtifactError(f"{path}: not a headwayrl checkpoint")
    rest = data[len(CHECKPOINT_MAGIC):]
    newline = rest.find(b"\n")
    if newline < 0:
        raise ArtifactError(f"{path}: truncated checkpoint header")
    try:
        header = json.loads(rest[:newline].decode("utf-8"))
    except ValueError as e:
        raise ArtifactError(f"{path}: corrupt checkpoint header") from e
    if header.get("format") != CHECKPOINT_FORMAT or header.get("activation") != ACTIVATION:
        raise ArtifactError(f"{path}: unsupported checkpoint format")

    params = np.frombuffer(rest[newline + 1:], dtype="<f8")
    network = ValueNetwork(header["layer_sizes"])
    if params.size != network.param_count or params.size != header.get("param_count"):
        raise ArtifactError(f"{path}: expected {network.param_count} parameters, found {params.size}")
    network.set_params(params.astype(np.float64))
    return network, header.get("meta", {})
