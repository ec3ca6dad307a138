"""Shared-bottom network: one dense encoder, per-task heads, manual backprop.

The encoder consumes a flattened window of W augmented state rows; each task
head consumes (hidden, quality condition) and emits one action scalar. All
arithmetic is float64 and every reduction uses a fixed order, so repeated
evaluation is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .params import Layout, ParamVector, zeros_like

# activation, derivative expressed in terms of the activation output
_ACTIVATIONS = {
    "tanh": (np.tanh, lambda a: 1.0 - a * a),
    "identity": (lambda z: z, lambda a: np.ones_like(a)),
    "sigmoid": (lambda z: 1.0 / (1.0 + np.exp(-z)), lambda a: a * (1.0 - a)),
}


@dataclass(frozen=True)
class ModelConfig:
    num_tasks: int
    window: int = 8
    feature_dim: int = 7
    hidden: int = 64
    encoder_layers: int = 2
    head_layers: int = 1
    head_hidden: int = 32
    activation: str = "tanh"
    init_seed: int = 0

    def __post_init__(self):
        if self.num_tasks < 1:
            raise ValueError("config: need at least one task")
        if min(self.window, self.feature_dim, self.hidden) < 1:
            raise ValueError("config: window/feature/hidden dims must be positive")
        if self.encoder_layers < 1 or self.head_layers < 1:
            raise ValueError("config: need at least one encoder and head layer")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"config: unknown activation {self.activation!r}")

    @property
    def input_dim(self) -> int:
        return self.window * self.feature_dim

    def layer_dims(self) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
        """(encoder layer dims, head layer dims) as (fan_in, fan_out) pairs."""
        enc = []
        d = self.input_dim
        for _ in range(self.encoder_layers):
            enc.append((d, self.hidden))
            d = self.hidden
        head = []
        d = self.hidden + 1  # hidden representation plus the quality scalar
        for j in range(self.head_layers):
            out = 1 if j == self.head_layers - 1 else self.head_hidden
            head.append((d, out))
            d = out
        return enc, head


def build_layout(config: ModelConfig) -> Layout:
    enc_dims, head_dims = config.layer_dims()
    entries = []
    for i, (fi, fo) in enumerate(enc_dims):
        entries.append((f"enc{i}.w", (fi, fo)))
        entries.append((f"enc{i}.b", (fo,)))
    for k in range(config.num_tasks):
        for j, (fi, fo) in enumerate(head_dims):
            entries.append((f"head{k}.{j}.w", (fi, fo)))
            entries.append((f"head{k}.{j}.b", (fo,)))
    return tuple(entries)


def init_params(config: ModelConfig) -> ParamVector:
    """Seeded init: each tensor uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].

    Tensors are drawn sequentially in layout order from one generator, so the
    full parameter vector is a pure function of the config.
    """
    layout = build_layout(config)
    rng = np.random.default_rng(config.init_seed)
    enc_dims, head_dims = config.layer_dims()
    all_dims = enc_dims + head_dims * config.num_tasks
    chunks = []
    for fan_in, fan_out in all_dims:
        bound = 1.0 / np.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
        chunks.append(rng.uniform(-bound, bound, size=fan_out))
    return ParamVector(np.concatenate(chunks), layout)


@dataclass(frozen=True)
class SharedBottomModel:
    config: ModelConfig
    params: ParamVector

    @classmethod
    def create(cls, config: ModelConfig) -> "SharedBottomModel":
        return cls(config, init_params(config))

    def with_params(self, params: ParamVector) -> "SharedBottomModel":
        if params.layout != self.params.layout:
            raise ValueError("layout: parameters do not match this model")
        return replace(self, params=params)

    # -- forward ---------------------------------------------------------

    def _check_task(self, task: int) -> None:
        if not (0 <= int(task) < self.config.num_tasks):
            raise ValueError(f"unknown task: {task}")

    def _forward_batch(self, task: int, x: np.ndarray, quality: np.ndarray):
        """Batched forward pass; returns predictions and layer activations."""
        cfg = self.config
        act, _ = _ACTIVATIONS[cfg.activation]
        p = self.params
        enc_acts = [x]
        a = x
        for i in range(cfg.encoder_layers):
            a = act(a @ p.tensor(f"enc{i}.w") + p.tensor(f"enc{i}.b"))
            enc_acts.append(a)
        head_acts = [np.hstack([a, quality[:, None]])]
        u = head_acts[0]
        for j in range(cfg.head_layers):
            z = u @ p.tensor(f"head{task}.{j}.w") + p.tensor(f"head{task}.{j}.b")
            u = z if j == cfg.head_layers - 1 else act(z)
            head_acts.append(u)
        return u[:, 0], enc_acts, head_acts

    def forward(self, task: int, window: np.ndarray, quality: float) -> float:
        """Predicted action scalar for one (window, quality) input."""
        self._check_task(task)
        window = np.asarray(window, dtype=np.float64)
        cfg = self.config
        if window.shape != (cfg.window, cfg.feature_dim):
            raise ValueError(
                f"shape: window is {window.shape}, expected {(cfg.window, cfg.feature_dim)}"
            )
        x = window.reshape(1, -1)
        preds, _, _ = self._forward_batch(task, x, np.array([float(quality)]))
        return float(preds[0])

    def predict(self, task: int, windows: np.ndarray, qualities: np.ndarray) -> np.ndarray:
        """Batched forward pass over (n, window, feature_dim) inputs."""
        self._check_task(task)
        windows = np.asarray(windows, dtype=np.float64)
        n = windows.shape[0]
        preds, _, _ = self._forward_batch(
            task, windows.reshape(n, -1), np.asarray(qualities, dtype=np.float64)
        )
        return preds

    # -- loss / gradients --------------------------------------------------

    def loss_and_grad(
        self,
        task: int,
        windows: np.ndarray,
        qualities: np.ndarray,
        targets: np.ndarray,
    ) -> tuple[float, ParamVector]:
        """Mean squared error on logged actions, with its exact gradient.

        The returned gradient has the model layout; slots of every other
        task's head are exactly zero.
        """
        self._check_task(task)
        cfg = self.config
        windows = np.asarray(windows, dtype=np.float64)
        qualities = np.asarray(qualities, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        if windows.ndim != 3 or windows.shape[0] == 0:
            raise ValueError("empty batch")
        if windows.shape[1:] != (cfg.window, cfg.feature_dim):
            raise ValueError(
                f"shape: windows are {windows.shape[1:]}, "
                f"expected {(cfg.window, cfg.feature_dim)}"
            )
        n = windows.shape[0]
        x = windows.reshape(n, -1)
        preds, enc_acts, head_acts = self._forward_batch(task, x, qualities)
        resid = preds - targets
        loss = float(np.mean(resid * resid))

        _, dact = _ACTIVATIONS[cfg.activation]
        p = self.params
        grad = zeros_like(p.layout)
        gv = grad.values

        # head backward (last layer is linear)
        delta = (2.0 / n) * resid[:, None]
        for j in reversed(range(cfg.head_layers)):
            u_in = head_acts[j]
            w = p.tensor(f"head{task}.{j}.w")
            gv[grad.slot(f"head{task}.{j}.w")] = (u_in.T @ delta).ravel()
            gv[grad.slot(f"head{task}.{j}.b")] = delta.sum(axis=0)
            delta = delta @ w.T
            if j > 0:
                delta = delta * dact(head_acts[j])

        # drop the quality column, backprop through the encoder
        delta = delta[:, : cfg.hidden] * dact(enc_acts[-1])
        for i in reversed(range(cfg.encoder_layers)):
            a_in = enc_acts[i]
            gv[grad.slot(f"enc{i}.w")] = (a_in.T @ delta).ravel()
            gv[grad.slot(f"enc{i}.b")] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ p.tensor(f"enc{i}.w").T) * dact(enc_acts[i])
        return loss, grad

    def loss(self, task, windows, qualities, targets) -> float:
        value, _ = self.loss_and_grad(task, windows, qualities, targets)
        return value


def fd_gradient(
    model: SharedBottomModel,
    task: int,
    windows: np.ndarray,
    qualities: np.ndarray,
    targets: np.ndarray,
    step: float = 1e-5,
) -> ParamVector:
    """Central finite-difference estimate of the loss gradient (test oracle)."""
    if step <= 0:
        raise ValueError("step must be positive")
    base = model.params
    out = np.zeros(base.size)
    for i in range(base.size):
        for sign in (1.0, -1.0):
            vals = base.values.copy()
            vals[i] += sign * step
            shifted = model.with_params(base.with_values(vals))
            loss = shifted.loss(task, windows, qualities, targets)
            out[i] += sign * loss
        out[i] /= 2.0 * step
    return ParamVector(out, base.layout)
