"""Dense network core: MLP forward/backward, Adam, gradient checking, checkpoints.

Everything is float64 and pure: functions take parameter containers and return
new ones, so callers own all state. Batches are 2-D numpy arrays with one
sample per row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

ACTIVATIONS = ("relu", "tanh", "sigmoid", "identity")

# Sigmoid outputs and log arguments are kept at least this far from {0, 1} so
# the adversarial losses stay finite even when the discriminator saturates.
LOG_EPS = 1e-12


class ShapeMismatchError(ValueError):
    """Input/gradient shape does not match the layer that consumes it."""

    def __init__(self, layer: int, expected, actual):
        self.layer = layer
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        super().__init__(
            f"layer {layer}: expected shape {self.expected}, got {self.actual}"
        )


class NonFiniteError(ValueError):
    """A NaN or infinity showed up where only finite values are allowed."""

    def __init__(self, what: str, layer: int | None = None):
        self.layer = layer
        where = f" in layer {layer}" if layer is not None else ""
        super().__init__(f"non-finite values in {what}{where}")


def _as_f64(a) -> np.ndarray:
    return np.asarray(a, dtype=np.float64)


def as_batch(x, dim: int | None = None) -> np.ndarray:
    """Validate a sample batch: 2-D, float64, finite, optionally fixed width."""
    x = _as_f64(x)
    if x.ndim != 2:
        raise ValueError(f"batch must be 2-D [n, d], got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("batch")
    if dim is not None and x.shape[1] != dim:
        raise ShapeMismatchError(0, (x.shape[0], dim), x.shape)
    return x


@dataclass
class Layer:
    """One dense layer: ``act(x @ weights + biases)``."""

    weights: np.ndarray  # [fan_in, fan_out]
    biases: np.ndarray   # [fan_out]
    activation: str

    def __post_init__(self):
        self.weights = _as_f64(self.weights)
        self.biases = _as_f64(self.biases)
        if self.weights.ndim != 2 or self.biases.ndim != 1:
            raise ValueError("weights must be 2-D and biases 1-D")
        if self.biases.shape[0] != self.weights.shape[1]:
            raise ValueError(
                f"bias length {self.biases.shape[0]} != fan_out {self.weights.shape[1]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise NonFiniteError("layer parameters")

    @property
    def fan_in(self) -> int:
        return self.weights.shape[0]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[1]


@dataclass
class MlpParams:
    """A stack of dense layers with chained dimensions."""

    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for i in range(len(self.layers) - 1):
            if self.layers[i].fan_out != self.layers[i + 1].fan_in:
                raise ShapeMismatchError(
                    i + 1,
                    (self.layers[i].fan_out, self.layers[i + 1].fan_out),
                    self.layers[i + 1].weights.shape,
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].fan_out

    def copy(self) -> "MlpParams":
        return MlpParams(
            [Layer(l.weights.copy(), l.biases.copy(), l.activation) for l in self.layers]
        )


@dataclass
class LayerGrads:
    """Per-layer arrays shaped like (weights, biases); also used for Adam moments."""

    weights: np.ndarray
    biases: np.ndarray


@dataclass
class ForwardCache:
    """Intermediate values from :func:`mlp_forward`, consumed by :func:`mlp_backward`."""

    inputs: list[np.ndarray]  # input to each layer
    pres: list[np.ndarray]    # pre-activation of each layer
    posts: list[np.ndarray]   # post-activation of each layer


def init_mlp(sizes: Sequence[int], activations: Sequence[str], rng: np.random.Generator) -> MlpParams:
    """Build an MLP with the given layer widths.

    Weights are uniform in +/- sqrt(6 / (fan_in + fan_out)); biases start at zero.
    ``sizes`` has one more entry than ``activations``.
    """
    if len(sizes) < 2 or len(activations) != len(sizes) - 1:
        raise ValueError("need len(sizes) >= 2 and one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        layers.append(Layer(w, np.zeros(fan_out), act))
    return MlpParams(layers)


def _sigmoid(pre: np.ndarray) -> np.ndarray:
    out = np.empty_like(pre)
    pos = pre >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-pre[pos]))
    ex = np.exp(pre[~pos])
    out[~pos] = ex / (1.0 + ex)
    # keep strictly inside (0, 1); saturation would make log-losses infinite
    return np.clip(out, LOG_EPS, 1.0 - LOG_EPS)


def _activate(name: str, pre: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(pre, 0.0)
    if name == "tanh":
        return np.tanh(pre)
    if name == "sigmoid":
        return _sigmoid(pre)
    return pre  # identity


def _activation_grad(name: str, pre: np.ndarray, post: np.ndarray) -> np.ndarray:
    if name == "relu":
        # derivative at exactly 0 is defined as 0
        return (pre > 0).astype(np.float64)
    if name == "tanh":
        return 1.0 - post * post
    if name == "sigmoid":
        return post * (1.0 - post)
    return np.ones_like(pre)


def mlp_forward(params: MlpParams, x) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on a batch; returns (output [n, d_out], cache for backward)."""
    h = as_batch(x)
    inputs, pres, posts = [], [], []
    for i, layer in enumerate(params.layers):
        if h.shape[1] != layer.fan_in:
            raise ShapeMismatchError(i, (h.shape[0], layer.fan_in), h.shape)
        pre = h @ layer.weights + layer.biases
        post = _activate(layer.activation, pre)
        inputs.append(h)
        pres.append(pre)
        posts.append(post)
        h = post
    if not np.all(np.isfinite(h)):
        raise NonFiniteError("forward output", layer=len(params.layers) - 1)
    return h, ForwardCache(inputs, pres, posts)


def mlp_backward(
    params: MlpParams, cache: ForwardCache, output_grad: np.ndarray
) -> tuple[list[LayerGrads], np.ndarray]:
    """Reverse-mode pass: exact derivatives of the forward map.

    ``output_grad`` is d(loss)/d(output); returns per-layer parameter gradients
    and the gradient with respect to the batch input.
    """
    output_grad = _as_f64(output_grad)
    last = len(params.layers) - 1
    if output_grad.shape != cache.posts[last].shape:
        raise ShapeMismatchError(last, cache.posts[last].shape, output_grad.shape)
    grads: list[LayerGrads | None] = [None] * len(params.layers)
    da = output_grad
    for i in range(last, -1, -1):
        layer = params.layers[i]
        dpre = da * _activation_grad(layer.activation, cache.pres[i], cache.posts[i])
        grads[i] = LayerGrads(cache.inputs[i].T @ dpre, dpre.sum(axis=0))
        da = dpre @ layer.weights.T
    return grads, da  # type: ignore[return-value]


def zero_grads(params: MlpParams) -> list[LayerGrads]:
    return [
        LayerGrads(np.zeros_like(l.weights), np.zeros_like(l.biases))
        for l in params.layers
    ]


def add_grads(total: list[LayerGrads], extra: list[LayerGrads]) -> list[LayerGrads]:
    """Accumulate ``extra`` into ``total`` in place and return it."""
    for t, e in zip(total, extra):
        t.weights += e.weights
        t.biases += e.biases
    return total


@dataclass
class AdamState:
    """Bias-corrected Adam moments for one network."""

    lr: float
    beta1: float
    beta2: float
    epsilon: float
    step_count: int = 0
    first_moment: list[LayerGrads] = field(default_factory=list)
    second_moment: list[LayerGrads] = field(default_factory=list)


def init_adam(
    params: MlpParams,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
) -> AdamState:
    return AdamState(
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
        step_count=0,
        first_moment=zero_grads(params),
        second_moment=zero_grads(params),
    )


def adam_step(
    params: MlpParams,
    grads: list[LayerGrads],
    state: AdamState,
    direction: str = "descend",
) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update with the requested sign.

    ``direction="ascend"`` moves parameters up the gradient (discriminator),
    ``"descend"`` moves them down (generator). Returns fresh params and state.
    """
    if direction not in ("ascend", "descend"):
        raise ValueError(f"direction must be 'ascend' or 'descend', got {direction!r}")
    if len(grads) != len(params.layers):
        raise ValueError("gradient list length does not match layer count")
    sign = 1.0 if direction == "ascend" else -1.0
    t = state.step_count + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_layers, new_m, new_v = [], [], []
    for i, (layer, g, m, v) in enumerate(
        zip(params.layers, grads, state.first_moment, state.second_moment)
    ):
        if g.weights.shape != layer.weights.shape or g.biases.shape != layer.biases.shape:
            raise ShapeMismatchError(i, layer.weights.shape, g.weights.shape)
        if not (np.all(np.isfinite(g.weights)) and np.all(np.isfinite(g.biases))):
            raise NonFiniteError("gradients", layer=i)
        updated = []
        moments_m, moments_v = [], []
        for value, grad, m_old, v_old in (
            (layer.weights, g.weights, m.weights, v.weights),
            (layer.biases, g.biases, m.biases, v.biases),
        ):
            m_new = state.beta1 * m_old + (1.0 - state.beta1) * grad
            v_new = state.beta2 * v_old + (1.0 - state.beta2) * grad * grad
            step = state.lr * (m_new / bc1) / (np.sqrt(v_new / bc2) + state.epsilon)
            updated.append(value + sign * step)
            moments_m.append(m_new)
            moments_v.append(v_new)
        new_layers.append(Layer(updated[0], updated[1], layer.activation))
        new_m.append(LayerGrads(*moments_m))
        new_v.append(LayerGrads(*moments_v))
    new_state = AdamState(
        lr=state.lr,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
        step_count=t,
        first_moment=new_m,
        second_moment=new_v,
    )
    return MlpParams(new_layers), new_state


LossFn = Callable[[MlpParams], tuple[float, list[LayerGrads]]]


def grad_check(params: MlpParams, loss: LossFn, h: float = 1e-5) -> float:
    """Compare analytic gradients against central finite differences.

    ``loss`` maps params to ``(scalar value, per-layer analytic grads)``; only
    the value is used for the numeric side. Returns the worst relative error
    ``|analytic - numeric| / max(1e-12, |analytic| + |numeric|)`` over all
    parameters. Params are perturbed in place and restored before returning.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    _, analytic = loss(params)
    worst = 0.0
    for li, layer in enumerate(params.layers):
        for arr, g in (
            (layer.weights, analytic[li].weights),
            (layer.biases, analytic[li].biases),
        ):
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]
                arr[idx] = orig + h
                plus, _ = loss(params)
                arr[idx] = orig - h
                minus, _ = loss(params)
                arr[idx] = orig
                numeric = (plus - minus) / (2.0 * h)
                denom = max(1e-12, abs(g[idx]) + abs(numeric))
                worst = max(worst, float(abs(g[idx] - numeric) / denom))
    return worst


# --- checkpoint I/O ---------------------------------------------------------
#
# A checkpoint is a small JSON manifest (layer sizes and activations) next to
# a binary blob of all weights then biases, layer by layer, row-major,
# little-endian float64.

CHECKPOINT_FORMAT = "tvgan-mlp-v1"


def save_checkpoint(params: MlpParams, manifest_path) -> Path:
    manifest_path = Path(manifest_path)
    blob_path = manifest_path.with_suffix(".bin")
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "dtype": "<f8",
        "weights_file": blob_path.name,
        "layers": [
            {"fan_in": l.fan_in, "fan_out": l.fan_out, "activation": l.activation}
            for l in params.layers
        ],
    }
    chunks = []
    for layer in params.layers:
        chunks.append(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(layer.biases, dtype="<f8").tobytes())
    blob_path.write_bytes(b"".join(chunks))
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path


def load_checkpoint(manifest_path) -> MlpParams:
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unrecognized checkpoint format in {manifest_path}")
    blob = (manifest_path.parent / manifest["weights_file"]).read_bytes()
    layers = []
    offset = 0
    for spec in manifest["layers"]:
        fan_in, fan_out = int(spec["fan_in"]), int(spec["fan_out"])
        n_w, n_b = fan_in * fan_out, fan_out
        w = np.frombuffer(blob, dtype="<f8", count=n_w, offset=offset)
        offset += n_w * 8
        b = np.frombuffer(blob, dtype="<f8", count=n_b, offset=offset)
        offset += n_b * 8
        layers.append(Layer(w.reshape(fan_in, fan_out).copy(), b.copy(), spec["activation"]))
    if offset != len(blob):
        raise ValueError(
            f"checkpoint blob has {len(blob)} bytes, manifest accounts for {offset}"
        )
    return MlpParams(layers)
