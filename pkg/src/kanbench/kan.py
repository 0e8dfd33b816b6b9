"""Networks of learnable univariate edge functions.

Every edge applies ``base_weight * silu(x) + spline(x)`` to its input and a
node output is the plain sum over its incoming edges, so a layer carries an
(out_dim, in_dim, n_basis) coefficient tensor plus an (out_dim, in_dim)
residual weight matrix. The silu residual keeps gradients alive where the
splines are flat or clamped. All gradients are exact analytic derivatives.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .bspline import SplineFunction, SplineSpec, basis_grad_matrix, basis_matrix
from .numcore import Rng, silu, silu_grad


@dataclass
class KanLayer:
    in_dim: int
    out_dim: int
    spec: SplineSpec
    coef: np.ndarray  # (out_dim, in_dim, n_basis)
    base: np.ndarray  # (out_dim, in_dim)

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=np.float64)
        self.base = np.asarray(self.base, dtype=np.float64)
        want = (self.out_dim, self.in_dim, self.spec.n_basis)
        if self.coef.shape != want:
            raise ValueError(f"coef shape {self.coef.shape} != {want}")
        if self.base.shape != (self.out_dim, self.in_dim):
            raise ValueError(f"base shape {self.base.shape} != {(self.out_dim, self.in_dim)}")
        if not (np.all(np.isfinite(self.coef)) and np.all(np.isfinite(self.base))):
            raise ValueError("layer parameters must be finite")

    def edge_spline(self, out_idx: int, in_idx: int) -> SplineFunction:
        """The learnable univariate spline sitting on one edge."""
        return SplineFunction(self.spec, self.coef[out_idx, in_idx].copy())


@dataclass
class KanNetwork:
    layers: list[KanLayer] = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
        if self.layers[-1].out_dim != 1:
            raise ValueError("final layer must have a single output")

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].in_dim] + [l.out_dim for l in self.layers]

    @property
    def n_params(self) -> int:
        return sum(l.coef.size + l.base.size for l in self.layers)

    def pack(self) -> np.ndarray:
        """All trainables as one flat array (per layer: coef then base)."""
        return np.concatenate([a.ravel() for l in self.layers for a in (l.coef, l.base)])

    def unpack(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {flat.shape}")
        pos = 0
        for l in self.layers:
            for a in (l.coef, l.base):
                a[...] = flat[pos : pos + a.size].reshape(a.shape)
                pos += a.size

    def batch_loss_and_grad(self, inputs, targets):
        loss, grads = kan_backward(self, inputs, targets)
        return loss, grads.pack()

    def predict_window(self, window) -> float:
        """One-step prediction from an (L, F) window, flattened row-major."""
        return kan_forward(self, np.asarray(window, dtype=np.float64).reshape(-1))

    def predict_window_batch(self, windows) -> np.ndarray:
        w = np.asarray(windows, dtype=np.float64)
        return kan_forward_batch(self, w.reshape(w.shape[0], -1))


@dataclass
class KanGradients:
    """Loss gradients, shape-congruent with the network they came from."""

    coef: list[np.ndarray]
    base: list[np.ndarray]

    def pack(self) -> np.ndarray:
        return np.concatenate([a.ravel() for c, b in zip(self.coef, self.base) for a in (c, b)])


def kan_init(dims: list[int], spec: SplineSpec, rng: Rng) -> KanNetwork:
    """Fresh network: spline coefficients ~ N(0, 0.1), base ~ N(0, 1/sqrt(in))."""
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"dims must be >= 2 positive entries, got {dims}")
    layers = []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        coef = rng.normal(0.0, 0.1, size=(n_out, n_in, spec.n_basis))
        base = rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_out, n_in))
        layers.append(KanLayer(n_in, n_out, spec, coef, base))
    return KanNetwork(layers)


def _layer_forward(layer: KanLayer, x: np.ndarray):
    phi = basis_matrix(layer.spec, x.reshape(-1)).reshape(
        x.shape[0], layer.in_dim, layer.spec.n_basis
    )
    out = silu(x) @ layer.base.T + np.einsum("bip,oip->bo", phi, layer.coef)
    return out, phi


def kan_forward_batch(net: KanNetwork, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.layers[0].in_dim:
        raise ValueError(
            f"inputs must be (batch, {net.layers[0].in_dim}), got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("inputs must be finite")
    for layer in net.layers:
        x, _ = _layer_forward(layer, x)
    return x[:, 0]


def kan_forward(net: KanNetwork, x) -> float:
    """Scalar network output for one input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.layers[0].in_dim,):
        raise ValueError(f"input must have shape ({net.layers[0].in_dim},), got {x.shape}")
    return float(kan_forward_batch(net, x[None, :])[0])


def kan_backward(net: KanNetwork, inputs, targets):
    """MSE loss over the batch plus exact gradients for every parameter."""
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("batch must be a nonempty 2-D array")
    if x.shape[1] != net.layers[0].in_dim:
        raise ValueError(f"inputs must be (batch, {net.layers[0].in_dim}), got {x.shape}")
    if y.shape != (x.shape[0],):
        raise ValueError(f"targets must have shape ({x.shape[0]},), got {y.shape}")

    acts = [x]
    phis = []
    for layer in net.layers:
        out, phi = _layer_forward(layer, acts[-1])
        acts.append(out)
        phis.append(phi)

    resid = acts[-1][:, 0] - y
    loss = float(np.mean(resid**2))
    delta = (2.0 / x.shape[0]) * resid[:, None]

    n = len(net.layers)
    coef_grads: list[np.ndarray] = [np.empty(0)] * n
    base_grads: list[np.ndarray] = [np.empty(0)] * n
    for li in reversed(range(n)):
        layer = net.layers[li]
        xin = acts[li]
        coef_grads[li] = np.einsum("bo,bip->oip", delta, phis[li])
        base_grads[li] = delta.T @ silu(xin)
        if li > 0:
            dphi = basis_grad_matrix(layer.spec, xin.reshape(-1)).reshape(phis[li].shape)
            w = np.einsum("bo,oip->bip", delta, layer.coef)
            delta = (delta @ layer.base) * silu_grad(xin) + np.sum(w * dphi, axis=2)
    return loss, KanGradients(coef_grads, base_grads)


def to_json_dict(net: KanNetwork) -> dict:
    spec = net.layers[0].spec
    return {
        "kind": "kan",
        "dims": net.dims,
        "spec": {
            "grid_size": spec.grid_size,
            "degree": spec.degree,
            "domain_lo": spec.domain_lo,
            "domain_hi": spec.domain_hi,
        },
        "layers": [
            {"coef": l.coef.ravel().tolist(), "base": l.base.ravel().tolist()}
            for l in net.layers
        ],
    }


def from_json_dict(d: dict) -> KanNetwork:
    if d.get("kind") != "kan":
        raise ValueError(f"not a spline-network checkpoint: kind={d.get('kind')!r}")
    spec = SplineSpec(**d["spec"])
    dims = d["dims"]
    layers = []
    for (n_in, n_out), ld in zip(zip(dims[:-1], dims[1:]), d["layers"]):
        coef = np.array(ld["coef"], dtype=np.float64).reshape(n_out, n_in, spec.n_basis)
        base = np.array(ld["base"], dtype=np.float64).reshape(n_out, n_in)
        layers.append(KanLayer(n_in, n_out, spec, coef, base))
    return KanNetwork(layers)


def save_json(net: KanNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(net), fh)


def load_json(path) -> KanNetwork:
    with open(path, encoding="utf-8") as fh:
        return from_json_dict(json.load(fh))
