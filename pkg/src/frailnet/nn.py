"""Small dense ReLU networks with exact reverse-mode gradients.

The log-hazard components are scalar-output multilayer perceptrons.
Keeping them in numpy (float64, batched matmuls) makes the whole
likelihood gradient exact and reproducible bit for bit from a seed,
which the training and serialization contracts rely on.

forward() records a tape; backward() replays it and returns gradients
for every weight and bias plus the gradient with respect to the input
batch, so callers can chain through quadrature-node inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteError, SpecError


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a scalar-output ReLU network.

    hidden may be empty, which degenerates to a single linear map; the
    estimators insist on at least one hidden layer but the math here
    does not need to.
    """

    input_dim: int
    hidden: tuple[int, ...] = (32,)

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1:
            raise SpecError(f"input_dim must be >= 1, got {self.input_dim}")
        if any(h < 1 for h in self.hidden):
            raise SpecError(f"hidden widths must be >= 1, got {self.hidden}")

    @property
    def layer_dims(self):
        return [self.input_dim, *self.hidden, 1]


@dataclass
class Tape:
    """Everything backward() needs from one forward pass."""

    inputs: list[np.ndarray] = field(default_factory=list)  # input to each matmul
    relu_masks: list[np.ndarray] = field(default_factory=list)
    drop_masks: list[np.ndarray] = field(default_factory=list)


@dataclass
class MlpGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


class Mlp:
    """Weights + biases for an MlpSpec, with forward/backward passes."""

    def __init__(self, spec: MlpSpec, weights, biases):
        dims = spec.layer_dims
        if len(weights) != len(dims) - 1 or len(biases) != len(dims) - 1:
            raise SpecError("wrong number of layers for spec")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise SpecError(
                    f"layer {i} shapes {w.shape}/{b.shape} do not match spec dims {dims}"
                )
        self.spec = spec
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]

    @classmethod
    def init(cls, spec: MlpSpec, rng) -> "Mlp":
        """He-uniform weights, U(+-sqrt(6/fan_in)), zero biases."""
        if isinstance(rng, (int, np.integer)):
            rng = np.random.default_rng(int(rng))
        dims = spec.layer_dims
        weights, biases = [], []
        for i in range(len(dims) - 1):
            bound = np.sqrt(6.0 / dims[i])
            weights.append(rng.uniform(-bound, bound, size=(dims[i], dims[i + 1])))
            biases.append(np.zeros(dims[i + 1]))
        return cls(spec, weights, biases)

    def copy(self) -> "Mlp":
        return Mlp(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def forward(self, x, dropout_p: float = 0.0, rng=None):
        """Evaluate the net on a batch. Returns (outputs, tape).

        x is (n, input_dim) or a single (input_dim,) vector; outputs are
        (n,) or a scalar accordingly.  dropout_p > 0 applies inverted
        dropout after each hidden activation and needs an rng.
        """
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        a = x[None, :] if single else x
        if a.ndim != 2 or a.shape[1] != self.spec.input_dim:
            raise SpecError(f"input shape {x.shape} does not match input_dim {self.spec.input_dim}")
        if not 0.0 <= dropout_p < 1.0:
            raise SpecError(f"dropout_p must be in [0, 1), got {dropout_p}")
        if dropout_p > 0.0 and rng is None:
            raise SpecError("dropout needs an rng")
        tape = Tape()
        n_layers = len(self.weights)
        for i in range(n_layers):
            tape.inputs.append(a)
            z = a @ self.weights[i] + self.biases[i]
            if i < n_layers - 1:
                mask = z > 0.0
                a = np.where(mask, z, 0.0)
                tape.relu_masks.append(mask)
                if dropout_p > 0.0:
                    keep = rng.random(a.shape) >= dropout_p
                    dmask = keep / (1.0 - dropout_p)
                    a = a * dmask
                    tape.drop_masks.append(dmask)
                else:
                    tape.drop_masks.append(None)
            else:
                a = z
        out = a[:, 0]
        return (float(out[0]), tape) if single else (out, tape)

    def backward(self, tape: Tape, upstream):
        """Exact gradients for sum_i upstream_i * out_i.

        Returns (MlpGrads, dx) where dx is the gradient with respect to
        the input batch, shape (n, input_dim).
        """
        upstream = np.atleast_1d(np.asarray(upstream, dtype=np.float64))
        n_layers = len(self.weights)
        dW = [None] * n_layers
        db = [None] * n_layers
        delta = upstream[:, None]
        for i in range(n_layers - 1, -1, -1):
            a_prev = tape.inputs[i]
            dW[i] = a_prev.T @ delta
            db[i] = delta.sum(axis=0)
            dA = delta @ self.weights[i].T
            if i > 0:
                dmask = tape.drop_masks[i - 1]
                if dmask is not None:
                    dA = dA * dmask
                delta = dA * tape.relu_masks[i - 1]
            else:
                dx = dA
        return MlpGrads(weights=dW, biases=db), dx

    # flat parameter/gradient views, in a fixed order, for the optimizer

    def param_list(self):
        return [*self.weights, *self.biases]

    @staticmethod
    def grad_list(grads: MlpGrads):
        return [*grads.weights, *grads.biases]

    def to_dict(self) -> dict:
        return {
            "input_dim": self.spec.input_dim,
            "hidden": list(self.spec.hidden),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        spec = MlpSpec(input_dim=int(d["input_dim"]), hidden=tuple(d["hidden"]))
        weights = [np.asarray(w, dtype=np.float64) for w in d["weights"]]
        biases = [np.asarray(b, dtype=np.float64) for b in d["biases"]]
        return cls(spec, weights, biases)

    def to_json(self) -> str:
        # repr-based float serialization round-trips doubles exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "Mlp":
        return cls.from_dict(json.loads(s))


class Adam:
    """Adam over a list of parameter arrays, updated in place.

    Decoupled nothing: weight decay is added to the gradient (the
    classic L2 style), and maximize=True ascends instead of descending.
    decay_flags marks which parameter arrays the decay applies to.
    """

    def __init__(
        self,
        params,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
        decay_flags=None,
    ):
        if lr <= 0:
            raise SpecError(f"learning rate must be > 0, got {lr}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise SpecError("betas must lie in [0, 1)")
        if weight_decay < 0:
            raise SpecError("weight_decay must be >= 0")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        if decay_flags is None:
            decay_flags = [True] * len(params)
        if len(decay_flags) != len(params):
            raise SpecError("decay_flags length mismatch")
        self.decay_flags = list(decay_flags)

    def step(self, params, grads, maximize: bool = False):
        if len(params) != len(self.m) or len(grads) != len(self.m):
            raise SpecError("parameter/gradient list length changed between steps")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise NonFiniteError("non-finite gradient passed to optimizer")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v, decays in zip(params, grads, self.m, self.v, self.decay_flags):
            g_eff = -g if maximize else g
            if self.weight_decay != 0.0 and decays:
                g_eff = g_eff + self.weight_decay * p
            m *= self.beta1
            m += (1.0 - self.beta1) * g_eff
            v *= self.beta2
            v += (1.0 - self.beta2) * g_eff * g_eff
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
