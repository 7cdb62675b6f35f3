"""Minimal deterministic neural-network core.

Dense feedforward nets and a gated recurrent cell with hand-written
backward passes, Huber / softmax cross-entropy losses, an adaptive-moment
optimizer, and a central finite-difference gradient checker. Everything is
float64 and all randomness comes from an injected numpy Generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "linear")


class ShapeError(ValueError):
    pass


class ParameterError(ValueError):
    pass


class ContractViolation(RuntimeError):
    pass


class TrainingError(RuntimeError):
    pass


def _as_matrix(x):
    """Promote a vector to a 1-row matrix; return (matrix, was_vector)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        return x, False
    raise ShapeError(f"expected 1-D or 2-D input, got shape {x.shape}")


# ---------------------------------------------------------------------------
# Dense feedforward network
# ---------------------------------------------------------------------------


@dataclass
class DenseLayer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ShapeError("layer weight/bias shape mismatch")


@dataclass
class ForwardCache:
    net: "DenseNet"
    inputs: list  # input matrix of each layer
    pre: list  # pre-activation matrix of each layer
    squeeze: bool


@dataclass
class DenseNet:
    layers: list

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.W.shape[0] != b.W.shape[1]:
                raise ShapeError(
                    f"layer widths do not chain: {a.W.shape} -> {b.W.shape}"
                )
        for layer in self.layers:
            if not (np.isfinite(layer.W).all() and np.isfinite(layer.b).all()):
                raise ParameterError("non-finite parameter at construction")

    @property
    def in_width(self):
        return self.layers[0].W.shape[1]

    @property
    def out_width(self):
        return self.layers[-1].W.shape[0]

    @property
    def n_params(self):
        return sum(l.W.size + l.b.size for l in self.layers)

    def params(self):
        """Named parameter arrays in declared order (live references)."""
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"layers.{i}.W"] = layer.W
            out[f"layers.{i}.b"] = layer.b
        return out

    def forward(self, x):
        """Run the net on a vector or a (batch, in) matrix.

        Returns (logits, cache); the cache feeds backward().
        """
        X, squeeze = _as_matrix(x)
        if X.shape[1] != self.in_width:
            raise ShapeError(
                f"input width {X.shape[1]} != net input width {self.in_width}"
            )
        if not np.isfinite(X).all():
            raise ShapeError("non-finite entries in input")
        inputs, pre = [], []
        for layer in self.layers:
            inputs.append(X)
            Z = X @ layer.W.T + layer.b
            pre.append(Z)
            X = np.maximum(Z, 0.0) if layer.activation == "relu" else Z
        cache = ForwardCache(net=self, inputs=inputs, pre=pre, squeeze=squeeze)
        return (X[0] if squeeze else X), cache

    def backward(self, cache, loss_grad):
        """Backprop a loss gradient w.r.t. the logits.

        Returns (param_grads, input_grad). Gradients are summed over the
        batch; scale loss_grad rows beforehand for means or sample weights.
        The input gradient is needed by adversarial masking.
        """
        if cache.net is not self:
            raise ContractViolation("cache was produced by a different net")
        dY, _ = _as_matrix(loss_grad)
        if dY.shape != cache.pre[-1].shape:
            raise ShapeError("loss gradient shape does not match forward output")
        grads = {}
        for i in reversed(range(len(self.layers))):
            layer = self.layers[i]
            dZ = dY * (cache.pre[i] > 0) if layer.activation == "relu" else dY
            grads[f"layers.{i}.W"] = dZ.T @ cache.inputs[i]
            grads[f"layers.{i}.b"] = dZ.sum(axis=0)
            dY = dZ @ layer.W
        dX = dY[0] if cache.squeeze else dY
        return grads, dX


def dense_net(widths, rng, hidden_activation="relu"):
    """Build a DenseNet from a width chain, He-initialized, linear output.

    A two-entry chain gives a single affine (zero-hidden-layer) net.
    """
    if len(widths) < 2:
        raise ParameterError("need at least input and output widths")
    layers = []
    for i, (n_in, n_out) in enumerate(zip(widths, widths[1:])):
        last = i == len(widths) - 2
        W = rng.standard_normal((n_out, n_in)) * np.sqrt(2.0 / n_in)
        layers.append(
            DenseLayer(W=W, b=np.zeros(n_out), activation="linear" if last else hidden_activation)
        )
    return DenseNet(layers)


# ---------------------------------------------------------------------------
# Gated recurrent cell (forget/input/output gating)
# ---------------------------------------------------------------------------


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class RecurrentCache:
    cell: "RecurrentCell"
    steps: np.ndarray
    gates: list  # per step: (i, f, o, g, c, h_prev, c_prev)


@dataclass
class RecurrentCell:
    """Standard gated cell; gate order in the stacked matrices is i, f, o, g."""

    Wx: np.ndarray  # (4H, D)
    Wh: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    @property
    def in_width(self):
        return self.Wx.shape[1]

    @property
    def hidden_width(self):
        return self.Wh.shape[1]

    def params(self):
        return {"Wx": self.Wx, "Wh": self.Wh, "b": self.b}

    def run(self, steps):
        """Encode a (T, D) sequence; returns (final hidden state, cache).

        T = 0 is allowed and yields the zero hidden state.
        """
        steps = np.asarray(steps, dtype=np.float64)
        if steps.ndim == 1:
            steps = steps[:, None]
        if steps.size and steps.shape[1] != self.in_width:
            raise ShapeError(
                f"step width {steps.shape[1]} != cell input width {self.in_width}"
            )
        H = self.hidden_width
        h = np.zeros(H)
        c = np.zeros(H)
        gates = []
        for t in range(steps.shape[0]):
            z = self.Wx @ steps[t] + self.Wh @ h + self.b
            i = _sigmoid(z[0:H])
            f = _sigmoid(z[H : 2 * H])
            o = _sigmoid(z[2 * H : 3 * H])
            g = np.tanh(z[3 * H :])
            c_prev, h_prev = c, h
            c = f * c_prev + i * g
            h = o * np.tanh(c)
            gates.append((i, f, o, g, c, h_prev, c_prev))
        return h, RecurrentCache(cell=self, steps=steps, gates=gates)

    def backward(self, cache, dh_final):
        """BPTT from a gradient on the final hidden state.

        Returns parameter gradients keyed like params().
        """
        if cache.cell is not self:
            raise ContractViolation("cache was produced by a different cell")
        H = self.hidden_width
        dWx = np.zeros_like(self.Wx)
        dWh = np.zeros_like(self.Wh)
        db = np.zeros_like(self.b)
        dh = np.asarray(dh_final, dtype=np.float64).copy()
        dc = np.zeros(H)
        for t in reversed(range(len(cache.gates))):
            i, f, o, g, c, h_prev, c_prev = cache.gates[t]
            tc = np.tanh(c)
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dz = np.concatenate(
                [
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    do * o * (1.0 - o),
                    dg * (1.0 - g * g),
                ]
            )
            dWx += np.outer(dz, cache.steps[t])
            dWh += np.outer(dz, h_prev)
            db += dz
            dh = self.Wh.T @ dz
            dc = dc * f
        return {"Wx": dWx, "Wh": dWh, "b": db}


def recurrent_cell(in_width, hidden_width, rng):
    scale = 1.0 / np.sqrt(max(in_width + hidden_width, 1))
    cell = RecurrentCell(
        Wx=rng.standard_normal((4 * hidden_width, in_width)) * scale,
        Wh=rng.standard_normal((4 * hidden_width, hidden_width)) * scale,
        b=np.zeros(4 * hidden_width),
    )
    # mild positive forget bias keeps early gradients alive
    cell.b[hidden_width : 2 * hidden_width] = 1.0
    return cell


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def huber_loss(pred, target, delta):
    """Elementwise Huber loss and its derivative w.r.t. pred.

    Quadratic inside |e| <= delta, linear outside; derivative is continuous
    at the seam and bounded by delta.
    """
    if delta <= 0:
        raise ParameterError("delta must be > 0")
    e = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    ae = np.abs(e)
    quad = ae <= delta
    loss = np.where(quad, 0.5 * e * e, delta * (ae - 0.5 * delta))
    dpred = np.where(quad, e, delta * np.sign(e))
    if loss.ndim == 0:
        return float(loss), float(dpred)
    return loss, dpred


def softmax(logits):
    Z, squeeze = _as_matrix(logits)
    if Z.shape[1] == 0:
        raise ShapeError("empty logits")
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    P = E / E.sum(axis=1, keepdims=True)
    return P[0] if squeeze else P


def softmax_xent(logits, label):
    """Cross-entropy for one logit vector; returns (loss, probs, grad)."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1 or logits.size == 0:
        raise ShapeError("expected a non-empty logit vector")
    if not 0 <= label < logits.size:
        raise ShapeError(f"label {label} out of range for {logits.size} classes")
    probs = softmax(logits)
    loss = -np.log(max(probs[label], 1e-300))
    grad = probs.copy()
    grad[label] -= 1.0
    return float(loss), probs, grad


def softmax_xent_batch(logits, labels):
    """Batched cross-entropy; returns (mean loss, probs, per-row grads).

    Row gradients are for the per-row loss (not divided by batch size).
    """
    Z, _ = _as_matrix(logits)
    labels = np.asarray(labels, dtype=np.intp)
    probs = softmax(Z)
    rows = np.arange(Z.shape[0])
    losses = -np.log(np.maximum(probs[rows, labels], 1e-300))
    grads = probs.copy()
    grads[rows, labels] -= 1.0
    return float(losses.mean()), probs, grads


# ---------------------------------------------------------------------------
# Adaptive-moment optimizer
# ---------------------------------------------------------------------------


@dataclass
class OptimizerState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def optimizer_step(state, params, grads):
    """One adaptive-moment update, in place on the parameter arrays.

    Deterministic given state; raises TrainingError naming the parameter on
    any non-finite gradient.
    """
    state.step_count += 1
    t = state.step_count
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape mismatch for {name}")
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient in {name}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        mhat = m / (1 - state.beta1**t)
        vhat = v / (1 - state.beta2**t)
        p -= state.lr * mhat / (np.sqrt(vhat) + state.eps)
    return params


# ---------------------------------------------------------------------------
# Finite-difference gradient checking
# ---------------------------------------------------------------------------


def finite_difference_grads(loss_fn, arrays, eps=1e-6):
    """Central finite differences of loss_fn over every entry of arrays.

    loss_fn takes no arguments and reads the (mutated-in-place) arrays.
    """
    out = {}
    for name, arr in arrays.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            lp = loss_fn()
            flat[k] = orig - eps
            lm = loss_fn()
            flat[k] = orig
            gflat[k] = (lp - lm) / (2 * eps)
        out[name] = g
    return out


def max_relative_error(analytic, numeric):
    """Worst relative disagreement across all parameter arrays."""
    worst = 0.0
    for name in analytic:
        a = analytic[name].reshape(-1)
        n = numeric[name].reshape(-1)
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
