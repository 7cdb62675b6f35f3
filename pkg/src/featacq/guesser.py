"""Masked-input classifier that supplies rewards for feature acquisition.

The model embeds each feature into its slot (numeric passthrough, gated
recurrent encoder for time series, precomputed vectors verbatim), gates the
slots elementwise by the reveal mask, appends the mask channel, and runs a
dense head. Pretraining mixes random reveal subsets with adversarial masks
that hide the most gradient-salient features; the model is frozen afterward
so the downstream decision process sees a stable reward function.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint as ckpt
from .data import FeatureSchema, schema_from_doc
from .numerics import (
    ContractViolation,
    DenseNet,
    OptimizerState,
    RecurrentCell,
    ShapeError,
    TrainingError,
    dense_net,
    optimizer_step,
    recurrent_cell,
    softmax,
    softmax_xent_batch,
)

log = logging.getLogger(__name__)


class PairingError(RuntimeError):
    """Model applied to data it was not trained on."""


class FrozenModelError(RuntimeError):
    pass


@dataclass
class MaskedState:
    slots: np.ndarray  # (state_width,), slot j zeroed whenever mask[j] == 0
    mask: np.ndarray  # (d,) of {0., 1.}
    budget: float


@dataclass
class GuesserModel:
    schema: FeatureSchema
    head: DenseNet  # input = state_width + d, output = n_classes
    encoders: dict  # timeseries feature name -> RecurrentCell
    n_classes: int
    input_stats: dict | None = None  # {"mean": {...}, "std": {...}} provenance
    frozen: bool = False
    schema_hash: str = ""
    _slot_widths: np.ndarray = field(init=False, repr=False)
    _slices: list = field(init=False, repr=False)

    def __post_init__(self):
        if not self.schema_hash:
            self.schema_hash = self.schema.hash()
        self._slot_widths = np.array([f.slot_width for f in self.schema.features])
        self._slices = self.schema.slot_slices()
        want = self.schema.state_width + self.schema.d
        if self.head.in_width != want:
            raise ShapeError(f"head input width {self.head.in_width} != {want}")

    def named_params(self):
        out = [(f"head.{k}", v) for k, v in self.head.params().items()]
        for name in sorted(self.encoders):
            for k, v in self.encoders[name].params().items():
                out.append((f"enc.{name}.{k}", v))
        return out

    def checksum(self):
        return ckpt.param_checksum(self.named_params())

    def freeze(self):
        self.frozen = True
        return self

    def expand_mask(self, mask):
        return np.repeat(np.asarray(mask, dtype=np.float64), self._slot_widths, axis=-1)

    def head_input(self, slots, mask):
        gated = np.asarray(slots) * self.expand_mask(mask)
        return np.concatenate([gated, np.asarray(mask, dtype=np.float64)], axis=-1)

    def predict_proba(self, state):
        """Class probabilities for one masked state; deterministic."""
        if state.slots.shape[-1] != self.schema.state_width:
            raise ShapeError("state width does not match model")
        x = self.head_input(state.slots, state.mask)
        logits, _ = self.head.forward(x)
        return softmax(logits)

    def predict_proba_batch(self, slots, masks):
        X = self.head_input(slots, masks)
        logits, _ = self.head.forward(X)
        return softmax(logits)


def build_guesser(schema, n_classes, rng, hidden=(64, 64)):
    head = dense_net([schema.state_width + schema.d, *hidden, n_classes], rng)
    encoders = {}
    for f in schema.features:
        if f.modality == "timeseries":
            encoders[f.name] = recurrent_cell(1, f.slot_width - 1, rng)
    return GuesserModel(schema=schema, head=head, encoders=encoders, n_classes=n_classes)


# ---------------------------------------------------------------------------
# Embedding
# ---------------------------------------------------------------------------


def embed_feature(model, name, value):
    """Embed one raw feature value into its slot vector.

    Callers must consult the mask first; ABSENT is a contract violation.
    Time series encode steps 1..T-1 through the recurrent cell and append
    the raw most-recent step, so a length-1 series is [zeros ; value].
    """
    if value is None:
        raise ContractViolation(f"embedding ABSENT feature {name!r}")
    spec = model.schema.features[model.schema.index(name)]
    if spec.modality == "numeric":
        return np.array([float(value)], dtype=np.float64)
    if spec.modality == "embedded":
        vec = np.asarray(value, dtype=np.float64)
        if vec.shape != (spec.slot_width,):
            raise ShapeError(f"embedding width {vec.shape} != ({spec.slot_width},)")
        return vec.copy()
    steps = np.asarray(value, dtype=np.float64).reshape(-1)
    h, _ = model.encoders[name].run(steps[:-1])
    return np.concatenate([h, steps[-1:]])


def _embed_with_cache(model, name, steps):
    steps = np.asarray(steps, dtype=np.float64).reshape(-1)
    h, cache = model.encoders[name].run(steps[:-1])
    return np.concatenate([h, steps[-1:]]), cache


def build_slots(model, record):
    """Embed every present feature; returns (slots, present mask, ts caches)."""
    schema = model.schema
    slots = np.zeros(schema.state_width)
    present = np.zeros(schema.d)
    caches = {}
    for j, f in enumerate(schema.features):
        v = record.values.get(f.name)
        if v is None:
            continue
        present[j] = 1.0
        if f.modality == "timeseries":
            slots[model._slices[j]], caches[j] = _embed_with_cache(model, f.name, v)
        else:
            slots[model._slices[j]] = embed_feature(model, f.name, v)
    return slots, present, caches


# ---------------------------------------------------------------------------
# Adversarial masking
# ---------------------------------------------------------------------------


def _slot_grad_norms(model, input_grad_row):
    W = model.schema.state_width
    norms = np.zeros(model.schema.d)
    for j, sl in enumerate(model._slices):
        norms[j] = np.linalg.norm(input_grad_row[:W][sl])
    return norms


def _mask_topk(model, norms, mask, k, warn=True):
    """Zero the k largest-gradient revealed paid features out of mask."""
    candidates = [
        j
        for j in range(model.schema.d)
        if mask[j] == 1.0 and not model.schema.features[j].free
    ]
    if k > len(candidates):
        if warn:
            log.warning("adversarial k=%d clamped to %d maskable features", k, len(candidates))
        k = len(candidates)
    order = sorted(candidates, key=lambda j: (-norms[j], j))
    out = mask.copy()
    for j in order[:k]:
        out[j] = 0.0
    return out


def adversarial_mask(model, record, label, k):
    """Reveal mask that hides the k most loss-salient paid features.

    One gradient evaluation on the fully revealed sample; no inner loop.
    Free features are never masked.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    slots, present, _ = build_slots(model, record)
    x = model.head_input(slots, present)
    logits, cache = model.head.forward(x)
    _, _, grad = softmax_xent_batch(logits[None, :], [label])
    _, dx = model.head.backward(cache, grad[0])
    norms = _slot_grad_norms(model, dx)
    return _mask_topk(model, norms, present, k)


# ---------------------------------------------------------------------------
# Robust pretraining
# ---------------------------------------------------------------------------


@dataclass
class PretrainConfig:
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    adversarial: bool = True
    p_adv_start: float = 0.05
    p_adv_end: float = 0.5
    k_choices: tuple = (1, 2, 3)
    random_mask: bool = True  # hierarchical Uniform-then-Bernoulli reveal rate
    seed: int = 0


def _p_adv_at(config, epoch):
    if not config.adversarial:
        return 0.0
    if config.epochs <= 1:
        return config.p_adv_end
    t = epoch / (config.epochs - 1)
    return config.p_adv_start + t * (config.p_adv_end - config.p_adv_start)


def pretrain(model, dataset, config):
    """Robust supervised pretraining; returns (frozen model, epoch log).

    Random masking draws a reveal rate u ~ U(0,1) per sample and keeps each
    paid feature with probability u, so every reveal fraction that episodes
    can produce is seen. Adversarial masking kicks in per sample with a
    probability that ramps from p_adv_start to p_adv_end across epochs.
    """
    if model.frozen:
        raise FrozenModelError("model is frozen")
    if model.schema_hash != dataset.schema.hash():
        raise PairingError("model/schema hash mismatch")
    train = dataset.split_records("train")
    if not train:
        raise ValueError("train split is empty")
    val = dataset.split_records("val")
    if dataset.stats is not None:
        model.input_stats = {"mean": dataset.stats.mean, "std": dataset.stats.std}
    rng = np.random.default_rng(config.seed)
    opt = OptimizerState(lr=config.lr)
    params = dict(model.named_params())
    free = np.array([1.0 if f.free else 0.0 for f in model.schema.features])
    ts_features = [
        j for j, f in enumerate(model.schema.features) if f.modality == "timeseries"
    ]
    hidden = {j: model.schema.features[j].slot_width - 1 for j in ts_features}

    epoch_log = []
    for epoch in range(config.epochs):
        p_adv = _p_adv_at(config, epoch)
        order = rng.permutation(len(train))
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [train[i] for i in order[start : start + config.batch_size]]
            B = len(batch)
            slots = np.zeros((B, model.schema.state_width))
            present = np.zeros((B, model.schema.d))
            caches = []
            labels = np.zeros(B, dtype=np.intp)
            for i, r in enumerate(batch):
                slots[i], present[i], cache = build_slots(model, r)
                caches.append(cache)
                labels[i] = r.label

            masks = present.copy()
            take_adv = rng.random(B) < p_adv
            if config.random_mask:
                u = rng.random((B, 1))
                keep = (rng.random((B, model.schema.d)) < u).astype(np.float64)
                rand_masks = present * np.maximum(keep, free)
                masks = np.where(take_adv[:, None], masks, rand_masks)
            if take_adv.any():
                X_full = model.head_input(slots[take_adv], present[take_adv])
                logits, cache = model.head.forward(X_full)
                _, _, grads = softmax_xent_batch(logits, labels[take_adv])
                _, dX = model.head.backward(cache, grads)
                adv_rows = np.flatnonzero(take_adv)
                for row, i in enumerate(adv_rows):
                    norms = _slot_grad_norms(model, dX[row])
                    k = int(rng.choice(config.k_choices))
                    masks[i] = _mask_topk(model, norms, present[i], k, warn=False)

            X = model.head_input(slots, masks)
            logits, cache = model.head.forward(X)
            loss, _, grads = softmax_xent_batch(logits, labels)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            losses.append(loss)
            param_grads, dX = model.head.backward(cache, grads / B)
            grads_all = {f"head.{k}": v for k, v in param_grads.items()}
            for name in model.encoders:
                for k in ("Wx", "Wh", "b"):
                    grads_all[f"enc.{name}.{k}"] = np.zeros_like(params[f"enc.{name}.{k}"])
            W = model.schema.state_width
            for i in range(B):
                for j in ts_features:
                    if masks[i, j] != 1.0 or j not in caches[i]:
                        continue
                    name = model.schema.features[j].name
                    sl = model._slices[j]
                    dh = dX[i, :W][sl][: hidden[j]]
                    enc_grads = model.encoders[name].backward(caches[i][j], dh)
                    for k in ("Wx", "Wh", "b"):
                        grads_all[f"enc.{name}.{k}"] += enc_grads[k]
            optimizer_step(opt, params, grads_all)

        entry = {
            "epoch": epoch,
            "loss": float(np.mean(losses)),
            "val_acc": full_reveal_accuracy(model, val) if val else None,
            "p_adv": p_adv,
        }
        epoch_log.append(entry)
    model.freeze()
    return model, epoch_log


def full_reveal_accuracy(model, records):
    if not records:
        return float("nan")
    hits = 0
    for r in records:
        slots, present, _ = build_slots(model, r)
        probs = model.predict_proba(MaskedState(slots=slots, mask=present, budget=0.0))
        hits += int(np.argmax(probs) == r.label)
    return hits / len(records)


def masked_accuracy(model, records, reveal_rate, seed=0):
    """Accuracy under i.i.d. random reveals at a fixed rate (paid features)."""
    rng = np.random.default_rng(seed)
    free = np.array([1.0 if f.free else 0.0 for f in model.schema.features])
    hits = 0
    for r in records:
        slots, present, _ = build_slots(model, r)
        keep = (rng.random(model.schema.d) < reveal_rate).astype(np.float64)
        mask = present * np.maximum(keep, free)
        probs = model.predict_proba(MaskedState(slots=slots, mask=mask, budget=0.0))
        hits += int(np.argmax(probs) == r.label)
    return hits / len(records)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_guesser(model, path):
    arch = {
        "type": "guesser",
        "n_classes": model.n_classes,
        "schema": model.schema.to_doc(),
        "head_widths": [model.head.in_width]
        + [l.W.shape[0] for l in model.head.layers],
        "head_activations": [l.activation for l in model.head.layers],
        "encoders": {
            name: {"in_width": c.in_width, "hidden_width": c.hidden_width}
            for name, c in model.encoders.items()
        },
        "input_stats": model.input_stats,
        "frozen": model.frozen,
    }
    ckpt.save_checkpoint(path, arch, model.named_params(), model.schema_hash)


def load_guesser(path):
    env = ckpt.load_checkpoint(path)
    arch = env.architecture
    if arch.get("type") != "guesser":
        raise ckpt.CheckpointError(f"not a guesser checkpoint: {arch.get('type')!r}")
    schema = schema_from_doc(arch["schema"])
    rng = np.random.default_rng(0)
    widths = arch["head_widths"]
    head = dense_net(widths, rng)
    for layer, act in zip(head.layers, arch["head_activations"]):
        layer.activation = act
    encoders = {
        name: recurrent_cell(c["in_width"], c["hidden_width"], rng)
        for name, c in arch["encoders"].items()
    }
    model = GuesserModel(
        schema=schema,
        head=head,
        encoders=encoders,
        n_classes=arch["n_classes"],
        input_stats=arch.get("input_stats"),
        frozen=arch.get("frozen", False),
        schema_hash=env.schema_hash,
    )
    loaded = env.param_dict()
    for name, arr in model.named_params():
        if name not in loaded or loaded[name].shape != arr.shape:
            raise ckpt.CheckpointError(f"parameter mismatch for {name}")
        arr[...] = loaded[name]
    return model
