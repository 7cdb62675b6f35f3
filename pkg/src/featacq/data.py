"""Feature schema with acquisition costs, patient records, synthetic data.

Records are one JSON object per line keyed by feature name; ABSENT values
are explicit nulls. Free (cost-0) features must be present for every
patient because episodes reveal them unconditionally at reset.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import softmax

MODALITIES = ("numeric", "timeseries", "embedded")
FORMAT_VERSION = 1
SPLITS = ("train", "val", "test")

# Cost tiers used by the bundled demo schema: routine bedside measurements
# up through laboratory-based tests (ceiling 7).
DEMO_COST_TIERS = (1.0, 2.0, 3.0, 6.0, 7.0)


class IngestionError(ValueError):
    def __init__(self, message, record_id=None, feature=None):
        self.record_id = record_id
        self.feature = feature
        where = f" (record={record_id!r}, feature={feature!r})" if record_id else ""
        super().__init__(message + where)


class SpecError(ValueError):
    pass


class StratificationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    modality: str
    cost: float
    slot_width: int = 1

    @property
    def free(self):
        return self.cost == 0.0


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise IngestionError("duplicate feature names in schema")
        for f in self.features:
            if f.modality not in MODALITIES:
                raise IngestionError(f"unknown modality {f.modality!r}", feature=f.name)
            if f.cost < 0:
                raise IngestionError("negative cost", feature=f.name)
            if f.slot_width < 1:
                raise IngestionError("slot width must be >= 1", feature=f.name)
            if f.modality == "numeric" and f.slot_width != 1:
                raise IngestionError("numeric features are 1-wide", feature=f.name)
            if f.modality == "timeseries" and f.slot_width < 2:
                raise IngestionError(
                    "timeseries slots need history plus last step", feature=f.name
                )

    @property
    def d(self):
        return len(self.features)

    @property
    def names(self):
        return tuple(f.name for f in self.features)

    @property
    def state_width(self):
        return sum(f.slot_width for f in self.features)

    @property
    def free_indices(self):
        return tuple(j for j, f in enumerate(self.features) if f.free)

    @property
    def paid_indices(self):
        return tuple(j for j, f in enumerate(self.features) if not f.free)

    @property
    def cost_ceiling(self):
        return max((f.cost for f in self.features), default=0.0)

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise IngestionError(f"unknown feature name {name!r}", feature=name)

    def slot_slices(self):
        slices, start = [], 0
        for f in self.features:
            slices.append(slice(start, start + f.slot_width))
            start += f.slot_width
        return slices

    def to_doc(self):
        return {
            "format_version": FORMAT_VERSION,
            "features": [
                {
                    "name": f.name,
                    "modality": f.modality,
                    "cost": f.cost,
                    "slot_width": f.slot_width,
                }
                for f in self.features
            ],
        }

    def hash(self):
        payload = json.dumps(self.to_doc(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


def schema_from_doc(doc):
    if doc.get("format_version") != FORMAT_VERSION:
        raise IngestionError(f"unsupported schema format_version {doc.get('format_version')!r}")
    feats = tuple(
        FeatureSpec(
            name=f["name"],
            modality=f["modality"],
            cost=float(f["cost"]),
            slot_width=int(f.get("slot_width", 1)),
        )
        for f in doc["features"]
    )
    return FeatureSchema(feats)


def save_schema(schema, path):
    with open(path, "w") as fh:
        json.dump(schema.to_doc(), fh, indent=2)
        fh.write("\n")


def load_schema(path):
    with open(path) as fh:
        return schema_from_doc(json.load(fh))


def demo_schema():
    """Small clinical-flavoured schema exercising the demo cost tiers."""
    feats = [
        FeatureSpec("age", "numeric", 0.0),
        FeatureSpec("sex", "numeric", 0.0),
        FeatureSpec("temperature", "numeric", DEMO_COST_TIERS[0]),
        FeatureSpec("heart_rate", "numeric", DEMO_COST_TIERS[1]),
        FeatureSpec("coma_scale", "numeric", DEMO_COST_TIERS[2]),
        FeatureSpec("oxygen_saturation", "timeseries", DEMO_COST_TIERS[3], slot_width=9),
        FeatureSpec("glucose", "numeric", DEMO_COST_TIERS[4]),
        FeatureSpec("ph_level", "numeric", DEMO_COST_TIERS[4]),
    ]
    return FeatureSchema(tuple(feats))


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


@dataclass
class PatientRecord:
    id: str
    label: int | None
    values: dict  # feature name -> float | np.ndarray | None (ABSENT)

    def is_absent(self, name):
        return self.values.get(name) is None


def validate_record(schema, record, require_all=True):
    """Check a record against the schema; raises IngestionError."""
    for name in record.values:
        if name not in schema.names:
            raise IngestionError("unknown feature name", record.id, name)
    for f in schema.features:
        if f.name not in record.values:
            if require_all:
                raise IngestionError("missing feature key", record.id, f.name)
            continue
        v = record.values[f.name]
        if v is None:
            if f.free:
                raise IngestionError(
                    "free features must always be present", record.id, f.name
                )
            continue
        if f.modality == "numeric":
            if not np.isscalar(v) or not np.isfinite(float(v)):
                raise IngestionError("numeric value expected", record.id, f.name)
        elif f.modality == "timeseries":
            arr = np.asarray(v, dtype=np.float64)
            if arr.ndim != 1 or arr.size < 1 or not np.isfinite(arr).all():
                raise IngestionError("timeseries needs >=1 finite steps", record.id, f.name)
        else:  # embedded
            arr = np.asarray(v, dtype=np.float64)
            if arr.shape != (f.slot_width,) or not np.isfinite(arr).all():
                raise IngestionError(
                    f"embedding width must be {f.slot_width}", record.id, f.name
                )


def record_to_doc(record):
    feats = {}
    for name, v in record.values.items():
        if v is None:
            feats[name] = None
        elif np.isscalar(v):
            feats[name] = float(v)
        else:
            feats[name] = np.asarray(v, dtype=np.float64).tolist()
    return {"id": record.id, "label": record.label, "features": feats}


def record_from_doc(doc):
    values = {}
    for name, v in doc["features"].items():
        if v is None:
            values[name] = None
        elif isinstance(v, list):
            values[name] = np.asarray(v, dtype=np.float64)
        else:
            values[name] = float(v)
    label = doc.get("label")
    return PatientRecord(id=str(doc["id"]), label=None if label is None else int(label), values=values)


def save_records(records, path):
    with open(path, "w") as fh:
        fh.write(json.dumps({"format_version": FORMAT_VERSION}) + "\n")
        for r in records:
            fh.write(json.dumps(record_to_doc(r)) + "\n")


def load_records(path):
    records = []
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("format_version") != FORMAT_VERSION:
            raise IngestionError(
                f"unsupported records format_version {header.get('format_version')!r}"
            )
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_doc(json.loads(line)))
    return records


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------


@dataclass
class StandardStats:
    mean: dict  # feature name -> float
    std: dict


@dataclass
class Dataset:
    schema: FeatureSchema
    records: list
    splits: dict = field(default_factory=dict)  # record id -> split name
    stats: StandardStats | None = None

    def split_records(self, name):
        return [r for r in self.records if self.splits.get(r.id) == name]

    def labels(self):
        return np.array([r.label for r in self.records])


def load_dataset(records_path, schema_path, fractions=(0.7, 0.15, 0.15), seed=0):
    schema = load_schema(schema_path)
    records = load_records(records_path)
    for r in records:
        validate_record(schema, r)
    ds = Dataset(schema=schema, records=records)
    if records:
        ds = split(ds, fractions, seed)
    return ds


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------


@dataclass
class SwitchRule:
    """Two label rules keyed by a binary free switch feature."""

    informative: tuple  # (indices for switch=0, indices for switch=1)
    weights: tuple  # matching weight tuples


@dataclass
class SyntheticSpec:
    n_features: int
    informative: tuple
    weights: tuple
    n_samples: int
    seed: int = 0
    n_classes: int = 2
    n_free: int = 1  # features [0, n_free) are free
    costs: tuple | None = None  # per paid feature, in index order
    missing_rate: float = 0.0
    noise: float = 0.0
    rule: str = "linear"  # "magnitude" thresholds summed |x|, binary only
    modalities: dict = field(default_factory=dict)  # index -> modality
    timeseries_len: int = 6
    timeseries_hidden: int = 8  # slot width becomes hidden + 1
    embed_width: int = 4
    switch: SwitchRule | None = None

    def __post_init__(self):
        if len(self.informative) == 0 and self.switch is None:
            raise SpecError("informative feature set must be non-empty")
        if not all(0 <= k < self.n_features for k in self.informative):
            raise SpecError("informative indices out of range")
        if not 0 <= self.missing_rate < 1:
            raise SpecError("missing rate must be in [0, 1)")
        if len(self.weights) != len(self.informative):
            raise SpecError("weights must match informative indices")
        if not all(np.isfinite(self.weights)):
            raise SpecError("weights must be finite")
        if self.rule not in ("linear", "magnitude"):
            raise SpecError(f"unknown label rule {self.rule!r}")
        if self.rule == "magnitude" and self.n_classes != 2:
            raise SpecError("magnitude rule is binary only")
        if self.switch is not None and self.n_free < 1:
            raise SpecError("switch rule needs a free switch feature")


def synthetic_schema(spec):
    feats = []
    paid_costs = list(spec.costs) if spec.costs is not None else None
    paid_seen = 0
    for j in range(spec.n_features):
        modality = spec.modalities.get(j, "numeric")
        if j < spec.n_free:
            cost = 0.0
        elif paid_costs is not None:
            cost = float(paid_costs[paid_seen])
            paid_seen += 1
        else:
            cost = 1.0
        if modality == "numeric":
            width = 1
        elif modality == "timeseries":
            width = spec.timeseries_hidden + 1
        else:
            width = spec.embed_width
        feats.append(FeatureSpec(f"f{j}", modality, cost, width))
    return FeatureSchema(tuple(feats))


def _class_logits(spec, x, switch_val):
    if spec.switch is not None:
        g = int(switch_val > 0.5)
        idx = np.asarray(spec.switch.informative[g], dtype=int)
        w = np.asarray(spec.switch.weights[g], dtype=np.float64)
    else:
        idx = np.asarray(spec.informative, dtype=int)
        w = np.asarray(spec.weights, dtype=np.float64)
    if spec.rule == "magnitude":
        # centered so classes stay balanced: E|N(0,1)| = sqrt(2/pi)
        z = float(w @ (np.abs(x[idx]) - np.sqrt(2.0 / np.pi)))
        return np.array([0.0, z])
    z = float(w @ x[idx])
    if spec.n_classes == 2:
        return np.array([0.0, z])
    # deterministic per-class projections for >2 classes
    proj = np.vstack(
        [np.cos(np.arange(len(idx)) + c) for c in range(spec.n_classes)]
    )
    return proj @ (w * x[idx])


def generate_synthetic(spec):
    """Draw a synthetic dataset with a known informative feature set.

    Labels come from a logistic model over the informative features only;
    everything else is independent noise. Missingness is i.i.d. on paid
    features. Deterministic per seed.
    """
    rng = np.random.default_rng(spec.seed)
    schema = synthetic_schema(spec)
    # per-feature fixed directions for embedded modality
    directions = {}
    for j, f in enumerate(schema.features):
        if f.modality == "embedded":
            u = rng.standard_normal(f.slot_width)
            directions[j] = u / np.linalg.norm(u)
    records = []
    for i in range(spec.n_samples):
        x = rng.standard_normal(spec.n_features)
        switch_val = 0.0
        if spec.switch is not None:
            switch_val = float(rng.integers(0, 2))
            x[0] = switch_val
        logits = _class_logits(spec, x, switch_val)
        if spec.noise > 0:
            logits = logits + spec.noise * rng.standard_normal(logits.size)
        p = softmax(logits)
        label = int(rng.choice(spec.n_classes, p=p)) if spec.n_classes > 2 else int(rng.random() < p[1])
        values = {}
        for j, f in enumerate(schema.features):
            if not f.free and rng.random() < spec.missing_rate:
                values[f.name] = None
                continue
            if f.modality == "numeric":
                values[f.name] = float(x[j])
            elif f.modality == "timeseries":
                # history walks into the signal; the last step carries x_j
                steps = np.empty(spec.timeseries_len)
                steps[-1] = x[j]
                for t in range(spec.timeseries_len - 2, -1, -1):
                    steps[t] = steps[t + 1] + 0.3 * rng.standard_normal()
                values[f.name] = steps
            else:
                values[f.name] = x[j] * directions[j] + 0.05 * rng.standard_normal(f.slot_width)
        records.append(PatientRecord(id=f"p{i:05d}", label=label, values=values))
    return Dataset(schema=schema, records=records)


# ---------------------------------------------------------------------------
# Split and standardize
# ---------------------------------------------------------------------------


def split(dataset, fractions=(0.7, 0.15, 0.15), seed=0):
    """Stratified-by-label split; deterministic per seed."""
    fractions = tuple(float(f) for f in fractions)
    if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise SpecError("fractions must be non-negative and sum to 1")
    active = sum(1 for f in fractions if f > 0)
    rng = np.random.default_rng(seed)
    by_label = {}
    for r in dataset.records:
        by_label.setdefault(r.label, []).append(r)
    assignment = {}
    for label in sorted(by_label, key=lambda v: (v is None, v)):
        group = by_label[label]
        if len(group) < active:
            raise StratificationError(
                f"class {label!r} has {len(group)} records for {active} splits"
            )
        order = rng.permutation(len(group))
        ideal = [f * len(group) for f in fractions]
        counts = [int(np.floor(v)) for v in ideal]
        rema = sorted(
            range(3), key=lambda k: (ideal[k] - counts[k], fractions[k]), reverse=True
        )
        for k in rema:
            if sum(counts) == len(group):
                break
            if fractions[k] > 0:
                counts[k] += 1
        assert sum(counts) == len(group)
        pos = 0
        for split_name, count in zip(SPLITS, counts):
            for idx in order[pos : pos + count]:
                assignment[group[idx].id] = split_name
            pos += count
    return replace(dataset, splits=assignment)


def standardize(dataset):
    """Zero-mean unit-std transform fit on the train split only.

    Numeric features use per-feature train stats; timeseries pool all train
    steps per feature; embedded vectors pass through untouched.
    """
    train = dataset.split_records("train")
    if not train:
        raise SpecError("train split is empty")
    mean, std = {}, {}
    for f in dataset.schema.features:
        if f.modality == "embedded":
            continue
        vals = []
        for r in train:
            v = r.values.get(f.name)
            if v is None:
                continue
            if f.modality == "numeric":
                vals.append(float(v))
            else:
                vals.extend(np.asarray(v, dtype=np.float64).tolist())
        mu = float(np.mean(vals)) if vals else 0.0
        sd = float(np.std(vals)) if vals else 0.0
        mean[f.name] = mu
        std[f.name] = max(sd, 1e-8)
    stats = StandardStats(mean=mean, std=std)
    new_records = [transform_record(dataset.schema, r, stats) for r in dataset.records]
    return replace(dataset, records=new_records, stats=stats)


def transform_record(schema, record, stats):
    values = {}
    for name, v in record.values.items():
        if v is None or name not in stats.mean:
            values[name] = v if (v is None or np.isscalar(v)) else np.asarray(v).copy()
        elif np.isscalar(v):
            values[name] = (float(v) - stats.mean[name]) / stats.std[name]
        else:
            values[name] = (np.asarray(v, dtype=np.float64) - stats.mean[name]) / stats.std[name]
    return PatientRecord(id=record.id, label=record.label, values=values)


def standardize_value(spec, value, stats):
    """Transform one raw value with stored train stats (service ingest path)."""
    if stats is None or spec.name not in stats.mean or value is None:
        return value
    if spec.modality == "embedded":
        return value
    if np.isscalar(value):
        return (float(value) - stats.mean[spec.name]) / stats.std[spec.name]
    return (np.asarray(value, dtype=np.float64) - stats.mean[spec.name]) / stats.std[spec.name]
