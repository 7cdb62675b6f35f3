"""Embedding contract, masked prediction, adversarial masking, pretraining."""

import numpy as np
import pytest

from featacq.data import (
    FeatureSchema,
    FeatureSpec,
    PatientRecord,
    SyntheticSpec,
    generate_synthetic,
    split,
    standardize,
)
from featacq.guesser import (
    FrozenModelError,
    GuesserModel,
    MaskedState,
    PairingError,
    PretrainConfig,
    adversarial_mask,
    build_guesser,
    build_slots,
    embed_feature,
    full_reveal_accuracy,
    load_guesser,
    masked_accuracy,
    pretrain,
    save_guesser,
)
from featacq.numerics import ContractViolation, DenseLayer, DenseNet


def mixed_schema():
    return FeatureSchema(
        (
            FeatureSpec("age", "numeric", 0.0),
            FeatureSpec("lab", "numeric", 2.0),
            FeatureSpec("vitals", "timeseries", 3.0, slot_width=5),
            FeatureSpec("note", "embedded", 6.0, slot_width=3),
        )
    )


@pytest.fixture
def model():
    rng = np.random.default_rng(0)
    return build_guesser(mixed_schema(), n_classes=2, rng=rng, hidden=(8,))


def _sig(z):
    return 1.0 / (1.0 + np.exp(-z))


class TestEmbedding:
    def test_numeric_passthrough(self, model):
        np.testing.assert_array_equal(embed_feature(model, "lab", 1.7), [1.7])

    def test_length_one_series_zero_history(self, model):
        slot = embed_feature(model, "vitals", np.array([2.5]))
        np.testing.assert_array_equal(slot[:-1], np.zeros(4))
        assert slot[-1] == 2.5

    def test_series_hidden_matches_unrolled_recurrence(self, model):
        # oracle: explicit gate-by-gate recurrence, written independently
        steps = np.array([0.3, -1.1, 0.7])
        cell = model.encoders["vitals"]
        H = cell.hidden_width
        h = np.zeros(H)
        c = np.zeros(H)
        for t in range(2):  # all but the most recent step
            z = cell.Wx @ np.array([steps[t]]) + cell.Wh @ h + cell.b
            i, f, o, g = _sig(z[:H]), _sig(z[H : 2 * H]), _sig(z[2 * H : 3 * H]), np.tanh(z[3 * H :])
            c = f * c + i * g
            h = o * np.tanh(c)
        slot = embed_feature(model, "vitals", steps)
        np.testing.assert_allclose(slot[:-1], h, atol=1e-12)
        assert slot[-1] == steps[-1]

    def test_embedded_verbatim(self, model):
        vec = np.array([0.1, -0.2, 0.3])
        np.testing.assert_array_equal(embed_feature(model, "note", vec), vec)

    def test_absent_is_contract_violation(self, model):
        with pytest.raises(ContractViolation):
            embed_feature(model, "lab", None)

    def test_build_slots_skips_absent(self, model):
        rec = PatientRecord(
            id="x", label=0, values={"age": 1.0, "lab": None, "vitals": np.array([1.0, 2.0]), "note": None}
        )
        slots, present, _ = build_slots(model, rec)
        np.testing.assert_array_equal(present, [1, 0, 1, 0])
        assert slots[1] == 0.0  # lab slot untouched


class TestPredictProba:
    def test_zeroed_head_uniform(self, model):
        for layer in model.head.layers:
            layer.W[...] = 0.0
            layer.b[...] = 0.0
        state = MaskedState(slots=np.ones(model.schema.state_width), mask=np.ones(4), budget=0.0)
        np.testing.assert_allclose(model.predict_proba(state), [0.5, 0.5], atol=1e-12)

    def test_mask_zero_suppresses_slot_garbage(self, model):
        rng = np.random.default_rng(4)
        slots = rng.standard_normal(model.schema.state_width)
        mask = np.array([1.0, 0.0, 1.0, 1.0])
        clean = model.predict_proba(MaskedState(slots=slots, mask=mask, budget=0.0))
        garbage = slots.copy()
        garbage[1] = 1e6  # lab slot is hidden; its content must not matter
        dirty = model.predict_proba(MaskedState(slots=garbage, mask=mask, budget=0.0))
        np.testing.assert_array_equal(clean, dirty)

    def test_state_width_checked(self, model):
        with pytest.raises(Exception):
            model.predict_proba(MaskedState(slots=np.zeros(3), mask=np.ones(4), budget=0.0))


def linear_head_model(schema, weight_on, n_classes=2):
    """Guesser whose head weight lives only on one feature's slot."""
    width = schema.state_width + schema.d
    W = np.zeros((n_classes, width))
    sl = schema.slot_slices()[weight_on]
    W[1, sl] = 3.0
    head = DenseNet([DenseLayer(W=W, b=np.zeros(n_classes), activation="linear")])
    return GuesserModel(schema=schema, head=head, encoders={}, n_classes=n_classes)


class TestAdversarialMask:
    def numeric_schema(self):
        return FeatureSchema(
            tuple(
                [FeatureSpec("free0", "numeric", 0.0)]
                + [FeatureSpec(f"pay{j}", "numeric", 1.0) for j in range(4)]
            )
        )

    def record(self, schema, rng):
        return PatientRecord(
            id="r", label=1, values={f.name: float(rng.standard_normal()) for f in schema.features}
        )

    def test_single_weight_feature_masked(self):
        schema = self.numeric_schema()
        model = linear_head_model(schema, weight_on=2)
        rec = self.record(schema, np.random.default_rng(0))
        mask = adversarial_mask(model, rec, label=1, k=1)
        np.testing.assert_array_equal(mask, [1, 1, 0, 1, 1])

    def test_mask_all_paid_leaves_free(self):
        schema = self.numeric_schema()
        rng = np.random.default_rng(1)
        model = build_guesser(schema, 2, rng, hidden=(6,))
        mask = adversarial_mask(model, self.record(schema, rng), label=0, k=4)
        np.testing.assert_array_equal(mask, [1, 0, 0, 0, 0])

    def test_k_clamps_when_too_large(self):
        schema = self.numeric_schema()
        rng = np.random.default_rng(2)
        model = build_guesser(schema, 2, rng, hidden=(6,))
        mask = adversarial_mask(model, self.record(schema, rng), label=0, k=99)
        np.testing.assert_array_equal(mask, [1, 0, 0, 0, 0])

    def test_matches_finite_difference_sensitivity(self):
        # oracle: per-feature loss sensitivity via central differences on slots
        schema = self.numeric_schema()
        rng = np.random.default_rng(3)
        model = build_guesser(schema, 2, rng, hidden=(8,))
        rec = self.record(schema, rng)
        slots, present, _ = build_slots(model, rec)
        label = 1
        eps = 1e-6

        def loss_at(vec):
            p = model.predict_proba(MaskedState(slots=vec, mask=present, budget=0.0))
            return -np.log(p[label])

        norms = np.zeros(schema.d)
        for j, sl in enumerate(schema.slot_slices()):
            g2 = 0.0
            for idx in range(sl.start, sl.stop):
                up, dn = slots.copy(), slots.copy()
                up[idx] += eps
                dn[idx] -= eps
                g2 += ((loss_at(up) - loss_at(dn)) / (2 * eps)) ** 2
            norms[j] = np.sqrt(g2)
        fd_top2 = set(sorted(range(1, 5), key=lambda j: -norms[j])[:2])
        mask = adversarial_mask(model, rec, label=label, k=2)
        masked = {j for j in range(schema.d) if present[j] == 1.0 and mask[j] == 0.0}
        assert masked == fd_top2


def training_dataset(seed=0, n=600, d=6, weights=(4.0, -3.0, 2.5)):
    spec = SyntheticSpec(
        n_features=d,
        informative=(1, 2, 3),
        weights=weights,
        n_samples=n,
        seed=seed,
        n_free=1,
    )
    ds = generate_synthetic(spec)
    return standardize(split(ds, (0.7, 0.15, 0.15), seed=seed))


class TestPretrain:
    def test_plain_config_matches_plain_classifier(self):
        from sklearn.linear_model import LogisticRegression

        ds = training_dataset(seed=1)
        rng = np.random.default_rng(1)
        model = build_guesser(ds.schema, 2, rng, hidden=(16,))
        cfg = PretrainConfig(epochs=60, lr=3e-3, adversarial=False, random_mask=False, seed=1)
        model, log = pretrain(model, ds, cfg)
        train = ds.split_records("train")
        acc = full_reveal_accuracy(model, train)
        X = np.array([[r.values[f"f{j}"] for j in range(6)] for r in train])
        y = np.array([r.label for r in train])
        plain = LogisticRegression().fit(X, y).score(X, y)
        assert abs(acc - plain) <= 0.02

    def test_full_reveal_accuracy_after_robust_pretrain(self):
        ds = training_dataset(seed=2, weights=(6.0, -5.0, 4.0))
        rng = np.random.default_rng(2)
        model = build_guesser(ds.schema, 2, rng, hidden=(32,))
        model, _ = pretrain(model, ds, PretrainConfig(epochs=30, seed=2))
        assert full_reveal_accuracy(model, ds.split_records("test")) > 0.9

    def test_robust_beats_plain_under_masking(self):
        ds = training_dataset(seed=3, weights=(5.0, -4.0, 3.0))
        rng_a = np.random.default_rng(3)
        robust = build_guesser(ds.schema, 2, rng_a, hidden=(32,))
        robust, _ = pretrain(robust, ds, PretrainConfig(epochs=25, seed=3))
        rng_b = np.random.default_rng(3)
        plain = build_guesser(ds.schema, 2, rng_b, hidden=(32,))
        plain, _ = pretrain(
            plain, ds, PretrainConfig(epochs=25, adversarial=False, random_mask=False, seed=3)
        )
        val = ds.split_records("val")
        assert masked_accuracy(robust, val, 0.5, seed=9) >= masked_accuracy(plain, val, 0.5, seed=9)

    def test_log_schedule_non_decreasing(self):
        ds = training_dataset(seed=4, n=200)
        rng = np.random.default_rng(4)
        model = build_guesser(ds.schema, 2, rng, hidden=(8,))
        _, log = pretrain(model, ds, PretrainConfig(epochs=5, seed=4))
        p = [e["p_adv"] for e in log]
        assert p == sorted(p)
        assert {"epoch", "loss", "val_acc", "p_adv"} <= set(log[0])

    def test_frozen_after_pretrain(self):
        ds = training_dataset(seed=5, n=200)
        rng = np.random.default_rng(5)
        model = build_guesser(ds.schema, 2, rng, hidden=(8,))
        model, _ = pretrain(model, ds, PretrainConfig(epochs=2, seed=5))
        assert model.frozen
        with pytest.raises(FrozenModelError):
            pretrain(model, ds, PretrainConfig(epochs=1, seed=5))

    def test_schema_mismatch_rejected(self):
        ds = training_dataset(seed=6, n=200)
        other = training_dataset(seed=6, n=200, d=5, weights=(4.0, -3.0, 2.5))
        rng = np.random.default_rng(6)
        model = build_guesser(ds.schema, 2, rng, hidden=(8,))
        with pytest.raises(PairingError):
            pretrain(model, other, PretrainConfig(epochs=1, seed=6))

    def test_full_reveal_confidence_beats_free_only(self):
        # monotonicity per feature is NOT asserted (evidence can cut both
        # ways); the distributional version must hold after pretraining
        ds = training_dataset(seed=8, weights=(5.0, -4.0, 3.0))
        rng = np.random.default_rng(8)
        model = build_guesser(ds.schema, 2, rng, hidden=(32,))
        model, _ = pretrain(model, ds, PretrainConfig(epochs=25, lr=3e-3, seed=8))
        free = np.array([1.0 if f.free else 0.0 for f in ds.schema.features])
        full_p, free_p = [], []
        for r in ds.split_records("test"):
            slots, present, _ = build_slots(model, r)
            full = model.predict_proba(MaskedState(slots=slots, mask=present, budget=0.0))
            only_free = model.predict_proba(
                MaskedState(slots=slots, mask=present * free, budget=0.0)
            )
            full_p.append(full[r.label])
            free_p.append(only_free[r.label])
        assert np.mean(full_p) >= np.mean(free_p)

    def test_timeseries_encoder_learns(self):
        # signal lives only in a timeseries feature; training must use it
        spec = SyntheticSpec(
            n_features=3,
            informative=(1,),
            weights=(8.0,),
            n_samples=600,
            seed=7,
            n_free=1,
            modalities={1: "timeseries"},
            timeseries_hidden=4,
        )
        ds = standardize(split(generate_synthetic(spec), (0.8, 0.1, 0.1), seed=7))
        rng = np.random.default_rng(7)
        model = build_guesser(ds.schema, 2, rng, hidden=(16,))
        model, _ = pretrain(model, ds, PretrainConfig(epochs=40, lr=3e-3, seed=7))
        assert full_reveal_accuracy(model, ds.split_records("test")) > 0.8


class TestPersistence:
    def test_round_trip_checksum_and_predictions(self, tmp_path, model):
        rng = np.random.default_rng(8)
        slots = rng.standard_normal(model.schema.state_width)
        mask = np.array([1.0, 1.0, 0.0, 1.0])
        before = model.predict_proba(MaskedState(slots=slots, mask=mask, budget=0.0))
        path = tmp_path / "guesser.ckpt"
        save_guesser(model, path)
        loaded = load_guesser(path)
        assert loaded.checksum() == model.checksum()
        after = loaded.predict_proba(MaskedState(slots=slots, mask=mask, budget=0.0))
        np.testing.assert_array_equal(before, after)
