import time
import numpy as np
from featacq.data import Dataset, FeatureSchema, FeatureSpec, PatientRecord, split, standardize
from featacq.guesser import PretrainConfig, build_guesser, pretrain, masked_accuracy

def magnitude_dataset(seed, n=2500, d=10, w=4.0):
    rng = np.random.default_rng(seed)
    feats = tuple(
        [FeatureSpec("f0", "numeric", 0.0)]
        + [FeatureSpec(f"f{j}", "numeric", 1.0) for j in range(1, d)]
    )
    schema = FeatureSchema(feats)
    informative = [1, 2, 3, 4, 5, 6]
    c = w * len(informative) * np.sqrt(2 / np.pi)
    records = []
    for i in range(n):
        x = rng.standard_normal(d)
        z = w * sum(abs(x[j]) for j in informative) - c
        y = int(rng.random() < 1 / (1 + np.exp(-z)))
        records.append(PatientRecord(id=f"p{i}", label=y,
                                     values={f"f{j}": float(x[j]) for j in range(d)}))
    return standardize(split(Dataset(schema=schema, records=records), (0.7, 0.15, 0.15), seed=seed))

def masked_acc_avg(model, records, rate, seed, draws=20):
    return float(np.mean([masked_accuracy(model, records, rate, seed=seed + i) for i in range(draws)]))

def run_seed(seed):
    t0 = time.time()
    ds = magnitude_dataset(seed)
    robust = build_guesser(ds.schema, 2, np.random.default_rng(seed), hidden=(64, 64))
    robust, _ = pretrain(robust, ds, PretrainConfig(epochs=30, lr=3e-3, seed=seed))
    plain = build_guesser(ds.schema, 2, np.random.default_rng(seed), hidden=(64, 64))
    plain, _ = pretrain(plain, ds, PretrainConfig(epochs=30, lr=3e-3, adversarial=False, random_mask=False, seed=seed))
    val = ds.split_records("val")
    ra = masked_acc_avg(robust, val, 0.5, seed + 100)
    pa = masked_acc_avg(plain, val, 0.5, seed + 100)
    full_r = masked_acc_avg(robust, val, 1.0, seed + 100, draws=1)
    full_p = masked_acc_avg(plain, val, 1.0, seed + 100, draws=1)
    print(f"seed={seed}: robust@0.5={ra:.4f} plain@0.5={pa:.4f} margin={ra-pa:+.4f} "
          f"(full: r={full_r:.3f} p={full_p:.3f}) ({time.time()-t0:.0f}s)")
    return ra > pa

wins = sum(run_seed(s) for s in range(5))
print("wins:", wins, "/5")
