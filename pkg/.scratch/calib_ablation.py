import time
import numpy as np
from featacq.data import SyntheticSpec, generate_synthetic, split, standardize
from featacq.guesser import PretrainConfig, build_guesser, pretrain, masked_accuracy

def run_seed(seed):
    t0 = time.time()
    spec = SyntheticSpec(
        n_features=10, informative=(1,2,3,4,5,6), weights=(4.0,-3.5,3.0,-2.5,2.0,-2.0),
        n_samples=1500, seed=seed, n_free=1)
    ds = standardize(split(generate_synthetic(spec), (0.7,0.15,0.15), seed=seed))
    robust = build_guesser(ds.schema, 2, np.random.default_rng(seed), hidden=(64,64))
    robust, _ = pretrain(robust, ds, PretrainConfig(epochs=25, lr=3e-3, seed=seed))
    plain = build_guesser(ds.schema, 2, np.random.default_rng(seed), hidden=(64,64))
    plain, _ = pretrain(plain, ds, PretrainConfig(epochs=25, lr=3e-3, adversarial=False, random_mask=False, seed=seed))
    val = ds.split_records("val")
    ra = masked_accuracy(robust, val, 0.5, seed=seed + 100)
    pa = masked_accuracy(plain, val, 0.5, seed=seed + 100)
    print(f"seed={seed}: robust={ra:.4f} plain={pa:.4f} margin={ra-pa:+.4f} ({time.time()-t0:.0f}s)")
    return ra > pa

wins = sum(run_seed(s) for s in range(5))
print("wins:", wins, "/5")
