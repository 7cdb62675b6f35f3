import time
import numpy as np
from featacq.agent import QPolicy, RandomPolicy, TrainConfig, train_agent
from featacq.data import SyntheticSpec, generate_synthetic, split, standardize
from featacq.env import AcquisitionEnv, EnvConfig
from featacq.evaluation import evaluate_policy, oracle_policy_value
from featacq.guesser import PretrainConfig, build_guesser, pretrain

def run_seed(seed, episodes, weights, eps_frac=0.6):
    spec = SyntheticSpec(
        n_features=9, informative=(1,2,3,4,5), weights=weights,
        n_samples=2500, seed=seed, n_free=1)
    ds = standardize(split(generate_synthetic(spec), (0.7,0.15,0.15), seed=seed))
    test = ds.split_records("test")
    model = build_guesser(ds.schema, 2, np.random.default_rng(seed), hidden=(64,64))
    model, _ = pretrain(model, ds, PretrainConfig(epochs=30, lr=3e-3, p_adv_end=0.2, seed=seed))
    env = AcquisitionEnv(ds.schema, model, EnvConfig(budget=5.0))
    r = evaluate_policy(RandomPolicy(seed=seed), env, test, n_boot=0).aggregates["mean_prob_correct"]
    o = oracle_policy_value(model, test, budget=5.0).mean_prob_correct
    t0 = time.time()
    pair, _ = train_agent(env, ds.split_records("train"),
                          TrainConfig(seed=seed, episodes=episodes, lr=7e-4, sync_interval=300,
                                      eps_decay_frac=eps_frac))
    a = evaluate_policy(QPolicy(pair.online), env, test, n_boot=0).aggregates["mean_prob_correct"]
    target = (r+o)/2
    print(f"  seed={seed}: rand={r:.4f} oracle={o:.4f} target={target:.4f} agent={a:.4f} "
          f"margin={a-target:+.4f} ok={a>=target} ({time.time()-t0:.0f}s)")
    return a >= target

print("equal weights (5,5,5,5,5), 6000 eps:")
wins = sum(run_seed(s, 6000, (5.0,5.0,5.0,5.0,5.0)) for s in range(3))
print("wins:", wins, "/3")
