import time
import numpy as np
from featacq.agent import QPolicy, RandomPolicy, TrainConfig, train_agent
from featacq.data import SyntheticSpec, generate_synthetic, split, standardize
from featacq.env import AcquisitionEnv, EnvConfig
from featacq.evaluation import evaluate_policy, oracle_policy_value
from featacq.guesser import PretrainConfig, build_guesser, pretrain

INFORMATIVE = {"f1","f2","f3","f4","f5"}

def run_seed(seed, episodes=10000):
    spec = SyntheticSpec(
        n_features=9, informative=(1,2,3,4,5), weights=(6.0,-5.0,4.5,-4.0,3.5),
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
                          TrainConfig(seed=seed, episodes=episodes, lr=7e-4, sync_interval=300))
    rep = evaluate_policy(QPolicy(pair.online), env, test, n_boot=0)
    a = rep.aggregates["mean_prob_correct"]
    inf_frac = np.mean([len(set(p["selected"]) & INFORMATIVE) for p in rep.per_patient])
    target = (r+o)/2
    print(f"seed={seed}: rand={r:.4f} oracle={o:.4f} target={target:.4f} agent={a:.4f} "
          f"margin={a-target:+.4f} inf_revealed={inf_frac:.2f}/5 ok={a>=target} ({time.time()-t0:.0f}s)")
    return a >= target

wins = sum(run_seed(s) for s in range(5))
print("wins:", wins, "/5")
