import time
import numpy as np
from featacq.agent import QPolicy, RandomPolicy, TrainConfig, train_agent
from featacq.data import SyntheticSpec, generate_synthetic, split, standardize
from featacq.env import AcquisitionEnv, EnvConfig
from featacq.evaluation import evaluate_policy, oracle_policy_value
from featacq.guesser import PretrainConfig, build_guesser, pretrain

def run_seed(seed, episodes=2500, n=2000, epochs=25):
    t0 = time.time()
    spec = SyntheticSpec(
        n_features=9,  # 1 free noise + 8 paid (5 informative, 3 noise)
        informative=(1, 2, 3, 4, 5),
        weights=(4.0, -3.5, 3.0, -2.5, 2.0),
        n_samples=n,
        seed=seed,
        n_free=1,
    )
    ds = standardize(split(generate_synthetic(spec), (0.7, 0.15, 0.15), seed=seed))
    model = build_guesser(ds.schema, 2, np.random.default_rng(seed), hidden=(64, 64))
    model, _ = pretrain(model, ds, PretrainConfig(epochs=epochs, lr=3e-3, seed=seed))
    t1 = time.time()
    env = AcquisitionEnv(ds.schema, model, EnvConfig(budget=5.0))
    cfg = TrainConfig(episodes=episodes, seed=seed)
    pair, curve = train_agent(env, ds.split_records("train"), cfg)
    t2 = time.time()
    test = ds.split_records("test")
    agent_rep = evaluate_policy(QPolicy(pair.online), env, test, n_boot=0)
    rand_rep = evaluate_policy(RandomPolicy(seed=seed), env, test, n_boot=0)
    oracle = oracle_policy_value(model, test, budget=5.0)
    t3 = time.time()
    a = agent_rep.aggregates["mean_prob_correct"]
    r = rand_rep.aggregates["mean_prob_correct"]
    o = oracle.mean_prob_correct
    ok = a >= r + 0.5 * (o - r)
    print(f"seed={seed} agent={a:.4f} random={r:.4f} oracle={o:.4f} "
          f"target={r + 0.5*(o-r):.4f} ok={ok} "
          f"[pre {t1-t0:.0f}s train {t2-t1:.0f}s eval {t3-t2:.0f}s]")
    return ok

wins = sum(run_seed(s) for s in range(5))
print("wins:", wins, "/5")
