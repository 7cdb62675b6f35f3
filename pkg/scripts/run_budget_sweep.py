#!/usr/bin/env python3
"""Budget sweep on synthetic data: train one selector per budget, tabulate.

Reproduces the more-budget-more-accuracy trend with a plateau once the
budget exceeds the total feature cost.
"""

import argparse

import numpy as np

from featacq.agent import QPolicy, TrainConfig, train_agent
from featacq.data import SyntheticSpec, generate_synthetic, split, standardize
from featacq.env import AcquisitionEnv, EnvConfig
from featacq.evaluation import budget_sweep
from featacq.guesser import PretrainConfig, build_guesser, pretrain


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--budgets", type=float, nargs="+", default=[1, 2, 4, 6, 10, 12])
    ap.add_argument("--episodes", type=int, default=2500)
    ap.add_argument("--samples", type=int, default=2500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    spec = SyntheticSpec(
        n_features=9,
        informative=(1, 2, 3, 4, 5),
        weights=(6.0, -5.0, 4.5, -4.0, 3.5),
        n_samples=args.samples,
        seed=args.seed,
        n_free=1,
    )
    ds = standardize(split(generate_synthetic(spec), (0.7, 0.15, 0.15), seed=args.seed))
    model = build_guesser(ds.schema, 2, np.random.default_rng(args.seed), hidden=(64, 64))
    model, _ = pretrain(
        model, ds, PretrainConfig(epochs=30, lr=3e-3, p_adv_end=0.2, seed=args.seed)
    )
    total_cost = sum(f.cost for f in ds.schema.features)
    print(f"total feature cost: {total_cost}")

    def make_env(budget):
        return AcquisitionEnv(ds.schema, model, EnvConfig(budget=budget))

    def train_fn(budget):
        pair, _ = train_agent(
            make_env(budget),
            ds.split_records("train"),
            TrainConfig(episodes=args.episodes, lr=7e-4, sync_interval=300, seed=args.seed),
        )
        return QPolicy(pair.online)

    rows = budget_sweep(
        train_fn, sorted(args.budgets), ds.split_records("test"), make_env, n_boot=400, seed=args.seed
    )
    print(f"\n{'budget':>8} {'accuracy':>9} {'ci':>18} {'auroc':>7} {'cost':>6} {'iou':>6}")
    for r in rows:
        lo, hi = r["accuracy_ci"]
        print(
            f"{r['budget']:>8.1f} {r['accuracy']:>9.4f} [{lo:.4f}, {hi:.4f}] "
            f"{r['auroc']:>7.4f} {r['mean_cost']:>6.2f} {r['iou']:>6.3f}"
        )


if __name__ == "__main__":
    main()
