"""Metrics, policy evaluation, the exhaustive subset oracle, budget sweeps.

The selection-overlap score divides the feature set common to all patients
by the union of all selected sets; free features count as selected for
everyone, so low values indicate per-patient personalization.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .agent import rollout
from .guesser import build_slots


class UndefinedMetricError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def auroc(scores, labels):
    """Rank-based AUROC, equal to the Mann-Whitney statistic; ties count 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise UndefinedMetricError("both classes required for AUROC")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum = ranks[labels == 1].sum()
    u = rank_sum - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))


def auprc(scores, labels):
    """Average precision with step-wise interpolation at each positive."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    if n_pos == 0:
        raise UndefinedMetricError("at least one positive required for AUPRC")
    # walk thresholds at distinct score values, descending
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = labels[order]
    ap = 0.0
    tp = 0
    seen = 0
    prev_recall = 0.0
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[j + 1] == s[i]:
            j += 1
        tp += int((y[i : j + 1] == 1).sum())
        seen = j + 1
        recall = tp / n_pos
        precision = tp / seen
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return float(ap)


def iou(selected_sets):
    """|intersection| / |union| of per-patient selected feature sets."""
    sets = [set(s) for s in selected_sets]
    if not sets:
        raise UndefinedMetricError("at least one patient required")
    union = set().union(*sets)
    if not union:
        return 1.0
    common = set(sets[0]).intersection(*sets[1:])
    return len(common) / len(union)


def accuracy(probs, labels):
    preds = np.argmax(np.asarray(probs), axis=1)
    return float(np.mean(preds == np.asarray(labels)))


def bootstrap_ci(values, stat_fn, n_boot=1000, level=0.95, seed=0):
    """Percentile bootstrap of stat_fn over patient-level resamples."""
    rng = np.random.default_rng(seed)
    values = list(values)
    n = len(values)
    stats = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n, size=n)
        stats[b] = stat_fn([values[i] for i in idx])
    lo = (1 - level) / 2
    return float(np.quantile(stats, lo)), float(np.quantile(stats, 1 - lo))


# ---------------------------------------------------------------------------
# Policy evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvalReport:
    per_patient: list  # {id, label, probs, selected, cost}
    aggregates: dict
    cis: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    traces: list = field(default_factory=list)  # per-step episode records

    def to_doc(self):
        return {
            "per_patient": self.per_patient,
            "aggregates": self.aggregates,
            "cis": self.cis,
            "config": self.config,
        }

    def to_json(self):
        return json.dumps(self.to_doc(), indent=2)

    def flat_rows(self):
        """Per-patient flat table for plotting."""
        rows = []
        for p in self.per_patient:
            rows.append(
                {
                    "id": p["id"],
                    "label": p["label"],
                    "pred": int(np.argmax(p["probs"])),
                    "prob_label": p["probs"][p["label"]],
                    "cost": p["cost"],
                    "n_selected": len(p["selected"]),
                }
            )
        return rows


def aggregate_records(per_patient, n_classes):
    labels = [p["label"] for p in per_patient]
    probs = np.array([p["probs"] for p in per_patient])
    out = {
        "accuracy": accuracy(probs, labels),
        "mean_cost": float(np.mean([p["cost"] for p in per_patient])),
        "iou": iou([p["selected"] for p in per_patient]),
        "mean_prob_correct": float(np.mean([p["probs"][p["label"]] for p in per_patient])),
    }
    if n_classes == 2 and len(set(labels)) == 2:
        scores = probs[:, 1]
        out["auroc"] = auroc(scores, labels)
        out["auprc"] = auprc(scores, labels)
    else:
        out["auroc"] = None
        out["auprc"] = None
    return out


def evaluate_policy(policy, env, records, n_boot=1000, level=0.95, seed=0, keep_traces=False):
    """One greedy episode per patient; aggregates plus bootstrap CIs."""
    per_patient = []
    traces = []
    for patient in records:
        ep, _, trace = rollout(env, patient, policy)
        if keep_traces:
            traces.extend(trace)
        selected = [
            env.schema.features[j].name
            for j in range(env.schema.d)
            if ep.state.mask[j] == 1.0
        ]
        per_patient.append(
            {
                "id": patient.id,
                "label": patient.label,
                "probs": [float(v) for v in ep.probs],
                "selected": selected,
                "cost": float(ep.spent),
                "steps": ep.step_count,
            }
        )
    n_classes = env.guesser.n_classes
    aggregates = aggregate_records(per_patient, n_classes)
    cis = {}
    if n_boot:
        def make_stat(key):
            def stat(sample):
                agg = aggregate_records(sample, n_classes)
                v = agg[key]
                return np.nan if v is None else v

            return stat

        for key in ("accuracy", "mean_cost", "mean_prob_correct"):
            cis[key] = bootstrap_ci(per_patient, make_stat(key), n_boot, level, seed)
        if aggregates["auroc"] is not None:
            cis["auroc"] = bootstrap_ci(per_patient, make_stat("auroc"), n_boot, level, seed)
    return EvalReport(
        per_patient=per_patient,
        aggregates=aggregates,
        cis=cis,
        config={"n_boot": n_boot, "level": level, "seed": seed, "budget": env.config.budget},
        traces=traces,
    )


# ---------------------------------------------------------------------------
# Exhaustive subset oracle
# ---------------------------------------------------------------------------


@dataclass
class OracleResult:
    per_patient: list  # {id, best_subset, prob_correct}
    mean_prob_correct: float


def oracle_policy_value(guesser, records, budget, d_limit=16):
    """Best budget-feasible subset per patient, scored with label knowledge.

    Dominates any sequential policy's per-patient correct-label probability,
    so it serves as an upper bound. Exponential in paid features; refuses
    above d_limit.
    """
    schema = guesser.schema
    paid = list(schema.paid_indices)
    if len(paid) > d_limit:
        raise ValueError(f"{len(paid)} paid features exceeds enumeration limit {d_limit}")
    free_mask = np.array([1.0 if f.free else 0.0 for f in schema.features])
    out = []
    for patient in records:
        slots, present, _ = build_slots(guesser, patient)
        avail = [j for j in paid if present[j] == 1.0]
        masks = []
        subsets = []
        for r in range(len(avail) + 1):
            for combo in itertools.combinations(avail, r):
                cost = sum(schema.features[j].cost for j in combo)
                if cost > budget:
                    continue
                m = free_mask.copy()
                for j in combo:
                    m[j] = 1.0
                masks.append(m * present)
                subsets.append(combo)
        probs = guesser.predict_proba_batch(
            np.broadcast_to(slots, (len(masks), slots.size)), np.stack(masks)
        )
        correct = probs[:, patient.label]
        best = int(np.argmax(correct))
        out.append(
            {
                "id": patient.id,
                "best_subset": [schema.features[j].name for j in subsets[best]],
                "prob_correct": float(correct[best]),
            }
        )
    return OracleResult(
        per_patient=out,
        mean_prob_correct=float(np.mean([p["prob_correct"] for p in out])),
    )


# ---------------------------------------------------------------------------
# Budget sweep
# ---------------------------------------------------------------------------


def budget_sweep(train_fn, budgets, eval_records, make_env, n_boot=500, seed=0):
    """Train and evaluate one policy per budget with shared seeds.

    train_fn(budget) -> policy; make_env(budget) -> evaluation environment.
    Budgets must be ascending. Returns one row per budget.
    """
    if list(budgets) != sorted(budgets):
        raise ValueError("budgets must be sorted ascending")
    rows = []
    for budget in budgets:
        policy = train_fn(budget)
        env = make_env(budget)
        report = evaluate_policy(policy, env, eval_records, n_boot=n_boot, seed=seed)
        rows.append(
            {
                "budget": budget,
                "accuracy": report.aggregates["accuracy"],
                "accuracy_ci": report.cis.get("accuracy"),
                "auroc": report.aggregates["auroc"],
                "mean_cost": report.aggregates["mean_cost"],
                "iou": report.aggregates["iou"],
            }
        )
    return rows
