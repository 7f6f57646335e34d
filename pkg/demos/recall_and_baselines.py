"""Walkthrough: the recall metric and what random retrieval looks like.

Builds a small score matrix by hand, ranks each query's candidates, and
reads off recall at increasing cutoffs. Then compares the analytic random
baseline 100*k/N with a Monte-Carlo simulation at the scale where one true
report hides among 994 candidates.
"""

import numpy as np

from xmrbench.bench import random_baseline_analytic, random_baseline_monte_carlo
from xmrbench.scoring import rank_reports, recall_at_k


def main():
    rng = np.random.default_rng(0)
    n_queries, n_reports = 8, 12
    report_ids = [f"r{j}" for j in range(n_reports)]

    # scores with a planted signal: the true report gets a bump
    scores = rng.random((n_queries, n_reports))
    truth = {f"q{i}": report_ids[i] for i in range(n_queries)}
    for i in range(n_queries):
        scores[i, i] += 0.35

    rankings = [rank_reports(scores[i], report_ids) for i in range(n_queries)]
    print("per-query rank of the true report:",
          [r.index(truth[f"q{i}"]) + 1 for i, r in enumerate(rankings)])
    for k in (1, 2, 3, 5, 12):
        value = recall_at_k(rankings, truth, k, query_ids=list(truth))
        print(f"recall@{k:<2d} = {value:6.2f}%")

    print("\nuniform-random retrieval, N=994 candidates:")
    print(f"{'k':>4}  {'analytic':>9}  {'monte-carlo':>11}  {'stderr':>7}")
    for k in (5, 10, 20, 30, 50, 100):
        analytic = random_baseline_analytic(994, k)
        mc, stderr = random_baseline_monte_carlo(994, k, n_queries=1770, trials=60, seed=k)
        print(f"{k:4d}  {analytic:8.4f}%  {mc:10.4f}%  {stderr:7.4f}")


if __name__ == "__main__":
    main()
