"""Linear-Gaussian structural equation models on random DAGs."""

from __future__ import annotations

import numpy as np

from ._rng import make_rng
from .graph import PDAG, bits, random_dag, topological_order
from .scoring import DataMatrix


def sem_sample(dag: PDAG, N: int, rng, coef_range=(0.5, 2.0), weights=None) -> tuple[DataMatrix, np.ndarray]:
    """Draw ``N`` observations of ``x_v = sum_u w_uv x_u + e_v`` with unit Gaussian noise."""
    n = dag.n
    if weights is None:
        lo, hi = coef_range
        weights = np.zeros((n, n))
        for v in range(n):
            for u in bits(dag.pa[v]):
                weights[u, v] = rng.uniform(lo, hi)
    x = np.zeros((N, n))
    for v in topological_order(dag):
        x[:, v] = x @ weights[:, v] + rng.standard_normal(N)
    return DataMatrix(x, [f"X{v}" for v in range(n)]), weights


def synthetic_dataset(n: int, N: int, p: float = 0.3, seed=0, coef_range=(0.5, 2.0)):
    """Random DAG with edge probability ``p`` and data drawn from its SEM; returns ``(data, dag)``."""
    rng = make_rng(seed)
    dag = random_dag(n, p, rng)
    data, _ = sem_sample(dag, N, rng, coef_range)
    return data, dag
