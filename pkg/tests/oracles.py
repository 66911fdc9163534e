"""Independent brute-force references used by the solver tests."""
from itertools import combinations

import numpy as np


def projection_residual(x, atoms, subset):
    sub = atoms[:, list(subset)]
    w, *_ = np.linalg.lstsq(sub, x, rcond=None)
    return x - sub @ w


def greedy_projection(x, atoms, k):
    """Grow the support one atom at a time, trying every candidate by full projection."""
    support: list[int] = []
    norms = [float(np.linalg.norm(x))]
    for _ in range(k):
        best, best_norm = None, np.inf
        for j in range(atoms.shape[1]):
            if j in support:
                continue
            norm = float(np.linalg.norm(projection_residual(x, atoms, support + [j])))
            if norm < best_norm - 1e-12:
                best, best_norm = j, norm
        if best is None:
            break
        support.append(best)
        norms.append(best_norm)
    return support, norms


def best_subset(x, atoms, k):
    return min(float(np.linalg.norm(projection_residual(x, atoms, s)))
               for s in combinations(range(atoms.shape[1]), k))


def unit_columns(rng, n, m):
    a = rng.standard_normal((n, m))
    a -= a.mean(axis=0)
    return a / np.linalg.norm(a, axis=0)


def zero_mean(rng, n):
    x = rng.standard_normal(n)
    return x - x.mean()
