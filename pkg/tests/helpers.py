"""Independent oracles shared across test modules.

These deliberately avoid the library's union-find and fitting code paths.
"""

from collections import deque

import numpy as np


def flood_fill_labels(n, edges_a, edges_b):
    """BFS labeling; label = smallest member index (scan order guarantees it)."""
    adj = [[] for _ in range(n)]
    for a, b in zip(edges_a, edges_b):
        adj[int(a)].append(int(b))
        adj[int(b)].append(int(a))
    labels = np.full(n, -1, dtype=np.int64)
    for start in range(n):
        if labels[start] >= 0:
            continue
        labels[start] = start
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j in adj[i]:
                if labels[j] < 0:
                    labels[j] = start
                    queue.append(j)
    return labels


def sample_power_law_fragments(gen, tau, a_system, n_fragments):
    """IID fragment sizes with P(A) proportional to A^(-tau), A = 1..a_system."""
    a = np.arange(1, a_system + 1, dtype=np.float64)
    probs = a ** (-tau)
    probs /= probs.sum()
    return gen.choice(np.arange(1, a_system + 1), size=n_fragments, p=probs)


def multinomial_check(counts, probs, n_sigma=4.0, min_expected=1.0):
    """Per-bucket |observed - expected| <= n_sigma * binomial sigma.

    Buckets with expected count below min_expected are pooled into one.
    """
    counts = np.asarray(counts, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    n = counts.sum()
    expected = n * probs
    big = expected >= min_expected
    pooled_count = counts[~big].sum()
    pooled_p = probs[~big].sum()
    items = list(zip(counts[big], probs[big]))
    if pooled_p > 0:
        items.append((pooled_count, pooled_p))
    for c, p in items:
        sigma = np.sqrt(n * p * (1.0 - p))
        if sigma == 0:
            if c != n * p:
                return False
            continue
        if abs(c - n * p) > n_sigma * sigma:
            return False
    return True
