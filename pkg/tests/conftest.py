"""Shared generators for randomized suites.

Agents are built to satisfy the synthesis assumptions by construction:
block-diagonal of skew-similar marginal blocks (distinct frequencies,
optionally one integrator) and a random Hurwitz block, conjugated by a
random well-conditioned similarity. Output/input maps are redrawn until
the PBH checks pass, then asserted.
"""

import numpy as np
import pytest
import scipy.linalg as sla

from netsync import LinearAgent, is_detectable, is_stabilizable


def well_conditioned_similarity(rng, n):
    """Random invertible T with singular values in [0.6, 1.6]."""
    q1 = np.linalg.qr(rng.normal(size=(n, n)))[0]
    q2 = np.linalg.qr(rng.normal(size=(n, n)))[0]
    return q1 @ np.diag(rng.uniform(0.6, 1.6, size=n)) @ q2.T


def _distinct_frequencies(rng, count, low=0.3, high=3.0, gap=0.05):
    freqs = []
    while len(freqs) < count:
        w = rng.uniform(low, high)
        if all(abs(w - f) > gap for f in freqs):
            freqs.append(w)
    return freqs


def random_marginal_block(rng, freq):
    """2x2 skew-similar block: diag-conjugated rotation at ``freq``."""
    d = rng.uniform(0.5, 2.0, size=2)
    rot = np.array([[0.0, freq], [-freq, 0.0]])
    return np.diag(d) @ rot @ np.diag(1.0 / d)


def random_hurwitz_block(rng, n2):
    g = rng.normal(size=(n2, n2))
    shift = np.max(np.linalg.eigvals(g).real) + rng.uniform(0.2, 1.5)
    return g - shift * np.eye(n2)


def random_agent(seed, n_max=6):
    """Seeded agent with both C and B, assumptions holding by construction."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, n_max + 1))
    k = int(rng.integers(0, n // 2 + 1))
    z = int(rng.random() < 0.35) if 2 * k < n else 0
    n1 = 2 * k + z
    n2 = n - n1

    blocks = [random_marginal_block(rng, w) for w in _distinct_frequencies(rng, k)]
    if z:
        blocks.append(np.zeros((1, 1)))
    if n2:
        blocks.append(random_hurwitz_block(rng, n2))
    a0 = sla.block_diag(*blocks)
    t = well_conditioned_similarity(rng, n)
    a = t @ a0 @ np.linalg.inv(t)

    m = int(rng.integers(1, min(2, n) + 1))
    for _ in range(50):
        c = rng.normal(size=(m, n))
        if is_detectable(c, a):
            break
    else:
        raise RuntimeError(f"seed {seed}: could not draw a detectable C")
    for _ in range(50):
        b = rng.normal(size=(n, m))
        if is_stabilizable(a, b):
            break
    else:
        raise RuntimeError(f"seed {seed}: could not draw a stabilizable B")
    return LinearAgent(A=a, C=c, B=b)


def random_skew_pair(seed, n_max=4):
    """Seeded (S, H) with S skew-symmetric and (H, S) observable."""
    from netsync import is_observable

    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, n_max + 1))
    g = rng.normal(size=(n, n))
    s = 0.5 * (g - g.T)
    m = int(rng.integers(1, 3))
    for _ in range(50):
        h = rng.normal(size=(m, n))
        if is_observable(h, s):
            return s, h
    raise RuntimeError(f"seed {seed}: could not draw an observable H")


@pytest.fixture
def agent_factory():
    return random_agent


@pytest.fixture
def skew_pair_factory():
    return random_skew_pair
