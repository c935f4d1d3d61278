"""Reference implementations used only by the tests.

They take routes independent of the package: Euler's pentagonal
recurrence, brute-force enumeration, an explicit zeta series and direct
summation over the level lattice.
"""

import math
from functools import lru_cache

import numpy as np


def pentagonal_partitions(n_max):
    """p(0..n_max) by Euler's pentagonal-number recurrence."""
    p = [1] + [0] * n_max
    for n in range(1, n_max + 1):
        total = 0
        j = 1
        while True:
            g1 = j * (3 * j - 1) // 2
            if g1 > n:
                break
            sign = 1 if j % 2 else -1
            total += sign * p[n - g1]
            g2 = j * (3 * j + 1) // 2
            if g2 <= n:
                total += sign * p[n - g2]
            j += 1
        p[n] = total
    return p


def partitions_of(n, largest=None):
    """All partitions of n as non-increasing tuples."""
    if largest is None:
        largest = n
    if n == 0:
        return [()]
    out = []
    for first in range(min(n, largest), 0, -1):
        for rest in partitions_of(n - first, first):
            out.append((first,) + rest)
    return out


@lru_cache(maxsize=None)
def enumerated_counts(n):
    """{k: p_k(n)} from explicit enumeration."""
    counts = {}
    for p in partitions_of(n):
        counts[len(p)] = counts.get(len(p), 0) + 1
    return counts


def zeta_series(s, terms=10**6):
    """zeta(s) as a partial sum of ``terms`` terms plus the Euler-Maclaurin tail."""
    j = np.arange(1, terms, dtype=float)
    head = math.fsum(j ** -s)
    N = float(terms)
    tail = (N ** (1 - s) / (s - 1) + 0.5 * N ** -s + s * N ** (-s - 1) / 12
            - s * (s + 1) * (s + 2) * N ** (-s - 3) / 720)
    return head + tail


def bose_series(alpha, terms=10**6):
    """alpha Gamma(1 + alpha) zeta(1 + alpha) via the explicit series."""
    return alpha * math.gamma(1 + alpha) * zeta_series(1 + alpha, terms)


def dct1_matrix(s):
    """Orthonormal type-I cosine matrix built element by element."""
    w = np.ones(s + 1)
    w[0] = w[-1] = 1 / math.sqrt(2)
    i = np.arange(s + 1)
    m = np.cos(np.pi * np.outer(i, i) / s) * np.outer(w, w)
    return m * math.sqrt(2 / s)
