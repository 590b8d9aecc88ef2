"""Independent brute-force oracles used to derive expected test values.

These deliberately avoid the package's incidence-building code: faces and
edges are represented by their corner vertices on the wrapped lattice, and
incidence is decided by corner containment.
"""

from __future__ import annotations

import itertools

import numpy as np


def oracle_edge_corners(L, axis, i, j, k):
    u = np.array([i, j, k])
    step = np.zeros(3, dtype=int)
    step[axis] = 1
    return frozenset({tuple(u % L), tuple((u + step) % L)})


def oracle_face_corners(L, axis, i, j, k):
    u = np.array([i, j, k])
    b, c = (axis + 1) % 3, (axis + 2) % 3
    eb = np.zeros(3, dtype=int)
    eb[b] = 1
    ec = np.zeros(3, dtype=int)
    ec[c] = 1
    return frozenset(
        tuple(v % L) for v in (u, u + eb, u + ec, u + eb + ec)
    )


def oracle_face_boundary(L, axis, i, j, k):
    """All edges whose corners lie inside the face's corner set (4 for L>=3)."""
    corners = oracle_face_corners(L, axis, i, j, k)
    edges = set()
    for d in range(3):
        for ei, ej, ek in itertools.product(range(L), repeat=3):
            if oracle_edge_corners(L, d, ei, ej, ek) <= corners:
                edges.add(d * L**3 + ei * L**2 + ej * L + ek)
    return edges


def brute_marginals(check_vars, syndrome, p1):
    """Exact posterior marginals P(v=1) of a parity factor graph by enumeration.

    check_vars: list of variable-index lists, one per check.
    syndrome:   0/1 per check.
    p1:         prior error probability per variable.
    """
    n = len(p1)
    weights_total = 0.0
    weights_one = np.zeros(n)
    for bits in itertools.product((0, 1), repeat=n):
        x = np.array(bits)
        ok = all(
            int(x[list(vs)].sum()) % 2 == int(s)
            for vs, s in zip(check_vars, syndrome)
        )
        if not ok:
            continue
        w = float(np.prod(np.where(x == 1, p1, 1.0 - np.asarray(p1))))
        weights_total += w
        weights_one += w * x
    if weights_total == 0.0:
        raise ValueError("syndrome has no satisfying assignment")
    return weights_one / weights_total
