"""Named low-weight error patterns used by tests, demos and the CLI.

All patterns sit at an arbitrary cell of the lattice (default the origin) and
are returned as 0/1 face configs.

* half-cube: X errors on three faces of one cell that meet at a corner.  Each
  errored face sees two satisfied and two unsatisfied checks, so the
  deterministic flip rule is stuck; the syndrome is a closed 6-edge loop.
* planar square: a 2x2 block of coplanar faces.  Again every errored face is
  balanced (2 sat / 2 unsat) and flip is stuck on the 8-edge perimeter loop.
* oscillating pair: two weight-3 configurations (two parallel faces of a cell
  plus one side face) that parallel flip maps onto each other, period 2.
* half-cube plus one: the half-cube with a fourth face of the same cell in
  error, which breaks the tie and makes the error correctable.
"""

from __future__ import annotations

import numpy as np

from qec3d.geometry import LatticeGeometry, _axis_number

__all__ = [
    "half_cube",
    "planar_square",
    "oscillating_pair",
    "half_cube_plus_one",
    "FIXTURES",
    "fixture_error",
]


def _blank(g: LatticeGeometry) -> np.ndarray:
    return np.zeros(g.n_faces, dtype=np.uint8)


def half_cube(g: LatticeGeometry, cell=(0, 0, 0)) -> np.ndarray:
    """Three faces of one cell meeting at its far corner."""
    i, j, k = cell
    err = _blank(g)
    err[g.face("x", i + 1, j, k)] = 1
    err[g.face("y", i, j + 1, k)] = 1
    err[g.face("z", i, j, k + 1)] = 1
    return err


def planar_square(g: LatticeGeometry, corner=(0, 0, 0), normal="z") -> np.ndarray:
    """2x2 block of coplanar faces with the given normal."""
    a = _axis_number(normal)
    b, c = (a + 1) % 3, (a + 2) % 3
    err = _blank(g)
    for db in (0, 1):
        for dc in (0, 1):
            pos = list(corner)
            pos[b] += db
            pos[c] += dc
            err[g.face(a, *pos)] = 1
    return err


def oscillating_pair(g: LatticeGeometry, cell=(0, 0, 0)) -> tuple[np.ndarray, np.ndarray]:
    """The two weight-3 errors exchanged by parallel flip.

    Configuration A: the cell's two z-normal faces plus its far y-normal face.
    Configuration B: the two x-normal faces plus the same y-normal face.
    """
    i, j, k = cell
    a = _blank(g)
    a[g.face("z", i, j, k)] = 1
    a[g.face("z", i, j, k + 1)] = 1
    a[g.face("y", i, j + 1, k)] = 1
    b = _blank(g)
    b[g.face("x", i, j, k)] = 1
    b[g.face("x", i + 1, j, k)] = 1
    b[g.face("y", i, j + 1, k)] = 1
    return a, b


def half_cube_plus_one(g: LatticeGeometry, cell=(0, 0, 0)) -> np.ndarray:
    """Half-cube with a fourth face of the same cell in error (tie broken)."""
    i, j, k = cell
    err = half_cube(g, cell)
    err[g.face("z", i, j, k)] = 1
    return err


FIXTURES = {
    "fig3a": half_cube,
    "fig3b": planar_square,
    "fig5": lambda g, cell=(0, 0, 0): oscillating_pair(g, cell)[0],
    "halfcube-plus-one": half_cube_plus_one,
}


def fixture_error(name: str, g: LatticeGeometry) -> np.ndarray:
    """Materialize a named fixture on the given geometry."""
    try:
        builder = FIXTURES[name]
    except KeyError:
        raise ValueError(
            f"unknown fixture {name!r}; available: {', '.join(sorted(FIXTURES))}"
        ) from None
    return builder(g)
