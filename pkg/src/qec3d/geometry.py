"""Cubic-lattice geometry for the 3D toric code in the dual convention.

Qubits live on the faces of an L x L x L periodic cubic lattice, Z checks on
its edges and X stabilizers on its cells.  A face supports an X error that is
detected by the Z checks on its four boundary edges; a cell's six faces form
an X stabilizer generator.

Indexing.  Faces and edges carry an axis (the face normal, respectively the
edge direction) and a position (i, j, k), each coordinate in [0, L).  The flat
encoding is axis-major::

    face/edge index = axis * L^3 + i * L^2 + j * L + k      (axis in {x=0, y=1, z=2})
    cell index      = i * L^2 + j * L + k

Orientation convention.  For axis a the transverse axes are taken cyclically,
(b, c) = ((a + 1) % 3, (a + 2) % 3).  The face with normal a at position u is
bounded by the four edges::

    b @ u,   b @ u + e_c,   c @ u,   c @ u + e_b

where e_x, e_y, e_z are the unit steps (coordinates wrap mod L).  Dually, the
edge with direction d at u borders the four faces ``a @ u`` and ``a @ u - e_t``
for each axis a != d, with t the remaining axis.  The cell at u owns the faces
``a @ u`` and ``a @ u + e_a`` for each axis.  All incidence lists are stored in
these fixed orders, so rebuilt geometries are bit-identical.
"""

from __future__ import annotations

import numpy as np

AXES = "xyz"

__all__ = [
    "AXES",
    "LatticeGeometry",
    "build_lattice",
    "syndrome_of",
    "logical_z_reps",
    "logical_x_membrane",
    "is_stabilizer_equivalent",
    "dump_incidence",
]


def _axis_number(axis):
    if isinstance(axis, str):
        try:
            return AXES.index(axis)
        except ValueError:
            raise ValueError(f"axis must be one of 'x', 'y', 'z', got {axis!r}") from None
    axis = np.asarray(axis)
    if not np.isin(axis, (0, 1, 2)).all():
        raise ValueError(f"axis must be in {{0, 1, 2}}, got {axis!r}")
    return axis[()] if axis.ndim == 0 else axis


class LatticeGeometry:
    """Incidence maps of the L x L x L periodic lattice.

    Instances are immutable after construction (all arrays are marked
    read-only), so a single geometry can be shared freely across threads and
    worker processes.

    Attributes
    ----------
    L : int
        Linear size.
    n_faces, n_edges, n_cells : int
        3L^3 qubits, 3L^3 Z checks, L^3 X stabilizers.
    face_edges : (n_faces, 4) int32
        Boundary edges of each face.
    edge_faces : (n_edges, 4) int32
        Faces bordered by each edge.
    cell_faces : (n_cells, 6) int32
        Faces of each X stabilizer cell.
    """

    def __init__(self, L: int):
        if L < 3:
            raise ValueError(
                f"lattice size must be at least 3 (got L={L}); smaller sizes "
                "produce duplicate entries in the periodic incidence lists"
            )
        self.L = int(L)
        L3 = self.L**3
        self.n_faces = 3 * L3
        self.n_edges = 3 * L3
        self.n_cells = L3
        self.face_edges = self._build_face_edges()
        self.edge_faces = self._build_edge_faces()
        self.cell_faces = self._build_cell_faces()
        self._z_reps: dict[int, np.ndarray] = {}
        for arr in (self.face_edges, self.edge_faces, self.cell_faces):
            arr.setflags(write=False)

    # -- index arithmetic ---------------------------------------------------

    def flat(self, i, j, k):
        """Position part of an index, coordinates wrapped mod L."""
        L = self.L
        return ((np.asarray(i) % L) * L + np.asarray(j) % L) * L + np.asarray(k) % L

    def face(self, axis, i, j, k):
        return _axis_number(axis) * self.L**3 + self.flat(i, j, k)

    def edge(self, axis, i, j, k):
        return _axis_number(axis) * self.L**3 + self.flat(i, j, k)

    def cell(self, i, j, k):
        return self.flat(i, j, k)

    def coords(self, index):
        """Inverse of the flat face/edge encoding: (axis, i, j, k)."""
        L = self.L
        index = np.asarray(index)
        axis, rest = divmod(index, L**3)
        i, rest = divmod(rest, L**2)
        j, k = divmod(rest, L)
        return axis, i, j, k

    # -- incidence construction ---------------------------------------------

    def _grids(self):
        r = np.arange(self.L)
        return np.meshgrid(r, r, r, indexing="ij")

    def _build_face_edges(self) -> np.ndarray:
        L3 = self.L**3
        i, j, k = self._grids()
        out = np.empty((3 * L3, 4), dtype=np.int32)
        for a in range(3):
            b, c = (a + 1) % 3, (a + 2) % 3
            u = [i.copy(), j.copy(), k.copy()]
            u_c = [x.copy() for x in u]
            u_c[c] += 1
            u_b = [x.copy() for x in u]
            u_b[b] += 1
            rows = out[a * L3 : (a + 1) * L3].reshape(self.L, self.L, self.L, 4)
            rows[..., 0] = b * L3 + self.flat(*u)
            rows[..., 1] = b * L3 + self.flat(*u_c)
            rows[..., 2] = c * L3 + self.flat(*u)
            rows[..., 3] = c * L3 + self.flat(*u_b)
        return out

    def _build_edge_faces(self) -> np.ndarray:
        L3 = self.L**3
        i, j, k = self._grids()
        out = np.empty((3 * L3, 4), dtype=np.int32)
        for d in range(3):
            others = [a for a in range(3) if a != d]
            rows = out[d * L3 : (d + 1) * L3].reshape(self.L, self.L, self.L, 4)
            col = 0
            for a in others:
                t = 3 - a - d
                u = [i, j, k]
                u_t = [x.copy() for x in u]
                u_t[t] -= 1
                rows[..., col] = a * L3 + self.flat(*u)
                rows[..., col + 1] = a * L3 + self.flat(*u_t)
                col += 2
        return out

    def _build_cell_faces(self) -> np.ndarray:
        L3 = self.L**3
        i, j, k = self._grids()
        out = np.empty((L3, 6), dtype=np.int32)
        rows = out.reshape(self.L, self.L, self.L, 6)
        for a in range(3):
            u = [i, j, k]
            u_a = [x.copy() for x in u]
            u_a[a] += 1
            rows[..., 2 * a] = a * L3 + self.flat(*u)
            rows[..., 2 * a + 1] = a * L3 + self.flat(*u_a)
        return out

    # -- logical operators ----------------------------------------------------

    def z_reps(self, axis) -> np.ndarray:
        """Disjoint logical-Z representatives for one axis, shape (L^2, L).

        Row t is a line of L faces with normal `axis`, one per value of the
        axis coordinate, at the t-th transverse position.  The L^2 rows
        partition all faces with that normal.
        """
        a = _axis_number(axis)
        if a not in self._z_reps:
            L = self.L
            m = np.arange(L)
            tb, tc = np.meshgrid(np.arange(L), np.arange(L), indexing="ij")
            b, c = (a + 1) % 3, (a + 2) % 3
            pos = [None, None, None]
            pos[a] = m[None, :]
            pos[b] = tb.reshape(-1, 1)
            pos[c] = tc.reshape(-1, 1)
            reps = self.face(a, pos[0], pos[1], pos[2]).astype(np.int32)
            reps.setflags(write=False)
            self._z_reps[a] = reps
        return self._z_reps[a]


def build_lattice(L: int) -> LatticeGeometry:
    """Construct the lattice geometry for linear size L (L >= 3)."""
    return LatticeGeometry(L)


def _check_domain(g: LatticeGeometry, config: np.ndarray, n_expected: int, what: str) -> np.ndarray:
    config = np.asarray(config)
    if config.shape[-1] != n_expected:
        raise ValueError(
            f"{what} must have last dimension {n_expected}, got shape {config.shape}"
        )
    return config.astype(np.uint8, copy=False)


def syndrome_of(g: LatticeGeometry, error: np.ndarray) -> np.ndarray:
    """Z-check syndrome of an X error pattern over faces.

    Edge e is violated iff an odd number of its four bordering faces carry an
    error.  The map is linear over XOR.  `error` may carry leading batch
    dimensions; the syndrome has the same leading shape over edges.
    """
    error = _check_domain(g, error, g.n_faces, "error config (faces)")
    return np.bitwise_xor.reduce(error[..., g.edge_faces], axis=-1)


def logical_z_reps(g: LatticeGeometry, axis) -> np.ndarray:
    """Complete set of L^2 disjoint logical-Z representatives (face index rows)."""
    return g.z_reps(axis)


def logical_x_membrane(g: LatticeGeometry, axis, offset: int = 0) -> np.ndarray:
    """Face set of one logical-X membrane: all faces with normal `axis` whose
    axis coordinate equals `offset` (L^2 faces)."""
    a = _axis_number(axis)
    b, c = (a + 1) % 3, (a + 2) % 3
    tb, tc = np.meshgrid(np.arange(g.L), np.arange(g.L), indexing="ij")
    pos = [None, None, None]
    pos[a] = np.full_like(tb, offset)
    pos[b] = tb
    pos[c] = tc
    return g.face(a, pos[0], pos[1], pos[2]).astype(np.int32).ravel()


def is_stabilizer_equivalent(g: LatticeGeometry, e1: np.ndarray, e2: np.ndarray) -> bool:
    """True iff the two face configs differ by a product of X stabilizers.

    Checks that e1 XOR e2 has empty syndrome and even overlap with one
    logical-Z representative per axis.
    """
    e1 = _check_domain(g, e1, g.n_faces, "error config (faces)")
    e2 = _check_domain(g, e2, g.n_faces, "error config (faces)")
    diff = e1 ^ e2
    if syndrome_of(g, diff).any():
        return False
    for a in range(3):
        rep = g.z_reps(a)[0]
        if int(diff[..., rep].sum()) % 2:
            return False
    return True


def dump_incidence(g: LatticeGeometry) -> str:
    """Text dump of the face incidence, one line per face:
    ``face <axis> <i> <j> <k>: <4 edge ids>``."""
    axis, i, j, k = g.coords(np.arange(g.n_faces))
    lines = []
    for f in range(g.n_faces):
        edges = " ".join(str(e) for e in g.face_edges[f])
        lines.append(f"face {AXES[axis[f]]} {i[f]} {j[f]} {k[f]}: {edges}")
    return "\n".join(lines) + "\n"
