"""Syndrome belief propagation in the log-likelihood domain, plus p-BP.

The factor graph has one variable per qubit (face), one variable per check's
measurement outcome, and one factor per Z check: each factor touches its four
incident qubit variables and its own measurement variable, so qubit variables
have degree 4, measurement variables degree 1 and checks degree 5.  No
meta-check factors are used.

Message updates are plain sum-product with a flooding schedule.  With s_j the
syndrome bit of check j and l_i^0 the prior LLR of variable i::

    M_{f_j -> v_i} = (-1)^{s_j} * 2 * atanh( prod_{i' in dj\\i} tanh(M_{v_i' -> f_j} / 2) )
    M_{v_i -> f_j} = l_i^0 + sum_{j' in di\\j} M_{f_j' -> v_i}
    l_i            = l_i^0 + sum_{j in di} M_{f_j -> v_i}

All messages are clamped to [-CLAMP, CLAMP] and the tanh product is guarded
away from +-1 before atanh.  The algorithm always runs the requested number of
sweeps and then flips every qubit with l_i < 0; measurement-variable decisions
are computed but never applied to the syndrome (a config switch on the p-BP
composite can fold them into the flip tail's input).

Internally messages are stored slot-major, shape (check_degree, n_checks,
batch), so each sweep is a fixed sequence of contiguous vector operations.
Results are bit-reproducible for any batch size and worker count.  Degree-1
variables (the measurement variables) always emit their prior, so only qubit
variables are iterated.

Neighbour reductions come in two flavours selected by the dtype.  float64
evaluates every product and sum in ascending value order (small sorting
networks), which makes the arithmetic invariant under permutations of the
neighbour lists: syndromes with an exact lattice symmetry then produce
bitwise-identical posteriors on symmetry-related faces (the symmetric fixed
point of a stuck half-stabilizer is unstable, so without this the rounding
asymmetry grows by roughly an order of magnitude every 20 sweeps).  The
float32 fast path for large Monte Carlo sweeps uses fixed slot-order
prefix/suffix chains instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from qec3d.flip import FLIP, PFLIP, BPAction, Schedule, decode_cycle
from qec3d.geometry import LatticeGeometry, syndrome_of
from qec3d.noise import KeyContext

__all__ = [
    "CLAMP_DEFAULT",
    "FactorGraph",
    "lattice_factor_graph",
    "init_priors",
    "BPState",
    "bp_init",
    "bp_iterate",
    "bp_run",
    "bp_decode",
    "p_bp_decode",
    "DEFAULT_PBP_TAIL",
    "BPDecoder",
    "PBPDecoder",
]

CLAMP_DEFAULT = 30.0

# product guard before atanh; the float32 fast path cannot represent 1 - 1e-15
_PROD_GUARD = {np.dtype(np.float64): 1e-15, np.dtype(np.float32): 1e-6}

# optimal compare-exchange networks (ascending), validated by the 0-1 principle
_SORT_NETWORKS = {
    1: [],
    2: [(0, 1)],
    3: [(1, 2), (0, 2), (0, 1)],
    4: [(0, 1), (2, 3), (0, 2), (1, 3), (1, 2)],
    5: [(0, 1), (3, 4), (2, 4), (2, 3), (1, 4), (0, 3), (0, 2), (1, 3), (1, 2)],
    6: [(1, 2), (4, 5), (0, 2), (3, 5), (0, 1), (3, 4), (2, 5), (0, 3), (1, 4),
        (2, 4), (1, 3), (2, 3)],
    7: [(1, 2), (3, 4), (5, 6), (0, 2), (3, 5), (4, 6), (0, 1), (4, 5), (2, 6),
        (0, 4), (1, 5), (0, 3), (2, 5), (1, 3), (2, 4), (2, 3)],
    8: [(0, 1), (2, 3), (4, 5), (6, 7), (0, 2), (1, 3), (4, 6), (5, 7), (1, 2),
        (5, 6), (0, 4), (3, 7), (1, 5), (2, 6), (1, 4), (3, 6), (2, 4), (3, 5),
        (3, 4)],
}


def _sort_planes(x: np.ndarray, tmp: np.ndarray) -> np.ndarray:
    """Ascending in-place sort of axis 0 (a stack of contiguous planes)."""
    width = x.shape[0]
    net = _SORT_NETWORKS.get(width)
    if net is None:
        x.sort(axis=0)
        return x
    for i, j in net:
        np.minimum(x[i], x[j], out=tmp)
        np.maximum(x[i], x[j], out=x[j])
        np.copyto(x[i], tmp)
    return x


class FactorGraph:
    """Parity-check factor graph in the layout used by the BP sweeps.

    check_vars[j, s] is the variable on slot s of check j (-1 padding for
    ragged degrees).  Variables of degree >= 2 are "active" and get message
    updates; variables of degree <= 1 always emit their prior, so only their
    posterior is ever computed.
    """

    def __init__(self, check_vars: np.ndarray, n_vars: int, n_qubit_vars: int | None = None):
        check_vars = np.asarray(check_vars, dtype=np.int32)
        self.check_vars = check_vars
        self.n_checks, self.max_deg = check_vars.shape
        self.n_vars = int(n_vars)
        self.n_qubit_vars = n_qubit_vars
        self.valid = None if (check_vars >= 0).all() else (check_vars >= 0)
        self.pad_coords = None if self.valid is None else np.nonzero(~self.valid.T)
        self.lattice_layout = False
        self._build_var_side()

    @classmethod
    def from_check_lists(cls, lists, n_vars: int, n_qubit_vars: int | None = None):
        D = max(len(l) for l in lists)
        cv = np.full((len(lists), D), -1, dtype=np.int32)
        for j, l in enumerate(lists):
            if len(set(l)) != len(l):
                raise ValueError(f"check {j} lists a variable twice")
            cv[j, : len(l)] = l
        return cls(cv, n_vars, n_qubit_vars)

    def _build_var_side(self):
        pairs: list[list[tuple[int, int]]] = [[] for _ in range(self.n_vars)]
        for j, s in np.argwhere(self.check_vars >= 0):
            pairs[self.check_vars[j, s]].append((int(j), int(s)))
        degrees = np.array([len(p) for p in pairs])
        self.var_degrees = degrees
        active = np.flatnonzero(degrees >= 2).astype(np.int32)
        self.act_vars = active
        dv = int(degrees[active].max()) if active.size else 1
        self.max_var_deg = dv
        na = active.size
        self.act_checks = np.zeros((na, dv), dtype=np.int64)
        self.act_slots = np.zeros((na, dv), dtype=np.int64)
        act_valid = np.zeros((na, dv), dtype=bool)
        for row, v in enumerate(active):
            for col, (j, s) in enumerate(pairs[v]):
                self.act_checks[row, col] = j
                self.act_slots[row, col] = s
                act_valid[row, col] = True
        self.act_valid = None if act_valid.all() else act_valid
        # slot-major gather coordinates into the (max_deg * n_checks, B) planes
        self.gather_flat = (self.act_slots.T * self.n_checks + self.act_checks.T).ravel()
        # flat gather/scatter coordinates of the valid active pairs
        rows, cols = np.nonzero(act_valid)
        self.pair_row = rows.astype(np.int64)
        self.pair_check = self.act_checks[rows, cols]
        self.pair_slot = self.act_slots[rows, cols]
        # static variables (degree <= 1): posterior-only
        static = np.flatnonzero(degrees <= 1).astype(np.int32)
        self.static_vars = static
        self.static_check = np.full(static.size, -1, dtype=np.int64)
        self.static_slot = np.zeros(static.size, dtype=np.int64)
        for row, v in enumerate(static):
            if pairs[v]:
                self.static_check[row], self.static_slot[row] = pairs[v][0]


def lattice_factor_graph(g: LatticeGeometry) -> FactorGraph:
    """Tanner graph of the lattice plus one measurement variable per check.

    Qubit variables fill slots 0..3 of each check (matching edge_faces order)
    and the check's measurement variable sits on slot 4, which enables a
    gather-only sweep with no scatter.
    """
    nf, ne = g.n_faces, g.n_edges
    check_vars = np.concatenate(
        [g.edge_faces, (nf + np.arange(ne, dtype=np.int32))[:, None]], axis=1
    )
    graph = FactorGraph.__new__(FactorGraph)
    graph.check_vars = check_vars.astype(np.int32)
    graph.n_checks, graph.max_deg = check_vars.shape
    graph.n_vars = nf + ne
    graph.n_qubit_vars = nf
    graph.valid = None
    graph.pad_coords = None
    # qubit variables are the active side; their slot in each incident check
    cand = g.edge_faces[g.face_edges]  # (nf, 4, 4)
    hit = cand == np.arange(nf, dtype=np.int32)[:, None, None]
    if not hit.any(axis=2).all():
        raise AssertionError("inconsistent incidence maps")
    graph.act_vars = np.arange(nf, dtype=np.int32)
    graph.act_checks = g.face_edges.astype(np.int64)
    graph.act_slots = np.argmax(hit, axis=2).astype(np.int64)
    graph.act_valid = None
    graph.max_var_deg = 4
    graph.var_degrees = np.full(nf + ne, 1, dtype=np.int64)
    graph.var_degrees[:nf] = 4
    graph.pair_row = np.repeat(np.arange(nf, dtype=np.int64), 4)
    graph.pair_check = graph.act_checks.ravel()
    graph.pair_slot = graph.act_slots.ravel()
    graph.static_vars = nf + np.arange(ne, dtype=np.int32)
    graph.static_check = np.arange(ne, dtype=np.int64)
    graph.static_slot = np.full(ne, 4, dtype=np.int64)
    graph.lattice_layout = True
    # gather coordinates for the fused sweep
    graph.gather_flat = (graph.act_slots.T * graph.n_checks + graph.act_checks.T).ravel()
    graph.cv_qubit_t = np.ascontiguousarray(check_vars[:, :4].T).astype(np.int64).ravel()
    return graph


def init_priors(graph: FactorGraph, p: float, q: float) -> np.ndarray:
    """Prior LLRs: log((1-p)/p) per qubit variable, log((1-q)/q) per
    measurement variable.  p and q must lie strictly inside (0, 1); callers
    modelling a noiseless channel must substitute a small floor instead of 0.
    """
    if graph.n_qubit_vars is None:
        raise ValueError("graph does not distinguish qubit variables; pass explicit priors")
    for name, val in (("p", p), ("q", q)):
        if not (0.0 < val < 1.0):
            raise ValueError(f"{name} must lie strictly in (0, 1), got {val}")
    priors = np.empty(graph.n_vars, dtype=np.float64)
    priors[: graph.n_qubit_vars] = math.log((1.0 - p) / p)
    priors[graph.n_qubit_vars :] = math.log((1.0 - q) / q)
    return priors


@dataclass
class BPState:
    """Messages, posteriors and reusable scratch for one batched BP run.

    Message arrays are slot-major (max_deg, n_checks, batch); `posterior`
    is exposed batch-major, shape (batch, n_vars).
    """

    Mvf: np.ndarray
    Mfv: np.ndarray
    post: np.ndarray  # (n_vars, batch)
    priors: np.ndarray
    iterations_run: int = 0
    _ws: dict = field(default_factory=dict, repr=False)

    @property
    def batch(self) -> int:
        return self.Mvf.shape[2]

    @property
    def posterior(self) -> np.ndarray:
        return self.post.T


def bp_init(graph: FactorGraph, priors: np.ndarray, batch: int = 1,
            clamp: float = CLAMP_DEFAULT, dtype=np.float64) -> BPState:
    """Fresh state with variable-to-factor messages set to the (clamped) priors."""
    dtype = np.dtype(dtype)
    priors = np.asarray(priors, dtype=dtype)
    if priors.shape != (graph.n_vars,):
        raise ValueError(f"priors must have shape ({graph.n_vars},)")
    safe = np.where(graph.check_vars >= 0, graph.check_vars, 0)
    planes = np.clip(priors[safe], -clamp, clamp).T  # (D, nc)
    if graph.valid is not None:
        planes = planes.copy()
        planes[~graph.valid.T] = 0.0
    Mvf = np.repeat(planes[:, :, None], batch, axis=2).astype(dtype)
    Mfv = np.zeros_like(Mvf)
    post = np.repeat(np.clip(priors, -clamp, clamp)[:, None], batch, axis=1)
    return BPState(Mvf=Mvf, Mfv=Mfv, post=post, priors=priors)


def _workspace(graph: FactorGraph, state: BPState) -> dict:
    if state._ws:
        return state._ws
    B = state.batch
    nc, D = graph.n_checks, graph.max_deg
    na, dv = graph.act_vars.size, graph.max_var_deg
    dt = state.Mvf.dtype
    ws = {
        "T": np.empty((D, nc, B), dtype=dt),
        "suf": np.empty((nc, B), dtype=dt),
        "total": np.empty((na, B), dtype=dt),
        "l": np.empty((na, B), dtype=dt),
        "G": np.empty((dv, na, B), dtype=dt),
        "priors_act": np.ascontiguousarray(state.priors[graph.act_vars])[:, None],
        "symmetric": dt == np.dtype(np.float64),
    }
    if ws["symmetric"]:
        ws["Ts"] = np.empty((D, nc, B), dtype=dt)
        ws["tmp_v"] = np.empty((na, B), dtype=dt)
    if graph.lattice_layout:
        ws["lg"] = np.empty((4 * nc, B), dtype=dt)
    state._ws = ws
    return ws


def _loo_prefix_suffix(T: np.ndarray, loo: np.ndarray, suf: np.ndarray) -> None:
    """Leave-one-out products in fixed slot order (fast path)."""
    D = T.shape[0]
    loo[0].fill(1.0)
    for s in range(1, D):
        np.multiply(loo[s - 1], T[s - 1], out=loo[s])
    suf.fill(1.0)
    for s in range(D - 2, -1, -1):
        np.multiply(suf, T[s + 1], out=suf)
        np.multiply(loo[s], suf, out=loo[s])


def _loo_sorted(T: np.ndarray, loo: np.ndarray, Ts: np.ndarray, tmp: np.ndarray) -> None:
    """Leave-one-out products with a value-sorted full product (symmetric path).

    The full product is divided by each slot's factor; exact zeros (messages
    of exactly 0) are repaired to the product of the remaining factors.
    """
    D = T.shape[0]
    if D == 1:
        loo[0].fill(1.0)
        return
    np.copyto(Ts, T)
    _sort_planes(Ts, tmp)
    P = tmp
    np.multiply(Ts[0], Ts[1], out=P)
    for s in range(2, D):
        np.multiply(P, Ts[s], out=P)
    with np.errstate(divide="ignore", invalid="ignore"):
        np.divide(P, T, out=loo)
    zero = T == 0.0
    if zero.any():
        pnz = np.prod(np.where(zero, 1.0, T), axis=0)
        single = zero.sum(axis=0) == 1
        np.copyto(loo, np.where(single, pnz, 0.0)[None], where=zero)


def _sweep(graph: FactorGraph, state: BPState, sgn: np.ndarray, clamp: float) -> None:
    """One flooding iteration: all factor messages, then all variable messages."""
    ws = _workspace(graph, state)
    Mvf, Mfv = state.Mvf, state.Mfv
    nc, D = graph.n_checks, graph.max_deg
    B = state.batch
    guard = 1.0 - _PROD_GUARD[Mvf.dtype]
    symmetric = ws["symmetric"]

    # factor -> variable: leave-one-out tanh products
    T = ws["T"]
    np.multiply(Mvf, 0.5, out=T)
    np.tanh(T, out=T)
    if graph.pad_coords is not None:
        T[graph.pad_coords] = 1.0  # padding slots contribute a neutral factor
    loo = Mfv  # built in place
    if symmetric:
        _loo_sorted(T, loo, ws["Ts"], ws["suf"])
    else:
        _loo_prefix_suffix(T, loo, ws["suf"])
    np.clip(loo, -guard, guard, out=loo)
    np.arctanh(loo, out=loo)
    np.multiply(loo, 2.0, out=loo)
    np.multiply(Mfv, sgn, out=Mfv)
    np.clip(Mfv, -clamp, clamp, out=Mfv)
    if graph.pad_coords is not None:
        Mfv[graph.pad_coords] = 0.0

    state.iterations_run += 1
    if graph.act_vars.size == 0:
        return

    # variable -> factor: totals per active variable, then leave-one-out
    total, l, G = ws["total"], ws["l"], ws["G"]
    dv = graph.max_var_deg
    Mfv_flat = Mfv.reshape(D * nc, B)
    np.take(Mfv_flat, graph.gather_flat, axis=0, out=G.reshape(-1, B))
    if graph.act_valid is not None:
        G *= graph.act_valid.T[:, :, None]
    Gsum = G
    if symmetric:
        Gsum = _sort_planes(G, ws["tmp_v"])  # pads are exact zeros; sums unchanged
    np.add(Gsum[0], Gsum[1], out=total)
    for s in range(2, dv):
        np.add(total, Gsum[s], out=total)
    np.add(total, ws["priors_act"], out=l)
    state.post[graph.act_vars] = l
    if graph.lattice_layout:
        lg = ws["lg"]
        np.take(l, graph.cv_qubit_t, axis=0, out=lg)
        lg4 = lg.reshape(4, nc, B)
        np.subtract(lg4, Mfv[:4], out=Mvf[:4])
        np.clip(Mvf[:4], -clamp, clamp, out=Mvf[:4])
    else:
        upd = l[graph.pair_row] - Mfv_flat[graph.pair_slot * nc + graph.pair_check]
        np.clip(upd, -clamp, clamp, out=upd)
        state.Mvf.reshape(D * nc, B)[graph.pair_slot * nc + graph.pair_check] = upd


def _finish_posteriors(graph: FactorGraph, state: BPState) -> None:
    attached = graph.static_check >= 0
    if attached.any():
        vars_a = graph.static_vars[attached]
        msgs = state.Mfv[graph.static_slot[attached], graph.static_check[attached]]
        state.post[vars_a] = state.priors[vars_a, None] + msgs
    isolated = graph.static_vars[~attached]
    if isolated.size:
        state.post[isolated] = state.priors[isolated, None]


def _as_batch(syndrome: np.ndarray, n_checks: int):
    syndrome = np.asarray(syndrome)
    if syndrome.shape[-1] != n_checks:
        raise ValueError(f"syndrome must have last dimension {n_checks}")
    squeeze = syndrome.ndim == 1
    return np.atleast_2d(syndrome).astype(np.uint8, copy=False), squeeze


def _sign_planes(syn: np.ndarray, dtype) -> np.ndarray:
    # (nc, B) sign planes: +1 for satisfied checks, -1 for violated ones
    return np.ascontiguousarray((1.0 - 2.0 * syn).T.astype(dtype))


def bp_iterate(graph: FactorGraph, syndrome: np.ndarray, state: BPState,
               clamp: float = CLAMP_DEFAULT) -> BPState:
    """Run one flooding sweep against the given syndrome."""
    syn, _ = _as_batch(syndrome, graph.n_checks)
    _sweep(graph, state, _sign_planes(syn, state.Mvf.dtype), clamp)
    _finish_posteriors(graph, state)
    return state


def bp_run(graph: FactorGraph, syndrome: np.ndarray, priors: np.ndarray,
           iterations: int, clamp: float = CLAMP_DEFAULT, dtype=np.float64) -> BPState:
    """Initialize and run exactly `iterations` sweeps; no early termination."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    syn, _ = _as_batch(syndrome, graph.n_checks)
    state = bp_init(graph, priors, batch=syn.shape[0], clamp=clamp, dtype=dtype)
    sgn = _sign_planes(syn, state.Mvf.dtype)
    for _ in range(iterations):
        _sweep(graph, state, sgn, clamp)
    _finish_posteriors(graph, state)
    return state


def bp_decode(graph: FactorGraph, syndrome: np.ndarray, p: float, q: float,
              iterations: int, clamp: float = CLAMP_DEFAULT, dtype=np.float64) -> np.ndarray:
    """Fixed-iteration BP; returns the qubit correction (posterior < 0)."""
    priors = init_priors(graph, p, q)
    syn, squeeze = _as_batch(syndrome, graph.n_checks)
    state = bp_run(graph, syn, priors, iterations, clamp=clamp, dtype=dtype)
    corr = np.ascontiguousarray((state.post[: graph.n_qubit_vars] < 0.0).T).astype(np.uint8)
    return corr[0] if squeeze else corr


DEFAULT_PBP_TAIL = Schedule((PFLIP, FLIP, FLIP, PFLIP, FLIP, FLIP))


class BPDecoder:
    """Fixed-iteration syndrome BP bound to one geometry and noise channel."""

    def __init__(self, geometry: LatticeGeometry, p: float, q: float,
                 iterations: int = 30, clamp: float = CLAMP_DEFAULT, dtype="float64"):
        self.geometry = geometry
        self.p = p
        self.q = q
        self.iterations = int(iterations)
        self.clamp = float(clamp)
        self.dtype = np.dtype(dtype)
        self.graph = lattice_factor_graph(geometry)
        self.priors = init_priors(self.graph, p, q)
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    def run(self, syndrome: np.ndarray, iterations: int | None = None) -> BPState:
        return bp_run(self.graph, syndrome, self.priors,
                      iterations or self.iterations, clamp=self.clamp, dtype=self.dtype)

    def decode_syndrome(self, syndrome: np.ndarray, iterations: int | None = None) -> np.ndarray:
        syn, squeeze = _as_batch(syndrome, self.graph.n_checks)
        state = self.run(syn, iterations)
        corr = np.ascontiguousarray(
            (state.post[: self.graph.n_qubit_vars] < 0.0).T
        ).astype(np.uint8)
        return corr[0] if squeeze else corr

    def decode(self, syndromes: np.ndarray, ctx: KeyContext | None = None) -> np.ndarray:
        return self.decode_syndrome(syndromes)

    def get_params(self) -> dict:
        return {
            "type": "bp",
            "L": self.geometry.L,
            "p": self.p,
            "q": self.q,
            "iterations": self.iterations,
            "clamp": self.clamp,
            "dtype": str(self.dtype),
        }


class PBPDecoder:
    """BP followed by a flip/p-flip tail within each cycle.

    The tail sees the measured syndrome XOR the boundary of the BP correction.
    With `fold_measurement_decisions` the measurement-variable hard decisions
    additionally clean the syndrome handed to the tail (off by default).
    """

    def __init__(self, geometry: LatticeGeometry, p: float, q: float,
                 iterations: int = 20, tail: Schedule | str = DEFAULT_PBP_TAIL,
                 clamp: float = CLAMP_DEFAULT, dtype="float64",
                 fold_measurement_decisions: bool = False):
        if isinstance(tail, str):
            tail = Schedule.parse(tail)
        if any(isinstance(a, BPAction) for a in tail.actions):
            raise ValueError("the p-BP tail may only contain flip/pflip actions")
        self.bp = BPDecoder(geometry, p, q, iterations, clamp, dtype)
        self.geometry = geometry
        self.tail = tail
        self.fold_measurement_decisions = bool(fold_measurement_decisions)

    def decode(self, syndromes: np.ndarray, ctx: KeyContext | None = None) -> np.ndarray:
        syn, squeeze = _as_batch(syndromes, self.geometry.n_edges)
        state = self.bp.run(syn)
        nf = self.geometry.n_faces
        corr = np.ascontiguousarray((state.post[:nf] < 0.0).T).astype(np.uint8)
        tail_syn = syn ^ syndrome_of(self.geometry, corr)
        if self.fold_measurement_decisions:
            tail_syn = tail_syn ^ np.ascontiguousarray(
                (state.post[nf:] < 0.0).T
            ).astype(np.uint8)
        # the BP pass occupies stage 1 of the cycle's schedule
        tail_corr = decode_cycle(self.geometry, tail_syn, self.tail, ctx, stage_offset=1)
        corr = corr ^ tail_corr
        return corr[0] if squeeze else corr

    def get_params(self) -> dict:
        params = self.bp.get_params()
        params.update({
            "type": "pbp",
            "tail": str(self.tail),
            "fold_measurement_decisions": self.fold_measurement_decisions,
        })
        return params


def p_bp_decode(g: LatticeGeometry, noisy_syndrome: np.ndarray, p: float, q: float,
                bp_iterations: int, tail_schedule: Schedule | str = DEFAULT_PBP_TAIL,
                ctx: KeyContext | None = None, clamp: float = CLAMP_DEFAULT,
                dtype="float64", fold_measurement_decisions: bool = False) -> np.ndarray:
    """One-shot p-BP decode (convenience wrapper around PBPDecoder)."""
    dec = PBPDecoder(g, p, q, bp_iterations, tail_schedule, clamp, dtype,
                     fold_measurement_decisions)
    return dec.decode(noisy_syndrome, ctx)
