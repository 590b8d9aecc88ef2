import itertools
import math

import numpy as np
import pytest

from qec3d.bp import (
    BPDecoder,
    DEFAULT_PBP_TAIL,
    FactorGraph,
    PBPDecoder,
    bp_decode,
    bp_init,
    bp_iterate,
    bp_run,
    init_priors,
    lattice_factor_graph,
    p_bp_decode,
)
from qec3d.fixtures import half_cube, half_cube_plus_one
from qec3d.flip import FLIP, PFLIP, Schedule
from qec3d.geometry import build_lattice, is_stabilizer_equivalent, syndrome_of
from qec3d.noise import KeyContext

from helpers import brute_marginals

SEED = 987654321


@pytest.fixture(scope="module")
def g4():
    return build_lattice(4)


@pytest.fixture(scope="module")
def graph4(g4):
    return lattice_factor_graph(g4)


def random_tree(rng, max_vars=12):
    """Bipartite tree where every factor owns at least one private variable,
    so all syndromes are satisfiable."""
    n_vars = 1
    checks = []
    target = int(rng.integers(4, max_vars + 1))
    while n_vars < target:
        anchor = int(rng.integers(0, n_vars))
        d = int(rng.integers(2, 5))
        new = list(range(n_vars, n_vars + d - 1))
        n_vars += d - 1
        checks.append([anchor] + new)
    if not checks:
        checks, n_vars = [[0, 1]], 2
    return checks, n_vars


def llr_to_prob(l):
    return 1.0 / (1.0 + np.exp(l))


def test_lattice_graph_shape(g4, graph4):
    assert graph4.n_checks == g4.n_edges
    assert graph4.max_deg == 5
    assert graph4.n_vars == g4.n_faces + g4.n_edges
    assert (graph4.var_degrees[: g4.n_faces] == 4).all()
    assert (graph4.var_degrees[g4.n_faces :] == 1).all()
    # slot maps are consistent
    cv = graph4.check_vars
    for f in (0, 17, g4.n_faces - 1):
        for a in range(4):
            assert cv[graph4.act_checks[f, a], graph4.act_slots[f, a]] == f


def test_init_priors(graph4):
    priors = init_priors(graph4, 0.026, 0.1)
    nf = graph4.n_qubit_vars
    assert priors[:nf] == pytest.approx(math.log(0.974 / 0.026))
    assert priors[:nf][0] == pytest.approx(3.6233, abs=1e-4)
    assert priors[nf:] == pytest.approx(math.log(9.0))
    assert init_priors(graph4, 0.5, 0.5)[0] == 0.0
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            init_priors(graph4, bad, 0.1)
        with pytest.raises(ValueError):
            init_priors(graph4, 0.1, bad)


def test_single_check_matches_enumeration():
    checks = [[0, 1, 2, 3, 4]]
    fg = FactorGraph.from_check_lists(checks, n_vars=5)
    p1 = np.full(5, 0.1)
    priors = np.log((1 - p1) / p1)
    state = bp_run(fg, np.array([1], dtype=np.uint8), priors, iterations=10)
    exact = brute_marginals(checks, [1], p1)
    assert np.abs(llr_to_prob(state.posterior[0]) - exact).max() < 1e-9


def test_tree_exactness_property():
    rng = np.random.default_rng(SEED)
    for _ in range(40):
        checks, nv = random_tree(rng)
        p1 = rng.uniform(0.05, 0.45, nv)
        syn = rng.integers(0, 2, len(checks)).astype(np.uint8)
        fg = FactorGraph.from_check_lists(checks, nv)
        priors = np.log((1 - p1) / p1)
        state = bp_run(fg, syn, priors, iterations=2 * (nv + len(checks)))
        exact = brute_marginals(checks, syn, p1)
        assert np.abs(llr_to_prob(state.posterior[0]) - exact).max() < 1e-9


def test_sign_flip_negates_factor_messages(graph4):
    priors = init_priors(graph4, 0.1, 0.1)
    s0 = np.zeros(graph4.n_checks, dtype=np.uint8)
    s1 = np.ones(graph4.n_checks, dtype=np.uint8)
    st0 = bp_init(graph4, priors)
    st1 = bp_init(graph4, priors)
    bp_iterate(graph4, s0, st0)
    bp_iterate(graph4, s1, st1)
    assert np.array_equal(st0.Mfv, -st1.Mfv)


def test_zero_syndrome_no_correction(g4, graph4):
    syn = np.zeros(graph4.n_checks, dtype=np.uint8)
    priors = init_priors(graph4, 0.05, 0.05)
    state = bp_run(graph4, syn, priors, iterations=12)
    assert (state.posterior > 0).all()
    corr = bp_decode(graph4, syn, 0.05, 0.05, 12)
    assert not corr.any()


def test_weight_one_error_decoded(g4, graph4):
    err = np.zeros(g4.n_faces, dtype=np.uint8)
    err[g4.face("y", 1, 2, 3)] = 1
    corr = bp_decode(graph4, syndrome_of(g4, err), 0.026, 0.001, 30)
    assert np.array_equal(corr, err)


def test_half_cube_symmetric_posteriors(g4, graph4):
    syn = syndrome_of(g4, half_cube(g4))
    state = bp_run(graph4, syn, init_priors(graph4, 0.026, 0.026), iterations=30)
    cube = g4.cell_faces[g4.cell(0, 0, 0)]
    posts = state.posterior[0][cube]
    assert (posts > 0).all()
    assert np.abs(posts[:, None] - posts[None, :]).max() <= 1e-12
    corr = (state.posterior[0][: g4.n_faces] < 0).astype(np.uint8)
    assert not corr.any()


def test_half_cube_plus_one_decoded(g4, graph4):
    err = half_cube_plus_one(g4)
    corr = bp_decode(graph4, syndrome_of(g4, err), 0.026, 0.026, 30)
    assert corr.any()
    assert is_stabilizer_equivalent(g4, err ^ corr, np.zeros_like(err))


def test_clamp_inert_when_messages_small(g4, graph4):
    err = half_cube(g4)
    syn = syndrome_of(g4, err)
    priors = init_priors(graph4, 0.2, 0.2)  # max |message| stays small
    s1 = bp_run(graph4, syn, priors, iterations=15, clamp=30.0)
    s2 = bp_run(graph4, syn, priors, iterations=15, clamp=60.0)
    assert np.abs(s1.Mfv).max() < 15.0
    assert np.array_equal(s1.posterior, s2.posterior)


def test_fixed_iteration_count(graph4):
    syn = np.zeros(graph4.n_checks, dtype=np.uint8)
    priors = init_priors(graph4, 0.1, 0.1)
    state = bp_run(graph4, syn, priors, iterations=7)
    assert state.iterations_run == 7
    with pytest.raises(ValueError):
        bp_run(graph4, syn, priors, iterations=0)


def test_iterations_change_loopy_result(g4, graph4):
    rng = np.random.default_rng(3)
    err = (rng.random(g4.n_faces) < 0.06).astype(np.uint8)
    syn = syndrome_of(g4, err)
    priors = init_priors(graph4, 0.06, 0.06)
    a = bp_run(graph4, syn, priors, iterations=2).posterior
    b = bp_run(graph4, syn, priors, iterations=3).posterior
    assert not np.array_equal(a, b)


def test_float32_path_agrees_on_easy_instance(g4, graph4):
    err = np.zeros(g4.n_faces, dtype=np.uint8)
    err[g4.face("x", 0, 1, 2)] = 1
    syn = syndrome_of(g4, err)
    c64 = bp_decode(graph4, syn, 0.03, 0.03, 20, dtype=np.float64)
    c32 = bp_decode(graph4, syn, 0.03, 0.03, 20, dtype=np.float32)
    assert np.array_equal(c64, c32)


def test_batch_split_invariance(g4, graph4):
    rng = np.random.default_rng(8)
    errs = (rng.random((6, g4.n_faces)) < 0.05).astype(np.uint8)
    syns = syndrome_of(g4, errs)
    full = bp_decode(graph4, syns, 0.05, 0.05, 10)
    parts = np.concatenate([
        bp_decode(graph4, syns[:2], 0.05, 0.05, 10),
        bp_decode(graph4, syns[2:], 0.05, 0.05, 10),
    ])
    assert np.array_equal(full, parts)


def test_decoder_classes(g4):
    dec = BPDecoder(g4, 0.026, 0.026, iterations=5)
    params = dec.get_params()
    assert params["type"] == "bp" and params["iterations"] == 5
    syn = syndrome_of(g4, half_cube(g4))
    corr = dec.decode(np.broadcast_to(syn, (3, g4.n_edges)), None)
    assert corr.shape == (3, g4.n_faces)

    pbp = PBPDecoder(g4, 0.026, 0.026, iterations=5)
    assert pbp.get_params()["tail"] == "pflip,flip,flip,pflip,flip,flip"
    assert DEFAULT_PBP_TAIL.actions == (PFLIP, FLIP, FLIP, PFLIP, FLIP, FLIP)
    with pytest.raises(ValueError):
        PBPDecoder(g4, 0.1, 0.1, tail="bp:3,flip")


def test_pbp_zero_syndrome(g4):
    syn = np.zeros(g4.n_edges, dtype=np.uint8)
    corr = p_bp_decode(g4, syn, 0.05, 0.05, 5, ctx=KeyContext(SEED, 0, 1))
    assert not corr.any()


def test_pbp_half_cube_escapes_often(g4):
    # BP leaves the half-cube untouched; the tail's coins are eligible exactly
    # on the six cube faces, so most trials resolve within one cycle
    pbp = PBPDecoder(g4, 0.026, 0.026, iterations=5)
    trials = np.arange(400)
    syn = np.broadcast_to(syndrome_of(g4, half_cube(g4)), (400, g4.n_edges)).copy()
    corr = pbp.decode(syn, KeyContext(SEED, trials, 1))
    resid = half_cube(g4)[None, :] ^ corr
    empty = np.zeros(g4.n_faces, dtype=np.uint8)
    ok = np.array([is_stabilizer_equivalent(g4, r, empty) for r in resid])
    assert ok.mean() > 0.55  # lower bound well below the coin-tree value


def test_pbp_fold_measurement_switch(g4):
    # the switch changes only the syndrome handed to the tail; both modes run
    rng = np.random.default_rng(12)
    err = (rng.random((4, g4.n_faces)) < 0.04).astype(np.uint8)
    flips = (rng.random((4, g4.n_edges)) < 0.04).astype(np.uint8)
    syn = syndrome_of(g4, err) ^ flips
    a = PBPDecoder(g4, 0.04, 0.04, iterations=5)
    b = PBPDecoder(g4, 0.04, 0.04, iterations=5, fold_measurement_decisions=True)
    ca = a.decode(syn, KeyContext(SEED, np.arange(4), 1))
    cb = b.decode(syn, KeyContext(SEED, np.arange(4), 1))
    assert ca.shape == cb.shape == (4, g4.n_faces)
