import numpy as np
import pytest

from qec3d.geometry import build_lattice
from qec3d.noise import (
    PURPOSE_MEAS_NOISE,
    PURPOSE_QUBIT_NOISE,
    NoiseParams,
    RandomKey,
    Sampler,
    coin_flips,
    sample_measurement_flips,
    sample_qubit_errors,
    uniform,
    uniform_block,
)


SEED = 0xDEADBEEF12345678


def key(trial=0, cycle=1, stage=0, site=0, purpose=PURPOSE_QUBIT_NOISE, master=SEED):
    return RandomKey(master_seed=master, trial=trial, cycle=cycle, stage=stage,
                     site=site, purpose=purpose)


def test_params_validated():
    NoiseParams(0.0, 0.999)
    for bad in (-0.1, 1.0, 1.5):
        with pytest.raises(ValueError):
            NoiseParams(bad, 0.1)
        with pytest.raises(ValueError):
            NoiseParams(0.1, bad)


def test_uniform_deterministic():
    k = key(trial=17, cycle=42, site=9)
    assert uniform(k) == uniform(k)
    assert 0.0 <= uniform(k) < 1.0


def test_uniform_sensitive_to_every_field():
    base = key(trial=3, cycle=5, stage=2, site=11)
    u0 = uniform(base)
    from dataclasses import replace

    for field, val in (("master_seed", SEED + 1), ("trial", 4), ("cycle", 6),
                       ("stage", 3), ("site", 12), ("purpose", PURPOSE_MEAS_NOISE)):
        assert uniform(replace(base, **{field: val})) != u0


def test_uniform_mean():
    # Monte Carlo check of the keyed generator: 1e6 distinct-site variates
    us = uniform_block(SEED, PURPOSE_QUBIT_NOISE, cycle=1, stage=0,
                       trial=np.arange(100), n_sites=10_000)
    assert us.shape == (100, 10_000)
    assert abs(us.mean() - 0.5) < 0.002


def test_site_collisions():
    # 1e6 keys differing only in site: collisions of the 53-bit variates should
    # stay at the level expected of true 53-bit uniforms (expected ~0.06 here)
    us = uniform_block(SEED, PURPOSE_QUBIT_NOISE, cycle=1, stage=0,
                       trial=0, n_sites=1_000_000)
    m = np.round(us * 2.0**53).astype(np.uint64)
    n_dupes = m.size - np.unique(m).size
    assert n_dupes <= 3
    # changing only the site always changes the variate on this sample
    assert us[0] != us[1]


def test_scalar_matches_batch():
    g = build_lattice(3)
    p = 0.3
    sampler = Sampler(g, NoiseParams(p, p), SEED)
    trials = np.arange(5)
    hits = sampler.qubit_errors(trials, cycle=7)
    for t in range(5):
        for s in range(g.n_faces):
            u = uniform(key(trial=t, cycle=7, site=s))
            assert bool(hits[t, s]) == (u < p)


def test_p_zero_and_high_p():
    g = build_lattice(4)
    assert not sample_qubit_errors(g, NoiseParams(0.0, 0.0), 0, 1, SEED).any()
    hits = sample_qubit_errors(g, NoiseParams(0.999, 0.0), np.arange(50), 1, SEED)
    mean = hits.mean()
    # binomial mean 0.999, sigma ~ sqrt(0.999*0.001/ (50*192))
    assert abs(mean - 0.999) < 5 * np.sqrt(0.999 * 0.001 / hits.size)


def test_l14_weight_distribution():
    g = build_lattice(14)
    p = 0.026
    hits = sample_qubit_errors(g, NoiseParams(p, p), np.arange(10_000), 1, SEED)
    weights = hits.sum(axis=1)
    mean_expected = g.n_faces * p  # 214.03
    sigma_mean = np.sqrt(g.n_faces * p * (1 - p) / 10_000)
    assert abs(weights.mean() - mean_expected) < 3 * sigma_mean


def test_measurement_flips_same_law_and_independent():
    g = build_lattice(3)
    params = NoiseParams(0.3, 0.3)
    s = Sampler(g, params, SEED)
    trials = np.arange(10_000)
    q_hits = s.qubit_errors(trials, cycle=1).astype(float)
    m_hits = s.measurement_flips(trials, cycle=1).astype(float)
    assert not np.array_equal(q_hits, m_hits)  # purposes separate the streams
    assert abs(m_hits.mean() - 0.3) < 3 * np.sqrt(0.3 * 0.7 / m_hits.size)
    # independence: sample correlation over trials x sites
    a = q_hits.ravel() - q_hits.mean()
    b = m_hits.ravel() - m_hits.mean()
    r = (a * b).mean() / (a.std() * b.std())
    assert abs(r) < 0.01


def test_coin_flips_fair_and_stage_dependent():
    g = build_lattice(3)
    c1 = coin_flips(g, np.arange(2000), cycle=1, stage=1, master_seed=SEED)
    c2 = coin_flips(g, np.arange(2000), cycle=1, stage=2, master_seed=SEED)
    assert not np.array_equal(c1, c2)
    assert abs(c1.mean() - 0.5) < 3 * np.sqrt(0.25 / c1.size)


def test_reproducible_and_seed_sensitive():
    g = build_lattice(4)
    params = NoiseParams(0.1, 0.1)
    a = sample_qubit_errors(g, params, np.arange(8), 3, SEED)
    b = sample_qubit_errors(g, params, np.arange(8), 3, SEED)
    c = sample_qubit_errors(g, params, np.arange(8), 3, SEED + 1)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    # batching does not change per-trial results
    d = sample_qubit_errors(g, params, np.arange(4, 8), 3, SEED)
    assert np.array_equal(a[4:], d)
    e = sample_measurement_flips(g, params, 5, 3, SEED)
    f = sample_measurement_flips(g, params, np.array([5]), 3, SEED)
    assert np.array_equal(e, f[0])
