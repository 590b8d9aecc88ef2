"""Phenomenological noise sampling with a keyed, counter-based generator.

Every random variate in a simulation is a pure function of a key
``(master_seed, purpose, cycle, stage, trial, site)``.  There is no sequential
generator state, so results are independent of batching, thread count and
execution order, and any single variate can be recomputed in isolation.

Generator definition (nested SplitMix64 streams).  With ``mix64`` the standard
SplitMix64 finalizer and GAMMA = 0x9E3779B97F4A7C15, all arithmetic mod 2^64::

    h = master_seed
    for w in (purpose, cycle, stage):   # absorbed scalar fields
        h = mix64(h + w * GAMMA)
    h = mix64(h + trial * GAMMA)
    h = mix64(h + site * GAMMA)
    uniform = (h >> 11) * 2**-53        # 53-bit mantissa, in [0, 1)

    mix64(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
              z ^= z >> 27; z *= 0x94D049BB133111EB
              z ^= z >> 31

A Bernoulli(p) hit is defined as ``uniform < p`` and is evaluated in integer
form, ``(h >> 11) < ceil(p * 2**53)``, which is exactly equivalent.

Purposes: 1 data-qubit errors, 2 measurement flips, 3 p-flip coins.  Noise
fields are sampled once per cycle at stage 0; p-flip coins use the schedule
stage of the step that consumes them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from qec3d.geometry import LatticeGeometry

__all__ = [
    "GAMMA",
    "PURPOSE_QUBIT_NOISE",
    "PURPOSE_MEAS_NOISE",
    "PURPOSE_PFLIP_COIN",
    "NoiseParams",
    "RandomKey",
    "KeyContext",
    "uniform",
    "sample_qubit_errors",
    "sample_measurement_flips",
    "coin_flips",
    "Sampler",
]

GAMMA = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

PURPOSE_QUBIT_NOISE = 1
PURPOSE_MEAS_NOISE = 2
PURPOSE_PFLIP_COIN = 3


@dataclass(frozen=True)
class NoiseParams:
    """Per-cycle error probabilities: p for qubit X errors, q for check flips."""

    p: float
    q: float

    def __post_init__(self):
        for name, val in (("p", self.p), ("q", self.q)):
            if not (0.0 <= val < 1.0):
                raise ValueError(f"{name} must lie in [0, 1), got {val}")


@dataclass(frozen=True)
class RandomKey:
    master_seed: int
    trial: int
    cycle: int
    stage: int
    site: int
    purpose: int


@dataclass(frozen=True)
class KeyContext:
    """Key fields shared by all variates of one decode call.

    `trial` may be a scalar or an integer array (one entry per batched trial).
    """

    master_seed: int
    trial: "int | np.ndarray"
    cycle: int


def _mix64_int(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def _absorb_int(h: int, w: int) -> int:
    return _mix64_int(h + (w * GAMMA & _MASK))


def _base_int(master_seed: int, purpose: int, cycle: int, stage: int) -> int:
    h = master_seed & _MASK
    for w in (purpose, cycle, stage):
        h = _absorb_int(h, w)
    return h


def uniform(key: RandomKey) -> float:
    """The uniform variate in [0, 1) addressed by `key` (deterministic)."""
    h = _base_int(key.master_seed, key.purpose, key.cycle, key.stage)
    h = _absorb_int(h, key.trial)
    h = _absorb_int(h, key.site)
    return (h >> 11) * 2.0**-53


def _threshold(p: float) -> int:
    """Smallest integer m_th with (m < m_th) == ((m * 2^-53) < p), exactly."""
    if p <= 0.0:
        return 0
    return min(int(math.ceil(Fraction(p) * (1 << 53))), 1 << 53)


@lru_cache(maxsize=8)
def _site_gamma(n: int) -> np.ndarray:
    return (np.arange(n, dtype=np.uint64) * np.uint64(GAMMA)).copy()


def _mix64_arr(h: np.ndarray, tmp: np.ndarray) -> np.ndarray:
    np.right_shift(h, np.uint64(30), out=tmp)
    np.bitwise_xor(h, tmp, out=h)
    np.multiply(h, np.uint64(_M1), out=h)
    np.right_shift(h, np.uint64(27), out=tmp)
    np.bitwise_xor(h, tmp, out=h)
    np.multiply(h, np.uint64(_M2), out=h)
    np.right_shift(h, np.uint64(31), out=tmp)
    np.bitwise_xor(h, tmp, out=h)
    return h


def _trial_hashes(base: int, trial) -> np.ndarray:
    t = np.atleast_1d(np.asarray(trial)).astype(np.uint64)
    h = base + t * np.uint64(GAMMA)
    return _mix64_arr(h, np.empty_like(h))


class Sampler:
    """Batched Bernoulli-field sampler over the sites of one geometry.

    Holds the per-probability integer thresholds and reusable uint64 scratch
    so the per-cycle sampling inside a hot trial loop does not reallocate.
    Stateless with respect to randomness: every output is the pure key
    function defined in the module docstring.
    """

    def __init__(self, g: LatticeGeometry, params: NoiseParams, master_seed: int):
        self.g = g
        self.params = params
        self.master_seed = int(master_seed)
        self._thr_p = np.uint64(_threshold(params.p))
        self._thr_q = np.uint64(_threshold(params.q))
        self._thr_coin = np.uint64(_threshold(0.5))
        self._scratch: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def _field(self, purpose: int, cycle: int, stage: int, trial, n_sites: int,
               threshold: np.uint64, out=None) -> np.ndarray:
        base = _base_int(self.master_seed, purpose, cycle, stage)
        ht = _trial_hashes(base, trial)
        B = ht.shape[0]
        key = (B, n_sites)
        if key not in self._scratch:
            self._scratch[key] = (
                np.empty((B, n_sites), dtype=np.uint64),
                np.empty((B, n_sites), dtype=np.uint64),
            )
        h, tmp = self._scratch[key]
        np.add(ht[:, None], _site_gamma(n_sites)[None, :], out=h)
        _mix64_arr(h, tmp)
        np.right_shift(h, np.uint64(11), out=h)
        hits = np.less(h, threshold, out=np.empty((B, n_sites), dtype=bool))
        if out is None:
            out = np.empty((B, n_sites), dtype=np.uint8)
        np.copyto(out, hits, casting="unsafe")
        if np.isscalar(trial) or np.asarray(trial).ndim == 0:
            return out[0]
        return out

    def qubit_errors(self, trial, cycle: int, out=None) -> np.ndarray:
        return self._field(PURPOSE_QUBIT_NOISE, cycle, 0, trial, self.g.n_faces,
                           self._thr_p, out)

    def measurement_flips(self, trial, cycle: int, out=None) -> np.ndarray:
        return self._field(PURPOSE_MEAS_NOISE, cycle, 0, trial, self.g.n_edges,
                           self._thr_q, out)

    def coins(self, trial, cycle: int, stage: int, out=None) -> np.ndarray:
        return self._field(PURPOSE_PFLIP_COIN, cycle, stage, trial, self.g.n_faces,
                           self._thr_coin, out)


def uniform_block(master_seed: int, purpose: int, cycle: int, stage: int,
                  trial, n_sites: int) -> np.ndarray:
    """Vectorized `uniform` over trials x sites (same keyed values, float64)."""
    base = _base_int(master_seed, purpose, cycle, stage)
    ht = _trial_hashes(base, trial)
    h = ht[:, None] + _site_gamma(n_sites)[None, :]
    _mix64_arr(h, np.empty_like(h))
    out = (h >> np.uint64(11)).astype(np.float64) * 2.0**-53
    if np.isscalar(trial) or np.asarray(trial).ndim == 0:
        return out[0]
    return out


def sample_qubit_errors(g: LatticeGeometry, params: NoiseParams, trial, cycle: int,
                        master_seed: int) -> np.ndarray:
    """X error pattern over faces: each face hit independently with probability p."""
    return Sampler(g, params, master_seed).qubit_errors(trial, cycle)


def sample_measurement_flips(g: LatticeGeometry, params: NoiseParams, trial, cycle: int,
                             master_seed: int) -> np.ndarray:
    """Measurement flip pattern over edges: each check flipped with probability q."""
    return Sampler(g, params, master_seed).measurement_flips(trial, cycle)


def coin_flips(g: LatticeGeometry, trial, cycle: int, stage: int,
               master_seed: int) -> np.ndarray:
    """Fair p-flip coins over faces for one schedule stage."""
    return Sampler(g, NoiseParams(0.0, 0.0), master_seed).coins(trial, cycle, stage)
