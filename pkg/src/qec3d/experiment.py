"""Multi-cycle Monte Carlo harness with majority-vote logical readout.

One trial evolves a residual error over T code cycles.  Per cycle: fresh X
errors land on the qubits, the Z checks are measured with flip probability q,
the decoder turns the noisy syndrome into a correction, and the correction is
applied.  After the last cycle the readout is noiseless: for each encoded
qubit the parities of the L^2 disjoint logical-Z representatives are majority
voted (ties on even L count as failure).

Trials are keyed by their absolute index, so any batching or process count
produces identical results; sweep aggregation is integer sums.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from qec3d.bp import BPDecoder, PBPDecoder
from qec3d.flip import FlipScheduleDecoder
from qec3d.geometry import LatticeGeometry, build_lattice, logical_z_reps, syndrome_of
from qec3d.noise import KeyContext, NoiseParams, Sampler

__all__ = [
    "AXES_ORDER",
    "ExperimentConfig",
    "TrialResult",
    "CellResult",
    "SweepConfig",
    "build_decoder",
    "majority_vote_readout",
    "readout_logical_bits",
    "evolve_residuals",
    "run_trial",
    "run_sweep",
    "correlation_histogram",
    "load_sweep_config",
    "curve_csv_text",
    "correlation_csv_text",
]

AXES_ORDER = ("x", "y", "z")

_DEFAULT_BATCH = {"flip": 4096, "bp": 128, "pbp": 128}


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo cell: lattice size, channel, decoder, trial budget."""

    L: int
    p: float
    q: float
    cycles: int
    decoder: dict
    trials: int
    seed: int
    readout_axes: tuple = ("z",)
    batch: int | None = None

    def __post_init__(self):
        if self.L < 3:
            raise ValueError("L must be at least 3")
        if self.cycles < 1:
            raise ValueError("cycles must be positive")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        NoiseParams(self.p, self.q)
        axes = tuple(self.readout_axes)
        if not axes or any(a not in AXES_ORDER for a in axes):
            raise ValueError("readout_axes must be a non-empty subset of x, y, z")
        object.__setattr__(self, "readout_axes", axes)


@dataclass(frozen=True)
class TrialResult:
    """Per-axis logical X outcome of one trial (1 = logical error)."""

    logical_bits: tuple
    tie_flags: tuple
    seed: int
    trial: int


@dataclass
class CellResult:
    """Aggregated outcome of one (L, p) sweep cell."""

    L: int
    p: float
    q: float
    trials: int
    failures: int
    pfail: float
    stderr: float
    axis_failures: tuple
    histogram: tuple  # counts of the 8 per-axis configurations, 000..111


def build_decoder(g: LatticeGeometry, spec: dict, p: float, q: float):
    """Instantiate a decoder from its config dict.

    Types: ``flip`` (n_A/lambda_p or schedule), ``bp`` (iterations, clamp,
    dtype), ``pbp`` (iterations, tail, clamp, dtype,
    fold_measurement_decisions).
    """
    spec = dict(spec)
    kind = spec.pop("type", None)
    if kind == "flip":
        allowed = {"n_A", "lambda_p", "schedule"}
        _reject_unknown(spec, allowed, kind)
        return FlipScheduleDecoder(g, **spec)
    # BP priors use a small floor when the simulated channel is noiseless
    p_eff = min(max(p, 1e-9), 1 - 1e-9)
    q_eff = min(max(q, 1e-9), 1 - 1e-9)
    if kind == "bp":
        allowed = {"iterations", "clamp", "dtype"}
        _reject_unknown(spec, allowed, kind)
        return BPDecoder(g, p_eff, q_eff, **spec)
    if kind == "pbp":
        allowed = {"iterations", "tail", "clamp", "dtype", "fold_measurement_decisions"}
        _reject_unknown(spec, allowed, kind)
        return PBPDecoder(g, p_eff, q_eff, **spec)
    raise ValueError(f"unknown decoder type {kind!r}")


def _reject_unknown(spec: dict, allowed: set, kind: str):
    unknown = set(spec) - allowed
    if unknown:
        raise ValueError(f"unknown {kind} decoder keys: {sorted(unknown)}")


def majority_vote_readout(g: LatticeGeometry, residual: np.ndarray, axis):
    """Majority vote over the L^2 logical-Z representative parities.

    Returns (bit, tie_flag); with a batch of residuals, arrays of each.  The
    bit is 1 iff at least half the representatives have odd parity, and the
    tie flag marks the exact-half case (even L only), which counts as failure.
    """
    residual = np.asarray(residual).astype(np.uint8, copy=False)
    reps = logical_z_reps(g, axis)
    parities = np.bitwise_xor.reduce(residual[..., reps], axis=-1)
    odd = parities.sum(axis=-1)
    n_reps = reps.shape[0]
    bits = (2 * odd >= n_reps).astype(np.uint8)
    ties = 2 * odd == n_reps
    return bits, ties


def readout_logical_bits(g: LatticeGeometry, residual: np.ndarray):
    """(bits, ties) for all three axes, stacked on the last dimension."""
    outs = [majority_vote_readout(g, residual, a) for a in AXES_ORDER]
    bits = np.stack([o[0] for o in outs], axis=-1)
    ties = np.stack([o[1] for o in outs], axis=-1)
    return bits, ties


def evolve_residuals(g: LatticeGeometry, decoder, params: NoiseParams, seed: int,
                     trials: np.ndarray, cycles: int,
                     initial_residual: np.ndarray | None = None) -> np.ndarray:
    """Residual error after `cycles` noisy decode cycles for a batch of trials."""
    trials = np.atleast_1d(np.asarray(trials))
    B = trials.size
    sampler = Sampler(g, params, seed)
    if initial_residual is None:
        residual = np.zeros((B, g.n_faces), dtype=np.uint8)
    else:
        residual = np.broadcast_to(
            np.asarray(initial_residual, dtype=np.uint8), (B, g.n_faces)
        ).copy()
    noise_buf = np.empty((B, g.n_faces), dtype=np.uint8)
    flip_buf = np.empty((B, g.n_edges), dtype=np.uint8)
    for cycle in range(1, cycles + 1):
        residual ^= sampler.qubit_errors(trials, cycle, out=noise_buf)
        syndrome = syndrome_of(g, residual)
        syndrome ^= sampler.measurement_flips(trials, cycle, out=flip_buf)
        correction = decoder.decode(syndrome, KeyContext(seed, trials, cycle))
        residual ^= correction
    return residual


def run_trial(config: ExperimentConfig, trial: int) -> TrialResult:
    """Run a single Monte Carlo trial and read out all three encoded qubits."""
    g = build_lattice(config.L)
    decoder = build_decoder(g, config.decoder, config.p, config.q)
    residual = evolve_residuals(
        g, decoder, NoiseParams(config.p, config.q), config.seed,
        np.array([trial]), config.cycles,
    )
    bits, ties = readout_logical_bits(g, residual)
    return TrialResult(
        logical_bits=tuple(int(b) for b in bits[0]),
        tie_flags=tuple(bool(t) for t in ties[0]),
        seed=config.seed,
        trial=trial,
    )


def correlation_histogram(results) -> np.ndarray:
    """Counts of the 8 logical-error configurations 000..111 (axes x, y, z)."""
    if isinstance(results, np.ndarray):
        bits = results
    else:
        bits = np.array([r.logical_bits for r in results], dtype=np.uint8)
    bits = np.atleast_2d(bits)
    idx = bits[:, 0] * 4 + bits[:, 1] * 2 + bits[:, 2]
    return np.bincount(idx, minlength=8)


# -- sweeps -------------------------------------------------------------------

_CELL_CACHE: dict = {}


def _cell_runtime(config: ExperimentConfig):
    key = (config.L, config.p, config.q, json.dumps(config.decoder, sort_keys=True))
    if key not in _CELL_CACHE:
        _CELL_CACHE.clear()  # workers handle one cell at a time; keep one entry
        g = build_lattice(config.L)
        decoder = build_decoder(g, config.decoder, config.p, config.q)
        _CELL_CACHE[key] = (g, decoder)
    return _CELL_CACHE[key]


def _batch_size(config: ExperimentConfig) -> int:
    if config.batch is not None:
        return int(config.batch)
    return _DEFAULT_BATCH.get(config.decoder.get("type", "flip"), 512)


def _run_block(config: ExperimentConfig, lo: int, hi: int):
    """Aggregate (failures, axis fail counts, histogram) for trials [lo, hi)."""
    g, decoder = _cell_runtime(config)
    params = NoiseParams(config.p, config.q)
    axes_idx = [AXES_ORDER.index(a) for a in config.readout_axes]
    batch = _batch_size(config)
    failures = 0
    axis_fail = np.zeros(3, dtype=np.int64)
    hist = np.zeros(8, dtype=np.int64)
    for start in range(lo, hi, batch):
        trials = np.arange(start, min(start + batch, hi))
        try:
            residual = evolve_residuals(g, decoder, params, config.seed, trials,
                                        config.cycles)
        except Exception as exc:
            raise RuntimeError(
                f"trial block failed: L={config.L} p={config.p} q={config.q} "
                f"trials=[{trials[0]}..{trials[-1]}] seed={config.seed}: {exc}"
            ) from exc
        bits, _ = readout_logical_bits(g, residual)
        failures += int(bits[:, axes_idx].any(axis=1).sum())
        axis_fail += bits.sum(axis=0)
        hist += correlation_histogram(bits)
    return failures, axis_fail, hist


@dataclass(frozen=True)
class SweepConfig:
    """Grid of (L, p) cells sharing cycle count, decoder and trial budget."""

    L_list: tuple
    p_list: tuple
    q: float | str  # "equal_p" or a number
    cycles: int
    decoder: dict
    trials: int
    seed: int
    readout_axes: tuple = ("z",)
    batch: int | None = None

    def cells(self) -> list[ExperimentConfig]:
        """Expand the grid; duplicate (L, p) cells merge with summed trials."""
        if self.trials < 1:
            raise ValueError("trials must be positive")
        merged: dict[tuple, int] = {}
        for L in self.L_list:
            for p in self.p_list:
                merged[(L, p)] = merged.get((L, p), 0) + self.trials
        out = []
        for (L, p), n in sorted(merged.items()):
            q = p if self.q == "equal_p" else float(self.q)
            out.append(ExperimentConfig(
                L=int(L), p=float(p), q=q, cycles=self.cycles,
                decoder=self.decoder, trials=n, seed=self.seed,
                readout_axes=self.readout_axes, batch=self.batch,
            ))
        return out


def _chunks_for(config: ExperimentConfig) -> list[tuple[int, int]]:
    chunk = max(_batch_size(config), 1) * 8
    return [(lo, min(lo + chunk, config.trials)) for lo in range(0, config.trials, chunk)]


def run_sweep(sweep: SweepConfig, threads: int = 1) -> list[CellResult]:
    """Run every cell of the grid; output is independent of `threads`."""
    from qec3d.scaling import failure_rate

    cells = sweep.cells()
    tasks = [(i, lo, hi) for i, c in enumerate(cells) for lo, hi in _chunks_for(c)]
    totals = [[0, np.zeros(3, dtype=np.int64), np.zeros(8, dtype=np.int64)]
              for _ in cells]
    if threads <= 1:
        outcomes = [(_run_block(cells[i], lo, hi), i) for i, lo, hi in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [(pool.submit(_run_block, cells[i], lo, hi), i)
                       for i, lo, hi in tasks]
            outcomes = [(f.result(), i) for f, i in futures]
    for (failures, axis_fail, hist), i in outcomes:
        totals[i][0] += failures
        totals[i][1] += axis_fail
        totals[i][2] += hist
    results = []
    for cell, (failures, axis_fail, hist) in zip(cells, totals):
        est, err = failure_rate(failures, cell.trials)
        results.append(CellResult(
            L=cell.L, p=cell.p, q=cell.q, trials=cell.trials, failures=failures,
            pfail=est, stderr=err, axis_failures=tuple(int(a) for a in axis_fail),
            histogram=tuple(int(h) for h in hist),
        ))
    return results


# -- config and CSV I/O -------------------------------------------------------

def load_sweep_config(path) -> SweepConfig:
    """Read the sweep JSON: keys L | L_list, p_list, q ("equal_p" or number),
    cycles, decoder {...}, trials, seed, and optional readout_axes, batch."""
    with open(path) as fh:
        raw = json.load(fh)
    if "L" in raw and "L_list" in raw:
        raise ValueError("give either L or L_list, not both")
    L_list = raw.get("L_list", [raw["L"]] if "L" in raw else None)
    if not L_list:
        raise ValueError("config needs L or a non-empty L_list")
    q = raw.get("q", "equal_p")
    if not (q == "equal_p" or isinstance(q, (int, float))):
        raise ValueError('q must be a number or "equal_p"')
    p_list = raw.get("p_list")
    if not p_list:
        raise ValueError("config needs a non-empty p_list")
    return SweepConfig(
        L_list=tuple(int(L) for L in L_list),
        p_list=tuple(float(p) for p in p_list),
        q=q,
        cycles=int(raw["cycles"]),
        decoder=dict(raw["decoder"]),
        trials=int(raw["trials"]),
        seed=int(raw["seed"]),
        readout_axes=tuple(raw.get("readout_axes", ("z",))),
        batch=raw.get("batch"),
    )


def curve_csv_text(results: list[CellResult]) -> str:
    """CSV body for one lattice size: header p,pfail,err and one row per p."""
    lines = ["p,pfail,err"]
    for r in sorted(results, key=lambda r: r.p):
        lines.append(f"{r.p!r},{r.pfail!r},{r.stderr!r}")
    return "\n".join(lines) + "\n"


def correlation_csv_text(histogram) -> str:
    """CSV body of the 8-bin logical-error configuration histogram."""
    lines = ["config,count"]
    for idx in range(8):
        lines.append(f"{idx:03b},{int(histogram[idx])}")
    return "\n".join(lines) + "\n"
