"""Simulator and decoders for the 3D toric code under phenomenological noise.

Local flip and p-flip rules, syndrome belief propagation (with measurement
error variables), the hybrid p-BP decoder, a multi-cycle Monte Carlo harness
with majority-vote readout, and finite-size-scaling threshold fits.
"""

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
from qec3d.experiment import (
    CellResult,
    ExperimentConfig,
    SweepConfig,
    TrialResult,
    build_decoder,
    correlation_histogram,
    evolve_residuals,
    load_sweep_config,
    majority_vote_readout,
    run_sweep,
    run_trial,
)
from qec3d.fixtures import (
    fixture_error,
    half_cube,
    half_cube_plus_one,
    oscillating_pair,
    planar_square,
)
from qec3d.flip import (
    FlipScheduleDecoder,
    Schedule,
    decode_cycle,
    flip_counts,
    flip_step,
    schedule_from_params,
)
from qec3d.geometry import (
    LatticeGeometry,
    build_lattice,
    dump_incidence,
    is_stabilizer_equivalent,
    logical_x_membrane,
    logical_z_reps,
    syndrome_of,
)
from qec3d.noise import (
    KeyContext,
    NoiseParams,
    RandomKey,
    sample_measurement_flips,
    sample_qubit_errors,
    uniform,
)
from qec3d.scaling import (
    FitResult,
    estimate_crossing,
    failure_rate,
    fit_threshold,
    scaling_collapse,
)

__version__ = "0.1.0"
