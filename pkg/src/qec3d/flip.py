"""Parallel flip and p-flip rules and the per-cycle schedule engine.

Both rules evaluate every face against the same syndrome snapshot.  A face
with more unsatisfied than satisfied incident Z checks (unsat >= 3 of 4) is
always flipped; p-flip additionally flips each balanced face (unsat = sat = 2)
on an independent fair coin.  Faces with unsat < 2 are never flipped.

A schedule is the ordered list of decoder actions applied within one code
cycle against a single measured syndrome; after each action the working
syndrome is updated by the boundary of the emitted mask.  The measurement
flip pattern is sampled once per cycle and never resampled between actions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qec3d.geometry import LatticeGeometry, syndrome_of
from qec3d.noise import KeyContext, NoiseParams, Sampler

__all__ = [
    "FLIP",
    "PFLIP",
    "BPAction",
    "Schedule",
    "schedule_from_params",
    "flip_counts",
    "flip_step",
    "decode_cycle",
    "FlipScheduleDecoder",
]

FLIP = "flip"
PFLIP = "pflip"


@dataclass(frozen=True)
class BPAction:
    """A belief-propagation pass with a fixed iteration count."""

    iterations: int

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("BP action needs iterations >= 1")

    def __str__(self):
        return f"bp:{self.iterations}"


@dataclass(frozen=True)
class Schedule:
    """Ordered per-cycle decoder actions (non-empty)."""

    actions: tuple

    def __post_init__(self):
        if not self.actions:
            raise ValueError("schedule must contain at least one action")
        for a in self.actions:
            if a not in (FLIP, PFLIP) and not isinstance(a, BPAction):
                raise ValueError(f"unknown schedule action {a!r}")

    def __len__(self):
        return len(self.actions)

    def __str__(self):
        return ",".join(str(a) for a in self.actions)

    @classmethod
    def parse(cls, text: str) -> "Schedule":
        """Parse ``"flip,flip,pflip"``; ``bp:N`` tokens are accepted too."""
        actions = []
        for tok in text.split(","):
            tok = tok.strip().lower()
            if tok in (FLIP, PFLIP):
                actions.append(tok)
            elif tok.startswith("bp:"):
                actions.append(BPAction(int(tok[3:])))
            else:
                raise ValueError(f"unknown schedule token {tok!r}")
        return cls(tuple(actions))


def schedule_from_params(n_A: int, lambda_p: int) -> Schedule:
    """n_A rule applications per cycle; every lambda_p-th one is p-flip.

    lambda_p > n_A yields n_A rounds of plain flip; lambda_p = 1 yields n_A
    rounds of p-flip.
    """
    if n_A < 1 or lambda_p < 1:
        raise ValueError("n_A and lambda_p must be positive")
    return Schedule(tuple(
        PFLIP if k % lambda_p == 0 else FLIP for k in range(1, n_A + 1)
    ))


def flip_counts(g: LatticeGeometry, syndrome: np.ndarray) -> np.ndarray:
    """Unsatisfied incident checks per face (0..4); sat = 4 - unsat."""
    syndrome = np.asarray(syndrome)
    if syndrome.shape[-1] != g.n_edges:
        raise ValueError(
            f"syndrome must have last dimension {g.n_edges}, got {syndrome.shape}"
        )
    return syndrome.astype(np.uint8, copy=False)[..., g.face_edges].sum(
        axis=-1, dtype=np.uint8
    )


def flip_step(g: LatticeGeometry, syndrome: np.ndarray, mode: str = "deterministic",
              ctx: KeyContext | None = None, stage: int = 0,
              sampler: Sampler | None = None) -> np.ndarray:
    """One fully parallel rule application; returns the flip mask over faces.

    The caller folds the mask into its running correction and updates the
    syndrome by XORing the mask's boundary.  `mode="probabilistic"` draws the
    balanced-face coins from (ctx, stage).
    """
    unsat = flip_counts(g, syndrome)
    mask = (unsat >= 3).astype(np.uint8)
    if mode == "probabilistic":
        if ctx is None:
            raise ValueError("probabilistic mode needs a key context")
        if sampler is None:
            sampler = Sampler(g, NoiseParams(0.0, 0.0), ctx.master_seed)
        coins = sampler.coins(ctx.trial, ctx.cycle, stage)
        mask |= (unsat == 2) & coins
    elif mode != "deterministic":
        raise ValueError(f"unknown mode {mode!r}")
    return mask


def decode_cycle(g: LatticeGeometry, noisy_syndrome: np.ndarray, schedule: Schedule,
                 ctx: KeyContext | None = None, bp=None,
                 sampler: Sampler | None = None, stage_offset: int = 0) -> np.ndarray:
    """Run one cycle's schedule against a fixed measured syndrome.

    Returns the accumulated correction over faces.  BP actions are delegated
    to `bp` (a bound BP decoder with `decode_syndrome(syndrome, iterations)`).
    Stages are numbered stage_offset+1.. in execution order, which keys the
    p-flip coins; the offset lets a composite decoder prepend stages of its
    own.
    """
    syndrome = np.asarray(noisy_syndrome).astype(np.uint8, copy=True)
    correction = np.zeros(syndrome.shape[:-1] + (g.n_faces,), dtype=np.uint8)
    for stage, action in enumerate(schedule.actions, start=stage_offset + 1):
        if action == FLIP:
            mask = flip_step(g, syndrome, "deterministic")
        elif action == PFLIP:
            mask = flip_step(g, syndrome, "probabilistic", ctx, stage, sampler)
        else:
            if bp is None:
                raise ValueError("schedule contains a BP action but no BP decoder was given")
            mask = bp.decode_syndrome(syndrome, action.iterations)
        if not mask.any():
            continue
        correction ^= mask
        syndrome ^= syndrome_of(g, mask)
    return correction


class FlipScheduleDecoder:
    """flip / p-flip decoder driven by a per-cycle schedule.

    Construct from explicit `schedule` or from the pair (n_A, lambda_p);
    the two forms are mutually exclusive.
    """

    def __init__(self, geometry: LatticeGeometry, n_A: int | None = None,
                 lambda_p: int | None = None, schedule: Schedule | str | None = None):
        if schedule is not None:
            if n_A is not None or lambda_p is not None:
                raise ValueError("give either schedule or (n_A, lambda_p), not both")
            if isinstance(schedule, str):
                schedule = Schedule.parse(schedule)
        else:
            if n_A is None or lambda_p is None:
                raise ValueError("need schedule or both n_A and lambda_p")
            schedule = schedule_from_params(n_A, lambda_p)
        if any(isinstance(a, BPAction) for a in schedule.actions):
            raise ValueError("flip schedules may only contain flip/pflip actions")
        self.geometry = geometry
        self.n_A = n_A
        self.lambda_p = lambda_p
        self.schedule = schedule
        self._sampler: Sampler | None = None

    def _coin_sampler(self, master_seed: int) -> Sampler:
        if self._sampler is None or self._sampler.master_seed != master_seed:
            self._sampler = Sampler(self.geometry, NoiseParams(0.0, 0.0), master_seed)
        return self._sampler

    def decode(self, syndromes: np.ndarray, ctx: KeyContext) -> np.ndarray:
        return decode_cycle(self.geometry, syndromes, self.schedule, ctx,
                            sampler=self._coin_sampler(ctx.master_seed))

    def get_params(self) -> dict:
        return {
            "type": "flip",
            "L": self.geometry.L,
            "n_A": self.n_A,
            "lambda_p": self.lambda_p,
            "schedule": str(self.schedule),
        }
