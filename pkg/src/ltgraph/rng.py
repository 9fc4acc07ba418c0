"""Seeded random streams.

Every random choice in the library flows through one counter-based
generator (Philox).  Each pipeline stage mixes a fixed stage id into the
user seed, so the stream a stage sees does not depend on what ran before
it: `noise --seed 7` draws the same numbers whether or not `split` ran
first, and a full pipeline run is reproducible stage by stage.
"""

from __future__ import annotations

import numpy as np

_STAGE_IDS = {
    "synth": 0x51,
    "split": 0x52,
    "noise": 0x53,
    "train": 0x54,
    "perturb": 0x55,
    "infer": 0x56,
    "eval": 0x57,
}


def stage_rng(seed: int, stage: str, *extra: int) -> np.random.Generator:
    """Return the Philox generator for `stage` under the given seed.

    `extra` ids derive independent sub-streams (e.g. one per grid cell).
    """
    if stage not in _STAGE_IDS:
        raise ValueError(f"unknown stage {stage!r}; expected one of {sorted(_STAGE_IDS)}")
    entropy = [_STAGE_IDS[stage], int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, extra)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
