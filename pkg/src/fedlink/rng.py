"""Named, independent random streams built on the counter-based Philox engine.

Each logical source of randomness in a trial (participant sampling, channel
draws, quantizer dithering, receiver noise, initial point) owns its own
stream keyed by (seed, stream id), so e.g. running digital and analog
paradigms side by side consumes identical channel realizations while their
paradigm-specific noise stays independent.
"""

from dataclasses import dataclass

import numpy as np

_STREAM_IDS = {
    "task": 0,
    "init": 1,
    "sampler": 2,
    "channel": 3,
    "quantizer": 4,
    "noise": 5,
}


def substream(seed: int, name: str) -> np.random.Generator:
    """Deterministic generator for stream `name` under master `seed`."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_STREAM_IDS[name],))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class TrialStreams:
    sampler: np.random.Generator
    channel: np.random.Generator
    quantizer: np.random.Generator
    noise: np.random.Generator
    init: np.random.Generator


def trial_streams(seed: int) -> TrialStreams:
    return TrialStreams(
        sampler=substream(seed, "sampler"),
        channel=substream(seed, "channel"),
        quantizer=substream(seed, "quantizer"),
        noise=substream(seed, "noise"),
        init=substream(seed, "init"),
    )
