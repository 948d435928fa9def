"""Seeded random streams.

All randomness comes from NumPy's PCG64 bit generator seeded through
``SeedSequence``.  Uniforms are drawn with ``Generator.random``, which maps a
64-bit output ``x`` to ``(x >> 11) * 2**-53`` in [0, 1); this mapping and
PCG64's output are platform independent, so traces are reproducible bit for
bit.

A seed feeds two independent streams: ``"states"`` drives the network-state
chain, ``"policy"`` drives randomized action draws.
"""
import numpy as np

_STREAM_KEYS = {"states": (), "policy": (1,)}


def stream(seed: int, name: str = "states") -> np.random.Generator:
    try:
        key = _STREAM_KEYS[name]
    except KeyError:
        raise ValueError(f"unknown stream {name!r}; expected one of {sorted(_STREAM_KEYS)}") from None
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def cumulative_rows(probs: np.ndarray) -> np.ndarray:
    """Row-wise CDF used for inverse-transform sampling.

    Entries from the last positive-probability column onward are pinned to
    exactly 1.0, so a uniform in [0, 1) never lands past the support and a
    zero-probability column is never selected.
    """
    probs = np.asarray(probs, dtype=float)
    cum = np.cumsum(probs, axis=1)
    for i in range(probs.shape[0]):
        last = np.flatnonzero(probs[i] > 0)[-1]
        cum[i, last:] = 1.0
    return cum
