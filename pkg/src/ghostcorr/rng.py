"""Counter-based per-shot random streams.

Every random draw in a run is addressed by ``(master_seed, shot_index, role)``.
The Philox key is derived from the master seed; the 256-bit counter is
positioned at ``[0, 0, shot_index, role]`` so each (shot, role) pair owns a
disjoint block of 2**128 counter values.  Results therefore do not depend on
how shots are distributed across workers.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

ROLES = {
    "thermal": 0,
    "vacuum": 1,
    "pdc1": 2,
    "pdc2": 3,
    "count1": 4,
    "count2": 5,
}


@lru_cache(maxsize=64)
def _philox_key(master_seed: int) -> tuple[int, int]:
    words = np.random.SeedSequence(int(master_seed)).generate_state(2, np.uint64)
    return int(words[0]), int(words[1])


def stream(master_seed: int, shot_index: int, role: str) -> np.random.Generator:
    """Independent generator for one shot and one role."""
    return ShotStreams(master_seed).fresh(shot_index, role)


class ShotStreams:
    """Factory of per-shot generators sharing one Philox key.

    Repositioning an existing bit generator is much cheaper than building a
    fresh one per shot, so a worker keeps one ``ShotStreams`` and calls
    :meth:`generator` for each shot.  Instances are not thread-safe; give each
    worker its own.
    """

    def __init__(self, master_seed: int):
        if master_seed < 0 or master_seed >= 2**64:
            raise ValueError(f"master_seed must fit in 64 unsigned bits, got {master_seed}")
        self.master_seed = int(master_seed)
        lo, hi = _philox_key(self.master_seed)
        self._key = np.array([lo, hi], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=self._key)
        self._gen = np.random.Generator(self._bitgen)
        self._template = self._bitgen.state

    def generator(self, shot_index: int, role: str) -> np.random.Generator:
        """Reposition and return the shared generator.

        The returned object is invalidated by the next call.
        """
        state = dict(self._template)
        state["state"] = {
            "counter": np.array([0, 0, shot_index, ROLES[role]], dtype=np.uint64),
            "key": self._key,
        }
        state["buffer"] = np.zeros(4, dtype=np.uint64)
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        state["uinteger"] = 0
        self._bitgen.state = state
        return self._gen

    def fresh(self, shot_index: int, role: str) -> np.random.Generator:
        """Standalone generator for (shot, role); safe to keep around."""
        counter = np.array([0, 0, shot_index, ROLES[role]], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(counter=counter, key=self._key))


class ShotBlock:
    """A contiguous block of shots drawing from their own streams.

    Samplers accept a ``ShotBlock`` wherever they accept a ``Generator``; each
    draw then returns one row per shot, row ``i`` coming from the stream of
    ``shot_indices[i]``.
    """

    def __init__(self, streams: ShotStreams, shot_indices):
        self.streams = streams
        self.shot_indices = np.asarray(shot_indices, dtype=np.int64)

    def __len__(self):
        return len(self.shot_indices)

    def complex_normal(self, role: str, n: int) -> np.ndarray:
        out = np.empty((len(self), n), dtype=np.complex128)
        for row, shot in enumerate(self.shot_indices):
            gen = self.streams.generator(int(shot), role)
            out[row] = gen.standard_normal(2 * n).view(np.complex128)
        out *= np.sqrt(0.5)
        return out

    def poisson(self, role: str, lam: np.ndarray) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        out = np.empty(lam.shape, dtype=np.int64)
        for row, shot in enumerate(self.shot_indices):
            out[row] = self.streams.generator(int(shot), role).poisson(lam[row])
        return out


def complex_normal(rng, n: int, role: str = "thermal", size=None) -> np.ndarray:
    """Circular complex Gaussian draws with E|z|^2 = 1.

    ``rng`` is a ``numpy.random.Generator`` (shape ``(n,)`` or ``(size, n)``)
    or a :class:`ShotBlock` (shape ``(len(block), n)``, ``size`` ignored).
    """
    if isinstance(rng, ShotBlock):
        return rng.complex_normal(role, n)
    shape = (2 * n,) if size is None else (size, 2 * n)
    return rng.standard_normal(shape).view(np.complex128) * np.sqrt(0.5)


def batch_size(rng, size=None):
    """Leading batch length implied by ``rng``/``size`` (None for one shot)."""
    if isinstance(rng, ShotBlock):
        return len(rng)
    return size
