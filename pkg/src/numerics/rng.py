"""Reproducible, splittable random streams."""
import zlib
from dataclasses import dataclass

import numpy as np
import torch


@dataclass(frozen=True)
class SeededRng:
    """A seed plus a stream path.

    Every call to ``numpy()`` or ``torch()`` returns a fresh generator positioned
    at the start of this stream, so callers derive a distinct stream per use.
    """

    seed: int
    stream: tuple[int, ...] = ()

    def derive(self, *keys: int | str) -> "SeededRng":
        encoded = tuple(k if isinstance(k, int) else zlib.crc32(k.encode("utf-8")) for k in keys)
        return SeededRng(self.seed, self.stream + encoded)

    def _sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed, spawn_key=self.stream)

    def numpy(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self._sequence()))

    def torch(self) -> torch.Generator:
        state = self._sequence().generate_state(2, dtype=np.uint32)
        generator = torch.Generator()
        generator.manual_seed((int(state[0]) << 31) ^ int(state[1]))
        return generator
