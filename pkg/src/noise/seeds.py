"""
Seed plumbing for reproducible, independent random streams.

Every sampler takes a SeedPolicy and builds its own counter-based Philox
generator from (master_seed, path_index, stream_tag), so workers never need to
coordinate and any path can be regenerated on its own.
"""

import enum
from dataclasses import dataclass, replace

import numpy as np

from src.errors import ConfigurationError

_MAX_SEED = 2**64


class StreamTag(enum.IntEnum):
    BROWNIAN = 0
    LEVY = 1
    INITIAL = 2
    REFERENCE = 3
    PROBE = 4
    BOOTSTRAP = 5


@dataclass(frozen=True)
class SeedPolicy:
    master_seed: int
    path_index: int = 0
    stream_tag: StreamTag = StreamTag.BROWNIAN

    def __post_init__(self) -> None:
        if not 0 <= int(self.master_seed) < _MAX_SEED:
            raise ConfigurationError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if int(self.path_index) < 0:
            raise ConfigurationError(f"path_index must be >= 0, got {self.path_index}")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed),
            spawn_key=(int(self.path_index), int(self.stream_tag)),
        )
        return np.random.Generator(np.random.Philox(seq))

    def for_path(self, path_index: int) -> "SeedPolicy":
        return replace(self, path_index=path_index)

    def with_stream(self, stream_tag: StreamTag) -> "SeedPolicy":
        return replace(self, stream_tag=stream_tag)
