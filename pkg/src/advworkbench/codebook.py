"""Random codeword target representations."""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class Codebook:
    """``n_classes`` codewords of length ``d`` drawn from U(-1, 1).

    ``seed`` acts as the secret key; ``stream_offset`` counts how many PCG64
    jumps were needed to avoid a degenerate draw.
    """

    codewords: np.ndarray
    seed: int
    stream_offset: int = 0
    events: tuple = field(default=())

    def __post_init__(self):
        cw = np.array(self.codewords, dtype=np.float64)
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)

    @property
    def n_classes(self):
        return self.codewords.shape[0]

    @property
    def d(self):
        return self.codewords.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Codebook):
            return NotImplemented
        return (self.seed == other.seed and self.stream_offset == other.stream_offset
                and np.array_equal(self.codewords, other.codewords))

    def __hash__(self):
        return hash((self.seed, self.stream_offset, self.codewords.tobytes()))


def _draw(seed, offset, n_classes, d):
    bitgen = np.random.PCG64(seed)
    if offset:
        bitgen = bitgen.jumped(offset)
    return np.random.Generator(bitgen).uniform(-1.0, 1.0, size=(n_classes, d))


def min_pairwise_distance(codewords):
    cw = np.asarray(codewords, dtype=np.float64)
    diff = cw[:, None, :] - cw[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    iu = np.triu_indices(cw.shape[0], k=1)
    return float(dist[iu].min())


def generate_codebook(seed, n_classes, d, max_attempts=64):
    """Sample a codebook from PCG64(seed).

    A draw containing an exact -1 (outside the open interval) or two identical
    rows is discarded and the stream is jumped forward by one; every such
    event is recorded on the returned codebook.
    """
    if n_classes < 2:
        raise ValueError(f"n_classes must be >= 2, got {n_classes}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if not 0 <= int(seed) < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    events = []
    for offset in range(max_attempts):
        cw = _draw(int(seed), offset, n_classes, d)
        if np.any(cw <= -1.0):
            events.append(f"offset {offset}: entry at -1, regenerated")
            continue
        if min_pairwise_distance(cw) == 0.0:
            events.append(f"offset {offset}: duplicate codewords, regenerated")
            continue
        return Codebook(cw, int(seed), offset, tuple(events))
    raise RuntimeError(f"could not draw a valid codebook in {max_attempts} attempts")
