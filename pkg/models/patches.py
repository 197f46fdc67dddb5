from typing import Dict

import numpy as np

from shared import InvalidArgumentError


class Patch:
    """A p x q crop x_k of a masked image."""

    def __init__(self, pixels):
        array = np.array(pixels, dtype=np.float32)
        if array.ndim != 2 or array.shape[0] < 1 or array.shape[1] < 1:
            raise InvalidArgumentError(f"patch must be a non-empty 2-D grid, got shape {array.shape}")
        array.setflags(write=False)
        self.pixels = array

    @property
    def p(self) -> int:
        return self.pixels.shape[0]

    @property
    def q(self) -> int:
        return self.pixels.shape[1]

    def __str__(self):
        return f"Patch({self.p}x{self.q})"


class PatchPlacement:
    """Placement rectangle of a patch inside the m x n source: realizes Q_k."""

    def __init__(self, top: int, left: int, p: int, q: int):
        if p < 1 or q < 1:
            raise InvalidArgumentError(f"patch size must be positive, got {p}x{q}")
        if top < 0 or left < 0:
            raise InvalidArgumentError(f"placement offsets must be non-negative, got ({top}, {left})")
        self.top = int(top)
        self.left = int(left)
        self.p = int(p)
        self.q = int(q)

    @property
    def bottom(self) -> int:
        return self.top + self.p

    @property
    def right(self) -> int:
        return self.left + self.q

    def fits(self, m: int, n: int) -> bool:
        return self.bottom <= m and self.right <= n

    def window(self):
        return slice(self.top, self.bottom), slice(self.left, self.right)

    def to_dict(self) -> Dict[str, int]:
        return {'top': self.top, 'left': self.left, 'p': self.p, 'q': self.q}

    @classmethod
    def from_dict(cls, data: Dict) -> 'PatchPlacement':
        try:
            return cls(int(data['top']), int(data['left']), int(data['p']), int(data['q']))
        except (KeyError, TypeError) as error:
            raise InvalidArgumentError(f"malformed placement {data!r}: {error}")

    def __eq__(self, other):
        if not isinstance(other, PatchPlacement):
            return NotImplemented
        return (self.top, self.left, self.p, self.q) == (other.top, other.left, other.p, other.q)

    def __hash__(self):
        return hash((self.top, self.left, self.p, self.q))

    def __repr__(self):
        return f"PatchPlacement(top={self.top}, left={self.left}, p={self.p}, q={self.q})"


class CoverageMap:
    """counts[i] = number of placements covering pixel i (K_i); K = number of placements."""

    def __init__(self, counts, K: int):
        array = np.array(counts, dtype=np.int32)
        if array.ndim != 2:
            raise InvalidArgumentError(f"coverage counts must be 2-D, got shape {array.shape}")
        if array.size and (array.min() < 0 or array.max() > K):
            raise InvalidArgumentError("coverage counts must lie in [0, K]")
        array.setflags(write=False)
        self.counts = array
        self.K = int(K)

    @property
    def shape(self):
        return self.counts.shape

    def __str__(self):
        covered = int(np.count_nonzero(self.counts))
        return f"CoverageMap({self.shape[0]}x{self.shape[1]}, K={self.K}, covered={covered})"
