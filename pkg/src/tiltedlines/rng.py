"""Reproducible counter-based random streams (philox2x64-10).

A stream is identified by (seed, stream_id); its draws are a pure function of
(key, counter).  Distinct stream_ids give independent streams, and child
streams derived with split() are independent of the parent and of each other.
"""

import numpy as np

from . import _kernels as _k


def _mix(seed: int, stream_id: int) -> int:
    a = int(_k.splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
    b = int(_k.splitmix64(np.uint64(stream_id & 0xFFFFFFFFFFFFFFFF)))
    return int(_k.splitmix64(np.uint64(a ^ (b + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF)))


class RngStream:
    """One logical stream of uniforms/normals with an explicit counter.

    Identical (seed, stream_id, counter) always reproduces the same output
    sequence, independent of platform or thread scheduling.
    """

    __slots__ = ("seed", "stream_id", "counter", "_key")

    def __init__(self, seed: int, stream_id: int = 0, counter: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.counter = int(counter)
        self._key = np.uint64(_mix(self.seed, self.stream_id))

    @property
    def key(self) -> np.uint64:
        return self._key

    def split(self, label: int) -> "RngStream":
        """Independent child stream; deterministic in (parent ids, label)."""
        child = _mix(int(self._key), label)
        return RngStream(self.seed, child, 0)

    def child(self) -> "RngStream":
        """Fresh child stream; consumes one counter slot, so successive calls
        on the same parent give independent children."""
        c = self.counter
        self.counter = c + 1
        return self.split(c ^ 0x6368696C64)

    def uniform(self, size=None):
        """Uniforms in (0, 1); advances the counter by the number of draws."""
        if size is None:
            u = _k.u01(self._key, 0, self.counter)
            self.counter += 1
            return float(u)
        n = int(np.prod(size)) if not np.isscalar(size) else int(size)
        out = np.empty(n)
        _k.u01_fill(out, self._key, 0, self.counter)
        self.counter += n
        return out.reshape(size) if not np.isscalar(size) else out

    def normal(self, size=None):
        """Standard normals via the inverse CDF of uniform draws."""
        u = self.uniform(size)
        if size is None:
            return float(_k.ndtri(u))
        flat = np.ascontiguousarray(np.asarray(u).ravel())
        out = np.empty(flat.shape)
        _k.ndtri_fill(out, flat)
        return out.reshape(np.asarray(u).shape)

    def state(self) -> dict:
        return {"seed": self.seed, "stream_id": self.stream_id,
                "counter": self.counter}

    @classmethod
    def from_state(cls, state: dict) -> "RngStream":
        return cls(state["seed"], state["stream_id"], state["counter"])

    def __repr__(self):
        return (f"RngStream(seed={self.seed}, stream_id={self.stream_id}, "
                f"counter={self.counter})")
