"""Random walk over a random binary scenery.

A scenery is a doubly infinite iid fair sequence over {h, t} indexed by
space; a path is a doubly infinite iid fair sequence over {L, R} indexed
by time. The walker starts at offset 0 and moves by f(R) = +1, f(L) = -1,
so its position obeys n(0) = 0 and n(i+1) = n(i) + f(b_i); for i < 0,
n(i) = -(f(b_i) + ... + f(b_{-1})). The observed process emits the pair
(scenery symbol at n(i), step b_i) at each time i.

Symbols are numpy uint8 internally: scenery 0 = h, 1 = t; steps 0 = L,
1 = R. Characters appear only at the API edges and in serialization.
Doubly infinite objects are realized as lazily extendable finite buffers:
any query outside the materialized region draws fresh fair cells from the
object's own generator, which makes recurrence-style searches runnable
without an a priori bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfWindow

SCENERY_CHARS = "ht"
STEP_CHARS = "LR"

_SCENERY_CODE = {"h": 0, "t": 1, 0: 0, 1: 1}
_STEP_CODE = {"L": 0, "R": 1, 0: 0, 1: 1}


def scenery_str(values: np.ndarray) -> str:
    return "".join(SCENERY_CHARS[v] for v in values)


def steps_str(values: np.ndarray) -> str:
    return "".join(STEP_CHARS[v] for v in values)


def _chars_to_u8(text: str, table: dict) -> np.ndarray:
    out = np.empty(len(text), dtype=np.uint8)
    for i, c in enumerate(text):
        out[i] = table[c]
    return out


def scenery_u8(text: str) -> np.ndarray:
    return _chars_to_u8(text, _SCENERY_CODE)


def steps_u8(text: str) -> np.ndarray:
    return _chars_to_u8(text, _STEP_CODE)


def step_value(b) -> int:
    """f(R) = +1, f(L) = -1."""
    return 2 * _STEP_CODE[b] - 1


class Scenery:
    """Lazily extendable binary scenery with optional pinned (conditioned) cells.

    Once a cell is materialized its value never changes. Pinned cells are
    those whose values were imposed by conditioning rather than drawn; the
    pinned set is always a subset of the materialized cells. Materialization
    order matters for which random values land where, so a Scenery is
    deterministic for a fixed seed and call sequence, and must be confined
    to one thread.
    """

    def __init__(self, seed_or_rng=0):
        if isinstance(seed_or_rng, np.random.Generator):
            self._rng = seed_or_rng
        else:
            self._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed_or_rng)))
        self._lo = 0
        self._cells = np.full(0, -1, dtype=np.int8)  # -1 = not materialized
        self.pinned: set[int] = set()

    @classmethod
    def from_string(cls, cells: str, lo: int, seed_or_rng=0, pin: bool = False) -> "Scenery":
        sc = cls(seed_or_rng)
        vals = scenery_u8(cells)
        sc._grow(lo, lo + len(vals) - 1)
        sc._cells[lo - sc._lo : lo - sc._lo + len(vals)] = vals
        if pin:
            sc.pinned.update(range(lo, lo + len(vals)))
        return sc

    def _grow(self, lo: int, hi: int) -> None:
        # widen the buffer (unmaterialized fill), no random draws here
        if len(self._cells) == 0:
            self._lo = lo
            self._cells = np.full(hi - lo + 1, -1, dtype=np.int8)
            return
        cur_hi = self._lo + len(self._cells) - 1
        if lo < self._lo:
            pad = max(self._lo - lo, len(self._cells) // 2)
            self._cells = np.concatenate([np.full(pad, -1, dtype=np.int8), self._cells])
            self._lo -= pad
        if hi > cur_hi:
            pad = max(hi - cur_hi, len(self._cells) // 2)
            self._cells = np.concatenate([self._cells, np.full(pad, -1, dtype=np.int8)])

    def _materialize(self, lo: int, hi: int) -> None:
        self._grow(lo, hi)
        view = self._cells[lo - self._lo : hi - self._lo + 1]
        fresh = view < 0
        k = int(fresh.sum())
        if k:
            view[fresh] = self._rng.integers(0, 2, k, dtype=np.int8)

    def values(self, lo: int, hi: int) -> np.ndarray:
        """Cells at offsets lo..hi inclusive, materializing as needed."""
        if lo > hi:
            return np.empty(0, dtype=np.uint8)
        self._materialize(lo, hi)
        return self._cells[lo - self._lo : hi - self._lo + 1].astype(np.uint8)

    def value_at(self, offset: int) -> int:
        return int(self.values(offset, offset)[0])

    def char_at(self, offset: int) -> str:
        return SCENERY_CHARS[self.value_at(offset)]

    def pin(self, offset: int, value) -> None:
        v = _SCENERY_CODE[value]
        self._grow(offset, offset)
        slot = offset - self._lo
        if self._cells[slot] >= 0 and self._cells[slot] != v:
            raise ValueError(f"cell {offset} already materialized with a different value")
        self._cells[slot] = v
        self.pinned.add(offset)

    def materialized_range(self) -> tuple[int, int] | None:
        idx = np.flatnonzero(self._cells >= 0)
        if len(idx) == 0:
            return None
        return self._lo + int(idx[0]), self._lo + int(idx[-1])


def gen_scenery(seed: int, lo: int, hi: int) -> Scenery:
    """Scenery with cells at offsets [lo, hi] materialized iid fair."""
    if lo > hi:
        raise ValueError("lo must be <= hi")
    sc = Scenery(seed)
    sc.values(lo, hi)
    return sc


@dataclass(frozen=True)
class PathSegment:
    """Steps over the contiguous time interval [start, start + len - 1]."""

    start: int
    steps: np.ndarray  # uint8, 0 = L, 1 = R

    @classmethod
    def from_string(cls, text: str, start: int) -> "PathSegment":
        return cls(start, steps_u8(text))

    @property
    def hi(self) -> int:
        return self.start + len(self.steps) - 1

    def __len__(self) -> int:
        return len(self.steps)

    def covers(self, lo: int, hi: int) -> bool:
        # the empty interval (lo > hi) is always covered
        return lo > hi or (self.start <= lo and hi <= self.hi)

    def step_at(self, i: int) -> int:
        if not (self.start <= i <= self.hi):
            raise OutOfWindow(f"time {i} outside path domain [{self.start}, {self.hi}]")
        return int(self.steps[i - self.start])

    def char_at(self, i: int) -> str:
        return STEP_CHARS[self.step_at(i)]

    def f(self, lo: int, hi: int) -> np.ndarray:
        """Signed increments f(b_i) for i in [lo, hi]."""
        if not self.covers(lo, hi):
            raise OutOfWindow(f"[{lo}, {hi}] outside path domain [{self.start}, {self.hi}]")
        s = self.steps[lo - self.start : hi - self.start + 1]
        return (2 * s.astype(np.int64)) - 1

    def to_string(self) -> str:
        return steps_str(self.steps)


def gen_path(seed: int, lo: int, hi: int) -> PathSegment:
    if lo > hi:
        raise ValueError("lo must be <= hi")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    return PathSegment(lo, rng.integers(0, 2, hi - lo + 1, dtype=np.uint8))


def walk_position(path: PathSegment, i: int) -> int:
    """n(i): net displacement of the walk at time i, with n(0) = 0.

    For i > 0 this sums f(b_0) .. f(b_{i-1}); for i < 0 it is minus the sum
    of f(b_i) .. f(b_{-1}).
    """
    if i == 0:
        return 0
    if i > 0:
        return int(path.f(0, i - 1).sum())
    return -int(path.f(i, -1).sum())


def positions(path: PathSegment, lo: int, hi: int) -> np.ndarray:
    """n(i) for every i in [lo, hi], as one vectorized pass."""
    if lo > hi:
        return np.empty(0, dtype=np.int64)
    need_lo, need_hi = min(lo, 0), max(hi, 0) - 1
    if need_lo > need_hi:  # lo == hi == 0
        return np.zeros(1, dtype=np.int64)
    f = path.f(need_lo, need_hi)
    # n(t) for t in [need_lo, need_hi + 1], anchored so n(0) = 0
    n = np.concatenate([[0], np.cumsum(f)])
    n -= n[-need_lo]
    return n[lo - need_lo : hi - need_lo + 1]


@dataclass(frozen=True)
class WalkGeometry:
    """Distances walked over a time interval [d, e].

    fo is the farthest the walk gets to the right of its starting offset
    (the empty partial sum counts, so fo >= 0), ba the farthest left
    (ba <= 0), net the full displacement. visited_lo..visited_hi is the
    exact set of offsets visited: the walk moves by unit steps, so the
    visited set is the full integer interval and its size is fo - ba + 1.
    """

    fo: int
    ba: int
    net: int
    visited_lo: int
    visited_hi: int

    def __post_init__(self):
        assert self.ba <= 0 <= self.fo
        assert self.ba <= self.net <= self.fo
        assert self.visited_hi - self.visited_lo == self.fo - self.ba

    @property
    def span(self) -> int:
        """visited_hi - visited_lo. Always fo - ba."""
        return self.fo - self.ba

    @property
    def cell_count(self) -> int:
        """Number of distinct offsets visited. Always fo - ba + 1."""
        return self.fo - self.ba + 1


def geometry_from_steps(steps: np.ndarray) -> tuple[int, int, int]:
    """(fo, ba, net) of a step word, including the empty partial sum."""
    f = 2 * steps.astype(np.int64) - 1
    ps = np.concatenate([[0], np.cumsum(f)])
    return int(ps.max()), int(ps.min()), int(ps[-1])


def walk_geometry(path: PathSegment, d: int, e: int) -> WalkGeometry:
    """Geometry of the walk over times [d, e] (steps b_d .. b_{e-1}).

    Visited offsets are absolute (anchored at n(0) = 0), so the path domain
    must reach time 0.
    """
    if d >= e:
        raise ValueError("d must be < e")
    if not path.covers(d, e - 1):
        raise OutOfWindow(f"steps [{d}, {e - 1}] outside path domain")
    fo, ba, net = geometry_from_steps(path.steps[d - path.start : e - path.start])
    nd = walk_position(path, d)
    return WalkGeometry(fo, ba, net, nd + ba, nd + fo)


def block_seen(scenery: Scenery, path: PathSegment, d: int, e: int) -> str:
    """Scenery values over the offsets visited during [d, e], ascending."""
    if d == e:
        nd = walk_position(path, d)
        return scenery_str(scenery.values(nd, nd))
    g = walk_geometry(path, d, e)
    return scenery_str(scenery.values(g.visited_lo, g.visited_hi))


class TTOutput:
    """The observed process on a finite time window.

    symbols[i] = (scenery symbol at n(start + i), step b_{start + i}).
    Stored as two parallel uint8 arrays (reads, steps). Instances are
    treated as immutable values.
    """

    __slots__ = ("start", "reads", "steps")

    def __init__(self, start: int, reads: np.ndarray, steps: np.ndarray):
        if len(reads) != len(steps):
            raise ValueError("reads and steps must have equal length")
        self.start = start
        self.reads = np.asarray(reads, dtype=np.uint8)
        self.steps = np.asarray(steps, dtype=np.uint8)

    @property
    def hi(self) -> int:
        return self.start + len(self.reads) - 1

    @property
    def window(self) -> tuple[int, int]:
        return self.start, self.hi

    def __len__(self) -> int:
        return len(self.reads)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TTOutput):
            return NotImplemented
        return (
            self.start == other.start
            and np.array_equal(self.reads, other.reads)
            and np.array_equal(self.steps, other.steps)
        )

    def __hash__(self):
        return hash((self.start, self.reads.tobytes(), self.steps.tobytes()))

    def __repr__(self):
        return f"TTOutput(start={self.start}, len={len(self)})"

    def symbol_at(self, t: int) -> tuple[str, str]:
        i = t - self.start
        if not (0 <= i < len(self)):
            raise OutOfWindow(f"time {t} outside output window {self.window}")
        return SCENERY_CHARS[self.reads[i]], STEP_CHARS[self.steps[i]]

    def path(self) -> PathSegment:
        return PathSegment(self.start, self.steps.copy())

    def positions(self) -> np.ndarray:
        """Walker offsets n(t) for every t in the window.

        Anchored at n(0) = 0 when 0 is inside the window, else at
        n(start) = 0.
        """
        f = 2 * self.steps.astype(np.int64) - 1
        n = np.concatenate([[0], np.cumsum(f)])[:-1]  # n relative to window start
        if self.start <= 0 <= self.hi:
            n -= n[-self.start]
        return n

    def slice(self, d: int, e: int) -> "TTOutput":
        """Sub-window [d, e] inclusive."""
        if not (self.start <= d <= e <= self.hi):
            raise OutOfWindow(f"[{d}, {e}] outside output window {self.window}")
        a, b = d - self.start, e - self.start + 1
        return TTOutput(d, self.reads[a:b].copy(), self.steps[a:b].copy())

    def to_dict(self) -> dict:
        return {"start": self.start, "reads": scenery_str(self.reads), "steps": steps_str(self.steps)}

    @classmethod
    def from_dict(cls, d: dict) -> "TTOutput":
        return cls(int(d["start"]), scenery_u8(d["reads"]), steps_u8(d["steps"]))

    @classmethod
    def from_pairs(cls, symbols, start: int) -> "TTOutput":
        reads = np.array([_SCENERY_CODE[a] for a, _ in symbols], dtype=np.uint8)
        steps = np.array([_STEP_CODE[b] for _, b in symbols], dtype=np.uint8)
        return cls(start, reads, steps)


def generate_output(scenery: Scenery, path: PathSegment, lo: int, hi: int) -> TTOutput:
    """Observed process on [lo, hi]: symbol at time i is (scenery[n(i)], b_i)."""
    if lo > hi:
        raise ValueError("lo must be <= hi")
    if not path.covers(lo, hi):
        raise OutOfWindow(f"steps [{lo}, {hi}] outside path domain")
    n = positions(path, lo, hi)
    cells = scenery.values(int(n.min()), int(n.max()))
    reads = cells[n - int(n.min())]
    steps = path.steps[lo - path.start : hi - path.start + 1].copy()
    return TTOutput(lo, reads, steps)


def inputs_to_dict(scenery: Scenery, path: PathSegment, lo: int, hi: int) -> dict:
    """Serialize a scenery window and path window sharing one start offset."""
    return {
        "start": lo,
        "scenery": scenery_str(scenery.values(lo, hi)),
        "path": steps_str(path.steps[lo - path.start : hi - path.start + 1]),
    }


def inputs_from_dict(d: dict, seed: int = 0) -> tuple[Scenery, PathSegment]:
    start = int(d["start"])
    return (
        Scenery.from_string(d["scenery"], start, seed),
        PathSegment.from_string(d["path"], start),
    )
