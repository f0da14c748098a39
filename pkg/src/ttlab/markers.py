"""Marker coding: the 11-symbol marker word, occurrence records, and surgery.

The marker word is the fixed output block

    (h,L) (h,L) (h,L) (h,R) (h,R) (h,L) (h,R) (h,L) (h,L) (h,L) (t,L)

It reads scenery h,h,h,h,t at relative offsets 0..-4 and its first ten
steps have net = -4, fo = 0, ba = -4. The alternate word used by rewrite
surgery differs in the steps at indices 4..6 only (R,L,R -> L,R,R), visits
the same offsets in a different order, reads the same five cells, and has
identical distances. Neither word can overlap itself or the other in a
way compatible with a marker occurrence; tests verify this by brute force
over all alignments, which is what makes rewriting context-free.

A time t is labeled by: not-in-marker, or a MarkerRecord carrying the gap
m to the previous occurrence plus the walk distances and the block of
scenery seen over [t - m, t], or edge-unknown when the window truncates
the decision. Two outputs are equivalent1 when their scenery reads agree
everywhere, equivalent2 when their labels agree everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotFoundInWindow, OutOfWindow, StraddlingMarker, WindowMismatch
from .process import TTOutput, geometry_from_steps, scenery_str, scenery_u8, steps_u8

MARKER_LEN = 11
MARKER_READS = scenery_u8("hhhhhhhhhht")
MARKER_STEPS = steps_u8("LLLRRLRLLLL")
ALT_STEPS = steps_u8("LLLRLRRLLLL")

# indices where the alternate word's steps differ from the marker word's
REWRITE_IDX = np.flatnonzero(MARKER_STEPS != ALT_STEPS)


def marker_word(start: int = 0, alternate: bool = False) -> TTOutput:
    steps = ALT_STEPS if alternate else MARKER_STEPS
    return TTOutput(start, MARKER_READS.copy(), steps.copy())


@dataclass
class MarkerScan:
    """Occurrence times plus edge candidates the window cannot decide.

    Iteration and indexing run over the decided times. An undecided time
    is one within ten symbols of the window's right edge whose visible
    prefix matches the marker word so far.
    """

    times: list[int]
    undecided: list[int]

    def __iter__(self):
        return iter(self.times)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i):
        return self.times[i]


def find_markers(output: TTOutput) -> MarkerScan:
    """All decided marker occurrence times in the window, ascending."""
    reads, steps = output.reads, output.steps
    m = len(reads) - (MARKER_LEN - 1)
    if m > 0:
        cand = np.flatnonzero((reads[:m] == MARKER_READS[0]) & (steps[:m] == MARKER_STEPS[0]))
        for k in range(1, MARKER_LEN):
            if len(cand) == 0:
                break
            cand = cand[(reads[cand + k] == MARKER_READS[k]) & (steps[cand + k] == MARKER_STEPS[k])]
        times = [output.start + int(i) for i in cand]
    else:
        times = []
    undecided = []
    for i in range(max(0, len(reads) - (MARKER_LEN - 1)), len(reads)):
        n = len(reads) - i
        if np.array_equal(reads[i:], MARKER_READS[:n]) and np.array_equal(steps[i:], MARKER_STEPS[:n]):
            undecided.append(output.start + i)
    return MarkerScan(times, undecided)


@dataclass(frozen=True)
class MarkerRecord:
    """Label data for a marker occurrence at ``time``.

    gap_m is the distance to the previous occurrence; net/fo/ba are the
    walk distances over [time - gap_m, time] (steps b_{time-m} .. b_{time-1});
    block is the scenery seen over that interval, ascending by offset.
    """

    time: int
    gap_m: int
    net: int
    fo: int
    ba: int
    block: str

    def __post_init__(self):
        assert self.gap_m >= 1
        assert self.ba <= 0 <= self.fo
        assert self.ba <= self.net <= self.fo
        assert len(self.block) == self.fo - self.ba + 1

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "m": self.gap_m,
            "net": self.net,
            "fo": self.fo,
            "ba": self.ba,
            "block": self.block,
        }


@dataclass(frozen=True)
class NotInS:
    pass


@dataclass(frozen=True)
class InS:
    record: MarkerRecord


@dataclass(frozen=True)
class EdgeUnknown:
    """A label the window cannot decide.

    kind is "no_predecessor" (marker occurrence whose gap leaves the
    window) or "truncated" (possible occurrence cut off by the right
    edge). Two edge labels compare equal when kind and time agree; the
    symbols they are based on are then identical by construction.
    """

    kind: str
    time: int


def block_from_output(output: TTOutput, d: int, e: int) -> str:
    """Scenery seen over [d, e], read off the output's own symbols."""
    sub = output.slice(d, e)
    f = 2 * sub.steps.astype(np.int64) - 1
    pos = np.concatenate([[0], np.cumsum(f)])[:-1]  # relative to n(d)
    lo, hi = int(pos.min()), int(pos.max())
    cells = np.full(hi - lo + 1, -1, dtype=np.int16)
    cells[pos - lo] = sub.reads
    assert (cells >= 0).all()  # unit steps visit every offset in the range
    return scenery_str(cells.astype(np.uint8))


def _label(output: TTOutput, scan: MarkerScan, t: int) -> NotInS | InS | EdgeUnknown:
    if t in scan.undecided:
        return EdgeUnknown("truncated", t)
    if t not in scan.times:
        return NotInS()
    prev = [u for u in scan.times if u < t]
    if not prev:
        return EdgeUnknown("no_predecessor", t)
    m = t - prev[-1]
    a, b = t - m - output.start, t - output.start
    fo, ba, net = geometry_from_steps(output.steps[a:b])
    block = block_from_output(output, t - m, t)
    return InS(MarkerRecord(t, m, net, fo, ba, block))


def pprime_label(output: TTOutput, t: int) -> NotInS | InS | EdgeUnknown:
    """Label of time t: marker record, not-in-marker, or edge-unknown."""
    if not (output.start <= t <= output.hi):
        raise OutOfWindow(f"time {t} outside output window {output.window}")
    return _label(output, find_markers(output), t)


def equivalent1(o1: TTOutput, o2: TTOutput) -> bool:
    """Same scenery-process name: first coordinates agree at every time."""
    if o1.window != o2.window:
        raise WindowMismatch(f"{o1.window} vs {o2.window}")
    return bool(np.array_equal(o1.reads, o2.reads))


def equivalent2(o1: TTOutput, o2: TTOutput) -> bool:
    """Same label at every time of the window.

    Labels at non-marker times are all NotInS, so equality reduces to:
    equal occurrence times, equal undecided edge candidates, and equal
    records (or edge kinds) at each occurrence.
    """
    if o1.window != o2.window:
        raise WindowMismatch(f"{o1.window} vs {o2.window}")
    s1, s2 = find_markers(o1), find_markers(o2)
    if s1.times != s2.times or s1.undecided != s2.undecided:
        return False
    return all(_label(o1, s1, t) == _label(o2, s2, t) for t in s1.times)


def rewrite_markers(output: TTOutput, n1: int, n2: int) -> TTOutput:
    """Replace every marker occurrence fully inside [n1, n2] by the alternate word.

    Only step coordinates change (indices 4..6 of each occurrence), so the
    scenery process, the walk distances over any interval containing
    [n1, n2], and all occurrences outside [n1, n2] are untouched.
    """
    if not (output.start <= n1 < n2 <= output.hi):
        raise OutOfWindow(f"[{n1}, {n2}] outside output window {output.window}")
    scan = find_markers(output)
    for t in scan.times:
        for edge in (n1, n2):
            if t < edge <= t + MARKER_LEN - 1 or t <= edge < t + MARKER_LEN - 1:
                if not (n1 <= t and t + MARKER_LEN - 1 <= n2):
                    raise StraddlingMarker(f"occurrence at {t} straddles [{n1}, {n2}]")
    for t in scan.undecided:
        if t <= n2:
            raise StraddlingMarker(f"undecidable occurrence candidate at {t} near window edge")
    steps = output.steps.copy()
    for t in scan.times:
        if n1 <= t and t + MARKER_LEN - 1 <= n2:
            i = t - output.start
            steps[i + 4 : i + 7] = ALT_STEPS[4:7]
    return TTOutput(output.start, output.reads.copy(), steps)


def _blocked_times(scan: MarkerScan) -> set[int]:
    """Times overlapping any occurrence or undecided candidate."""
    out: set[int] = set()
    for t in list(scan.times) + list(scan.undecided):
        out.update(range(t, t + MARKER_LEN))
    return out


def choose_n1_n2(o1: TTOutput, o2: TTOutput, m_bound: int) -> tuple[int, int]:
    """Boundary times for rewrite surgery around a disagreement region.

    Requires o1, o2 on one window, agreeing outside [-m_bound, m_bound].
    Returns (N1, N2) with N1 < -m_bound and N2 > m_bound such that, for
    both outputs, the walk over [N1, m_bound] attains its minimum at N1
    and the walk over [N1, N2] attains its maximum at N2, with neither
    time overlapping a marker occurrence in either output. The search
    scans outward and is deterministic.
    """
    if o1.window != o2.window:
        raise WindowMismatch(f"{o1.window} vs {o2.window}")
    lo, hi = o1.window
    if not (lo <= -m_bound and m_bound <= hi and lo <= 0 <= hi):
        raise OutOfWindow("window does not contain the disagreement bound")
    a, b = -m_bound - lo, m_bound - lo
    if not (
        np.array_equal(o1.reads[:a], o2.reads[:a])
        and np.array_equal(o1.steps[:a], o2.steps[:a])
        and np.array_equal(o1.reads[b + 1 :], o2.reads[b + 1 :])
        and np.array_equal(o1.steps[b + 1 :], o2.steps[b + 1 :])
    ):
        raise ValueError("outputs disagree outside [-m_bound, m_bound]")

    n_1, n_2 = o1.positions(), o2.positions()
    blocked = _blocked_times(find_markers(o1)) | _blocked_times(find_markers(o2))

    # minima of n over [t, m_bound], for t <= m_bound: reversed running min
    def revmin(n):
        seg = n[: b + 1]
        return np.minimum.accumulate(seg[::-1])[::-1]

    rm1, rm2 = revmin(n_1), revmin(n_2)
    cand1 = [
        lo + int(i)
        for i in np.flatnonzero((n_1[:a] == rm1[:a]) & (n_2[:a] == rm2[:a]))[::-1]
        if lo + int(i) not in blocked
    ]
    for N1 in cand1:
        j = N1 - lo
        cm1 = np.maximum.accumulate(n_1[j:])
        cm2 = np.maximum.accumulate(n_2[j:])
        ok = (n_1[j:] == cm1) & (n_2[j:] == cm2)
        for i in np.flatnonzero(ok[b + 1 - j :]):
            N2 = m_bound + 1 + int(i)
            if N2 not in blocked:
                return N1, N2
    raise NotFoundInWindow("no admissible boundary pair in the window")
