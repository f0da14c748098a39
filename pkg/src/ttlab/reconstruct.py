"""Scenery recovery from outputs and from marker-record chains.

A valid output determines the scenery on the visited range: every cell
the walker touched was read at least once, and revisits agree. Offsets
use the output's own position coordinates, so a window containing time 0
reconstructs in true scenery coordinates and the translate ambiguity of
other anchors is left to the alignment step.

Record chains reconstruct the same thing piecewise: each record's block
is placed at the offset accumulated from the preceding records' net
displacements, consecutive blocks overlap at least at the occurrence
cell, and disagreement on any overlap means the chain is malformed.

align_sceneries is the fiber matcher: it brute-forces every even
translate a2(i) = a1(i + k) and even reflection a2(i) = a1(k - i) over
the full overlap of the two domains.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContradictoryScenery, StitchConflict
from .markers import MarkerRecord
from .process import TTOutput, scenery_str, scenery_u8


class ReconstructedScenery:
    """Scenery cells over a contiguous offset interval [lo, hi]."""

    __slots__ = ("lo", "cells")

    def __init__(self, lo: int, cells: np.ndarray):
        assert len(cells) > 0
        self.lo = int(lo)
        self.cells = np.ascontiguousarray(cells, dtype=np.uint8)

    @property
    def hi(self) -> int:
        return self.lo + len(self.cells) - 1

    @property
    def domain(self) -> tuple[int, int]:
        return self.lo, self.hi

    def __len__(self) -> int:
        return len(self.cells)

    def cell_at(self, offset: int) -> int:
        if not (self.lo <= offset <= self.hi):
            raise KeyError(offset)
        return int(self.cells[offset - self.lo])

    def shifted(self, delta: int) -> "ReconstructedScenery":
        return ReconstructedScenery(self.lo + delta, self.cells)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReconstructedScenery):
            return NotImplemented
        return self.lo == other.lo and np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash((self.lo, self.cells.tobytes()))

    def __repr__(self) -> str:
        return f"ReconstructedScenery(lo={self.lo}, cells={scenery_str(self.cells)!r})"

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "cells": scenery_str(self.cells)}

    @classmethod
    def from_dict(cls, d: dict) -> "ReconstructedScenery":
        cells = scenery_u8(d["cells"])
        if int(d["hi"]) - int(d["lo"]) + 1 != len(cells):
            raise ValueError("cells length does not match [lo, hi]")
        return cls(int(d["lo"]), cells)


def validate_output(symbols, start: int = 0) -> TTOutput:
    """Check revisit consistency; return the output or raise.

    Accepts a TTOutput or a sequence of (scenery symbol, step) pairs with
    the window's start time. A walk revisiting an offset must read the
    symbol it read first; the earliest conflicting read decides the
    offset reported in ContradictoryScenery.
    """
    out = symbols if isinstance(symbols, TTOutput) else TTOutput.from_pairs(symbols, start)
    if len(out) == 0:
        return out
    pos = out.positions()
    order = np.argsort(pos, kind="stable")  # stable keeps time order within a cell
    p, r = pos[order], out.reads[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(p) != 0) + 1])
    lens = np.diff(np.concatenate([starts, [len(p)]]))
    ref = np.repeat(r[starts], lens)
    bad = np.flatnonzero(r != ref)
    if len(bad) > 0:
        t = order[bad].min()
        raise ContradictoryScenery(int(pos[t]))
    return out


def reconstruct_scenery(output: TTOutput, anchor_time: int | None = None) -> ReconstructedScenery:
    """Cells read by the walker, indexed by its position trace.

    anchor_time re-centers the offsets so the walker sits at 0 at that
    time. Output validity is assumed: revisits overwrite equal values.
    """
    if len(output) == 0:
        raise ValueError("cannot reconstruct from an empty output")
    pos = output.positions()
    if anchor_time is not None:
        pos = pos - pos[anchor_time - output.start]
    lo, hi = int(pos.min()), int(pos.max())
    cells = np.full(hi - lo + 1, 255, dtype=np.uint8)
    cells[pos - lo] = output.reads
    assert (cells != 255).all()  # unit steps leave no hole in the visited range
    return ReconstructedScenery(lo, cells)


def stitch_marker_records(
    records, final_scenery_anchor: ReconstructedScenery | None = None
) -> ReconstructedScenery:
    """Overlay consecutive records' blocks by accumulated net displacement.

    Offset 0 is the walker's position at the predecessor occurrence of
    the first record. final_scenery_anchor, when given, is a piece
    anchored at the last record's occurrence time and is overlaid at the
    final accumulated offset.
    """
    records = list(records)
    if not records and final_scenery_anchor is None:
        raise ValueError("nothing to stitch")
    for prev, rec in zip(records, records[1:]):
        if rec.time - prev.time != rec.gap_m:
            raise StitchConflict(f"record at {rec.time} does not chain onto {prev.time}")
    cells: dict[int, int] = {}
    cur = 0
    for rec in records:
        block = scenery_u8(rec.block)
        for j in range(len(block)):
            off = cur + rec.ba + j
            v = int(block[j])
            if cells.setdefault(off, v) != v:
                raise StitchConflict(f"conflicting cells at offset {off}")
        cur += rec.net
    if final_scenery_anchor is not None:
        s = final_scenery_anchor
        for off in range(s.lo, s.hi + 1):
            v = s.cell_at(off)
            if cells.setdefault(cur + off, v) != v:
                raise StitchConflict(f"conflicting cells at offset {cur + off}")
    lo, hi = min(cells), max(cells)
    if len(cells) != hi - lo + 1:
        raise StitchConflict("stitched blocks leave a gap")
    return ReconstructedScenery(lo, np.array([cells[o] for o in range(lo, hi + 1)], dtype=np.uint8))


@dataclass
class AlignmentResult:
    """Even translates and reflections verified on the full overlap.

    overlap_len is the largest overlap among the reported matches (0 when
    nothing matched); matches whose own overlap is under 32 cells are
    additionally listed in low_confidence, and (kind, k) pairs whose
    overlap was empty are listed in skipped rather than tested.
    """

    translates: list[int] = field(default_factory=list)
    reflections: list[int] = field(default_factory=list)
    overlap_len: int = 0
    low_confidence: list[tuple[str, int]] = field(default_factory=list)
    skipped: list[tuple[str, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "translates": list(self.translates),
            "reflections": list(self.reflections),
            "overlap_len": self.overlap_len,
            "low_confidence": [list(x) for x in self.low_confidence],
            "skipped": [list(x) for x in self.skipped],
        }


LOW_CONFIDENCE_OVERLAP = 32


def translate_overlap(s1: ReconstructedScenery, s2: ReconstructedScenery, k: int) -> tuple[int, int]:
    """Index range of s2 compared under s2(i) = s1(i + k); may be empty."""
    return max(s2.lo, s1.lo - k), min(s2.hi, s1.hi - k)


def reflection_overlap(s1: ReconstructedScenery, s2: ReconstructedScenery, k: int) -> tuple[int, int]:
    """Index range of s2 compared under s2(i) = s1(k - i); may be empty."""
    return max(s2.lo, k - s1.hi), min(s2.hi, k - s1.lo)


def align_sceneries(
    s1: ReconstructedScenery, s2: ReconstructedScenery, k_range: int
) -> AlignmentResult:
    """Exhaustive even-k fiber match of s2 against s1.

    Tests every even k in [-k_range, k_range] for the translate relation
    s2(i) = s1(i + k) and the reflection relation s2(i) = s1(k - i) over
    the full overlap of the domains. Odd k never matches scenery
    processes of one walk (positions keep time parity) and is excluded.
    """
    if k_range < 0:
        raise ValueError("k_range must be >= 0")
    res = AlignmentResult()
    for k in range(-k_range, k_range + 1):
        if k % 2:
            continue
        a, b = translate_overlap(s1, s2, k)
        if a > b:
            res.skipped.append(("translate", k))
        else:
            seg2 = s2.cells[a - s2.lo : b - s2.lo + 1]
            seg1 = s1.cells[a + k - s1.lo : b + k - s1.lo + 1]
            if np.array_equal(seg2, seg1):
                res.translates.append(k)
                res.overlap_len = max(res.overlap_len, b - a + 1)
                if b - a + 1 < LOW_CONFIDENCE_OVERLAP:
                    res.low_confidence.append(("translate", k))
        a, b = reflection_overlap(s1, s2, k)
        if a > b:
            res.skipped.append(("reflection", k))
        else:
            seg2 = s2.cells[a - s2.lo : b - s2.lo + 1]
            seg1 = s1.cells[k - b - s1.lo : k - a - s1.lo + 1][::-1]
            if np.array_equal(seg2, seg1):
                res.reflections.append(k)
                res.overlap_len = max(res.overlap_len, b - a + 1)
                if b - a + 1 < LOW_CONFIDENCE_OVERLAP:
                    res.low_confidence.append(("reflection", k))
    return res
