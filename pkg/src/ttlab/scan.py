"""Streaming marker statistics over long outputs.

Scans an output of up to a few hundred million symbols without holding
it in memory: the path streams in fixed-size chunks, each chunk carries
the previous chunk's last ten symbols so occurrences straddling a
boundary are still seen exactly once, and the walk geometry between
consecutive occurrences folds into the running state. The result matches
find_markers plus the per-occurrence records, it just never materializes
the whole window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rngutil
from .markers import MARKER_LEN, MarkerRecord, find_markers
from .process import Scenery, TTOutput, scenery_str

DEFAULT_CHUNK = 1 << 22


@dataclass
class ScanResult:
    """Occurrence statistics of one streamed window [0, steps - 1]."""

    seed: int
    steps: int
    times: list[int]
    records: list[MarkerRecord]
    rate: float  # count / (steps - 10); 0 when the window can't hold a word

    @property
    def count(self) -> int:
        return len(self.times)

    def gap_histogram(self) -> list[list[int]]:
        """Power-of-two bins [lo, hi, count] over the inter-occurrence gaps."""
        gaps = np.diff(np.asarray(self.times))
        out = []
        if len(gaps) == 0:
            return out
        k = 0
        while (1 << k) <= gaps.max():
            lo, hi = 1 << k, (1 << (k + 1)) - 1
            c = int(((gaps >= lo) & (gaps <= hi)).sum())
            if c:
                out.append([lo, hi, c])
            k += 1
        return out

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "steps": self.steps,
            "count": self.count,
            "rate": self.rate,
            "gap_histogram": self.gap_histogram(),
            "records": [r.to_dict() for r in self.records],
        }


def scan_markers(
    seed: int,
    steps: int,
    trial: int = 0,
    chunk: int = DEFAULT_CHUNK,
    scenery: Scenery | None = None,
) -> ScanResult:
    """Stream the output of (seed, trial) over [0, steps - 1] and collect
    every decided marker occurrence with its inter-occurrence record.

    The path stream chunks transparently (each 0/1 draw consumes one
    byte), so the chunk size never changes which path is walked. Scenery
    cells materialize lazily in request order, which differs between
    chunkings; pass a pre-materialized ``scenery`` when a run must be
    comparable cell-for-cell with a one-shot window.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    chunk = max(chunk, 4 * MARKER_LEN)
    sc = scenery if scenery is not None else Scenery(rngutil.stream(seed, trial, rngutil.SCENERY))
    rng = rngutil.stream(seed, trial, rngutil.PATH)

    times: list[int] = []
    records: list[MarkerRecord] = []
    # running state: absolute position entering the next chunk, the trace
    # extrema since the last occurrence, and that occurrence's position
    n0 = 0
    run_min = run_max = 0
    last_t: int | None = None
    last_pos = 0
    tail_reads = np.empty(0, dtype=np.uint8)
    tail_steps = np.empty(0, dtype=np.uint8)
    tail_pos = np.empty(0, dtype=np.int64)

    done = 0
    while done < steps:
        m = min(chunk, steps - done)
        s = rng.integers(0, 2, size=m, dtype=np.uint8)
        f = 2 * s.astype(np.int64) - 1
        pos = n0 + np.concatenate([[0], np.cumsum(f)])  # n(doneers..done+m), m+1 entries
        reads = sc.values(int(pos.min()), int(pos.max()))[pos[:-1] - int(pos.min())]

        ext_reads = np.concatenate([tail_reads, reads])
        ext_steps = np.concatenate([tail_steps, s])
        ext_pos = np.concatenate([tail_pos, pos[:-1]])
        ext_start = done - len(tail_reads)
        found = find_markers(TTOutput(ext_start, ext_reads, ext_steps)).times

        for t in found:
            if times and t <= times[-1]:
                continue  # rescanned overlap from the previous chunk
            i = t - ext_start
            if last_t is not None:
                seg = ext_pos[max(last_t - ext_start, 0) : i + 1]
                lo = int(min(run_min, seg.min()))
                hi = int(max(run_max, seg.max()))
                fo, ba = hi - last_pos, lo - last_pos
                net = int(ext_pos[i]) - last_pos
                block = scenery_str(sc.values(last_pos + ba, last_pos + fo))
                records.append(MarkerRecord(t, t - last_t, net, fo, ba, block))
            times.append(t)
            last_t = t
            last_pos = int(ext_pos[i])
            run_min = run_max = last_pos
        # fold the trace into the running extrema, stopping short of the
        # tail times the next chunk rescans (its segment re-covers them)
        if last_t is not None:
            seg = ext_pos[max(last_t - ext_start, 0) : len(ext_pos) - (MARKER_LEN - 1)]
            if len(seg):
                run_min = int(min(run_min, seg.min()))
                run_max = int(max(run_max, seg.max()))

        keep = min(MARKER_LEN - 1, len(ext_reads))
        tail_reads = ext_reads[-keep:].copy()
        tail_steps = ext_steps[-keep:].copy()
        tail_pos = ext_pos[-keep:].copy()
        n0 = int(pos[-1])
        done += m

    rate = len(times) / (steps - MARKER_LEN + 1) if steps >= MARKER_LEN else 0.0
    return ScanResult(seed=seed, steps=steps, times=times, records=records, rate=rate)
