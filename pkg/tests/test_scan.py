"""Streamed marker scan against the in-memory scanner."""

import numpy as np
import pytest

from ttlab import rngutil
from ttlab.markers import InS, find_markers, pprime_label
from ttlab.process import PathSegment, Scenery, generate_output
from ttlab.reconstruct import reconstruct_scenery, stitch_marker_records
from ttlab.scan import ScanResult, scan_markers


def _premat(seed, radius=6000):
    sc = Scenery(rngutil.stream(seed, 0, rngutil.SCENERY))
    sc.values(-radius, radius)
    return sc


def _one_shot(seed, steps):
    sc = _premat(seed)
    rng = rngutil.stream(seed, 0, rngutil.PATH)
    path = PathSegment(0, rng.integers(0, 2, size=steps, dtype=np.uint8))
    return generate_output(sc, path, 0, steps - 1)


@pytest.mark.parametrize("seed", [314, 2718, 161803])
def test_scan_matches_one_shot(seed):
    steps = 250_000
    res = scan_markers(seed, steps, chunk=8192, scenery=_premat(seed))
    out = _one_shot(seed, steps)
    ref = find_markers(out)
    assert res.times == ref.times
    expect = []
    for t in ref.times:
        lab = pprime_label(out, t)
        if isinstance(lab, InS):
            expect.append(lab.record)
    assert res.records == expect
    assert res.rate == res.count / (steps - 10)


def test_scan_chunk_invariance():
    seed, steps = 99, 200_000
    a = scan_markers(seed, steps, chunk=4096, scenery=_premat(seed))
    b = scan_markers(seed, steps, chunk=1 << 20, scenery=_premat(seed))
    assert a.times == b.times and a.records == b.records


def test_scan_determinism():
    a = scan_markers(7, 120_000)
    b = scan_markers(7, 120_000)
    assert a.times == b.times and a.records == b.records and a.rate == b.rate


def test_scan_stitches_cleanly():
    # the records a long scan emits chain into the true scenery window
    seed, steps = 314, 250_000
    res = scan_markers(seed, steps, chunk=8192, scenery=_premat(seed))
    assert len(res.records) >= 2
    out = _one_shot(seed, steps)
    stitched = stitch_marker_records(res.records)
    t0, t1 = res.times[0], res.times[-1]
    direct = reconstruct_scenery(out.slice(t0, t1), anchor_time=t0)
    assert stitched == direct


def test_scan_tiny_windows():
    for steps in (0, 5, 10):
        res = scan_markers(3, steps)
        assert res.count == 0 and res.rate == 0.0 and res.gap_histogram() == []
    res = scan_markers(3, 11)
    assert res.rate == res.count / 1.0


def test_gap_histogram_bins():
    res = ScanResult(seed=0, steps=1000, times=[0, 3, 9, 200], records=[], rate=0.0)
    assert res.gap_histogram() == [[2, 3, 1], [4, 7, 1], [128, 255, 1]]
    d = res.to_dict()
    assert d["count"] == 4 and set(d) >= {"seed", "steps", "rate", "gap_histogram", "records"}
