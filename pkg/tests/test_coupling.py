"""Couplings: conditioned sampling, the flip map, window coupling, split coupling."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2_contingency

from ttlab import rngutil
from ttlab.coupling import (
    ConditionedLaw,
    CouplingTranscript,
    conditional_independence_stat,
    couple,
    enumerate_conditional,
    flip_map,
    marginal_check,
    sample_conditioned,
    split_couple,
)
from ttlab.errors import ContradictoryScenery, NoMarkerInHorizon, OutOfWindow, WindowMismatch
from ttlab.markers import marker_word
from ttlab.process import (
    PathSegment,
    Scenery,
    TTOutput,
    gen_path,
    generate_output,
    scenery_u8,
    steps_u8,
)


def law_rrr():
    # steps RRR on [-1, 1] visit -1, 0, 1; reads h, t, h
    return ConditionedLaw(TTOutput(-1, scenery_u8("hth"), steps_u8("RRR")))


def law_lll():
    return ConditionedLaw(TTOutput(-1, scenery_u8("ttt"), steps_u8("LLL")))


def laws_gh():
    # the five-step default pair: all-h scenery walked left, all-t walked right
    g = ConditionedLaw(TTOutput(-2, scenery_u8("hhhhh"), steps_u8("LLLLL")))
    h = ConditionedLaw(TTOutput(-2, scenery_u8("ttttt"), steps_u8("RRRRR")))
    return g, h


# ------------------------------------------------------------------ laws


def test_law_pins_and_roundtrip():
    law = law_rrr()
    assert law.pinned == {-1: 0, 0: 1, 1: 0}
    assert (law.window_lo, law.window_hi) == (-1, 1)
    again = ConditionedLaw.from_dict(law.to_dict())
    assert again.word == law.word and again.pinned == law.pinned

    mark = ConditionedLaw(marker_word())
    assert mark.pinned == {0: 0, -1: 0, -2: 0, -3: 0, -4: 1}


def test_law_rejects_bad_words():
    # revisiting cell 0 with a different read is contradictory
    bad = TTOutput.from_pairs([("h", "L"), ("h", "R"), ("t", "L")], 0)
    with pytest.raises(ContradictoryScenery):
        ConditionedLaw(bad)
    # a window that misses time 0 has no absolute anchor
    with pytest.raises(OutOfWindow):
        ConditionedLaw(TTOutput(3, scenery_u8("hh"), steps_u8("RR")))


def test_law_unconditioned():
    law = ConditionedLaw.unconditioned()
    assert law.pinned == {}
    out = sample_conditioned(law, 50, seed=5)
    assert out.window == (-50, 50)


# ------------------------------------------------------- conditioned draws


def test_sample_restriction_is_word():
    for law in (law_rrr(), ConditionedLaw(marker_word())):
        n = max(-law.window_lo, law.window_hi)
        for trial in range(25):
            out = sample_conditioned(law, n + 7, seed=11, trial=trial)
            assert out.slice(law.window_lo, law.window_hi) == law.word


def test_sample_horizon_guard():
    with pytest.raises(OutOfWindow):
        sample_conditioned(ConditionedLaw(marker_word()), 9, seed=0)


def test_sample_determinism():
    a = sample_conditioned(law_rrr(), 30, seed=3, trial=4)
    b = sample_conditioned(law_rrr(), 30, seed=3, trial=4)
    assert a == b
    assert a != sample_conditioned(law_rrr(), 30, seed=3, trial=5)


def test_enumeration_depth_zero_is_point_mass():
    law = law_rrr()
    atoms = enumerate_conditional(law, 0)
    d = law.word.to_dict()
    assert atoms == {(d["reads"], d["steps"]): 1.0}
    with pytest.raises(ValueError):
        enumerate_conditional(law, 5)
    with pytest.raises(ValueError):
        enumerate_conditional(law, -1)


def test_sampler_matches_enumeration():
    # exact conditional law two steps past the window, horizon 3
    law = law_rrr()
    exact = enumerate_conditional(law, 2)
    assert abs(sum(exact.values()) - 1.0) < 1e-12
    counts: dict = {}
    n = 30_000
    for trial in range(n):
        d = sample_conditioned(law, 3, seed=7, trial=trial).to_dict()
        key = (d["reads"], d["steps"])
        counts[key] = counts.get(key, 0) + 1
    tv = 0.5 * sum(abs(exact.get(k, 0.0) - counts.get(k, 0) / n) for k in set(exact) | set(counts))
    assert tv < 0.035  # noise floor ~0.023 at this sample size


# --------------------------------------------------------------- flip map


def _plain(seed, lo, hi):
    sc = Scenery(seed)
    path = gen_path(seed + 77, min(lo, 0) - 1, max(hi, 0) + 1)
    return generate_output(sc, path, lo, hi), sc


def test_flip_empty_is_identity():
    out, _ = _plain(1, -5, 20)
    assert flip_map(out, []) == out


def test_flip_semantics():
    out, sc = _plain(2, -8, 30)
    flips = [4, 9, 10]
    new = flip_map(out, flips, sc)
    le = min(flips)
    i = le - out.start
    assert new.window == out.window
    assert np.array_equal(new.reads[:i], out.reads[:i])
    assert np.array_equal(new.steps[:i], out.steps[:i])
    assert new.reads[i] == out.reads[i]  # same cell read at the first flip time
    diff = np.flatnonzero(new.steps != out.steps) + out.start
    assert list(diff) == flips
    # the replayed reads follow the new walk over the same scenery
    pos = new.positions()
    expect = np.array([sc.value_at(int(x)) for x in pos[i:]], dtype=np.uint8)
    assert np.array_equal(new.reads[i:], expect)


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    flips=st.sets(st.integers(0, 25), min_size=1, max_size=6),
)
def test_flip_involution(seed, flips):
    out, sc = _plain(seed, -8, 25)
    once = flip_map(out, flips, sc)
    assert flip_map(once, flips, sc) == out
    assert once != out  # steps certainly differ at the flip times


def test_flip_negative_le_freezes_prefix():
    # flips before time 0 re-anchor the replayed trace; the frozen
    # prefix and the step contract still hold exactly
    out, sc = _plain(8, -8, 25)
    new = flip_map(out, [-3, 2], sc)
    i = -3 - out.start
    assert np.array_equal(new.reads[:i], out.reads[:i])
    assert np.array_equal(new.steps[:i], out.steps[:i])
    assert new.reads[i] == out.reads[i]
    assert sorted(np.flatnonzero(new.steps != out.steps) + out.start) == [-3, 2]


def test_flip_guards():
    out, sc = _plain(3, 0, 15)
    with pytest.raises(OutOfWindow):
        flip_map(out, [16], sc)
    with pytest.raises(OutOfWindow):
        flip_map(out, [-1], sc)
    # an all-R walk flipped at the start dives into cells it never revealed
    sc2 = Scenery(9)
    path = gen_path(99, -1, 21)
    steps = np.ones(20, dtype=np.uint8)
    allr = generate_output(sc2, PathSegment(0, steps), 0, 19)
    with pytest.raises(OutOfWindow):
        flip_map(allr, [0])
    assert flip_map(allr, [0], sc2).steps[0] == 0  # fine with the source scenery


def test_flip_preserves_law():
    # flipped outputs and fresh outputs give the same symbol frequencies
    flips = [2, 5]
    t_probe = 8
    cats_flip = np.zeros(4, dtype=int)
    cats_free = np.zeros(4, dtype=int)
    for i in range(4000):
        out, sc = _plain(20_000 + i, 0, 12)
        new = flip_map(out, flips, sc)
        cats_flip[2 * new.reads[t_probe] + new.steps[t_probe]] += 1
        ref, _ = _plain(60_000 + i, 0, 12)
        cats_free[2 * ref.reads[t_probe] + ref.steps[t_probe]] += 1
    _, p, _, _ = chi2_contingency(np.array([cats_flip, cats_free]))
    assert p > 0.001


# ----------------------------------------------------------------- couple


def test_couple_invariants():
    law = law_rrr()
    n = law.window_hi
    horizon = 2000
    successes = 0
    for trial in range(40):
        tr = couple(law, law_lll(), horizon, seed=901, trial=trial)
        assert tr.shift % 2 == 0 and tr.shift >= 2 * n + 2
        assert tr.p.slice(-n, n) == law.word
        if tr.status != "success":
            assert tr.lock_fwd is None or tr.lock_bwd is None
            continue
        successes += 1
        assert tr.q.slice(-n, n) == law_lll().word
        i0 = horizon + tr.lock_fwd
        assert np.array_equal(tr.p.reads[i0:], tr.q.reads[i0:])
        assert np.array_equal(tr.p.steps[i0:], tr.q.steps[i0:])
        i1 = horizon + tr.lock_bwd + 1
        assert np.array_equal(tr.p.reads[:i1], tr.q.reads[:i1])
        assert np.array_equal(tr.p.steps[:i1], tr.q.steps[:i1])
        # locked positions differ by exactly the scenery shift
        n_p, n_q = tr.p.positions(), tr.q.positions()
        assert (n_p[i0:] == n_q[i0:] + tr.shift).all()
        assert (n_p[:i1] == n_q[:i1] + tr.shift).all()
        assert tr.lock_fwd > n and tr.lock_bwd < -n
    assert successes >= 15  # observed ~25/40 at this horizon


def test_couple_diagonal():
    law = law_rrr()
    tr = couple(law, law, 500, seed=31)
    assert tr.p.slice(-1, 1) == tr.q.slice(-1, 1) == law.word


def test_couple_window_guards():
    g, h = laws_gh()
    with pytest.raises(WindowMismatch):
        couple(law_rrr(), h, 100, seed=0)
    lop = ConditionedLaw(TTOutput(-1, scenery_u8("hth"), steps_u8("RRR")).slice(0, 1))
    with pytest.raises(WindowMismatch):
        couple(lop, lop, 100, seed=0)
    with pytest.raises(WindowMismatch):
        couple(ConditionedLaw.unconditioned(), ConditionedLaw.unconditioned(), 100, seed=0)
    with pytest.raises(OutOfWindow):
        couple(g, h, 2, seed=0)


def test_couple_determinism():
    g, h = laws_gh()
    a = couple(g, h, 300, seed=5, trial=9)
    b = couple(g, h, 300, seed=5, trial=9)
    assert a.p == b.p and a.q == b.q and a.shift == b.shift
    assert (a.lock_fwd, a.lock_bwd, a.status) == (b.lock_fwd, b.lock_bwd, b.status)


def test_couple_horizon_exceeded():
    g, h = laws_gh()
    seen_exceeded = False
    for trial in range(40):
        tr = couple(g, h, 3, seed=77, trial=trial)
        assert len(tr.q) == 7
        if tr.status == "horizon_exceeded":
            seen_exceeded = True
            assert tr.lock_fwd is None or tr.lock_bwd is None
    assert seen_exceeded


def test_couple_serialization():
    g, h = laws_gh()
    tr = couple(g, h, 50, seed=1)
    d = json.loads(json.dumps(tr.to_dict()))
    assert set(d) == {"seed", "shift", "lock_fwd", "lock_bwd", "status"}
    assert d["shift"] == tr.shift and d["status"] in ("success", "horizon_exceeded")


# ------------------------------------------------------- marginal checking


def test_marginal_depth_zero_is_exact():
    g, h = laws_gh()
    trs = [couple(g, h, 4, seed=44, trial=i) for i in range(500)]
    assert marginal_check(trs, h, 0) == 0.0
    with pytest.raises(ValueError):
        marginal_check([], h, 0)


def test_marginal_depth_two():
    g, h = laws_gh()
    trs = [couple(g, h, 4, seed=44, trial=i) for i in range(6000)]
    tv = marginal_check(trs, h, 2)
    assert tv < 0.2  # noise floor ~0.12 at 6000 draws; the real check runs bigger


def test_marginal_detects_skipped_shift():
    g, h = laws_gh()
    trs = [couple(g, h, 4, seed=45, trial=i, fault="skip_shift") for i in range(800)]
    assert marginal_check(trs, h, 0) > 0.5


# ------------------------------------------------------------ split couple


def test_split_transcript_contract():
    for trial in range(6):
        tr = split_couple(
            seed=620, horizon=200_000, checkpoints=(10_000, 200_000), trial=trial, keep_outputs=True
        )
        assert tr.status == "success"
        assert 0 <= tr.tau <= 200_000 - 10
        o1, o2 = tr.out1, tr.out2
        eq = (o1.reads == o2.reads) & (o1.steps == o2.steps)
        assert bool(eq[tr.tau :].all())  # identical names from tau on
        assert int((~eq[: tr.tau]).sum()) == tr.disagreements
        for n, v in tr.hamming_samples:
            assert v <= min(tr.tau + 11, n) / n + 1e-12
            if n >= tr.tau:
                assert round(v * n) == tr.disagreements  # mass frozen at tau
        assert tr.hamming(10_000) == tr.hamming_samples[0][1]
        with pytest.raises(KeyError):
            tr.hamming(123)


def test_split_determinism_and_serialization():
    a = split_couple(seed=9, horizon=300_000, trial=3)
    b = split_couple(seed=9, horizon=300_000, trial=3)
    assert a.tau == b.tau and a.hamming_samples == b.hamming_samples
    d = json.loads(json.dumps(a.to_dict()))
    assert set(d) == {"seed", "status", "tau", "hamming_samples"}
    assert d["tau"] == a.tau


def test_split_no_marker_raises():
    raised = 0
    for s in range(5):
        try:
            split_couple(seed=3000 + s, horizon=1200)
        except NoMarkerInHorizon:
            raised += 1
    assert raised >= 1  # a 1200-step window holds a marker with chance ~2%


def test_split_identical_past_fault():
    trs = []
    for i in range(45):
        try:
            trs.append(split_couple(seed=630, horizon=200_000, fault="identical_past", trial=i))
        except NoMarkerInHorizon:
            pass
    assert all(np.array_equal(t.past1, t.past2) for t in trs)
    assert conditional_independence_stat(trs) > 0.9


def test_independence_stat_null():
    trs = []
    for i in range(400):
        try:
            trs.append(split_couple(seed=600, horizon=200_000, trial=i))
        except NoMarkerInHorizon:
            pass
    stat = conditional_independence_stat(trs)
    assert stat < 0.08  # null noise floor sqrt(2/(pi*n)) ~ 0.04 here
    with pytest.raises(ValueError):
        conditional_independence_stat([])


# --------------------------------------------------- far-window forgetting


def test_far_events_forget_the_window():
    # coupled pairs bound the conditional gap by failure rate plus noise
    g, h = law_rrr(), law_lll()
    horizon, t_probe, n = 20_000, 10_000, 250
    hit_p = hit_q = bad = 0
    for trial in range(n):
        tr = couple(g, h, horizon, seed=501, trial=trial)
        if tr.status != "success" or tr.lock_fwd > t_probe:
            bad += 1
        i = horizon + t_probe
        hit_p += int(tr.p.reads[i] == 0 and tr.p.steps[i] == 1)
        hit_q += int(tr.q.reads[i] == 0 and tr.q.steps[i] == 1)
    p1, p2 = hit_p / n, hit_q / n
    sigma = np.sqrt((p1 * (1 - p1) + p2 * (1 - p2)) / n)
    assert abs(p1 - p2) <= bad / n + 3 * sigma + 1e-9
