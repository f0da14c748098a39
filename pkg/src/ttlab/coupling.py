"""Couplings and the flip map.

Three constructions live here, plus the statistics that check them.

flip_map freezes everything before the earliest flip time, flips the
chosen steps, and replays the walk over the scenery known at that time.
Applied twice with the same flip set it restores the input, which is the
involution property the tests pin down.

couple draws p conditioned on the window word G, locates the nearest
even-parity scenery match for the partner's window word to the right of
the origin, and builds q over the shifted scenery. Outside the window q
walks independently until the positions differ by exactly the scenery
shift, then copies p's steps; the same happens backward in time, one
step delayed because a backward step must be drawn before the positions
it determines exist. After the forward lock the two outputs emit equal
symbols forever; before the backward lock likewise.

split_couple runs two processes that share all marker data up to the
first occurrence time tau of process 1 while their pre-tau paths stay
independent. Process 2 reads a translated copy of process 1's scenery,
and its freely drawn pre-tau path is patched (balanced step-pair flips)
until no occurrence appears before tau, so tau is the first occurrence
time of both. From tau on, steps are copied and the symbol streams coincide
exactly, which caps every normalized Hamming distance by tau/n.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rngutil
from .errors import NoMarkerInHorizon, OutOfWindow, WindowMismatch
from .markers import MARKER_LEN, find_markers
from .process import PathSegment, Scenery, TTOutput, generate_output
from .reconstruct import reconstruct_scenery, validate_output

# -------------------------------------------------------------------- laws


class ConditionedLaw:
    """The process law conditioned on one output word over its window.

    The word pins the path bits on the window and the scenery cells at
    the offsets its walk visits; everything else stays i.i.d. fair. The
    window must contain time 0 (or be empty, the unconditioned law).
    """

    def __init__(self, word: TTOutput):
        validate_output(word)
        if len(word) > 0 and not (word.start <= 0 <= word.hi):
            raise OutOfWindow("law window must contain time 0")
        self.word = word
        self.window_lo, self.window_hi = word.window
        if len(word) > 0:
            sc = reconstruct_scenery(word)
            self.pinned = {off: sc.cell_at(off) for off in range(sc.lo, sc.hi + 1)}
        else:
            self.pinned = {}

    @classmethod
    def unconditioned(cls) -> "ConditionedLaw":
        return cls(TTOutput(0, np.empty(0, dtype=np.uint8), np.empty(0, dtype=np.uint8)))

    @classmethod
    def from_dict(cls, d: dict) -> "ConditionedLaw":
        return cls(TTOutput.from_dict(d["word"]))

    def to_dict(self) -> dict:
        return {"word": self.word.to_dict()}

    def scenery(self, rng) -> Scenery:
        sc = Scenery(rng)
        for off, v in self.pinned.items():
            sc.pin(off, v)
        return sc

    def path(self, rng, horizon: int) -> PathSegment:
        steps = rng.integers(0, 2, size=2 * horizon + 1, dtype=np.uint8)
        if len(self.word) > 0:
            a = self.word.start + horizon
            steps[a : a + len(self.word)] = self.word.steps
        return PathSegment(-horizon, steps)


def sample_conditioned(law: ConditionedLaw, horizon: int, seed: int, trial: int = 0) -> TTOutput:
    """One draw from the conditioned law over [-horizon, horizon]."""
    if len(law.word) > 0 and horizon < max(-law.window_lo, law.window_hi):
        raise OutOfWindow("horizon smaller than the conditioning window")
    sc = law.scenery(rngutil.stream(seed, trial, rngutil.SCENERY))
    path = law.path(rngutil.stream(seed, trial, rngutil.PATH), horizon)
    return generate_output(sc, path, -horizon, horizon)


# ---------------------------------------------------------------- flip map


def flip_map(output: TTOutput, flips, scenery: Scenery | None = None) -> TTOutput:
    """Flip the steps at the given times and replay from the earliest one.

    Symbols before min(flips) are untouched. From there on the walk
    follows the flipped steps over the scenery revealed by the input
    output; cells the new walk visits that the input never revealed come
    from ``scenery`` when given (the generator's scenery keeps replays
    consistent) and raise OutOfWindow otherwise.

    The scenery is read in the coordinates of the input's position
    trace. Flips at negative times with unbalanced net effect move the
    replayed walker off offset 0 at time 0, so the result's own trace
    re-anchors elsewhere; applied twice with such a set, extension reads
    can land on shifted cells. With flips at times >= 0 (or balanced
    ones) the map is an exact involution.
    """
    flips = sorted(set(int(t) for t in flips))
    if not flips:
        return output
    if flips[0] < output.start or flips[-1] > output.hi:
        raise OutOfWindow("flip times outside the output window")
    le = flips[0]
    li = le - output.start
    steps = output.steps.copy()
    for t in flips:
        steps[t - output.start] ^= 1
    pos = output.positions()
    # replay positions from le with the new steps; earlier times keep theirs
    f = 2 * steps[li:].astype(np.int64) - 1
    new_pos = pos.copy()
    new_pos[li:] = int(pos[li]) + np.concatenate([[0], np.cumsum(f)])[:-1]
    # cells revealed by the input, keyed by its own position coordinates
    lo, hi = int(min(pos.min(), new_pos.min())), int(max(pos.max(), new_pos.max()))
    known = np.full(hi - lo + 1, 255, dtype=np.uint8)
    known[pos - lo] = output.reads
    if scenery is not None:
        missing = np.flatnonzero(known == 255)
        if len(missing) > 0:
            # external cells only make sense in absolute coordinates,
            # which the trace uses exactly when the window contains 0
            if not (output.start <= 0 <= output.hi):
                raise OutOfWindow("cannot anchor an external scenery without time 0")
            known[missing] = scenery.values(lo, hi)[missing]
    reads = output.reads.copy()
    vals = known[new_pos[li:] - lo]
    if (vals == 255).any():
        off = int(new_pos[li:][vals == 255][0])
        raise OutOfWindow(f"replay visits unrevealed cell at offset {off}")
    reads[li:] = vals
    return TTOutput(output.start, reads, steps)


# ------------------------------------------------------------------- couple


@dataclass
class CouplingTranscript:
    """One run of the window coupling.

    On success the symbol streams agree at all times <= lock_bwd and all
    times >= lock_fwd; an unlocked side holds None and downgrades status.
    """

    seed: int
    trial: int
    p: TTOutput
    q: TTOutput
    shift: int
    lock_fwd: int | None
    lock_bwd: int | None
    status: str  # "success" | "horizon_exceeded"

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "shift": self.shift,
            "lock_fwd": self.lock_fwd,
            "lock_bwd": self.lock_bwd,
            "status": self.status,
        }


def _find_shift(sc: Scenery, w1: np.ndarray, n: int, cap: int = 1 << 20) -> int:
    """Least M > n with M + n even and scenery[M, M+2n] equal to w1."""
    width = 2 * n + 1
    m0 = n + 2  # parity of M + n is then even, and stays even in steps of 2
    chunk = max(256, 64 * (1 << width))
    while m0 <= cap:
        m1 = min(m0 + chunk, cap)
        vals = sc.values(m0, m1 + width - 1)
        ms = np.arange(0, m1 - m0 + 1, 2)
        for j in range(width):
            if len(ms) == 0:
                break
            ms = ms[vals[ms + j] == w1[j]]
        if len(ms) > 0:
            return m0 + int(ms[0])
        m0 = m1 + 2
    raise RuntimeError("no scenery match below the search cap")  # ~2^-cap/2^width odds


def couple(
    g: ConditionedLaw,
    h: ConditionedLaw,
    horizon: int,
    seed: int,
    trial: int = 0,
    fault: str | None = None,
) -> CouplingTranscript:
    """Coupled draw (p, q) with p conditioned on g and q conditioned on h.

    fault="skip_shift" omits the scenery translation when reading q's
    symbols, which breaks q's law detectably; it exists for the
    statistics tests.
    """
    if g.word.window != h.word.window:
        raise WindowMismatch(f"{g.word.window} vs {h.word.window}")
    n = g.window_hi
    if len(g.word) == 0 or g.window_lo != -n or n < 0:
        raise WindowMismatch("coupling windows must be symmetric around 0")
    if horizon <= n:
        raise OutOfWindow("horizon must exceed the window half-width")

    sc_p = g.scenery(rngutil.stream(seed, trial, rngutil.SCENERY))
    path_p = g.path(rngutil.stream(seed, trial, rngutil.PATH), horizon)
    p = generate_output(sc_p, path_p, -horizon, horizon)
    n_p = p.positions()

    # the partner's window cells, extended to all of [-n, n]
    w1 = rngutil.stream(seed, trial, rngutil.W1_EXTEND).integers(0, 2, size=2 * n + 1, dtype=np.uint8)
    for off, v in h.pinned.items():
        w1[off + n] = v
    m = _find_shift(sc_p, w1, n)
    shift = m + n

    # q's path: window pinned to the partner word, both tails drawn until
    # the position difference hits the shift, then copied from p
    steps_q = np.empty(2 * horizon + 1, dtype=np.uint8)
    steps_q[horizon - n : horizon + n + 1] = h.word.steps
    n_q = np.empty(2 * horizon + 1, dtype=np.int64)
    n_q[horizon - n : horizon + n + 1] = h.word.positions()

    hw = horizon - n  # tail length on each side
    # forward tail: D(t) is known before q's step at t is drawn
    cand = rngutil.stream(seed, trial, rngutil.Q_FORWARD).integers(0, 2, size=hw, dtype=np.uint8)
    base = int(n_q[horizon + n]) + (2 * int(h.word.steps[-1]) - 1)  # n_q(n+1)
    walk = base + np.concatenate([[0], np.cumsum(2 * cand.astype(np.int64) - 1)])[:-1]
    d = n_p[horizon + n + 1 :] - walk
    hits = np.flatnonzero(d == shift)
    if len(hits) > 0:
        k = int(hits[0])
        lock_fwd = n + 1 + k
        steps_q[horizon + n + 1 : horizon + lock_fwd] = cand[:k]
        steps_q[horizon + lock_fwd :] = p.steps[horizon + lock_fwd :]
        n_q[horizon + n + 1 : horizon + lock_fwd] = walk[:k]
        n_q[horizon + lock_fwd :] = n_p[horizon + lock_fwd :] - shift
    else:
        lock_fwd = None
        steps_q[horizon + n + 1 :] = cand
        n_q[horizon + n + 1 :] = walk

    # backward tail: the step at t is part of n_q(t), so the check runs
    # after the draw and agreement starts one time below the hit
    cand = rngutil.stream(seed, trial, rngutil.Q_BACKWARD).integers(0, 2, size=hw, dtype=np.uint8)
    walk = int(n_q[horizon - n]) - np.cumsum(2 * cand.astype(np.int64) - 1)  # n_q(-n-1-j)
    d = n_p[horizon - n - 1 :: -1] - walk  # j-th entry is time -n-1-j
    hits = np.flatnonzero(d == shift)
    if len(hits) > 0:
        j = int(hits[0])
        t_hit = -n - 1 - j
        lock_bwd = t_hit - 1
        steps_q[horizon + t_hit : horizon - n] = cand[: j + 1][::-1]
        steps_q[: horizon + t_hit] = p.steps[: horizon + t_hit]
        n_q[horizon + t_hit : horizon - n] = walk[: j + 1][::-1]
        n_q[: horizon + t_hit] = n_p[: horizon + t_hit] - shift
    else:
        lock_bwd = None
        steps_q[:hw] = cand[::-1]
        n_q[:hw] = walk[::-1]

    read_shift = 0 if fault == "skip_shift" else shift
    vlo = int(n_q.min()) + read_shift
    vhi = int(n_q.max()) + read_shift
    cells = sc_p.values(vlo, vhi)
    reads_q = cells[n_q + read_shift - vlo]
    q = TTOutput(-horizon, reads_q, steps_q)

    status = "success" if lock_fwd is not None and lock_bwd is not None else "horizon_exceeded"
    return CouplingTranscript(seed, trial, p, q, shift, lock_fwd, lock_bwd, status)


# -------------------------------------------------------- marginal checking


def enumerate_conditional(law: ConditionedLaw, depth: int) -> dict[tuple, float]:
    """Exact law of the output on [lo-depth, hi+depth] given the window word.

    Enumerates the free step bits on both tails and fair values for every
    scenery cell the extended walk visits beyond the pinned ones. Keys
    are (reads string, steps string).
    """
    if depth < 0 or depth > 4:
        raise ValueError("depth must be in [0, 4]")
    word = law.word
    if len(word) == 0:
        raise ValueError("enumeration needs a nonempty window")
    lo, hi = word.window
    atoms: dict[tuple, float] = {}
    for bits in range(1 << (2 * depth)):
        below = [(bits >> i) & 1 for i in range(depth)]  # steps at lo-1 .. lo-depth
        above = [(bits >> (depth + i)) & 1 for i in range(depth)]  # steps at hi+1 .. hi+depth
        steps = np.concatenate(
            [np.array(below[::-1], dtype=np.uint8), word.steps, np.array(above, dtype=np.uint8)]
        )
        f = 2 * steps.astype(np.int64) - 1
        raw = np.concatenate([[0], np.cumsum(f)])[:-1]
        pos = raw - raw[depth - lo]  # same anchor as the sampler: n(0) = 0
        free = sorted(set(int(x) for x in pos) - set(law.pinned))
        for assign in range(1 << len(free)):
            cells = dict(law.pinned)
            for i, off in enumerate(free):
                cells[off] = (assign >> i) & 1
            reads = np.array([cells[int(x)] for x in pos], dtype=np.uint8)
            key = TTOutput(lo - depth, reads, steps)
            d = key.to_dict()
            prob = 2.0 ** -(2 * depth + len(free))
            atoms[(d["reads"], d["steps"])] = atoms.get((d["reads"], d["steps"]), 0.0) + prob
    assert abs(sum(atoms.values()) - 1.0) < 1e-9
    return atoms


def marginal_check(transcripts, law: ConditionedLaw, depth: int) -> float:
    """TV distance between the empirical q-law near the window and the
    enumerated conditional law. Uses every transcript; q's restriction
    to [lo-depth, hi+depth] has the same law whether or not the locks
    were found inside the horizon."""
    exact = enumerate_conditional(law, depth)
    lo, hi = law.word.window
    counts: dict[tuple, int] = {}
    total = 0
    for tr in transcripts:
        sub = tr.q.slice(lo - depth, hi + depth)
        d = sub.to_dict()
        counts[(d["reads"], d["steps"])] = counts.get((d["reads"], d["steps"]), 0) + 1
        total += 1
    if total == 0:
        raise ValueError("no transcripts")
    tv = 0.0
    for k in set(exact) | set(counts):
        tv += abs(exact.get(k, 0.0) - counts.get(k, 0) / total)
    return tv / 2.0


# -------------------------------------------------------------- split couple


PAST_PREFIX = 2048


@dataclass
class SplitTranscript:
    """One run of the split coupling.

    hamming_samples holds (n, count(disagreeing times in [0, n)) / n).
    past1/past2 are the first symbols (codes read*2 + step) of the two
    pre-tau streams, kept for the independence audit and not serialized.
    """

    seed: int
    tau: int
    hamming_samples: list[tuple[int, float]]
    status: str
    disagreements: int
    past1: np.ndarray = field(repr=False)
    past2: np.ndarray = field(repr=False)
    out1: TTOutput | None = field(default=None, repr=False)
    out2: TTOutput | None = field(default=None, repr=False)

    def hamming(self, n: int) -> float:
        for m, v in self.hamming_samples:
            if m == n:
                return v
        raise KeyError(n)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "status": self.status,
            "tau": self.tau,
            "hamming_samples": [[n, v] for n, v in self.hamming_samples],
        }


def _first_marker(out: TTOutput) -> int | None:
    times = find_markers(out).times
    return times[0] if times else None


def split_couple(
    seed: int,
    horizon: int,
    checkpoints=(10_000, 100_000, 1_000_000),
    fault: str | None = None,
    trial: int = 0,
    keep_outputs: bool = False,
) -> SplitTranscript:
    """Coupled pair sharing all marker data up to the first occurrence.

    Process 1 is unconditioned on [0, horizon]. tau is its first marker
    occurrence time (NoMarkerInHorizon if the window has none). Process 2
    walks an independent pre-tau path over the translated scenery
    sc2(x) = sc1(x - delta), delta chosen so both walkers read the same
    cell at tau; balanced step-pair patches remove the few marker
    occurrences that land before tau, so tau is the first occurrence for
    both. From tau on the steps are copied and the symbols agree exactly.

    fault="identical_past" copies process 1's pre-tau path outright; the
    independence audit must then report full correlation.
    """
    if horizon <= MARKER_LEN:
        raise ValueError("horizon too small")
    sc1 = Scenery(rngutil.stream(seed, trial, rngutil.SCENERY))
    rng_path = rngutil.stream(seed, trial, rngutil.PATH)
    steps1 = rng_path.integers(0, 2, size=horizon + 1, dtype=np.uint8)
    # grow the scanned prefix geometrically; tau is typically ~2^16
    w = min(1 << 17, horizon)
    tau = None
    while True:
        out1 = generate_output(sc1, PathSegment(0, steps1[: w + 1]), 0, w)
        tau = _first_marker(out1)
        if tau is not None or w == horizon:
            break
        w = min(4 * w, horizon)
    if tau is None:
        raise NoMarkerInHorizon(f"no occurrence in [0, {horizon}]")
    n1 = out1.positions()

    if fault == "identical_past":
        steps2_pre = steps1[:tau].copy()
    else:
        rng2 = rngutil.stream(seed, trial, rngutil.PARTNER_PATH)
        steps2_pre = rng2.integers(0, 2, size=tau, dtype=np.uint8)

    # process 2 over [0, w]: pre-tau steps independent, then copied;
    # reads come from the translated scenery
    def build_out2(pre):
        steps = np.concatenate([pre, steps1[tau : w + 1]])
        f = 2 * steps.astype(np.int64) - 1
        pos = np.concatenate([[0], np.cumsum(f)])[:-1]
        delta = int(pos[tau] - n1[tau])
        lo, hi = int(pos.min()), int(pos.max())
        cells = sc1.values(lo - delta, hi - delta)
        reads = cells[pos - lo]
        return TTOutput(0, reads, steps), delta

    for _ in range(64):
        out2, delta = build_out2(steps2_pre)
        early = [t for t in find_markers(out2).times if t < tau]
        if not early:
            break
        t = early[0]
        # flip an opposite-step pair inside the occurrence: kills it
        # without moving the walker at any later time, so delta and all
        # reads beyond the pair stay put and each patch is local
        if t + 5 <= tau - 1:
            i, j = t + 4, t + 5
        else:
            # straddler: the word's no-self-overlap forces t <= tau - 4,
            # leaving the opposite pair at offsets 2, 3 before tau
            i, j = t + 2, t + 3
        assert j <= tau - 1
        steps2_pre = steps2_pre.copy()
        steps2_pre[i] ^= 1
        steps2_pre[j] ^= 1
    else:
        raise RuntimeError("patching did not converge")

    assert delta % 2 == 0  # positions share time parity
    assert _first_marker(out2) == tau

    # disagreement profile: symbols agree from tau on by construction
    c1 = 2 * out1.reads[:tau] + out1.steps[:tau]
    c2 = 2 * out2.reads[:tau] + out2.steps[:tau]
    neq = c1 != c2
    disagreements = int(neq.sum())
    cum = np.concatenate([[0], np.cumsum(neq)])
    samples = []
    for n in checkpoints:
        if n <= 0 or n > horizon:
            continue
        samples.append((int(n), float(cum[min(tau, n)]) / float(n)))
    keep = min(tau, PAST_PREFIX)
    return SplitTranscript(
        seed=seed,
        tau=int(tau),
        hamming_samples=samples,
        status="success",
        disagreements=disagreements,
        past1=c1[:keep].copy(),
        past2=c2[:keep].copy(),
        out1=out1 if keep_outputs else None,
        out2=out2 if keep_outputs else None,
    )


def conditional_independence_stat(transcripts) -> float:
    """Mean absolute per-time correlation of the two pre-tau symbol codes.

    Pools each time slot across transcripts (slots need 30+ samples) and
    averages |Pearson correlation|. Independent pre-tau paths give a
    value near 0; identical pasts give 1. Meant for 10^3+ transcripts;
    fewer just raises the noise floor.
    """
    transcripts = list(transcripts)
    if not transcripts:
        raise ValueError("no transcripts")
    maxlen = max(len(tr.past1) for tr in transcripts)
    a = np.full((len(transcripts), maxlen), np.nan)
    b = np.full((len(transcripts), maxlen), np.nan)
    for i, tr in enumerate(transcripts):
        a[i, : len(tr.past1)] = tr.past1
        b[i, : len(tr.past2)] = tr.past2
    valid = ~np.isnan(a)
    cnt = valid.sum(axis=0)
    with np.errstate(invalid="ignore"):
        ma = np.nanmean(a, axis=0)
        mb = np.nanmean(b, axis=0)
        da = np.where(valid, a - ma, 0.0)
        db = np.where(valid, b - mb, 0.0)
        cov = (da * db).sum(axis=0)
        va = (da * da).sum(axis=0)
        vb = (db * db).sum(axis=0)
        corr = cov / np.sqrt(va * vb)
    ok = (cnt >= 30) & (va > 0) & (vb > 0)
    if not ok.any():
        raise ValueError("not enough pooled samples")
    return float(np.abs(corr[ok]).mean())
