"""Reproducible experiment runners.

Each runner is a pure function of its arguments: per-trial randomness
comes from (seed, trial, role) streams, so reruns and worker pools give
byte-identical reports. Reports share one shape, {"command", "params",
"summary", "rows"}, with rows JSON-ready and flat enough for CSV.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import rngutil
from .coupling import (
    ConditionedLaw,
    conditional_independence_stat,
    couple,
    marginal_check,
    split_couple,
)
from .errors import NoMarkerInHorizon, NotFoundInWindow
from .markers import (
    MARKER_LEN,
    MARKER_READS,
    MARKER_STEPS,
    choose_n1_n2,
    equivalent1,
    equivalent2,
    find_markers,
    rewrite_markers,
)
from .process import (
    PathSegment,
    Scenery,
    TTOutput,
    generate_output,
    positions,
    scenery_str,
    steps_u8,
    walk_geometry,
)
from .reconstruct import ReconstructedScenery, align_sceneries, reconstruct_scenery
from .scan import scan_markers

ORACLE_TRIAL = 1 << 31  # stream index reserved for oracle runs, beyond any trial range


def _report(command: str, params: dict, summary: dict, rows: list) -> dict:
    return {"command": command, "params": params, "summary": summary, "rows": rows}


def _map_trials(fn, args_list, workers: int):
    if workers <= 1:
        return [fn(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, args_list, chunksize=8))


def default_laws(n: int) -> tuple[ConditionedLaw, ConditionedLaw]:
    """The standing window pair: all-h cells walked left, all-t walked right."""
    if n < 1:
        raise ValueError("n must be >= 1")
    width = 2 * n + 1
    g = ConditionedLaw(TTOutput(-n, np.zeros(width, np.uint8), np.zeros(width, np.uint8)))
    h = ConditionedLaw(TTOutput(-n, np.ones(width, np.uint8), np.ones(width, np.uint8)))
    return g, h


# ---------------------------------------------------------------- generate


def run_generate(seed: int, trials: int, window: int) -> dict:
    if window < 0 or trials < 1:
        raise ValueError("window must be >= 0 and trials >= 1")
    rows = []
    for trial in range(trials):
        sc = Scenery(rngutil.stream(seed, trial, rngutil.SCENERY))
        steps = rngutil.stream(seed, trial, rngutil.PATH).integers(
            0, 2, size=2 * window + 1, dtype=np.uint8
        )
        out = generate_output(sc, PathSegment(-window, steps), -window, window)
        rows.append({"trial": trial, "output": out.to_dict()})
    return _report(
        "generate",
        {"seed": seed, "trials": trials, "window": window},
        {"symbols_per_trial": 2 * window + 1},
        rows,
    )


# ------------------------------------------------------------------ markers


def run_markers(seed: int, steps: int, chunk: int | None = None) -> dict:
    res = scan_markers(seed, steps, chunk=chunk or (1 << 22))
    rows = [dict(r.to_dict(), trial=0) for r in res.records]
    return _report(
        "markers",
        {"seed": seed, "steps": steps},
        {
            "count": res.count,
            "rate": res.rate,
            "rate_over_expected": res.rate * (1 << 16),
            "gap_histogram": res.gap_histogram(),
        },
        rows,
    )


# -------------------------------------------------------------- reconstruct


def run_reconstruct(seed: int, trials: int, window: int) -> dict:
    rows = []
    for trial in range(trials):
        sc = Scenery(rngutil.stream(seed, trial, rngutil.SCENERY))
        steps = rngutil.stream(seed, trial, rngutil.PATH).integers(
            0, 2, size=2 * window + 1, dtype=np.uint8
        )
        out = generate_output(sc, PathSegment(-window, steps), -window, window)
        rec = reconstruct_scenery(out)
        matches = scenery_str(sc.values(rec.lo, rec.hi)) == scenery_str(rec.cells)
        rows.append({"trial": trial, "scenery": rec.to_dict(), "matches_source": matches})
    ok = sum(r["matches_source"] for r in rows)
    return _report(
        "reconstruct",
        {"seed": seed, "trials": trials, "window": window},
        {"matches_source": ok, "trials": trials},
        rows,
    )


# ------------------------------------------------------------ rewrite study


def _pin_marker_cells(sc: Scenery, pos: np.ndarray, lo: int, t: int) -> None:
    """Best effort: impose the word's five cells around the walker at t."""
    base = int(pos[t - lo])
    for j, v in ((0, 0), (-1, 0), (-2, 0), (-3, 0), (-4, 1)):
        try:
            sc.pin(base + j, v)
        except ValueError:
            pass  # an earlier plant already fixed this cell differently


def make_swapped_pair(seed: int, trial: int, window: int, m_bound: int):
    """A pair of outputs equal outside [-m_bound, m_bound], different inside.

    One shared scenery; the second path swaps the steps at time 1 and the
    first later time before m_bound with the opposite step. Both swap
    times sit on the same side of 0, so the position traces differ only
    on (1, t2] and every symbol outside the center interval agrees.
    Marker words are planted at three spots so occurrences exist.
    """
    if m_bound < 12 or window < 4 * m_bound:
        raise ValueError("need m_bound >= 12 and window >= 4 * m_bound")
    rng = rngutil.stream(seed, trial, rngutil.PATH)
    lo, hi = -window, window
    steps1 = rng.integers(0, 2, size=2 * window + 1, dtype=np.uint8)
    plants = [int(-0.7 * window), int(0.1 * window), int(0.6 * window)]
    for p in plants:
        steps1[p - lo : p - lo + MARKER_LEN] = MARKER_STEPS
    t2 = None
    for t in range(2, m_bound):
        if steps1[t - lo] != steps1[1 - lo]:
            t2 = t
            break
    if t2 is None:
        return None  # constant center stretch; caller retries
    steps2 = steps1.copy()
    steps2[1 - lo], steps2[t2 - lo] = steps1[t2 - lo], steps1[1 - lo]

    sc = Scenery(rngutil.stream(seed, trial, rngutil.SCENERY))
    path1 = PathSegment(lo, steps1)
    pos1 = positions(path1, lo, hi)
    for p in plants:
        _pin_marker_cells(sc, pos1, lo, p)
    o1 = generate_output(sc, path1, lo, hi)
    o2 = generate_output(sc, PathSegment(lo, steps2), lo, hi)
    return o1, o2


def _rewrite_trial(args) -> dict | None:
    seed, trial, window, m_bound = args
    pair = make_swapped_pair(seed, trial, window, m_bound)
    if pair is None:
        return None
    o1, o2 = pair
    s1, s2 = find_markers(o1), find_markers(o2)
    if len(s1) == 0 or s1.undecided or s2.undecided:
        return None
    try:
        n1, n2 = choose_n1_n2(o1, o2, m_bound)
    except NotFoundInWindow:
        return None
    o3 = rewrite_markers(o1, n1, n2)
    o4 = rewrite_markers(o2, n1, n2)

    def survivors(times):
        return [t for t in times if not (n1 <= t and t + MARKER_LEN - 1 <= n2)]

    g_pre = walk_geometry(o1.path(), n1, n2)
    g_post = walk_geometry(o3.path(), n1, n2)
    return {
        "trial": trial,
        "n1": n1,
        "n2": n2,
        "markers_1": list(s1.times),
        "markers_2": list(s2.times),
        "pair_equivalent1": equivalent1(o1, o2),
        "scenery_process_preserved": equivalent1(o1, o3) and equivalent1(o2, o4),
        "rewritten_equivalent2": equivalent2(o3, o4),
        "markers_preserved": (
            find_markers(o3).times == survivors(s1.times)
            and find_markers(o4).times == survivors(s2.times)
        ),
        "geometry_preserved": (g_pre.fo, g_pre.ba, g_pre.net)
        == (g_post.fo, g_post.ba, g_post.net),
    }


def run_rewrite(
    seed: int, trials: int, window: int = 2500, m_bound: int = 40, workers: int = 1
) -> dict:
    """Marker-interval surgery on swapped pairs: choose [n1, n2], rewrite
    both outputs there, and check the equivalences that should survive."""
    rows = []
    attempt = 0
    while len(rows) < trials and attempt < 4 * trials:
        batch = [(seed, attempt + i, window, m_bound) for i in range(min(16, 4 * trials - attempt))]
        attempt += len(batch)
        for row in _map_trials(_rewrite_trial, batch, workers):
            if row is not None and len(rows) < trials:
                rows.append(row)
    summary = {
        "usable_trials": len(rows),
        "attempts": attempt,
        "all_equivalent2": all(r["rewritten_equivalent2"] for r in rows),
        "all_scenery_process_preserved": all(r["scenery_process_preserved"] for r in rows),
        "all_markers_preserved": all(r["markers_preserved"] for r in rows),
        "all_geometry_preserved": all(r["geometry_preserved"] for r in rows),
        "nontrivial": sum(not r["pair_equivalent1"] for r in rows),
    }
    return _report(
        "rewrite",
        {"seed": seed, "trials": trials, "window": window, "m_bound": m_bound},
        summary,
        rows,
    )


# ------------------------------------------------------------------- couple


def _couple_trial(args) -> dict:
    seed, trial, n, horizon = args
    g, h = default_laws(n)
    tr = couple(g, h, horizon, seed, trial=trial)
    return dict(tr.to_dict(), trial=trial)


def run_couple(seed: int, trials: int, n_param: int, horizon: int, workers: int = 1) -> dict:
    rows = _map_trials(_couple_trial, [(seed, i, n_param, horizon) for i in range(trials)], workers)
    ok = [r for r in rows if r["status"] == "success"]
    shifts = [r["shift"] for r in rows]
    return _report(
        "couple",
        {"seed": seed, "trials": trials, "n": n_param, "horizon": horizon},
        {
            "success_rate": len(ok) / trials if trials else 0.0,
            "mean_shift": float(np.mean(shifts)) if shifts else 0.0,
            "horizon_exceeded": trials - len(ok),
        },
        rows,
    )


def run_marginal(seed: int, trials: int, n_param: int, depth: int) -> dict:
    """TV between q's law near the window and the enumerated conditional.

    The q construction at times within [-(n+depth), n+depth] does not
    depend on the horizon beyond that reach, so sampling at the minimal
    horizon n + depth keeps the estimate honest and cheap.
    """
    g, h = default_laws(n_param)
    horizon = n_param + max(depth, 1)
    trs = [couple(g, h, horizon, seed, trial=i) for i in range(trials)]
    tv = marginal_check(trs, h, depth)
    return _report(
        "marginal",
        {"seed": seed, "trials": trials, "n": n_param, "depth": depth},
        {"tv": tv},
        [],
    )


# -------------------------------------------------------------------- split


def _split_trial(args) -> dict:
    seed, trial, horizon, checkpoints = args
    try:
        tr = split_couple(seed, horizon, checkpoints=checkpoints, trial=trial)
    except NoMarkerInHorizon:
        return {"trial": trial, "status": "no_marker", "tau": None, "hamming_samples": []}
    return dict(tr.to_dict(), trial=trial)


def run_split(
    seed: int,
    trials: int,
    horizon: int = 1_000_000,
    checkpoints=(10_000, 100_000, 1_000_000),
    workers: int = 1,
    oracle_steps: int = 1 << 24,
    oracle_scans: int = 4,
) -> dict:
    rows = _map_trials(
        _split_trial, [(seed, i, horizon, tuple(checkpoints)) for i in range(trials)], workers
    )
    ok = [r for r in rows if r["status"] == "success"]
    taus = [r["tau"] for r in ok]
    mean_h = {}
    for j, n in enumerate(c for c in checkpoints if 0 < c <= horizon):
        mean_h[str(n)] = float(np.mean([r["hamming_samples"][j][1] for r in ok])) if ok else 0.0
    # independent occurrence-rate oracle on reserved streams. Pooling
    # several scans beats one long scan: occurrences clump where the walk
    # revisits a stretch of scenery, so the count variance in one run
    # grows faster than the count itself, while separate sceneries are
    # independent and average cleanly.
    hits = sum(
        scan_markers(seed, oracle_steps, trial=ORACLE_TRIAL + j).count for j in range(oracle_scans)
    )
    rate = hits / (oracle_scans * (oracle_steps - 10))
    oracle_mean = (1.0 / rate) if rate > 0 else None
    mean_tau = float(np.mean(taus)) if taus else None
    ratio = mean_tau / oracle_mean if (mean_tau and oracle_mean) else None
    return _report(
        "split",
        {"seed": seed, "trials": trials, "horizon": horizon, "checkpoints": list(checkpoints)},
        {
            "mean_tau": mean_tau,
            "oracle_mean_tau": oracle_mean,
            "tau_over_oracle": ratio,
            "mean_hamming": mean_h,
            "no_marker_trials": trials - len(ok),
        },
        rows,
    )


def run_split_audit(seed: int, trials: int, horizon: int = 300_000) -> dict:
    """Correlation audit of the two pre-tau symbol streams."""
    trs = []
    skipped = 0
    for i in range(trials):
        try:
            trs.append(split_couple(seed, horizon, trial=i))
        except NoMarkerInHorizon:
            skipped += 1
    stat = conditional_independence_stat(trs)
    return _report(
        "split_audit",
        {"seed": seed, "trials": trials, "horizon": horizon},
        {"independence_stat": stat, "transcripts": len(trs), "no_marker_trials": skipped},
        [],
    )


# ------------------------------------------------------------------- cfiber


def run_cfiber(seed: int, trials: int, cells: int = 200, k_range: int = 32) -> dict:
    """Scenery-pair alignment study.

    Per trial: one scenery window, a translated copy and a reflected
    copy (both must be detected), plus an independent second window
    (no overlap-64 match may appear).
    """
    # even cells keeps the constructed mirror center even; k_range >= 4
    # leaves room for at least one nonzero even translate
    if cells % 2 or cells < 2 * k_range or k_range < 4:
        raise ValueError("need even cells >= 2 * k_range and k_range >= 4")
    rows = []
    for trial in range(trials):
        rng = rngutil.stream(seed, trial, rngutil.AUX)
        base = rng.integers(0, 2, size=cells, dtype=np.uint8)
        other = rng.integers(0, 2, size=cells, dtype=np.uint8)
        k = 2 * int(rng.integers(1, k_range // 2))
        s1 = ReconstructedScenery(0, base)
        shifted = ReconstructedScenery(-k, base)  # satisfies shifted(i) = s1(i + k)
        # lo=1 keeps the mirror center even: reflected(i) = s1(cells - i)
        reflected = ReconstructedScenery(1, base[::-1].copy())
        s2 = ReconstructedScenery(0, other)

        res_t = align_sceneries(s1, shifted, k_range)
        res_r = align_sceneries(s1, reflected, cells)
        res_x = align_sceneries(s1, s2, k_range)
        rows.append(
            {
                "trial": trial,
                "k": k,
                "translate_found": k in res_t.translates,
                "reflection_found": cells in res_r.reflections,
                "random_match_overlap": res_x.overlap_len,
            }
        )
    return _report(
        "cfiber",
        {"seed": seed, "trials": trials, "cells": cells, "k_range": k_range},
        {
            "all_translates_found": all(r["translate_found"] for r in rows),
            "all_reflections_found": all(r["reflection_found"] for r in rows),
            "max_random_overlap": max((r["random_match_overlap"] for r in rows), default=0),
        },
        rows,
    )
