"""Command line client for the experiment service.

Every subcommand posts one request to the HTTP app (in process by
default, or a live server via --server) and prints the report as JSON
or CSV. Reruns with the same arguments produce byte-identical output.
Exit status is 0 unless the arguments were rejected.
"""

from __future__ import annotations

import argparse
import json
import sys


def _post(path: str, payload: dict, server: str | None) -> dict:
    if server:
        import httpx

        r = httpx.post(server.rstrip("/") + path, json=payload, timeout=None)
    else:
        import warnings

        with warnings.catch_warnings():
            # this starlette release warns about its own test client import
            warnings.filterwarnings(
                "ignore", message=r"Using `httpx` with `starlette\.testclient`"
            )
            from fastapi.testclient import TestClient

        from .service import app

        with TestClient(app) as client:
            r = client.post(path, json=payload)
    if r.status_code != 200:
        raise SystemExit(f"request rejected ({r.status_code}): {r.text}")
    return r.json()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def _split_columns(report: dict) -> list[str]:
    cps = [c for c in report["params"]["checkpoints"] if 0 < c <= report["params"]["horizon"]]
    return ["trial", "status", "tau"] + [f"hamming_{n}" for n in cps]


def _split_row(row: dict, columns: list[str]) -> dict:
    flat = {"trial": row["trial"], "status": row["status"], "tau": row["tau"]}
    for (n, v), col in zip(row["hamming_samples"], columns[3:]):
        flat[col] = v
    return flat


# per-command CSV layout: (column list builder, row flattener)
_CSV = {
    "generate": (
        lambda rep: ["trial", "start", "reads", "steps"],
        lambda row, cols: dict({"trial": row["trial"]}, **row["output"]),
    ),
    "markers": (
        lambda rep: ["trial", "time", "m", "net", "fo", "ba", "block"],
        lambda row, cols: row,
    ),
    "reconstruct": (
        lambda rep: ["trial", "lo", "hi", "cells", "matches_source"],
        lambda row, cols: dict(
            trial=row["trial"], matches_source=row["matches_source"], **row["scenery"]
        ),
    ),
    "rewrite": (
        lambda rep: [
            "trial",
            "n1",
            "n2",
            "markers_1",
            "markers_2",
            "pair_equivalent1",
            "scenery_process_preserved",
            "rewritten_equivalent2",
            "markers_preserved",
            "geometry_preserved",
        ],
        lambda row, cols: row,
    ),
    "couple": (
        lambda rep: ["trial", "status", "shift", "lock_fwd", "lock_bwd"],
        lambda row, cols: row,
    ),
    "split": (_split_columns, _split_row),
    "cfiber": (
        lambda rep: ["trial", "k", "translate_found", "reflection_found", "random_match_overlap"],
        lambda row, cols: row,
    ),
}


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"
    command = report["command"]
    if command in _CSV:
        cols_of, flatten = _CSV[command]
        columns = cols_of(report)
        lines = [",".join(columns)]
        for row in report["rows"]:
            flat = flatten(row, columns)
            lines.append(",".join(_fmt(flat.get(c)) for c in columns))
    else:  # summary-only reports (marginal, split_audit)
        keys = list(report["summary"].keys())
        lines = [",".join(keys), ",".join(_fmt(report["summary"][k]) for k in keys)]
    return "\n".join(lines) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ttlab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", default=None, help="write output to this file instead of stdout")
        p.add_argument("--server", default=None, help="base URL of a running service")

    p = sub.add_parser("generate", help="sample process windows")
    common(p)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--window", type=int, default=100)

    p = sub.add_parser("markers", help="stream a long run and record marker occurrences")
    common(p)
    p.add_argument("--steps", type=int, default=1_000_000)
    p.add_argument("--chunk", type=int, default=None)

    p = sub.add_parser("reconstruct", help="round-trip scenery recovery from windows")
    common(p)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--window", type=int, default=100)

    p = sub.add_parser("rewrite", help="marker interval surgery on swapped pairs")
    common(p)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--window", type=int, default=2500)
    p.add_argument("--m-bound", type=int, default=40)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("couple", help="window-conditioned coupling trials")
    common(p)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--horizon", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("marginal", help="TV distance of coupled output near the window")
    common(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--depth", type=int, default=2)

    p = sub.add_parser("split", help="shared-marker path splitting trials")
    common(p)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--horizon", type=int, default=1_000_000)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("split-audit", help="correlation audit of split pre-marker streams")
    common(p)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--horizon", type=int, default=300_000)

    p = sub.add_parser("cfiber", help="scenery pair alignment study")
    common(p)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--cells", type=int, default=200)
    p.add_argument("--k-range", type=int, default=32)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return ap


def _payload(args: argparse.Namespace) -> tuple[str, dict]:
    c = args.command
    if c == "generate":
        return "/generate", {"seed": args.seed, "trials": args.trials, "window": args.window}
    if c == "markers":
        return "/markers", {"seed": args.seed, "steps": args.steps, "chunk": args.chunk}
    if c == "reconstruct":
        return "/reconstruct", {"seed": args.seed, "trials": args.trials, "window": args.window}
    if c == "rewrite":
        return "/rewrite", {
            "seed": args.seed,
            "trials": args.trials,
            "window": args.window,
            "m_bound": args.m_bound,
            "workers": args.workers,
        }
    if c == "couple":
        return "/couple", {
            "seed": args.seed,
            "trials": args.trials,
            "n": args.n,
            "horizon": args.horizon,
            "workers": args.workers,
        }
    if c == "marginal":
        return "/marginal", {
            "seed": args.seed,
            "trials": args.trials,
            "n": args.n,
            "depth": args.depth,
        }
    if c == "split":
        return "/split", {
            "seed": args.seed,
            "trials": args.trials,
            "horizon": args.horizon,
            "workers": args.workers,
        }
    if c == "split-audit":
        return "/split-audit", {"seed": args.seed, "trials": args.trials, "horizon": args.horizon}
    if c == "cfiber":
        return "/cfiber", {
            "seed": args.seed,
            "trials": args.trials,
            "cells": args.cells,
            "k_range": args.k_range,
        }
    raise AssertionError(c)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0
    path, payload = _payload(args)
    report = _post(path, payload, args.server)
    _emit(render(report, args.format), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
