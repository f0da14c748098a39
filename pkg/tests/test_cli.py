import json

import pytest

from ttlab.cli import main


def run_cli(capsys, argv):
    rc = main(argv)
    return rc, capsys.readouterr().out


def test_json_output_shape(capsys):
    rc, out = run_cli(capsys, ["generate", "--seed", "4", "--trials", "2", "--window", "3"])
    assert rc == 0
    report = json.loads(out)
    assert report["command"] == "generate"
    assert report["params"]["seed"] == 4
    assert len(report["rows"]) == 2


def test_reruns_are_byte_identical(capsys):
    args = ["couple", "--seed", "21", "--trials", "5", "--n", "1", "--horizon", "600"]
    _, first = run_cli(capsys, args)
    _, second = run_cli(capsys, args)
    assert first == second
    _, csv1 = run_cli(capsys, args + ["--format", "csv"])
    _, csv2 = run_cli(capsys, args + ["--format", "csv"])
    assert csv1 == csv2


def test_couple_csv_columns(capsys):
    rc, out = run_cli(
        capsys,
        ["couple", "--seed", "21", "--trials", "4", "--n", "1", "--horizon", "2000", "--format", "csv"],
    )
    assert rc == 0
    lines = out.strip().split("\n")
    assert lines[0] == "trial,status,shift,lock_fwd,lock_bwd"
    assert len(lines) == 5
    # integers verbatim; missing locks are empty fields
    for line in lines[1:]:
        cells = line.split(",")
        assert cells[1] in ("success", "horizon_exceeded")
        assert int(cells[2]) % 2 == 0
        if cells[1] == "horizon_exceeded":
            assert cells[3] == "" and cells[4] == ""


def test_markers_csv(capsys):
    rc, out = run_cli(capsys, ["markers", "--steps", "300000", "--seed", "7", "--format", "csv"])
    lines = out.strip().split("\n")
    assert lines[0] == "trial,time,m,net,fo,ba,block"
    for line in lines[1:]:
        cells = line.split(",")
        assert int(cells[1]) >= 0 and int(cells[2]) >= 11


def test_generate_window_zero_single_symbol(capsys):
    rc, out = run_cli(capsys, ["generate", "--window", "0", "--format", "csv"])
    lines = out.strip().split("\n")
    assert lines[0] == "trial,start,reads,steps"
    cells = lines[1].split(",")
    assert cells[1] == "0" and len(cells[2]) == 1 and len(cells[3]) == 1


def test_split_csv_blank_tau_on_no_marker(capsys):
    rc, out = run_cli(
        capsys,
        ["split", "--seed", "2", "--trials", "5", "--horizon", "1200", "--format", "csv"],
    )
    assert rc == 0
    lines = out.strip().split("\n")
    assert lines[0] == "trial,status,tau"  # no checkpoint at or below this horizon
    statuses = [line.split(",")[1] for line in lines[1:]]
    assert "no_marker" in statuses  # markers are rare in 1200 steps
    for line in lines[1:]:
        cells = line.split(",")
        if cells[1] == "no_marker":
            assert cells[2] == ""


def test_rewrite_csv_booleans(capsys):
    rc, out = run_cli(
        capsys,
        ["rewrite", "--seed", "17", "--trials", "2", "--window", "800", "--format", "csv"],
    )
    lines = out.strip().split("\n")
    header = lines[0].split(",")
    for line in lines[1:]:
        row = dict(zip(header, line.split(",")))
        assert row["rewritten_equivalent2"] == "true"
        assert ";" not in row["n1"] and int(row["n1"]) <= -40


def test_marginal_csv_summary_row(capsys):
    rc, out = run_cli(capsys, ["marginal", "--trials", "40", "--depth", "0", "--format", "csv"])
    lines = out.strip().split("\n")
    assert lines[0] == "tv" and lines[1] == "0.000000"


def test_out_file_matches_stdout(tmp_path, capsys):
    args = ["cfiber", "--trials", "2", "--format", "csv"]
    _, stdout = run_cli(capsys, args)
    target = tmp_path / "report.csv"
    rc, _ = run_cli(capsys, args + ["--out", str(target)])
    assert rc == 0
    assert target.read_text() == stdout


def test_usage_errors_exit_nonzero(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["couple", "--trials", "0"])  # rejected by the service
    assert exc.value.code != 0
    with pytest.raises(SystemExit) as exc:
        main(["couple", "--n", "5", "--horizon", "4"])  # window reach above horizon
    assert exc.value.code != 0


def test_server_flag_uses_live_service(capsys):
    import threading
    import time

    import uvicorn

    from ttlab.service import app

    config = uvicorn.Config(app, host="127.0.0.1", port=8732, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        for _ in range(100):
            if server.started:
                break
            time.sleep(0.05)
        assert server.started
        args = ["generate", "--seed", "4", "--trials", "1", "--window", "3"]
        _, local = run_cli(capsys, args)
        _, remote = run_cli(capsys, args + ["--server", "http://127.0.0.1:8732"])
        assert local == remote
    finally:
        server.should_exit = True
        thread.join(timeout=5)
