"""Command line interface: subcommands, exit codes, and report formats."""

import numpy as np
import pytest

from istl.cli import main
from istl.embedding import LinearSystem
from istl.traces import Trace

BAND_SPEC_TEXT = (
    "vars y; "
    "F[0,16](([-1.05,-0.95]*y + [0.68,0.72] >= 0) | ([0.95,1.05]*y + [-1.32,-1.28] >= 0)) "
    "& ((([0.95,1.05]*y + [-0.72,-0.68] >= 0) & ([-1.05,-0.95]*y + [1.28,1.32] >= 0)) "
    "| F[0,8] G[0,8] (([0.95,1.05]*y + [-0.72,-0.68] >= 0) & ([-1.05,-0.95]*y + [1.28,1.32] >= 0)))"
)


@pytest.fixture()
def workdir(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text("G[0,2] y >= 0\n")
    up = tmp_path / "up.csv"
    up.write_text(Trace(("y",), np.full((5, 1), 0.5)).to_csv())
    down = tmp_path / "down.csv"
    down.write_text(Trace(("y",), np.full((5, 1), -0.5)).to_csv())
    mixed = tmp_path / "mixed.csv"
    mixed.write_text(Trace(("y",), np.array([[0.5], [0.01], [0.3], [0.4], [0.6]])).to_csv())
    system = tmp_path / "sys.json"
    system.write_text(
        LinearSystem(
            A=[[1.0, 0.25], [0.0, 1.0]],
            B=[[0.0], [0.25]],
            w_lo=[-0.001, -0.001],
            w_hi=[0.001, 0.001],
            u_lo=[-1.0],
            u_hi=[1.0],
            output_vars=[("y", 0)],
        ).to_json()
    )
    band = tmp_path / "band.txt"
    band.write_text(BAND_SPEC_TEXT + "\n")
    return tmp_path


def test_monitor_exit_codes(workdir, capsys):
    spec = str(workdir / "spec.txt")
    assert main(["monitor", spec, str(workdir / "up.csv")]) == 0
    assert main(["monitor", spec, str(workdir / "down.csv")]) == 1
    # widening past the margin turns the verdict undefined
    assert main(["monitor", spec, str(workdir / "mixed.csv"), "--radii", "0.1"]) == 2
    capsys.readouterr()


def test_monitor_report_format(workdir, capsys):
    spec = str(workdir / "spec.txt")
    rc = main(["monitor", spec, str(workdir / "up.csv")])
    out = capsys.readouterr().out
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "# istl monitor"
    assert any(l.startswith("# spec=") for l in lines)
    assert any(l.startswith("# until=paper") for l in lines)
    body = [l for l in lines if not l.startswith("#")]
    assert body[0] == "t,rho_lo,rho_hi,verdict"
    assert body[1] == "0,0.5,0.5,True"
    assert len(body) == 1 + 3  # G[0,2] on 5 samples leaves 3 evaluable steps


def test_monitor_at_and_out(workdir, capsys, tmp_path):
    spec = str(workdir / "spec.txt")
    out_file = tmp_path / "report.csv"
    rc = main(["monitor", spec, str(workdir / "up.csv"), "--at", "2", "--out", str(out_file)])
    assert rc == 0
    text = out_file.read_text()
    assert "# at=2" in text
    assert text.strip().endswith("2,0.5,0.5,True")
    assert capsys.readouterr().out == ""
    # --at past the evaluable range is an error, not a silent clamp
    assert main(["monitor", spec, str(workdir / "up.csv"), "--at", "9"]) == 5


def test_monitor_stdin(workdir, capsys, monkeypatch):
    import io

    spec = str(workdir / "spec.txt")
    payload = (workdir / "up.csv").read_text()
    monkeypatch.setattr("sys.stdin", io.StringIO(payload))
    assert main(["monitor", spec, "-"]) == 0
    capsys.readouterr()


def test_monitor_interval_trace_rejects_radii(workdir, capsys):
    spec = str(workdir / "spec.txt")
    itr_path = workdir / "itr.csv"
    tr = Trace(("y",), np.full((5, 1), 0.5)).widen(0.1)
    itr_path.write_text(tr.to_csv())
    assert main(["monitor", spec, str(itr_path)]) == 0
    assert main(["monitor", spec, str(itr_path), "--radii", "0.1"]) == 4
    capsys.readouterr()


def test_error_exit_codes(workdir, capsys):
    bad_spec = workdir / "bad.txt"
    bad_spec.write_text("G[2,1] y >= 0\n")
    assert main(["monitor", str(bad_spec), str(workdir / "up.csv")]) == 3
    assert main(["monitor", str(workdir / "spec.txt"), str(workdir / "missing.csv")]) == 4
    garbled = workdir / "garbled.csv"
    garbled.write_text("no trace here")
    assert main(["monitor", str(workdir / "spec.txt"), str(garbled)]) == 4
    # horizon longer than the trace is a domain error, not a crash
    long_spec = workdir / "long.txt"
    long_spec.write_text("G[0,99] y >= 0\n")
    assert main(["monitor", str(long_spec), str(workdir / "up.csv")]) == 5
    capsys.readouterr()


def test_usage_errors_exit_3(workdir, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 3
    with pytest.raises(SystemExit) as exc:
        main(["synth", str(workdir / "sys.json"), str(workdir / "band.txt")])
    assert exc.value.code == 3
    with pytest.raises(SystemExit) as exc:
        main(["check-soundness", "s", "t", "--seed", "-1"])
    assert exc.value.code == 3
    capsys.readouterr()


def test_check_soundness(workdir, capsys):
    spec = str(workdir / "spec.txt")
    rc = main(
        ["check-soundness", spec, str(workdir / "mixed.csv"), "--samples", "200", "--seed", "7"]
    )
    out = capsys.readouterr().out
    assert rc == 0
    assert "violations,0" in out
    assert "rho_lo,0.01" in out
    assert "verdict,True" in out
    # sampled extremes stay inside the interval bound
    smin = float(next(l.split(",")[1] for l in out.splitlines() if l.startswith("sampled_min")))
    rlo = float(next(l.split(",")[1] for l in out.splitlines() if l.startswith("rho_lo")))
    assert smin >= rlo - 1e-12


def test_synth_runs_and_reports(workdir, capsys, tmp_path):
    out_file = tmp_path / "log.csv"
    rc = main(
        [
            "synth",
            str(workdir / "sys.json"),
            str(workdir / "band.txt"),
            "--steps", "8",
            "--x0", "1.0,0.0",
            "--seed", "5",
            "--out", str(out_file),
        ]
    )
    assert rc == 0
    text = out_file.read_text()
    assert "# istl synth" in text
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    assert lines[0] == "t,u,rho_lo,solve_time,nodes"
    assert len(lines) == 9
    assert all(float(l.split(",")[2]) >= 0.0 for l in lines[1:])
    capsys.readouterr()


def test_synth_deterministic_modulo_timing(workdir, tmp_path, capsys):
    args = [
        "synth",
        str(workdir / "sys.json"),
        str(workdir / "band.txt"),
        "--steps", "6",
        "--x0", "1.0,0.0",
        "--seed", "3",
    ]
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    capsys.readouterr()

    def strip_timing(path):
        rows = []
        for line in path.read_text().splitlines():
            if line.startswith("#") or line.startswith("t,"):
                rows.append(line)
                continue
            cols = line.split(",")
            del cols[3]  # solve_time column
            rows.append(",".join(cols))
        return rows

    assert strip_timing(a) == strip_timing(b)


def test_synth_infeasible_exit(workdir, capsys, tmp_path):
    weak = tmp_path / "weak.json"
    weak.write_text(
        LinearSystem(
            A=[[1.0, 0.25], [0.0, 1.0]],
            B=[[0.0], [0.25]],
            w_lo=[-0.001, -0.001],
            w_hi=[0.001, 0.001],
            u_lo=[-0.001],
            u_hi=[0.001],
            output_vars=[("y", 0)],
        ).to_json()
    )
    rc = main(
        [
            "synth",
            str(weak),
            str(workdir / "band.txt"),
            "--steps", "4",
            "--x0", "2.5,0.0",
        ]
    )
    err = capsys.readouterr().err
    assert rc == 1
    assert "infeasible" in err


def test_encode_emits_lp(workdir, capsys):
    rc = main(
        [
            "encode",
            str(workdir / "sys.json"),
            str(workdir / "band.txt"),
            "--x0", "1.0,0.0",
            "--objective", "max_robustness",
        ]
    )
    out = capsys.readouterr().out
    assert rc == 0
    assert out.startswith("\\ istl encode")
    assert "\\ binaries=" in out
    assert "Minimize" in out and "Subject To" in out and "End" in out
    assert "rho_lb" in out


def test_encode_default_objective(workdir, capsys):
    rc = main(
        ["encode", str(workdir / "sys.json"), str(workdir / "band.txt"), "--x0", "1.0,0.0"]
    )
    out = capsys.readouterr().out
    assert rc == 0
    assert "objective=min_input" in out
    assert "abs_u_0_0" in out


def test_until_convention_flag(workdir, capsys):
    spec = workdir / "until.txt"
    spec.write_text("(x >= 0) U[1,2] (y >= 0)\n")
    tr = workdir / "xy.csv"
    tr.write_text(
        Trace(("x", "y"), np.array([[5.0, 2.0], [-1.0, 4.0], [3.0, 0.0]])).to_csv()
    )
    # paper convention: 0 counts as satisfied; classical: strictly negative
    assert main(["monitor", str(spec), str(tr)]) == 0
    assert main(["monitor", str(spec), str(tr), "--until-convention", "classical"]) == 1
    capsys.readouterr()
