import csv
import io
import json
from contextlib import redirect_stdout

import pytest

from mtrack.cli import build_parser, main
from mtrack.motion import save_motion, save_skeleton
from mtrack.synthetic import humanoid_skeleton, static_stand, toppling, write_demo_inputs

SUBCOMMANDS = ["filter", "contact", "correct", "retarget", "oracle", "adapt-demo", "train-toy", "schedule",
               "evaluate", "pipeline", "demo"]


def run(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(argv)
    return code, buf.getvalue()


@pytest.mark.parametrize("sub", [None] + SUBCOMMANDS)
def test_help(sub):
    with pytest.raises(SystemExit) as e:
        build_parser().parse_args(([sub] if sub else []) + ["--help"])
    assert e.value.code == 0


@pytest.fixture
def files(tmp_path):
    save_skeleton(humanoid_skeleton(), tmp_path / "skel.json")
    save_motion(static_stand(30), tmp_path / "stand.json")
    save_motion(toppling(), tmp_path / "top.json")
    return tmp_path


def test_filter_exit_codes(files):
    assert run(["filter", "--input", str(files / "stand.json"), "--skeleton", str(files / "skel.json")])[0] == 0
    code, out = run(["filter", "--input", str(files / "top.json"), "--skeleton", str(files / "skel.json"),
                     "--report", str(files / "r.json")])
    assert code == 3 and "boundary_unstable" in out
    assert json.loads((files / "r.json").read_text())["reject_reason"] == "boundary_unstable"


def test_contact_then_correct_then_evaluate(files):
    s, k = str(files / "stand.json"), str(files / "skel.json")
    assert run(["contact", "--input", s, "--skeleton", k, "--output", str(files / "c.json")])[0] == 0
    assert run(["correct", "--input", str(files / "c.json"), "--output", str(files / "k.json")])[0] == 0
    code, out = run(["evaluate", "--rollout", str(files / "k.json"), "--ref", s, "--skeleton", k])
    assert code == 0 and "e_mpbpe_mm" in json.loads(out)


def test_correct_without_contact_fails(files, capsys):
    assert main(["correct", "--input", str(files / "stand.json"), "--output", str(files / "x.json")]) == 1
    assert "contact" in capsys.readouterr().err


def test_oracle():
    code, out = run(["oracle", "--coeffs", "1,1,1"])
    assert code == 0 and "sigma*=0.367879441" in out


def test_schedule(tmp_path):
    p = tmp_path / "s.csv"
    assert main(["schedule", "--k-max", "20", "--every", "10", "--output", str(p)]) == 0
    rows = list(csv.DictReader(p.open()))
    assert [r["k"] for r in rows] == ["0", "10", "20"] and float(rows[0]["theta"]) == 1.5


def test_train_toy(tmp_path):
    from mtrack.motion import save_motion
    from mtrack.synthetic import sinusoid_reference
    save_motion(sinusoid_reference(n_frames=20), tmp_path / "ref.json")
    code, out = run(["train-toy", "--ref", str(tmp_path / "ref.json"), "--iters", "1", "--fixed",
                     "--policy", str(tmp_path / "p.json"), "--trace", str(tmp_path / "t.csv")])
    assert code == 0 and "sigma_jpos=0.3" in out
    assert len(json.loads((tmp_path / "p.json").read_text())["table"]) == 19


def test_pipeline_exit_codes(tmp_path):
    cfg = write_demo_inputs(tmp_path / "d", train_iters=1)
    assert run(["pipeline", "--config", cfg])[0] == 3
    bad = tmp_path / "bad.json"
    bad.write_text('{"output": "o", "bogus": 1}')
    assert main(["pipeline", "--config", str(bad)]) == 2
    assert main(["pipeline", "--config", str(tmp_path / "absent.json")]) == 2


def test_demo_command(tmp_path):
    code, out = run(["demo", "--dir", str(tmp_path / "x")])
    assert code == 0 and out.strip().endswith("pipeline.json")
