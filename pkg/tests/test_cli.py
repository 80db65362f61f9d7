import json

import pytest

from tvbar.cli import EXIT_DOMAIN, EXIT_IO, EXIT_OK, EXIT_USAGE, paper_check_battery, run


def test_certify_table(capsys):
    assert run(["certify", "--functional", "F2", "--omega", "0.0133", "--sigma", "0.00665",
                "--lambda", "1000"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "verdict: certified" in out and "margin" in out


def test_certify_json_strict(capsys):
    code = run(["certify", "--functional", "F2", "--omega", "0.0133", "--sigma", "0.00665",
                "--lambda", "400", "--format", "json", "--strict"])
    assert code == EXIT_DOMAIN
    out = capsys.readouterr().out
    assert json.loads(out)["verdict"] is False


def test_unknown_flag_is_usage_error():
    assert run(["certify", "--bogus"]) == EXIT_USAGE
    assert run(["no-such-command"]) == EXIT_USAGE


def test_missing_input_is_io_error(tmp_path):
    assert run(["blur", "-i", str(tmp_path / "missing.json"), "--sigma", "0.1"]) == EXIT_IO


def test_synth_blur_deblur_pipeline(tmp_path, capsys):
    code_path = tmp_path / "z.json"
    sig_path = tmp_path / "f.csv"
    noisy_path = tmp_path / "g.csv"
    assert run(["synth", "--omega", "0.1", "--max-bars", "3", "--seed", "1", "-o", str(code_path)]) == EXIT_OK
    z = json.loads(code_path.read_text())
    assert (tmp_path / "z.json.manifest.json").exists()
    assert run(["blur", "-i", str(code_path), "--sigma", "0.05", "-o", str(sig_path)]) == EXIT_OK
    assert run(["noise", "-i", str(sig_path), "-a", "0.05", "--seed", "3", "-o", str(noisy_path)]) == EXIT_OK
    out = tmp_path / "run"
    assert run(["deblur", "-i", str(noisy_path), "--lambda", "1000", "--epsilon", "0.002",
                "--h", "0.001", "--out-dir", str(out)]) == EXIT_OK
    for name in ("code.json", "field.csv", "plot.svg", "manifest.json"):
        assert (out / name).exists()
    got = json.loads((out / "code.json").read_text())
    assert len(got["interfaces"]) == len(z["interfaces"])
    assert max(abs(a - b) for a, b in zip(got["interfaces"], z["interfaces"])) < 0.1 / 4
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "deblur" and manifest["parameters"]["lam"] == 1000


def test_oracle_command(tmp_path, capsys):
    p = tmp_path / "z.json"
    p.write_text(json.dumps({"interfaces": [0.3, 0.7], "starts_with_bar": False}))
    assert run(["oracle", "-i", str(p), "--sigma", "0.05", "--lambda", "60", "-m", "21",
                "--max-interfaces", "4"]) == EXIT_OK
    d = json.loads(capsys.readouterr().out)
    assert d["generating_code_recovered"] is True
    assert d["ties"] == []


def test_dualnorm_command(tmp_path, capsys):
    p = tmp_path / "z.json"
    p.write_text(json.dumps({"interfaces": [0.0, 1.0], "starts_with_bar": True}))
    assert run(["dualnorm", "-i", str(p), "--sigma", "0.15"]) == EXIT_OK
    d = json.loads(capsys.readouterr().out)
    assert d["dual_norm"] == pytest.approx(0.5)
    assert d["lambda_star"] == pytest.approx(1.0)
    assert d["lambda_0"] == pytest.approx(2 / 0.93)


def test_kernel_check_box(capsys):
    assert run(["kernel-check", "--kernel", "box", "--sigma", "0.1"]) == EXIT_OK
    d = json.loads(capsys.readouterr().out)
    assert d["in_K3"] is False and d["worst_J"] == pytest.approx(-5.0, rel=1e-6)


def test_paper_check_battery():
    rows = paper_check_battery(2, seed=0)
    assert all(r["passed"] for r in rows)
    assert run(["paper-check", "--sets", "1"]) == EXIT_OK
