import json
import subprocess
import sys

import pytest

from torusreg import io as tio
from torusreg.cli import main, parse_omega, resolve_config, build_parser


def run_cli(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_sphere_prints_count(tmp_path, capsys):
    code, out, _ = run_cli(["sphere", "--n", "3", "--r", "2", "--out", str(tmp_path)], capsys)
    assert code == 0 and out.strip() == "18"
    body = json.loads((tmp_path / "sphere.json").read_text())
    assert body["count"] == 18


def test_norm_single_mode(tmp_path, capsys):
    code, out, _ = run_cli(["norm", "--out", str(tmp_path)], capsys)
    assert code == 0 and out.strip() == "6.36396"
    line, header, rows = tio.read_csv(tmp_path / "blocks.csv")
    assert header == ["nu", "theta", "sqrt_theta", "partial_sum"]
    assert float(rows[2][1]) == 40.5


def test_norm_from_file(tmp_path, capsys):
    from torusreg.lattice import FourierMap
    p = tmp_path / "f.json"
    tio.write_fourier_map(p, FourierMap.cosine((1, 2)), {})
    code, out, _ = run_cli(["norm", "--input", str(p), "--out", str(tmp_path / "o")], capsys)
    assert code == 0 and out.strip() == "6.36396"


def test_malformed_input_reports_byte_offset(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"n": 2, "d": 1, "coeffs": [1, ]}')
    code, _, err = run_cli(["norm", "--input", str(p), "--out", str(tmp_path / "o")], capsys)
    assert code == 1
    assert "byte" in err and str(p) in err


def test_unknown_flag_exits_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["norm", "--no-such-flag", "3"])
    assert exc.value.code == 1


def test_kam_golden_converges(tmp_path, capsys):
    code, out, _ = run_cli(["kam", "--out", str(tmp_path), "--transform-grid", "8"], capsys)
    assert code == 0 and "converged=True" in out
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["converged"] and s["residual"] <= 1e-8
    assert tio.read_grid(tmp_path / "transform.grid").N == 8


def test_kam_resonant_exits_one_naming_k(tmp_path, capsys):
    code, _, err = run_cli(["kam", "--omega", "1,1", "--out", str(tmp_path)], capsys)
    assert code == 1 and "k=(1, -1)" in err


def test_kam_not_converged_exits_two(tmp_path, capsys):
    code, _, _ = run_cli(["kam", "--max-steps", "1", "--out", str(tmp_path)], capsys)
    assert code == 2
    assert json.loads((tmp_path / "summary.json").read_text())["reason"] == "max_steps"


def test_dioph_output(tmp_path, capsys):
    code, out, _ = run_cli(["dioph", "--omega", "sqrt2", "--kmax", "50", "--out", str(tmp_path)], capsys)
    assert code == 0 and out.startswith("alpha_est=0.828427") and "(1, -1)" in out


def test_modulus_and_construct(tmp_path, capsys):
    code, _, _ = run_cli(["modulus", "--nu-max", "4", "--samples", "32", "--out", str(tmp_path / "m")], capsys)
    assert code == 0
    _, header, rows = tio.read_csv(tmp_path / "m" / "modulus.csv")
    assert header == ["x", "modulus", "dini_lower", "dini_upper"] and len(rows) == 5
    for kind in ("jzt2", "jzt4b", "random"):
        code, _, _ = run_cli(["construct", kind, "--nu-max", "6", "--K", "10", "--out", str(tmp_path / kind)],
                             capsys)
        assert code == 0 and (tmp_path / kind / "summary.json").exists()


def test_construct_rejects_bad_parameters(tmp_path, capsys):
    code, _, err = run_cli(["construct", "jzt4a", "--log-alpha", "1.0", "--out", str(tmp_path)], capsys)
    assert code == 1 and "log_alpha" in err


def test_config_file_layering(tmp_path, capsys):
    out = tmp_path / "a"
    run_cli(["sphere", "--n", "3", "--r", "4", "--out", str(out)], capsys)
    # rerun from the written config, overriding one key
    args = build_parser().parse_args(["sphere", "--config", str(out / "config.json"), "--r", "2"])
    cfg = resolve_config(args)
    assert cfg["n"] == 3 and cfg["r"] == 2
    code, printed, _ = run_cli(["sphere", "--config", str(out / "config.json"), "--out", str(tmp_path / "b")], capsys)
    # S_3(r) = 4 r^2 + 2
    assert code == 0 and printed.strip() == "66"
    assert (tmp_path / "b" / "config.json").read_text() == (out / "config.json").read_text()


def test_config_for_other_command_rejected(tmp_path, capsys):
    run_cli(["sphere", "--out", str(tmp_path)], capsys)
    code, _, err = run_cli(["norm", "--config", str(tmp_path / "config.json"), "--out", str(tmp_path)], capsys)
    assert code == 1 and "sphere" in err


def test_parse_omega():
    assert parse_omega("1,2.5") == (1.0, 2.5)
    assert parse_omega("golden")[1] == pytest.approx(1.618033988749895)
    with pytest.raises(ValueError):
        parse_omega("1")
    with pytest.raises(ValueError):
        parse_omega("a,b")


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "torusreg", "sphere", "--n", "2", "--r", "3",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "12"
