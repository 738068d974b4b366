import json

import numpy as np
import pytest

from torusreg import __version__
from torusreg import io as tio
from torusreg.constructions import random_band_limited
from torusreg.lattice import FourierMap, GridField, max_coeff_diff, synthesize

CFG = {"command": "norm", "tau": 1.0, "b": 2, "out": "x", "threads": 4}


def test_config_hash_ignores_runtime_keys():
    a = tio.config_hash(CFG)
    b = tio.config_hash({**CFG, "out": "elsewhere", "threads": 1, "config": "c.json"})
    assert a == b and len(a) == 64
    assert tio.config_hash({**CFG, "tau": 2.0}) != a
    assert tio.provenance_line(CFG) == f"# torusreg {__version__} config_sha256={a}"


def test_config_round_trip(tmp_path):
    p = tmp_path / "config.json"
    tio.write_config(p, CFG)
    back = tio.read_config(p)
    assert back == tio.result_config(CFG)
    assert json.loads(p.read_text())["provenance"]["config_sha256"] == tio.config_hash(CFG)


def test_fourier_map_round_trip(tmp_path):
    f = random_band_limited(3, 2, 4, 1.0, 5)
    p = tmp_path / "f.json"
    tio.write_fourier_map(p, f, CFG)
    g = tio.read_fourier_map(p)
    assert g.n == 3 and g.d == 2 and g.real
    assert max_coeff_diff(f, g) == 0.0


def test_malformed_json_reports_offset(tmp_path):
    p = tmp_path / "bad.json"
    p.write_bytes(b'{"n": 2, "d": 1, "coeffs": [}')
    with pytest.raises(tio.MalformedFileError) as exc:
        tio.read_fourier_map(p)
    assert exc.value.offset == 28
    assert "byte 28" in str(exc.value)


def test_bad_entry_reports_its_offset(tmp_path):
    text = '{"n": 2, "d": 1, "coeffs": [{"k": [1, 0], "re": [0.5]}, {"k": [1], "re": [0.5]}]}'
    p = tmp_path / "bad.json"
    p.write_text(text)
    with pytest.raises(tio.MalformedFileError) as exc:
        tio.read_fourier_map(p)
    assert exc.value.offset == text.index('{"k": [1]')
    assert "entry 1" in str(exc.value)


def test_non_real_coefficients_rejected(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"n": 1, "d": 1, "real": true, "coeffs": [{"k": [1], "re": [1.0], "im": [0.0]}]}')
    with pytest.raises(tio.MalformedFileError):
        tio.read_fourier_map(p)


def test_missing_keys_and_invalid_utf8(tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"n": 2}')
    with pytest.raises(tio.MalformedFileError, match="missing key 'd'"):
        tio.read_fourier_map(p)
    p.write_bytes(b'{"n": \xff}')
    with pytest.raises(tio.MalformedFileError) as exc:
        tio.read_fourier_map(p)
    assert exc.value.offset == 6


def test_csv_round_trip(tmp_path):
    p = tmp_path / "t.csv"
    tio.write_csv(p, ("a", "b", "c"), [(1, 0.1, True), (2, float("nan"), "x")], CFG)
    line, header, rows = tio.read_csv(p)
    assert line == tio.provenance_line(CFG)
    assert header == ["a", "b", "c"]
    assert rows == [["1", "0.10000000000000001", "1"], ["2", "nan", "x"]]
    assert float(rows[0][1]) == 0.1


def test_csv_without_provenance_rejected(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(tio.MalformedFileError):
        tio.read_csv(p)


def test_grid_round_trip_and_header(tmp_path):
    g = synthesize(random_band_limited(2, 2, 3, 1.0, 1), 8)
    p = tmp_path / "g.grid"
    tio.write_grid(p, g)
    raw = p.read_bytes()
    assert raw[:8] == b"TORGRID1" and len(raw) == 32 + 8 * 2 * 64
    back = tio.read_grid(p)
    assert (back.n, back.d, back.N) == (2, 2, 8)
    assert np.array_equal(back.values, g.values)


def test_grid_corruption(tmp_path):
    p = tmp_path / "g.grid"
    tio.write_grid(p, GridField(1, 1, 4, np.zeros((4, 1))))
    raw = p.read_bytes()
    p.write_bytes(raw[:-3])
    with pytest.raises(tio.MalformedFileError, match="expected"):
        tio.read_grid(p)
    p.write_bytes(b"NOTAGRID" + raw[8:])
    with pytest.raises(tio.MalformedFileError, match="bad magic"):
        tio.read_grid(p)
    p.write_bytes(raw[:10])
    with pytest.raises(tio.MalformedFileError, match="truncated"):
        tio.read_grid(p)


def test_dump_is_deterministic():
    f = FourierMap.cosine((1, 2))
    assert tio.dump_fourier_map(f, CFG) == tio.dump_fourier_map(FourierMap.cosine((1, 2)), CFG)
