import csv
import io
import json

import pytest
from hypothesis import given, settings, strategies as st

from heatweak.cli import format_value, main, run
from heatweak.config import COMMANDS, ConfigError, ExperimentConfig, parse_config


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_minimal_document_gets_defaults():
    cfg = parse_config('{"command": "weak-error", "p": [0], "N": [8]}')
    assert (cfg.T, cfg.rel_tol, cfg.quad_order, cfg.m_max) == (1.0, 1e-10, 16, 1_000_000)
    assert cfg.p == (0.0,) and cfg.N == (8,) and cfg.format == "csv"


def test_p_outside_range_rejected():
    with pytest.raises(ConfigError, match=r"0 <= p < 1/2"):
        parse_config('{"command": "weak-error", "p": [0.6], "N": [8]}')


def test_flags_override_document():
    cfg = parse_config('{"command": "weak-error", "N": [8]}', {"N": [16, 32], "T": None})
    assert cfg.N == (16, 32) and cfg.T == 1.0


def test_unknown_keys_listed():
    with pytest.raises(ConfigError, match="unknown configuration keys: bogus, extra"):
        parse_config('{"command": "rate", "extra": 1, "bogus": 2}')


@pytest.mark.parametrize("doc, path", [
    ('{"command": "rate", "N": [8, "16"]}', r"\$\.N\[1\]"),
    ('{"command": "rate", "T": "1"}', r"\$\.T"),
    ('{"command": "rate", "p": 0.1}', r"\$\.p"),
    ('{"command": "rate", "tail_correction": 1}', r"\$\.tail_correction"),
])
def test_type_errors_name_the_path(doc, path):
    with pytest.raises(ConfigError, match=path):
        parse_config(doc)


@pytest.mark.parametrize("doc, msg", [
    ('{"command": "weak-error", "N": []}', "non-empty"),
    ('{"command": "weak-error", "N": [0]}', ">= 1"),
    ('{"command": "weak-error", "N": [1]}', "h = T/N must be < 1"),
    ('{"command": "weak-error", "T": -1.0}', "T must be positive"),
    ('{"command": "rate", "N": [8, 16]}', "at least 3"),
    ('{"command": "nope"}', "command must be one of"),
    ('{"N": [8]}', "command"),
    ('[1, 2]', "JSON object"),
    ('{"command": ', "malformed"),
])
def test_invalid_configs(doc, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(doc)


@settings(deadline=None, max_examples=50)
@given(st.sampled_from(COMMANDS),
       st.lists(st.floats(0.0, 0.499), min_size=1, max_size=4),
       st.lists(st.integers(2, 4096), min_size=3, max_size=5, unique=True),
       st.integers(0, 2**64 - 1), st.sampled_from(["csv", "json"]))
def test_round_trip(command, p, N, seed, fmt):
    cfg = ExperimentConfig(command=command, p=tuple(p), N=tuple(N), seed=seed, format=fmt)
    assert parse_config(cfg.to_json()) == cfg


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_seventeen_digits_round_trip(x):
    assert float(format_value(x)) == x


def test_empty_N_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["weak-error", "--N", ""])
    assert info.value.code == 2
    assert "N must be a non-empty list" in capsys.readouterr().err


def test_bad_p_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit):
        main(["rate", "--p", "0.5"])
    assert "1/2" in capsys.readouterr().err


def test_weak_error_csv(tmp_path):
    out = tmp_path / "we.csv"
    assert main(["weak-error", "--p", "0,0.4", "--N", "8,16", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["p", "T", "N", "h", "modes_used", "value", "tail_bound", "status", "schema"]
    assert [(r["p"], r["N"]) for r in rows] == [("0", "8"), ("0", "16"), ("0.40000000000000002", "8"),
                                               ("0.40000000000000002", "16")]
    assert all(r["status"] == "ok" and r["schema"] == "heatweak.weak-error.v1" for r in rows)
    assert all(abs(float(r["tail_bound"])) <= 1e-10 * abs(float(r["value"])) for r in rows)


def test_decompose_residual_column(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["decompose", "--p", "0", "--N", "8", "--out", str(out)]) == 0
    (row,) = read_csv(out)
    assert list(row)[:7] == ["p", "N", "direct", "delta_total", "i_total", "j_total", "residual"]
    assert abs(float(row["residual"])) <= 1e-10


def test_rate_writes_slope_and_points(tmp_path):
    out = tmp_path / "rate.csv"
    Ns = ",".join(str(2**j) for j in range(3, 13))
    assert main(["rate", "--p", "0", "--N", Ns, "--out", str(out)]) == 0
    (row,) = read_csv(out)
    assert list(row)[:5] == ["p", "slope", "intercept", "r_squared", "n_points"]
    assert abs(float(row["slope"]) - 0.5) <= 0.08 and row["n_points"] == "10"
    points = read_csv(tmp_path / "rate_points.csv")
    assert [int(r["N"]) for r in points] == [2**j for j in range(3, 13)]


def test_json_output(tmp_path):
    out = tmp_path / "s.json"
    assert main(["strong-error", "--N", "8,16", "--format", "json", "--out", str(out)]) == 0
    rows = json.loads(out.read_text())
    assert [r["N"] for r in rows] == [8, 16] and rows[0]["schema"] == "heatweak.strong-error.v1"


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "weak-error", "N": [8], "p": [0.1]}))
    buf = io.StringIO()
    from heatweak.cli import build_parser, config_from_args
    parsed = config_from_args(build_parser().parse_args(["weak-error", "--config", str(cfg), "--N", "16,32"]))
    assert parsed.N == (16, 32) and parsed.p == (0.1,)
    assert run(parsed, stdout=buf) == 0
    assert len(buf.getvalue().strip().splitlines()) == 3


def test_numerical_failure_keeps_partial_output(tmp_path):
    out = tmp_path / "f.csv"
    status = main(["weak-error", "--N", "8", "--no-tail-correction", "--m-max", "1000", "--out", str(out)])
    assert status == 1
    (row,) = read_csv(out)
    assert row["status"].startswith("failed: TruncationError")
    assert float(row["value"]) < 0 and row["modes_used"] == "1000"


def test_bounds_command_reports_each_lemma(tmp_path):
    out = tmp_path / "b.csv"
    main(["bounds", "--out", str(out)])
    rows = read_csv(out)
    assert [r["lemma"] for r in rows] == ["a1", "ad", "at"]
    assert rows[0]["pass"] == "true" and rows[1]["pass"] == "true"


def test_identical_config_gives_identical_bytes(tmp_path):
    args = ["mc-validate", "--samples", "3000", "--seed", "17", "--N", "8"]
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    main(args + ["--out", str(a)])
    main(args + ["--out", str(b)])
    main(args + ["--out", str(c), "--workers", "3"])
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()


def test_dump_config(capsys):
    assert main(["rate", "--N", "8,16,32", "--dump-config"]) == 0
    assert parse_config(capsys.readouterr().out).N == (8, 16, 32)
