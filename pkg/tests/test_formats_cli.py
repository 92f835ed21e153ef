import os

import numpy as np
import pytest

from muskat import cli
from muskat.errors import ConfigError
from muskat.formats import (
    Snapshot,
    dump_document,
    file_digest,
    format_telemetry,
    parse_document,
    read_document,
    read_snapshot,
    read_telemetry,
    write_document,
    write_snapshot,
)
from muskat.evolve import StepRecord

GOOD = """problem: graph
initial: cosine(1e-3, 1)
n: 64
t_end: 2e-3
snapshot_times: [0, 1e-3, 2e-3]
checkpoint_every: 3
controller:
  rtol: 1e-9
  dt_init: 1e-5
quadrature:
  method: grid
"""


def _run(argv, capsys=None):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr() if capsys else None
    return code, out


# ---------------------------------------------------------------------------
# formats


def test_snapshot_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(0)
    a, u, v = rng.normal(size=(3, 17))
    a.sort()
    write_snapshot(tmp_path / "s.txt", 1.0 / 3.0, "two-phase", a, u, v)
    s = read_snapshot(tmp_path / "s.txt")
    assert isinstance(s, Snapshot) and s.t == 1.0 / 3.0 and s.problem == "two-phase" and s.n == 17
    assert np.array_equal(s.alphas, a) and np.array_equal(s.columns, np.vstack([u, v]))
    first = (tmp_path / "s.txt").read_text().splitlines()[0]
    assert first == "# t=0.33333333333333331 problem=two-phase n=17"


def test_snapshot_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1 2\n")
    with pytest.raises(ConfigError):
        read_snapshot(p)
    p.write_text("# t=0 problem=graph n=3\n1 2\n")
    with pytest.raises(ConfigError):
        read_snapshot(p)


def test_telemetry_roundtrip(tmp_path):
    recs = [StepRecord(0.1, 0.01, 0.5, True, 64), StepRecord(0.1, 0.02, 3.0, False, 64)]
    p = tmp_path / "tel.txt"
    p.write_text("# t dt err accepted nodes\n" + format_telemetry(recs))
    rows = read_telemetry(p)
    assert rows.shape == (2, 5)
    assert rows[1].tolist() == [0.1, 0.02, 3.0, 0.0, 64.0]


def test_document_roundtrip(tmp_path):
    doc = {"kind": "x", "value": -3.3723866227862214, "flag": True, "none": None, "n": 5,
           "list": [0.0, 3.46e-4], "nested": {"a": 1, "b": {"c": "text"}}}
    write_document(tmp_path / "d.txt", doc)
    text = (tmp_path / "d.txt").read_text()
    assert text.startswith("format_version: 1\n")
    back = read_document(tmp_path / "d.txt")
    assert back["value"] == doc["value"]
    assert back["nested"]["b"]["c"] == "text" and back["list"] == doc["list"] and back["none"] is None
    assert back.line_of("nested.b.c") == 11


def test_document_errors():
    with pytest.raises(ConfigError, match="doc:2"):
        parse_document("a: 1\nnot a pair\n", "doc")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_document("a: 1\na: 2\n", "doc")


def test_dump_is_stable():
    assert dump_document({"a": 1.5, "b": {"c": [1, 2]}}) == "a: 1.5\nb:\n  c: [1, 2]\n"


# ---------------------------------------------------------------------------
# configuration


def test_config_error_names_line_and_field(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("problem: graph\ninitial: cosine(1e-3, 1)\nn: abc\n")
    out = tmp_path / "out"
    code, cap = _run(["simulate", "--config", bad, "--out", out], capsys)
    assert code == cli.EXIT_CONFIG
    assert "bad.txt:3" in cap.err and "(n)" in cap.err
    assert not out.exists()


@pytest.mark.parametrize("override", ["n=4", "problem=nope", "controller.bogus=1", "t_end=-1",
                                      "snapshot_times=[0, 5]"])
def test_config_validation(tmp_path, override):
    with pytest.raises(ConfigError):
        cfg = cli.load_config(None, "cosine(1e-3, 1)", [override])
        cli.validate_config(cfg)


def test_parse_initial():
    assert cli.parse_initial("cosine(1e-3, 2)") == ("cosine", [1e-3, 2.0])
    assert cli.parse_initial("flat") == ("flat", [])
    for bad in ("cosine(a)", "mystery", "flat(1)", "file:/does/not/exist"):
        with pytest.raises(ConfigError):
            cli.parse_initial(bad)


def test_paper_preset():
    cfg = cli.load_config(None, "paper-two-phase")
    assert cfg.problem == "two-phase" and cfg.n == 512
    assert cfg.quadrature == {"method": "grid"} and cfg.redistribute is False
    assert cfg.snapshot_times == [0.0, 3.46e-4, 7.66e-4, 1.04e-3, 1.84e-3]
    assert cfg.rho_bar_1 == pytest.approx(20 * np.pi) and cfg.rho_bar_2 == pytest.approx(np.pi / 20)


# ---------------------------------------------------------------------------
# simulate


def test_simulate_flat(tmp_path, capsys):
    out = tmp_path / "flat"
    code, _ = _run(["simulate", "flat", "--out", out, "--set", "n=32", "--set", "snapshot_times=[0, 5e-4, 1e-3]",
                    "--set", "quadrature.method=grid"], capsys)
    assert code == cli.EXIT_OK
    snaps = [read_snapshot(out / cli.snapshot_name(i)) for i in range(3)]
    assert [s.t for s in snaps] == [0.0, 5e-4, 1e-3]
    for s in snaps:
        assert np.array_equal(s.columns, snaps[0].columns)


def _good(tmp_path):
    p = tmp_path / "good.txt"
    p.write_text(GOOD)
    return p


def test_simulate_deterministic_and_manifest(tmp_path, capsys):
    cfg = _good(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(["simulate", "--config", cfg, "--out", a], capsys)[0] == 0
    assert _run(["simulate", "--config", cfg, "--out", b], capsys)[0] == 0
    for i in range(3):
        name = cli.snapshot_name(i)
        assert (a / name).read_bytes() == (b / name).read_bytes()
    man = read_document(a / "manifest.txt")
    assert man["termination"] == "reached_t_end"
    listed = {name: digest.split(":", 1)[1] for name, digest in man["files"].items()}
    on_disk = {f for f in os.listdir(a) if f != "manifest.txt"}
    assert set(listed) == on_disk
    for name, digest in listed.items():
        assert file_digest(a / name) == digest


def test_resume_matches_unbroken_run(tmp_path, capsys):
    cfg = _good(tmp_path)
    full, part = tmp_path / "full", tmp_path / "part"
    assert _run(["simulate", "--config", cfg, "--out", full], capsys)[0] == 0
    assert _run(["simulate", "--config", cfg, "--out", part, "--max-steps", "4"], capsys)[0] == 0
    assert read_document(part / "manifest.txt")["interrupted"] is True
    assert _run(["simulate", "--resume", part], capsys)[0] == 0
    for i in range(3):
        s1 = read_snapshot(full / cli.snapshot_name(i))
        s2 = read_snapshot(part / cli.snapshot_name(i))
        assert s1.t == s2.t
        assert np.max(np.abs(s1.columns - s2.columns)) <= 1e-10
    assert np.array_equal(read_telemetry(full / "telemetry.txt"), read_telemetry(part / "telemetry.txt"))


def test_resume_without_checkpoint(tmp_path, capsys):
    d = tmp_path / "empty"
    d.mkdir()
    (d / "config.txt").write_text(GOOD)
    assert _run(["simulate", "--resume", d], capsys)[0] == cli.EXIT_CONFIG


def test_step_collapse_exit_code(tmp_path, capsys):
    # tolerances no step above the floor can meet
    out = tmp_path / "collapse"
    code, _ = _run(["simulate", "cosine(0.2, 8)", "--out", out, "--set", "n=32", "--set", "t_end=0.1",
                    "--set", "snapshot_times=[0, 0.1]", "--set", "quadrature.method=grid",
                    "--set", "redistribute=false", "--set", "controller.dt_min=1e-3", "--set", "controller.dt_init=1e-2",
                    "--set", "controller.rtol=1e-14", "--set", "controller.atol=1e-16"], capsys)
    assert code == cli.EXIT_STEP_COLLAPSE
    assert read_document(out / "manifest.txt")["termination"] == "step_collapse"


# ---------------------------------------------------------------------------
# construct, verify, plot


@pytest.fixture(scope="module")
def turn_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("turn")
    assert cli.main(["construct-turnover", "--out", str(d)]) == 0
    return d


def test_construct_writes_certificate(turn_dir):
    cert = read_document(turn_dir / "certificate.txt")
    assert cert["format_version"] == 1
    assert cert["integral_value"] < 0 and cert["passed"] is True
    assert all(cert["conditions"].values())
    assert read_snapshot(turn_dir / "curve.txt").n == 512


def test_construct_bad_betas(tmp_path, capsys):
    assert _run(["construct-turnover", "--beta1", "2", "--beta2", "1", "--out", tmp_path / "x"], capsys)[0] == 2
    assert not (tmp_path / "x").exists()


def test_verify_reducida_roundtrip(turn_dir, tmp_path, capsys):
    rep = tmp_path / "rep.txt"
    code, _ = _run(["verify", "reducida", turn_dir / "curve.txt", "--certificate", turn_dir / "certificate.txt",
                    "--out", rep], capsys)
    assert code == 0
    assert read_document(rep)["passed"] is True


def test_verify_ad_inequality(capsys):
    code, cap = _run(["verify", "ad-inequality", "--random", "100", "--seed", "7"], capsys)
    assert code == 0 and "100/100 passed" in cap.out


def test_verify_max_principle_and_failure(tmp_path, capsys):
    run = tmp_path / "run"
    assert _run(["simulate", "--config", _good(tmp_path), "--out", run], capsys)[0] == 0
    assert _run(["verify", "max-principle", run], capsys)[0] == 0
    # a growing sequence fails with the verification exit code
    s = read_snapshot(run / cli.snapshot_name(0))
    write_snapshot(tmp_path / "g0.txt", 0.0, "graph", s.alphas, s.columns[0])
    write_snapshot(tmp_path / "g1.txt", 1.0, "graph", s.alphas, 2 * s.columns[0])
    assert _run(["verify", "max-principle", tmp_path / "g0.txt", tmp_path / "g1.txt"], capsys)[0] == cli.EXIT_VERIFY


def test_plot_outputs(tmp_path, capsys):
    run = tmp_path / "run"
    assert _run(["simulate", "--config", _good(tmp_path), "--out", run], capsys)[0] == 0
    snaps = sorted(run.glob("snapshot_*.txt"))
    code, _ = _run(["plot", *snaps, "--telemetry", run / "telemetry.txt", "--out", tmp_path / "plots"], capsys)
    assert code == 0
    for name in ("interfaces.svg", "dt.svg"):
        assert (tmp_path / "plots" / name).read_text().lstrip().startswith("<?xml")


def test_plot_empty_is_usage_error(tmp_path, capsys):
    assert _run(["plot", "--out", tmp_path / "p"], capsys)[0] == cli.EXIT_CONFIG


def test_turnover_run_and_min_slope_plot(turn_dir, tmp_path, capsys):
    run = tmp_path / "turnrun"
    code, _ = _run(["simulate", f"file:{turn_dir / 'curve.txt'}", "--out", run, "--set", "problem=contour",
                    "--set", "t_end=5e-5", "--set", "snapshot_times=[0, 1e-5, 5e-5]",
                    "--set", "quadrature.method=grid", "--set", "controller.dt_init=1e-6"], capsys)
    assert code == 0
    code, _ = _run(["plot", *sorted(run.glob("snapshot_*.txt")), "--out", tmp_path / "pl"], capsys)
    assert code == 0
    rows = np.loadtxt(tmp_path / "pl" / "min_slope.txt")
    assert abs(rows[0, 1]) < 1e-12 and np.all(rows[1:, 1] < 0)
    # with stop_on_turnover the run ends with its own exit code 0 and reason
    run2 = tmp_path / "stop"
    code, cap = _run(["simulate", f"file:{turn_dir / 'curve.txt'}", "--out", run2, "--set", "problem=contour",
                      "--set", "stop_on_turnover=true", "--set", "t_end=5e-5", "--set", "snapshot_times=[0, 5e-5]",
                      "--set", "quadrature.method=grid", "--set", "controller.dt_init=1e-6"], capsys)
    assert code == 0 and "turnover_detected" in cap.out


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
