import json
from importlib import resources

import jsonschema
import pytest

from polypin.cli import RunConfig, build_parser, main


def schema(name):
    return json.loads(resources.files("polypin").joinpath(f"schemas/{name}.schema.json").read_text())


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_phase(capsys):
    code, out, _ = run(capsys, "phase", "--a", "0.4", "--b", "0.1")
    assert code == 0
    data = json.loads(out)
    assert data["label"] == "TH1_LOCALIZED"
    jsonschema.validate(data, schema("phase"))


def test_phase_bc1_with_kappa(capsys):
    _, out, _ = run(capsys, "phase", "--a", "0.3", "--b", "0.3", "--beta", "1", "--n", "100000")
    data = json.loads(out)
    assert data["label"] == "BC1_DIAGONAL"
    assert abs(data["constant"] - 0.99) < 5e-3
    jsonschema.validate(data, schema("phase"))


def test_phase_exact_border(capsys):
    _, out, _ = run(capsys, "phase", "--a", "0.45", "--b", "0.35")
    assert json.loads(out)["label"] == "BC3_CRITICAL"
    _, out, _ = run(capsys, "phase", "--a", "0.6", "--b", "0.7")
    assert json.loads(out)["label"] == "R3_SRW"


def test_parameter_error_exit_code(capsys):
    code, _, err = run(capsys, "free-energy", "--t", "5", "--delta", "0.1")
    assert code == 2 and "even" in err
    code, _, err = run(capsys, "sample", "--a", "0.4", "--b", "0.1", "--n", "4000000",
                       "--samples", "1")
    assert code == 2 and "estimated" in err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["phase", "--a", "x", "--b", "0.1"])
    assert exc.value.code == 2


def test_free_energy_schema(capsys):
    _, out, _ = run(capsys, "free-energy", "--t", "20", "--delta", "0.2")
    jsonschema.validate(json.loads(out), schema("free_energy"))


def test_renewal_dump(tmp_path):
    out = tmp_path / "u.csv"
    assert main(["renewal", "--t", "20", "--delta", "0.2", "--dump", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n,f,u"
    assert lines[1] == "0,0.0,1.0"


def test_renewal_summary_schema(capsys):
    _, out, _ = run(capsys, "renewal", "--t", "20", "--delta", "0.2")
    data = json.loads(out)
    jsonschema.validate(data, schema("renewal"))
    assert data["normalization_defect"] < 1e-9


def test_sample_is_byte_identical(tmp_path):
    args = ["sample", "--a", "0.45", "--b", "0.35", "--beta", "1", "--n", "20000",
            "--samples", "500", "--seed", "7"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--threads", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "sample_id,S_N,tau_last,L,m,visited_other"


def test_sample_json_schema(capsys):
    _, out, _ = run(capsys, "sample", "--a", "0.3", "--b", "0.3", "--n", "200", "--samples", "5",
                    "--format", "json")
    jsonschema.validate(json.loads(out), schema("sample"))


def test_experiment_schema_and_csv(capsys, tmp_path):
    _, out, _ = run(capsys, "experiment", "--a", "0.3", "--b", "0.3", "--n", "2000",
                    "--samples", "200")
    jsonschema.validate(json.loads(out), schema("experiment"))
    csv = tmp_path / "e.csv"
    main(["experiment", "--a", "0.3", "--b", "0.3", "--n", "2000", "--samples", "200",
          "--format", "csv", "--out", str(csv)])
    assert csv.read_text().splitlines()[0] == "name,statistic,threshold,verdict"


def test_verify_bounds(capsys):
    _, out, _ = run(capsys, "verify-bounds", "--t", "8,16", "--k-max", "5")
    jsonschema.validate(json.loads(out), schema("verify_bounds"))
    _, out, _ = run(capsys, "verify-bounds", "--t", "8,16", "--k-max", "5", "--format", "csv")
    assert out.splitlines()[0].startswith("T,")


def test_config_round_trip_and_reuse(tmp_path, capsys):
    args = build_parser().parse_args(["phase", "--a", "0.45", "--b", "0.35", "--n", "1000"])
    cfg = RunConfig(args.command, {k: v for k, v in vars(args).items()
                                   if k not in ("command", "config")})
    text = cfg.to_json()
    assert RunConfig.from_json(text).to_json() == text
    path = tmp_path / "cfg.json"
    path.write_text(text)
    _, out, _ = run(capsys, "phase", "--config", str(path))
    assert json.loads(out)["label"] == "BC3_CRITICAL"


def test_seed_defaults_to_zero():
    args = build_parser().parse_args(["sample", "--a", "0.3", "--b", "0.3", "--n", "10",
                                      "--samples", "1"])
    assert args.seed == 0


def test_threads_env(monkeypatch):
    from polypin.polymer import resolve_threads

    monkeypatch.setenv("POLYPIN_THREADS", "2")
    assert resolve_threads(None) == min(2, resolve_threads(64))
    monkeypatch.delenv("POLYPIN_THREADS")
    assert resolve_threads(None) == 1
