import json

import pytest

from climbing_cli import main


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(
        json.dumps({"simulation": {"replications": 300, "show_progress": False}}), encoding="utf-8"
    )
    return str(path)


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_score_outputs_standings(capsys, config_file, data_dir):
    code, out, _ = _run(
        capsys, "--config", config_file, "score", str(data_dir / "tokyo2020_women_final_reconstructed.csv"),
        "--round", "final", "--compare",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["manifest"]["command"] == "score"
    first = payload["standings"][0]
    assert first["id"] == "TF01"
    assert first["score"] == 8
    assert first["placement"] == 1
    assert "placement_sum" in first and "placement_sqrt-sum" in first


def test_correlate_single_pair(capsys, config_file, data_dir):
    code, out, _ = _run(
        capsys, "--config", config_file, "correlate",
        str(data_dir / "tokyo2020_women_qualification_reconstructed.csv"), "--x", "speed", "--bootstrap", "0",
    )
    assert code == 0
    (row,) = json.loads(out)["correlations"]
    assert row["T"] == 109
    assert row["exact"] is True
    assert row["p_value"] == pytest.approx(0.3859, abs=5e-4)
    assert row["ci_lower"] is None


def test_correlate_table_as_csv(capsys, config_file, data_dir):
    code, out, _ = _run(
        capsys, "--format", "csv", "--config", config_file, "correlate",
        str(data_dir / "tokyo2020_women_final_reconstructed.csv"), "--bootstrap", "1000",
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# manifest: ")
    assert lines[1].startswith("x,y,tau,T,p_value")
    assert len(lines) == 6


def test_simulate_is_deterministic(capsys, config_file):
    argv = ("--config", config_file, "--no-progress", "simulate", "--tau", "0.5", "--reps", "200", "--seed", "3")
    code, first, _ = _run(capsys, *argv)
    assert code == 0
    _, second, _ = _run(capsys, *argv)
    assert first == second
    payload = json.loads(first)
    assert {row["condition"] for row in payload["win_probabilities"]} >= {"won_speed", "won_any_discipline"}
    assert payload["advancement"][0]["cut"] == 3
    assert len(payload["score_by_placement"]) == 8


def test_sweep(capsys, config_file):
    code, out, _ = _run(capsys, "--config", config_file, "sweep", "--taus", "0,1", "--reps", "200")
    assert code == 0
    assert [row["tau"] for row in json.loads(out)["sweep"]] == [0.0, 1.0]


def test_audit(capsys, config_file, data_dir):
    code, out, _ = _run(capsys, "--config", config_file, "audit", str(data_dir / "yog2018_women_final_reconstructed.csv"))
    assert code == 0
    payload = json.loads(out)
    assert payload["summary"][0]["perfect_agreements"] == 3
    assert len(payload["exclusions"]) == 6
    assert any(row["first"] == "YF02" and row["second"] == "YF04" for row in payload["pair_changes"])


def test_pca(capsys, config_file, data_dir):
    code, out, _ = _run(
        capsys, "--config", config_file, "pca", str(data_dir / "tokyo2020_women_qualification_reconstructed.csv")
    )
    assert code == 0
    payload = json.loads(out)
    assert [row["component"] for row in payload["eigenvalues"]] == ["pc1", "pc2", "pc3"]
    assert len(payload["scores"]) == 20


def test_out_directory(tmp_path, capsys, config_file, data_dir):
    out_dir = tmp_path / "results"
    code, out, err = _run(
        capsys, "--config", config_file, "--out", str(out_dir), "score",
        str(data_dir / "yog2018_women_final_reconstructed.csv"),
    )
    assert code == 0
    assert out == ""
    assert "✅" in err
    assert (out_dir / "standings.json").exists()
    assert json.loads((out_dir / "manifest.json").read_text(encoding="utf-8"))["command"] == "score"


def test_data_errors_exit_2(tmp_path, capsys, config_file, data_dir):
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    assert _run(capsys, "--config", config_file, "score", str(empty))[0] == 2
    assert _run(capsys, "--config", config_file, "pca", str(data_dir / "tokyo2020_women_final_reconstructed.csv"))[0] == 2


def test_domain_errors_exit_3(capsys, config_file):
    assert _run(capsys, "--config", config_file, "simulate", "--tau", "1.5", "--reps", "10")[0] == 3
    assert _run(capsys, "--config", config_file, "simulate", "--round", "custom", "--tau", "0.5")[0] == 3


def test_usage_errors_exit_1(capsys, config_file):
    with pytest.raises(SystemExit) as info:
        main(["--config", config_file, "rank"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["simulate"])
    assert info.value.code == 1


def test_config_set(capsys, config_file):
    code, out, _ = _run(capsys, "--config", config_file, "config", "--set", "statistics.bootstrap_resamples=2000")
    assert code == 0
    assert "bootstrap_resamples: 2000" in out
    saved = json.loads(open(config_file, encoding="utf-8").read())
    assert saved["statistics"]["bootstrap_resamples"] == 2000


def test_config_set_errors(capsys, config_file):
    assert _run(capsys, "--config", config_file, "config", "--set", "statistics.bootstrap_resamples=10")[0] == 1
    assert _run(capsys, "--config", config_file, "config", "--set", "no-equals-sign")[0] == 1


def test_error_message_has_a_single_marker(capsys, config_file, data_dir):
    code, _, err = _run(capsys, "--config", config_file, "simulate", "--tau", "1.5", "--reps", "10")
    assert code == 3
    assert err.count("❌") == 1
    code, _, err = _run(capsys, "--config", config_file, "pca", str(data_dir / "tokyo2020_women_final_reconstructed.csv"))
    assert code == 2
    assert err.count("❌") == 1


def test_correlate_with_smoothed_fit(capsys, config_file, data_dir):
    code, out, _ = _run(
        capsys, "--config", config_file, "correlate",
        str(data_dir / "tokyo2020_women_qualification_reconstructed.csv"), "--bootstrap", "1000", "--smooth",
    )
    assert code == 0
    smooth = json.loads(out)["smooth"]
    assert len(smooth) == 60
    assert {row["x_column"] for row in smooth} == {"speed", "boulder", "lead"}
    assert all(row["lower"] <= row["upper"] for row in smooth)
