import json

import pytest

from uwbagsim.cli import main

from published_tables import PUBLISHED


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _dir_bytes(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


GEN_ARGS = [
    "generate",
    "--scenario", "hovering-open",
    "--rx", "RX1",
    "--orient", "VV",
    "--x", "15",
    "--h", "10",
    "--seed", "7",
]


def test_tables_json_contract(tmp_path, capsys):
    out = tmp_path / "tables.json"
    code, stdout, _ = run(["tables", "--out", str(out)], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    for scenario_key, cells in PUBLISHED.items():
        for (rx, orient, x), values in cells.items():
            cell = doc[scenario_key][rx][orient][f"{x:g}"]
            assert cell["n_clusters_mean"] == values[0]
            assert cell["cluster_rate_per_ns"] == values[1]
            assert cell["cluster_decay"] == values[2]
            assert cell["ray_rate_per_ns"] == values[3]
            assert cell["ray_decay"] == values[4]


def test_tables_to_stdout(capsys):
    code, stdout, _ = run(["tables"], capsys)
    assert code == 0
    assert json.loads(stdout)["hovering-open"]["RX1"]["VV"]["15"]["ray_decay"] == 8.7


def test_generate_writes_files_and_manifest(tmp_path, capsys):
    out = tmp_path / "run"
    code, stdout, _ = run(GEN_ARGS + ["--n", "3", "--out", str(out)], capsys)
    assert code == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == [
        "manifest.json",
        "realization_00000.csv",
        "realization_00001.csv",
        "realization_00002.csv",
    ]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "generate"
    assert manifest["config"]["seed"] == 7
    assert manifest["config"]["scenario"] == "hovering-open"
    assert manifest["files"] == names[1:]


def test_generate_reruns_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        code, _, _ = run(GEN_ARGS + ["--n", "4", "--out", str(out)], capsys)
        assert code == 0
    bytes_a = _dir_bytes(a)
    bytes_b = _dir_bytes(b)
    # manifests differ only in out_dir; realization files must match exactly
    for name in bytes_a:
        if name.endswith(".csv"):
            assert bytes_a[name] == bytes_b[name]


def test_generate_output_path_collision_is_io_error(tmp_path, capsys):
    blocker = tmp_path / "blocked"
    blocker.write_text("not a directory")
    code, _, err = run(GEN_ARGS + ["--n", "1", "--out", str(blocker)], capsys)
    assert code == 3
    assert "error:" in err


def test_generate_untabulated_distance_is_config_error(tmp_path, capsys):
    out = tmp_path / "run"
    code, _, err = run(
        ["generate", "--scenario", "hovering-open", "--rx", "RX1", "--orient", "VV",
         "--x", "20", "--h", "10", "--seed", "1", "--out", str(out)],
        capsys,
    )
    assert code == 2
    assert "15" in err and "30" in err


def test_generate_free_geometry_with_params_file(tmp_path, capsys):
    params = {
        "n_clusters_mean": 2.0,
        "cluster_rate_per_ns": 0.02,
        "cluster_decay": 0.2,
        "ray_rate_per_ns": 0.1,
        "ray_decay": 1.5,
    }
    pfile = tmp_path / "params.json"
    pfile.write_text(json.dumps(params))
    out = tmp_path / "run"
    code, _, _ = run(
        ["generate", "--scenario", "hovering-open", "--rx", "RX1", "--orient", "VV",
         "--x", "20", "--h", "10", "--seed", "1", "--n", "2",
         "--params-file", str(pfile), "--out", str(out)],
        capsys,
    )
    assert code == 0
    assert (out / "realization_00001.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["params"] == params  # resolved, not a path
    pfile.unlink()
    again = tmp_path / "again"
    code, _, _ = run(
        ["generate", "--from-manifest", str(out / "manifest.json"), "--out", str(again)],
        capsys,
    )
    assert code == 0
    assert (again / "realization_00001.csv").read_bytes() == (
        out / "realization_00001.csv"
    ).read_bytes()


def test_generate_from_manifest_reproduces(tmp_path, capsys):
    first = tmp_path / "first"
    code, _, _ = run(GEN_ARGS + ["--n", "3", "--out", str(first)], capsys)
    assert code == 0
    second = tmp_path / "second"
    code, _, _ = run(
        ["generate", "--from-manifest", str(first / "manifest.json"), "--out", str(second)],
        capsys,
    )
    assert code == 0
    for name, blob in _dir_bytes(first).items():
        if name.endswith(".csv"):
            assert _dir_bytes(second)[name] == blob


def test_generate_config_file_precedence(tmp_path, capsys):
    config = {
        "scenario": "hovering-foliage",
        "receiver": "RX1",
        "orientation": "VV",
        "x_m": 15,
        "h_m": 10,
        "seed": 3,
        "n_realizations": 2,
    }
    cfile = tmp_path / "config.json"
    cfile.write_text(json.dumps(config))
    out = tmp_path / "run"
    code, _, _ = run(
        ["generate", "--config", str(cfile), "--n", "3", "--out", str(out)], capsys
    )
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["n_realizations"] == 3  # flag beats config file
    assert manifest["config"]["scenario"] == "hovering-foliage"
    assert len(manifest["files"]) == 3


def test_generate_unknown_config_field_rejected(tmp_path, capsys):
    cfile = tmp_path / "config.json"
    cfile.write_text(json.dumps({"scenariooo": "hovering-open"}))
    code, _, err = run(["generate", "--config", str(cfile)], capsys)
    assert code == 2
    assert "scenariooo" in err


def test_generate_env_seed(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("CHANSIM_DEFAULT_SEED", "99")
    out = tmp_path / "run"
    args = [a for a in GEN_ARGS if a not in ("--seed", "7")]
    code, _, _ = run(args + ["--n", "1", "--out", str(out)], capsys)
    assert code == 0
    assert json.loads((out / "manifest.json").read_text())["config"]["seed"] == 99


def test_generate_auto_seed_announced(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("CHANSIM_DEFAULT_SEED", raising=False)
    out = tmp_path / "run"
    args = [a for a in GEN_ARGS if a not in ("--seed", "7")]
    code, _, err = run(args + ["--n", "1", "--out", str(out)], capsys)
    assert code == 0
    assert "seed = " in err
    announced = int(err.split("seed = ")[1].split()[0])
    assert json.loads((out / "manifest.json").read_text())["config"]["seed"] == announced


def test_generate_jobs_parallel_matches_serial(tmp_path, capsys):
    serial, parallel = tmp_path / "serial", tmp_path / "parallel"
    code, _, _ = run(GEN_ARGS + ["--n", "6", "--out", str(serial)], capsys)
    assert code == 0
    code, _, _ = run(GEN_ARGS + ["--n", "6", "--jobs", "3", "--out", str(parallel)], capsys)
    assert code == 0
    for name, blob in _dir_bytes(serial).items():
        if name.endswith(".csv"):
            assert _dir_bytes(parallel)[name] == blob


def test_generate_waveforms_flag(tmp_path, capsys):
    out = tmp_path / "run"
    code, _, _ = run(GEN_ARGS + ["--n", "1", "--waveforms", "--out", str(out)], capsys)
    assert code == 0
    assert (out / "waveform_00000.csv").exists()


def test_analyze_round_trip(tmp_path, capsys):
    out = tmp_path / "run"
    code, _, _ = run(
        ["generate", "--scenario", "hovering-foliage", "--rx", "RX1", "--orient", "VV",
         "--x", "15", "--h", "10", "--seed", "5", "--n", "40",
         "--dynamic-range-db", "inf", "--out", str(out)],
        capsys,
    )
    assert code == 0
    report_path = tmp_path / "report.json"
    code, stdout, _ = run(
        ["analyze", str(out / "realization_*.csv"), "--out", str(report_path)], capsys
    )
    assert code == 0
    report = json.loads(report_path.read_text())
    assert set(report) == {"pdp", "clusters", "significant_mpc_avg", "estimates", "config"}
    assert report["estimates"]["n_clusters_hat"] > 1.0
    assert "cluster rate" in stdout


def test_analyze_empty_glob(tmp_path, capsys):
    code, _, err = run(["analyze", str(tmp_path / "nothing_*.csv")], capsys)
    assert code == 2
    assert "no input files" in err


def test_analyze_malformed_file(tmp_path, capsys):
    bad = tmp_path / "broken.csv"
    bad.write_text("delay_ns,amplitude,phase_rad,cluster_index,ray_index\n0.0,1.0,0.0,0,0\n1.0,oops,0.0,0,1\n")
    code, _, err = run(["analyze", str(bad), "--out", str(tmp_path / "r.json")], capsys)
    assert code == 4
    assert "broken.csv" in err and ":3:" in err


def test_analyze_is_deterministic(tmp_path, capsys):
    out = tmp_path / "run"
    run(GEN_ARGS + ["--n", "10", "--out", str(out)], capsys)
    r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
    for rp in (r1, r2):
        code, _, _ = run(["analyze", str(out / "realization_*.csv"), "--out", str(rp)], capsys)
        assert code == 0
    assert r1.read_bytes() == r2.read_bytes()


def test_pathloss_default_sweep(capsys):
    code, stdout, _ = run(["pathloss"], capsys)
    assert code == 0
    lines = stdout.strip().splitlines()
    assert lines[0] == "x_m,h_m,theta_deg,d_m,orientation,path_loss_db,margin_db"
    assert len(lines) == 1 + 6  # 3 heights x 2 distances, one orientation


def test_pathloss_single_point_geometry(capsys):
    code, stdout, _ = run(["pathloss", "--x", "30", "--h", "10"], capsys)
    assert code == 0
    row = stdout.strip().splitlines()[1].split(",")
    assert row[2] == "71.565"
    assert float(row[3]) == pytest.approx(31.6228, abs=1e-3)
    loss = float(row[5])
    assert float(row[6]) == pytest.approx(-14.5 - loss + 104.0, abs=1e-3)


def test_pathloss_both_orientations(capsys):
    code, stdout, _ = run(["pathloss", "--orient", "VV,VH"], capsys)
    assert code == 0
    assert len(stdout.strip().splitlines()) == 1 + 12


def test_pathloss_rejects_zero_height(capsys):
    code, _, err = run(["pathloss", "--h", "0,10"], capsys)
    assert code == 2
    assert "height" in err


def test_pathloss_crossover_visible_in_sweep(capsys):
    code, stdout, _ = run(["pathloss", "--x", "15,30", "--h", "10,30"], capsys)
    assert code == 0
    rows = [line.split(",") for line in stdout.strip().splitlines()[1:]]
    loss = {(r[0], r[1]): float(r[5]) for r in rows}
    assert loss[("15", "10")] < loss[("30", "10")]
    assert loss[("15", "30")] > loss[("30", "30")]


def test_roundtrip_single_cell_passes(tmp_path, capsys):
    verdict_path = tmp_path / "verdict.json"
    code, stdout, _ = run(
        ["roundtrip", "--scenario", "hovering-open", "--rx", "RX1", "--orient", "VV",
         "--x", "15", "--n", "300", "--seed", "21", "--out", str(verdict_path)],
        capsys,
    )
    assert code == 0
    assert "PASS" in stdout
    verdict = json.loads(verdict_path.read_text())
    assert verdict["all_pass"] is True
    comparisons = verdict["results"][0]["comparisons"]
    assert set(comparisons) == {
        "cluster_rate_per_ns", "ray_rate_per_ns", "cluster_decay", "ray_decay"
    }


def test_roundtrip_small_sample_warns(tmp_path, capsys):
    code, _, err = run(
        ["roundtrip", "--scenario", "hovering-open", "--rx", "RX1", "--orient", "VV",
         "--x", "15", "--n", "3", "--seed", "2", "--out", str(tmp_path / "v.json")],
        capsys,
    )
    assert "sample size below recommendation" in err
    verdict = json.loads((tmp_path / "v.json").read_text())
    assert verdict["warnings"]
    assert code in (0, 1)


def test_roundtrip_requires_coordinates(capsys):
    code, _, err = run(["roundtrip", "--n", "10", "--seed", "1"], capsys)
    assert code == 2
    assert "--all" in err


def test_roundtrip_all_cells_batch(tmp_path, capsys):
    verdict_path = tmp_path / "verdict.json"
    code, stdout, _ = run(
        ["roundtrip", "--all", "--n", "60", "--seed", "4", "--out", str(verdict_path)],
        capsys,
    )
    assert code in (0, 1)
    verdict = json.loads(verdict_path.read_text())
    assert len(verdict["results"]) == 24
    assert stdout.strip().splitlines()[-1].endswith("/24 cells pass")


def test_roundtrip_verdict_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        code, _, _ = run(
            ["roundtrip", "--scenario", "moving-circle", "--rx", "RX2", "--orient", "VH",
             "--x", "30", "--n", "150", "--seed", "8", "--out", str(path)],
            capsys,
        )
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
