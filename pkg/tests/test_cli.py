import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pemkit import (
    GridSpec,
    PemClient,
    PemModel,
    TransitionMatrix,
    load_model,
    perfect_model,
    save_dataset,
    save_model,
    serve_in_thread,
    synthesize_dataset,
)
from pemkit import SyntheticDatasetConfig
from pemkit.cli import EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from pemkit.model import IDENTITY_EMISSION

GRID = GridSpec(sector_width_deg=90.0, ring_depth_m=10.0, max_radius_m=20.0)


def small_truth():
    n = GRID.n_conditions
    rng = np.random.default_rng(8)
    return PemModel(
        grid=GRID,
        metadata="truth",
        a01=rng.uniform(0.3, 0.7, n),
        a11=rng.uniform(0.6, 0.9, n),
        mu_r=np.full(n, 1.01),
        mu_theta=np.full(n, 0.005),
        sigma_r=np.full(n, 0.03),
        sigma_theta=np.full(n, 0.02),
        rho=np.full(n, 0.1),
    )


@pytest.fixture(scope="module")
def dataset_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "dataset.jsonl"
    cfg = SyntheticDatasetConfig(
        true_model=small_truth(), n_scenes=8, frames_per_scene=30,
        objects_per_scene=16, occlusion_levels=(0, 1), seed=21,
    )
    save_dataset(synthesize_dataset(cfg), path)
    return path


def snapshot(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_learn_writes_model_and_manifest(dataset_path, tmp_path):
    out = tmp_path / "model.json"
    code = main([
        "learn", "--dataset", str(dataset_path), "--out", str(out),
        "--sector-deg", "90", "--ring-depth-m", "10", "--max-radius-m", "20",
    ])
    assert code == EXIT_OK
    model = load_model(out)
    assert model.grid == GRID
    assert (tmp_path / "manifest.json").exists()
    assert out.with_suffix(".diagnostics.json").exists()
    diag = json.loads(out.with_suffix(".diagnostics.json").read_text())
    assert all(f["converged"] for f in diag["fields"].values())


def test_learn_is_byte_reproducible(dataset_path, tmp_path):
    out = tmp_path / "model.json"
    args = [
        "learn", "--dataset", str(dataset_path), "--out", str(out),
        "--sector-deg", "90", "--ring-depth-m", "10", "--max-radius-m", "20",
    ]
    assert main(args) == EXIT_OK
    first = snapshot(tmp_path)
    assert main(args) == EXIT_OK
    assert snapshot(tmp_path) == first


def test_learn_empty_dataset_is_data_error(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    code = main(["learn", "--dataset", str(empty), "--out", str(tmp_path / "m.json")])
    assert code == EXIT_DATA
    assert "no observations" in capsys.readouterr().err


def test_learn_single_scene_dataset_succeeds(tmp_path):
    path = tmp_path / "one.jsonl"
    cfg = SyntheticDatasetConfig(
        true_model=small_truth(), n_scenes=1, frames_per_scene=20,
        objects_per_scene=8, occlusion_levels=(0,), seed=3,
    )
    save_dataset(synthesize_dataset(cfg), path)
    code = main([
        "learn", "--dataset", str(path), "--out", str(tmp_path / "m.json"),
        "--sector-deg", "90", "--ring-depth-m", "10", "--max-radius-m", "20",
    ])
    assert code == EXIT_OK
    load_model(tmp_path / "m.json").validate()


def test_inspect_outputs(tmp_path):
    model_path = tmp_path / "m.json"
    model = PemModel.uniform(GRID, TransitionMatrix(0.25, 0.75), IDENTITY_EMISSION, "u")
    save_model(model, model_path)
    out = tmp_path / "inspect"
    assert main(["inspect", "--model", str(model_path), "--parameter", "a01", "--out-dir", str(out)]) == EXIT_OK
    # 4 CSVs for a01, 4 for pi1, one frontal cone
    for occ in range(4):
        a01 = (out / f"a01_vis{occ}.csv").read_text().splitlines()
        assert len(a01) == 1 + GRID.n_rings * GRID.n_sectors
        assert a01[1].split(",")[2] == "0.25"
        pi1 = (out / f"pi1_vis{occ}.csv").read_text().splitlines()
        assert pi1[1].split(",")[2] == "0.5"  # 0.25 / (1 + 0.25 - 0.75)
    cone = (out / "a01_frontal_cone.csv").read_text().splitlines()
    assert len(cone) == 1 + GRID.n_rings


def test_inspect_rejects_unknown_parameter(tmp_path, capsys):
    model_path = tmp_path / "m.json"
    save_model(perfect_model(GRID), model_path)
    code = main(["inspect", "--model", str(model_path), "--parameter", "bogus", "--out-dir", str(tmp_path / "o")])
    assert code == EXIT_USAGE
    assert "pi1" in capsys.readouterr().err  # lists the valid names


def test_simulate_and_report_roundtrip(tmp_path):
    model_path = tmp_path / "never.json"
    from pemkit import never_detect_model

    save_model(never_detect_model(), model_path)
    out = tmp_path / "sim"
    code = main([
        "simulate", "--scenario", "TC1", "--model", f"never={model_path}",
        "--baseline", "--runs", "2", "--baseline-runs", "2",
        "--seed", "0", "--out-dir", str(out),
    ])
    assert code == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert len(report["cells"]) == 2
    by_source = {c["source"]: c for c in report["cells"]}
    assert by_source["never"]["fraction_below_1m"] == 1.0
    assert by_source["groundtruth"]["fraction_below_1m"] == 0.0
    table = (out / "table.txt").read_text()
    assert "TC1 <1m" in table and "never" in table

    rep_out = tmp_path / "rep"
    assert main(["report", "--run-dir", str(out), "--out-dir", str(rep_out)]) == EXIT_OK
    assert (rep_out / "table.txt").read_text() == table
    runs_csv = (rep_out / "runs_never__TC1.csv").read_text().splitlines()
    assert len(runs_csv) == 3  # header + 2 runs


def test_simulate_is_byte_reproducible(tmp_path):
    model_path = tmp_path / "m.json"
    save_model(perfect_model(), model_path)
    out = tmp_path / "sim"
    args = [
        "simulate", "--scenario", "TC1", "--model", f"m={model_path}",
        "--runs", "1", "--seed", "7", "--save-logs", "--out-dir", str(out),
    ]
    assert main(args) == EXIT_OK
    first = snapshot(out)
    assert main(args) == EXIT_OK
    assert snapshot(out) == first
    assert any("runs/run_000007.jsonl" in k for k in first)


def test_simulate_usage_error(tmp_path, capsys):
    code = main(["simulate", "--scenario", "TC1", "--out-dir", str(tmp_path / "x")])
    assert code == EXIT_USAGE


def test_serve_subprocess_and_shutdown(tmp_path):
    model_path = tmp_path / "m.json"
    save_model(perfect_model(), model_path)
    proc = subprocess.Popen(
        [sys.executable, "-m", "pemkit.cli", "serve", "--model", f"m={model_path}", "--port", "0"],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    try:
        line = proc.stdout.readline()
        assert "serving" in line
        port = int(line.rsplit(":", 1)[1])
        with PemClient("127.0.0.1", port) as client:
            client.init("m", 1)
            assert client.frame(0, [{"id": 1, "x": 0.0, "y": 10.0, "occ": 3}])
            client.shutdown_server()
        assert proc.wait(timeout=10) == EXIT_OK
    finally:
        if proc.poll() is None:
            proc.kill()


def test_serve_bind_conflict_is_io_error(tmp_path, capsys):
    model_path = tmp_path / "m.json"
    save_model(perfect_model(), model_path)
    server, _t = serve_in_thread({"m": perfect_model()})
    try:
        host, port = server.address
        code = main(["serve", "--model", f"m={model_path}", "--host", host, "--port", str(port)])
        assert code == EXIT_IO
    finally:
        server.shutdown()
        server.close()


def test_config_file_provides_defaults(dataset_path, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "sector_deg": 90.0, "ring_depth_m": 10.0, "max_radius_m": 20.0,
        "dataset": str(dataset_path), "out": str(tmp_path / "m.json"),
    }))
    assert main(["--config", str(config), "learn"]) == EXIT_OK
    assert load_model(tmp_path / "m.json").grid == GRID


def test_simulate_accepts_scenario_config_file(tmp_path):
    model_path = tmp_path / "m.json"
    save_model(perfect_model(), model_path)
    scenario = tmp_path / "short_tc1.json"
    scenario.write_text(json.dumps({"id": "TC1", "pedestrian_y": 200.0, "road_length_m": 260.0, "duration_s": 40.0}))
    out = tmp_path / "sim"
    code = main([
        "simulate", "--scenario", str(scenario), "--model", f"m={model_path}",
        "--runs", "1", "--seed", "0", "--out-dir", str(out),
    ])
    assert code == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["cells"][0]["scenario"] == "TC1"
    assert report["cells"][0]["fraction_below_1m"] == 0.0


def test_report_flags_mixed_grids(tmp_path, capsys):
    from pemkit import GridSpec as GS, never_detect_model

    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out, grid_kw in ((out_a, {}), (out_b, dict(sector_width_deg=90.0, max_radius_m=20.0))):
        model_path = tmp_path / f"m_{out.name}.json"
        save_model(never_detect_model(GS(**grid_kw)), model_path)
        assert main([
            "simulate", "--scenario", "TC1", "--model", f"m{out.name}={model_path}",
            "--runs", "1", "--seed", "0", "--out-dir", str(out),
        ]) == EXIT_OK
    rep = tmp_path / "rep"
    assert main(["report", "--run-dir", str(out_a), "--run-dir", str(out_b), "--out-dir", str(rep)]) == EXIT_OK
    assert "different model grids" in capsys.readouterr().err
    doc = json.loads((rep / "report.json").read_text())
    assert doc["warnings"]
