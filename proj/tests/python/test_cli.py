import json
import subprocess

import gconv

SWEEP = """
[experiment]
kind = sweep
seed = 99

[family]
name = euclidean:1

[grid]
n = 257

[operator]
weight = {weight}

[sweep]
h_list = 4, 8, 16, 32

[thresholds]
distance = {threshold}
flux = {threshold}
"""


def run(cli, kind, config, out, *extra):
    return subprocess.run([cli, kind, "--config", str(config), "--out", str(out), *extra],
                          capture_output=True, text=True)


def test_constant_sweep_exit_0(cli, tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(SWEEP.format(weight="constant:2", threshold=0.01))
    res = run(cli, "sweep", cfg, tmp_path / "out")
    assert res.returncode == 0, res.stderr
    rows = (tmp_path / "out" / "report.csv").read_text().splitlines()
    assert rows[0] == "h,distance,flux_residual,divcurl_gap"
    assert all(float(r.split(",")[1]) == 0.0 for r in rows[1:])


def test_zero_thresholds_exit_2(cli, tmp_path):
    cfg = tmp_path / "z.ini"
    cfg.write_text(SWEEP.format(weight="sine:2,1", threshold=0))
    assert run(cli, "sweep", cfg, tmp_path / "out").returncode == 2


def test_unwritable_output_exit_1(cli, tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(SWEEP.format(weight="constant:1", threshold=0.01))
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run(cli, "sweep", cfg, blocker / "sub").returncode == 1


def test_invalid_config_lists_fields(cli, tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[experiment]\nkind = sweep\n[operator]\nkind = magic\n[sweep]\nh_list = 4\n")
    res = run(cli, "sweep", cfg, tmp_path / "out")
    assert res.returncode == 1
    assert "sweep.h_list: h_list needs >= 3 entries" in res.stderr
    assert "operator.kind" in res.stderr


def test_manifest_inventory(cli, tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(SWEEP.format(weight="sine:2,1", threshold=0.01))
    out = tmp_path / "out"
    assert run(cli, "sweep", cfg, out, "--workers", "3").returncode == 0
    manifest = json.loads((out / "manifest.json").read_text())
    files = {f["path"] for f in manifest["files"]}
    emitted = {str(p.relative_to(out)) for p in out.rglob("*") if p.is_file()} - {"manifest.json"}
    assert files == emitted
    assert manifest["workers"] == 3 and manifest["seed"] == "99"


def test_shipped_configs_parse(configs, tmp_path):
    for path in sorted(configs.glob("*.ini")):
        text = path.read_text()
        if "kind = verify-class" in text or "kind = solve-elliptic" in text:
            res = gconv.run_config(text, str(tmp_path / path.stem))
            assert res["exit_code"] in (0, 2), (path, res["error"])


def test_run_config_reproducible(tmp_path):
    text = SWEEP.format(weight="two_phase:1,4", threshold=0.01)
    a = gconv.run_config(text, str(tmp_path / "a"), 4)
    b = gconv.run_config(text, str(tmp_path / "b"), 1)
    assert a["exit_code"] == b["exit_code"] == 0
    assert (tmp_path / "a" / "report.csv").read_bytes() == (tmp_path / "b" / "report.csv").read_bytes()
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
