import json
import math
from pathlib import Path

import pytest

from selfsim.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(tmp_path, command, config, *extra):
    out = tmp_path / "out"
    code = main([command, "--config", str(config), "--out", str(out), *extra])
    return code, out


def write_cfg(tmp_path, payload, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return p


@pytest.fixture
def binary_cfg(tmp_path):
    return write_cfg(tmp_path, {
        "system": {"dim": 1,
                   "maps": [{"lambda": 0.5, "t": 0.0}, {"lambda": 0.5, "t": 0.5}],
                   "p": [0.5, 0.5]},
        "seed": 1,
        "types": {"N": 4},
        "delta": {"n_max": 6},
        "disintegrate": {"N": 2, "k": 2, "mode": "exact"},
        "fourier": {"N": 2, "omega_length": 12},
        "density": {"n": 8, "bins": [16, 64]},
    })


class TestSimdim:
    def test_carpet_value_printed(self, tmp_path, capsys):
        code, _ = run(tmp_path, "simdim", CONFIGS / "carpet.json")
        assert code == 0
        out = capsys.readouterr().out
        assert f"{math.log(8) / math.log(3)!r}" in out

    def test_output_has_provenance_header(self, tmp_path, binary_cfg):
        code, out = run(tmp_path, "simdim", binary_cfg)
        assert code == 0
        text = (out / "simdim.csv").read_text()
        head = text.splitlines()
        assert head[0].startswith("# selfsim ")
        assert head[1].startswith("# config-sha256: ")
        assert head[2].startswith("# seed: ")


class TestTypes:
    def test_three_map_N4_has_15_rows(self, tmp_path):
        cfg = write_cfg(tmp_path, {
            "system": {"dim": 1, "maps": [
                {"lambda": 0.3, "t": 0.0}, {"lambda": 0.3, "t": 0.4},
                {"lambda": 0.3, "t": 0.8}], "p": [1 / 3, 1 / 3, 1 / 3]},
            "types": {"N": 4}})
        code, out = run(tmp_path, "types", cfg)
        assert code == 0
        import csv

        lines = [l for l in (out / "types.csv").read_text().splitlines()
                 if l and not l.startswith("#")]
        rows = list(csv.DictReader(lines))
        assert len(rows) == 15
        qsum = sum(float(r["q"]) for r in rows)
        assert qsum == pytest.approx(1.0, abs=1e-12)


class TestErrors:
    def test_missing_p_exits_2_with_path(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {
            "system": {"dim": 1, "maps": [{"lambda": 0.5, "t": 0.0}]}})
        code, _ = run(tmp_path, "simdim", cfg)
        assert code == 2
        assert "system.p" in capsys.readouterr().err

    def test_bad_expression_names_map(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {
            "system": {"dim": 1, "maps": [
                {"lambda": 0.5, "t": "cos("}, {"lambda": 0.5, "t": 0.5}],
                "p": [0.5, 0.5]}, "domain": [0, 1]})
        code, _ = run(tmp_path, "simdim", cfg)
        assert code == 2
        assert "system.maps[0].t" in capsys.readouterr().err

    def test_cap_exceeded_exits_3(self, tmp_path, binary_cfg, capsys):
        cfg = json.loads(Path(binary_cfg).read_text())
        cfg["density"] = {"n": 40, "bins": [16]}
        p = write_cfg(tmp_path, cfg, "big.json")
        code, _ = run(tmp_path, "density", p)
        assert code == 3

    def test_missing_lambda(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {
            "system": {"dim": 1, "maps": [{"t": 0.0}], "p": [1.0]}})
        code, _ = run(tmp_path, "simdim", cfg)
        assert code == 2
        assert "maps[0].lambda" in capsys.readouterr().err


class TestDeterminism:
    def test_fourier_byte_identical(self, tmp_path, binary_cfg):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        assert main(["fourier", "--config", str(binary_cfg),
                     "--out", str(out1)]) == 0
        assert main(["fourier", "--config", str(binary_cfg),
                     "--out", str(out2)]) == 0
        assert (out1 / "fourier.csv").read_bytes() == (out2 / "fourier.csv").read_bytes()

    def test_seed_flag_changes_output(self, tmp_path, binary_cfg):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        main(["fourier", "--config", str(binary_cfg), "--out", str(out1)])
        main(["fourier", "--config", str(binary_cfg), "--out", str(out2),
              "--seed", "777"])
        assert ((out1 / "fourier.csv").read_bytes()
                != (out2 / "fourier.csv").read_bytes())


class TestCommands:
    def test_delta_reports_binary_rate(self, tmp_path, binary_cfg, capsys):
        code, out = run(tmp_path, "delta", binary_cfg)
        assert code == 0
        assert f"{-math.log(2)!r}" in capsys.readouterr().out

    def test_disintegrate_exact_tiny_error(self, tmp_path, binary_cfg):
        code, out = run(tmp_path, "disintegrate", binary_cfg)
        assert code == 0
        body = "\n".join(l for l in (out / "disintegrate.json").read_text()
                         .splitlines() if not l.startswith("#"))
        assert json.loads(body)["max_error"] < 1e-12

    def test_json_format(self, tmp_path, binary_cfg):
        code, out = run(tmp_path, "types", binary_cfg, "--format", "json")
        assert code == 0
        assert (out / "types.json").exists()

    def test_plot_scripts_emitted(self, tmp_path, binary_cfg):
        code, out = run(tmp_path, "delta", binary_cfg, "--plot")
        assert code == 0
        script = (out / "delta_plot.py").read_text()
        assert "matplotlib" in script

    def test_transversality_on_family(self, tmp_path):
        cfg = write_cfg(tmp_path, {
            "system": {"dim": 1, "maps": [
                {"lambda": 0.4, "t": "cos(u)"},
                {"lambda": 0.4, "t": "cos(u) + 0.5 + 0.1*sin(u)"}],
                "p": [0.5, 0.5]},
            "domain": [0.1, 1.2],
            "transversality": {"n": 1, "K": 1, "c": 0.3, "grid_step": 0.001}})
        code, out = run(tmp_path, "transversality", cfg)
        assert code == 0
        body = "\n".join(l for l in (out / "transversality.json").read_text()
                         .splitlines() if not l.startswith("#"))
        cert = json.loads(body)
        assert cert["verdict"] == "certified"
        assert cert["c"] == 0.3

    def test_scan_angles_carpet(self, tmp_path):
        cfg = write_cfg(tmp_path, {
            "system": {"preset": "carpet"},
            "seed": 4,
            "scan_angles": {"angles": [0.0, 0.9], "N": 2, "s": 2, "n_max": 3,
                            "ensemble": 2, "points": 1200}})
        code, out = run(tmp_path, "scan-angles", cfg)
        assert code == 0
        lines = (out / "scan_angles.csv").read_text().splitlines()
        assert any(l.startswith("# config:") for l in lines)
        data = [l for l in lines if l and not l.startswith("#")][1:]
        assert len(data) == 2
        assert data[0].split(",")[3] == "true"  # overlap at angle 0

    def test_ek_outputs(self, tmp_path, binary_cfg):
        cfg = json.loads(Path(binary_cfg).read_text())
        cfg["ek"] = {"N": 1, "M_values": [4], "delta_values": [0.1],
                     "rho_values": [0.2], "omega_length": 40, "nz": 128,
                     "nnu": 8}
        p = write_cfg(tmp_path, cfg, "ek.json")
        code, out = run(tmp_path, "ek", p)
        assert code == 0
        body = "\n".join(l for l in (out / "ek_summary.json").read_text()
                         .splitlines() if not l.startswith("#"))
        assert math.isfinite(json.loads(body)["fitted_H"])
