"""CLI: catalog, config handling, exit codes, determinism."""

import io
import os

import pytest
import yaml

from geolp import cli

SMALL_CONFIG = {
    "seed": 3,
    "substrate": {"kind": "torus", "n": 12, "l_max": 8,
                  "spec": {"recipe": "conformal", "amplitude": 0.1, "modes": 1}},
    "foliation": {"r0": 20.0, "n_s": 12, "eps": 0.02, "seed": 11, "spec": "flat"},
    "suites": ["geometry", "norms", "foliation"],
    "geometry": {"resolutions": [12, 16, 24]},
    "samples": {"count": 2},
}


def _write(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


class TestCatalog:
    def test_size_and_fields(self):
        assert len(cli.CHECKS) >= 30
        modules = {"surface_geometry", "heat_semigroup", "lp_projections", "norms_besov",
                   "null_foliation", "flat_lp", "estimate_harness", "cli_runner"}
        for info in cli.CHECKS:
            assert info.anchor.strip()
            assert info.module in modules

    def test_list_prints_every_entry(self, capsys):
        cli.list_checks()
        out = capsys.readouterr().out
        assert len(out.strip().splitlines()) == len(cli.CHECKS)

    def test_main_list(self):
        assert cli.main(["list"]) == 0


class TestRun:
    def test_small_run_passes(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GEOLP_OUT", str(tmp_path / "out"))
        code = cli.run(_write(tmp_path, SMALL_CONFIG))
        assert code == 0
        for suite in SMALL_CONFIG["suites"]:
            assert (tmp_path / "out" / f"{suite}.csv").exists()
        assert (tmp_path / "out" / "summary.json").exists()

    def test_invalid_check_id(self, tmp_path):
        bad = dict(SMALL_CONFIG, suites=["geometry", "not_a_suite"])
        assert cli.run(_write(tmp_path, bad)) == 3

    def test_unknown_key(self, tmp_path):
        bad = dict(SMALL_CONFIG)
        bad["surprise"] = 1
        assert cli.run(_write(tmp_path, bad)) == 3

    def test_unparseable(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("{:::")
        assert cli.run(str(path)) == 3

    def test_descending_resolutions_rejected(self, tmp_path):
        bad = dict(SMALL_CONFIG, resolutions=[[24, 32], [16, 24]])
        assert cli.run(_write(tmp_path, bad)) == 3

    def test_rerun_byte_identical(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GEOLP_OUT", str(tmp_path / "out"))
        cfg = _write(tmp_path, SMALL_CONFIG)
        assert cli.run(cfg) == 0
        bodies = {s: (tmp_path / "out" / f"{s}.csv").read_bytes() for s in SMALL_CONFIG["suites"]}
        assert cli.run(cfg) == 0
        for s, before in bodies.items():
            assert (tmp_path / "out" / f"{s}.csv").read_bytes() == before

    def test_rows_carry_config_hash(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GEOLP_OUT", str(tmp_path / "out"))
        cfg = _write(tmp_path, SMALL_CONFIG)
        cli.run(cfg)
        text = (tmp_path / "out" / "geometry.csv").read_text().splitlines()
        header = text[0].split(",")
        assert header[-1] == "config_hash"
        hashes = {line.split(",")[-1] for line in text[1:]}
        assert len(hashes) == 1 and all(len(h) == 12 for h in hashes)
