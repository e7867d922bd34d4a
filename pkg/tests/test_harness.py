"""CLI, configuration, persistence and reproducibility."""

import json
import os

import numpy as np
import pytest

from escapelab.errors import ConfigurationError, GroupDataError, SchemaError
from escapelab.harness.cli import main
from escapelab.harness.config import ExperimentConfig
from escapelab.harness.groupfile import read_group_file, write_group_file
from escapelab.harness.records import RunRecord, load_record, persist_record
from escapelab.schottky import SchottkyGroup

CYL_CFG = """
[geometry]
kind = hyperbolic_ball

[group]
preset = cyclic
length = 2.0

[dynamics]
t_grid = 0:6:1
samples = 20000
tube_radius = 1.0
hull_depth = 2
window = 2,6

[measures]
points_per_dim = 32

[output]
directory = {out}
"""


@pytest.fixture
def cyl_cfg(tmp_path):
    path = tmp_path / "cyl.cfg"
    path.write_text(CYL_CFG.format(out=tmp_path / "runs"))
    return str(path)


class TestConfig:
    def test_parse_and_defaults(self, cyl_cfg):
        cfg = ExperimentConfig.from_file(cyl_cfg)
        assert cfg.geometry().is_hyperbolic
        assert cfg.group().rank == 1
        assert list(cfg.t_grid()) == [0, 1, 2, 3, 4, 5, 6]

    def test_missing_file(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_file("/nonexistent.cfg")

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"bogus": {"a": 1}})

    def test_unknown_geometry_rejected(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"geometry": {"kind": "spherical"}})

    def test_hash_changes_with_any_field(self, cyl_cfg):
        cfg = ExperimentConfig.from_file(cyl_cfg)
        base = cfg.config_hash()
        for section, key, value in [
            ("group", "length", "2.5"),
            ("dynamics", "samples", "30000"),
            ("geometry", "epsilon0", "0.9"),
        ]:
            mutated = {k: dict(v) for k, v in cfg.sections.items()}
            mutated.setdefault(section, {})[key] = value
            assert ExperimentConfig.from_dict(mutated).config_hash() != base

    def test_hash_recomputable_from_stored_config_text(self, cyl_cfg, tmp_path):
        import hashlib

        out = tmp_path / "rt"
        main(["delta", "--config", cyl_cfg, "--out", str(out)])
        rec = load_record(out / next(p for p in sorted(os.listdir(out)) if p.endswith(".json")))
        recomputed = hashlib.sha256(rec.config_text.encode("utf-8")).hexdigest()
        assert recomputed == rec.config_hash

    def test_hash_independent_of_key_order(self, cyl_cfg):
        cfg = ExperimentConfig.from_file(cyl_cfg)
        shuffled = {
            k: dict(reversed(list(v.items()))) for k, v in reversed(cfg.sections.items())
        }
        assert ExperimentConfig.from_dict(shuffled).config_hash() == cfg.config_hash()


class TestGroupFile:
    def test_round_trip(self, tmp_path):
        grp = SchottkyGroup.symmetric_pair(length=3.0)
        path = tmp_path / "pair.group"
        write_group_file(grp, path)
        back = read_group_file(path)
        for g1, g2 in zip(grp.generators, back.generators):
            assert np.allclose(g1.matrix, g2.matrix, atol=1e-14)
        for d1, d2 in zip(grp.disks, back.disks):
            assert abs(d1.center - d2.center) < 1e-12
            assert abs(d1.radius - d2.radius) < 1e-12
        assert back.pairing == grp.pairing

    def test_bad_disk_rejected(self, tmp_path):
        path = tmp_path / "bad.group"
        path.write_text(
            "[group]\nn = 1\ngenerators = 1\n"
            "[generator.1]\nmatrix = 2.718281828 0 0 0.367879441\n"
            "source_disk = 1\ntarget_disk = 2\n"
            "[disk.1]\ncenter = 0.5 0.0\nradius = 0.2\n"
            "[disk.2]\ncenter = -1.2 0.0\nradius = 0.66332495807108\n"
        )
        with pytest.raises(GroupDataError, match="orthogonal"):
            read_group_file(path)


class TestRecords:
    def test_save_load_round_trip(self, tmp_path):
        rec = RunRecord(
            run_id="demo-xyz-s1",
            command="delta",
            config_hash="abc",
            seed=1,
            started="2026-01-01T00:00:00Z",
            finished="2026-01-01T00:00:01Z",
            rows=[{"method": "series-bisection", "delta": 0.01}],
            warnings=["w"],
            summary={"delta": 0.01},
            config_text="[group]\n",
        )
        persist_record(rec, tmp_path, "both")
        back = load_record(tmp_path / "demo-xyz-s1.json")
        assert back == rec

    def test_schema_mismatch(self, tmp_path):
        path = tmp_path / "old.json"
        path.write_text(json.dumps({"schema": 0, "run_id": "x"}))
        with pytest.raises(SchemaError):
            load_record(path)


class TestCli:
    def test_unknown_subcommand_exits_64(self, capsys):
        assert main(["frobnicate", "--config", "x"]) == 64

    def test_validation_error_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[geometry]\nkind = spherical\n")
        assert main(["delta", "--config", str(bad)]) == 2

    def test_overlapping_disks_exit_2_with_diagnostic(self, tmp_path, capsys):
        group_path = tmp_path / "bad.group"
        grp = SchottkyGroup.cyclic(length=0.4)  # valid but narrow
        write_group_file(grp, group_path)
        # shrink the translation so the written disks overlap on re-read
        text = group_path.read_text().replace("radius", "radius_orig")
        lines = []
        for line in text.splitlines():
            if line.startswith("radius_orig"):
                lines.append("radius = 3.5")
            else:
                lines.append(line.replace("radius_orig", "radius"))
        group_path.write_text("\n".join(lines) + "\n")
        cfg = tmp_path / "g.cfg"
        cfg.write_text(f"[group]\npreset = file\nfile = {group_path}\n")
        code = main(["validate-group", "--config", str(cfg)])
        err = capsys.readouterr().err
        assert code == 2
        assert "disk" in err or "orthogonal" in err

    def test_escape_rate_byte_identical_csv(self, cyl_cfg, tmp_path, capsys):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["escape-rate", "--config", cyl_cfg, "--seed", "42", "--out", str(out1)]) == 0
        assert main(["escape-rate", "--config", cyl_cfg, "--seed", "42", "--out", str(out2)]) == 0
        csv1 = next(p for p in sorted(os.listdir(out1)) if p.endswith(".csv"))
        assert (out1 / csv1).read_bytes() == (out2 / csv1).read_bytes()

    def test_escape_rate_row_count_matches_grid(self, cyl_cfg, tmp_path, capsys):
        out = tmp_path / "rows"
        main(["escape-rate", "--config", cyl_cfg, "--seed", "1", "--out", str(out)])
        csv_path = next(p for p in sorted(os.listdir(out)) if p.endswith(".csv"))
        lines = (out / csv_path).read_text().strip().splitlines()
        assert len(lines) - 1 == 7  # header + one row per grid time

    def test_delta_subcommand_cyclic_small(self, cyl_cfg, tmp_path, capsys):
        out = tmp_path / "delta"
        assert main(["delta", "--config", cyl_cfg, "--out", str(out)]) == 0
        rec = load_record(out / next(p for p in sorted(os.listdir(out)) if p.endswith(".json")))
        assert all(row["delta"] <= 0.02 for row in rec.rows)

    def test_truncation_warning_reachable(self, tmp_path, capsys):
        cfg = tmp_path / "trunc.cfg"
        cfg.write_text(
            "[group]\npreset = symmetric-pair\nlength = 3.0\n"
            "[dynamics]\norbit_budget = 500\nmax_word_len = 12\n"
            f"[output]\ndirectory = {tmp_path / 'runs'}\n"
        )
        out = tmp_path / "runs"
        assert main(["delta", "--config", str(cfg), "--out", str(out)]) == 0
        rec = load_record(out / next(p for p in sorted(os.listdir(out)) if p.endswith(".json")))
        assert any("truncated" in w for w in rec.warnings)

    def test_nonconvergence_warning_reachable(self, tmp_path, capsys):
        cfg = tmp_path / "noconv.cfg"
        cfg.write_text(
            "[group]\npreset = cyclic\nlength = 2.0\n"
            "[measures]\npoints_per_dim = 24\nt_max = 2.0\npairs = 1\n"
            f"[output]\ndirectory = {tmp_path / 'runs'}\n"
        )
        out = tmp_path / "runs"
        assert main(["measures-compare", "--config", str(cfg), "--out", str(out)]) == 0
        rec = load_record(out / next(p for p in sorted(os.listdir(out)) if p.endswith(".json")))
        assert any("not converged" in w for w in rec.warnings)

    def test_dropped_fraction_warning_reachable(self, tmp_path, capsys):
        cfg = tmp_path / "drop.cfg"
        cfg.write_text(
            "[group]\npreset = cyclic\nlength = 2.0\n"
            "[dynamics]\nsamples = 20000\n"
            "[measures]\npoints_per_dim = 24\nt_escape = 2.0\n"
            f"[output]\ndirectory = {tmp_path / 'runs'}\n"
        )
        out = tmp_path / "runs"
        assert main(["disintegration", "--config", str(cfg), "--out", str(out)]) == 0
        rec = load_record(out / next(p for p in sorted(os.listdir(out)) if p.endswith(".json")))
        assert any("dropped" in w for w in rec.warnings)

    def test_escape_fit_failure_warning_reachable(self, tmp_path, capsys):
        cfg = tmp_path / "weak.cfg"
        cfg.write_text(
            "[group]\npreset = cyclic\nlength = 2.0\n"
            "[dynamics]\nt_grid = 20:26:2\nsamples = 2000\nhull_depth = 2\n"
            "window = 20,26\n"
            f"[output]\ndirectory = {tmp_path / 'runs'}\n"
        )
        out = tmp_path / "runs"
        assert main(["escape-rate", "--config", str(cfg), "--out", str(out)]) == 0
        rec = load_record(out / next(p for p in sorted(os.listdir(out)) if p.endswith(".json")))
        assert any("fit failed" in w for w in rec.warnings)

    def test_report_lists_runs(self, cyl_cfg, tmp_path, capsys):
        out = tmp_path / "rep"
        main(["escape-rate", "--config", cyl_cfg, "--seed", "7", "--out", str(out)])
        capsys.readouterr()
        assert main(["report", "--out", str(out)]) == 0
        assert "escape-rate" in capsys.readouterr().out

    def test_weyl_subcommand(self, cyl_cfg, tmp_path, capsys):
        out = tmp_path / "weyl"
        assert main(["weyl", "--config", cyl_cfg, "--out", str(out)]) == 0
        rec = load_record(out / next(p for p in sorted(os.listdir(out)) if p.endswith(".json")))
        assert rec.summary["max_rel_gap"] < 1e-8
