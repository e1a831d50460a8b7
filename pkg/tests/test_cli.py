"""Command-line interface: workflows, exit codes, environment defaults."""

import json

import numpy as np
import pytest

from octseg.cli import ENV_THREADS, EXIT_OK, EXIT_PIPELINE, EXIT_USAGE, main
from octseg.phantom import PhantomSpec
from octseg.surfaces import load_surface
from octseg.volume import VolumeMeta


@pytest.fixture()
def phantom_dir(tmp_path):
    """Generate a small speckled phantom through the CLI itself."""
    spec = PhantomSpec.default(dims=(48, 12, 96), seed=1, speckle_looks=4)
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec.to_dict()))
    out = tmp_path / "ph"
    assert main(["phantom", "--spec", str(spec_path), "--out", str(out)]) == EXIT_OK
    return out


class TestPhantomCmd:
    def test_outputs_exist_with_declared_size(self, phantom_dir):
        meta = VolumeMeta.from_json(phantom_dir / "volume.json")
        assert (phantom_dir / "volume.raw").stat().st_size == meta.nbytes
        assert meta.dims == (48, 12, 96)
        for name in ("ilm", "isos", "rpe"):
            s = load_surface(phantom_dir / f"truth_{name}.csv")
            assert s.valid.all()

    def test_same_spec_is_reproducible(self, tmp_path):
        spec = PhantomSpec.default(dims=(32, 8, 64), seed=9, speckle_looks=1)
        p = tmp_path / "spec.json"
        p.write_text(json.dumps(spec.to_dict()))
        main(["phantom", "--spec", str(p), "--out", str(tmp_path / "a")])
        main(["phantom", "--spec", str(p), "--out", str(tmp_path / "b")])
        assert (tmp_path / "a/volume.raw").read_bytes() == (tmp_path / "b/volume.raw").read_bytes()

    def test_invalid_geometry_is_usage_error(self, tmp_path):
        spec = PhantomSpec.default(dims=(32, 8, 64)).to_dict()
        spec["ilm"]["base_depth"] = 60.0
        spec["isos"]["base_depth"] = 20.0  # above the ILM: rejected
        p = tmp_path / "spec.json"
        p.write_text(json.dumps(spec))
        assert main(["phantom", "--spec", str(p), "--out", str(tmp_path / "x")]) == EXIT_USAGE

    def test_unknown_key_is_usage_error(self, tmp_path):
        d = PhantomSpec.default(dims=(32, 8, 64)).to_dict()
        d["glitter"] = 1
        p = tmp_path / "spec.json"
        p.write_text(json.dumps(d))
        assert main(["phantom", "--spec", str(p), "--out", str(tmp_path / "x")]) == EXIT_USAGE


class TestSegmentCmd:
    def test_full_run_outputs(self, phantom_dir, tmp_path):
        out = tmp_path / "seg"
        rc = main([
            "segment", "--in", str(phantom_dir / "volume.raw"),
            "--meta", str(phantom_dir / "volume.json"),
            "--out-dir", str(out), "--threads", "1",
        ])
        assert rc == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["dims"] == [48, 12, 96]
        assert report["threads"] == 1
        assert len(report["boundaries"]) == 3
        for b in report["boundaries"]:
            assert b["enhance_passes"] == 1
            assert b["argmax_passes"] == 1
            assert b["wall_s"] > 0
            assert "stage_s" in b
        surfaces = {k: load_surface(out / f"{k}.csv") for k in ("ilm", "isos", "rpe")}
        assert (surfaces["ilm"].z <= surfaces["isos"].z).all()
        assert (surfaces["isos"].z <= surfaces["rpe"].z).all()

    def test_threads_do_not_change_bytes(self, phantom_dir, tmp_path):
        outs = []
        for threads in ("1", "3"):
            out = tmp_path / f"seg{threads}"
            main(["segment", "--in", str(phantom_dir / "volume.raw"),
                  "--meta", str(phantom_dir / "volume.json"),
                  "--out-dir", str(out), "--threads", threads])
            outs.append(out)
        for name in ("ilm.csv", "isos.csv", "rpe.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_missing_sidecar_is_usage_error(self, phantom_dir, tmp_path):
        rc = main(["segment", "--in", str(phantom_dir / "volume.raw"),
                   "--meta", str(phantom_dir / "nope.json"),
                   "--out-dir", str(tmp_path / "x")])
        assert rc == EXIT_USAGE

    def test_truncated_volume_is_usage_error(self, phantom_dir, tmp_path):
        clipped = tmp_path / "short.raw"
        clipped.write_bytes((phantom_dir / "volume.raw").read_bytes()[:-10])
        rc = main(["segment", "--in", str(clipped),
                   "--meta", str(phantom_dir / "volume.json"),
                   "--out-dir", str(tmp_path / "x")])
        assert rc == EXIT_USAGE

    def test_constant_volume_is_pipeline_error(self, tmp_path):
        raw = tmp_path / "flat.raw"
        raw.write_bytes(bytes([77]) * (24 * 12 * 40))
        VolumeMeta(dims=(24, 12, 40), dtype="u8", order="xyz").save(tmp_path / "flat.json")
        with pytest.warns(Warning):
            rc = main(["segment", "--in", str(raw), "--meta", str(tmp_path / "flat.json"),
                       "--out-dir", str(tmp_path / "seg")])
        assert rc == EXIT_PIPELINE
        # the run report still lands, flagged degenerate
        report = json.loads((tmp_path / "seg/report.json").read_text())
        assert report["degenerate"] is True

    def test_config_override_echoed(self, phantom_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"rpe": {"outlier_tau": 9.0}}))
        out = tmp_path / "seg"
        rc = main(["segment", "--in", str(phantom_dir / "volume.raw"),
                   "--meta", str(phantom_dir / "volume.json"),
                   "--config", str(cfg), "--out-dir", str(out)])
        assert rc == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["config"]["rpe"]["outlier_tau"] == 9.0
        assert report["config"]["ilm"]["outlier_tau"] == 15.0

    def test_bad_config_is_usage_error(self, phantom_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"rpe": {"wavelength": 840}}))
        rc = main(["segment", "--in", str(phantom_dir / "volume.raw"),
                   "--meta", str(phantom_dir / "volume.json"),
                   "--config", str(cfg), "--out-dir", str(tmp_path / "x")])
        assert rc == EXIT_USAGE

    def test_f32_surface_format(self, phantom_dir, tmp_path):
        out = tmp_path / "seg"
        rc = main(["segment", "--in", str(phantom_dir / "volume.raw"),
                   "--meta", str(phantom_dir / "volume.json"),
                   "--out-dir", str(out), "--format", "f32"])
        assert rc == EXIT_OK
        assert (out / "ilm.f32").stat().st_size == 48 * 12 * 4
        s = load_surface(out / "ilm.f32", fmt="f32", dims=(48, 12))
        assert s.valid.all()

    def test_env_var_sets_default_threads(self, phantom_dir, tmp_path, monkeypatch):
        monkeypatch.setenv(ENV_THREADS, "2")
        out = tmp_path / "seg"
        rc = main(["segment", "--in", str(phantom_dir / "volume.raw"),
                   "--meta", str(phantom_dir / "volume.json"),
                   "--out-dir", str(out)])
        assert rc == EXIT_OK
        assert json.loads((out / "report.json").read_text())["threads"] == 2

    def test_bad_env_var_is_usage_error(self, phantom_dir, tmp_path, monkeypatch):
        monkeypatch.setenv(ENV_THREADS, "many")
        rc = main(["segment", "--in", str(phantom_dir / "volume.raw"),
                   "--meta", str(phantom_dir / "volume.json"),
                   "--out-dir", str(tmp_path / "x")])
        assert rc == EXIT_USAGE

    def test_cli_flag_beats_env_var(self, phantom_dir, tmp_path, monkeypatch):
        monkeypatch.setenv(ENV_THREADS, "7")
        out = tmp_path / "seg"
        main(["segment", "--in", str(phantom_dir / "volume.raw"),
              "--meta", str(phantom_dir / "volume.json"),
              "--out-dir", str(out), "--threads", "1"])
        assert json.loads((out / "report.json").read_text())["threads"] == 1


class TestThicknessCmd:
    def _seg(self, phantom_dir, tmp_path):
        out = tmp_path / "seg"
        main(["segment", "--in", str(phantom_dir / "volume.raw"),
              "--meta", str(phantom_dir / "volume.json"), "--out-dir", str(out)])
        return out

    def test_writes_csv_pgm_sidecar(self, phantom_dir, tmp_path):
        seg = self._seg(phantom_dir, tmp_path)
        prefix = tmp_path / "thick"
        rc = main(["thickness", "--ilm", str(seg / "ilm.csv"),
                   "--rpe", str(seg / "rpe.csv"), "--dz-um", "7.1",
                   "--out", str(prefix)])
        assert rc == EXIT_OK
        csv_lines = (tmp_path / "thick.csv").read_text().strip().split("\n")
        assert csv_lines[0] == "x,y,thickness_px,thickness_um"
        assert len(csv_lines) == 1 + 48 * 12
        assert (tmp_path / "thick.pgm").exists()
        side = json.loads((tmp_path / "thick.pgm.json").read_text())
        assert side["max_thickness_px"] >= side["min_thickness_px"]

    def test_equal_surfaces_zero_map(self, phantom_dir, tmp_path):
        seg = self._seg(phantom_dir, tmp_path)
        rc = main(["thickness", "--ilm", str(seg / "ilm.csv"),
                   "--rpe", str(seg / "ilm.csv"), "--out", str(tmp_path / "z")])
        assert rc == EXIT_OK
        rows = (tmp_path / "z.csv").read_text().strip().split("\n")[1:]
        assert all(r.rsplit(",", 1)[-1] == "0.0" for r in rows)

    def test_dims_mismatch_is_usage_error(self, phantom_dir, tmp_path):
        seg = self._seg(phantom_dir, tmp_path)
        other = PhantomSpec.default(dims=(16, 4, 64))
        sp = tmp_path / "s2.json"
        sp.write_text(json.dumps(other.to_dict()))
        main(["phantom", "--spec", str(sp), "--out", str(tmp_path / "ph2")])
        rc = main(["thickness", "--ilm", str(seg / "ilm.csv"),
                   "--rpe", str(tmp_path / "ph2/truth_rpe.csv"),
                   "--out", str(tmp_path / "bad")])
        assert rc == EXIT_USAGE


class TestRenderCmd:
    def test_writes_ppm_with_volume_dims(self, phantom_dir, tmp_path):
        seg = tmp_path / "seg"
        main(["segment", "--in", str(phantom_dir / "volume.raw"),
              "--meta", str(phantom_dir / "volume.json"), "--out-dir", str(seg)])
        out = tmp_path / "b.ppm"
        rc = main(["render", "--in", str(phantom_dir / "volume.raw"),
                   "--meta", str(phantom_dir / "volume.json"),
                   "--surfaces", str(seg), "--slice", "6", "--out", str(out)])
        assert rc == EXIT_OK
        header = out.read_bytes()[:20]
        assert header.startswith(b"P6\n48 96\n")  # cols=nx, rows=nz

    def test_out_of_range_slice_is_usage_error(self, phantom_dir, tmp_path):
        seg = tmp_path / "seg"
        main(["segment", "--in", str(phantom_dir / "volume.raw"),
              "--meta", str(phantom_dir / "volume.json"), "--out-dir", str(seg)])
        rc = main(["render", "--in", str(phantom_dir / "volume.raw"),
                   "--meta", str(phantom_dir / "volume.json"),
                   "--surfaces", str(seg), "--slice", "99",
                   "--out", str(tmp_path / "b.ppm")])
        assert rc == EXIT_USAGE

    def test_no_surfaces_found_is_usage_error(self, phantom_dir, tmp_path):
        rc = main(["render", "--in", str(phantom_dir / "volume.raw"),
                   "--meta", str(phantom_dir / "volume.json"),
                   "--surfaces", str(tmp_path), "--slice", "0",
                   "--out", str(tmp_path / "b.ppm")])
        assert rc == EXIT_USAGE


class TestParser:
    def test_missing_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_missing_required_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["segment", "--in", "x.raw"])
        assert exc.value.code == 2
