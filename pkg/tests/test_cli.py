from pathlib import Path

import numpy as np
import pytest

from framebank.cli import cli_main, parse_runconfig, synth_video
from framebank.tensorio import read_mask_pgm, read_tensor, write_tensor
from test_pipeline import write_replay_dump


def run(*argv):
    return cli_main([str(a) for a in argv])


def dir_snapshot(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestArgHandling:
    def test_unknown_subcommand_exits_2(self, capsys):
        assert run("frobnicate") == 2
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag_exits_2(self, capsys):
        assert run("simulate", "--does-not-exist") == 2

    def test_validation_failure_exits_1(self, tmp_path, capsys):
        code = run("simulate", "--tau", "7.5", "--out-dir", tmp_path / "o", "--frames", 2)
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("error:") and err.count("\n") == 1

    def test_missing_out_dir_exits_1(self, capsys):
        assert run("simulate", "--frames", 2) == 1
        assert "out-dir" in capsys.readouterr().err


class TestConfigPrecedence:
    def test_file_overrides_defaults_flags_override_file(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("lambda = 0.5\nsteps = 4\ntau = 0.25\n")
        out = tmp_path / "out"
        code = run(
            "simulate", "--frames", 2, "--config", cfg_file,
            "--lambda", 0.7, "--out-dir", out,
        )
        assert code == 0
        meta = dict(
            line.split("=", 1) for line in (out / "run.meta").read_text().splitlines()
        )
        assert meta["lambda"] == "0.7"  # flag beats file
        assert meta["steps"] == "4"  # file beats default
        assert meta["tau"] == "0.25"
        assert meta["guidance"] == "7.5"  # untouched default

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("momentum = 0.9\n")
        with pytest.raises(ValueError, match="unknown config key"):
            parse_runconfig(cfg_file)

    def test_config_value_validated(self, tmp_path, capsys):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("tau = 2.0\n")
        assert run("simulate", "--frames", 2, "--config", cfg_file, "--out-dir", tmp_path / "o") == 1


class TestSimulate:
    def test_deterministic_output_dirs(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(
                "simulate", "--frames", 8, "--sfm-len", 5,
                "--lambda", 0.9, "--seed", 7, "--out-dir", out,
            ) == 0
        snap_a, snap_b = dir_snapshot(a), dir_snapshot(b)
        assert list(snap_a) == list(snap_b)
        assert all(snap_a[k] == snap_b[k] for k in snap_a)

    def test_expected_artifacts(self, tmp_path):
        out = tmp_path / "out"
        assert run("simulate", "--frames", 3, "--steps", 4, "--out-dir", out) == 0
        assert (out / "run.meta").is_file()
        assert (out / "report.jsonl").is_file()
        assert len(list((out / "latents").glob("*.eyit"))) == 3
        assert len(list((out / "masks").glob("*.pgm"))) == 3
        mask = read_mask_pgm(out / "masks" / "frame_001.pgm")
        assert mask.bits.shape == (16, 16)
        latent = read_tensor(out / "latents" / "frame_000.eyit")
        assert latent.shape == (4, 16, 16)
        assert latent.min() >= 0.0 and latent.max() <= 1.0

    def test_different_seeds_differ(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run("simulate", "--frames", 2, "--steps", 4, "--seed", 1, "--out-dir", a)
        run("simulate", "--frames", 2, "--steps", 4, "--seed", 2, "--out-dir", b)
        la = (a / "latents" / "frame_001.eyit").read_bytes()
        lb = (b / "latents" / "frame_001.eyit").read_bytes()
        assert la != lb


class TestMetricsCommand:
    def test_self_comparison_hits_caps(self, tmp_path, capsys):
        out = tmp_path / "out"
        run("simulate", "--frames", 3, "--steps", 4, "--out-dir", out)
        assert run("metrics", out / "latents", out / "latents") == 0
        lines = capsys.readouterr().out.strip().splitlines()
        body = [l for l in lines if l.startswith("frame_")]
        assert len(body) == 3
        for line in body:
            _, p, s, _ = line.split("\t")
            assert float(p) == 99.0
            assert float(s) == pytest.approx(1.0, abs=1e-9)

    def test_region_restricted_metrics(self, tmp_path, capsys):
        out = tmp_path / "out"
        run("simulate", "--frames", 2, "--steps", 4, "--out-dir", out)
        assert run(
            "metrics", out / "latents", out / "latents", "--masks", out / "masks"
        ) == 0
        assert "99.0000" in capsys.readouterr().out

    def test_mismatched_dirs_fail(self, tmp_path, capsys):
        a = tmp_path / "a"
        a.mkdir()
        write_tensor(a / "x.eyit", np.zeros((1, 12, 12)))
        b = tmp_path / "b"
        b.mkdir()
        write_tensor(b / "y.eyit", np.zeros((1, 12, 12)))
        assert run("metrics", a, b) == 1


class TestSfmTrace:
    def test_documented_trace(self, tmp_path, capsys):
        assert run("sfm-trace", "--frames", 9, "--sfm-len", 5) == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert out[-1] == "final-bank\t0,1,5,7,8"

    def test_writes_bank_dump(self, tmp_path):
        out = tmp_path / "trace"
        assert run("sfm-trace", "--frames", 9, "--sfm-len", 5, "--out-dir", out) == 0
        assert (out / "manifest.tsv").is_file()
        names = sorted(p.name for p in out.glob("entry_*.eyit"))
        assert names == [f"entry_{i:03d}.eyit" for i in (0, 1, 5, 7, 8)]


class TestReplayAndMask:
    def make_dump(self, tmp_path):
        rng = np.random.default_rng(0)
        tokens = rng.standard_normal((16, 8)).astype(np.float32)
        dump = tmp_path / "dump"
        dump.mkdir()
        write_replay_dump(dump, [tokens, tokens], hotspots=[5, 6])
        return dump, tokens

    def test_replay_writes_features_and_masks(self, tmp_path):
        dump, tokens = self.make_dump(tmp_path)
        out = tmp_path / "out"
        assert run("replay", dump, "--words", "1", "--out-dir", out) == 0
        feats = sorted((out / "features").glob("*.eyit"))
        assert len(feats) == 6  # 2 frames x 3 steps x 1 layer
        frame1 = read_tensor(out / "features" / "frame_001_step_001_sa.mid.eyit")
        assert np.array_equal(frame1, tokens)
        masks = sorted((out / "masks").glob("*.pgm"))
        assert len(masks) == 2

    def test_mask_subcommand_table(self, tmp_path, capsys):
        dump, _ = self.make_dump(tmp_path)
        out = tmp_path / "masks"
        assert run("mask", dump, "--words", "1", "--out-dir", out) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "frame\tforeground_pixels"
        assert lines[1] == "0\t1"
        assert lines[2] == "1\t2"  # moving hotspot united with previous contour
        assert read_mask_pgm(out / "frame_000.pgm").pixel_count() == 1

    def test_mask_no_overlap_flag(self, tmp_path, capsys):
        dump, _ = self.make_dump(tmp_path)
        out = tmp_path / "masks"
        assert run("mask", dump, "--words", "1", "--no-overlap", "--out-dir", out) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[2] == "1\t1"


class TestFmpBench:
    def test_bench_runs_and_writes(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        cur = tmp_path / "cur.eyit"
        write_tensor(cur, rng.standard_normal((32, 16)))
        banks = []
        for i in range(2):
            p = tmp_path / f"bank{i}.eyit"
            write_tensor(p, rng.standard_normal((32, 16)))
            banks.append(p)
        out = tmp_path / "bench"
        assert run(
            "fmp-bench", "--current", cur, "--bank", *banks,
            "--lambda", 0.5, "--repeats", 2, "--out-dir", out,
        ) == 0
        stdout = capsys.readouterr().out
        assert "python" in stdout
        assert (out / "propagated.eyit").is_file()
        prov = (out / "provenance.tsv").read_text().splitlines()
        assert prov[0] == "token\tsource_frame\tsource_token\tbest_similarity"
        assert len(prov) == 33

    def test_bench_reports_kernel_agreement(self, tmp_path, capsys):
        from framebank import kernels

        if not kernels.have_compiled_kernel():
            pytest.skip("compiled kernel not built")
        rng = np.random.default_rng(2)
        cur = tmp_path / "cur.eyit"
        write_tensor(cur, rng.standard_normal((8, 4)))
        bank = tmp_path / "bank.eyit"
        write_tensor(bank, rng.standard_normal((8, 4)))
        out = tmp_path / "bench"
        assert run("fmp-bench", "--current", cur, "--bank", bank, "--out-dir", out) == 0
        stdout = capsys.readouterr().out
        assert "compiled" in stdout and "agreement\tok" in stdout


class TestSynthVideo:
    def test_range_and_determinism(self):
        a = synth_video(3, 4)
        b = synth_video(3, 4)
        for fa, fb in zip(a.frames, b.frames):
            assert np.array_equal(fa, fb)
            assert fa.min() >= 0.0 and fa.max() <= 1.0
