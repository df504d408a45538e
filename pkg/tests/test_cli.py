"""Command-line pipeline: chained subcommands, determinism, exit codes."""

import json
import subprocess
import sys

import numpy as np
import pytest

from wrix.audio import AudioBuffer, gaussian_noise
from wrix.cli import main
from wrix import write_wav


def run_cli(args, capsys):
    """Invoke main() in-process, returning (exit_code, stdout, stderr)."""
    code = main([str(a) for a in args])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A small synthetic corpus shared by the pipeline tests."""
    root = tmp_path_factory.mktemp("pipeline")
    code = main(
        ["synth", "--speakers", "4", "--files", "15", "--dim", "6",
         "--sigma", "0.05", "--seed", "11", "--out-dir", str(root)]
    )
    assert code == 0
    return root


class TestSynth:
    def test_emits_all_five_files(self, workdir):
        for name in (
            "segments.rttm",
            "embeddings.jsonl",
            "labels.json",
            "queries.jsonl",
            "manifest.jsonl",
        ):
            assert (workdir / name).exists(), name

    def test_rerun_is_byte_identical(self, workdir, tmp_path, capsys):
        args = ["synth", "--speakers", "4", "--files", "15", "--dim", "6",
                "--sigma", "0.05", "--seed", "11", "--out-dir", tmp_path]
        code, _, _ = run_cli(args, capsys)
        assert code == 0
        for name in ("segments.rttm", "embeddings.jsonl", "labels.json",
                     "queries.jsonl", "manifest.jsonl"):
            assert (tmp_path / name).read_bytes() == (workdir / name).read_bytes()


class TestIngest:
    def test_summary_counts(self, workdir, capsys):
        code, out, _ = run_cli(
            ["ingest",
             "--rttm", workdir / "segments.rttm",
             "--embeddings", workdir / "embeddings.jsonl",
             "--manifest", workdir / "manifest.jsonl",
             "--labels", workdir / "labels.json",
             "--queries", workdir / "queries.jsonl"],
            capsys,
        )
        assert code == 0
        summary = json.loads(out)
        assert summary["files"] == 15
        assert summary["queries"] == 4
        assert summary["dim"] == 6
        assert summary["segments"] == summary["embeddings"]

    def test_missing_required_flag_is_exit_1(self, workdir, capsys):
        code, _, err = run_cli(
            ["ingest", "--rttm", workdir / "segments.rttm"], capsys
        )
        assert code == 1
        assert json.loads(err)["error"].startswith("missing required flag")

    def test_unreadable_file_is_exit_2(self, workdir, capsys):
        code, _, err = run_cli(
            ["ingest",
             "--rttm", workdir / "absent.rttm",
             "--embeddings", workdir / "embeddings.jsonl",
             "--manifest", workdir / "manifest.jsonl"],
            capsys,
        )
        assert code == 2
        assert "error" in json.loads(err)


class TestStats:
    def test_one_row_per_file(self, workdir, capsys):
        code, out, _ = run_cli(
            ["stats",
             "--rttm", workdir / "segments.rttm",
             "--manifest", workdir / "manifest.jsonl"],
            capsys,
        )
        assert code == 0
        rows = [json.loads(line) for line in out.strip().splitlines()]
        assert len(rows) == 15
        for row in rows:
            assert 0.0 <= row["speech_ratio_ominus"] <= row["speech_ratio_oplus"]
            assert row["n_segments"] >= 1


@pytest.fixture(scope="module")
def index_path(workdir):
    path = workdir / "archive.wrix"
    code = main(
        ["index",
         "--embeddings", str(workdir / "embeddings.jsonl"),
         "--manifest", str(workdir / "manifest.jsonl"),
         "--scheme", "linear", "--keep-segments",
         "--out", str(path)]
    )
    assert code == 0
    return path


class TestIndexAndRetrieve:
    def test_index_summary_fields(self, workdir, index_path, capsys):
        assert index_path.exists()
        code, out, _ = run_cli(
            ["index",
             "--embeddings", workdir / "embeddings.jsonl",
             "--manifest", workdir / "manifest.jsonl",
             "--scheme", "softmax:5",
             "--out", workdir / "alt.wrix"],
            capsys,
        )
        assert code == 0
        summary = json.loads(out)
        assert summary["scheme"] == "softmax:5.0"
        assert summary["files"] == 15

    def test_retrieve_writes_contiguous_ranks(self, workdir, index_path, capsys):
        ranked_path = workdir / "ranked.jsonl"
        code, _, _ = run_cli(
            ["retrieve",
             "--index", index_path,
             "--queries", workdir / "queries.jsonl",
             "--mode", "speaker", "--top-r", "5",
             "--out", ranked_path,
             "--scores-out", workdir / "scores.jsonl"],
            capsys,
        )
        assert code == 0
        rows = [json.loads(l) for l in ranked_path.read_text().splitlines()]
        by_query = {}
        for row in rows:
            by_query.setdefault(row["query_id"], []).append(row)
        assert len(by_query) == 4
        for entries in by_query.values():
            assert [e["rank"] for e in entries] == list(range(1, len(entries) + 1))
            scores = [e["score"] for e in entries]
            assert scores == sorted(scores, reverse=True)

    def test_retrieve_deterministic(self, workdir, index_path, capsys):
        outs = []
        for name in ("r1.jsonl", "r2.jsonl"):
            code, _, _ = run_cli(
                ["retrieve", "--index", index_path,
                 "--queries", workdir / "queries.jsonl", "--out", workdir / name],
                capsys,
            )
            assert code == 0
            outs.append((workdir / name).read_bytes())
        assert outs[0] == outs[1]

    def test_evaluate_perfect_archive(self, workdir, index_path, capsys):
        code, _, _ = run_cli(
            ["retrieve", "--index", index_path,
             "--queries", workdir / "queries.jsonl",
             "--out", workdir / "ranked_eval.jsonl"],
            capsys,
        )
        assert code == 0
        code, out, _ = run_cli(
            ["evaluate",
             "--ranked", workdir / "ranked_eval.jsonl",
             "--queries", workdir / "queries.jsonl",
             "--labels", workdir / "labels.json",
             "--manifest", workdir / "manifest.jsonl",
             "--ks", "1,3"],
            capsys,
        )
        assert code == 0
        report = json.loads(out)
        assert report["n_evaluated"] >= 1
        assert report["means"]["p"]["1"] == 1.0

    def test_cumulative_consumes_report(self, workdir, index_path, capsys):
        report_path = workdir / "report.json"
        code, _, _ = run_cli(
            ["evaluate",
             "--ranked", workdir / "ranked_eval.jsonl",
             "--queries", workdir / "queries.jsonl",
             "--labels", workdir / "labels.json",
             "--manifest", workdir / "manifest.jsonl",
             "--out", report_path],
            capsys,
        )
        assert code == 0
        code, out, _ = run_cli(
            ["cumulative", "--report", report_path], capsys
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "coverage_pct,p1,p3,p5,p10,avg"
        assert len(lines) == 1 + 4
        averages = [float(l.split(",")[-1]) for l in lines[1:]]
        assert averages == sorted(averages, reverse=True)

    def test_fuse_self_is_identity(self, workdir, index_path, capsys):
        fused_path = workdir / "fused.jsonl"
        code, _, _ = run_cli(
            ["fuse",
             "--scores-a", workdir / "scores.jsonl",
             "--scores-b", workdir / "scores.jsonl",
             "--lam", "0.25",
             "--top-r", "5",
             "--out", fused_path],
            capsys,
        )
        assert code == 0
        assert fused_path.read_bytes() == (workdir / "ranked.jsonl").read_bytes()


class TestConfigMerge:
    def test_flags_override_config(self, workdir, tmp_path, capsys):
        config = tmp_path / "synth.json"
        config.write_text(json.dumps(
            {"speakers": 4, "files": 15, "dim": 6, "sigma": 0.05, "seed": 999,
             "out_dir": str(tmp_path / "out")}
        ))
        code, _, _ = run_cli(
            ["synth", "--config", config, "--seed", "11"], capsys
        )
        assert code == 0
        assert (tmp_path / "out" / "embeddings.jsonl").read_bytes() == (
            workdir / "embeddings.jsonl"
        ).read_bytes()

    def test_unknown_config_key_is_exit_1(self, tmp_path, capsys):
        config = tmp_path / "bad.json"
        config.write_text('{"speakerz": 3}')
        code, _, err = run_cli(["synth", "--config", config], capsys)
        assert code == 1
        assert "speakerz" in json.loads(err)["error"]


class TestAudioCommands:
    @pytest.fixture()
    def wav_path(self, tmp_path):
        t = np.arange(16000) / 16000.0
        buf = AudioBuffer(16000, 0.5 * np.sin(2 * np.pi * 440.0 * t))
        path = tmp_path / "tone.wav"
        write_wav(buf, str(path), pcm16=False)
        return path

    def test_distort_inline_spec(self, wav_path, tmp_path, capsys):
        out_path = tmp_path / "noisy.wav"
        code, out, _ = run_cli(
            ["distort", "--in", wav_path,
             "--spec", '{"kind": "noise", "source": "gaussian", "snr_db": 10, "seed": 3}',
             "--out", out_path],
            capsys,
        )
        assert code == 0
        assert out_path.exists()
        summary = json.loads(out)
        assert summary["kind"] == "noise"

    def test_distort_spec_file_resolves_sources_nearby(self, wav_path, tmp_path, capsys):
        write_wav(gaussian_noise(4000, 16000, seed=5), str(tmp_path / "n.wav"),
                  pcm16=False)
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(
            '{"kind": "noise", "source": "n.wav", "snr_db": 5, "seed": 1}'
        )
        code, _, _ = run_cli(
            ["distort", "--in", wav_path, "--spec", spec_path,
             "--out", tmp_path / "o.wav"],
            capsys,
        )
        assert code == 0

    def test_distort_bad_spec_is_exit_1(self, wav_path, tmp_path, capsys):
        code, _, err = run_cli(
            ["distort", "--in", wav_path, "--spec", '{"kind": "chorus"}',
             "--out", tmp_path / "x.wav"],
            capsys,
        )
        assert code == 1
        assert "error" in json.loads(err)

    def test_snr_reports_estimate(self, wav_path, capsys):
        code, out, _ = run_cli(
            ["snr", "--in", wav_path, "--seed", "0",
             "--table-trials", "4", "--table-samples", "4000"],
            capsys,
        )
        assert code == 0
        result = json.loads(out)
        assert "snr_db" in result and "g" in result

    def test_silhouette_by_speaker(self, workdir, capsys):
        code, out, _ = run_cli(
            ["silhouette", "--embeddings", workdir / "embeddings.jsonl",
             "--by", "speaker"],
            capsys,
        )
        assert code == 0
        result = json.loads(out)
        assert -1.0 <= result["silhouette"] <= 1.0
        assert result["by"] == "speaker"


class TestEntryPoint:
    def test_console_script_subprocess(self, tmp_path):
        """The installed entry point works end to end in a real process."""
        result = subprocess.run(
            [sys.executable, "-m", "wrix.cli", "synth",
             "--speakers", "2", "--files", "7", "--dim", "4",
             "--sigma", "0.1", "--seed", "0", "--out-dir", str(tmp_path)],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0, result.stderr
        assert (tmp_path / "manifest.jsonl").exists()

    def test_unknown_subcommand_is_exit_1(self):
        result = subprocess.run(
            [sys.executable, "-m", "wrix.cli", "frobnicate"],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 1
        assert "error" in json.loads(result.stderr)
