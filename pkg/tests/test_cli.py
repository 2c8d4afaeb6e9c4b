"""End-to-end CLI tests at tiny scale: gen, audit, train, eval, experiment,
curve, and the determinism/exit-code contracts."""

import json

import pytest

from propentail.cli import main
from propentail.datagen import read_dataset


def run_cli(capsys, *argv) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def data_dir(tmp_path, capsys):
    out = tmp_path / "data"
    code, _, _ = run_cli(
        capsys, "gen", "--seed", "5", "--per-bin", "12", "--max-bin", "3",
        "--out-dir", str(out),
    )
    assert code == 0
    return out


class TestGen:
    def test_writes_expected_files_and_counts(self, tmp_path, capsys):
        out = tmp_path / "d"
        code, stdout, err = run_cli(
            capsys, "gen", "--seed", "1", "--per-bin", "10", "--max-bin", "2",
            "--out-dir", str(out),
        )
        assert code == 0
        assert stdout == ""  # diagnostics go to stderr, data to files
        train = read_dataset(out / "train.tsv")
        test = read_dataset(out / "test.tsv")
        assert len(train) + len(test) == 30
        assert (out / "stats.md").exists()
        # resolved config echoed as one JSON line on stderr
        echo = json.loads(err.splitlines()[0])
        assert echo["per_bin_pairs"] == 10
        assert echo["split"] == 0.8

    def test_byte_identical_reruns(self, tmp_path, capsys):
        out = tmp_path / "a"
        flags = ("gen", "--seed", "9", "--per-bin", "8", "--max-bin", "2",
                 "--out-dir", str(out))
        assert run_cli(capsys, *flags)[0] == 0
        first = {
            name: (out / name).read_bytes()
            for name in ("train.tsv", "test.tsv", "stats.md")
        }
        assert run_cli(capsys, *flags)[0] == 0
        for name, blob in first.items():
            assert (out / name).read_bytes() == blob

    def test_stats_contains_majority_share(self, data_dir):
        stats = (data_dir / "stats.md").read_text(encoding="utf-8")
        assert "majority class share" in stats


class TestAudit:
    def test_fresh_data_passes(self, data_dir, capsys):
        code, _, err = run_cli(capsys, "audit", "--data-dir", str(data_dir))
        assert code == 0
        assert "audit passed" in err

    def test_corrupted_label_fails_naming_line(self, data_dir, capsys):
        path = data_dir / "test.tsv"
        lines = path.read_text(encoding="utf-8").splitlines()
        fields = lines[2].split("\t")
        fields[0] = "=" if fields[0] != "=" else "#"
        lines[2] = "\t".join(fields)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        code, _, err = run_cli(capsys, "audit", "--data-dir", str(data_dir))
        assert code == 1
        assert ":3:" in err

    def test_missing_dir_fails(self, tmp_path, capsys):
        code, _, _ = run_cli(capsys, "audit", "--data-dir", str(tmp_path / "nope"))
        assert code == 1


class TestTrainEval:
    def test_train_then_eval_round_trip(self, data_dir, tmp_path, capsys):
        ckpt = tmp_path / "model.npz"
        code, _, err = run_cli(
            capsys, "train", "--model", "treernn", "--train-file",
            str(data_dir / "train.tsv"), "--epochs", "2", "--seed", "3",
            "--d-emb", "8", "--d-c", "8", "--checkpoint", str(ckpt),
        )
        assert code == 0
        assert ckpt.exists()
        assert "epoch 2/2" in err

        out = tmp_path / "eval"
        code, _, err = run_cli(
            capsys, "eval", "--checkpoint", str(ckpt), "--data",
            str(data_dir / "test.tsv"), "--out-dir", str(out),
        )
        assert code == 0
        predictions = (out / "predictions.tsv").read_text(encoding="utf-8").splitlines()
        assert len(predictions) == len(read_dataset(data_dir / "test.tsv"))
        for line in predictions:
            gold, predicted = line.split("\t")
            assert gold in "=<>^|v#" and predicted in "=<>^|v#"
        assert (out / "report.csv").exists()

    def test_vocabulary_size_echoed(self, data_dir, tmp_path, capsys):
        ckpt = tmp_path / "m.npz"
        code, _, err = run_cli(
            capsys, "train", "--model", "lstm", "--train-file",
            str(data_dir / "train.tsv"), "--cutoff", "1", "--epochs", "1",
            "--d-emb", "6", "--d-hidden", "8", "--d-c", "6",
            "--checkpoint", str(ckpt),
        )
        assert code == 0
        echo = json.loads(err.splitlines()[0])
        assert echo["vocabulary_size"] == 11
        code, _, err = run_cli(
            capsys, "train", "--model", "treernn", "--train-file",
            str(data_dir / "train.tsv"), "--epochs", "1", "--d-emb", "6",
            "--d-c", "6", "--checkpoint", str(tmp_path / "m2.npz"),
        )
        assert code == 0
        echo = json.loads(err.splitlines()[0])
        assert echo["vocabulary_size"] == 9


class TestExperiment:
    def test_writes_reports_and_checkpoint(self, data_dir, tmp_path, capsys):
        out = tmp_path / "exp"
        code, _, err = run_cli(
            capsys, "experiment", "--model", "treernn", "--cutoff", "2",
            "--epochs", "2", "--seed", "1", "--d-emb", "8", "--d-c", "8",
            "--data-dir", str(data_dir), "--out-dir", str(out),
        )
        assert code == 0
        for suffix in ("report.csv", "report.md", "plot.csv", "checkpoint.npz"):
            assert (out / f"treernn_cutoff2_{suffix}").exists()
        report_csv = (out / "treernn_cutoff2_report.csv").read_text(encoding="utf-8")
        assert report_csv.startswith("bin,count,accuracy,seen_in_training")

    def test_deterministic_report(self, data_dir, tmp_path, capsys):
        texts = []
        for sub in ("r1", "r2"):
            out = tmp_path / sub
            code, _, _ = run_cli(
                capsys, "experiment", "--model", "treernn", "--cutoff", "2",
                "--epochs", "2", "--seed", "7", "--d-emb", "8", "--d-c", "8",
                "--data-dir", str(data_dir), "--out-dir", str(out),
            )
            assert code == 0
            texts.append((out / "treernn_cutoff2_report.csv").read_bytes())
        assert texts[0] == texts[1]

    def test_missing_data_dir_exits_nonzero(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "experiment", "--model", "treernn", "--cutoff", "3",
            "--data-dir", str(tmp_path / "missing"), "--out-dir", str(tmp_path / "o"),
        )
        assert code == 1
        assert "error:" in err


class TestCurve:
    def test_writes_curve_csv(self, data_dir, tmp_path, capsys):
        out = tmp_path / "curve"
        code, _, _ = run_cli(
            capsys, "curve", "--model", "nbow", "--cutoff", "2", "--sizes", "4,8",
            "--epochs", "1", "--seed", "2", "--d-emb", "6", "--d-hidden", "6",
            "--d-c", "6", "--data-dir", str(data_dir), "--out-dir", str(out),
        )
        assert code == 0
        text = (out / "nbow_cutoff2_curve.csv").read_text(encoding="utf-8")
        lines = text.splitlines()
        assert lines[0] == "size,accuracy"
        assert len(lines) == 3
        assert lines[1].startswith("4,")
        assert lines[2].startswith("8,")
