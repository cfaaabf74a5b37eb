"""End-to-end CLI checks through main(argv); exit codes are the contract."""

import csv
import json

import numpy as np
import pytest

from qgm.cli import HISTORY_COLUMNS, main
from qgm.data import LabeledSequenceSet, gen_synthetic, load_dataset, save_dataset
from qgm.hmm import Hmm, sample_hmm
from qgm.hqmm import Hqmm, random_hqmm
from qgm.modelfile import save_model


@pytest.fixture()
def tiny_data(tmp_path):
    _, dataset = gen_synthetic("hqmm", 2, 2, 1, 8, 30, seed=5)
    path = tmp_path / "train.ndjson"
    save_dataset(dataset, path)
    return str(path)


def biased_hmm(symbol: int) -> Hmm:
    # Emits `symbol` with probability 0.9 from either state.
    emission = np.full((2, 2), 0.1)
    emission[symbol, :] = 0.9
    return Hmm(np.full((2, 2), 0.5), emission, np.array([0.5, 0.5]))


@pytest.fixture()
def labeled_data(tmp_path):
    seqs, labels = [], []
    for label in (0, 1):
        seqs.extend(sample_hmm(biased_hmm(label), 30, seed=40 + label,
                               num_sequences=5))
        labels.extend([label] * 5)
    path = tmp_path / "labeled.ndjson"
    save_dataset(LabeledSequenceSet(seqs, np.array(labels)), path)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def train_argv(data, out, extra=()):
    return ["train", "--data", data, "--n", "2", "--s", "2", "--epochs", "2",
            "--seed", "0", "--out", out, *extra]


def test_train_writes_model_history_and_figure(tiny_data, tmp_path, capsys):
    out = tmp_path / "model.json"
    assert main(train_argv(tiny_data, str(out))) == 0
    assert out.exists()
    rows = read_csv(tmp_path / "model_history.csv")
    assert rows[0] == HISTORY_COLUMNS
    assert len(rows) == 3  # header + 2 epochs x 1 batch
    assert (tmp_path / "model_history.png").exists()
    assert "train loss" in capsys.readouterr().out


def test_train_no_figures(tiny_data, tmp_path):
    out = tmp_path / "model.json"
    assert main(train_argv(tiny_data, str(out), ["--no-figures"])) == 0
    assert not (tmp_path / "model_history.png").exists()


def test_train_same_seed_same_bytes(tiny_data, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(train_argv(tiny_data, str(a))) == 0
    assert main(train_argv(tiny_data, str(b))) == 0
    assert a.read_bytes() == b.read_bytes()


def test_train_requires_dimensions(tiny_data, tmp_path):
    argv = ["train", "--data", tiny_data, "--out", str(tmp_path / "m.json")]
    assert main(argv) == 2


def test_train_val_split_reports_validation(tiny_data, tmp_path, capsys):
    out = tmp_path / "model.json"
    assert main(train_argv(tiny_data, str(out), ["--val-split", "0.25"])) == 0
    assert "validation DA" in capsys.readouterr().out


def test_train_rejects_full_val_split(tiny_data, tmp_path):
    out = tmp_path / "model.json"
    assert main(train_argv(tiny_data, str(out), ["--val-split", "1.0"])) == 2


def test_train_hmm_kind_warns_and_trains(tiny_data, tmp_path, capsys):
    out = tmp_path / "model.json"
    argv = train_argv(tiny_data, str(out), ["--kind", "hmm", "--epochs", "3"])
    assert main(argv) == 0
    captured = capsys.readouterr()
    assert "ignores the manifold flags" in captured.err
    rows = read_csv(tmp_path / "model_history.csv")
    assert rows[0] == ["iteration", "total_loglik"]


def test_train_windowing_can_empty_the_data(tiny_data, tmp_path):
    # Length-30 sequences, window 50, burn-in 40: remainders all dropped.
    argv = train_argv(tiny_data, str(tmp_path / "m.json"),
                      ["--window", "50", "--burn-in", "40"])
    assert main(argv) == 2


def test_eval_writes_report_and_figure(tiny_data, tmp_path, capsys):
    model_path = tmp_path / "m.json"
    save_model(random_hqmm(2, 2, 1, seed=1), model_path)
    report = tmp_path / "report.csv"
    argv = ["eval", "--model", str(model_path), "--data", tiny_data,
            "--out", str(report)]
    assert main(argv) == 0
    rows = read_csv(report)
    assert rows[0] == ["index", "length", "effective_length",
                       "log_likelihood", "da"]
    assert len(rows) == 9
    assert (tmp_path / "report.png").exists()
    assert "mean DA" in capsys.readouterr().out


def test_eval_uniform_model_scores_zero(tiny_data, tmp_path):
    # One Kraus operator I/sqrt(s) per symbol: every outcome has p = 1/s.
    kraus = np.stack([np.eye(2, dtype=complex)[None] / np.sqrt(2)] * 2)
    model_path = tmp_path / "uniform.json"
    save_model(Hqmm(kraus, np.eye(2, dtype=complex) / 2), model_path)
    report = tmp_path / "report.csv"
    argv = ["eval", "--model", str(model_path), "--data", tiny_data,
            "--out", str(report), "--no-figures"]
    assert main(argv) == 0
    das = [float(row[4]) for row in read_csv(report)[1:]]
    assert np.abs(das).max() < 1e-9


def test_eval_matches_library_scores(tmp_path):
    gen, dataset = gen_synthetic("hqmm", 2, 3, 1, 6, 25, seed=13)
    data_path = tmp_path / "d.ndjson"
    save_dataset(dataset, data_path)
    model_path = tmp_path / "gen.json"
    save_model(gen, model_path)
    report = tmp_path / "report.csv"
    argv = ["eval", "--model", str(model_path), "--data", str(data_path),
            "--out", str(report), "--no-figures"]
    assert main(argv) == 0
    from qgm.metrics import da_scores

    got = np.array([float(row[4]) for row in read_csv(report)[1:]])
    np.testing.assert_allclose(got, da_scores(gen, dataset.sequences),
                               rtol=0, atol=1e-12)


def test_eval_missing_model_is_usage_error(tiny_data, tmp_path):
    argv = ["eval", "--model", str(tmp_path / "nope.json"), "--data", tiny_data]
    assert main(argv) == 2


def test_sample_roundtrip_and_determinism(tmp_path):
    model_path = tmp_path / "m.json"
    save_model(random_hqmm(2, 3, 1, seed=2), model_path)
    outs = []
    for name in ("s1.ndjson", "s2.ndjson"):
        out = tmp_path / name
        argv = ["sample", "--model", str(model_path), "--num", "4",
                "--len", "12", "--seed", "3", "--out", str(out)]
        assert main(argv) == 0
        outs.append(load_dataset(out))
    assert len(outs[0].sequences) == 4
    assert all(seq.size == 12 for seq in outs[0].sequences)
    for one, two in zip(outs[0].sequences, outs[1].sequences):
        assert np.array_equal(one, two)


def test_sample_rejects_bad_counts(tmp_path):
    model_path = tmp_path / "m.json"
    save_model(random_hqmm(2, 2, 1, seed=2), model_path)
    base = ["sample", "--model", str(model_path), "--out",
            str(tmp_path / "s.ndjson"), "--seed", "0"]
    assert main(base + ["--num", "0", "--len", "5"]) == 2
    assert main(base + ["--num", "2", "--len", "0"]) == 2


def test_sample_from_encoded_hmm_matches_source_frequencies(tmp_path):
    from qgm.hqmm import encode_hmm

    rng = np.random.default_rng(14)
    a = rng.random((3, 3))
    c = rng.random((4, 3))
    prior = rng.random(3)
    hmm = Hmm(a / a.sum(axis=0), c / c.sum(axis=0), prior / prior.sum())
    model_path = tmp_path / "enc.json"
    save_model(encode_hmm(hmm), model_path)
    out = tmp_path / "s.ndjson"
    m = 600
    argv = ["sample", "--model", str(model_path), "--num", str(m),
            "--len", "1", "--seed", "7", "--out", str(out)]
    assert main(argv) == 0
    firsts = np.array([seq[0] for seq in load_dataset(out).sequences])
    expected = hmm.emission @ hmm.prior
    for y in range(4):
        freq = (firsts == y).mean()
        sigma = np.sqrt(expected[y] * (1 - expected[y]) / m)
        assert abs(freq - expected[y]) <= 3 * sigma + 1e-9


def test_gradcheck_passes(capsys):
    argv = ["gradcheck", "--n", "2", "--s", "2", "--w", "1", "--len", "6",
            "--trials", "2", "--seed", "0"]
    assert main(argv) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["pass"] is True
    assert report["max_rel_error"] < 1e-5


def test_gradcheck_detects_sabotage(capsys):
    argv = ["gradcheck", "--n", "2", "--s", "2", "--w", "1", "--len", "6",
            "--trials", "1", "--seed", "0", "--sabotage", "1e-3"]
    assert main(argv) == 1
    assert json.loads(capsys.readouterr().out)["pass"] is False


def test_gradcheck_rejects_bad_flags():
    assert main(["gradcheck", "--trials", "0"]) == 2
    assert main(["gradcheck", "--h", "0"]) == 2


def test_classify_with_pretrained_models(labeled_data, tmp_path, capsys):
    paths = []
    for label in (0, 1):
        path = tmp_path / f"class{label}.json"
        save_model(biased_hmm(label), path)
        paths.append(str(path))
    report = tmp_path / "preds.csv"
    argv = ["classify", "--data", labeled_data, "--models", *paths,
            "--out", str(report)]
    assert main(argv) == 0
    assert "accuracy 1.000000" in capsys.readouterr().out
    rows = read_csv(report)
    assert rows[0] == ["index", "truth", "prediction"]
    assert len(rows) == 11


def test_classify_model_count_mismatch(labeled_data, tmp_path):
    path = tmp_path / "only.json"
    save_model(biased_hmm(0), path)
    assert main(["classify", "--data", labeled_data, "--models", str(path)]) == 2


def test_classify_models_and_folds_exclusive(labeled_data, tmp_path):
    path = tmp_path / "m.json"
    save_model(biased_hmm(0), path)
    argv = ["classify", "--data", labeled_data, "--models", str(path), str(path),
            "--folds", "2"]
    assert main(argv) == 2


def test_classify_folds_needs_dimensions(labeled_data):
    assert main(["classify", "--data", labeled_data, "--folds", "2"]) == 2


def test_classify_needs_labels(tiny_data):
    assert main(["classify", "--data", tiny_data, "--folds", "2",
                 "--n", "2", "--s", "2"]) == 2


def test_classify_folds_trains_per_class_models(labeled_data, tmp_path, capsys):
    report = tmp_path / "folds.csv"
    argv = ["classify", "--data", labeled_data, "--folds", "2", "--kind", "hmm",
            "--n", "2", "--s", "2", "--epochs", "5", "--restarts", "1",
            "--seed", "0", "--out", str(report)]
    assert main(argv) == 0
    assert "mean accuracy" in capsys.readouterr().out
    rows = read_csv(report)
    assert rows[0] == ["fold", "accuracy"]
    assert rows[-1][0] == "mean"
    assert float(rows[-1][1]) >= 0.9
    assert (tmp_path / "folds.png").exists()


def test_splice_format_end_to_end(tmp_path, capsys):
    lines = []
    for label, base in (("EI", "A"), ("IE", "C"), ("N", "G")):
        for i in range(2):
            lines.append(f"{label}, record{i}, {base * 20}")
    splice = tmp_path / "mini.splice"
    splice.write_text("\n".join(lines) + "\n")
    out = tmp_path / "m.json"
    argv = ["train", "--data", str(splice), "--format", "splice", "--n", "2",
            "--s", "4", "--epochs", "2", "--seed", "0", "--out", str(out)]
    assert main(argv) == 0
    assert out.exists()


def test_unknown_subcommand_is_usage_error():
    assert main(["frobnicate"]) == 2
    assert main([]) == 2
