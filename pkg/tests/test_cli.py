import csv
import json

import numpy as np
import pytest

from jacobnet.cli import EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from jacobnet.dataset import load_dataset
from jacobnet.metrics import read_reports
from jacobnet.model import load_model
from jacobnet.nn import ALGOS

TINY_TRAIN = ["--epochs", "3", "--pretrain-epochs", "1", "--batch-size", "16"]


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    for variant in ("conf-kine", "jacob-0"):
        assert main(["gen", "--variant", variant, "--num", "48", "--test-ratio", "0.25",
                     "--seed", "4", "--out", str(d)]) == EXIT_OK
    return d


@pytest.fixture(scope="module")
def model(data, tmp_path_factory):
    out = tmp_path_factory.mktemp("model")
    rc = main(["train", "--conf", str(data), "--jacob", str(data), "--kinematic-view",
               "--out", str(out)] + TINY_TRAIN)
    assert rc == EXIT_OK
    return out / "model.jcb"


def test_gen_counts(data):
    for variant, width in (("conf-kine", 24), ("jacob-0", 96)):
        tr, te = load_dataset(data, variant, "train"), load_dataset(data, variant, "test")
        assert (len(tr), len(te)) == (36, 12)
        assert tr.features.shape[1] == width
    meta = json.loads((data / "conf_meta.json").read_text())
    assert meta["num"] == 48 and meta["seed"] == 4


def test_gen_idempotent(data, tmp_path):
    assert main(["gen", "--variant", "conf-kine", "--num", "48", "--test-ratio", "0.25",
                 "--seed", "4", "--out", str(tmp_path)]) == EXIT_OK
    for name in ("conf_feature_train.csv", "conf_label_test.csv"):
        assert (tmp_path / name).read_bytes() == (data / name).read_bytes()


def test_gen_output_env(tmp_path, monkeypatch):
    monkeypatch.setenv("JACOBNET_OUTPUT_DIR", str(tmp_path))
    assert main(["gen", "--variant", "conf-kine", "--num", "5", "--test-ratio", "0.2"]) == EXIT_OK
    assert (tmp_path / "conf_feature_test.csv").exists()


def test_usage_errors():
    for argv in (["gen", "--variant", "bogus", "--num", "5"], ["gen", "--num", "5"],
                 ["train"], ["optbench", "--target", "est"], []):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == EXIT_USAGE


def test_missing_input_is_data_error(tmp_path):
    assert main(["train", "--jacob", str(tmp_path / "none"), "--out", str(tmp_path)]) == EXIT_DATA
    assert main(["eval", "--model", str(tmp_path / "none.jcb"), "--conf", str(tmp_path),
                 "--out", str(tmp_path)]) == EXIT_DATA


def test_width_mismatch_is_data_error(data, tmp_path):
    # 24-wide confidence rows against 96-wide Jacobian rows
    rc = main(["train", "--conf", str(data), "--jacob", str(data), "--out", str(tmp_path)]
              + TINY_TRAIN)
    assert rc == EXIT_DATA


def test_corrupt_model_is_data_error(data, tmp_path):
    bad = tmp_path / "bad.jcb"
    bad.write_bytes(b"garbage")
    assert main(["eval", "--model", str(bad), "--conf", str(data),
                 "--out", str(tmp_path)]) == EXIT_DATA


def test_unwritable_output_is_io_error(data, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    rc = main(["gen", "--variant", "conf-kine", "--num", "5", "--test-ratio", "0.2",
               "--out", str(blocker / "sub")])
    assert rc == EXIT_IO


def test_train_outputs(model):
    m = load_model(model)
    assert m.input_dim == 24
    with open(model.parent / "history.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["phase"] for r in rows] == ["pretrain", "conf", "conf", "est"]


def test_eval_reports(data, model, tmp_path):
    rc = main(["eval", "--model", str(model), "--conf", str(data), "--jacob", str(data),
               "--kinematic-view", "--baselines", "--repetitions", "3", "--ik-timing", "2",
               "--out", str(tmp_path)])
    assert rc == EXIT_OK
    conf = read_reports(tmp_path / "conf_report.csv")
    assert [r["Method"] for r in conf] == ["NN(.25)", "NN(.5)", "NN(.75)", "Logistic",
                                           "Linear", "Ridge", "IK"]
    for r in conf[:6]:
        assert float(r["JSC"]) + float(r["0-1"]) == pytest.approx(1.0)
    est = read_reports(tmp_path / "est_report.csv")
    assert [r["Method"] for r in est] == ["NN", "Linear", "Ridge"]


def test_workspace_outputs(model, tmp_path):
    rc = main(["workspace", "--model", str(model), "--resolution", "3", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    rep = json.loads((tmp_path / "workspace_report.json").read_text())
    assert sum(rep[k] for k in ("true_pos", "false_pos", "false_neg", "true_neg")) == 27
    assert (tmp_path / "workspace_ik.rle").exists() and (tmp_path / "workspace_nn.csv").exists()


def test_optbench_curves(data, tmp_path):
    rc = main(["optbench", "--jacob", str(data), "--kinematic-view", "--epochs", "2",
               "--batch-size", "16", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    files = sorted(tmp_path.glob("optbench_est_*.csv"))
    assert len(files) == len(ALGOS) == 7
    starts = set()
    for f in files:
        with open(f) as fh:
            rows = list(csv.DictReader(fh))
        assert [int(r["epoch"]) for r in rows] == [0, 1, 2]
        assert np.isfinite([float(r["train_loss"]) for r in rows]).all()
        starts.add(rows[0]["train_loss"])
    assert len(starts) == 1
