import json

import pytest

from ipromp.cli import (EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL, EXIT_OK,
                        _exit_code, main)
from ipromp.errors import (ConfigError, DataContaminationError, DataError,
                           DomainError, NumericalError)

TINY = """
n_demos: 3
experiments: [distinct]
windows:
  dynamic: [1.0]
  static: [0.5]
"""


@pytest.fixture(scope="module")
def tiny_cfg(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.yaml"
    path.write_text(TINY)
    return str(path)


def run_cli(*argv):
    return main(list(argv))


# ------------------------------------------------------------ happy chains

def test_gen_train_predict_chain(tmp_path, tiny_cfg, capsys):
    data = tmp_path / "data"
    assert run_cli("gen", "--config", tiny_cfg, "--seed", "5",
                   "--out-dir", str(data)) == EXIT_OK
    dataset = data / "dataset_distinct.json"
    assert dataset.exists() and (data / "dataset_distinct.npz").exists()

    train = tmp_path / "train"
    assert run_cli("train", "--config", tiny_cfg, "--dataset", str(dataset),
                   "--out-dir", str(train)) == EXIT_OK
    library = train / "library"
    assert (library / "library.json").exists()

    pred = tmp_path / "pred"
    assert run_cli("predict", "--config", tiny_cfg, "--library",
                   str(library), "--dataset", str(dataset),
                   "--demo", "2", "--out-dir", str(pred)) == EXIT_OK
    out = capsys.readouterr().out
    assert "recognized" in out
    trace = (pred / "blend_trace.csv").read_text().splitlines()
    assert trace[0].startswith("experiment,task_id")
    assert len(trace) > 1
    summary = json.loads((pred / "summary.json").read_text())
    assert summary["demo"] == 2
    assert (pred / "prediction.json").exists()


def test_gen_inline_skips_sidecar(tmp_path, tiny_cfg):
    data = tmp_path / "data"
    assert run_cli("gen", "--config", tiny_cfg, "--inline",
                   "--out-dir", str(data)) == EXIT_OK
    assert (data / "dataset_distinct.json").exists()
    assert not (data / "dataset_distinct.npz").exists()


def test_eval_outputs_and_seed_determinism(tmp_path, tiny_cfg):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        assert run_cli("eval", "--config", tiny_cfg, "--seed", "42",
                       "--out-dir", str(out)) == EXIT_OK
    for name in ("aggregate.csv", "records.csv", "window_traces.csv",
                 "differences.csv", "selection.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    info = json.loads((out_a / "run_info.json").read_text())
    assert info["n_failures"] == 0
    assert info["n_records"] == 3 * 3 * 2


def test_report_matches_eval_aggregation(tmp_path, tiny_cfg):
    out = tmp_path / "eval"
    assert run_cli("eval", "--config", tiny_cfg, "--out-dir",
                   str(out)) == EXIT_OK
    rep = tmp_path / "rep"
    assert run_cli("report", "--config", tiny_cfg, "--records",
                   str(out / "records.csv"), "--out-dir",
                   str(rep)) == EXIT_OK
    assert (rep / "aggregate.csv").read_bytes() == \
        (out / "aggregate.csv").read_bytes()
    assert (rep / "selection.json").read_bytes() == \
        (out / "selection.json").read_bytes()


def test_global_flags_accepted_before_the_verb(tmp_path, tiny_cfg):
    data = tmp_path / "data"
    assert run_cli("--config", tiny_cfg, "--out-dir", str(data),
                   "gen") == EXIT_OK
    assert (data / "dataset_distinct.json").exists()


# -------------------------------------------------------------- exit codes

def test_config_error_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("model: {n_basis: 0}\n")
    assert run_cli("eval", "--config", str(bad),
                   "--out-dir", str(tmp_path / "o")) == EXIT_CONFIG
    assert "[E_CONFIG]" in capsys.readouterr().err


def test_data_error_exits_3(tmp_path, capsys):
    assert run_cli("train", "--dataset", str(tmp_path / "absent.json"),
                   "--out-dir", str(tmp_path / "o")) == EXIT_DATA
    assert "[E_DATA]" in capsys.readouterr().err


def test_contaminated_dataset_exits_3_with_nan_code(tmp_path, tiny_cfg,
                                                    capsys):
    data = tmp_path / "data"
    run_cli("gen", "--config", tiny_cfg, "--inline", "--out-dir", str(data))
    path = data / "dataset_distinct.json"
    raw = json.loads(path.read_text())
    raw["demos"][0]["samples"][0][0] = float("nan")
    path.write_text(json.dumps(raw))
    assert run_cli("train", "--dataset", str(path),
                   "--out-dir", str(tmp_path / "o")) == EXIT_DATA
    assert "[E_NAN]" in capsys.readouterr().err


def test_exit_code_mapping_is_total():
    assert _exit_code(ConfigError("x")) == EXIT_CONFIG
    assert _exit_code(DataError("x")) == EXIT_DATA
    assert _exit_code(DataContaminationError("x")) == EXIT_DATA
    assert _exit_code(DomainError("x")) == EXIT_DATA
    assert _exit_code(NumericalError("x")) == EXIT_NUMERICAL


def test_unknown_verb_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
