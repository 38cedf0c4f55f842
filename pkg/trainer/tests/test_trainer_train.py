import numpy as np
import pytest
import torch
from click.testing import CliRunner
from PIL import Image

from propforge_trainer import cli, infer_dir
from propforge_trainer.model import NetConfig
from propforge_trainer.train import TrainConfig, train

from test_trainer_data import write_toy_dataset

runner = CliRunner()


def toy_cfg(data_dir, **kw):
    base = dict(data_dir=str(data_dir), epochs=2, batch_size=4, seed=0,
                net=NetConfig(base=4, stages=1, blocks=1))
    base.update(kw)
    return TrainConfig(**base)


def test_train_history_and_determinism(tmp_path):
    write_toy_dataset(tmp_path, 8, size=16, label_value=60)
    h1 = train(toy_cfg(tmp_path), log=None)[1]
    h2 = train(toy_cfg(tmp_path), log=None)[1]
    assert len(h1) == 2
    assert h1 == h2


def test_zero_label_convergence(tmp_path):
    write_toy_dataset(tmp_path, 8, size=16, label_value=0)
    model, hist = train(toy_cfg(tmp_path, epochs=30, lr=1e-2), log=None)
    assert hist[-1] < hist[0]
    x = torch.randn(1, 1, 16, 16)
    with torch.no_grad():
        assert float(model(x).mean()) < 0.05


def test_train_validates_config(tmp_path):
    write_toy_dataset(tmp_path, 8, size=16)
    with pytest.raises(ValueError):
        train(toy_cfg(tmp_path, epochs=0), log=None)


def test_infer_dir_counts_and_names(tmp_path):
    write_toy_dataset(tmp_path / "d", 6, size=16)
    model, _ = train(toy_cfg(tmp_path / "d", epochs=1), log=None)
    paths = infer_dir(model, tmp_path / "d", tmp_path / "p", indices=[1, 4])
    assert [p.name for p in paths] == ["000001.pred.png", "000004.pred.png"]
    with Image.open(paths[0]) as im:
        arr = np.asarray(im)
    assert arr.dtype == np.uint8 and arr.shape == (16, 16)


def test_cli_train_and_infer_end_to_end(tmp_path):
    write_toy_dataset(tmp_path / "d", 10, size=16, label_value=60)
    r = runner.invoke(cli.main, [
        "train", "--data", str(tmp_path / "d"), "--out", str(tmp_path / "m"),
        "--epochs", "1", "--batch", "4", "--base", "4", "--stages", "1",
        "--blocks", "1"])
    assert r.exit_code == 0, r.output
    assert (tmp_path / "m" / "model.pt").exists()
    assert (tmp_path / "m" / "loss.csv").read_text().startswith("epoch,loss")
    r = runner.invoke(cli.main, [
        "infer", "--model", str(tmp_path / "m" / "model.pt"),
        "--data", str(tmp_path / "d"), "--out", str(tmp_path / "p"),
        "--split", "val"])
    assert r.exit_code == 0, r.output
    assert sorted(p.name for p in (tmp_path / "p").iterdir()) == [
        "000009.pred.png"]


def test_cli_train_bad_data_exit_1(tmp_path):
    (tmp_path / "empty").mkdir()
    r = runner.invoke(cli.main, ["train", "--data", str(tmp_path / "empty"),
                                 "--out", str(tmp_path / "m")])
    assert r.exit_code == 1
