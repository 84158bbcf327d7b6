import numpy as np
import pytest
import torch

from evrestore.dataset import SceneSpec, generate_scene
from evrestore.errors import ValidationError
from evrestore.model import FusionNet, NetworkConfig
from evrestore.simulator import SimulatorConfig
from evrestore.train import TrainConfig, lr_at_epoch, train

MICRO_NET = NetworkConfig(base_channels=2)


@pytest.fixture(scope="module")
def tiny_dataset():
    spec = SceneSpec(height=16, width=16)
    return [generate_scene(spec, SimulatorConfig(seed=20 + i)) for i in range(2)]


class TestSchedule:
    def test_initial_epochs_keep_base_lr(self):
        cfg = TrainConfig()
        for epoch in range(5):
            assert lr_at_epoch(cfg, epoch) == 1e-4

    def test_decay_every_five_epochs(self):
        cfg = TrainConfig()
        assert lr_at_epoch(cfg, 10) == pytest.approx(1e-4 * 0.98 ** 2)
        assert lr_at_epoch(cfg, 37) == pytest.approx(1e-4 * 0.98 ** 7)

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            TrainConfig(alpha=-1.0)
        with pytest.raises(ValidationError):
            TrainConfig(lr=0.0)


class TestTrainLoop:
    def test_zero_epochs_returns_initial_state(self, tiny_dataset):
        cfg = TrainConfig(epochs=0, seed=11)
        model, report = train(tiny_dataset, MICRO_NET, cfg)
        torch.manual_seed(11)
        fresh = FusionNet(MICRO_NET)
        for a, b in zip(model.state_dict().values(),
                        fresh.state_dict().values()):
            assert torch.equal(a, b)
        assert report.rows == []

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValidationError):
            train([], MICRO_NET, TrainConfig(epochs=1))

    def test_reproducible_checkpoints(self, tiny_dataset, tmp_path):
        cfg = TrainConfig(epochs=2, batch_size=2, seed=3, lr=1e-3)
        train(tiny_dataset, MICRO_NET, cfg, out_dir=tmp_path / "a")
        train(tiny_dataset, MICRO_NET, cfg, out_dir=tmp_path / "b")
        a = (tmp_path / "a" / "final.czn").read_bytes()
        b = (tmp_path / "b" / "final.czn").read_bytes()
        assert a == b

    def test_report_rows_and_csv(self, tiny_dataset, tmp_path):
        cfg = TrainConfig(epochs=2, batch_size=2, seed=4)
        _, report = train(tiny_dataset, MICRO_NET, cfg)
        assert len(report.rows) == 2
        for row in report.rows:
            assert all(np.isfinite(row[k]) for k in
                       ("l_md", "l_esr", "l_att", "l_total", "lr", "psnr_train"))
            assert row["l_total"] == pytest.approx(
                row["l_md"] + row["l_esr"] + row["l_att"])
        report.write_csv(tmp_path / "r.csv")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == "epoch,l_md,l_esr,l_att,l_total,lr,psnr_train"
        assert len(lines) == 3

    def test_max_steps_caps_training(self, tiny_dataset):
        cfg = TrainConfig(epochs=50, batch_size=2, seed=5, max_steps=3)
        _, report = train(tiny_dataset, MICRO_NET, cfg)
        assert len(report.rows) == 3  # one step per epoch at batch size 2

    def test_checkpoints_written_per_epoch(self, tiny_dataset, tmp_path):
        cfg = TrainConfig(epochs=2, batch_size=2, seed=6)
        train(tiny_dataset, MICRO_NET, cfg, out_dir=tmp_path)
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == ["epoch_000.czn", "epoch_001.czn", "final.czn"]

    def test_training_changes_parameters(self, tiny_dataset):
        cfg = TrainConfig(epochs=1, batch_size=2, seed=7, lr=1e-3)
        model, _ = train(tiny_dataset, MICRO_NET, cfg)
        torch.manual_seed(7)
        fresh = FusionNet(MICRO_NET)
        changed = any(not torch.equal(a, b)
                      for a, b in zip(model.state_dict().values(),
                                      fresh.state_dict().values()))
        assert changed
