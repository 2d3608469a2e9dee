import json

import numpy as np
import pytest
import torch

from nninverse.data import EgmDataset, SampleInput, noise_seed, save_field
from nninverse.model import ModelSpec, build_model
from nninverse.train import (TrainConfig, cross_validate, evaluate_rmse,
                             predict_field, rmse_loss, train)


@pytest.fixture(scope="module")
def data(quick_pipeline):
    return EgmDataset(quick_pipeline / "dataset")


class TestDataset:
    def test_manifest_parsed(self, data):
        assert data.n_points == 5
        assert data.rows == data.cols == 8
        assert len(data) == 8 * 6  # 8 sims x 6 samples
        assert data.target_size == 96

    def test_fold_split_disjoint(self, data):
        train_sims, test_sims = data.fold_split("0", "HeI")
        assert not set(train_sims) & set(test_sims)
        assert sorted(train_sims + test_sims) == data.sim_ids("HeI")

    def test_mode_filter(self, data):
        assert data.sim_ids("HeI") == data.sim_ids("C")
        assert data.sim_ids("HoA") == []

    def test_sample_input_shapes(self, data):
        s = data.sample_input(0)
        assert s.x.shape == (7, 8, 8)  # N + 2 coordinate channels
        bare = data.sample_input(0, coordconv=False)
        assert bare.x.shape == (5, 8, 8)

    def test_noise_deterministic_per_epoch(self, data):
        a = data.sample_input(3, epoch=2)
        b = data.sample_input(3, epoch=2)
        c = data.sample_input(3, epoch=5)
        clean = data.sample_input(3)
        assert np.array_equal(a.x, b.x)
        assert not np.array_equal(a.x, c.x)
        assert not np.array_equal(a.x, clean.x)
        # noise hits the coordinate channels too
        assert not np.array_equal(a.x[-2:], clean.x[-2:])

    def test_noise_seed_convention(self):
        assert noise_seed(1, 2, 3) != noise_seed(1, 3, 2)
        assert noise_seed(0, 0, 0) == noise_seed(0, 0, 0)

    def test_targets_spd_components(self, data):
        t = data.target(data.sim_ids()[0])
        assert t.shape == (3, 96, 96)
        assert np.all(t[0] > 0) and np.all(t[1] > 0)
        assert np.all(t[0] * t[1] - t[2] ** 2 > 0)


class TestTrainLoop:
    def test_zero_lr_keeps_loss_constant(self, data):
        torch.manual_seed(0)
        model = build_model(ModelSpec(), data.n_points)
        idx = data.indices_of(data.sim_ids()[:4])
        data_nonoise = EgmDataset(data.root)
        data_nonoise.noise_sigma = 0.0
        cfg = TrainConfig(epochs=3, lr=0.0, batch_size=len(idx), seed=0)
        curves = train(model, data_nonoise, idx, cfg)
        losses = [c["train_rmse"] for c in curves]
        assert losses[0] == pytest.approx(losses[1], rel=1e-12)
        assert losses[1] == pytest.approx(losses[2], rel=1e-12)

    def test_loss_decreases_on_small_set(self, data):
        torch.manual_seed(1)
        model = build_model(ModelSpec(), data.n_points)
        idx = data.indices_of(data.sim_ids()[:2])
        cfg = TrainConfig(epochs=30, batch_size=8, seed=1)
        curves = train(model, data, idx, cfg)
        assert curves[-1]["train_rmse"] < 0.6 * curves[0]["train_rmse"]

    def test_divergence_raises(self, data):
        torch.manual_seed(2)
        model = build_model(ModelSpec(), data.n_points)
        idx = data.indices_of(data.sim_ids()[:2])
        cfg = TrainConfig(epochs=50, lr=1e6, batch_size=8)
        with pytest.raises(RuntimeError, match="diverged"):
            train(model, data, idx, cfg)

    def test_validation_metric_reported(self, data):
        torch.manual_seed(3)
        model = build_model(ModelSpec(), data.n_points)
        tr, te = data.fold_split("0")
        cfg = TrainConfig(epochs=2, batch_size=16)
        curves = train(model, data, data.indices_of(tr), cfg,
                       val_indices=data.indices_of(te))
        assert all("val_rmse" in c and np.isfinite(c["val_rmse"]) for c in curves)


class TestPredictField:
    def make_model(self, data):
        torch.manual_seed(4)
        return build_model(ModelSpec(), data.n_points)

    def test_single_sample_equals_model_output(self, data):
        model = self.make_model(data)
        s = data.sample_input(0)
        got = predict_field(model, [s], target_scale=1000.0)
        model.eval()
        with torch.no_grad():
            want = model(torch.from_numpy(s.x).float().unsqueeze(0))[0, :3].numpy()
        assert np.allclose(got, want / 1000.0, atol=1e-7)

    def test_duplicated_samples_do_not_change_mean(self, data):
        model = self.make_model(data)
        s = data.sample_input(0)
        once = predict_field(model, [s])
        thrice = predict_field(model, [s, s, s])
        assert np.allclose(once, thrice, atol=1e-6)

    def test_matches_scalar_average(self, data):
        model = self.make_model(data)
        sid = data.sim_ids()[0]
        inputs = [data.sample_input(i) for i in data.indices_of([sid])]
        got = predict_field(model, inputs)
        model.eval()
        with torch.no_grad():
            outs = [model(torch.from_numpy(s.x).float().unsqueeze(0))[0, :3].numpy()
                    for s in inputs]
        want = np.mean(outs, axis=0) / 1000.0
        assert np.allclose(got, want, rtol=1e-6, atol=1e-9)

    def test_mixed_sims_rejected(self, data):
        model = self.make_model(data)
        a = data.sample_input(0)
        b = SampleInput(sim_id=a.sim_id + 1, x=a.x)
        with pytest.raises(ValueError, match="mixed"):
            predict_field(model, [a, b])

    def test_empty_rejected(self, data):
        with pytest.raises(ValueError):
            predict_field(self.make_model(data), [])


class TestCrossValidate:
    def test_fold_records_and_files(self, data, quick_pipeline, tmp_path):
        cfg = TrainConfig(epochs=2, batch_size=16, mode="HeI", seed=0)
        summary = cross_validate(quick_pipeline / "dataset", quick_pipeline,
                                 tmp_path, cfg)
        assert len(summary["folds"]) == 2
        for fold in summary["folds"]:
            assert 0.0 <= fold["mean_jaccard"] <= 1.0
        assert (tmp_path / "curves_fold_0.csv").exists()
        assert (tmp_path / "fold_0_eval.json").exists()
        assert (tmp_path / "crossval.json").exists()
        # predictions are written in the pipeline field format
        preds = sorted((tmp_path / "fold_0" / "preds").glob("sim_*.field.json"))
        assert preds
        doc = json.loads(preds[0].read_text())
        assert doc["kind"] == "tensor_field"
        assert doc["components"] == ["d_xx", "d_yy", "d_xy"]

    def test_test_sims_never_in_training(self, data):
        for fold in data.folds:
            tr, te = data.fold_split(fold)
            assert not set(tr) & set(te)


def test_save_field_roundtrip(tmp_path):
    comps = np.random.default_rng(0).uniform(1e-4, 1e-3, (3, 96, 96))
    save_field(tmp_path / "sim_0000.field", comps, dx_cm=0.03125)
    raw = np.fromfile(tmp_path / "sim_0000.field.raw", dtype="<f4").reshape(3, 96, 96)
    assert np.allclose(raw, comps, atol=1e-9)
    doc = json.loads((tmp_path / "sim_0000.field.json").read_text())
    assert doc["dx_cm"] == 0.03125
