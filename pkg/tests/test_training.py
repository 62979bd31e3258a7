import numpy as np
import pytest

from mftp.config import Config, ModelConfig, TrainingConfig, DataConfig
from mftp.data import GenConfig
from mftp.model import TrajectoryPredictor
from mftp.tensor import Tensor
from mftp.training import (
    Adam,
    _batch_indices,
    build_training_items,
    load_checkpoint,
    load_training_scenarios,
    save_checkpoint,
    train,
)


def _tiny_config(steps=5, **model_overrides):
    model = dict(channels=8, d_patch=8, n_heads=2, n_modes=2, refine_rounds=1,
                 n_experts=2, t_history=8, t_future=4, patch_len=4,
                 granularities=[[2, 1], [8, 8]])
    model.update(model_overrides)
    return Config(
        model=ModelConfig(**model),
        training=TrainingConfig(steps=steps, learning_rate=1e-3, batch_size=4, seed=0),
        data=DataConfig(synthetic=GenConfig(num_scenarios=2, num_agents=2,
                                            t_history=8, t_future=4)),
    )


def test_adam_minimizes_quadratic():
    x = Tensor(np.array([5.0, -3.0]), requires_grad=True)
    opt = Adam({"x": x}, lr=0.1)
    for _ in range(300):
        opt.zero_grad()
        (x * x).sum().backward()
        opt.step()
    assert np.max(np.abs(x.data)) <= 1e-3


def test_batch_indices_round_robin():
    assert _batch_indices(0, 3, 5) == [0, 1, 2]
    assert _batch_indices(1, 3, 5) == [3, 4, 0]
    assert _batch_indices(2, 3, 5) == [1, 2, 3]
    assert _batch_indices(0, 8, 5) == [0, 1, 2, 3, 4]


def test_build_items_rejects_padded_target_future():
    cfg = _tiny_config()
    scenarios = load_training_scenarios(cfg)
    scenarios[0].agents[0].future[1, 2] = 0.0
    with pytest.raises(ValueError, match="padded"):
        build_training_items(scenarios)


def test_training_improves_loss():
    cfg = _tiny_config(steps=60)
    result = train(cfg)
    assert result.last_report.total < result.first_report.total


def test_training_deterministic_same_seed():
    cfg = _tiny_config(steps=8)
    a = train(cfg)
    b = train(cfg)
    assert a.log_lines == b.log_lines


def test_training_zero_steps_checkpoint_equals_init(tmp_path):
    cfg = _tiny_config(steps=0)
    out = str(tmp_path / "ckpt")
    train(cfg, out_dir=out)
    model, loaded_cfg, step = load_checkpoint(out)
    assert step == 0
    fresh = TrajectoryPredictor(cfg.model, seed=cfg.training.seed)
    for (name, p), (name2, q) in zip(model.parameters().items(),
                                     fresh.parameters().items()):
        assert name == name2
        assert np.array_equal(p.data, q.data), name


def test_checkpoint_roundtrip_bitwise_forward(tmp_path):
    cfg = _tiny_config(steps=4)
    out = str(tmp_path / "ckpt")
    result = train(cfg, out_dir=out)
    model2, _, _ = load_checkpoint(out)

    rng = np.random.default_rng(0)
    hist = rng.normal(size=(1, 2, 8, 3))
    hist[..., 2] = 1.0
    valid = np.ones((1, 2), dtype=bool)
    t1, p1 = result.model.forward(hist, valid, np.array([0]))
    t2, p2 = model2.forward(hist, valid, np.array([0]))
    assert np.array_equal(t1.data, t2.data)
    assert np.array_equal(p1.data, p2.data)


def test_checkpoint_rejects_shape_mismatch(tmp_path):
    cfg = _tiny_config(steps=0)
    out = str(tmp_path / "ckpt")
    model = TrajectoryPredictor(cfg.model, seed=0)
    save_checkpoint(out, model, cfg, step=0)

    import json, os
    manifest_path = os.path.join(out, "manifest.json")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    manifest["params"][0]["shape"] = [1, 1]
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh)
    with pytest.raises(ValueError, match="shape"):
        load_checkpoint(out)


def test_checkpoint_files_identical_across_runs(tmp_path):
    cfg = _tiny_config(steps=3)
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    train(cfg, out_dir=out_a)
    train(cfg, out_dir=out_b)
    for name in ("params.bin", "train_log.txt"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b, name
