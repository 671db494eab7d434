import dataclasses
import json

import numpy as np
import pytest

from dads import harness
from dads.agent import EvalRecord, Trainer
from dads.config import ExperimentConfig
from dads.errors import ConfigurationError, InputError
from dads.envs import make_domain_pair


def small(method="dads", seeds=(0,), steps=200, interval=50):
    return ExperimentConfig(seeds=seeds).replace(**{
        "train.method": method, "train.total_steps": steps, "train.seed_steps": 40,
        "train.warmup_steps": 80, "train.batch_size": 16, "train.horizon": 40,
        "sac.hidden": (8, 8), "classifier.hidden": (8, 8), "classifier.batch_size": 16,
        "eval_interval": interval, "eval_episodes": 2})


def test_csv_header_is_exact():
    assert ",".join(harness.CSV_HEADER) == ("step,seed,method,env,overlap,return_mean,return_std,"
                                            "mean_delta_r,mean_priority,cls_loss_theta,cls_loss_phi")
    assert harness.format_csv([]).splitlines() == [",".join(harness.CSV_HEADER)]


def test_csv_round_trip(tmp_path):
    recs = [EvalRecord(5000, 1, "dads", "pendulum", "small", -123.456789, 0.1, 0.5, 1.25, 0.69, float("nan")),
            EvalRecord(10000, 1, "dads", "pendulum", "small", 1 / 3, 0.0)]
    harness.write_csv(tmp_path / "r.csv", recs)
    back = harness.read_csv(tmp_path / "r.csv")
    assert len(back) == 2
    assert back[0].return_mean == recs[0].return_mean and back[1].return_mean == 1 / 3
    assert np.isnan(back[0].cls_loss_phi)


def test_read_csv_rejects_a_foreign_header(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(InputError):
        harness.read_csv(tmp_path / "x.csv")


def test_aggregate_and_final_returns():
    recs = [EvalRecord(s, seed, "m", "e", "o", float(seed + s), 0.0)
            for seed in (0, 1, 2) for s in (10, 20)]
    rows = harness.aggregate(recs)
    assert [(r["step"], r["n"]) for r in rows] == [(10, 3), (20, 3)]
    assert rows[1]["mean"] == pytest.approx(21.0)
    assert rows[1]["std"] == pytest.approx(1.0)
    assert harness.final_returns(recs) == {0: 20.0, 1: 21.0, 2: 22.0}


def test_run_writes_rows_config_and_checkpoints(tmp_path):
    cfg = small(seeds=(0, 1))
    result = harness.run_experiment(cfg, tmp_path / "run")
    assert result.ok
    rows = harness.read_csv(result.csv_path)
    assert len(rows) == 2 * 4
    assert all(r.step % cfg.eval_interval == 0 for r in rows)
    assert (tmp_path / "run" / "config.txt").read_text().startswith("experiment.env = pendulum")
    assert not (tmp_path / "run" / "errors.json").exists()
    for seed in (0, 1):
        assert (tmp_path / "run" / "checkpoints" / f"seed-{seed}.npz").exists()


def test_identical_configs_give_byte_identical_csvs(tmp_path):
    cfg = small()
    a = harness.run_experiment(cfg, tmp_path / "a")
    b = harness.run_experiment(cfg, tmp_path / "b")
    assert a.csv_path.read_bytes() == b.csv_path.read_bytes()


def test_worker_pool_matches_sequential(tmp_path):
    cfg = small(seeds=(0, 1), steps=100)
    a = harness.run_experiment(cfg, tmp_path / "a", workers=1)
    b = harness.run_experiment(cfg, tmp_path / "b", workers=2)
    assert a.csv_path.read_bytes() == b.csv_path.read_bytes()


def test_mid_run_failure_flushes_partial_csv(tmp_path, monkeypatch):
    original = Trainer.step

    def failing(self):
        if self.seed == 1 and self.t == 120:
            raise FloatingPointError("synthetic divergence")
        original(self)

    monkeypatch.setattr(Trainer, "step", failing)
    result = harness.run_experiment(small(seeds=(0, 1)), tmp_path / "run")
    assert not result.ok
    rows = harness.read_csv(result.csv_path)
    assert sorted((r.seed, r.step) for r in rows) == [(0, 50), (0, 100), (0, 150), (0, 200),
                                                      (1, 50), (1, 100)]
    errors = json.loads((tmp_path / "run" / "errors.json").read_text())
    assert errors == [{"seed": 1, "step": 120, "error": "FloatingPointError",
                       "message": "synthetic divergence"}]


def test_invalid_config_is_rejected_before_training(tmp_path):
    bad = dataclasses.replace(ExperimentConfig(), seeds=())
    with pytest.raises(ConfigurationError):
        harness.run_experiment(bad, tmp_path / "run")
    assert not (tmp_path / "run").exists()


def test_ablation_plans():
    base = small()
    mu = harness.plan_ablation(base, "mu")
    assert [c.train.mu for _, c in mu] == [0.0, 1 / 3, 2 / 3, 1.0, 2.0, 4.0]
    assert {c.method for _, c in mu} == {"dads"}
    skew = harness.plan_ablation(base, "skew")
    assert len(skew) == 6
    assert {(c.method, c.overlap) for _, c in skew} == {
        (m, o) for m in ("dads", "dads_no_skew") for o in ("large", "medium", "small")}
    mix = harness.plan_ablation(base, "mixup", overlaps=["small"])
    assert [c.method for _, c in mix] == ["dads", "dads_no_mixup"]
    with pytest.raises(ConfigurationError):
        harness.plan_ablation(base, "alpha")


def test_checkpoint_round_trip(tmp_path):
    cfg = small(steps=100)
    harness.run_experiment(cfg, tmp_path / "run")
    path = tmp_path / "run" / "checkpoints" / "seed-0.npz"
    agent, loaded_cfg, meta = harness.load_checkpoint(path)
    assert loaded_cfg == cfg
    assert meta["seed"] == 0 and meta["step"] == 100
    first = harness.evaluate_checkpoint(path, episodes=3)
    assert first == harness.evaluate_checkpoint(path, episodes=3)
    obs = np.zeros((1, 3))
    assert np.all(np.abs(agent.act(obs, deterministic=True)) <= 2.0)


def test_checkpoint_reproduces_the_trained_policy(tmp_path):
    cfg = small(steps=100)
    trainer = Trainer(cfg.train, make_domain_pair("pendulum", "small"), 0, cfg.sac, cfg.classifier)
    for _ in range(100):
        trainer.step()
    harness.save_checkpoint(tmp_path / "c.npz", trainer, cfg)
    agent, _, _ = harness.load_checkpoint(tmp_path / "c.npz")
    obs = np.random.default_rng(0).standard_normal((5, 3))
    for o in obs:
        np.testing.assert_array_equal(agent.act(o, deterministic=True),
                                      trainer.agent.act(o, deterministic=True))


def test_verify_bounds_report(tmp_path):
    report = harness.verify_bounds(10, seed=3)
    assert len(report.rows) == 20
    assert report.violations == 0
    assert report.max_telescoping_error < 1e-8
    assert all(r.term_B > 0 for r in report.rows if r.kind == "deficient")
    assert all(r.term_B == 0 for r in report.rows if r.kind == "full")
    report.write_csv(tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == ",".join(harness.BOUND_CSV_HEADER) and len(lines) == 21
    assert "violations: full 0, deficient 0" in report.summary()


def test_verify_bounds_with_fixed_sizes():
    report = harness.verify_bounds(4, sizes=[(3, 2), (5, 4)], seed=1)
    assert [(r.n_states, r.n_actions) for r in report.rows[::2]] == [(3, 2), (5, 4)] * 2
    with pytest.raises(ConfigurationError):
        harness.verify_bounds(0)


def test_violation_flag():
    row = harness.BoundRow(0, "full", 3, 2, 0.9, 1.0, 0.5, 0.0, 0.5, 2.0, 0.0)
    assert row.violated
    assert harness.BoundsReport([row]).violations == 1
