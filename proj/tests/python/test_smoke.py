import math

import numpy as np
import pytest

import emrl


def test_urn_probability_and_draws():
    assert emrl.fresh_draw_probability(1.0, 0) == 1.0
    assert emrl.fresh_draw_probability(2.0, 6) == pytest.approx(0.25)
    fresh, ids = emrl.urn_fresh_draws(1.0, 200, seed=3)
    assert fresh[0] and len(fresh) == 200
    assert sum(fresh) == len(set(ids))


def test_dnd_roundtrip():
    d = emrl.Dnd(3, 2, k=1)
    d.write(np.array([1.0, 0.0, 0.0]), np.array([5.0, 6.0]))
    d.write(np.array([0.0, 1.0, 0.0]), np.array([7.0, 8.0]))
    assert len(d) == 2
    np.testing.assert_array_equal(d.read(np.array([0.9, 0.1, 0.0])), [5.0, 6.0])
    hit = d.lookup(np.array([0.0, 2.0, 0.0]))
    assert hit["neighbors"] == [1]
    assert emrl.cosine_distance(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == pytest.approx(2.0)
    with pytest.raises(Exception):
        d.read(np.zeros(4))


def test_eplstm_zero_memory_has_no_effect():
    p = emrl.EpLstmParams.random(4, 5, seed=2)
    xs = [np.random.default_rng(0).normal(size=4) for _ in range(6)]
    h0, c0, _ = emrl.eplstm_unroll(p, xs, [np.zeros(5)] * 6)
    h1, c1, r = emrl.eplstm_unroll(p, xs, [np.ones(5)] * 6)
    assert len(h0) == 6 and len(r) == 6
    assert not np.allclose(c0[-1], c1[-1])
    assert all(np.all((g > 0) & (g < 1)) for g in r)


def test_baselines():
    assert emrl.gittins_index(1, 1, 1) == 0.5
    assert abs(emrl.gittins_index(1, 1, 2) - 5 / 9) < 1e-4
    assert emrl.ucb_select([1, 0], [1.0, 0.0], 1) == 1
    ucb = emrl.baseline_regret("ucb", "barcode", epochs=1)
    assert len(ucb) == 100 and all(abs(v - 7.2) < 1e-9 for v in ucb)


def test_statistics():
    t, df, p = emrl.welch_ttest([1, 2, 3, 4], [1, 2, 3, 4])
    assert t == 0 and p == pytest.approx(1.0)
    rho, p = emrl.spearman([1, 2, 3, 4], [4, 3, 2, 1])
    assert rho == pytest.approx(-1.0) and p == pytest.approx(1 / 12)
    rng = np.random.default_rng(1)
    x = rng.choice([-1.0, 1.0], size=(4000, 4))
    z = 1.5 * x[:, 0]
    y = (rng.random(4000) < 1 / (1 + np.exp(-z))).astype(int).tolist()
    fit = emrl.fit_logistic(x, y)
    assert fit["converged"]
    assert abs(fit["beta"][1] - 1.5) < 0.2
    assert emrl.choice_terms == ["intercept", "IMF", "IMB", "EMF", "EMB"]


def test_config_and_training(tmp_path):
    assert "barcode_desk" in emrl.preset_names()
    assert emrl.config_hash("barcode", {"experiment.seed": "1"}) == emrl.config_hash("barcode", {"experiment.seed": "9"})
    with pytest.raises(emrl.ConfigError):
        emrl.config_text("barcode", {"agent.hiden": "3"})
    overrides = {"train.epochs": "3", "agent.hidden": "8", "eval.epochs": "2", "experiment.out": str(tmp_path)}
    summary = emrl.train_and_evaluate("barcode_desk", overrides)
    assert summary["episodes"] == 72
    assert summary["fingerprint_before"] == summary["fingerprint_after"]
    assert math.isfinite(summary["mean_return"])
    rc, log = emrl.run_train("barcode_desk", overrides)
    assert rc == 0 and "eval:" in log
    assert (tmp_path / "metrics.csv").exists()
    assert (tmp_path / "analysis" / "regret_by_exposure.csv").exists()
