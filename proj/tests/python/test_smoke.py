import json
import math

import pytest

import diga


def test_exchange_matches_and_reports_book():
    x = diga.Exchange()
    assert x.submit(1, 0.0, 10.00, 5, buy=False) == []
    fills = x.submit(2, 1.0, 10.01, 3, buy=True)
    assert fills == [(pytest.approx(10.00), 3, 2, 1)]
    assert x.best_ask() == (pytest.approx(10.00), 2)
    assert x.best_bid() is None
    assert x.oir() == -1.0
    assert x.cancel(1)
    assert x.resting_volume == 0


def test_demand_and_lowest_price():
    assert diga.demand(10.0, 10.0, 0.1, 1e-4) == 0.0
    pl = diga.solve_lowest_price(20.0, 500.0, 10.0, 0.25, 1e-5)
    assert pl is not None and 0.0 < pl < 10.0
    resid = pl * (diga.demand(pl, 10.0, 0.25, 1e-5) - 20.0) - 500.0
    assert abs(resid) < 1e-6


def test_metrics():
    xs = [math.sin(0.3 * i) for i in range(200)]
    assert diga.kl_divergence(xs, xs) == 0.0
    assert diga.autocorr(xs, 1) > 0.9
    prices = [10.0 * math.exp(0.01 * math.sin(i)) for i in range(13)]
    oir = [0.25] * 12
    f = diga.facts(prices, oir)
    assert len(f["minr"]) == 12 and f["oir"] == oir
    assert len(f["retac"]) == len(f["volc"]) == 5
    ind = diga.indicators([10.0, 11.0, 10.0])
    assert ind["return"] == pytest.approx(0.0, abs=1e-15)


def test_generate_day_is_deterministic():
    days = diga.synth_corpus(3, days=2, minutes=30)
    r, lam = days[0]
    a = diga.generate_day(r, lam, seed=5)
    b = diga.generate_day(r, lam, seed=5)
    assert a == b
    assert len(a["minute_prices"]) == 31
    assert a["orders"] > 0


def test_config_errors_raise():
    with pytest.raises(diga.ConfigError):
        diga.config_json('{"model": {"nope": 1}}')
    with pytest.raises(diga.InputError):
        diga.config_json("{not json")
    cfg = json.loads(diga.config_json("{}"))
    assert cfg["agent"]["risk"] == "variance"


def test_train_and_sample_tiny_model(tmp_path):
    cfg = json.dumps({
        "model": {"base_width": 8, "multipliers": [1, 2], "res_blocks": 1, "kernel": 3,
                  "embed_dim": 16, "cond_hidden": 8, "attention": False},
        "schedule": {"steps": 20, "beta_start": 1e-3, "beta_end": 0.2},
        "train": {"epochs": 1, "batch_size": 8, "lr": 1e-3},
    })
    days = diga.synth_corpus(1, days=40, minutes=16)
    model, losses = diga.Model.train(days, cfg, seed=2)
    assert len(losses) == 5 and all(math.isfinite(v) for v in losses)
    states = model.sample(median=4, scale=2.0, count=3, seed=9, ddim_steps=5)
    assert len(states) == 3
    assert all(len(s["returns"]) == 16 and s["class"] == 4 for s in states)
    path = tmp_path / "m.ckpt"
    model.save(path)
    again = diga.Model.load(path).sample(median=4, scale=2.0, count=3, seed=9, ddim_steps=5)
    assert again == states
    with pytest.raises(diga.ConfigError):
        model.sample(cls=1)
