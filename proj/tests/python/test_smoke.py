import json
import math
import pathlib

import numpy as np
import pytest

import ebmnm

SCHEMA = pathlib.Path(__file__).resolve().parents[2] / "docs" / "eval_report.schema.json"


def test_standard_normal_loglik():
    data = ebmnm.Dataset(np.zeros((1, 1)), np.eye(1))
    prior = ebmnm.MixturePrior(np.ones(1), [np.zeros((1, 1))])
    assert ebmnm.log_likelihood(data, prior) == pytest.approx(-0.5 * math.log(2 * math.pi), rel=1e-15)


def test_invalid_noise_raises():
    with pytest.raises(ebmnm.EbmnmError):
        ebmnm.Dataset(np.ones((2, 2)), np.diag([1.0, -0.1]))
    with pytest.raises(ValueError):
        ebmnm.MixturePrior(np.array([0.6, 0.5]), [np.eye(2), np.eye(2)])


def test_fit_and_summarize_hybrid():
    sim = ebmnm.simulate("hybrid", n=500, n_test=500, R=5, seed=3)
    init = ebmnm.random_init(5, 10, seed=1)
    res = ebmnm.fit(sim["train"], init, algorithm="ted", penalty="iw", warm_start=20)
    objs = [o for _, o, _ in res["trace"]]
    assert all(b >= a - 1e-8 for a, b in zip(objs, objs[1:]))
    prior = res["prior"]
    assert prior.K == 10
    assert prior.pi.sum() == pytest.approx(1.0)

    summary = ebmnm.summarize(sim["train"], prior)
    assert summary["mean"].shape == (500, 5)
    assert ((summary["lfsr"] >= 0) & (summary["lfsr"] <= 1)).all()

    truth = sim["prior"]
    assert ebmnm.kl_divergence(sim["test"], truth, truth) == 0.0
    fsr, count = ebmnm.empirical_fsr(summary["mean"], summary["lfsr"], sim["theta"], 0.0)
    assert (fsr, count) == (0.0, 0)


def test_prior_json_round_trip():
    prior = ebmnm.random_init(3, 4, seed=2)
    back = ebmnm.MixturePrior.from_json(prior.to_json())
    for a, b in zip(prior.U, back.U):
        np.testing.assert_array_equal(a, b)
    assert json.loads(prior.to_json())["K"] == 4


def test_solver_examples():
    theta = 0.7
    Q = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    x = np.vstack([math.sqrt(6.0) * Q[:, 0], math.sqrt(1.0) * Q[:, 1]])
    data = ebmnm.Dataset(x, np.eye(2))
    U = ebmnm.ted_update(data, np.ones(2), np.zeros((2, 2)))
    np.testing.assert_allclose(U, 2.0 * np.outer(Q[:, 0], Q[:, 0]), atol=1e-12)

    S = x.T @ x / 2
    U_ed = ebmnm.ed_update(data, np.ones(2), np.eye(2))
    np.testing.assert_allclose(U_ed, np.eye(2) / 2 + S / 4, atol=1e-12)

    U14 = np.diag([1.0, 4.0])
    assert ebmnm.scale_factor_update(U14, "iw") == pytest.approx(1.6)
    assert ebmnm.scale_factor_update(U14, "nn") == pytest.approx(2.0)


def test_ted_rejects_heteroskedastic_noise():
    data = ebmnm.Dataset(np.ones((2, 2)), [np.eye(2), np.eye(2)])
    with pytest.raises(ebmnm.EbmnmError):
        ebmnm.fit(data, ebmnm.random_init(2, 1), algorithm="ted")
    res = ebmnm.fit(data, ebmnm.random_init(2, 1), algorithm="ed", max_iterations=5)
    assert res["iterations"] >= 1


def test_report_schema_file_is_valid():
    jsonschema = pytest.importorskip("jsonschema")
    schema = json.loads(SCHEMA.read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    report = {
        "klDivergence": 0.0,
        "threshold": 0.05,
        "empiricalFSR": 0.0,
        "significantCount": 0,
        "powerFsrCurve": [{"threshold": 0.05, "power": 0.0, "fsr": 0.0, "significant": 0}],
    }
    jsonschema.validate(report, schema)
