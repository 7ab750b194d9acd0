import numpy as np
import pytest
from scipy import stats

from helpers import random_deviation, random_model, random_pd
from llrdetect.detector import (
    Decision,
    LlrAccumulator,
    decide,
    detect_anomaly,
    hypothesis_covariances,
    prepare_hypotheses,
    update,
)
from llrdetect.errors import NotPositiveDefiniteError, StructuralError
from llrdetect.simulate import SimConfig, simulate_outputs


def test_increment_is_log_density_ratio(rng):
    sa, sb = random_pd(rng, 3), random_pd(rng, 3)
    pair = prepare_hypotheses(sa, sb)
    y = rng.standard_normal((20, 3))
    ref = stats.multivariate_normal(cov=sa).logpdf(y) - stats.multivariate_normal(cov=sb).logpdf(y)
    np.testing.assert_allclose(pair.increments(y), ref, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(pair.swapped().increments(y), -ref, rtol=1e-10, atol=1e-12)


def test_streaming_equals_batch(rng):
    pair = prepare_hypotheses(random_pd(rng, 2), random_pd(rng, 2))
    y = rng.standard_normal((200, 2))
    acc = LlrAccumulator(pair)
    for row in y:
        update(acc, row)
    path = LlrAccumulator(pair).extend(y)
    assert acc.value == pytest.approx(path[-1], rel=1e-12)
    assert acc.n_obs == 200
    assert acc.value == pytest.approx(pair.increments(y).sum(), rel=1e-12)


def test_merge_and_compensated(rng):
    pair = prepare_hypotheses(random_pd(rng, 2), random_pd(rng, 2))
    y = rng.standard_normal((100, 2))
    a, b = LlrAccumulator(pair, compensated=True), LlrAccumulator(pair, compensated=True)
    a.extend(y[:40])
    b.extend(y[40:])
    whole = LlrAccumulator(pair).extend(y)[-1]
    m = a.merge(b)
    assert m.value == pytest.approx(whole, rel=1e-12) and m.n_obs == 100


def test_compensated_summation_is_more_accurate():
    pair = prepare_hypotheses(np.eye(1), np.eye(1))
    plain, comp = LlrAccumulator(pair), LlrAccumulator(pair, compensated=True)
    for acc in (plain, comp):
        acc._add(1e16)
        for _ in range(1000):
            acc._add(1.0)
        acc._add(-1e16)
    assert comp.value == 1000.0
    assert plain.value != 1000.0


def test_decision_rule_and_ties():
    pair = prepare_hypotheses(np.eye(2), np.eye(2))
    acc = LlrAccumulator(pair).update([1.0, 2.0])
    assert acc.value == 0.0 and decide(acc) is Decision.BETA
    acc.total = 1e-300
    assert acc.decide() is Decision.ALPHA
    with pytest.raises(StructuralError):
        decide(LlrAccumulator(pair))
    with pytest.raises(StructuralError):
        acc.update([1.0])


def test_prepare_names_failing_hypothesis():
    with pytest.raises(NotPositiveDefiniteError, match="beta"):
        prepare_hypotheses(np.eye(2), np.diag([1.0, 0.0]))
    with pytest.raises(NotPositiveDefiniteError, match="alpha"):
        prepare_hypotheses(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(StructuralError):
        prepare_hypotheses(np.eye(2), np.eye(3))


def test_detect_anomaly_end_to_end(tmp_path, rng):
    m = random_model(rng, 3, 2, rho=0.5)
    basis = [random_deviation(rng, m, 0.3, "Q"), random_deviation(rng, m, 0.3, "R")]
    traj = simulate_outputs(m, SimConfig(3000, seed=5))
    trace = detect_anomaly(m, basis, [0.5, 0.5], [0.0, 0.0], traj)
    sa, sb = hypothesis_covariances(m, basis, [0.5, 0.5], [0.0, 0.0])
    acc = LlrAccumulator(prepare_hypotheses(sa, sb))
    acc.extend(traj.y)
    assert trace.llr[-1] == pytest.approx(acc.value, rel=1e-9)
    assert trace.decision is Decision.BETA  # data come from the nominal plant
    path = tmp_path / "trace.csv"
    trace.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,llr" and lines[1].startswith("1,") and lines[-1] == "decision,Beta"
    assert len(lines) == 3002
    with pytest.raises(StructuralError):
        detect_anomaly(m, basis, [0.5, 0.5], [0.0, 0.0], np.zeros((5, 3)))
