import json

import numpy as np
import pytest

from sensorsched import (
    PomdpModel,
    load_model,
    model_from_dict,
    normalize_model,
    save_model,
    stationary_distribution,
    validate_model,
)
from sensorsched.model import ModelFormatError

from conftest import random_model


def test_validate_clean_model():
    m = PomdpModel(transition=[[0.9, 0.1], [0.1, 0.9]], sensors=(np.eye(2),))
    assert validate_model(m) == []


def test_validate_row_sum_defect():
    m = PomdpModel(transition=[[0.5, 0.4], [0.1, 0.9]], sensors=(np.eye(2),))
    report = validate_model(m)
    assert any("transition row 0 sums to 0.9" in line for line in report)


def test_validate_negative_entry():
    m = PomdpModel(
        transition=[[0.9, 0.1], [0.1, 0.9]],
        sensors=(np.array([[1.1, -0.1], [0.0, 1.0]]),),
    )
    report = validate_model(m)
    assert any("negative probability" in line for line in report)
    assert any("above 1" in line for line in report)


def test_validate_mixed_sensor_shapes():
    m = PomdpModel(
        transition=np.eye(2),
        sensors=(np.eye(2), np.full((2, 3), 1.0 / 3)),
    )
    assert validate_model(m)


def test_normalize_makes_rows_exact():
    m = PomdpModel(
        transition=[[0.9 + 4e-10, 0.1], [0.1, 0.9]],
        sensors=(np.eye(2),),
    )
    normed = normalize_model(m)
    assert np.all(normed.transition.sum(axis=1) == 1.0)


def test_stationary_symmetric():
    m = PomdpModel(transition=[[0.9, 0.1], [0.1, 0.9]], sensors=(np.eye(2),))
    d = stationary_distribution(m)
    assert d.converged and d.unique
    np.testing.assert_allclose(d.probs, [0.5, 0.5], atol=1e-11)


def test_stationary_identity_flagged_non_unique():
    m = PomdpModel(transition=np.eye(2), sensors=(np.eye(2),))
    d = stationary_distribution(m)
    np.testing.assert_allclose(d.probs, [0.5, 0.5])  # the start vector
    assert not d.unique


def test_stationary_asymmetric_matches_linear_solve():
    # oracle: solve d(Q - I) = 0 with sum(d) = 1 directly
    Q = np.array([[0.5, 0.5], [0.2, 0.8]])
    A = np.vstack([(Q - np.eye(2)).T, np.ones(2)])
    oracle = np.linalg.lstsq(A, np.array([0.0, 0.0, 1.0]), rcond=None)[0]
    np.testing.assert_allclose(oracle, [2 / 7, 5 / 7], atol=1e-12)

    m = PomdpModel(transition=Q, sensors=(np.eye(2),))
    d = stationary_distribution(m)
    assert d.converged
    np.testing.assert_allclose(d.probs, oracle, atol=1e-10)


def test_stationary_fixed_point_residual():
    rng = np.random.default_rng(7)
    for _ in range(20):
        m = random_model(rng)
        d = stationary_distribution(m)
        if d.converged:
            assert np.abs(d.probs @ m.transition - d.probs).sum() < 1e-8


def test_json_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    m = random_model(rng, num_states=3, num_obs=2, num_sensors=2)
    path = tmp_path / "model.json"
    save_model(m, path)
    loaded = load_model(path)
    assert validate_model(loaded) == []
    np.testing.assert_allclose(loaded.transition, m.transition, atol=1e-15)
    for a in range(m.num_sensors):
        np.testing.assert_allclose(loaded.sensors[a], m.sensors[a],
                                   atol=1e-15)


def test_load_rejects_malformed(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("not json at all")
    with pytest.raises(ModelFormatError):
        load_model(path)
    with pytest.raises(ModelFormatError):
        model_from_dict({"states": ["a"]})


def test_loader_accepts_exactly_valid_models():
    # validate(load(save(m))) is clean iff m satisfied the invariants
    rng = np.random.default_rng(11)
    for _ in range(10):
        m = random_model(rng)
        doc = {
            "states": [f"s{i}" for i in range(m.num_states)],
            "observations": [f"z{i}" for i in range(m.num_observations)],
            "transition": m.transition.tolist(),
            "sensors": [{"name": f"a{a}", "emission": m.sensors[a].tolist()}
                        for a in range(m.num_sensors)],
        }
        assert validate_model(model_from_dict(doc)) == []
        doc["transition"][0][0] += 0.01
        assert validate_model(model_from_dict(doc))
