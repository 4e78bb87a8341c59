import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from helpers import random_model, toy_diag, toy_identity
from mvpure import (
    NonpositiveEps,
    NotSPD,
    RankDeficientH,
    StochasticLinearModel,
    TraceNotOne,
    derive_covariances,
    load_model,
    normalize_noise,
    save_model,
    validate,
)
from mvpure.exceptions import DimensionMismatch, InvalidInput
from mvpure.linalg import spd_inverse


def test_canonical_model_validates():
    assert validate(toy_identity()) is None


def test_rank_deficient_h():
    model = StochasticLinearModel([[1.0, 1.0], [0.0, 0.0]], np.eye(2), 0.5 * np.eye(2), 1.0)
    with pytest.raises(RankDeficientH):
        validate(model)


def test_wide_h_is_rank_deficient():
    model = StochasticLinearModel(np.ones((1, 2)), np.eye(2), np.eye(1), 1.0)
    with pytest.raises(RankDeficientH):
        validate(model)


def test_trace_not_one():
    with pytest.raises(TraceNotOne):
        validate(StochasticLinearModel(np.eye(2), np.eye(2), np.eye(2), 1.0))


@pytest.mark.parametrize("eps", [0.0, -1.0])
def test_nonpositive_eps(eps):
    with pytest.raises(NonpositiveEps):
        validate(toy_identity(eps))


def test_not_spd_names_matrix():
    with pytest.raises(NotSPD) as info:
        validate(StochasticLinearModel(np.eye(2), np.diag([1.0, -1.0]), 0.5 * np.eye(2), 1.0))
    assert info.value.which == "Rx"
    with pytest.raises(NotSPD) as info:
        validate(StochasticLinearModel(np.eye(2), np.eye(2), [[0.5, 0.6], [0.6, 0.5]], 1.0))
    assert info.value.which == "Rn"


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        validate(StochasticLinearModel(np.eye(2), np.eye(3), 0.5 * np.eye(2), 1.0))


def test_nonfinite_rejected_on_construction():
    with pytest.raises(InvalidInput):
        StochasticLinearModel(np.eye(2), np.eye(2), 0.5 * np.eye(2), float("nan"))


def test_derived_covariances_toys():
    cov = derive_covariances(toy_identity())
    assert_allclose(cov.Ry, 1.5 * np.eye(2))
    assert_allclose(cov.Rxy, np.eye(2))
    assert_allclose(derive_covariances(toy_diag()).Ry, np.diag([5.5, 2.5]))


def test_derived_covariances_random(rng):
    for _ in range(20):
        model = random_model(rng)
        validate(model)
        cov = derive_covariances(model)
        assert np.max(np.abs(cov.Ry - model.eps * model.Rn - model.H @ model.Rx @ model.H.T)) < 1e-12 * max(
            1.0, np.abs(cov.Ry).max()
        )
        assert_array_equal(cov.Ry, cov.Ry.T)
        spd_inverse(cov.Ry)
        assert np.linalg.matrix_rank(cov.Rxy) == model.m
        assert_array_equal(cov.Ryx, cov.Rxy.T)


def test_normalize_noise_keeps_eps():
    Rn = normalize_noise(np.diag([2.0, 6.0]))
    assert_allclose(Rn, np.diag([0.25, 0.75]))


def test_json_roundtrip(tmp_path):
    model = toy_diag()
    path = tmp_path / "model.json"
    save_model(model, path)
    data = json.loads(path.read_text())
    assert set(data) == {"H", "Rx", "Rn", "eps"}
    assert data["H"] == [[2.0, 0.0], [0.0, 1.0]]
    back = load_model(path)
    assert_array_equal(back.H, model.H)
    assert back.eps == 3.0


def test_json_missing_key(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"H": [[1.0]], "Rx": [[1.0]]}))
    with pytest.raises(InvalidInput):
        load_model(path)
