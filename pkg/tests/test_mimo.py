import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from mvpure import analytic_mse, blue, mmse, mv_pure, optimal_rank, validate
from mvpure.exceptions import DimensionMismatch, EmptyInput, InvalidInput, NotPositiveDefinite
from mvpure.mimo import (
    CSV_HEADER,
    QPSK,
    MimoScenario,
    default_noise_covariance,
    draw_channel,
    eps_from_snr,
    gen_channel,
    gen_noise_block,
    gen_noise_blocks,
    gen_qpsk_block,
    gen_qpsk_blocks,
    lift_estimate_to_complex,
    load_scenario,
    perturb_channel,
    realify,
    realify_covariance,
    realify_matrix,
    realify_vector,
    run_experiment,
    sample_covariance,
    sample_mse,
)
from mvpure.model import derive_covariances

from helpers import complex_oracle
from mvpure.rank_analysis import model_spectra


@pytest.mark.parametrize(
    "snr_db, expected, rounded",
    [(0.0, 1.0, 1.0), (-4.0, 2.5118864315, 2.51), (8.0, 0.1584893192, 0.16)],
)
def test_eps_from_snr(snr_db, expected, rounded):
    eps = eps_from_snr(snr_db)
    assert eps == pytest.approx(expected, rel=1e-9)
    assert round(eps, 2) == rounded


def test_realify_scalar_channels():
    assert_array_equal(realify_matrix([[1 + 0j]]), np.eye(2))
    assert_array_equal(realify_matrix([[1j]]), [[0.0, -1.0], [1.0, 0.0]])


def test_realify_white_noise_trace():
    N = 3
    model = realify(np.eye(N), np.eye(N) / N, N, 1.0)
    assert_allclose(model.Rn, np.eye(2 * N) / (2 * N))
    assert np.trace(model.Rn) == pytest.approx(1.0)
    assert_array_equal(model.Rx, np.eye(2 * N))
    validate(model)


def test_realify_colored_noise_keeps_trace(rng):
    for N in (2, 5, 8):
        Rnc = default_noise_covariance(N, int(rng.integers(1000)))
        model = realify(gen_channel(N, N, 1), Rnc, N, 0.5)
        assert abs(np.trace(model.Rn) - 1.0) < 1e-12
        validate(model)


def test_realify_dimension_check():
    with pytest.raises(DimensionMismatch):
        realify(np.ones((3, 2)), np.eye(3) / 3, 3, 1.0)


def test_lift_estimate():
    assert lift_estimate_to_complex([1.0, 0.0]) == pytest.approx([1 + 0j])
    assert lift_estimate_to_complex([0.0, 1.0]) == pytest.approx([1j])
    v = np.array([1 - 2j, 0.5 + 3j, -1j])
    assert_array_equal(lift_estimate_to_complex(realify_vector(v)), v)
    with pytest.raises(InvalidInput):
        lift_estimate_to_complex([1.0, 2.0, 3.0])


def test_realified_product_matches_complex(rng):
    Hc = gen_channel(3, 2, 9)
    x = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    assert_allclose(realify_matrix(Hc) @ realify_vector(x), realify_vector(Hc @ x), atol=1e-14)


def test_channel_statistics_and_determinism():
    entries = np.concatenate([gen_channel(8, 8, 17, a).ravel() for a in range(160)])
    assert abs(np.mean(np.abs(entries) ** 2) - 1.0) < 0.05
    assert abs(np.var(entries.real) - 0.5) < 0.05 * 0.5
    assert_array_equal(gen_channel(8, 8, 5), gen_channel(8, 8, 5))
    assert not np.array_equal(gen_channel(8, 8, 5), gen_channel(8, 8, 6))


def test_qpsk_support_and_uniformity():
    X = gen_qpsk_blocks(8, 4, 12_500)
    assert np.all(np.isin(X, QPSK))
    freqs = np.array([np.mean(X == s) for s in QPSK])
    assert np.all(np.abs(freqs - 0.25) < 0.02 * 0.25)
    R = realify_vector(X)
    assert set(np.unique(R)) == {-1.0, 1.0}
    assert_allclose(np.mean(R**2, axis=0), 1.0)
    assert_array_equal(gen_qpsk_block(8, 4, 7), X[7])


def test_noise_statistics():
    N = 8
    Rnc = np.eye(N) / N
    noise = gen_noise_blocks(Rnc, 3, 10_000)
    S = noise.T @ noise.conj() / len(noise)
    assert np.linalg.norm(S - Rnc) / np.linalg.norm(Rnc) < 0.05
    se = np.sqrt(1 / N / 2 / len(noise))
    assert np.all(np.abs(noise.mean(axis=0).real) < 3 * se + 1e-12)
    assert np.all(np.abs(noise.mean(axis=0).imag) < 3 * se + 1e-12)
    assert_array_equal(gen_noise_block(Rnc, 3, 11), noise[11])
    assert_array_equal(gen_noise_block(Rnc, 3, 11), gen_noise_block(Rnc, 3, 11))


def test_noise_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        gen_noise_block(np.diag([1.0, -1.0]), 0, 0)


def test_perturb_channel():
    Hc = gen_channel(8, 8, 1)
    assert_array_equal(perturb_channel(Hc, 0.0, 3), Hc)
    powers = [np.sum(np.abs(perturb_channel(Hc, 1e-4, s) - Hc) ** 2) / 64 for s in range(20)]
    assert abs(np.mean(powers) - 1e-4) < 0.3e-4


def test_perturbation_barely_moves_trailing_eigenvalue():
    # the default scenario's own channel and perturbation draw
    sc = MimoScenario()
    Rnc = sc.noise_covariance()
    Hc, _, exact = draw_channel(sc, Rnc)
    Hp = perturb_channel(Hc, sc.perturb_variance, sc.perturb_seed)
    pert, _ = model_spectra(realify_matrix(Hp), np.eye(2 * sc.M), realify_covariance(Rnc))
    assert abs(exact[-1] - pert[-1]) < 0.05


def test_sample_covariance_small_cases():
    y = np.array([1.0, -2.0, 3.0])
    assert_array_equal(sample_covariance([y]), np.outer(y, y))
    assert_allclose(sample_covariance(2.0 * np.eye(3)), np.diag([4.0, 4.0, 4.0]) / 3)
    with pytest.raises(EmptyInput):
        sample_covariance([])
    with pytest.raises(DimensionMismatch):
        sample_covariance([[1.0, 2.0], [1.0]])


def _blocks(model, Hc, Rnc, Q, seed=0):
    M = Hc.shape[1]
    X = gen_qpsk_blocks(M, seed, Q)
    noise = gen_noise_blocks(Rnc, seed + 1, Q)
    Y = realify_vector(X @ Hc.T + np.sqrt(model.eps) * noise)
    return X, Y


def test_sample_covariance_consistency():
    Rnc = default_noise_covariance(4, 0)
    Hc = gen_channel(4, 4, 0)
    model = realify(Hc, Rnc, 4, 1.0)
    Ry = derive_covariances(model).Ry
    errs = []
    for Q in (200, 2000, 20000):
        _, Y = _blocks(model, Hc, Rnc, Q)
        errs.append(np.linalg.norm(sample_covariance(Y) - Ry) / np.linalg.norm(Ry))
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 0.1


def test_sample_mse_basics():
    x = np.array([[1 + 1j, -1 - 1j]] * 4)
    assert sample_mse(x, x) == 0.0
    est = x.copy()
    est[0, 1] += 1.0
    assert sample_mse(est, x) == pytest.approx(1 / 4)
    with pytest.raises(DimensionMismatch):
        sample_mse(x[:, :1], x)


def test_sample_mse_agrees_with_analytic_mmse():
    Rnc = default_noise_covariance(4, 2)
    Hc = gen_channel(4, 4, 3)
    model = realify(Hc, Rnc, 4, eps_from_snr(0.0))
    X, Y = _blocks(model, Hc, Rnc, 10_000, seed=5)
    W = mmse(model).W
    got = sample_mse(lift_estimate_to_complex(Y @ W.T), X)
    assert got == pytest.approx(analytic_mse(model, W), rel=0.05)


def test_lifting_matches_complex_oracle(rng):
    N = M = 2
    for trial in range(10):
        Hc = gen_channel(N, M, 100 + trial)
        Rnc = default_noise_covariance(N, trial)
        eps = 10 ** rng.uniform(-1, 0.5)
        model = realify(Hc, Rnc, M, eps)
        X, Y = _blocks(model, Hc, Rnc, 5, seed=trial)
        oracle = complex_oracle(Hc, Rnc, eps, lift_estimate_to_complex(Y))
        lifted = {"MMSE": mmse(model).W, "BLUE": blue(model).W}
        lifted.update({r: mv_pure(model, r).W for r in (2, 4)})
        for key, W in lifted.items():
            assert_allclose(lift_estimate_to_complex(Y @ W.T), oracle[key], atol=1e-10)


# --- scenario and experiment ----------------------------------------------------

def test_scenario_json_roundtrip(tmp_path):
    Rnc = default_noise_covariance(2, 0)
    sc = MimoScenario(N=2, M=2, snr_db_grid=[0, 4], Q=3, channel_seed=1, noise_seed=2, Rnc=Rnc)
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(sc.to_dict()))
    back = load_scenario(path)
    assert back.snr_db_grid == (0.0, 4.0)
    assert back.channel_seed == 1 and back.noise_seed == 2
    assert_allclose(back.Rnc, Rnc)


@pytest.mark.parametrize(
    "doc",
    [{"Q": 0}, {"N": 2, "M": 3}, {"bogus": 1}, {"seeds": {"dice": 1}}, {"Rnc": [[1.0]]}],
)
def test_scenario_rejects_bad_documents(doc):
    with pytest.raises(InvalidInput):
        MimoScenario.from_dict(doc)


def test_scenario_rejects_untraced_rnc():
    with pytest.raises(InvalidInput):
        MimoScenario(N=2, M=2, Rnc=np.eye(2))


def test_condition_target_is_met():
    sc = MimoScenario(condition_target=0.6, channel_seed=3)
    res = run_experiment(MimoScenario(**{**sc.__dict__, "Q": 2, "snr_db_grid": (0.0,)}))
    assert res.upsilons[-1] < 0.6


def test_experiment_rows_and_csv():
    sc = MimoScenario(Q=50, channel_seed=1, condition_target=0.6)
    res = run_experiment(sc, "both")
    assert not res.failures
    text = res.to_csv()
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 1 + 7 * 2 * 3
    for knowledge in ("exact", "empirical"):
        names = [r.estimator for r in res.select(knowledge=knowledge)]
        assert names == ["MMSE", "BLUE", "MV-PURE"] * 7


def test_experiment_minimal_q():
    res = run_experiment(MimoScenario(N=2, M=2, Q=1, snr_db_grid=(0.0,)), "exact")
    assert len(res.rows) == 3
    assert all(np.isfinite(r.sample_mse_db) for r in res.rows)


def test_experiment_empirical_failure_is_recorded():
    # with fewer blocks than dimensions the sample covariance is singular
    res = run_experiment(MimoScenario(N=2, M=2, Q=1, snr_db_grid=(0.0, 4.0)), "both")
    failed = res.failures
    assert [p.knowledge for p in failed] == ["empirical", "empirical"]
    assert "NotPositiveDefinite" in failed[0].error
    assert [r.estimator for r in res.select(knowledge="empirical")] == ["FAILED", "FAILED"]
    assert len(res.select(knowledge="exact")) == 6


def test_experiment_reproducible_across_threads(monkeypatch):
    sc = MimoScenario(N=4, M=4, Q=40, all_ranks=True)
    monkeypatch.setenv("MVPURE_THREADS", "1")
    a = run_experiment(sc, "both").to_csv()
    monkeypatch.setenv("MVPURE_THREADS", "4")
    b = run_experiment(sc, "both").to_csv()
    assert a == b


def test_mv_pure_beats_blue_at_low_snr():
    sc = MimoScenario(Q=200, channel_seed=0, condition_target=0.6, perturb_variance=0.0)
    res = run_experiment(sc, "exact")
    blue_db = dict(res.series("BLUE", "exact"))
    mv_db = dict(res.series("MV-PURE", "exact"))
    ranks = {p.snr_db: p.rank for p in res.points}
    gaps = []
    for snr in sc.snr_db_grid:
        if ranks[snr] < 2 * sc.M:
            assert mv_db[snr] <= blue_db[snr]
            gaps.append(10 ** (blue_db[snr] / 10) - 10 ** (mv_db[snr] / 10))
    assert len(gaps) >= 2
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))


def test_exact_rank_agrees_with_optimal_rank():
    sc = MimoScenario(N=4, M=4, Q=10)
    res = run_experiment(sc, "exact")
    Rnc = sc.noise_covariance()
    for p in res.points:
        model = realify(res.Hc, Rnc, 4, p.eps)
        assert p.rank == optimal_rank(model).r_opt
