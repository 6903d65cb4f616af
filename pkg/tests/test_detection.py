import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polartomo.detection import CountsRecord, EfficiencyModel, expected_counts, poisson_resample, sample_counts
from polartomo.optics import event_probabilities, povm_elements
from polartomo.qudit import DimensionError, PolarizationState, fock_state, hwp_state, random_state


def test_expected_counts_maximally_mixed_qubit(povm1):
    nbar = expected_counts(PolarizationState.maximally_mixed(2), povm1, EfficiencyModel.ideal(), 6000)
    np.testing.assert_allclose(nbar, 1000, rtol=1e-14)


def test_expected_counts_uniform_efficiency_n2(povm2, rng):
    rho = random_state(3, rng)
    nbar = expected_counts(rho, povm2, EfficiencyModel.uniform(0.5), 1e4)
    np.testing.assert_allclose(nbar, 0.25 * 1e4 * event_probabilities(rho, povm2), rtol=1e-14)


def test_expected_counts_hv_coincidence(povm2):
    nbar = expected_counts(fock_state(1, 1).density_matrix(), povm2, EfficiencyModel.ideal(), 50000)
    assert nbar[povm2.index((1, 1, 0, 0, 0, 0))] == pytest.approx(50000 / 9, rel=1e-13)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_total_expected_bounded_by_intensity(N, rng):
    povm = povm_elements(N)
    rho = random_state(N + 1, rng)
    assert expected_counts(rho, povm, EfficiencyModel.ideal(), 1000).sum() == pytest.approx(1000, rel=1e-12)
    lossy = EfficiencyModel.per_detector([0.9, 0.8, 0.7, 0.95, 0.6, 0.99])
    assert expected_counts(rho, povm, lossy, 1000).sum() < 1000


def test_expected_counts_linear_in_intensity(povm2, rng):
    rho = random_state(3, rng)
    eff = EfficiencyModel.uniform(0.7)
    a = expected_counts(rho, povm2, eff, 123.0)
    np.testing.assert_allclose(expected_counts(rho, povm2, eff, 3 * 123.0), 3 * a, rtol=1e-14)


def test_efficiency_ratio_matches_eta_power(povm2, rng):
    rho = random_state(3, rng)
    ideal = expected_counts(rho, povm2, EfficiencyModel.ideal(), 1000)
    lossy = expected_counts(rho, povm2, EfficiencyModel.uniform(0.6), 1000)
    np.testing.assert_allclose(lossy[ideal > 0] / ideal[ideal > 0], 0.36, rtol=1e-12)


def test_table_efficiency(povm2):
    table = np.ones((6, 3))
    table[:, 1] = 0.8
    table[:, 2] = 0.5  # bunched pairs detected less often than eta^2
    eff = EfficiencyModel.from_table(table)
    f = eff.event_factors(povm2.events)
    assert f[povm2.index((2, 0, 0, 0, 0, 0))] == pytest.approx(0.5)
    assert f[povm2.index((1, 1, 0, 0, 0, 0))] == pytest.approx(0.64)
    with pytest.raises(ValueError):
        eff.eta_n(0, 3)


@pytest.mark.parametrize("bad", [dict(eta=(1.0,) * 5, mode="independent"), dict(eta=(0.0,) * 6, mode="independent"),
                                 dict(mode="bogus"), dict(mode="table", table=np.full((6, 2), 0.5))])
def test_efficiency_validation(bad):
    with pytest.raises(ValueError):
        EfficiencyModel(**bad)


def test_efficiency_json_round_trip():
    for eff in (EfficiencyModel.ideal(), EfficiencyModel.per_detector([0.5, 0.6, 0.7, 0.8, 0.9, 1.0]),
                EfficiencyModel.from_table(np.ones((6, 4)) * [1, 0.9, 0.8, 0.7])):
        back = EfficiencyModel.from_json(json.loads(json.dumps(eff.to_json())))
        assert back == eff
        assert back.is_ideal == eff.is_ideal


def test_zero_mean_gives_zero_counts(povm2):
    # |2,0> never fires detector 1 (V polarized)
    rec = sample_counts(fock_state(2, 0).density_matrix(), povm2, EfficiencyModel.ideal(), 1e5, seed=1)
    assert rec.counts[povm2.index((2, 0, 0, 0, 0, 0))] == 0
    assert rec.counts[povm2.index((1, 1, 0, 0, 0, 0))] == 0


def test_sampling_is_deterministic_for_seed(povm2):
    rho = hwp_state(np.pi / 4).density_matrix()
    a = sample_counts(rho, povm2, EfficiencyModel.uniform(0.6), 5e4, seed=7)
    b = sample_counts(rho, povm2, EfficiencyModel.uniform(0.6), 5e4, seed=7)
    c = sample_counts(rho, povm2, EfficiencyModel.uniform(0.6), 5e4, seed=8)
    np.testing.assert_array_equal(a.counts, b.counts)
    assert np.any(a.counts != c.counts)


def test_sampled_total_concentrates(povm2):
    rho = fock_state(1, 1).density_matrix()
    I = 50000
    rec = sample_counts(rho, povm2, EfficiencyModel.ideal(), I, seed=3)
    assert abs(rec.total - I) < 5 * np.sqrt(I)


def test_poisson_resample_mean(povm1):
    base = CountsRecord(1, 600, np.array([10.0, 0, 50, 100, 7, 3]))
    draws = np.array([poisson_resample(base, s).counts for s in range(10000)])
    se = np.sqrt(base.counts / 10000)
    assert np.all(np.abs(draws.mean(axis=0) - base.counts) <= 5 * se + 1e-12)
    assert np.all(draws[:, 1] == 0)


def test_counts_record_validation():
    with pytest.raises(DimensionError):
        CountsRecord(1, 10, np.zeros(5))
    with pytest.raises(ValueError):
        CountsRecord(1, 10, -np.ones(6))
    with pytest.raises(ValueError):
        CountsRecord(1, 0, np.ones(6))
    with pytest.raises(DimensionError):
        CountsRecord(11, 10, np.ones(6))
    with pytest.raises(ValueError):
        CountsRecord.from_mapping(1, 10, {(2, 0, 0, 0, 0, 0): 1})


def test_counts_from_mapping_fills_zeros():
    rec = CountsRecord.from_mapping(2, 100, {(0, 0, 1, 1, 0, 0): 5})
    assert rec.total == 5
    assert rec.as_dict()[(0, 0, 1, 1, 0, 0)] == 5
    assert len(rec.counts) == 21


def test_counts_json_round_trip(povm2):
    rec = sample_counts(hwp_state(0.3).density_matrix(), povm2, EfficiencyModel.uniform(0.6), 1e4, seed=11)
    text = json.dumps(rec.to_json())
    back = CountsRecord.from_json(json.loads(text))
    assert back.N == rec.N and back.seed == 11 and back.ensemble_size == 1e4
    np.testing.assert_array_equal(back.counts, rec.counts)
    assert all(isinstance(e["n"], int) for e in json.loads(text)["counts"])


@pytest.mark.parametrize("payload", [{}, {"N": 1}, {"N": 1, "ensemble_size": 5, "counts": [{"n": 1}]},
                                     {"N": 1, "ensemble_size": 5, "counts": 3}])
def test_counts_json_malformed(payload):
    with pytest.raises(ValueError):
        CountsRecord.from_json(payload)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.floats(0.05, 1.0), st.floats(1, 1e6), st.integers(0, 2**31))
def test_expected_counts_invariants(N, eta, I, seed):
    """Non-negative, bounded by I, and equal to I exactly when detection is ideal."""
    povm = povm_elements(N)
    rho = random_state(N + 1, np.random.default_rng(seed))
    nbar = expected_counts(rho, povm, EfficiencyModel.uniform(eta), I)
    assert np.all(nbar >= 0)
    assert nbar.sum() <= I * (1 + 1e-12)
    if eta == 1.0:
        assert nbar.sum() == pytest.approx(I, rel=1e-12)
    else:
        assert nbar.sum() < I
