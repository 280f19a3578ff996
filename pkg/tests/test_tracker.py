from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
import scipy.linalg

from avqe.ansatz import Ansatz, energy, energy_and_gradient, prepare
from avqe.bounds import OPTION2, tracking_constants
from avqe.errors import (InvalidParams, MaxSlicesExceeded, MinimizerNotConverged, SingularMetric,
                         TrackingLost)
from avqe.models import single_qubit, tfim
from avqe.oracle import PathOracle, fidelity
from avqe.pauli import AdiabaticPath, PauliSum, interpolate, operator_norm
from avqe.tracker import (NATURAL, TrackerConfig, estimate_gamma, guarantee_constants,
                          optimize_slice, reference_minimizer, track_path)

SQ = single_qubit()


def theta_star_single(lam):
    return (math.pi + math.atan2(lam, 1 - lam)) / 2


def test_stationary_start():
    rec = optimize_slice(SQ.path, SQ.ansatz, [math.pi / 2], 0.0, TrackerConfig(k_steps=7))
    assert rec.theta[0] == pytest.approx(math.pi / 2, abs=1e-12)
    assert rec.grad_norm <= 1e-10


def test_single_slice_contraction():
    cfg = TrackerConfig(eta=0.25, k_steps=4)
    rec = optimize_slice(SQ.path, SQ.ansatz, [math.pi / 2], 0.1, cfg)
    star = theta_star_single(0.1)
    assert star == pytest.approx(1.6261, abs=1e-4)
    assert abs(rec.theta[0] - star) <= 2e-2
    e0 = -math.sqrt(0.81 + 0.01)
    errs = [e - e0 for e in rec.energy_trace]
    factor = 1 - 1.0 * math.sqrt(2) / 4.0
    for a, b in zip(errs, errs[1:]):
        assert b <= factor * a + 1e-15


def test_identity_hamiltonian_is_noop():
    path = AdiabaticPath(PauliSum.identity(1), PauliSum.identity(1, 2.0))
    theta = np.array([0.37])
    rec = optimize_slice(path, Ansatz(("Y",), 1), theta, 0.4, TrackerConfig())
    assert np.array_equal(rec.theta, theta)


def test_energy_trace_monotone_at_inverse_smoothness(rng):
    model = tfim(3, 1.0)
    h = interpolate(model.path, 0.6)
    big_l = 4 * operator_norm(h) * model.ansatz.n_params
    cfg = TrackerConfig(eta=1 / big_l, k_steps=30)
    for _ in range(5):
        theta = rng.uniform(-1, 1, model.ansatz.n_params)
        rec = optimize_slice(model.path, model.ansatz, theta, 0.6, cfg)
        assert np.all(np.diff(rec.energy_trace) <= 1e-12)


def test_descent_lemma(rng):
    model = tfim(2, 1.0)
    for lam in (0.2, 0.7):
        h = interpolate(model.path, lam)
        big_l = 4 * operator_norm(h) * model.ansatz.n_params
        for _ in range(50):
            theta = rng.uniform(-np.pi, np.pi, model.ansatz.n_params)
            e, g = energy_and_gradient(model.ansatz, theta, h)
            e_next = energy(model.ansatz, theta - g / big_l, h)
            assert e - e_next >= g @ g / (2 * big_l) - 1e-10


def test_natural_gradient_matches_vanilla_for_unit_metric():
    a = optimize_slice(SQ.path, SQ.ansatz, [1.5], 0.3, TrackerConfig(k_steps=3))
    b = optimize_slice(SQ.path, SQ.ansatz, [1.5], 0.3, TrackerConfig(k_steps=3, optimizer=NATURAL))
    np.testing.assert_allclose(a.theta, b.theta, atol=1e-7)


def test_natural_gradient_fallback(monkeypatch):
    def broken(*args, **kwargs):
        raise np.linalg.LinAlgError("not positive definite")

    monkeypatch.setattr(scipy.linalg, "solve", broken)
    with pytest.warns(RuntimeWarning):
        rec = optimize_slice(SQ.path, SQ.ansatz, [1.5], 0.3, TrackerConfig(k_steps=1, optimizer=NATURAL))
    assert np.isfinite(rec.energy)
    with pytest.raises(SingularMetric):
        optimize_slice(SQ.path, SQ.ansatz, [1.5], 0.3,
                       TrackerConfig(k_steps=1, optimizer=NATURAL, ng_fallback=False))


def test_config_validation():
    with pytest.raises(InvalidParams):
        TrackerConfig(eta=0)
    with pytest.raises(InvalidParams):
        TrackerConfig(k_steps=0)
    with pytest.raises(InvalidParams):
        TrackerConfig(optimizer="adam")
    assert TrackerConfig(k_steps=9, mode=OPTION2).k_steps == 1


def test_track_single_qubit_35_slices():
    oracle = PathOracle(SQ.path)
    res = track_path(SQ.path, SQ.ansatz, SQ.theta0, TrackerConfig(eta=0.25, k_steps=4, dlambda=0.0294),
                     oracle=oracle)
    assert len(res.records) == 35
    assert res.records[-1].lam == 1.0
    assert res.records[-1].fidelity >= 0.999
    assert res.n_updates == 140


def test_constant_path_noop():
    path = AdiabaticPath(PauliSum.single("Z"), PauliSum.single("Z"))
    res = track_path(path, Ansatz(("Y",), 1), [math.pi / 2], TrackerConfig(dlambda=0.1))
    assert all(r.grad_norm <= 1e-10 for r in res.records)


def test_tfim_pair_reaches_ground_energy():
    model = tfim(2, 1.0, template="parity")
    res = track_path(model.path, model.ansatz, model.theta0,
                     TrackerConfig(eta=0.05, k_steps=20, dlambda=0.02))
    assert res.records[-1].energy == pytest.approx(-math.sqrt(5), abs=1e-6)


def test_guarantee_mode_radius_and_bound():
    constants = tracking_constants(1.0, math.sqrt(2), 1, 1.0, math.sqrt(2))
    cfg = TrackerConfig(eta=constants.eta, k_steps=constants.k_min, guarantee=True, gamma=1.0)
    res = track_path(SQ.path, SQ.ansatz, SQ.theta0, cfg, oracle=PathOracle(SQ.path), constants=constants)
    assert all(r.theta_dist <= constants.r_pl / 2 for r in res.records)
    assert res.completed and res.records[-1].fidelity >= 0.999


def test_guarantee_mode_rejects_bad_settings():
    constants = guarantee_constants(SQ.path, SQ.ansatz, 1.0)
    with pytest.raises(InvalidParams):
        track_path(SQ.path, SQ.ansatz, SQ.theta0, TrackerConfig(eta=1.0, k_steps=4, guarantee=True),
                   constants=constants)
    cfg = TrackerConfig(eta=0.25, k_steps=4, guarantee=True, gamma=1.0)
    with pytest.raises(InvalidParams):
        track_path(SQ.path, SQ.ansatz, [0.3], cfg, oracle=PathOracle(SQ.path), constants=constants)


def test_tracking_lost_carries_records():
    constants = guarantee_constants(SQ.path, SQ.ansatz, 1.0)
    tight = dataclasses.replace(constants, r_pl=1e-9)
    cfg = TrackerConfig(eta=0.25, k_steps=4, guarantee=True, gamma=1.0)
    with pytest.raises(TrackingLost) as info:
        track_path(SQ.path, SQ.ansatz, SQ.theta0, cfg, oracle=PathOracle(SQ.path), constants=tight)
    assert len(info.value.records) == 1


def test_max_slices():
    with pytest.raises(MaxSlicesExceeded):
        track_path(SQ.path, SQ.ansatz, SQ.theta0, TrackerConfig(dlambda=0.1, max_slices=3))


def test_reference_minimizer_validates_against_ground_energy():
    h = PauliSum.single("X")
    star = reference_minimizer(Ansatz(("Y",), 1), h, [0.2], ground_energy=-1.0)
    assert star[0] == pytest.approx(-math.pi / 4, abs=1e-9)
    with pytest.raises(MinimizerNotConverged):
        reference_minimizer(Ansatz(("Z",), 1), h, [0.2], ground_energy=-1.0)


def _drift_check(model, gamma, grid_points=11, steps=(1e-2, 5e-3, 1e-3)):
    oracle = PathOracle(model.path)
    c = guarantee_constants(model.path, model.ansatz, gamma)
    theta = np.array(model.theta0, dtype=float)
    for lam in np.linspace(0.0, 0.9, grid_points):
        theta = reference_minimizer(model.ansatz, interpolate(model.path, lam), theta,
                                    oracle.ground_energy(lam))
        for dl in steps:
            nxt = reference_minimizer(model.ansatz, interpolate(model.path, lam + dl), theta,
                                      oracle.ground_energy(lam + dl))
            assert np.linalg.norm(nxt - theta) <= c.drift * dl + 10 * c.drift * dl**2


def test_drift_single_qubit():
    _drift_check(SQ, 1.0)


def test_drift_tfim_pair():
    model = tfim(2, 1.0, template="parity")
    _drift_check(model, estimate_gamma(model.path, model.ansatz, model.theta0), grid_points=6)


def test_option2_recursion():
    constants = guarantee_constants(SQ.path, SQ.ansatz, 1.0, mode=OPTION2)
    cfg = TrackerConfig(eta=constants.eta, k_steps=1, mode=OPTION2, guarantee=True, gamma=1.0)
    res = track_path(SQ.path, SQ.ansatz, SQ.theta0, cfg, oracle=PathOracle(SQ.path), constants=constants)
    errs = [0.0] + [r.theta_dist for r in res.records]
    for prev, rec, cur in zip(errs, res.records, errs[1:]):
        assert cur <= constants.rho * prev + constants.rho * constants.drift * rec.dlambda + 1e-8
    assert res.n_updates <= constants.n_updates_bound


def test_gradients_nonvanishing_off_minimum():
    oracle = PathOracle(SQ.path)
    res = track_path(SQ.path, SQ.ansatz, SQ.theta0, TrackerConfig(eta=0.25, k_steps=4, dlambda=0.05),
                     oracle=oracle)
    for r in res.records:
        if r.theta_dist > 1e-6:
            assert r.grad_norm > 1e-12


def test_tfim_start_state_is_ground_state():
    for template in ("layered", "parity"):
        model = tfim(3, 1.0, template=template)
        oracle = PathOracle(model.path)
        assert fidelity(prepare(model.ansatz, model.theta0), oracle.ground_state(0.0)) == pytest.approx(1.0)
