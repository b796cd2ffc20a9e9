import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crmot.estimation import (
    FitDomainError, add_noise, fit_interspecies, fit_linear_loading, fit_tof_temperature,
    fit_two_body_decay, interspecies_curve, loading_curve, two_body_decay,
)
from crmot.trap import (
    CloudShape, Event, MotModel, SQRT8, Schedule, SpeciesKinetics, integrate_schedule,
    overlap_volume, tof_width,
)
from crmot.units import atomic_mass

M52 = 51.9405075 * atomic_mass
BOSON = CloudShape(110.0, 110.0)
V1 = BOSON.volume
NBAR = 7e5 / overlap_volume(BOSON, CloudShape(150.0, 140.0, 60.0))


def decay_record(beta, tau=0.1, points=4000, peak=8e10):
    t = np.linspace(0.0, 5 * tau, points)
    return t, two_body_decay(t, peak * V1, tau, beta / (SQRT8 * V1))


def dual_record(beta_bf, gamma=1.5e6, tau=0.02):
    t = np.linspace(0.0, 1.0, 2001)
    return t, interspecies_curve(t, gamma, tau, beta_bf * NBAR, 0.3, 0.6)


# ------------------------------------------------------------------ loading

def test_loading_noiseless_recovery():
    t = np.linspace(0, 0.04, 201)
    r = fit_linear_loading(t, loading_curve(t, 1.6e8, 6e-3))
    assert r.converged
    assert r["gamma"] == pytest.approx(1.6e8, rel=1e-6)
    assert r["tau"] == pytest.approx(6e-3, rel=1e-6)


def test_loading_matches_integrated_forward_model():
    model = MotModel({"52Cr": SpeciesKinetics(1.6e8, 6e-3)})
    curve = integrate_schedule(model, Schedule(0.04, mot_on=frozenset({"52Cr"})), points=401)
    r = fit_linear_loading(curve.t, curve.ground["52Cr"])
    assert r["gamma"] == pytest.approx(1.6e8, rel=1e-4)
    assert r["tau"] == pytest.approx(6e-3, rel=1e-4)


@pytest.mark.parametrize("seed", range(10))
def test_loading_noisy_recovery(seed):
    t = np.linspace(0, 0.04, 201)
    r = fit_linear_loading(t, add_noise(loading_curve(t, 1.6e8, 6e-3), 0.05, seed))
    assert r.converged
    assert r["gamma"] == pytest.approx(1.6e8, rel=0.05)
    assert r["tau"] == pytest.approx(6e-3, rel=0.10)


def test_loading_plateau_is_flagged():
    t = np.linspace(0, 0.04, 201)
    r = fit_linear_loading(t, np.full_like(t, 5e5))
    assert not r.converged
    assert "not identifiable" in r.message


def test_loading_too_short_is_flagged():
    t = np.linspace(0, 2e-3, 50)
    r = fit_linear_loading(t, loading_curve(t, 1.6e8, 6e-3))
    assert not r.converged


def test_loading_time_unit_invariance():
    t = np.linspace(0, 0.04, 201)
    n = add_noise(loading_curve(t, 1.6e8, 6e-3), 0.05, 3)
    s = fit_linear_loading(t, n)
    ms = fit_linear_loading(t * 1e3, n)
    assert ms["tau"] / 1e3 == pytest.approx(s["tau"], rel=1e-9)
    assert ms["gamma"] * 1e3 == pytest.approx(s["gamma"], rel=1e-9)


def test_residual_not_worse_than_truth():
    t = np.linspace(0, 0.04, 201)
    n = add_noise(loading_curve(t, 1.6e8, 6e-3), 0.05, 11)
    r = fit_linear_loading(t, n)
    assert r.rss <= np.sum((loading_curve(t, 1.6e8, 6e-3) - n) ** 2)


def test_noise_is_seeded():
    x = np.ones(10)
    np.testing.assert_array_equal(add_noise(x, 0.05, 4), add_noise(x, 0.05, 4))
    assert not np.array_equal(add_noise(x, 0.05, 4), add_noise(x, 0.05, 5))


# ---------------------------------------------------------------- decay

@pytest.mark.parametrize("beta", [6.25e-10, 1e-9, 8e-9])
def test_two_body_noiseless(beta):
    t, n = decay_record(beta)
    r = fit_two_body_decay(t, n, V1)
    assert r["beta"] == pytest.approx(beta, rel=1e-4)
    assert r["tau"] == pytest.approx(0.1, rel=1e-4)
    assert r["n0"] == pytest.approx(8e10 * V1, rel=1e-4)


def test_two_body_against_ode():
    model = MotModel({"x": SpeciesKinetics(0.0, 0.1, 6.25e-10, BOSON)})
    sched = Schedule(0.5, mot_on=frozenset({"x"}), initial={"x": (8e10 * V1, 0.0)})
    curve = integrate_schedule(model, sched, points=2001)
    r = fit_two_body_decay(curve.t, curve.ground["x"], V1)
    assert r["beta"] == pytest.approx(6.25e-10, rel=1e-4)


def test_two_body_zero_beta():
    t, n = decay_record(0.0)
    r = fit_two_body_decay(t, n, V1)
    assert r["beta"] < 1e-15
    assert r["tau"] == pytest.approx(0.1, rel=1e-8)


@pytest.mark.parametrize("beta", [6.25e-10, 8e-9])
@pytest.mark.parametrize("seed", range(5))
def test_two_body_noisy(beta, seed):
    t, n = decay_record(beta)
    r = fit_two_body_decay(t, add_noise(n, 0.05, seed), V1)
    assert r["beta"] == pytest.approx(beta, rel=0.05)


def test_two_body_time_unit_invariance():
    t, n = decay_record(1e-9)
    n = add_noise(n, 0.05, 2)
    a = fit_two_body_decay(t, n, V1)
    b = fit_two_body_decay(t * 1e3, n, V1)
    assert b["beta"] * 1e3 == pytest.approx(a["beta"], rel=1e-9)


# ---------------------------------------------------------- interspecies

def test_interspecies_curve_matches_integration():
    boson = SpeciesKinetics(1.5e6, 0.02, 0.0, BOSON)
    fermion = SpeciesKinetics(3e6, 0.027, 0.0, CloudShape(150.0, 140.0, 60.0), held=7e5)
    model = MotModel({"52Cr": boson, "53Cr": fermion}, beta_bf=1.8e-9)
    sched = Schedule(1.0, events=(Event(0.3, (("mot", "53Cr", True),)), Event(0.6, (("mot", "53Cr", False),))),
                     mot_on=frozenset({"52Cr"}))
    curve = integrate_schedule(model, sched, points=1001)
    t, n = dual_record(1.8e-9)
    np.testing.assert_allclose(curve.ground["52Cr"], n[::2], rtol=1e-6)


def test_interspecies_noiseless():
    t, n = dual_record(1.8e-9)
    r = fit_interspecies(t, n, 0.3, 0.6, NBAR, 1.5e6, 0.02)
    assert r["beta_bf"] == pytest.approx(1.8e-9, rel=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_interspecies_noisy_two_stage(seed):
    t, n = dual_record(1.8e-9)
    y = add_noise(n, 0.05, seed)
    pre = t < 0.3
    load = fit_linear_loading(t[pre], y[pre])
    r = fit_interspecies(t, y, 0.3, 0.6, NBAR, load["gamma"], load["tau"])
    assert r["beta_bf"] == pytest.approx(1.8e-9, rel=0.10)


def test_interspecies_zero_below_noise_floor():
    t, n = dual_record(0.0)
    r = fit_interspecies(t, add_noise(n, 0.05, 1), 0.3, 0.6, NBAR, 1.5e6, 0.02)
    assert r["beta_bf"] <= 3 * r.error("beta_bf") + 1e-30
    assert r["beta_bf"] < 0.05 * 1.8e-9


def test_interspecies_density_scaling():
    t, n = dual_record(1.8e-9)
    y = add_noise(n, 0.05, 8)
    a = fit_interspecies(t, y, 0.3, 0.6, NBAR, 1.5e6, 0.02)
    b = fit_interspecies(t, y, 0.3, 0.6, 2 * NBAR, 1.5e6, 0.02)
    assert b["beta_bf"] == a["beta_bf"] / 2


def test_interspecies_segment_errors():
    t, n = dual_record(1.8e-9)
    with pytest.raises(FitDomainError):
        fit_interspecies(t, n, 0.3, 1.5, NBAR, 1.5e6, 0.02)
    with pytest.raises(FitDomainError):
        fit_interspecies(t, n, -0.1, 0.6, NBAR, 1.5e6, 0.02)
    with pytest.raises(FitDomainError):
        fit_interspecies(t, n, 0.6, 0.3, NBAR, 1.5e6, 0.02)


# --------------------------------------------------------------------- TOF

def test_tof_noiseless():
    t = np.linspace(0, 10e-3, 10)
    r = fit_tof_temperature(t, tof_width(110e-6, 100e-6, M52, t), M52)
    assert r["temperature"] == pytest.approx(100e-6, rel=1e-12)
    assert r["sigma0"] == pytest.approx(110e-6, rel=1e-12)


def test_tof_single_delay_round_trip():
    t = np.array([0.0, 2.5e-3, 5e-3])
    w = tof_width(110e-6, 100e-6, M52, t)
    assert fit_tof_temperature(t, w, M52)["temperature"] == pytest.approx(100e-6, rel=1e-12)


def test_tof_zero_temperature():
    t = np.linspace(0, 10e-3, 10)
    r = fit_tof_temperature(t, tof_width(110e-6, 0.0, M52, t), M52)
    assert abs(r["temperature"]) < 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_tof_noisy(seed):
    t = np.linspace(0, 10e-3, 10)
    w = add_noise(tof_width(110e-6, 100e-6, M52, t), 0.05, seed)
    assert fit_tof_temperature(t, w, M52)["temperature"] == pytest.approx(100e-6, rel=0.2)


def test_tof_needs_three_points():
    with pytest.raises(FitDomainError):
        fit_tof_temperature([0.0, 1e-3], [1e-4, 1.1e-4], M52)


def test_tof_unit_invariance():
    t = np.linspace(0, 10e-3, 10)
    w = add_noise(tof_width(110e-6, 100e-6, M52, t), 0.05, 0)
    a = fit_tof_temperature(t, w, M52)
    b = fit_tof_temperature(t * 1e3, w, M52 * 1e6)  # ms: k_B T/m t^2 unchanged
    assert b["temperature"] == pytest.approx(a["temperature"], rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(g=st.floats(1e5, 1e9), tau=st.floats(1e-3, 1.0))
def test_loading_round_trip_property(g, tau):
    t = np.linspace(0, 8 * tau, 300)
    r = fit_linear_loading(t, loading_curve(t, g, tau))
    assert r["gamma"] == pytest.approx(g, rel=1e-4)
    assert r["tau"] == pytest.approx(tau, rel=1e-4)


def test_fit_result_record():
    t = np.linspace(0, 0.04, 201)
    r = fit_linear_loading(t, loading_curve(t, 1.6e8, 6e-3))
    text = r.record()
    assert "gamma = 1.6" in text and "converged = True" in text
    d = r.as_dict()
    assert set(d) >= {"gamma", "tau", "gamma_err", "tau_err", "rss", "converged", "iterations"}


def test_input_validation():
    with pytest.raises(FitDomainError):
        fit_linear_loading([0, 1, 1], [0, 1, 2])
    with pytest.raises(FitDomainError):
        fit_two_body_decay([0, 1, 2], [3, 2, 1], -1.0)
    with pytest.raises(FitDomainError):
        fit_linear_loading([0, 1, 2], [0, np.nan, 1])
