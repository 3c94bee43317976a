"""Euler-Maruyama integration of the training diffusion and rate fitting.

Oracles: the zero-data problem is an Ornstein-Uhlenbeck process with known
stationary variance s/(2 lam), stationary mean quadratic energy s*p*d/4, and
relaxation rate 2 lam for the quadratic observable; the integrator's weak
first order is checked on a common-random-numbers dt-halving ladder.
"""

import math

import numpy as np
import pytest

from villani_net.activations import activation_profile
from villani_net.net_loss import (
    LabeledDataset,
    LossSpec,
    NetState,
    full_grad,
    risk,
    stacked_grad,
    stacked_risk,
)
from villani_net.sde import (
    EnsembleSeries,
    SdeConfig,
    default_dt,
    em_step,
    fit_rate,
    run_ensemble,
)
from villani_net.sgd import DivergenceError, InitSpec

SIG = activation_profile("sigmoid", 1.0)


def zero_data_spec(lam=1.0, n=1, d=1):
    return LossSpec(
        data=LabeledDataset(np.zeros((n, d)), np.ones(n)), activation=SIG, lam=lam
    )


def small_spec(rng, n=5, d=2, lam=0.1, act=SIG):
    X = rng.normal(size=(n, d))
    X /= np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1e-12)
    y = rng.choice([-1.0, 1.0], size=n)
    return LossSpec(data=LabeledDataset(X, y), activation=act, lam=lam)


def test_em_step_zero_temperature_is_gradient_flow():
    rng = np.random.default_rng(0)
    spec = small_spec(rng)
    net = NetState(outer=rng.normal(size=2), inner=rng.normal(size=(2, 2)))
    out = em_step(spec, net, 0.0, 0.05, np.zeros((2, 2)))
    want = net.inner - 0.05 * full_grad(spec, net)
    assert np.max(np.abs(out.inner - want)) < 1e-15


def test_em_step_fixed_point_with_zero_noise():
    spec = zero_data_spec(lam=1.0, n=1, d=2)
    net = NetState(outer=np.ones(3), inner=np.zeros((3, 2)))  # grad = lam * 0 = 0
    out = em_step(spec, net, 0.7, 0.1, np.zeros((3, 2)))
    assert np.array_equal(out.inner, net.inner)


def test_em_step_validates_inputs():
    spec = zero_data_spec()
    net = NetState(outer=np.ones(1), inner=np.zeros((1, 1)))
    with pytest.raises(ValueError):
        em_step(spec, net, 0.5, 0.0, np.zeros((1, 1)))
    with pytest.raises(ValueError):
        em_step(spec, net, 0.5, 0.1, np.zeros((2, 2)))


def test_batched_helpers_match_single_net_evaluations():
    rng = np.random.default_rng(1)
    spec = small_spec(rng, n=4, d=3, lam=0.2)
    outer = rng.normal(size=2)
    Ws = rng.normal(size=(6, 2, 3))
    risks = stacked_risk(spec, outer, Ws)
    grads = stacked_grad(spec, outer, Ws)
    for i in range(6):
        net = NetState(outer=outer, inner=Ws[i])
        assert abs(risks[i] - risk(spec, net)) < 1e-12
        assert np.max(np.abs(grads[i] - full_grad(spec, net))) < 1e-12


def test_run_ensemble_gradient_flow_risk_is_monotone():
    rng = np.random.default_rng(2)
    spec = small_spec(rng)
    cfg = SdeConfig(temp_s=0.0, dt=0.01, horizon_t=1.0, ensemble_m=1, seed=3)
    series = run_ensemble(spec, cfg, np.ones(2) / math.sqrt(2))
    diffs = np.diff(series.mean_risk)
    assert np.all(diffs <= 1e-6)


def test_run_ensemble_same_seed_is_bitwise_identical():
    rng = np.random.default_rng(3)
    spec = small_spec(rng)
    cfg = SdeConfig(temp_s=0.3, dt=0.02, horizon_t=0.5, ensemble_m=8, seed=11)
    s1 = run_ensemble(spec, cfg, np.ones(2) / math.sqrt(2))
    s2 = run_ensemble(spec, cfg, np.ones(2) / math.sqrt(2))
    assert np.array_equal(s1.mean_risk, s2.mean_risk)
    assert np.array_equal(s1.final_inners, s2.final_inners)


def test_run_ensemble_ou_stationary_variance_and_energy():
    # zero-data quadratic: stationary coordinate variance s/(2 lam) = 0.25
    spec = zero_data_spec(lam=1.0)
    cfg = SdeConfig(
        temp_s=0.5, dt=0.02, horizon_t=8.0, ensemble_m=4000, seed=7, record_every=100
    )
    outer = np.array([1.0])
    series = run_ensemble(spec, cfg, outer)
    var = float(np.var(series.final_inners[:, 0, 0]))
    assert abs(var - 0.25) < 0.03
    # stationary mean quadratic energy s * p * d / 4 above the logistic floor
    const = risk(spec, NetState(outer=outer, inner=np.zeros((1, 1))))
    assert abs((series.mean_risk[-1] - const) - 0.5 / 4.0) < 0.02


def test_run_ensemble_accepts_unbounded_activation():
    rng = np.random.default_rng(4)
    spec = small_spec(rng, act=activation_profile("softplus", 1.0), lam=1.0)
    cfg = SdeConfig(temp_s=0.1, dt=0.01, horizon_t=0.2, ensemble_m=3, seed=1)
    series = run_ensemble(spec, cfg, np.ones(2) / math.sqrt(2))
    assert series.notes == []
    assert len(series.t) == cfg.num_steps + 1


def test_run_ensemble_warns_when_dt_violates_smoothness_cap():
    rng = np.random.default_rng(5)
    spec = small_spec(rng)
    cfg = SdeConfig(temp_s=0.1, dt=9.0, horizon_t=9.0, ensemble_m=1, seed=1)
    with pytest.warns(UserWarning):
        series = run_ensemble(spec, cfg, np.ones(2) / math.sqrt(2))
    assert series.notes


def test_weak_order_one_on_common_noise_ladder():
    # coupled Brownian increments across h, h/2, h/4 so the integrator bias
    # dominates the Monte Carlo noise in the Richardson differences
    m = 20000
    spec = zero_data_spec(lam=1.0)
    s, T = 0.5, 2.0
    fine_steps = 160
    h_fine = T / fine_steps
    rng = np.random.default_rng(12)
    xi = rng.standard_normal((fine_steps, m, 1))

    def terminal_energy(block: int) -> float:
        h = h_fine * block
        net = NetState(outer=np.ones(m), inner=np.zeros((m, 1)))
        for k0 in range(0, fine_steps, block):
            eta = xi[k0 : k0 + block].sum(axis=0) / math.sqrt(block)
            net = em_step(spec, net, s, h, eta)
        return 0.5 * float(np.mean(net.inner[:, 0] ** 2))

    g_h, g_h2, g_h4 = terminal_energy(4), terminal_energy(2), terminal_energy(1)
    d1 = g_h - g_h2
    d2 = g_h2 - g_h4
    assert d2 != 0
    assert 1.5 <= d1 / d2 <= 2.5


def test_fit_rate_recovers_constructed_exponential():
    t = np.linspace(0, 3, 61)
    series = EnsembleSeries(
        t=t,
        mean_risk=np.exp(-2.0 * t) + 0.1,
        stderr=np.zeros_like(t),
        m=1,
        final_inners=np.zeros((1, 1, 1)),
        notes=[],
    )
    lam_hat, r2 = fit_rate(series, plateau=0.1)
    assert abs(lam_hat - 2.0) < 1e-3
    assert r2 > 0.999999


def test_fit_rate_rejects_flat_or_short_series():
    t = np.linspace(0, 1, 20)
    flat = EnsembleSeries(
        t=t,
        mean_risk=np.ones_like(t),
        stderr=np.zeros_like(t),
        m=1,
        final_inners=np.zeros((1, 1, 1)),
        notes=[],
    )
    with pytest.raises(ValueError):
        fit_rate(flat, plateau=1.0)
    short = EnsembleSeries(
        t=t[:5],
        mean_risk=np.exp(-t[:5]) + 0.5,
        stderr=np.zeros(5),
        m=1,
        final_inners=np.zeros((1, 1, 1)),
        notes=[],
    )
    with pytest.raises(ValueError):
        fit_rate(short, plateau=0.5)


def test_fit_rate_ou_relaxation_is_twice_lambda():
    spec = zero_data_spec(lam=1.0)
    cfg = SdeConfig(
        temp_s=0.5, dt=0.01, horizon_t=5.0, ensemble_m=3000, seed=21, record_every=10
    )
    series = run_ensemble(spec, cfg, np.array([1.0]))
    lam_hat, r2 = fit_rate(series)
    assert abs(lam_hat - 2.0) / 2.0 < 0.2
    assert r2 > 0.95


def test_sde_config_validation_and_default_dt():
    with pytest.raises(ValueError):
        SdeConfig(temp_s=-1.0, dt=0.1, horizon_t=1.0)
    with pytest.raises(ValueError):
        SdeConfig(temp_s=0.1, dt=0.0, horizon_t=1.0)
    with pytest.raises(ValueError):
        SdeConfig(temp_s=0.1, dt=2.0, horizon_t=1.0)
    with pytest.raises(ValueError):
        SdeConfig(temp_s=0.1, dt=0.1, horizon_t=1.0, ensemble_m=0)
    rng = np.random.default_rng(6)
    spec = small_spec(rng)
    net = NetState(outer=np.ones(2) / math.sqrt(2), inner=np.zeros((2, 2)))
    assert default_dt(spec, net) == 1e-3
    hot = LossSpec(data=spec.data, activation=SIG, lam=500.0)
    assert default_dt(hot, net) < 1e-3
    sp = small_spec(rng, act=activation_profile("softplus", 1.0))
    assert default_dt(sp, net) == 1e-3


def test_series_csv_format(tmp_path):
    rng = np.random.default_rng(7)
    spec = small_spec(rng)
    cfg = SdeConfig(temp_s=0.2, dt=0.05, horizon_t=0.25, ensemble_m=4, seed=2)
    series = run_ensemble(spec, cfg, np.ones(2) / math.sqrt(2))
    path = tmp_path / "series.csv"
    series.to_csv(path)
    rows = path.read_text().strip().split("\n")
    assert rows[0] == "t,mean_risk,stderr,m"
    assert len(rows) == len(series.t) + 1
    assert rows[1].endswith(",4")


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_run_ensemble_divergence_abort():
    spec = zero_data_spec(lam=1.0)
    # dt = 3 makes |1 - dt * lam| = 2, a geometric blow-up
    cfg = SdeConfig(temp_s=0.0, dt=3.0, horizon_t=6000.0, ensemble_m=1, seed=0)
    with pytest.warns(UserWarning):
        with pytest.raises(DivergenceError):
            run_ensemble(spec, cfg, np.array([1.0]))
