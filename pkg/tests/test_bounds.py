"""Analytic thresholds, gradient/Laplacian/Lipschitz bounds, and the
confinement verifier.

Dominance oracles sample random weights across magnitudes and compare the
analytic bounds against the exact quantities from the loss module; the
Lipschitz bound is additionally stressed with difference-quotient sampling in
its normalized regime ||a|| = 1, row norms <= 1.
"""

import json
import math

import numpy as np
import pytest

from villani_net.activations import ActivationProfile, activation_profile
from villani_net.bounds import (
    DEFAULT_RADIUS_SCHEDULE,
    UnboundedActivationError,
    VillaniReport,
    glip_bound,
    grad_lower_bound,
    lambda_c,
    lap_ub_coeffs,
    laplacian_upper_bound,
    v_s,
    verify_villani,
)
from villani_net.net_loss import (
    LabeledDataset,
    LossSpec,
    NetState,
    exact_laplacian,
    full_grad,
)

SIG = activation_profile("sigmoid", 1.0)
TANH = activation_profile("tanh")


def normalized_instance(rng, p=2, d=3, n=6, lam=0.1, act=SIG):
    """Random spec/net with ||a|| = 1 and every row norm <= 1 (b_x <= 1)."""
    X = rng.normal(size=(n, d))
    X /= np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1e-12)
    X *= rng.uniform(0.5, 1.0, size=(n, 1))
    y = rng.choice([-1.0, 1.0], size=n)
    a = rng.normal(size=p)
    a /= np.linalg.norm(a)
    W = rng.normal(size=(p, d))
    spec = LossSpec(data=LabeledDataset(X, y), activation=act, lam=lam)
    return spec, NetState(outer=a, inner=W)


def zero_data_spec(act=SIG, lam=1.0, n=1, d=1):
    return LossSpec(
        data=LabeledDataset(np.zeros((n, d)), np.ones(n)), activation=act, lam=lam
    )


def test_lambda_c_reproduces_critical_value_exactly():
    # sigmoid beta=1 with ||a|| B_x = 1: (1/4)(1/4)/2 = 1/32
    assert lambda_c(SIG, 1.0, 1.0, "lemma") == 0.03125
    assert lambda_c(SIG, 1.0, 1.0, "proof") == 0.125
    assert lambda_c(SIG, 2.0, 0.5, "lemma") == 0.03125  # scale-invariant product
    sp = activation_profile("softplus", 1.0)
    assert lambda_c(sp, 1.0, 1.0, "lemma") == 0.5


def test_lambda_c_proof_is_exactly_four_lemma():
    rng = np.random.default_rng(2)
    for _ in range(20):
        prof = activation_profile(
            str(rng.choice(["sigmoid", "tanh", "softplus"])), float(rng.uniform(0.5, 3))
        )
        an, bx = float(rng.uniform(0, 5)), float(rng.uniform(0, 5))
        assert lambda_c(prof, an, bx, "proof") == 4.0 * lambda_c(prof, an, bx, "lemma")


def test_lambda_c_rejects_bad_inputs():
    with pytest.raises(ValueError):
        lambda_c(SIG, 1.0, 1.0, "main")
    with pytest.raises(ValueError):
        lambda_c(SIG, -1.0, 1.0)


def test_grad_lower_bound_closed_form_points():
    rng = np.random.default_rng(3)
    spec, net = normalized_instance(rng)
    assert grad_lower_bound(spec, net, 0.0) == 0.0
    # tanh has M_D = L = 1 and sigma(0) = 0; with lam = ||a|| = B_x = 1 and
    # w = 2 the bound is (1 - 1/2) * 4 - 1 * 2 = 0
    X = np.array([[1.0]])
    spec = LossSpec(data=LabeledDataset(X, np.array([1.0])), activation=TANH, lam=1.0)
    net = NetState(outer=np.array([1.0]), inner=np.array([[0.3]]))
    assert abs(grad_lower_bound(spec, net, 2.0)) < 1e-15


def test_grad_lower_bound_dominated_by_true_gradient():
    rng = np.random.default_rng(5)
    for _ in range(4):
        spec, net = normalized_instance(rng, lam=float(rng.uniform(0.02, 0.4)))
        for w_fro in (1.0, 10.0, 100.0):
            for _ in range(25):
                U = rng.normal(size=net.inner.shape)
                U /= np.linalg.norm(U)
                cand = net.with_inner(w_fro * U)
                g = full_grad(spec, cand)
                actual = float(np.sum(g * g))
                assert actual >= grad_lower_bound(spec, cand, w_fro) - 1e-9


def test_laplacian_upper_bound_closed_form_points():
    # degenerate profile with zero derivative bounds leaves only lam * p * d
    flat = ActivationProfile(
        kind="sigmoid", beta=1.0, b_sigma=1.0, lipschitz_l=0.0, m_d=0.0,
        m_d_prime=0.0, c0=0.0,
    )
    X = np.array([[0.6, 0.8]])
    spec = LossSpec(data=LabeledDataset(X, np.array([1.0])), activation=flat, lam=0.3)
    net = NetState(outer=np.ones(4), inner=np.zeros((4, 2)))
    assert abs(laplacian_upper_bound(spec, net, 7.0) - 0.3 * 4 * 2) < 1e-15

    # p = d = 1, ||a|| = B_x = 1, sigmoid beta=1, lam = 0.03125 at w = 0:
    # (2.5/4) * M_D' + (1/4)^2/4 + lam
    spec = LossSpec(
        data=LabeledDataset(np.array([[1.0]]), np.array([1.0])),
        activation=SIG,
        lam=0.03125,
    )
    net = NetState(outer=np.array([1.0]), inner=np.array([[0.0]]))
    md_prime = 1.0 / (6.0 * math.sqrt(3.0))
    want = 0.625 * md_prime + 0.015625 + 0.03125
    got = laplacian_upper_bound(spec, net, 0.0)
    assert abs(got - want) < 1e-15
    assert abs(got - 0.1070) < 2e-4


def test_laplacian_upper_bound_dominates_exact_laplacian():
    rng = np.random.default_rng(7)
    for _ in range(4):
        spec, net = normalized_instance(rng, lam=float(rng.uniform(0.0, 0.4)))
        for w_fro in (0.5, 5.0, 50.0):
            for _ in range(25):
                U = rng.normal(size=net.inner.shape)
                U /= np.linalg.norm(U)
                cand = net.with_inner(w_fro * U)
                assert exact_laplacian(spec, cand) <= laplacian_upper_bound(
                    spec, cand, w_fro
                ) + 1e-9


def test_glip_bound_arithmetic_and_affine_shift():
    spec = LossSpec(
        data=LabeledDataset(np.array([[1.0]]), np.array([1.0])),
        activation=SIG,
        lam=0.03125,
    )
    net = NetState(outer=np.array([1.0]), inner=np.array([[0.0]]))
    md_prime = 1.0 / (6.0 * math.sqrt(3.0))
    want = 0.0625 / 4.0 + (3.5 / 4.0) * md_prime + 0.03125
    got = glip_bound(spec, net)
    assert abs(got - want) < 1e-15
    assert abs(got - 0.13108) < 1e-5
    # bound is affine in lam with slope sqrt(p)
    delta = 0.25
    spec2 = LossSpec(data=spec.data, activation=SIG, lam=spec.lam + delta)
    assert abs(glip_bound(spec2, net) - got - delta) < 1e-12
    # per-row variant coincides at ||a|| = B_x = 1
    assert abs(glip_bound(spec, net, per_row=True) - got) < 1e-15


def test_glip_bound_rejects_unbounded_activation():
    sp = activation_profile("softplus", 1.0)
    spec = LossSpec(
        data=LabeledDataset(np.array([[1.0]]), np.array([1.0])), activation=sp, lam=0.1
    )
    net = NetState(outer=np.array([1.0]), inner=np.array([[0.0]]))
    with pytest.raises(UnboundedActivationError):
        glip_bound(spec, net)


def test_glip_bound_dominates_difference_quotients():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(10):
        spec, net = normalized_instance(
            rng,
            p=int(rng.integers(1, 4)),
            d=int(rng.integers(1, 4)),
            lam=float(rng.uniform(0.0, 0.3)),
        )
        cap = glip_bound(spec, net)
        shape = net.inner.shape
        for _ in range(1000):
            scale = 10.0 ** rng.uniform(-2, 2)
            W1 = rng.normal(size=shape) * scale
            W2 = W1 + rng.normal(size=shape) * 10.0 ** rng.uniform(-4, 1)
            num = np.linalg.norm(
                full_grad(spec, net.with_inner(W1)) - full_grad(spec, net.with_inner(W2))
            )
            den = np.linalg.norm(W1 - W2)
            ratio = num / den
            worst = max(worst, ratio / cap)
            assert ratio <= cap * (1.0 + 1e-9)
    assert worst <= 1.0 + 1e-9


def test_v_s_zero_data_closed_form():
    spec = zero_data_spec(lam=1.0)
    net = NetState(outer=np.array([1.0]), inner=np.array([[2.0]]))
    assert abs(v_s(spec, net, 1.0) - 3.0) < 1e-12
    # general form lam^2 ||W||^2 / s - lam p d
    spec = zero_data_spec(lam=0.7, n=2, d=3)
    net = NetState(outer=np.ones(2), inner=np.full((2, 3), 1.5))
    w2 = float(np.sum(net.inner**2))
    assert abs(v_s(spec, net, 0.25) - (0.49 * w2 / 0.25 - 0.7 * 6)) < 1e-10
    with pytest.raises(ValueError):
        v_s(spec, net, 0.0)


def test_v_s_grows_along_rays_above_threshold():
    rng = np.random.default_rng(13)
    spec, net = normalized_instance(rng, lam=0.25)  # 2 * proof threshold
    for _ in range(10):
        U = rng.normal(size=net.inner.shape)
        U /= np.linalg.norm(U)
        vals = [v_s(spec, net.with_inner(r * U), 0.01) for r in (16.0, 64.0, 256.0, 1024.0)]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert vals[-1] > 1e6


def test_verify_villani_above_and_below_threshold():
    rng = np.random.default_rng(17)
    spec, net = normalized_instance(rng, lam=0.0)
    lam_hot = 2.0 * lambda_c(SIG, net.a_norm, spec.data.b_x, "proof")
    hot = LossSpec(data=spec.data, activation=SIG, lam=lam_hot)
    report = verify_villani(hot, net)
    assert report.divergence_verified
    assert report.g1_lemma > 0 and report.grad_lb_coeffs[0] > 0
    assert report.radius_schedule == DEFAULT_RADIUS_SCHEDULE
    assert report.lambda_c_proof == 4.0 * report.lambda_c_lemma

    cold = verify_villani(spec, net)
    assert not cold.divergence_verified
    assert cold.g1_lemma <= 0


def test_verify_villani_degenerate_zero_data():
    spec = zero_data_spec(lam=0.05)
    net = NetState(outer=np.array([1.0]), inner=np.array([[1.0]]))
    report = verify_villani(spec, net)
    assert report.metadata["degenerate_instance"]
    assert report.divergence_verified  # g1 = lam^2 > 0 certifies analytically
    assert report.min_vs_by_radius == ()


def test_verify_villani_report_serializes_to_flat_json():
    rng = np.random.default_rng(19)
    spec, net = normalized_instance(rng, lam=0.25)
    report = verify_villani(spec, net)
    payload = json.loads(report.to_json())
    for key in (
        "lambda_c_lemma",
        "lambda_c_proof",
        "g1_lemma",
        "g1_proof",
        "glip_bound",
        "grad_lb_coeffs",
        "lap_ub_coeffs",
        "divergence_verified",
        "radius_schedule",
        "high_water",
        "temp_s",
        "min_vs_by_radius",
        "metadata",
    ):
        assert key in payload
    assert payload["divergence_verified"] is True
    assert payload["lambda_c_proof"] == pytest.approx(4 * payload["lambda_c_lemma"])


def test_verify_villani_softplus_reports_null_glip():
    sp = activation_profile("softplus", 1.0)
    rng = np.random.default_rng(23)
    spec, net = normalized_instance(rng, act=sp, lam=2.0)  # above softplus threshold
    report = verify_villani(spec, net)
    assert report.glip_bound is None
    assert report.g1_lemma > 0


def test_report_invariant_rejects_inconsistent_thresholds():
    with pytest.raises(ValueError):
        VillaniReport(
            lambda_c_lemma=1.0,
            lambda_c_proof=3.0,
            g1_lemma=0.0,
            g1_proof=0.0,
            glip_bound=1.0,
            grad_lb_coeffs=(0.0, 0.0),
            lap_ub_coeffs=(0.0, 0.0),
            divergence_verified=False,
            radius_schedule=(1.0,),
            high_water=1e6,
            temp_s=0.01,
            min_vs_by_radius=(),
        )


def test_minorant_coeffs_match_bound_functions():
    rng = np.random.default_rng(29)
    spec, net = normalized_instance(rng, lam=0.2)
    report = verify_villani(spec, net)
    g1, g2 = report.grad_lb_coeffs
    lc, ll = report.lap_ub_coeffs
    for w in (0.5, 2.0, 8.0):
        assert abs(grad_lower_bound(spec, net, w) - (g1 * w * w - g2 * w)) < 1e-12
        assert abs(laplacian_upper_bound(spec, net, w) - (lc + ll * w)) < 1e-12
    assert lap_ub_coeffs(spec, net) == (lc, ll)
