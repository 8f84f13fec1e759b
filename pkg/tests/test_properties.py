"""Randomized invariants across modules."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from igls.asymptotics import McStudyConfig, MethodSpec, mc_study
from igls.design import Design, builtin_design, sample_rho
from igls.errors import ValidationError
from igls.estimators import (
    RegressionSample,
    TimeDomainGLS,
    fgls_ar,
    gls_frequency,
    gls_time,
    ols,
    periodograms,
)
from igls.processes import (
    AcvfSeq,
    ArModelSpec,
    LinearFilterSpec,
    acvf_from_ar,
    acvf_from_filter,
    acvf_from_sdf,
    arma_sdf,
    check_grid,
    constant_sdf,
    sdf_from_acvf,
    sdf_from_filter,
    simulate,
)
from igls.toeplitz import levinson

from oracles import periodogram_loop, toeplitz_dense

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

coef = st.floats(-0.6, 0.6, allow_nan=False).filter(lambda c: abs(c) > 1e-3)


@st.composite
def filters(draw):
    lags = draw(st.lists(st.integers(-4, 4).filter(lambda i: i != 0), max_size=4, unique=True))
    coeffs = {0: 1.0, **{i: draw(coef) for i in lags}}
    sigma2 = draw(st.floats(0.2, 5.0))
    try:
        return LinearFilterSpec(coeffs, sigma2)
    except ValidationError:
        assume(False)


@st.composite
def stationary_ar(draw):
    # draw roots outside the unit circle, then expand
    p = draw(st.integers(1, 3))
    roots = [draw(st.floats(1.25, 4.0)) * draw(st.sampled_from([-1.0, 1.0])) for _ in range(p)]
    poly = np.poly(1.0 / np.array(roots))  # 1 - kappa_1 z - ... in reversed form
    return ArModelSpec(tuple(float(-c) for c in poly[1:]))


# -- processes ------------------------------------------------------------------


@SETTINGS
@given(filters())
def test_power_transfer_exact_at_support_width(spec):
    K = spec.width
    eta = acvf_from_filter(spec, K).values
    w = check_grid()
    series = (eta[0] + 2 * sum(eta[k] * np.cos(k * w) for k in range(1, K + 1))) / (2 * math.pi)
    assert np.abs(sdf_from_filter(spec)(w) - series).max() < 1e-12


@SETTINGS
@given(filters(), stationary_ar())
def test_densities_even_and_positive(spec, ar):
    w = check_grid()
    for f in (sdf_from_filter(spec), ar.sdf(), sdf_from_acvf(acvf_from_filter(spec, spec.width)),
              arma_sdf(ar=ar.kappa, ma=[0.3])):
        v = f(w)
        assert np.all(v > 0)
        np.testing.assert_allclose(v, f(-w), rtol=0, atol=1e-12 * v.max())


@SETTINGS
@given(filters())
def test_acvf_round_trip(spec):
    eta = acvf_from_filter(spec, spec.width)
    back = acvf_from_sdf(sdf_from_acvf(eta), spec.width + 3)
    np.testing.assert_allclose(back.values, eta.padded(spec.width + 4), atol=1e-8 * max(1.0, eta.values[0]))


@settings(max_examples=15, deadline=None)
@given(filters(), st.integers(0, 2**63))
def test_simulation_bit_reproducible(spec, seed):
    assert simulate(spec, 300, seed).tobytes() == simulate(spec, 300, seed).tobytes()


# -- toeplitz -------------------------------------------------------------------


@SETTINGS
@given(st.one_of(filters().map(lambda s: acvf_from_filter(s, s.width)), stationary_ar().map(lambda a: acvf_from_ar(a, 300))),
       st.sampled_from([3, 17, 64, 200]))
def test_factorization_inverts(acvf, T):
    fact = levinson(acvf, T)
    Lam = toeplitz_dense(acvf.padded(T), T)
    assert np.abs(fact.reconstructed_inverse() @ Lam - np.eye(T)).max() < 1e-9
    assert np.all(np.diff(fact.variances) <= 1e-12)


@SETTINGS
@given(stationary_ar())
def test_ar_rows_are_banded(ar):
    N = ar.order
    fact = levinson(acvf_from_ar(ar, 60), 40)
    for k in range(N, 40):
        row = fact.row(k)
        np.testing.assert_allclose(row[:N], -np.array(ar.kappa), atol=1e-10)
        np.testing.assert_allclose(row[N:], 0.0, atol=1e-10)


# -- design ---------------------------------------------------------------------


@SETTINGS
@given(st.integers(4, 60), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_sample_rho_unit_diagonal(T, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((T, d)) * 10.0 ** rng.uniform(-6, 6, d)
    assert np.all(np.diag(sample_rho(Design(X), 0)) == 1.0)


# -- estimators -----------------------------------------------------------------


def _random_sample(seed, T, d):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(T), rng.standard_normal((T, d - 1))]) if d > 1 else np.ones((T, 1))
    return RegressionSample(Design(X), rng.standard_normal(T)), rng


@SETTINGS
@given(filters(), st.floats(1e-3, 1e3), st.integers(0, 2**32 - 1))
def test_gls_scale_invariant(spec, c, seed):
    s, _ = _random_sample(seed, 80, 3)
    eta = acvf_from_filter(spec, spec.width)
    a = gls_time(s, eta).beta_hat
    b = gls_time(s, eta.scaled(c)).beta_hat
    assert np.abs(a - b).max() <= 1e-10 * max(1.0, np.abs(a).max())


@SETTINGS
@given(filters(), st.integers(0, 2**32 - 1))
def test_estimators_equivariant(spec, seed):
    s, rng = _random_sample(seed, 64, 3)
    gamma = rng.uniform(-5, 5, 3)
    shifted = RegressionSample(s.design, s.y + s.design.X @ gamma)
    eta = acvf_from_filter(spec, spec.width)
    for fit in (ols, lambda r: gls_time(r, eta), lambda r: gls_frequency(r, sdf_from_filter(spec)), fgls_ar):
        np.testing.assert_allclose(fit(shifted).beta_hat, fit(s).beta_hat + gamma, atol=1e-10 * (1 + np.abs(gamma).max()))


@settings(max_examples=20, deadline=None)
@given(filters(), st.integers(8, 256), st.integers(0, 2**32 - 1))
def test_blue_dominance(spec, T, seed):
    s, _ = _random_sample(seed, T, 2)
    X = s.design.X
    Sig = toeplitz_dense(acvf_from_filter(spec, spec.width).values, T)
    # dense oracle route
    gls_cov = np.linalg.inv(X.T @ np.linalg.solve(Sig, X))
    P = np.linalg.inv(X.T @ X) @ X.T
    ols_cov = P @ Sig @ P.T
    assert np.linalg.eigvalsh(ols_cov - gls_cov).min() >= -1e-10 * np.abs(ols_cov).max()
    # the implementation's linear operators
    G = TimeDomainGLS(s.design, acvf_from_filter(spec, spec.width)).G
    np.testing.assert_allclose(G @ Sig @ G.T, gls_cov, rtol=1e-8, atol=1e-12)


@SETTINGS
@given(st.integers(2, 40), st.integers(0, 2**32 - 1))
def test_periodograms_hermitian_psd_rank_one(T, seed):
    s, _ = _random_sample(seed, T, 3) if T > 3 else _random_sample(seed, T, 1)
    P = periodograms(s)
    Jxx, JxY = periodogram_loop(s.design.X, s.y)
    np.testing.assert_allclose(P.Jxx, Jxx, atol=1e-12 * max(1, np.abs(Jxx).max()))
    np.testing.assert_allclose(P.JxY, JxY, atol=1e-12 * max(1, np.abs(JxY).max()))
    for J in P.Jxx:
        np.testing.assert_allclose(J, J.conj().T, atol=1e-14 * max(1, np.abs(J).max()))
        ev = np.linalg.eigvalsh(J)
        assert ev.min() >= -1e-12 * max(1, ev.max())
        assert np.linalg.matrix_rank(J, tol=1e-10 * max(1e-300, ev.max())) <= 1
    # Parseval: summing over all frequencies recovers X^T X / (2 pi)
    XtX = s.design.X.T @ s.design.X
    np.testing.assert_allclose(P.Jxx.sum(axis=0).real, XtX / (2 * math.pi), rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("kind,params", [
    ("cosine_pair", {"omega1": math.pi / 2, "omega2": math.pi}),
    ("composite", {"columns": [{"kind": "intercept"}, {"kind": "cosine", "params": {"omega": 1.0}}]}),
])
def test_unbiased_over_replicates(kind, params):
    T, R = 512, 2000
    ar = ArModelSpec((0.5,))
    design = builtin_design(kind, params, T)
    methods = (
        MethodSpec("ols", "ols"),
        MethodSpec("gls", "gls_time", acvf_from_ar(ar, T - 1), ar.sdf()),
        MethodSpec("gls_white", "gls_time", AcvfSeq([1.0]), constant_sdf()),
        MethodSpec("freq", "gls_frequency", sdf=ar.sdf()),
        MethodSpec("fgls", "fgls_ar", order=1),
    )
    cfg = McStudyConfig(design, ar.to_filter(), methods, np.full(design.d, 0.7), R, 424242,
                        error_sdf=ar.sdf(), error_acvf=acvf_from_ar(ar, T - 1))
    res = mc_study(cfg, workers=4, normality=False)
    for label, S in res.samples.items():
        se = S.std(axis=0, ddof=1) / math.sqrt(R)
        assert np.all(np.abs(S.mean(axis=0)) < 4 * se), label
