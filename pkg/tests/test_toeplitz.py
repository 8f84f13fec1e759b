import logging

import mpmath
import numpy as np
import pytest

from igls.errors import LevinsonBreakdown, ValidationError
from igls.processes import AcvfSeq, ArModelSpec, LinearFilterSpec, acvf_from_ar, acvf_from_filter
from igls.toeplitz import (
    ToeplitzCov,
    apply_inverse,
    dense_inverse,
    dense_solve,
    durbin,
    inverse_norms,
    levinson,
    materialize,
    unwhiten_transpose,
    whiten,
)

from oracles import ar1_inverse, ma1_predictor, toeplitz_dense


def test_materialize_examples():
    np.testing.assert_array_equal(materialize(ToeplitzCov(AcvfSeq([1.0, 0.0]), 2)), np.eye(2))
    np.testing.assert_array_equal(
        materialize(ToeplitzCov(AcvfSeq([1.25, 0.5]), 3)),
        [[1.25, 0.5, 0], [0.5, 1.25, 0.5], [0, 0.5, 1.25]],
    )
    M = materialize(ToeplitzCov(AcvfSeq([4 / 3, 2 / 3]), 2))
    np.testing.assert_allclose(np.linalg.eigvalsh(M), [2 / 3, 2], rtol=1e-14)


def test_materialize_guard():
    with pytest.raises(ValidationError):
        materialize(ToeplitzCov(AcvfSeq([1.0]), 4097))


def test_levinson_white():
    fact = levinson(AcvfSeq([1.0, 0.0]), 4)
    np.testing.assert_array_equal(fact.L, np.eye(4))
    np.testing.assert_array_equal(fact.variances, np.ones(4))


def test_levinson_ar1_three_by_three():
    fact = levinson(acvf_from_ar(ArModelSpec((0.5,)), 2), 3)
    np.testing.assert_allclose(fact.row(1), [-0.5], atol=1e-15)
    np.testing.assert_allclose(fact.row(2), [-0.5, 0.0], atol=1e-15)
    np.testing.assert_allclose(fact.variances, [4 / 3, 1, 1], rtol=1e-14)
    # oracle: dense Cholesky of the 3x3 matrix, Lambda = C C^T
    Lam = toeplitz_dense([4 / 3, 2 / 3, 1 / 3], 3)
    C = np.linalg.cholesky(Lam)
    Cinv = np.linalg.inv(C)
    D = np.diag(Cinv)
    np.testing.assert_allclose(Cinv / D[:, None], fact.L, atol=1e-14)
    np.testing.assert_allclose(1 / D**2, fact.variances, rtol=1e-14)


def test_levinson_ma1_approaches_ar_infinity():
    eta = AcvfSeq([1.25, 0.5])
    fact = levinson(eta, 64)
    assert fact.row(63)[0] == pytest.approx(-0.5, abs=1e-15)
    assert fact.variances[-1] == pytest.approx(1.0, abs=1e-15)
    for j in (1, 5, 20, 63):
        np.testing.assert_allclose(fact.row(j), ma1_predictor(0.5, j), atol=1e-13)
    # against the dense solve of the normal equations
    Lam = toeplitz_dense([1.25, 0.5], 21)
    phi = np.linalg.solve(Lam[:20, :20], Lam[1:21, 0])
    np.testing.assert_allclose(fact.predictor(20), phi, atol=1e-13)


def test_variances_start_at_eta0_and_decrease():
    acvf = acvf_from_ar(ArModelSpec((0.5, -0.25)), 99)
    fact = levinson(acvf, 100)
    assert fact.variances[0] == acvf.values[0]
    assert np.all(np.diff(fact.variances) <= 1e-12)


def test_banded_structure_for_ar_model():
    kappa = (0.5, -0.25)
    fact = levinson(acvf_from_ar(ArModelSpec(kappa), 40), 40)
    for k in range(2, 40):
        row = fact.row(k)
        np.testing.assert_allclose(row[:2], [-0.5, 0.25], atol=1e-10)
        np.testing.assert_allclose(row[2:], 0.0, atol=1e-10)


def test_breakdown_reports_stage():
    with pytest.raises(LevinsonBreakdown) as info:
        levinson(AcvfSeq([1.0, 1.0 - 1e-14]), 5)
    assert info.value.stage == 1


def test_zero_extension_warns_on_tail(caplog):
    acvf = AcvfSeq([1.0, 0.5], tail_bound=0.1)
    with caplog.at_level(logging.WARNING, logger="igls.toeplitz"):
        fact = levinson(acvf, 6)
    assert "set to zero" in caplog.text
    assert fact.padded_from == 2


def test_factors_are_read_only():
    fact = levinson(AcvfSeq([1.25, 0.5]), 5)
    with pytest.raises(ValueError):
        fact.L[0, 0] = 2.0


@pytest.mark.parametrize("T", [8, 64, 256])
def test_reconstruction_matches_dense_inverse(T):
    acvf = acvf_from_ar(ArModelSpec((0.5, -0.25)), T - 1)
    fact = levinson(acvf, T)
    Lam = materialize(ToeplitzCov(acvf, T))
    assert np.abs(fact.reconstructed_inverse() @ Lam - np.eye(T)).max() < 1e-9
    assert np.abs(fact.reconstructed_inverse() - dense_inverse(ToeplitzCov(acvf, T))).max() < 1e-10


def test_apply_inverse_identity():
    B = np.random.default_rng(0).standard_normal((7, 3))
    np.testing.assert_array_equal(apply_inverse(levinson(AcvfSeq([1.0]), 7), B), B)


def test_apply_inverse_ar1_first_column():
    fact = levinson(acvf_from_ar(ArModelSpec((0.5,)), 4), 5)
    e1 = np.eye(5)[:, 0]
    np.testing.assert_allclose(apply_inverse(fact, e1), ar1_inverse(0.5, 1.0, 5)[:, 0], atol=1e-14)


def test_apply_inverse_random():
    rng = np.random.default_rng(1)
    coeffs = {i: c for i, c in enumerate(rng.uniform(-0.5, 0.5, 6))}
    coeffs[0] = 1.0
    acvf = acvf_from_filter(LinearFilterSpec(coeffs), 127)
    B = rng.standard_normal((128, 4))
    fact = levinson(acvf, 128)
    ref = dense_solve(ToeplitzCov(acvf, 128), B)
    assert np.abs(apply_inverse(fact, B) - ref).max() <= 1e-10 * np.abs(ref).max()


def test_apply_inverse_dimension_mismatch():
    with pytest.raises(ValidationError):
        apply_inverse(levinson(AcvfSeq([1.0]), 4), np.ones(5))


def test_whitening_adjoint():
    rng = np.random.default_rng(2)
    fact = levinson(AcvfSeq([1.25, 0.5]), 30)
    a, b = rng.standard_normal(30), rng.standard_normal(30)
    assert whiten(fact, a) @ b == pytest.approx(a @ unwhiten_transpose(fact, b), rel=1e-12)
    np.testing.assert_allclose(unwhiten_transpose(fact, whiten(fact, a)), apply_inverse(fact, a), atol=1e-12)


def test_inverse_norms_identity():
    assert inverse_norms(levinson(AcvfSeq([1.0]), 50)) == (1.0, 1.0)


def test_inverse_norms_ar1():
    fact = levinson(acvf_from_ar(ArModelSpec((0.5,)), 15), 16)
    l1, linf = inverse_norms(fact)
    assert l1 == pytest.approx(2.25, abs=1e-12)
    assert linf == pytest.approx(2.25, abs=1e-12)


def test_inverse_norms_blocking_matches_dense():
    acvf = acvf_from_ar(ArModelSpec((0.5, -0.25)), 299)
    fact = levinson(acvf, 300)
    ref = dense_inverse(ToeplitzCov(acvf, 300))
    for block in (7, 64, 300):
        l1, linf = inverse_norms(fact, block=block)
        assert l1 == pytest.approx(np.abs(ref).sum(axis=0).max(), rel=1e-10)
        assert linf == pytest.approx(np.abs(ref).sum(axis=1).max(), rel=1e-10)


def test_inverse_norms_ar2_plateau():
    kappa = (0.5, -0.25)
    norms = [inverse_norms(levinson(acvf_from_ar(ArModelSpec(kappa), T - 1), T))[1] for T in (128, 256, 512, 1024)]
    ratios = np.array(norms[1:]) / np.array(norms[:-1])
    assert np.all(np.abs(ratios[1:] - 1) <= 1e-3)
    assert np.all(np.diff(norms) >= -1e-12)


def test_durbin_high_precision_matches_float():
    with mpmath.workdps(40):
        eta = np.array([mpmath.mpf("1.25"), mpmath.mpf("0.5")] + [mpmath.mpf(0)] * 10, dtype=object)
        phis, var = durbin(eta, 10)
    fphis, fvar = durbin(np.array([1.25, 0.5] + [0.0] * 10), 10)
    np.testing.assert_allclose(np.array(phis[-1], dtype=float), fphis[-1], atol=1e-15)
    np.testing.assert_allclose(np.array(var, dtype=float), fvar, rtol=1e-15)


def test_berk_bound_ma1():
    """sum_{i<=j} |a_ij - a_i| <= C sum_{i>j} |a_i| with one constant for j in [16, 128].

    The finite-order coefficients differ from the AR(infinity) ones by about
    0.5^j, far below double precision, so the recursion runs in 80 digits.
    """
    theta = mpmath.mpf("0.5")
    jmax = 128
    with mpmath.workdps(80):
        eta = np.array([1 + theta**2, theta] + [mpmath.mpf(0)] * jmax, dtype=object)
        phis, _ = durbin(eta, jmax)
        ratios = []
        for j in range(16, jmax + 1):
            a_j = [-p for p in phis[j - 1]]
            a_inf = [(-theta) ** i for i in range(1, j + 1)]
            # closed form of the order-j coefficients
            exact = [(-theta) ** i * (1 - theta ** (2 * (j + 1 - i))) / (1 - theta ** (2 * (j + 1)))
                     for i in range(1, j + 1)]
            assert max(abs(x - y) for x, y in zip(a_j, exact)) < mpmath.mpf(10) ** -60
            lhs = sum(abs(x - y) for x, y in zip(a_j, a_inf))
            rhs = theta ** (j + 1) / (1 - theta)  # sum_{i>j} |a_i|
            ratios.append(float(lhs / rhs))
    ratios = np.array(ratios)
    C = ratios.max()
    assert C < 0.51
    # the ratio settles at theta
    np.testing.assert_allclose(ratios[-20:], 0.5, atol=1e-3)
