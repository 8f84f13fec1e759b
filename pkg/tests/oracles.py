"""Slow, independent reference computations used only by the tests.

None of these call into the package's numerical routines.
"""

import numpy as np


def psi_weights(kappa, n):
    """MA(infinity) weights of an AR model: psi_j = sum_i kappa_i psi_{j-i}."""
    kappa = list(kappa)
    psi = np.zeros(n)
    psi[0] = 1.0
    for j in range(1, n):
        psi[j] = sum(k * psi[j - i] for i, k in enumerate(kappa, start=1) if j - i >= 0)
    return psi


def ar_acvf_psi(kappa, sigma2, K, n=4000):
    """eta_k = sigma^2 sum_j psi_j psi_{j+k} from truncated MA weights."""
    psi = psi_weights(kappa, n)
    return np.array([sigma2 * psi[: n - k] @ psi[k:] for k in range(K + 1)])


def filter_acvf_loop(coeffs, sigma2, K):
    out = []
    for k in range(K + 1):
        out.append(sigma2 * sum(v * coeffs.get(i + k, 0.0) for i, v in coeffs.items()))
    return np.array(out)


def filter_sdf_loop(coeffs, sigma2, w):
    w = np.atleast_1d(w)
    g = np.zeros(w.shape, dtype=complex)
    for i, v in coeffs.items():
        g += v * np.exp(-1j * i * w)
    return sigma2 / (2 * np.pi) * np.abs(g) ** 2


def toeplitz_dense(eta, T):
    eta = np.concatenate([np.asarray(eta, float), np.zeros(max(0, T - len(eta)))])
    idx = np.arange(T)
    return eta[np.abs(idx[:, None] - idx[None, :])]


def ar1_inverse(phi, sigma2, T):
    """Tridiagonal inverse of the AR(1) Toeplitz covariance."""
    M = np.zeros((T, T))
    for i in range(T):
        M[i, i] = 1 + phi**2 if 0 < i < T - 1 else 1.0
        if i + 1 < T:
            M[i, i + 1] = M[i + 1, i] = -phi
    return M / sigma2


def ma1_predictor(theta, j):
    """Exact order-j predictor error coefficients a_{ij} of an MA(1) process."""
    i = np.arange(1, j + 1)
    return (-theta) ** i * (1 - theta ** (2 * (j + 1 - i))) / (1 - theta ** (2 * (j + 1)))


def gls_dense(X, y, Lam):
    Li = np.linalg.inv(Lam)
    return np.linalg.solve(X.T @ Li @ X, X.T @ Li @ y)


def periodogram_loop(X, y):
    """J_xx, J_xY at w_t = 2 pi t / T, t = 1..T, by explicit sums."""
    T, d = X.shape
    t = np.arange(1, T + 1)
    Jxx = np.zeros((T, d, d), dtype=complex)
    JxY = np.zeros((T, d), dtype=complex)
    for m in range(1, T + 1):
        e = np.exp(1j * 2 * np.pi * m / T * t)
        dx = e @ X
        dy = e @ y
        Jxx[m - 1] = np.outer(dx, dx.conj()) / (2 * np.pi * T)
        JxY[m - 1] = dx * np.conj(dy) / (2 * np.pi * T)
    return Jxx, JxY
