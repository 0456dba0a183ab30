"""Independent reference computations used by the tests."""

import itertools
import math

import numpy as np


def gauss_nodes(Sigma, n=16):
    """Quadrature nodes and weights for eps ~ N(0, Sigma)."""
    x, w = np.polynomial.hermite_e.hermegauss(n)
    w = w / math.sqrt(2 * math.pi)
    N = Sigma.shape[0]
    L = np.linalg.cholesky(Sigma + 1e-300 * np.eye(N))
    grid = np.array(list(itertools.product(range(n), repeat=N)))
    u = x[grid]
    weights = np.prod(w[grid], axis=1)
    return u @ L.T, weights


def one_period_log_expectation(p, X, eps, wts, payoff_log):
    """log E[exp(m' + dd' + payoff_log(X'))] by quadrature at state X."""
    lam = p.lambda_bar + p.theta @ X
    m = -p.r_f - 0.5 * lam @ p.Sigma @ lam - eps @ lam
    dd = p.g_bar + p.phi @ X - 0.5 * p.sigma_D @ p.Sigma @ p.sigma_D + eps @ p.sigma_D
    Xn = (p.Pi @ X)[None, :] + eps @ p.sigma_X
    return math.log(float(np.sum(wts * np.exp(m + dd + payoff_log(Xn)))))


def strip_coefficients_by_quadrature(p, n_max, n_nodes=16):
    """Fit A(n), B(n) from quadrature prices at K + 1 states."""
    eps, wts = gauss_nodes(p.Sigma, n_nodes)
    K = p.K
    states = [np.zeros(K)] + [0.1 * e for e in np.eye(K)]
    A, B = [0.0], [np.zeros(K)]
    for _ in range(n_max):
        a, b = A[-1], B[-1]
        vals = [one_period_log_expectation(p, X, eps, wts, lambda Xn: a + Xn @ b) for X in states]
        A.append(vals[0])
        B.append(np.array([(v - vals[0]) / 0.1 for v in vals[1:]]))
    return np.array(A), np.array(B)


def euler_residual_market(p, mc, X, n_nodes=16):
    """log E[M' exp(r')] with the log-linear return implied by ``mc`` at state X."""
    eps, wts = gauss_nodes(p.Sigma, n_nodes)
    k0, k1 = mc.kappa0, mc.kappa1
    pd_now = mc.A + X @ mc.B
    return one_period_log_expectation(p, X, eps, wts, lambda Xn: k0 + k1 * (mc.A + Xn @ mc.B) - pd_now)


def normal_equations(X, y):
    return np.linalg.solve(X.T @ X, X.T @ y)


def white_cov(X, e):
    XtX_inv = np.linalg.inv(X.T @ X)
    meat = sum(np.outer(X[t] * e[t], X[t] * e[t]) for t in range(len(e)))
    return XtX_inv @ meat @ XtX_inv


def newey_west_loop(X, e, L):
    XtX_inv = np.linalg.inv(X.T @ X)
    u = X * e[:, None]
    S = u.T @ u
    for j in range(1, L + 1):
        w = 1 - j / (L + 1)
        G = sum(np.outer(u[t], u[t - j]) for t in range(j, len(e)))
        S = S + w * (G + G.T)
    return XtX_inv @ S @ XtX_inv


def gaussian_loglik_dense(y, mean, cov):
    from scipy.stats import multivariate_normal
    return float(multivariate_normal(mean=mean, cov=cov).logpdf(y))


def latent_ar1_moments(n, g, rho, sd, sz, corr):
    """Mean and covariance of y[1..n] with y[t+1] = g + z[t] + sd e[t+1],
    z[t+1] = rho z[t] + sz u[t+1], corr(e, u) = corr, z stationary.
    """
    vz = sz * sz / (1 - rho * rho)
    C = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            k = abs(i - j)
            c = vz * rho ** k
            if k == 0:
                c += sd * sd
            elif True:
                # cov(z[t+k-1], e[t]) = rho^(k-1) corr sd sz for the later y
                c += rho ** (k - 1) * corr * sd * sz
            C[i, j] = c
    return np.full(n, g), C
