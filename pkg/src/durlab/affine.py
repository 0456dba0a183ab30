"""Affine dividend-strip pricing.

State dynamics and pricing conventions (``X`` is K-dim, shocks ``eps`` are
N-dim with covariance ``Sigma``)::

    X[t+1]  = Pi X[t] + sigma_X' eps[t+1]                  sigma_X: N x K
    dd[t+1] = g_bar + phi'X[t] - sigma_D'Sigma sigma_D / 2 + sigma_D' eps[t+1]
    lam[t]  = lambda_bar + theta X[t]                      theta: N x K
    m[t+1]  = -r_f - lam'Sigma lam / 2 - lam' eps[t+1]

The log strip ratio is ``s^n = A(n) + B(n)'X``.  In the two-state model the
states are ordered ``(z, y)``: expected-growth state first, risk-price state
second, with ``lam = sigma_lambda (lambda_bar + y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DegeneracyError, NumericalError, ParameterError, ValidationError
from .kvfile import dump_kv, to_float, to_matrix, to_vector

RCOND_MIN = 1e-10


def _frozen(a, ndim=None, name="array"):
    out = np.array(a, dtype=float, copy=True)
    if ndim is not None and out.ndim != ndim:
        raise ParameterError(name, f"expected {ndim}-d array, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ParameterError(name, "non-finite entry")
    out.setflags(write=False)
    return out


def _check_cov(Sigma, N):
    if Sigma.shape != (N, N):
        raise ParameterError("Sigma", f"expected {N}x{N}, got {Sigma.shape}")
    if not np.allclose(Sigma, Sigma.T, atol=1e-12, rtol=0):
        raise ParameterError("Sigma", "not symmetric")
    if np.linalg.eigvalsh(Sigma).min() < -1e-12 * max(1.0, np.abs(Sigma).max()):
        raise ParameterError("Sigma", "not positive semi-definite")


@dataclass(frozen=True)
class ModelParams:
    """General K-state affine economy (see module docstring for conventions)."""

    Pi: np.ndarray
    sigma_X: np.ndarray
    Sigma: np.ndarray
    phi: np.ndarray
    g_bar: float
    sigma_D: np.ndarray
    lambda_bar: np.ndarray
    theta: np.ndarray
    r_f: float
    gamma: np.ndarray | None = None

    def __post_init__(self):
        Pi = _frozen(self.Pi, 2, "Pi")
        K = Pi.shape[0]
        if Pi.shape != (K, K):
            raise ParameterError("Pi", f"must be square, got {Pi.shape}")
        sigma_X = _frozen(self.sigma_X, 2, "sigma_X")
        N = sigma_X.shape[0]
        if sigma_X.shape != (N, K):
            raise ParameterError("sigma_X", f"expected N x {K}, got {sigma_X.shape}")
        Sigma = _frozen(self.Sigma, 2, "Sigma")
        _check_cov(Sigma, N)
        theta = _frozen(self.theta, 2, "theta")
        if theta.shape != (N, K):
            raise ParameterError("theta", f"expected {N}x{K}, got {theta.shape}")
        vecs = {"phi": (self.phi, K), "sigma_D": (self.sigma_D, N), "lambda_bar": (self.lambda_bar, N),
                "gamma": (np.zeros(K) if self.gamma is None else self.gamma, K)}
        for name, (v, n) in vecs.items():
            v = _frozen(v, 1, name)
            if v.shape != (n,):
                raise ParameterError(name, f"expected length {n}, got {v.shape[0]}")
            object.__setattr__(self, name, v)
        radius = np.abs(np.linalg.eigvals(Pi)).max() if K else 0.0
        if not radius < 1.0:
            raise ParameterError("Pi", f"spectral radius {radius:.6g} is not below 1")
        for name in ("g_bar", "r_f"):
            x = float(getattr(self, name))
            if not math.isfinite(x):
                raise ParameterError(name, "non-finite")
            object.__setattr__(self, name, x)
        object.__setattr__(self, "Pi", Pi)
        object.__setattr__(self, "sigma_X", sigma_X)
        object.__setattr__(self, "Sigma", Sigma)
        object.__setattr__(self, "theta", theta)

    @property
    def K(self) -> int:
        return self.Pi.shape[0]

    @property
    def N(self) -> int:
        return self.Sigma.shape[0]

    def to_kv(self) -> str:
        return dump_kv({"model": "affine", "Pi": self.Pi, "sigma_X": self.sigma_X, "Sigma": self.Sigma,
                        "phi": self.phi, "g_bar": self.g_bar, "sigma_D": self.sigma_D,
                        "lambda_bar": self.lambda_bar, "theta": self.theta, "r_f": self.r_f,
                        "gamma": self.gamma})

    @classmethod
    def from_kv(cls, kv: dict) -> "ModelParams":
        try:
            return cls(Pi=to_matrix(kv["Pi"], "Pi"), sigma_X=to_matrix(kv["sigma_X"], "sigma_X"),
                       Sigma=to_matrix(kv["Sigma"], "Sigma"), phi=to_vector(kv["phi"], "phi"),
                       g_bar=to_float(kv["g_bar"], "g_bar"), sigma_D=to_vector(kv["sigma_D"], "sigma_D"),
                       lambda_bar=to_vector(kv["lambda_bar"], "lambda_bar"),
                       theta=to_matrix(kv["theta"], "theta"), r_f=to_float(kv["r_f"], "r_f"),
                       gamma=to_vector(kv["gamma"], "gamma") if "gamma" in kv else None)
        except KeyError as exc:
            raise ParameterError(exc.args[0], "missing key") from None


@dataclass(frozen=True)
class ModelParams2D:
    """Two-state economy with expected growth ``z`` and risk price ``y``.

    ``dd[t+1] = g_bar + z[t] - sigma_D'Sigma sigma_D / 2 + sigma_D' eps[t+1]``,
    ``z`` and ``y`` are AR(1) with loadings ``sigma_z``, ``sigma_y`` and the
    price of risk is ``sigma_lambda * (lambda_bar + y)``.
    """

    rho_z: float
    rho_y: float
    sigma_z: np.ndarray
    sigma_y: np.ndarray
    sigma_D: np.ndarray
    sigma_lambda: np.ndarray
    Sigma: np.ndarray
    g_bar: float
    lambda_bar: float
    r_f: float

    def __post_init__(self):
        for name in ("rho_z", "rho_y"):
            x = float(getattr(self, name))
            if not -1.0 < x < 1.0:
                raise ParameterError(name, f"must lie in (-1, 1), got {x}")
            object.__setattr__(self, name, x)
        for name in ("g_bar", "lambda_bar", "r_f"):
            x = float(getattr(self, name))
            if not math.isfinite(x):
                raise ParameterError(name, "non-finite")
            object.__setattr__(self, name, x)
        N = None
        for name in ("sigma_z", "sigma_y", "sigma_D", "sigma_lambda"):
            v = _frozen(getattr(self, name), 1, name)
            if N is None:
                N = v.shape[0]
            elif v.shape[0] != N:
                raise ParameterError(name, f"expected length {N}, got {v.shape[0]}")
            object.__setattr__(self, name, v)
        Sigma = _frozen(self.Sigma, 2, "Sigma")
        _check_cov(Sigma, N)
        object.__setattr__(self, "Sigma", Sigma)

    @property
    def N(self) -> int:
        return self.Sigma.shape[0]

    @property
    def jensen(self) -> float:
        """sigma_D' Sigma sigma_D / 2."""
        return 0.5 * float(self.sigma_D @ self.Sigma @ self.sigma_D)

    def replace(self, **kw) -> "ModelParams2D":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return ModelParams2D(**d)

    def to_model_params(self) -> ModelParams:
        """Embed as a K=2 affine model with states ordered (z, y)."""
        return ModelParams(
            Pi=np.diag([self.rho_z, self.rho_y]),
            sigma_X=np.column_stack([self.sigma_z, self.sigma_y]),
            Sigma=self.Sigma,
            phi=np.array([1.0, 0.0]),
            g_bar=self.g_bar,
            sigma_D=self.sigma_D,
            lambda_bar=self.lambda_bar * self.sigma_lambda,
            theta=np.column_stack([np.zeros(self.N), self.sigma_lambda]),
            r_f=self.r_f,
        )

    def to_kv(self) -> str:
        return dump_kv({"model": "2d", **{k: getattr(self, k) for k in self.__dataclass_fields__}})

    @classmethod
    def from_kv(cls, kv: dict) -> "ModelParams2D":
        kw = {}
        try:
            for k in ("rho_z", "rho_y", "g_bar", "lambda_bar", "r_f"):
                kw[k] = to_float(kv[k], k)
            for k in ("sigma_z", "sigma_y", "sigma_D", "sigma_lambda"):
                kw[k] = to_vector(kv[k], k)
            kw["Sigma"] = to_matrix(kv["Sigma"], "Sigma")
        except KeyError as exc:
            raise ParameterError(exc.args[0], "missing key") from None
        return cls(**kw)


@dataclass(frozen=True)
class StripCoefficients:
    """``A[n]``, ``B[n]`` for n = 0..n_max; ``B`` has shape (n_max + 1, K)."""

    A: np.ndarray
    B: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.A) - 1

    def to_csv(self, path) -> None:
        from .data import format_float
        K = self.B.shape[1]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(["n", "A"] + [f"B_{k + 1}" for k in range(K)]) + "\n")
            for n in range(len(self.A)):
                fh.write(",".join([str(n), format_float(self.A[n])]
                                  + [format_float(b) for b in self.B[n]]) + "\n")


@dataclass(frozen=True)
class MarketCoefficients:
    """Market log price-dividend ratio ``pd = A + B'X``."""

    A: float
    B: np.ndarray
    kappa0: float
    kappa1: float


@dataclass(frozen=True)
class ClosedForm2D:
    kappa0: float
    kappa1: float
    A_pd: float
    B_pd: float
    C_pd: float
    A_1: float
    B_1: float
    C_1: float
    A_er: float
    B_er: float
    rho_z: float = 0.0
    rho_y: float = 0.0

    @property
    def dr_loadings(self) -> tuple[float, float, float]:
        """(constant, y-loading, z-loading) of dr = pd - s1."""
        return self.A_pd - self.A_1, self.B_pd - self.B_1, self.C_pd - self.C_1

    @property
    def dr_slope(self) -> float:
        """Slope of expected return on dr when the z-loading vanishes."""
        return self.B_er / (self.B_pd - self.B_1)

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# ---------------------------------------------------------------------------

def loglinearize(pd_bar: float) -> tuple[float, float]:
    """Log-linearization constants at mean log price-dividend ratio ``pd_bar``."""
    pd_bar = float(pd_bar)
    if pd_bar == -math.inf:
        return 0.0, 0.0
    # logaddexp keeps both constants accurate for large |pd_bar|
    k1 = 0.5 * (1.0 + math.tanh(0.5 * pd_bar))
    log1p_e = float(np.logaddexp(0.0, pd_bar))
    k0 = log1p_e - k1 * pd_bar
    return k0, k1


def solve_strip_coefficients(params: ModelParams, n_max: int) -> StripCoefficients:
    """Run the strip recursion out to maturity ``n_max``."""
    n_max = int(n_max)
    if n_max < 0:
        raise ValidationError("n_max must be non-negative")
    p = params
    S = p.Sigma
    thS = p.theta.T @ S
    M = p.Pi.T - thS @ p.sigma_X
    c = p.phi - thS @ p.sigma_D - p.gamma
    a0 = p.g_bar - 0.5 * p.sigma_D @ S @ p.sigma_D - p.r_f
    A = np.zeros(n_max + 1)
    B = np.zeros((n_max + 1, p.K))
    for n in range(1, n_max + 1):
        v = p.sigma_D + p.sigma_X @ B[n - 1]
        B[n] = M @ B[n - 1] + c
        A[n] = A[n - 1] + a0 - v @ S @ p.lambda_bar + 0.5 * v @ S @ v
        if not (math.isfinite(A[n]) and np.all(np.isfinite(B[n]))):
            raise NumericalError(f"non-finite strip coefficient at n={n}")
    A.setflags(write=False)
    B.setflags(write=False)
    return StripCoefficients(A, B)


def solve_market_pd(params: ModelParams, kappa: tuple[float, float]) -> MarketCoefficients:
    """Market log price-dividend loadings under log-linearized returns."""
    k0, k1 = map(float, kappa)
    p = params
    S = p.Sigma
    thS = p.theta.T @ S
    M = np.eye(p.K) - k1 * p.Pi.T + k1 * thS @ p.sigma_X
    rhs = p.phi - thS @ p.sigma_D - p.gamma
    if p.K and np.linalg.cond(M) > 1.0 / RCOND_MIN:
        raise NumericalError("matrix I - k1 Pi' + k1 theta'Sigma sigma_X is singular")
    B = np.linalg.solve(M, rhs) if p.K else np.zeros(0)
    w = k1 * p.sigma_X @ B
    num = (p.g_bar - p.r_f + k0 - (w + p.sigma_D) @ S @ p.lambda_bar
           + 0.5 * w @ S @ w + w @ S @ p.sigma_D)
    if k1 == 1.0:
        raise NumericalError("kappa1 = 1 leaves the constant undetermined")
    A = num / (1.0 - k1)
    if not (math.isfinite(A) and np.all(np.isfinite(B))):
        raise NumericalError("non-finite market coefficients")
    B.setflags(write=False)
    return MarketCoefficients(float(A), B, k0, k1)


def solve_2d(params: ModelParams2D, pd_bar: float) -> ClosedForm2D:
    """Closed-form loadings of pd, s1 and expected return in the two-state model."""
    p = params
    S = p.Sigma
    k0, k1 = loglinearize(pd_bar)
    if abs(1.0 - k1 * p.rho_z) < 1e-14:
        raise ParameterError("rho_z", "kappa1 * rho_z equals 1")
    den = float(1.0 + k1 * p.sigma_y @ S @ p.sigma_lambda - k1 * p.rho_y)
    if abs(den) < 1e-14:
        raise ParameterError("rho_y", "1 + k1 sigma_y'Sigma sigma_lambda - k1 rho_y vanishes")
    C_pd = 1.0 / (1.0 - k1 * p.rho_z)
    B_pd = -float((p.sigma_D + k1 * C_pd * p.sigma_z) @ S @ p.sigma_lambda) / den
    v = p.sigma_D + k1 * B_pd * p.sigma_y + k1 * C_pd * p.sigma_z
    jensen = p.jensen
    A_pd = (p.g_bar - p.r_f + k0 - jensen
            + 0.5 * float(v @ S @ (v - 2.0 * p.lambda_bar * p.sigma_lambda))) / (1.0 - k1)
    B_1 = -float(p.sigma_lambda @ S @ p.sigma_D)
    A_1 = p.g_bar - p.r_f + p.lambda_bar * B_1
    A_er = k0 - (1.0 - k1) * A_pd + p.g_bar - jensen
    B_er = -(1.0 - k1 * p.rho_y) * B_pd
    return ClosedForm2D(k0, k1, A_pd, B_pd, C_pd, A_1, B_1, 1.0, A_er, B_er, p.rho_z, p.rho_y)


def solve_pd_bar(params: ModelParams2D, lo: float = 0.5, hi: float = 8.0) -> float:
    """Mean log price-dividend ratio consistent with its own linearization point.

    Scans [lo, hi] for the first crossing of ``A_pd(pd_bar) - pd_bar`` from
    positive to negative (the convexity term can create a second, explosive
    root at high valuations).
    """
    def gap(x):
        return solve_2d(params, x).A_pd - x

    grid = np.linspace(lo, hi, 61)
    vals = [gap(x) for x in grid]
    for a, b, ga, gb in zip(grid, grid[1:], vals, vals[1:]):
        if ga > 0 >= gb:
            return brentq(gap, a, b, xtol=1e-14, rtol=1e-14, maxiter=200)
    raise ParameterError("params", f"no self-consistent mean pd in [{lo}, {hi}]")


# ---------------------------------------------------------------------------

_2D_SELECTORS = ("pd", "s1", "dr", "er")


def valuation_ratio(coeffs, X, which=None):
    """Evaluate an affine log ratio at state(s) ``X``.

    ``coeffs`` may be :class:`StripCoefficients` (``which`` = maturity),
    :class:`MarketCoefficients` or :class:`ClosedForm2D` (``which`` in
    pd, s1, dr, er; ``X`` ordered (z, y)).  ``X`` may carry leading batch
    dimensions.
    """
    X = np.asarray(X, dtype=float)
    if isinstance(coeffs, ClosedForm2D):
        if X.shape[-1:] != (2,):
            raise ValidationError(f"two-state model needs X[..., 2], got shape {X.shape}")
        z, y = X[..., 0], X[..., 1]
        c = coeffs
        if which == "pd":
            out = c.A_pd + c.B_pd * y + c.C_pd * z
        elif which == "s1":
            out = c.A_1 + c.B_1 * y + c.C_1 * z
        elif which == "dr":
            out = (c.A_pd + c.B_pd * y + c.C_pd * z) - (c.A_1 + c.B_1 * y + c.C_1 * z)
        elif which == "er":
            out = c.A_er + c.B_er * y + 0.0 * z
        else:
            raise ValidationError(f"selector must be one of {_2D_SELECTORS}, got {which!r}")
    elif isinstance(coeffs, MarketCoefficients):
        if X.shape[-1:] != coeffs.B.shape:
            raise ValidationError(f"state dimension {X.shape[-1:]} != {coeffs.B.shape}")
        out = coeffs.A + X @ coeffs.B
    elif isinstance(coeffs, StripCoefficients):
        K = coeffs.B.shape[1]
        if X.shape[-1:] != (K,):
            raise ValidationError(f"state dimension {X.shape[-1:]} != ({K},)")
        n = int(which)
        if n != which or not 0 <= n <= coeffs.n_max:
            raise ValidationError(f"maturity must be an integer in 0..{coeffs.n_max}, got {which!r}")
        out = coeffs.A[n] + X @ coeffs.B[n]
    else:
        raise ValidationError(f"unsupported coefficient type {type(coeffs).__name__}")
    return float(out) if np.ndim(out) == 0 else out


def _solve_loadings(Bmat, rhs):
    K = Bmat.shape[0]
    rank = int(np.linalg.matrix_rank(Bmat))
    cond = np.linalg.cond(Bmat)
    if rank < K or not 1.0 / cond >= RCOND_MIN:
        raise DegeneracyError(f"loading matrix has rank {rank} < {K} (condition number {cond:.3g})",
                              rank=min(rank, K - 1))
    return np.linalg.solve(Bmat, rhs.T).T, cond


def recover_states(ratios, maturities, coeffs: StripCoefficients, return_condition: bool = False):
    """Invert K strip ratios for the K-dim state.

    ``ratios`` has shape (K,) or (T, K), column i observed at ``maturities[i]``.
    """
    mats = [int(m) for m in maturities]
    K = coeffs.B.shape[1]
    if len(mats) != K:
        raise ValidationError(f"need {K} maturities, got {len(mats)}")
    s = np.asarray(ratios, dtype=float)
    if s.shape[-1] != K:
        raise ValidationError(f"ratios must have trailing dimension {K}")
    Bmat = np.vstack([coeffs.B[m] for m in mats])
    A = np.array([coeffs.A[m] for m in mats])
    X, cond = _solve_loadings(Bmat, np.atleast_2d(s - A))
    X = X.reshape(s.shape)
    return (X, cond) if return_condition else X


def recover_states_2d(pd, s1, cf: ClosedForm2D) -> tuple[np.ndarray, np.ndarray]:
    """States (z, y) from the market pd and one-year strip ratio s1."""
    Bmat = np.array([[cf.C_pd, cf.B_pd], [cf.C_1, cf.B_1]])
    rhs = np.column_stack([np.atleast_1d(pd) - cf.A_pd, np.atleast_1d(s1) - cf.A_1])
    X, _ = _solve_loadings(Bmat, rhs)
    if np.ndim(pd) == 0:
        return float(X[0, 0]), float(X[0, 1])
    return X[:, 0], X[:, 1]
